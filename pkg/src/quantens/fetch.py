"""Acquisition helper for the public companion dataset.

The forecasts and prices used throughout the package come from the open
dataset published alongside the distributional neural network study of the
German EPEX day-ahead market: 99 percentile forecasts per model, day and
delivery hour, plus realized hourly prices, with a 554-day out-of-sample
test window (2019-06-27 .. 2020-12-31).

``fetch_dataset`` downloads the repository archive; everything else in the
package runs fully offline. The raw files must then be converted to the
package's CSV schema (see DATASET_DOC).
"""

from __future__ import annotations

import io
import zipfile
from pathlib import Path

DATASET_REPO = "https://github.com/gmarcjasz/distributionalnn"
ARCHIVE_URLS = (
    DATASET_REPO + "/archive/refs/heads/main.zip",
    DATASET_REPO + "/archive/refs/heads/master.zip",
)

DATASET_DOC = f"""\
Companion dataset
-----------------
Source repository: {DATASET_REPO}
Contents: hourly German EPEX day-ahead prices (2015-2020) and probabilistic
price forecasts from distributional deep neural networks and quantile
regression models - 99 predicted percentiles per model, day and hour - over
the 554-day test period 2019-06-27 .. 2020-12-31. Prices and fundamentals
originate from the ENTSO-E Transparency platform.

Expected input format for this package
--------------------------------------
One CSV per expert model:   date,hour,q01,q02,...,q99
  - date: ISO 8601 day (YYYY-MM-DD), hour: 1..24
  - q01..q99: percentile forecasts in EUR/MWh, non-decreasing per row
Realized prices:            date,hour,price
Every (date, hour) pair must appear exactly once; days must be contiguous.

Point `data.experts` / `data.prices` in the run config at the converted
files, or set QUANTENS_DATA to a directory containing them for the
dataset-conditional tests.
"""


def fetch_dataset(out_dir: str | Path, timeout: float = 60.0) -> Path:
    """Download and extract the companion-dataset repository archive.

    Returns the extraction root. Raises the underlying network error when
    the dataset is unreachable (the CLI converts that into a clean exit).
    """
    import requests

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    last_error: Exception | None = None
    for url in ARCHIVE_URLS:
        try:
            response = requests.get(url, timeout=timeout)
            response.raise_for_status()
        except requests.RequestException as exc:
            last_error = exc
            continue
        with zipfile.ZipFile(io.BytesIO(response.content)) as archive:
            archive.extractall(out_dir)
            root = out_dir / archive.namelist()[0].split("/")[0]
        return root
    assert last_error is not None
    raise last_error
