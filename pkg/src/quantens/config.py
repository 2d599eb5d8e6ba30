"""Run configuration: YAML schema, validation and defaults.

A run config declares the dataset files, the ensembles to build (each a
named expert subset with an averaging method), the risk-appetite grid for
trading, learner hyperparameters and the output directory. Relative paths
are resolved against the config file's own directory so a config shipped
next to its data keeps working from any working directory.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .learner import LearnerConfig
from .trading import PROFIT_CHECKS, RiskConfig

AVERAGING_METHODS = ("qEns", "CRPS")
DEFAULT_ALPHAS = (0.5, 0.6, 0.7, 0.8, 0.9)

# Paper-pool naming convention: DDNN_{distribution}_{averaging}_{experts}
_NAME_RE = re.compile(r"^DDNN_(N|JSU)_(qEns|CRPS)_\w+$")


@dataclass(frozen=True)
class EnsembleSpec:
    """One ensemble to build: a named expert subset plus averaging method."""

    name: str
    experts: tuple[str, ...]
    averaging: str

    def __post_init__(self):
        if not self.name:
            raise ConfigError("ensemble name must not be empty")
        if self.averaging not in AVERAGING_METHODS:
            raise ConfigError(
                f"ensemble {self.name!r}: unknown averaging "
                f"{self.averaging!r}; expected one of {AVERAGING_METHODS}"
            )
        if not self.experts:
            raise ConfigError(f"ensemble {self.name!r} lists no experts")
        if len(set(self.experts)) != len(self.experts):
            raise ConfigError(f"ensemble {self.name!r} lists a duplicate expert")


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration."""

    expert_paths: dict[str, Path]
    price_path: Path
    ensembles: tuple[EnsembleSpec, ...]
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    profit_check: str = "worst_case"
    reference: str | None = None
    output_dir: Path = Path("out")
    seed: int | None = None


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"missing required key {key!r} in {context}")
    return mapping[key]


def _check_name_convention(spec: EnsembleSpec) -> None:
    """Warn (never fail) when a paper-pool ensemble name strays from the
    DDNN_{distribution}_{averaging}_{experts} convention."""
    if not spec.name.startswith("DDNN_"):
        return
    match = _NAME_RE.match(spec.name)
    if match is None:
        warnings.warn(
            f"ensemble name {spec.name!r} does not follow the "
            "DDNN_{distribution}_{averaging}_{experts} convention",
            stacklevel=3,
        )
    elif match.group(2) != spec.averaging:
        warnings.warn(
            f"ensemble name {spec.name!r} advertises {match.group(2)} "
            f"but is configured with averaging={spec.averaging!r}",
            stacklevel=3,
        )


def parse_config(raw: dict, base_dir: Path) -> RunConfig:
    """Validate a parsed YAML mapping and resolve paths against base_dir."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")

    data = _require(raw, "data", "config")
    if not isinstance(data, dict):
        raise ConfigError("'data' must be a mapping")
    experts_raw = _require(data, "experts", "'data'")
    if not isinstance(experts_raw, dict) or not experts_raw:
        raise ConfigError("'data.experts' must map expert names to CSV paths")
    expert_paths = {
        str(name): (base_dir / str(path)).resolve()
        for name, path in experts_raw.items()
    }
    price_path = (base_dir / str(_require(data, "prices", "'data'"))).resolve()

    ensembles_raw = raw.get("ensembles", [])
    if not isinstance(ensembles_raw, list):
        raise ConfigError("'ensembles' must be a list")
    ensembles = []
    for i, item in enumerate(ensembles_raw):
        if not isinstance(item, dict):
            raise ConfigError(f"ensemble #{i} must be a mapping")
        spec = EnsembleSpec(
            name=str(_require(item, "name", f"ensemble #{i}")),
            experts=tuple(str(e) for e in _require(item, "experts", f"ensemble #{i}")),
            averaging=str(item.get("averaging", "qEns")),
        )
        missing = [e for e in spec.experts if e not in expert_paths]
        if missing:
            raise ConfigError(
                f"ensemble {spec.name!r} references unknown expert(s): "
                + ", ".join(missing)
            )
        _check_name_convention(spec)
        ensembles.append(spec)
    names = [s.name for s in ensembles]
    if len(set(names)) != len(names):
        raise ConfigError("ensemble names must be unique")

    alphas = tuple(float(a) for a in raw.get("alphas", DEFAULT_ALPHAS))
    profit_check = str(raw.get("trading", {}).get("profit_check", "worst_case"))
    if profit_check not in PROFIT_CHECKS:
        raise ConfigError(f"trading.profit_check must be one of {PROFIT_CHECKS}")
    for a in alphas:  # reject off-grid risk appetites up front
        try:
            RiskConfig(alpha=a, profit_check=profit_check)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    learner_raw = raw.get("learner", {})
    if not isinstance(learner_raw, dict):
        raise ConfigError("'learner' must be a mapping")
    known = {"lambda_grid", "n_basis", "eta_max", "pool_hours", "smooth"}
    unknown = set(learner_raw) - known
    if unknown:
        raise ConfigError(f"unknown learner option(s): {sorted(unknown)}")
    kwargs = dict(learner_raw)
    if "lambda_grid" in kwargs:
        kwargs["lambda_grid"] = tuple(float(v) for v in kwargs["lambda_grid"])
    try:
        learner = LearnerConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid learner config: {exc}") from exc

    reference = raw.get("evaluation", {}).get("reference")
    if reference is not None:
        reference = str(reference)
        if reference not in names:
            raise ConfigError(
                f"evaluation.reference {reference!r} is not a configured ensemble"
            )

    seed = raw.get("seed")
    if seed is not None:
        seed = int(seed)

    return RunConfig(
        expert_paths=expert_paths,
        price_path=price_path,
        ensembles=tuple(ensembles),
        alphas=alphas,
        learner=learner,
        profit_check=profit_check,
        reference=reference,
        output_dir=(base_dir / str(raw.get("output_dir", "out"))).resolve(),
        seed=seed,
    )


def load_config(path: str | Path) -> RunConfig:
    """Load and validate a YAML run config from disk."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return parse_config(raw, path.parent)
