"""
Run configuration for loss scans.

Values come from a YAML file (resources/config.yaml by default) and are
overridden by command-line flags. Every problem is reported as a ConfigError
naming the field and, when the value came from the file, its line.
"""

import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import yaml
from dotenv import load_dotenv

from src.optimization.param_opt import SearchSpec
from src.physics.channel_model import ChannelParams
from src.utils.constants import (
    DEFAULT_DARK_COUNT,
    DEFAULT_DET_EFF,
    DEFAULT_GRID_SIZE,
    DEFAULT_LOSS_SCAN,
    DEFAULT_M_LIST,
    DEFAULT_MC_TRIALS,
    DEFAULT_MISALIGN,
    DEFAULT_MU_RANGE,
    DEFAULT_NU_RANGE,
    DEFAULT_OMEGA,
    DEFAULT_RECONCILIATION_F,
    DEFAULT_REFINE_ROUNDS,
    DEFAULT_SHRINK,
    WORKERS_ENV_VAR,
)

logger = logging.getLogger(__name__)

# Path to the configuration file
CONFIG_PATH = Path(__file__).parent.parent.parent / "resources" / "config.yaml"

DEFAULTS: Dict[str, Any] = {
    "protocol.m_list": DEFAULT_M_LIST,
    "protocol.f": DEFAULT_RECONCILIATION_F,
    "protocol.omega": DEFAULT_OMEGA,
    "channel.loss.start": DEFAULT_LOSS_SCAN["start"],
    "channel.loss.end": DEFAULT_LOSS_SCAN["end"],
    "channel.loss.step": DEFAULT_LOSS_SCAN["step"],
    "channel.det_eff": DEFAULT_DET_EFF,
    "channel.dark": DEFAULT_DARK_COUNT,
    "channel.misalign": DEFAULT_MISALIGN,
    "search.mu_range": list(DEFAULT_MU_RANGE),
    "search.nu_range": list(DEFAULT_NU_RANGE),
    "search.grid_size": DEFAULT_GRID_SIZE,
    "search.refine_rounds": DEFAULT_REFINE_ROUNDS,
    "search.shrink": DEFAULT_SHRINK,
    "monte_carlo.validate": False,
    "monte_carlo.trials": DEFAULT_MC_TRIALS,
    "output.path": "results/rate_scan.csv",
    "output.seed": 0,
}

# Keys that only come from flags or the environment
RUNTIME_KEYS = ("workers",)


class ConfigError(ValueError):
    """Invalid run configuration, with the offending field and YAML line when known."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = ""
        if field is not None:
            location = f"{field}" + (f" (line {line})" if line is not None else "") + ": "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")


@dataclass(frozen=True)
class LossScan:
    """Inclusive loss grid start, start + step, ..., end."""

    start: float
    end: float
    step: float

    def values(self) -> List[float]:
        count = int(math.floor((self.end - self.start) / self.step + 1e-9))
        return [self.start + self.step * i for i in range(count + 1)]


@dataclass(frozen=True)
class RunConfig:
    """Everything a scan needs.

    Attributes:
        m_list: Phase counts, one curve each
        loss: Loss grid in dB
        channel: Detector parameters (its loss is replaced at every scan point)
        f: Reconciliation inefficiency
        omega: Fixed vacuum-decoy intensity
        search: Intensity search settings
        validate_mc: Cross-check every row against the Monte Carlo engine
        mc_trials: Trials per Monte Carlo check
        out: Output CSV path
        seed: Base seed for Monte Carlo checks
        workers: joblib worker count for scan points
    """

    m_list: List[int]
    loss: LossScan
    channel: ChannelParams
    f: float = DEFAULT_RECONCILIATION_F
    omega: float = DEFAULT_OMEGA
    search: SearchSpec = field(default_factory=SearchSpec)
    validate_mc: bool = False
    mc_trials: int = DEFAULT_MC_TRIALS
    out: Path = Path("results/rate_scan.csv")
    seed: int = 0
    workers: int = 1

    @property
    def losses(self) -> List[float]:
        return self.loss.values()


def _flatten(data: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat = {}
    for key, value in data.items():
        path = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, f"{path}."))
        else:
            flat[path] = value
    return flat


def _key_lines(node: Optional[yaml.Node], prefix: str = "") -> Dict[str, int]:
    """1-based line of every key in a composed YAML mapping, keyed by dotted path."""
    lines = {}
    if not isinstance(node, yaml.MappingNode):
        return lines
    for key_node, value_node in node.value:
        path = f"{prefix}{key_node.value}"
        lines[path] = key_node.start_mark.line + 1
        lines.update(_key_lines(value_node, f"{path}."))
    return lines


class _FieldReader:
    """Typed access to flattened config values with field/line diagnostics."""

    def __init__(self, values: Dict[str, Any], lines: Dict[str, int]):
        self.values = values
        self.lines = lines

    def fail(self, key: str, message: str) -> ConfigError:
        return ConfigError(message, field=key, line=self.lines.get(key))

    def number(self, key: str, low: float = -math.inf, high: float = math.inf, strict_low: bool = False) -> float:
        value = self.values[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.fail(key, f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value) or value < low or value > high or (strict_low and value == low):
            bound = f"> {low}" if strict_low else f">= {low}"
            raise self.fail(key, f"value {value} out of range ({bound}" + (f", <= {high})" if math.isfinite(high) else ")"))
        return value

    def integer(self, key: str, low: int) -> int:
        value = self.values[key]
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.fail(key, f"expected an integer, got {value!r}")
        if value < low:
            raise self.fail(key, f"value {value} must be >= {low}")
        return value

    def flag(self, key: str) -> bool:
        value = self.values[key]
        if not isinstance(value, bool):
            raise self.fail(key, f"expected true or false, got {value!r}")
        return value

    def pair(self, key: str) -> tuple:
        value = self.values[key]
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise self.fail(key, f"expected a [low, high] pair, got {value!r}")
        for item in value:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise self.fail(key, f"expected numbers, got {value!r}")
        return float(value[0]), float(value[1])

    def phase_counts(self, key: str) -> List[int]:
        value = self.values[key]
        if not isinstance(value, (list, tuple)):
            raise self.fail(key, f"expected a list of phase counts, got {value!r}")
        if not value:
            raise self.fail(key, "at least one phase count M is required")
        for m in value:
            if isinstance(m, bool) or not isinstance(m, int) or m < 2 or m % 2:
                raise self.fail(key, f"phase counts must be even integers >= 2, got {m!r}")
        return list(value)


def _read_file(path: Path) -> tuple:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    try:
        data = yaml.safe_load(text) or {}
        lines = _key_lines(yaml.compose(text))
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"invalid YAML in {path}: {getattr(e, 'problem', e)}", line=mark.line + 1 if mark else None) from e
    if not isinstance(data, Mapping):
        raise ConfigError(f"config file {path} must hold a mapping at top level", line=1)
    return data, lines


def _default_workers() -> int:
    raw = os.getenv(WORKERS_ENV_VAR, "1")
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"expected an integer worker count, got {raw!r}", field=WORKERS_ENV_VAR) from e


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Load, merge and validate a run configuration.

    Args:
        path: YAML file; defaults to resources/config.yaml
        overrides: Dotted keys (e.g. "channel.dark") or "workers" mapped to flag values; None values are ignored

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: On unreadable files, YAML syntax errors, unknown keys or invalid values
    """
    load_dotenv()
    path = Path(path) if path is not None else CONFIG_PATH
    data, lines = _read_file(path)

    values = dict(DEFAULTS)
    for key, value in _flatten(data).items():
        if key not in DEFAULTS:
            raise ConfigError("unknown configuration key", field=key, line=lines.get(key))
        values[key] = value

    values["workers"] = _default_workers()
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in DEFAULTS and key not in RUNTIME_KEYS:
            raise ConfigError("unknown override", field=key)
        values[key] = value
        lines.pop(key, None)

    reader = _FieldReader(values, lines)
    m_list = reader.phase_counts("protocol.m_list")

    start = reader.number("channel.loss.start", low=0.0)
    end = reader.number("channel.loss.end", low=0.0)
    step = reader.number("channel.loss.step", low=0.0, strict_low=True)
    if end < start:
        raise reader.fail("channel.loss.end", f"scan end {end} is below scan start {start}")

    channel = ChannelParams(
        loss_db=start,
        det_eff=reader.number("channel.det_eff", low=0.0, high=1.0),
        dark=reader.number("channel.dark", low=0.0, high=1.0),
        misalign=reader.number("channel.misalign", low=0.0, high=0.5),
    )
    f = reader.number("protocol.f", low=1.0)
    omega = reader.number("protocol.omega", low=0.0)

    try:
        search = SearchSpec(
            mu_range=reader.pair("search.mu_range"),
            nu_range=reader.pair("search.nu_range"),
            grid_size=reader.integer("search.grid_size", low=4),
            refine_rounds=reader.integer("search.refine_rounds", low=0),
            shrink=reader.number("search.shrink", low=1.0, strict_low=True),
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), field="search", line=lines.get("search")) from e
    if omega >= search.nu_range[0]:
        raise reader.fail("protocol.omega", f"omega={omega} must lie below the decoy range {search.nu_range}")

    workers = reader.integer("workers", low=-1)
    if workers == 0:
        raise reader.fail("workers", "worker count must be a positive integer or -1 (all cores)")

    output = values["output.path"]
    if not isinstance(output, (str, Path)) or not str(output):
        raise reader.fail("output.path", f"expected a file path, got {output!r}")

    cfg = RunConfig(
        m_list=m_list,
        loss=LossScan(start=start, end=end, step=step),
        channel=channel,
        f=f,
        omega=omega,
        search=search,
        validate_mc=reader.flag("monte_carlo.validate"),
        mc_trials=reader.integer("monte_carlo.trials", low=1),
        out=Path(output),
        seed=reader.integer("output.seed", low=0),
        workers=workers,
    )
    logger.info(f"Loaded config from {path}: M={cfg.m_list}, loss {start}..{end} dB step {step}, {cfg.workers} worker(s)")
    return cfg
