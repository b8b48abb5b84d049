"""
Run configuration for solab.

Configuration sources (lowest → highest precedence):
1. Defaults
2. --config file (``key = value`` lines with dotted keys)
3. pyproject.toml ([tool.solab] section)
4. Environment variables (SOLAB_*; ``__`` separates sections)
5. CLI arguments

Every source is reduced to a DottedDict of leaves; ``build_run_config``
coerces the merged tree into frozen dataclasses and checks ranges.
"""

import copy
import math
import os
import pathlib
import sys
from dataclasses import asdict, dataclass
from typing import Any

# tomllib fallback for Python 3.10
if sys.version_info < (3, 11):
    import tomli as tomllib
else:
    import tomllib

from solab.errors import ConfigError
from solab.util.dotted_dict import DottedDict

ENV_PREFIX = "SOLAB_"
ENV_ALIASES = {"output_dir": "output.dir"}

SEED_PROFILES = ("cylinder", "sphere", "neutral_ansatz", "file")
ERROR_MODELS = ("zero", "default", "custom")
CAPS = ("none", "bryant")
FORMATS = ("csv", "json", "svg")

DEFAULT_CONFIG = DottedDict({
    "grid": {"n": 64, "zmax": "auto", "closure_cells": 3.0},
    "flow": {
        "s1": 100.0,
        "s0": 50.0,
        "snapshots": 51,
        "seed_profile": "cylinder",
        "ds": "auto",
        "step_safety": 0.2,
        "regrid_fraction": 0.1,
        "seed_file": None,
        "cap": "none",
        "ansatz_L": 4.0,
    },
    "error": {"model": "default", "c_rad": 0.5, "c_orb": 0.5},
    "spectral": {
        "n_modes": 8,
        "cutoff_exponent": 0.01,
        "n_nodes": 64,
        "recursion_cap": 1.0,
        "dichotomy_threshold": 0.5,
    },
    "barrier": {"a": 100.0, "a_min": 50.0, "n_verify": 10000},
    "asymptotics": {"theta": 0.25, "M": 20.0, "L": 4.0, "eta": 0.9, "gamma": 1.0},
    "bryant": {"r_max": 1000.0, "tol": 1e-8},
    "output": {"dir": "solab-out", "formats": ["csv", "json", "svg"], "plots": True},
})

# keys whose value may be the literal "auto" instead of a number
AUTO_KEYS = {"grid.zmax", "flow.ds"}
OPTIONAL_KEYS = {"flow.seed_file"}


@dataclass(frozen=True)
class GridConfig:
    n: int
    zmax: float | str
    closure_cells: float


@dataclass(frozen=True)
class FlowConfig:
    s1: float
    s0: float
    snapshots: int
    seed_profile: str
    ds: float | str
    step_safety: float
    regrid_fraction: float
    seed_file: str | None
    cap: str
    ansatz_L: float


@dataclass(frozen=True)
class ErrorConfig:
    model: str
    c_rad: float
    c_orb: float


@dataclass(frozen=True)
class SpectralConfig:
    n_modes: int
    cutoff_exponent: float
    n_nodes: int
    recursion_cap: float
    dichotomy_threshold: float


@dataclass(frozen=True)
class BarrierConfig:
    a: float
    a_min: float
    n_verify: int


@dataclass(frozen=True)
class AsymptoticsConfig:
    theta: float
    M: float
    L: float
    eta: float
    gamma: float


@dataclass(frozen=True)
class BryantConfig:
    r_max: float
    tol: float


@dataclass(frozen=True)
class OutputConfig:
    dir: str
    formats: tuple[str, ...]
    plots: bool


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig
    flow: FlowConfig
    error: ErrorConfig
    spectral: SpectralConfig
    barrier: BarrierConfig
    asymptotics: AsymptoticsConfig
    bryant: BryantConfig
    output: OutputConfig

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["output"]["formats"] = list(self.output.formats)
        return out


SECTIONS = {
    "grid": GridConfig,
    "flow": FlowConfig,
    "error": ErrorConfig,
    "spectral": SpectralConfig,
    "barrier": BarrierConfig,
    "asymptotics": AsymptoticsConfig,
    "bryant": BryantConfig,
    "output": OutputConfig,
}


# ----------------------------
# Coercion
# ----------------------------

def _to_bool(key: str, value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("true", "yes", "1"):
        return True
    if text in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got '{value}'", [key])


def _to_float(key: str, value: Any) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got '{value}'", [key]) from None
    if not math.isfinite(x):
        raise ConfigError(f"{key}: must be finite, got '{value}'", [key])
    return x


def _to_int(key: str, value: Any) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected an integer, got '{value}'", [key])
    x = _to_float(key, value)
    if x != int(x):
        raise ConfigError(f"{key}: expected an integer, got '{value}'", [key])
    return int(x)


def coerce(key: str, value: Any) -> Any:
    """Convert a raw value to the type of the key's default."""
    if key in AUTO_KEYS and str(value).strip().lower() == "auto":
        return "auto"
    if key in OPTIONAL_KEYS:
        return None if value in (None, "") else str(value)
    default = DEFAULT_CONFIG[key]
    if isinstance(default, bool):
        return _to_bool(key, value)
    if isinstance(default, int):
        return _to_int(key, value)
    if isinstance(default, float) or key in AUTO_KEYS:
        return _to_float(key, value)
    if isinstance(default, list):
        items = value if isinstance(value, (list, tuple)) else str(value).split(",")
        return [str(i).strip() for i in items if str(i).strip()]
    return str(value).strip()


def unknown_keys(cfg: DottedDict) -> list[str]:
    known = {k for k, _ in DEFAULT_CONFIG.flatten()}
    return [k for k, _ in cfg.flatten() if k not in known]


# ----------------------------
# Sources
# ----------------------------

def parse_config_text(text: str) -> DottedDict:
    """Read ``key = value`` lines; ``#`` starts a comment.

    Raises:
        ConfigError: Malformed lines or unknown keys, listing all of them.
    """
    cfg = DottedDict()
    bad_lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            bad_lines.append(str(lineno))
            continue
        cfg[key.strip()] = value.strip()
    if bad_lines:
        raise ConfigError(f"malformed config lines: {', '.join(bad_lines)}")
    unknown = unknown_keys(cfg)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}", unknown)
    return cfg


def load_config_file(path: pathlib.Path | str | None) -> DottedDict:
    if path is None:
        return DottedDict()
    path = pathlib.Path(path)
    if not path.exists():
        raise ConfigError(f"config file '{path}' does not exist")
    return parse_config_text(path.read_text(encoding="utf8"))


def load_pyproject_config(pyproject_file: pathlib.Path | None = None, start: pathlib.Path | None = None) -> DottedDict:
    """Load [tool.solab] from the given pyproject.toml, or the nearest one at or above start (cwd)."""
    if pyproject_file is None:
        here = pathlib.Path.cwd() if start is None else pathlib.Path(start)
        pyproject_file = next((d / "pyproject.toml" for d in (here, *here.parents) if (d / "pyproject.toml").is_file()), None)
    if pyproject_file is None or not pyproject_file.exists():
        return DottedDict()
    with pyproject_file.open("rb") as f:
        data = tomllib.load(f)
    return DottedDict(data.get("tool", {}).get("solab", {}))


def load_env_config(environ: dict[str, str] | None = None) -> DottedDict:
    """Load SOLAB_* variables; SOLAB_FLOW__S1 sets flow.s1."""
    environ = os.environ if environ is None else environ
    cfg = DottedDict()
    for k, v in environ.items():
        if not k.upper().startswith(ENV_PREFIX):
            continue
        key = k[len(ENV_PREFIX):].lower()
        key = ENV_ALIASES.get(key, key.replace("__", "."))
        if key == "asymptotics.m":
            key = "asymptotics.M"
        cfg[key] = v
    return cfg


def merge_config_dicts(
    *,
    cli_cfg: dict[str, Any] | None = None,
    file_cfg: dict[str, Any] | None = None,
    toml_cfg: dict[str, Any] | None = None,
    env_cfg: dict[str, Any] | None = None,
) -> DottedDict:
    """Merge configuration from named sources.

    Later sources overwrite earlier ones leaf by leaf. None values are skipped.
    Precedence: defaults → file → toml → env → cli
    """
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    for source in [file_cfg, toml_cfg, env_cfg, cli_cfg]:
        if source:
            cfg.merge(source)
    return cfg


def merge_config_files(
    *,
    config_file: pathlib.Path | str | None = None,
    cli_cfg: dict[str, Any] | None = None,
    no_pyproject: bool = False,
    no_env: bool = False,
) -> DottedDict:
    """Merge configuration from files, environment, and CLI args."""
    return merge_config_dicts(
        cli_cfg=cli_cfg,
        file_cfg=load_config_file(config_file),
        toml_cfg=DottedDict() if no_pyproject else load_pyproject_config(),
        env_cfg=DottedDict() if no_env else load_env_config(),
    )


# ----------------------------
# Validation
# ----------------------------

def _check_ranges(cfg: RunConfig) -> None:
    problems: list[tuple[str, str]] = []

    def need(ok: bool, key: str, msg: str) -> None:
        if not ok:
            problems.append((key, msg))

    g, f, e, sp, b, a, br, o = (cfg.grid, cfg.flow, cfg.error, cfg.spectral,
                               cfg.barrier, cfg.asymptotics, cfg.bryant, cfg.output)
    need(g.n >= 64, "grid.n", "grid.n must be at least 64")
    need(g.zmax == "auto" or g.zmax > 0, "grid.zmax", "grid.zmax must be positive or auto")
    need(g.closure_cells >= 1, "grid.closure_cells", "grid.closure_cells must be at least 1")
    need(f.s0 > 0, "flow.s0", "flow.s0 must be positive")
    need(f.s0 < f.s1, "flow.s0", f"flow.s0 ({f.s0:g}) must be below flow.s1 ({f.s1:g})")
    need(f.snapshots >= 2, "flow.snapshots", "flow.snapshots must be at least 2")
    need(f.seed_profile in SEED_PROFILES, "flow.seed_profile", f"flow.seed_profile must be one of {SEED_PROFILES}")
    need(f.ds == "auto" or f.ds != 0, "flow.ds", "flow.ds must be nonzero or auto")
    need(0 < f.step_safety <= 1, "flow.step_safety", "flow.step_safety must lie in (0, 1]")
    need(0 < f.regrid_fraction <= 1, "flow.regrid_fraction", "flow.regrid_fraction must lie in (0, 1]")
    need(f.cap in CAPS, "flow.cap", f"flow.cap must be one of {CAPS}")
    need(f.ansatz_L >= 1, "flow.ansatz_L", "flow.ansatz_L must be at least 1")
    need(e.model in ERROR_MODELS, "error.model", f"error.model must be one of {ERROR_MODELS}")
    need(e.model != "custom", "error.model", "a custom error model can only be set from Python")
    need(e.c_rad >= 0 and e.c_orb >= 0, "error.c_rad", "error coefficients must be nonnegative")
    need(sp.n_modes >= 3, "spectral.n_modes", "spectral.n_modes must be at least 3")
    need(sp.n_nodes > sp.n_modes, "spectral.n_nodes", "spectral.n_nodes must exceed spectral.n_modes")
    need(sp.cutoff_exponent > 0, "spectral.cutoff_exponent", "spectral.cutoff_exponent must be positive")
    need(sp.recursion_cap >= 0, "spectral.recursion_cap", "spectral.recursion_cap must be nonnegative")
    need(0 < sp.dichotomy_threshold < 1, "spectral.dichotomy_threshold", "spectral.dichotomy_threshold must lie in (0, 1)")
    need(b.a >= b.a_min, "barrier.a", f"barrier.a ({b.a:g}) must be at least barrier.a_min ({b.a_min:g})")
    need(b.n_verify >= 100, "barrier.n_verify", "barrier.n_verify must be at least 100")
    need(0 < a.theta < 0.5, "asymptotics.theta", "asymptotics.theta must lie in (0, 1/2)")
    need(a.M >= 20, "asymptotics.M", "asymptotics.M must be at least 20")
    need(a.L >= 1, "asymptotics.L", "asymptotics.L must be at least 1")
    need(1 / 3 < a.eta < 1, "asymptotics.eta", "asymptotics.eta must lie in (1/3, 1)")
    need(a.gamma > 0, "asymptotics.gamma", "asymptotics.gamma must be positive")
    need(br.r_max > 1e-3, "bryant.r_max", "bryant.r_max must exceed the series start 1e-3")
    need(br.tol > 0, "bryant.tol", "bryant.tol must be positive")
    bad_fmt = [x for x in o.formats if x not in FORMATS]
    need(not bad_fmt, "output.formats", f"unknown output formats {bad_fmt}")
    if problems:
        raise ConfigError("; ".join(msg for _, msg in problems), [key for key, _ in problems])


def build_run_config(cfg: dict[str, Any]) -> RunConfig:
    """Coerce a merged config tree into a validated RunConfig.

    Raises:
        ConfigError: Unknown keys, bad values or range violations.
    """
    cfg = DottedDict(cfg)
    unknown = unknown_keys(cfg)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}", unknown)
    full = copy.deepcopy(DEFAULT_CONFIG).merge(cfg)
    sections = {}
    for name, cls in SECTIONS.items():
        values = {key: coerce(f"{name}.{key}", value) for key, value in full[name].items()}
        if name == "output":
            values["formats"] = tuple(values["formats"])
        sections[name] = cls(**values)
    run = RunConfig(**sections)
    _check_ranges(run)
    return run


def parse_config(text: str) -> RunConfig:
    """Parse a ``key = value`` config over the defaults."""
    return build_run_config(merge_config_dicts(file_cfg=parse_config_text(text)))
