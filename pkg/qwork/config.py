import copy
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

log = logging.getLogger(__name__)

EXPERIMENTS = (
    "gravity-work",
    "gravity-tpm",
    "elastic",
    "displacement",
    "spin",
    "two-time",
    "uncertainty",
    "conservation",
)
FORMATS = ("csv", "json")

_WIDE_GRID = {"n_points": 4096, "x_min": -40.0, "x_max": 40.0}
_PROBE_GRID = {"n_points": 64, "x_min": -16.0, "x_max": 16.0}
_HARMONIC_GRID = {"n_points": 128, "x_min": -16.0, "x_max": 16.0}
_DISPLACEMENT_GRID = {"n_points": 256, "x_min": -20.0, "x_max": 20.0}

DEFAULTS: dict[str, dict[str, Any]] = {
    "gravity-work": {
        "m": 1.0, "g": 1.0, "x0": 0.0, "p0": 2.0, "sigma_x": 1.0, "t1": 0.0, "t2": 1.0,
        "grid": _WIDE_GRID, "n_steps": 256, "probe_grid": _PROBE_GRID, "n_basis": 8,
    },
    "gravity-tpm": {
        "m": 1.0, "g": 1.0, "x0": 0.0, "p0": 2.0, "sigma_x": 1.0, "t1": 0.0, "t2": 1.0,
        "d_x": 0.1, "d_p": 1e-4, "power_t": 0.0, "n_trials": 10000, "seed": 0,
    },
    "elastic": {
        "m1": 1.0, "m2": 2.0, "k": 1.0, "p1": 1.0, "p2": 1.0, "u": 0, "v": 1,
        "n_basis": 16, "dp": 0.5, "cm_width": 0.01, "x_r": 1.0, "x_r_width": 0.5,
    },
    "displacement": {
        "m": 1.0, "x0": 0.0, "p0": 1.0, "sigma_x": 1.0, "t": 2.0, "d_x": 0.1, "x_init": 1.0,
        "probe_grid": _DISPLACEMENT_GRID, "n_trials": 0, "seed": 0,
    },
    "spin": {"omega": 1.0, "prep": "plus"},
    "two-time": {
        "theta_points": 50, "omega": 1.0, "t1": 0.0, "t2": 2.0 * math.pi, "n_slices": 256, "prep": "plus",
    },
    "uncertainty": {"n_instances": 1000, "dim_min": 2, "dim_max": 8, "seed": 0},
    "conservation": {
        "m": 1.0, "g": 1.0, "x0": 0.0, "p0": 1.0, "sigma_x": 1.0, "t1": 0.0, "t2": 2.0,
        "grid": _WIDE_GRID, "n_steps": 256, "k": 1.0, "harmonic_grid": _HARMONIC_GRID, "d_p": 0.01,
    },
}

REQUIRED: dict[str, tuple[str, ...]] = {
    "gravity-work": ("t1", "t2"),
    "gravity-tpm": ("t1", "t2", "d_x", "d_p"),
    "elastic": ("m1", "m2", "k"),
    "displacement": ("t", "d_x"),
    "spin": ("prep",),
    "two-time": (),
    "uncertainty": ("n_instances",),
    "conservation": ("t1", "t2"),
}

POSITIVE = {"hbar", "m", "m1", "m2", "k", "sigma_x", "d_x", "d_p", "omega", "n_steps", "n_slices",
            "n_basis", "dp", "cm_width", "x_r_width", "theta_points", "n_instances"}
NON_NEGATIVE_INT = {"n_trials", "seed", "u"}
INTEGER = {"n_steps", "n_slices", "n_basis", "theta_points", "n_instances", "dim_min", "dim_max",
           "n_trials", "seed", "u", "v"}
GRIDS = {"grid", "probe_grid", "harmonic_grid"}
PREPARATIONS = ("zero", "one", "plus", "minus", "y_plus", "y_minus")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentConfig:
    experiment: str
    parameters: dict = field(default_factory=dict)
    output: Optional[str] = None
    format: str = "json"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.format not in FORMATS:
            raise ConfigError("format", f"unknown format {self.format!r}; choose csv or json")
        self.parameters = _with_defaults(self.experiment, self.parameters)
        validate_parameters(self.experiment, self.parameters)

    def get(self, key: str):
        return self.parameters[key]


def _with_defaults(experiment: str, parameters: dict) -> dict:
    known = set(DEFAULTS[experiment]) | {"hbar"}
    for key in parameters:
        if key not in known:
            raise ConfigError(key, f"not a parameter of {experiment}")

    missing = [k for k in REQUIRED[experiment] if k not in parameters]
    if missing:
        raise ConfigError(missing[0], f"required for {experiment}")

    merged = copy.deepcopy(DEFAULTS[experiment])
    merged["hbar"] = 1.0
    for key, value in parameters.items():
        if key in GRIDS and isinstance(value, dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return merged


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def validate_parameters(experiment: str, params: dict):
    for key, value in params.items():
        if key in GRIDS:
            _validate_grid(key, value)
            continue
        if key == "prep":
            if value not in PREPARATIONS:
                raise ConfigError(key, f"unknown preparation {value!r}; choose from {', '.join(PREPARATIONS)}")
            continue
        if not _is_number(value):
            raise ConfigError(key, f"expected a finite number, got {value!r}")
        if key in INTEGER and int(value) != value:
            raise ConfigError(key, f"expected an integer, got {value!r}")
        if key in POSITIVE and not value > 0:
            raise ConfigError(key, f"must be positive, got {value!r}")
        if key in NON_NEGATIVE_INT and value < 0:
            raise ConfigError(key, f"must be non-negative, got {value!r}")

    if "t1" in params and "t2" in params and params["t2"] < params["t1"]:
        raise ConfigError("t2", f"must not precede t1 ({params['t2']} < {params['t1']})")
    if "t" in params and params["t"] < 0:
        raise ConfigError("t", f"must be non-negative, got {params['t']!r}")
    if "seed" in params and params["seed"] >= 2 ** 64:
        raise ConfigError("seed", "must fit in 64 bits")
    if experiment == "elastic":
        u, v = params["u"], params["v"]
        if u % 2 != 0 or v % 2 != 1 or v <= u:
            raise ConfigError("v" if u % 2 == 0 else "u", f"need even u >= 0 and odd v > u, got u={u}, v={v}")
    if experiment == "uncertainty" and not 2 <= params["dim_min"] <= params["dim_max"]:
        raise ConfigError("dim_max", f"need 2 <= dim_min <= dim_max, got {params['dim_min']}..{params['dim_max']}")


def _validate_grid(key: str, grid):
    if not isinstance(grid, dict):
        raise ConfigError(key, f"expected an object with n_points, x_min, x_max, got {grid!r}")
    n = grid.get("n_points")
    if not isinstance(n, int) or isinstance(n, bool) or n < 2 or n & (n - 1):
        raise ConfigError(f"{key}.n_points", f"must be a power of two >= 2, got {n!r}")
    x_min, x_max = grid.get("x_min"), grid.get("x_max")
    if not _is_number(x_min) or not _is_number(x_max) or not x_max > x_min:
        raise ConfigError(f"{key}.x_max", f"need finite x_min < x_max, got ({x_min!r}, {x_max!r})")
    extra = set(grid) - {"n_points", "x_min", "x_max"}
    if extra:
        raise ConfigError(f"{key}.{sorted(extra)[0]}", "not a grid field")


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(tokens: list[str]) -> dict:
    """['--key', 'value', '--grid.n_points', '1024'] -> nested dict."""
    overrides: dict = {}
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if not token.startswith("--") or len(token) == 2:
            raise ConfigError(token, "expected --key value")
        key = token[2:].replace("-", "_")
        if "=" in key:
            key, raw = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(key, "missing value")
            raw = tokens[i + 1]
            i += 2
        target = overrides
        *parents, leaf = key.split(".")
        for parent in parents:
            target = target.setdefault(parent, {})
        target[leaf] = parse_value(raw)
    return overrides


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: Optional[str], overrides: Optional[dict] = None, experiment: Optional[str] = None,
                output: Optional[str] = None, fmt: Optional[str] = None) -> ExperimentConfig:
    """JSON document first, then overrides, then explicit experiment/output/format."""
    doc: dict = {}
    if path:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"{path} is not valid JSON ({e})")
        except OSError as e:
            raise ConfigError("config", f"cannot read {path} ({e})")
        if not isinstance(doc, dict):
            raise ConfigError("config", f"{path} must hold a JSON object")

    file_experiment = doc.get("experiment")
    if experiment and file_experiment and experiment != file_experiment:
        raise ConfigError("experiment", f"command line says {experiment!r} but {path} says {file_experiment!r}")
    experiment = experiment or file_experiment
    if not experiment:
        raise ConfigError("experiment", "no experiment given")

    parameters = doc.get("parameters", {})
    if not isinstance(parameters, dict):
        raise ConfigError("parameters", "must be a JSON object")
    parameters = _merge(parameters, overrides or {})

    config = ExperimentConfig(
        experiment=experiment,
        parameters=parameters,
        output=output or doc.get("output"),
        format=fmt or doc.get("format", "json"),
    )
    log.debug("loaded %s config with %d parameters", experiment, len(config.parameters))
    return config
