"""Run configuration: a JSON file plus command-line overrides.

Schema (all keys optional except ``model`` and ``tau``)::

    {
      "model": "spin-rotating-field" | "two-mode-nonlinear" | "matrix-file",
      "params": {"omega": 0.01, "omega0": 1.0, "g": 0.1, "detuning": 0.0,
                 "damping": 0.5, "hamiltonian_on": "state"},
      "level": 1,                       # 1-based initial level
      "initial_state": [[re, im], ...], # explicit amplitudes (linear models)
      "tau": 5.0,
      "n_steps": 1000,                  # default 1000 linear, 10000 nonlinear
      "criteria": ["yukalov_t1", ...],
      "margin": 0.1,
      "method": "rk4",
      "stencil": 5,
      "wei_ying_constant": null,
      "matrix_file": "H.npz"            # relative to the config file
    }
"""

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .criteria import CRITERIA, DEFAULT_MARGIN

MODELS = ("spin-rotating-field", "two-mode-nonlinear", "matrix-file")
NONLINEAR_CRITERIA = ("nonlinear_overlap", "nonlinear_derivative", "nonlinear_delta")
LINEAR_STEPS = 1000
NONLINEAR_STEPS = 10 * LINEAR_STEPS
MODEL_PARAMS = {
    "spin-rotating-field": {"omega": None, "omega0": None},
    "two-mode-nonlinear": {"omega": 0.1, "omega0": 1.0, "g": 0.0, "detuning": 0.0,
                           "damping": 0.5, "hamiltonian_on": "state"},
    "matrix-file": {},
}
SWEEPABLE = ("omega", "omega0", "tau", "g", "n_steps")
_KEYS = ("model", "params", "level", "initial_state", "tau", "n_steps", "criteria", "margin",
         "method", "stencil", "wei_ying_constant", "matrix_file")


class ConfigError(ValueError):
    """Invalid configuration; the message names the file, line or field."""


@dataclass(frozen=True)
class RunConfig:
    model: str
    tau: float
    params: dict = field(default_factory=dict)
    level: int = 1
    initial_state: tuple = None
    n_steps: int = None
    criteria: tuple = None
    margin: float = DEFAULT_MARGIN
    method: str = "rk4"
    stencil: int = 5
    wei_ying_constant: float = None
    matrix_file: str = None

    @property
    def nonlinear(self):
        return self.model == "two-mode-nonlinear"

    @property
    def steps(self):
        if self.n_steps is not None:
            return self.n_steps
        return NONLINEAR_STEPS if self.nonlinear else LINEAR_STEPS

    def to_dict(self):
        out = asdict(self)
        out["n_steps"] = self.steps
        out["params"] = dict(self.params)
        if self.initial_state is not None:
            out["initial_state"] = [list(p) for p in self.initial_state]
        if self.criteria is not None:
            out["criteria"] = list(self.criteria)
        return out

    def with_value(self, name, value):
        """Copy with one sweepable parameter replaced."""
        if name not in SWEEPABLE:
            raise ConfigError(f"parameter {name!r} is not sweepable; choose from {SWEEPABLE}")
        if name == "tau":
            return validate(replace(self, tau=value))
        if name == "n_steps":
            if float(value) != int(value):
                raise ConfigError(f"n_steps must be an integer, got {value!r}")
            return validate(replace(self, n_steps=int(value)))
        if name not in MODEL_PARAMS[self.model]:
            raise ConfigError(f"model {self.model!r} has no parameter {name!r}")
        return validate(replace(self, params=dict(self.params, **{name: value})))


def _number(value, where, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field {where!r}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"field {where!r}: expected an integer, got {value!r}")
    return int(value) if integer else float(value)


def _amplitudes(value):
    if not isinstance(value, list) or not value:
        raise ConfigError("field 'initial_state': expected a list of [re, im] pairs")
    pairs = []
    for i, item in enumerate(value):
        where = f"initial_state[{i}]"
        if isinstance(item, (int, float)) and not isinstance(item, bool):
            item = [item, 0.0]
        if not isinstance(item, list) or len(item) != 2:
            raise ConfigError(f"field {where!r}: expected [re, im]")
        pairs.append((_number(item[0], where), _number(item[1], where)))
    return tuple(pairs)


def validate(cfg):
    """Check field values and cross-field constraints; return ``cfg`` unchanged."""
    if cfg.model not in MODELS:
        raise ConfigError(f"field 'model': expected one of {MODELS}, got {cfg.model!r}")
    if not cfg.tau > 0:
        raise ConfigError(f"field 'tau': must be > 0, got {cfg.tau!r}")
    if cfg.steps < 2:
        raise ConfigError(f"field 'n_steps': must be >= 2, got {cfg.steps!r}")
    if not 0 < cfg.margin < 1:
        raise ConfigError(f"field 'margin': must lie in (0, 1), got {cfg.margin!r}")
    if cfg.level < 1:
        raise ConfigError(f"field 'level': levels are numbered from 1, got {cfg.level!r}")
    if cfg.stencil < 3 or cfg.stencil % 2 == 0:
        raise ConfigError(f"field 'stencil': must be an odd integer >= 3, got {cfg.stencil!r}")
    methods = ("rk4", "splitting") if cfg.nonlinear else ("rk4", "midpoint-exp")
    if cfg.method not in methods:
        raise ConfigError(f"field 'method': expected one of {methods}, got {cfg.method!r}")
    allowed = MODEL_PARAMS[cfg.model]
    for key, value in cfg.params.items():
        if key not in allowed:
            raise ConfigError(f"field 'params.{key}': unknown parameter for model {cfg.model!r}")
        if key != "hamiltonian_on":
            _number(value, f"params.{key}")
    for key, default in allowed.items():
        if default is None and key not in cfg.params:
            raise ConfigError(f"field 'params.{key}': required for model {cfg.model!r}")
    if cfg.params.get("hamiltonian_on", "state") not in ("state", "branch"):
        raise ConfigError("field 'params.hamiltonian_on': expected 'state' or 'branch'")
    known = NONLINEAR_CRITERIA if cfg.nonlinear else CRITERIA
    if cfg.criteria is not None:
        bad = [c for c in cfg.criteria if c not in known]
        if bad:
            raise ConfigError(f"field 'criteria': unknown ids {bad} for model {cfg.model!r}; expected {known}")
        if "wei_ying_2" in cfg.criteria and cfg.wei_ying_constant is None:
            raise ConfigError("field 'wei_ying_constant': required when 'wei_ying_2' is requested")
    if cfg.model == "matrix-file":
        if cfg.matrix_file is None:
            raise ConfigError("field 'matrix_file': required for model 'matrix-file'")
        if not Path(cfg.matrix_file).is_file():
            raise ConfigError(f"field 'matrix_file': file not found: {cfg.matrix_file}")
    if cfg.nonlinear and cfg.initial_state is not None:
        raise ConfigError("field 'initial_state': the nonlinear model starts on a branch; use 'level'")
    return cfg


def parse_config(data, base_dir=None):
    """Build a :class:`RunConfig` from a decoded JSON object."""
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a JSON object")
    unknown = [k for k in data if k not in _KEYS]
    if unknown:
        raise ConfigError(f"field {unknown[0]!r}: unknown key; expected one of {_KEYS}")
    if "model" not in data:
        raise ConfigError("field 'model': required")
    if "tau" not in data:
        raise ConfigError("field 'tau': required")
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("field 'params': expected an object")
    criteria = data.get("criteria")
    if criteria is not None:
        if not isinstance(criteria, list) or not all(isinstance(c, str) for c in criteria):
            raise ConfigError("field 'criteria': expected a list of criterion ids")
        criteria = tuple(criteria)
    matrix_file = data.get("matrix_file")
    if matrix_file is not None:
        if not isinstance(matrix_file, str):
            raise ConfigError("field 'matrix_file': expected a path string")
        if base_dir is not None and not Path(matrix_file).is_absolute():
            matrix_file = str(Path(base_dir) / matrix_file)
    wy = data.get("wei_ying_constant")
    for key in ("model", "method"):
        if key in data and not isinstance(data[key], str):
            raise ConfigError(f"field {key!r}: expected a string")
    cfg = RunConfig(
        model=data["model"],
        tau=_number(data["tau"], "tau"),
        params=dict(params),
        level=_number(data.get("level", 1), "level", integer=True),
        initial_state=_amplitudes(data["initial_state"]) if data.get("initial_state") is not None else None,
        n_steps=_number(data["n_steps"], "n_steps", integer=True) if data.get("n_steps") is not None else None,
        criteria=criteria,
        margin=_number(data.get("margin", DEFAULT_MARGIN), "margin"),
        method=data.get("method", "rk4"),
        stencil=_number(data.get("stencil", 5), "stencil", integer=True),
        wei_ying_constant=_number(wy, "wei_ying_constant") if wy is not None else None,
        matrix_file=matrix_file,
    )
    return validate(cfg)


def load_config(path):
    """Read and validate a JSON config; syntax errors report line and column."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return parse_config(data, base_dir=path.parent)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def apply_overrides(cfg, margin=None, steps=None, criteria=None):
    """Command-line flags take precedence over file fields."""
    changes = {}
    if margin is not None:
        changes["margin"] = float(margin)
    if steps is not None:
        changes["n_steps"] = int(steps)
    if criteria is not None:
        changes["criteria"] = tuple(c.strip() for c in criteria.split(",") if c.strip())
    return validate(replace(cfg, **changes)) if changes else cfg
