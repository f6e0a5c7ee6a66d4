"""Flat ``key = value`` experiment configuration.

Values are Python-like literals or arithmetic expressions in ``pi``, ``e``
and a few numpy constructors (``logspace``, ``linspace``, ``geomspace``,
``sqrt``), evaluated by a restricted AST walker. Lists and tuples become
tuples of floats. ``#`` starts a comment. Unknown keys raise
:class:`ConfigError`.
"""

from __future__ import annotations

import ast
import hashlib
import math
import operator
from dataclasses import dataclass, fields, replace

import numpy as np

TWO_PI = 2 * math.pi


def _grid(values, scale=1.0) -> tuple:
    return tuple(float(scale * v) for v in values)


EXPERIMENTS = ("dephasing", "decay", "protect", "transfer")

# keys that change how a run executes but not what it computes
EXECUTION_KEYS = frozenset({"workers"})


class ConfigError(ValueError):
    pass


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.Mod: operator.mod,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_NAMES = {"pi": math.pi, "e": math.e, "inf": math.inf, "true": True, "false": False,
          "True": True, "False": False}
_FUNCS = {
    "logspace": lambda a, b, n: _grid(np.logspace(a, b, int(n))),
    "linspace": lambda a, b, n: _grid(np.linspace(a, b, int(n))),
    "geomspace": lambda a, b, n: _grid(np.geomspace(a, b, int(n))),
    "sqrt": math.sqrt,
    "log": math.log,
    "exp": math.exp,
}


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, str, bool)):
        return node.value
    if isinstance(node, ast.Name):
        return _NAMES.get(node.id, node.id)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        left, right = _eval(node.left), _eval(node.right)
        if isinstance(left, tuple) and not isinstance(right, tuple):
            return tuple(_BINOPS[type(node.op)](v, right) for v in left)
        if isinstance(right, tuple) and not isinstance(left, tuple):
            return tuple(_BINOPS[type(node.op)](left, v) for v in right)
        return _BINOPS[type(node.op)](left, right)
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _UNARY[type(node.op)](_eval(node.operand))
    if isinstance(node, (ast.Tuple, ast.List)):
        return tuple(_eval(e) for e in node.elts)
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
            and not node.keywords):
        return _FUNCS[node.func.id](*[_eval(a) for a in node.args])
    raise ConfigError(f"unsupported expression: {ast.dump(node)}")


def evaluate(text: str):
    """Evaluate one value string. Bare words are returned as strings."""
    text = text.strip()
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError:
        return text
    return _eval(tree)


@dataclass(frozen=True)
class ExperimentConfig:
    """All settings of one experiment run. Frequencies are angular (rad/time)."""

    experiment: str = "dephasing"
    T: float = 1.0
    n_steps: int = 4096
    omega_x: float = TWO_PI * 5
    omega_y: float = TWO_PI
    omega_z: float = TWO_PI
    gamma: float = TWO_PI * 0.4
    energy: float = (TWO_PI * 4) ** 2
    noise_power: float = 4 * math.pi**2
    snr_grid: tuple = _grid(np.logspace(0.5, 3, 6))
    d_values: tuple = (2.0, 5.0, 10.0, 20.0)
    bandwidths: tuple = ()
    omega_x_grid: tuple = _grid((1, 2, 4, 8, 16), TWO_PI)
    alphas: tuple = (2.0, 4.0)
    protect_d: float = 10.0
    scenarios: tuple = ("h3", "h4")
    n_restarts: int = 3
    n_instances: int = 10
    n_realizations: int = 10
    n_superiterations: int = 10
    n_c: int = 2
    max_evals: int = 0
    peak_ratio: float = 10.0
    coefficient_scale: float = 0.0
    initial_amplitude: float = TWO_PI
    exclude_smallest: bool = False
    d_w: int = 3
    bound_check: str = "assert"
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        for name in ("n_restarts", "n_instances", "n_realizations", "n_c", "d_w", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.coefficient_scale < 0:
            raise ConfigError("coefficient_scale must be >= 0 (0 uses the pulse RMS)")
        if self.peak_ratio < 0:
            raise ConfigError("peak_ratio must be >= 0 (0 disables the check)")
        if self.n_superiterations < 0 or self.max_evals < 0:
            raise ConfigError("n_superiterations and max_evals must be >= 0")
        if self.bound_check not in ("assert", "warn"):
            raise ConfigError("bound_check must be 'assert' or 'warn'")
        if self.T <= 0 or self.n_steps < 2:
            raise ConfigError("need T > 0 and n_steps >= 2")
        grid = {
            "dephasing": ("snr_grid", "d_values"),
            "decay": ("bandwidths",),
            "protect": ("omega_x_grid", "alphas", "scenarios"),
            "transfer": ("bandwidths", "alphas"),
        }[self.experiment]
        for name in grid:
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must not be empty")

    def with_updates(self, **updates) -> "ExperimentConfig":
        known = {f.name for f in fields(self)}
        bad = sorted(set(updates) - known)
        if bad:
            raise ConfigError(f"unknown config key(s): {', '.join(bad)}")
        return replace(self, **{k: _coerce(self, k, v) for k, v in updates.items()})

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_text(self) -> str:
        return "".join(f"{k} = {_render(v)}\n" for k, v in self.as_dict().items())

    def config_hash(self) -> str:
        body = "".join(
            f"{k}={_render(v)}\n" for k, v in sorted(self.as_dict().items()) if k not in EXECUTION_KEYS
        )
        return hashlib.sha256(body.encode()).hexdigest()[:16]


def _render(v):
    if isinstance(v, tuple):
        return "(" + ", ".join(_render(x) for x in v) + ("," if len(v) == 1 else "") + ")"
    if isinstance(v, str):
        return v
    return repr(v)


def _coerce(cfg, key, value):
    current = getattr(cfg, key)
    try:
        if isinstance(current, bool):
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes", "on"):
                    return True
                if value.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        if isinstance(current, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if isinstance(current, float):
            return float(value)
        if isinstance(current, tuple):
            items = value if isinstance(value, tuple) else (value,)
            if key == "scenarios":
                return tuple(str(v).lower() for v in items)
            return tuple(float(v) for v in items)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None


DEFAULTS = {
    "dephasing": dict(omega_y=TWO_PI, omega_z=TWO_PI),
    "decay": dict(
        omega_z=TWO_PI * 2,
        gamma=TWO_PI * 0.4,
        energy=(TWO_PI * 4) ** 2,
        bandwidths=_grid((0.1, 2, 3, 4, 6), TWO_PI),
        coefficient_scale=10 * TWO_PI * 4,
        n_superiterations=20,
        n_c=4,
        exclude_smallest=True,
    ),
    "protect": dict(omega_y=TWO_PI, omega_z=TWO_PI, max_evals=400, exclude_smallest=True),
    "transfer": dict(
        omega_x=TWO_PI * 5,
        omega_y=TWO_PI,
        omega_z=TWO_PI,
        bandwidths=_grid((2, 4, 8, 16), TWO_PI),
        coefficient_scale=10 * TWO_PI * 5,
        max_evals=400,
    ),
}

PAPER_SCALE = {
    "dephasing": dict(n_restarts=10, n_realizations=20),
    "decay": dict(n_restarts=10, n_instances=100, n_realizations=20),
    "protect": dict(n_restarts=10, n_realizations=20),
    "transfer": dict(n_restarts=10, n_instances=50, n_realizations=20),
}


def default_config(experiment: str, paper_scale: bool = False) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    upd = dict(DEFAULTS[experiment])
    if paper_scale:
        upd.update(PAPER_SCALE[experiment])
    return ExperimentConfig(experiment=experiment, **upd)


def parse_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key.isidentifier():
            raise ConfigError(f"line {lineno}: bad key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = evaluate(value)
    return out


def load_config(path=None, experiment: str | None = None, paper_scale: bool = False,
                overrides: dict | None = None) -> ExperimentConfig:
    """Defaults for ``experiment``, then the file, then ``overrides``.

    The experiment name may come from the argument or from the file's
    ``experiment`` key; if both are given they must agree.
    """
    values = {}
    if path is not None:
        with open(path) as fh:
            values = parse_text(fh.read())
    overrides = dict(overrides or {})
    name = experiment or values.get("experiment") or overrides.get("experiment")
    if name is None:
        raise ConfigError("no experiment given")
    for src in (values, overrides):
        if "experiment" in src and src["experiment"] != name:
            raise ConfigError(f"experiment {src['experiment']!r} conflicts with {name!r}")
    cfg = default_config(name, paper_scale)
    cfg = cfg.with_updates(**{k: v for k, v in values.items() if k != "experiment"})
    parsed = {k: evaluate(v) if isinstance(v, str) else v for k, v in overrides.items() if k != "experiment"}
    return cfg.with_updates(**parsed)


def config_keys() -> list[str]:
    return [f.name for f in fields(ExperimentConfig)]
