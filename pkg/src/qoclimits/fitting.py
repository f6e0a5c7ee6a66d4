"""Least-squares fits of error-scaling laws and RMS-based model comparison.

Models (``x`` is the scan variable, ``y`` the control error):

========================  ==============================  =================
name                      form                            parameters
========================  ==============================  =================
``log_shifted``           ``a / (1 + x) + b``             ``a, b``
``log_shifted_power``     ``a (1 + x)**p + b``            ``a, p, b``
``exp_shifted``           ``a exp(-b x) + c``             ``a, b, c``
``power_shifted``         ``a x**(-b) + c``               ``a, b, c``
``loglog_linear``         ``log y = a + b log x``         ``a, b``
========================  ==============================  =================

With ``log_space=True`` the residuals are ``log(model) - log(y)`` (natural
log). ``loglog_linear`` is always fitted in log space, in closed form, and
reports ordinary least-squares standard errors. The other models are fitted
by Nelder-Mead with restarts from a deterministic initial guess.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from qoclimits.optimizer import SimplexConfig, nelder_mead


@dataclass(frozen=True)
class Model:
    name: str
    params: tuple[str, ...]
    func: Callable
    needs_positive_x: bool = False


def _log_shifted(x, a, b):
    return a / (1.0 + x) + b


def _log_shifted_power(x, a, p, b):
    return a * (1.0 + x) ** p + b


def _exp_shifted(x, a, b, c):
    return a * np.exp(-b * x) + c


def _power_shifted(x, a, b, c):
    return a * x ** (-b) + c


def _loglog(x, a, b):
    return np.exp(a + b * np.log(x))


MODELS = {
    "log_shifted": Model("log_shifted", ("a", "b"), _log_shifted),
    "log_shifted_power": Model("log_shifted_power", ("a", "p", "b"), _log_shifted_power),
    "exp_shifted": Model("exp_shifted", ("a", "b", "c"), _exp_shifted),
    "power_shifted": Model("power_shifted", ("a", "b", "c"), _power_shifted, needs_positive_x=True),
    "loglog_linear": Model("loglog_linear", ("a", "b"), _loglog, needs_positive_x=True),
}


@dataclass
class FitResult:
    model_name: str
    parameters: dict
    rms_residual: float
    n_points: int
    excluded_outliers: list = field(default_factory=list)
    log_space: bool = False
    stderr: dict | None = None
    x: np.ndarray = field(default=None, repr=False)
    y: np.ndarray = field(default=None, repr=False)

    def predict(self, x) -> np.ndarray:
        m = MODELS[self.model_name]
        return m.func(np.asarray(x, dtype=float), *self.parameters.values())

    def to_text(self) -> str:
        lines = [f"model={self.model_name}", f"log_space={self.log_space}"]
        lines += [f"{k}={v!r}" for k, v in self.parameters.items()]
        if self.stderr:
            lines += [f"stderr_{k}={v!r}" for k, v in self.stderr.items()]
        lines += [
            f"rms={self.rms_residual!r}",
            f"n_points={self.n_points}",
            f"excluded={','.join(str(i) for i in self.excluded_outliers)}",
        ]
        return "\n".join(lines) + "\n"


def _residuals(model: Model, theta, x, y, log_space):
    with np.errstate(all="ignore"):
        pred = model.func(x, *theta)
        if log_space:
            if np.any(pred <= 0):
                return None
            return np.log(pred) - np.log(y)
        return pred - y


def _sse(model, theta, x, y, log_space) -> float:
    r = _residuals(model, theta, x, y, log_space)
    if r is None or not np.all(np.isfinite(r)):
        return np.inf
    with np.errstate(over="ignore"):
        return float(r @ r)


def initial_guess(name: str, x, y) -> np.ndarray:
    """Deterministic starting point: amplitude from ``max(y)``, offset from
    ``min(y)``, rate or exponent from the two end points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    ymax, ymin = float(np.max(y)), float(np.min(y))
    c = 0.5 * ymin if ymin > 0 else 0.0
    lo, hi = max(y[0] - c, 1e-300), max(y[-1] - c, 1e-300)
    if name == "log_shifted":
        return np.array([ymax * (1.0 + x[0]), c])
    if name == "log_shifted_power":
        return np.array([ymax * (1.0 + x[0]), -1.0, c])
    if name == "exp_shifted":
        b = np.log(lo / hi) / (x[-1] - x[0])
        b = b if b > 0 else 1.0 / (x[-1] - x[0])
        return np.array([(ymax - c) * np.exp(b * x[0]), b, c])
    if name == "power_shifted":
        b = np.log(lo / hi) / np.log(x[-1] / x[0])
        b = b if b > 0 else 1.0
        return np.array([(ymax - c) * x[0] ** b, b, c])
    raise KeyError(name)


def _prepare(model, x, y, log_space, exclude):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("data must be finite")
    excluded = sorted({int(i) % x.size for i in exclude})
    keep = np.ones(x.size, bool)
    keep[excluded] = False
    xs, ys = x[keep], y[keep]
    need = max(3, len(model.params) + 1)
    if xs.size < need:
        raise ValueError(f"{model.name} needs at least {need} points, got {xs.size}")
    if np.ptp(xs) == 0:
        raise ValueError("degenerate data: all x equal")
    if model.needs_positive_x and np.any(xs <= 0):
        raise ValueError(f"{model.name} needs x > 0")
    if (log_space or model.name == "loglog_linear") and np.any(ys <= 0):
        raise ValueError("log-space fit needs y > 0")
    return x, y, xs, ys, excluded


def fit_model(name: str, x, y, log_space: bool = False, exclude=(), exclude_smallest: bool = False,
              n_restarts: int = 20) -> FitResult:
    """Least-squares fit of model ``name`` to ``(x, y)``.

    ``exclude`` lists point indices to drop; ``exclude_smallest`` also drops
    the point with the smallest ``x``. Dropped indices are recorded in the
    result.
    """
    if name not in MODELS:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    model = MODELS[name]
    exclude = list(exclude)
    if exclude_smallest:
        exclude.append(int(np.argmin(np.asarray(x, dtype=float))))
    x, y, xs, ys, excluded = _prepare(model, x, y, log_space, exclude)

    if name == "loglog_linear":
        lx, ly = np.log(xs), np.log(ys)
        n = lx.size
        lxm = lx.mean()
        sxx = float(np.sum((lx - lxm) ** 2))
        b = float(np.sum((lx - lxm) * (ly - ly.mean())) / sxx)
        a = float(ly.mean() - b * lxm)
        r = a + b * lx - ly
        s2 = float(r @ r) / (n - 2)
        stderr = {"a": np.sqrt(s2 * (1.0 / n + lxm**2 / sxx)), "b": np.sqrt(s2 / sxx)}
        rms = float(np.sqrt(np.mean(r**2)))
        return FitResult(name, {"a": a, "b": b}, rms, int(n), excluded, True,
                         {k: float(v) for k, v in stderr.items()}, x, y)

    theta0 = initial_guess(name, xs, ys)
    best_x, best_f = theta0, _sse(model, theta0, xs, ys, log_space)
    cfg = SimplexConfig(initial_radius=0.1, max_evals=2000 * len(theta0), ftol=1e-30, xtol=1e-14)
    starts = [theta0] + [theta0 * s for s in (0.3, 3.0)]
    for start in starts:
        cur = np.asarray(start, dtype=float)
        cur_f = _sse(model, cur, xs, ys, log_space)
        for _ in range(n_restarts):
            radius = 0.1 * np.abs(cur) + 1e-6 * (np.max(np.abs(cur)) + 1e-12)
            res = nelder_mead(lambda th: _sse(model, th, xs, ys, log_space), cur, cfg, radius=radius)
            improved = res.fun < cur_f * (1 - 1e-12) if np.isfinite(cur_f) else np.isfinite(res.fun)
            cur, cur_f = res.x, res.fun
            if not improved:
                break
        if cur_f < best_f:
            best_x, best_f = cur, cur_f
    if not np.isfinite(best_f):
        raise ValueError(f"{name} fit failed: no parameters give finite residuals")
    rms = float(np.sqrt(best_f / xs.size))
    params = {k: float(v) for k, v in zip(model.params, best_x)}
    return FitResult(name, params, rms, int(xs.size), excluded, log_space, None, x, y)


@dataclass
class Ranking:
    result: FitResult
    ratio: float


def compare_models(results: list[FitResult]) -> list[Ranking]:
    """Rank fits by ascending RMS. ``ratio`` is each RMS over the best one.

    All results must describe the same data, exclusions and residual space;
    ties keep the input order.
    """
    if len(results) < 2:
        raise ValueError("need at least two fits to compare")
    ref = results[0]
    for r in results[1:]:
        same = (
            r.x is not None and ref.x is not None
            and np.array_equal(r.x, ref.x) and np.array_equal(r.y, ref.y)
            and r.excluded_outliers == ref.excluded_outliers and r.log_space == ref.log_space
        )
        if not same:
            raise ValueError("fits were made on different data")
    ordered = sorted(results, key=lambda r: r.rms_residual)
    best = ordered[0].rms_residual
    out = []
    for r in ordered:
        ratio = r.rms_residual / best if best > 0 else (1.0 if r.rms_residual == 0 else np.inf)
        out.append(Ranking(r, float(ratio)))
    return out


def write_curve_csv(path, results: list[FitResult], n: int = 200) -> None:
    """Data-range curves of one or more fits on a common grid."""
    x = results[0].x
    lo, hi = float(np.min(x)), float(np.max(x))
    grid = np.geomspace(lo, hi, n) if lo > 0 else np.linspace(lo, hi, n)
    with open(path, "w") as fh:
        fh.write("x," + ",".join(r.model_name for r in results) + "\n")
        cols = [r.predict(grid) for r in results]
        for i, g in enumerate(grid):
            fh.write(f"{float(g)!r}," + ",".join(repr(float(c[i])) for c in cols) + "\n")
