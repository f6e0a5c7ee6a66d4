"""Nelder-Mead direct search and the dressed CRAB (dCRAB) pulse optimiser."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from qoclimits.dynamics import (
    ControlProblem,
    Decay,
    Dephasing,
    SnrLockedDephasing,
    ensemble_state,
    evolve_master,
    realization_matrix,
)
from qoclimits.linalg import control_error
from qoclimits.pulses import Pulse, PowerConstraint, mean_power, random_basis


@dataclass(frozen=True)
class SimplexConfig:
    initial_radius: float = 0.1
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    max_evals: int | None = None  # None -> 200 * dim
    ftol: float = 1e-8
    xtol: float = 1e-8

    def __post_init__(self):
        if self.initial_radius <= 0:
            raise ValueError("initial_radius must be positive")
        if self.reflection <= 0 or self.expansion <= 1:
            raise ValueError("need reflection > 0 and expansion > 1")
        if not (0 < self.contraction < 1 and 0 < self.shrink < 1):
            raise ValueError("contraction and shrink must lie in (0, 1)")
        if self.ftol <= 0 or self.xtol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    n_evals: int
    reason: str


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    x0,
    cfg: SimplexConfig = SimplexConfig(),
    radius=None,
) -> SimplexResult:
    """Minimise ``objective`` starting from ``x0``.

    The initial simplex is ``x0`` plus one vertex per axis displaced by
    ``radius`` (a scalar or per-axis array, default ``cfg.initial_radius``).
    Non-finite objective values count as ``+inf``. Stops when the simplex
    diameter drops below ``xtol``, the value spread below ``ftol``, or the
    evaluation budget is spent. The returned value never exceeds ``f(x0)``.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    n = x0.size
    max_evals = cfg.max_evals if cfg.max_evals is not None else 200 * max(n, 1)
    step = cfg.initial_radius if radius is None else radius
    step = np.broadcast_to(np.asarray(step, dtype=float), (n,))

    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        try:
            v = float(objective(x))
        except (FloatingPointError, OverflowError, ZeroDivisionError):
            v = np.inf
        return v if np.isfinite(v) else np.inf

    sim = np.empty((n + 1, n))
    sim[0] = x0
    for i in range(n):
        sim[i + 1] = x0
        sim[i + 1, i] += step[i] if step[i] != 0 else cfg.initial_radius
    fs = np.array([f(x0)] + [f(sim[i + 1]) for i in range(n)])
    reason = "max_evals"

    while True:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        diameter = np.max(np.abs(sim[1:] - sim[0])) if n else 0.0
        spread = fs[-1] - fs[0] if np.isfinite(fs[-1]) else np.inf
        if diameter < cfg.xtol:
            reason = "xtol"
            break
        if spread < cfg.ftol:
            reason = "ftol"
            break
        if evals >= max_evals:
            break

        centroid = sim[:-1].mean(axis=0)
        xr = centroid + cfg.reflection * (centroid - sim[-1])
        fr = f(xr)
        if fr < fs[0]:
            xe = centroid + cfg.reflection * cfg.expansion * (centroid - sim[-1])
            fe = f(xe)
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = centroid + cfg.contraction * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
                continue
        else:
            xc = centroid + cfg.contraction * (sim[-1] - centroid)
            fc = f(xc)
            if fc < fs[-1]:
                sim[-1], fs[-1] = xc, fc
                continue
        for i in range(1, n + 1):
            sim[i] = sim[0] + cfg.shrink * (sim[i] - sim[0])
            fs[i] = f(sim[i])

    best = int(np.argmin(fs))
    return SimplexResult(sim[best].copy(), float(fs[best]), evals, reason)


# ----------------------------------------------------------------------- dCRAB


@dataclass(frozen=True)
class DcrabConfig:
    """Settings of one dCRAB run.

    ``n_c`` counts basis functions per superiteration (sine and cosine of each
    random frequency are separate functions). ``power=None`` leaves the pulse
    power free. ``coefficient_scale`` sets the simplex step of new basis
    coefficients (default: RMS amplitude of the current pulse).
    ``peak_ratio`` rejects, unsimulated, candidates whose band-limited
    extension peaks above ``peak_ratio`` times their RMS amplitude on
    ``[0, T]``. Without it, nearly cancelling low-frequency terms
    (superoscillation) build shapes whose real bandwidth exceeds the band.
    """

    n_superiterations: int = 10
    n_c: int = 2
    band: tuple[float, float] = (0.0, 2 * np.pi * 10)
    power: PowerConstraint | None = None
    seed: int = 0
    initial_amplitude: float = 2 * np.pi
    n_realizations: int = 10
    noise_seed: int = 0
    simplex: SimplexConfig = field(default_factory=SimplexConfig)
    max_evals_total: int | None = None
    coefficient_scale: float | None = None
    peak_ratio: float | None = None

    def __post_init__(self):
        if self.n_superiterations < 0:
            raise ValueError("n_superiterations must be >= 0")
        if self.n_c < 1:
            raise ValueError("n_c must be >= 1")
        lo, hi = self.band
        if not (0 <= lo < hi):
            raise ValueError(f"invalid band {self.band}")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.peak_ratio is not None and self.peak_ratio <= 0:
            raise ValueError("peak_ratio must be positive")


@dataclass
class DcrabResult:
    pulse: Pulse
    error: float
    history: list[float]
    trace: list[tuple[int, int, float]]
    n_evals: int


class PulseObjective:
    """Control error of a pulse given on the half-step grid.

    ``noise`` is a dissipator (master-equation route), a noise model with
    ``sample`` (trajectory ensemble route, same seeds for every call), or None.
    """

    def __init__(self, problem: ControlProblem, noise, n_realizations=10, noise_seed=0):
        self.problem = problem
        self.noise = noise
        self.xi = None
        if noise is not None and hasattr(noise, "sample"):
            self.xi = realization_matrix(problem, noise, n_realizations, noise_seed)

    def state(self, f_half):
        if self.xi is not None:
            return ensemble_state(self.problem, f_half, self.xi)
        if self.noise is None or isinstance(self.noise, (Dephasing, Decay, SnrLockedDephasing)):
            return evolve_master(self.problem, f_half, self.noise)
        raise TypeError(f"unsupported noise description {self.noise!r}")

    def __call__(self, f_half) -> float:
        return control_error(self.problem.target, self.state(f_half))


def _power_of(problem, f_half):
    return mean_power(f_half[::2], problem.grid)


def _amplitudes(coefficients) -> float:
    """Upper bound of ``|f(t)|`` over all real ``t`` for a sine/cosine expansion."""
    c = np.asarray(coefficients, dtype=float)
    return float(np.sum(np.hypot(c[0::2], c[1::2])))


def dcrab_optimize(problem: ControlProblem, noise, cfg: DcrabConfig, objective=None) -> DcrabResult:
    """Optimise a band-limited pulse by dressed CRAB with Nelder-Mead.

    Superiteration ``j`` draws fresh random frequencies in ``cfg.band`` and
    searches ``f_j = c0 f_{j-1} + sum_i c_i f_i`` over ``(c0, c_1..)``
    starting at ``c0 = 1``, all other coefficients zero. Every candidate is
    rescaled to the power constraint before it is simulated.
    """
    if objective is None:
        objective = PulseObjective(problem, noise, cfg.n_realizations, cfg.noise_seed)
    rng = np.random.default_rng(cfg.seed)
    t_half = problem.half_grid
    trace: list[tuple[int, int, float]] = []
    eval_count = 0

    def constrain(f_half):
        if cfg.power is None:
            return f_half, 1.0
        p = _power_of(problem, f_half)
        if cfg.power.target_power == 0:
            return np.zeros_like(f_half), 0.0
        if not p > 0:
            return None, np.nan
        s = np.sqrt(cfg.power.target_power / p)
        return f_half * s, s

    best = Pulse.constant(cfg.initial_amplitude, problem.T)
    f_best, s0 = constrain(best.sample(t_half))
    if f_best is None:
        raise ValueError("initial pulse cannot satisfy the power constraint")
    best = best.scaled(s0)
    err_best = objective(f_best)
    eval_count += 1
    trace.append((0, eval_count, err_best))
    history = [err_best]

    n_freq = (cfg.n_c + 1) // 2
    odd = cfg.n_c % 2 == 1

    for j in range(1, cfg.n_superiterations + 1):
        if cfg.max_evals_total is not None and eval_count >= cfg.max_evals_total:
            break
        basis = random_basis(rng, n_freq, cfg.band, problem.T)
        funcs = basis.functions(t_half)
        if odd:
            funcs = funcs[:-1]
        scale = cfg.coefficient_scale
        if scale is None:
            scale = max(np.sqrt(_power_of(problem, f_best)), 1.0)
        radius = np.concatenate([[cfg.simplex.initial_radius], np.full(funcs.shape[0], cfg.simplex.initial_radius * scale)])
        f_prev = f_best
        budget = cfg.simplex.max_evals
        if budget is None:
            budget = 200 * (funcs.shape[0] + 1)
        if cfg.max_evals_total is not None:
            budget = min(budget, cfg.max_evals_total - eval_count)

        def candidate(x):
            return constrain(x[0] * f_prev + x[1:] @ funcs)

        prev_amp = _amplitudes(best.flatten().coefficients)

        def fun(x):
            nonlocal eval_count
            if cfg.max_evals_total is not None and eval_count >= cfg.max_evals_total:
                return np.inf  # hard total budget: not simulated, never accepted
            f_half, s = candidate(x)
            if f_half is None:
                return np.inf
            if cfg.peak_ratio is not None:
                new = np.zeros(basis.size)
                new[: funcs.shape[0]] = x[1:]
                peak = s * (abs(x[0]) * prev_amp + _amplitudes(new))
                if peak > cfg.peak_ratio * np.sqrt(_power_of(problem, f_half)):
                    return np.inf  # superoscillating candidate: not simulated
            eval_count += 1
            err = objective(f_half)
            trace.append((j, eval_count, err))
            return err

        x0 = np.zeros(funcs.shape[0] + 1)
        x0[0] = 1.0
        simplex_cfg = SimplexConfig(
            cfg.simplex.initial_radius,
            cfg.simplex.reflection,
            cfg.simplex.expansion,
            cfg.simplex.contraction,
            cfg.simplex.shrink,
            max(budget, funcs.shape[0] + 2),
            cfg.simplex.ftol,
            cfg.simplex.xtol,
        )
        res = nelder_mead(fun, x0, simplex_cfg, radius=radius)
        if res.fun < err_best:
            f_new, s = candidate(res.x)
            coeffs = np.zeros(basis.size)
            coeffs[: funcs.shape[0]] = res.x[1:] * s
            best = Pulse(basis, coeffs, carryover=(best, res.x[0] * s)).flatten()
            f_best = f_new
            err_best = res.fun
        history.append(err_best)

    return DcrabResult(best, err_best, history, trace, eval_count)
