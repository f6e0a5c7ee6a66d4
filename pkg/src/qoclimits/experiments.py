"""Scan harness for the four control-error experiments.

Every scan is a list of independent tasks (one dCRAB run or one ensemble
evaluation each). Tasks carry their own seeds, derived from ``base_seed``
and the task's position in the scan, so results do not depend on the order
or the process in which tasks run. Rows are assembled in scan order.

Outputs of :func:`write_outputs`:

``scan.csv``
    one row per scan point, first line ``# experiment=<name> config=<hash>``;
    column names carry units in brackets
``fits.txt``
    ``key=value`` blocks, one per fitted curve, plus model rankings
``curves/*.csv``
    fitted curves on a fine grid
``pulses/*.csv``
    the pulse behind each recorded error
``timing.txt``
    wall time per scan point (kept apart so the files above are reproducible)
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from qoclimits.config import ExperimentConfig
from qoclimits.dynamics import (
    ControlProblem,
    Decay,
    SnrLockedDephasing,
    ensemble_average,
    gamma_for_snr,
    qubit_hamiltonian,
)
from qoclimits.fitting import FitResult, compare_models, fit_model, write_curve_csv
from qoclimits.infobounds import colored_error_bound, white_noise_error_bound
from qoclimits.kkfilter import kk_error_estimate
from qoclimits.linalg import DensityMatrix, InvariantViolation, haar_random_state
from qoclimits.noise import PowerLawNoise
from qoclimits.optimizer import DcrabConfig, dcrab_optimize
from qoclimits.pulses import Pulse, PowerConstraint, write_pulse_csv
from qoclimits.spectra import FlatSpectrum

# seed streams
OPT, PAIRS, NOISE, EVAL = range(4)

PLUS = np.array([1.0, 1.0]) / np.sqrt(2)


def derive_seed(base_seed: int, *key: int) -> int:
    """32-bit seed for the task at ``key`` (stream, point, instance, ...)."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint32)[0])


@dataclass
class ScanResult:
    name: str
    cfg: ExperimentConfig
    columns: list[str]
    rows: list[tuple]
    fits: list[tuple[str, list[FitResult]]] = field(default_factory=list)
    pulses: dict = field(default_factory=dict)
    timing: list[tuple[str, float]] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


class _timed:
    """Picklable wrapper returning ``(result, wall seconds)``."""

    def __init__(self, fn):
        self.fn = fn

    def __call__(self, task):
        t0 = time.perf_counter()
        out = self.fn(task)
        return out, time.perf_counter() - t0


def _dcrab_cfg(cfg: ExperimentConfig, band, power, seed, noise_seed, initial_amplitude=None):
    return DcrabConfig(
        n_superiterations=cfg.n_superiterations,
        n_c=cfg.n_c,
        band=(0.0, float(band)),
        power=power,
        seed=seed,
        initial_amplitude=cfg.initial_amplitude if initial_amplitude is None else initial_amplitude,
        n_realizations=cfg.n_realizations,
        noise_seed=noise_seed,
        max_evals_total=cfg.max_evals or None,
        peak_ratio=cfg.peak_ratio or None,
        coefficient_scale=cfg.coefficient_scale or None,
    )


def _problem(cfg: ExperimentConfig, name, initial, target, omega_y=0.0, omega_z=0.0):
    drift, ctrl, noise = qubit_hamiltonian(name, omega_y, omega_z)
    return ControlProblem(drift, ctrl, noise, initial, target, cfg.T, cfg.n_steps)


def _pair(cfg: ExperimentConfig, instance: int):
    rng = np.random.default_rng(derive_seed(cfg.base_seed, PAIRS, instance))
    a = haar_random_state(rng)
    b = haar_random_state(rng)
    return DensityMatrix.from_pure(a.amplitudes), DensityMatrix.from_pure(b.amplitudes)


def _seeds(seeds) -> str:
    return ";".join(str(s) for s in seeds)


def _safe_fit(label, specs, x, y):
    fits = []
    for name, kwargs in specs:
        try:
            fits.append(fit_model(name, x, y, **kwargs))
        except ValueError:
            continue
    return (label, fits)


def _check_bound(res: ScanResult, error, bound, where) -> bool:
    """Record a violation of ``error >= bound``; returns whether it holds."""
    if error < bound:
        res.violations.append(f"achieved error {error!r} below the information bound {bound!r} at {where}")
        return False
    return True


# ------------------------------------------------------------------ dephasing


def _dephasing_task(task):
    cfg, snr, d, seed = task
    prob = _problem(cfg, "h1", DensityMatrix.basis(0), DensityMatrix.basis(1), cfg.omega_y, cfg.omega_z)
    band = 2 * np.pi * d / cfg.T
    res = dcrab_optimize(prob, SnrLockedDephasing(snr), _dcrab_cfg(cfg, band, None, seed, 0))
    return res.error, res.pulse


def run_dephasing_scan(cfg: ExperimentConfig) -> ScanResult:
    """Minimum error over restarts of the |0> -> |1> transfer for each (S/N, D)."""
    points = [(snr, d) for snr in cfg.snr_grid for d in cfg.d_values]
    tasks, seeds = [], []
    for p, (snr, d) in enumerate(points):
        s = [derive_seed(cfg.base_seed, OPT, p, 0, r) for r in range(cfg.n_restarts)]
        seeds.append(s)
        tasks += [(cfg, snr, d, x) for x in s]
    out = _map(_timed(_dephasing_task), tasks, cfg.workers)
    cols = ["snr", "D", "gamma[1/time]", "error", "bound", "bound_ok", "seeds"]
    res = ScanResult("dephasing", cfg, cols, [])
    for p, (snr, d) in enumerate(points):
        chunk = out[p * cfg.n_restarts : (p + 1) * cfg.n_restarts]
        errs = [c[0][0] for c in chunk]
        best = int(np.argmin(errs))
        bound = white_noise_error_bound(snr, d, cfg.d_w)
        ok = _check_bound(res, errs[best], bound, f"S/N={snr!r}, D={d!r}")
        res.rows.append((snr, d, gamma_for_snr(snr, cfg.T), errs[best], bound, int(ok), _seeds(seeds[p])))
        res.pulses[f"dephasing_p{p:02d}"] = chunk[best][0][1]
        res.timing.append((f"S/N={snr!r} D={d!r}", sum(c[1] for c in chunk)))
    snr_col, d_col, err_col = res.column("snr"), res.column("D"), res.column("error")
    specs = [
        ("log_shifted", dict(log_space=True)),
        ("exp_shifted", dict(log_space=True)),
        ("log_shifted_power", dict(log_space=True)),
    ]
    for d in cfg.d_values:
        m = d_col == d
        res.fits.append(_safe_fit(f"D={d!r}", specs, snr_col[m], err_col[m]))
    return res


# ---------------------------------------------------------------------- decay


def _decay_task(task):
    cfg, bw, instance, seed = task
    initial, target = _pair(cfg, instance)
    prob = _problem(cfg, "h2", initial, target, 0.0, cfg.omega_z)
    power = PowerConstraint.from_energy(cfg.energy, cfg.T)
    res = dcrab_optimize(prob, Decay(cfg.gamma), _dcrab_cfg(cfg, bw, power, seed, 0))
    return res.error, res.pulse


def run_decay_scan(cfg: ExperimentConfig) -> ScanResult:
    """Worst case over random pure-state pairs of the best error over restarts, per bandwidth."""
    tasks = []
    for k, bw in enumerate(cfg.bandwidths):
        for i in range(cfg.n_instances):
            tasks += [(cfg, bw, i, derive_seed(cfg.base_seed, OPT, k, i, r)) for r in range(cfg.n_restarts)]
    out = _map(_timed(_decay_task), tasks, cfg.workers)
    cols = ["bandwidth[rad/time]", "D", "error_max", "error_median", "bound", "bound_ok", "worst_instance",
            "seeds"]
    res = ScanResult("decay", cfg, cols, [])
    snr = (cfg.energy / cfg.T) / cfg.gamma
    per_point = cfg.n_instances * cfg.n_restarts
    for k, bw in enumerate(cfg.bandwidths):
        chunk = out[k * per_point : (k + 1) * per_point]
        best = []
        for i in range(cfg.n_instances):
            runs = chunk[i * cfg.n_restarts : (i + 1) * cfg.n_restarts]
            j = int(np.argmin([r[0][0] for r in runs]))
            best.append(runs[j][0])
        errs = np.array([b[0] for b in best])
        worst = int(np.argmax(errs))
        d = bw * cfg.T / (2 * np.pi)
        bound = white_noise_error_bound(snr, d, cfg.d_w)
        ok = _check_bound(res, float(errs.min()), bound, f"bandwidth={bw!r}")
        seeds = [derive_seed(cfg.base_seed, OPT, k, worst, r) for r in range(cfg.n_restarts)]
        res.rows.append((bw, d, float(errs[worst]), float(np.median(errs)), bound, int(ok), worst,
                         _seeds(seeds)))
        res.pulses[f"decay_p{k:02d}"] = best[worst][1]
        res.timing.append((f"bandwidth={bw!r}", sum(c[1] for c in chunk)))
    x, y = res.column("bandwidth[rad/time]"), res.column("error_max")
    ex = dict(exclude_smallest=cfg.exclude_smallest)
    res.fits.append(_safe_fit("error_max", [("exp_shifted", ex), ("power_shifted", ex)], x, y))
    return res


# -------------------------------------------------------------------- protect


def _protect_h3_task(task):
    cfg, omega_x, alpha, noise_seed = task
    plus = DensityMatrix.from_pure(PLUS)
    prob = _problem(cfg, "h3", plus, plus)
    model = PowerLawNoise(alpha, cfg.noise_power)
    pulse = Pulse.constant(omega_x, cfg.T)
    _, err = ensemble_average(prob, pulse, model, cfg.n_realizations, noise_seed)
    kk = kk_error_estimate(pulse, model.line_spectrum(cfg.T, prob.dt), prob.grid)
    return err, kk.epsilon, pulse


def _protect_h4_task(task):
    cfg, omega_x, alpha, seed, noise_seed = task
    plus = DensityMatrix.from_pure(PLUS)
    prob = _problem(cfg, "h4", plus, plus, cfg.omega_y, cfg.omega_z)
    model = PowerLawNoise(alpha, cfg.noise_power)
    power = PowerConstraint(omega_x**2)
    band = 2 * np.pi * cfg.protect_d / cfg.T
    res = dcrab_optimize(prob, model, _dcrab_cfg(cfg, band, power, seed, noise_seed, omega_x))
    return res.error, res.pulse


def _evaluate(cfg, prob, pulse, model, seed):
    return ensemble_average(prob, pulse, model, cfg.n_realizations, seed)[1]


def _colored_bound(cfg, power, bandwidth, alpha, dt):
    model = PowerLawNoise(alpha, cfg.noise_power)
    phi_xi = model.spectrum(cfg.T, dt)
    lo, hi = max(0.0, phi_xi.omega_min), min(bandwidth, phi_xi.omega_max)
    if hi <= lo:
        return 1.0
    phi_f = FlatSpectrum(2 * np.pi * power / bandwidth)
    return colored_error_bound(phi_f, phi_xi, (lo, hi), cfg.T, cfg.d_w)


def run_protect_scan(cfg: ExperimentConfig) -> ScanResult:
    """Preservation of (|0>+|1>)/sqrt(2) against 1/f^alpha noise versus pulse strength.

    Scenario ``h3`` holds the constant pulse ``f = omega_x`` and also reports
    the filter-function estimate; ``h4`` optimises a pulse of the same power
    with ``protect_d`` degrees of freedom and scores it on fresh noise traces.
    """
    for s in cfg.scenarios:
        if s not in ("h3", "h4"):
            raise ValueError(f"unknown protect scenario {s!r}")
    points = [(s, a, w) for s in cfg.scenarios for a in cfg.alphas for w in cfg.omega_x_grid]
    h3_tasks, h4_tasks = [], []
    for p, (s, a, w) in enumerate(points):
        if s == "h3":
            h3_tasks.append((cfg, w, a, derive_seed(cfg.base_seed, NOISE, p, 0)))
        else:
            for r in range(cfg.n_restarts):
                h4_tasks.append((cfg, w, a, derive_seed(cfg.base_seed, OPT, p, 0, r),
                                 derive_seed(cfg.base_seed, NOISE, p, 0, r)))
    h3_out = _map(_timed(_protect_h3_task), h3_tasks, cfg.workers)
    h4_out = _map(_timed(_protect_h4_task), h4_tasks, cfg.workers)
    cols = ["omega_x[rad/time]", "alpha", "scenario", "error", "error_kk", "bound", "seeds"]
    res = ScanResult("protect", cfg, cols, [])
    plus = DensityMatrix.from_pure(PLUS)
    h3_pos = h4_pos = 0
    for p, (s, a, w) in enumerate(points):
        if s == "h3":
            (err, kk, pulse), dt = h3_out[h3_pos]
            seeds = [h3_tasks[h3_pos][3]]
            h3_pos += 1
            res.rows.append((w, a, s, err, kk, float("nan"), _seeds(seeds)))
        else:
            runs = h4_out[h4_pos : h4_pos + cfg.n_restarts]
            seeds = [t[3] for t in h4_tasks[h4_pos : h4_pos + cfg.n_restarts]]
            h4_pos += cfg.n_restarts
            j = int(np.argmin([r[0][0] for r in runs]))
            pulse = runs[j][0][1]
            prob = _problem(cfg, "h4", plus, plus, cfg.omega_y, cfg.omega_z)
            t0 = time.perf_counter()
            err = _evaluate(cfg, prob, pulse, PowerLawNoise(a, cfg.noise_power), derive_seed(cfg.base_seed, EVAL, p))
            dt = sum(r[1] for r in runs) + time.perf_counter() - t0
            band = 2 * np.pi * cfg.protect_d / cfg.T
            bound = _colored_bound(cfg, w**2, band, a, prob.dt)
            res.rows.append((w, a, s, err, float("nan"), bound, _seeds(seeds)))
        res.pulses[f"protect_p{p:02d}"] = pulse
        res.timing.append((f"{s} alpha={a!r} omega_x={w!r}", dt))
    x_all, a_all, s_all, e_all = (res.column(c) for c in ("omega_x[rad/time]", "alpha", "scenario", "error"))
    for s in cfg.scenarios:
        for a in cfg.alphas:
            m = (s_all == s) & (a_all == a)
            label = f"scenario={s} alpha={a!r}"
            res.fits.append(_safe_fit(label, [("loglog_linear", dict(exclude_smallest=cfg.exclude_smallest))],
                                      x_all[m], e_all[m]))
    return res


# ------------------------------------------------------------------- transfer


def _transfer_task(task):
    cfg, bw, alpha, instance, seed, noise_seed = task
    initial, target = _pair(cfg, instance)
    prob = _problem(cfg, "h4", initial, target, cfg.omega_y, cfg.omega_z)
    model = PowerLawNoise(alpha, cfg.noise_power)
    power = PowerConstraint(cfg.omega_x**2)
    res = dcrab_optimize(prob, model, _dcrab_cfg(cfg, bw, power, seed, noise_seed, cfg.omega_x))
    return res.error, res.pulse


def _transfer_eval_task(task):
    cfg, alpha, instance, pulse, seed = task
    initial, target = _pair(cfg, instance)
    prob = _problem(cfg, "h4", initial, target, cfg.omega_y, cfg.omega_z)
    return _evaluate(cfg, prob, pulse, PowerLawNoise(alpha, cfg.noise_power), seed)


def run_transfer_scan(cfg: ExperimentConfig) -> ScanResult:
    """Worst case over random pairs of the optimised transfer error, per (bandwidth, alpha).

    For each pair the restart with the lowest optimisation error is scored on
    fresh noise traces.
    """
    points = [(a, bw) for a in cfg.alphas for bw in cfg.bandwidths]
    tasks = []
    for p, (a, bw) in enumerate(points):
        for i in range(cfg.n_instances):
            for r in range(cfg.n_restarts):
                tasks.append((cfg, bw, a, i, derive_seed(cfg.base_seed, OPT, p, i, r),
                              derive_seed(cfg.base_seed, NOISE, p, i, r)))
    out = _map(_timed(_transfer_task), tasks, cfg.workers)
    chosen, evals = [], []
    for p, (a, bw) in enumerate(points):
        for i in range(cfg.n_instances):
            base = (p * cfg.n_instances + i) * cfg.n_restarts
            runs = out[base : base + cfg.n_restarts]
            j = int(np.argmin([r[0][0] for r in runs]))
            chosen.append((p, i, base + j))
            evals.append((cfg, a, i, runs[j][0][1], derive_seed(cfg.base_seed, EVAL, p, i)))
    scores = _map(_timed(_transfer_eval_task), evals, cfg.workers)
    cols = ["bandwidth[rad/time]", "alpha", "D", "error_max", "error_median", "bound", "worst_instance", "seeds"]
    res = ScanResult("transfer", cfg, cols, [])
    dt_grid = cfg.T / cfg.n_steps
    for p, (a, bw) in enumerate(points):
        sl = slice(p * cfg.n_instances, (p + 1) * cfg.n_instances)
        errs = np.array([s[0] for s in scores[sl]])
        worst = int(np.argmax(errs))
        _, i, t_idx = chosen[sl][worst]
        bound = _colored_bound(cfg, cfg.omega_x**2, bw, a, dt_grid)
        d = bw * cfg.T / (2 * np.pi)
        seeds = [tasks[t_idx][4], tasks[t_idx][5], evals[sl][worst][4]]
        res.rows.append((bw, a, d, float(errs[worst]), float(np.median(errs)), bound, worst, _seeds(seeds)))
        res.pulses[f"transfer_p{p:02d}"] = evals[sl][worst][3]
        wall = sum(o[1] for o in out[p * cfg.n_instances * cfg.n_restarts : (p + 1) * cfg.n_instances * cfg.n_restarts])
        res.timing.append((f"alpha={a!r} bandwidth={bw!r}", wall + sum(s[1] for s in scores[sl])))
    x_all, a_all, e_all = (res.column(c) for c in ("bandwidth[rad/time]", "alpha", "error_max"))
    for a in cfg.alphas:
        m = a_all == a
        res.fits.append(_safe_fit(f"alpha={a!r}", [("loglog_linear", dict(exclude_smallest=cfg.exclude_smallest))],
                                  x_all[m], e_all[m]))
    return res


RUNNERS = {
    "dephasing": run_dephasing_scan,
    "decay": run_decay_scan,
    "protect": run_protect_scan,
    "transfer": run_transfer_scan,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ScanResult:
    """Run the scan, write outputs, then enforce the white-noise bound.

    Outputs are written before a violation is raised so the offending
    points stay inspectable. With ``bound_check = warn`` violations are only
    recorded in the ``bound_ok`` column and ``res.violations``.
    """
    res = RUNNERS[cfg.experiment](cfg)
    if out_dir is not None:
        write_outputs(res, out_dir)
    if res.violations and cfg.bound_check == "assert":
        more = f" (and {len(res.violations) - 1} more)" if len(res.violations) > 1 else ""
        raise InvariantViolation(res.violations[0] + more)
    return res


# -------------------------------------------------------------------- output


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_scan_csv(path, res: ScanResult) -> None:
    with open(path, "w") as fh:
        fh.write(f"# experiment={res.name} config={res.cfg.config_hash()}\n")
        fh.write(",".join(res.columns) + "\n")
        for row in res.rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def fits_text(res: ScanResult) -> str:
    blocks = []
    for label, fits in res.fits:
        lines = [f"[{label}]"]
        if not fits:
            lines.append("status=insufficient data")
        for f in fits:
            lines.append(f.to_text().rstrip("\n"))
            if f.model_name == "loglog_linear":
                lines.append(f"decay_exponent={-f.parameters['b']!r}")
            lines.append("")
        if len(fits) >= 2:
            ranking = compare_models(fits)
            lines.append("ranking=" + ",".join(r.result.model_name for r in ranking))
            lines += [f"rms_ratio_{r.result.model_name}={r.ratio!r}" for r in ranking]
        blocks.append("\n".join(lines).rstrip("\n") + "\n")
    return "\n".join(blocks)


def write_outputs(res: ScanResult, out_dir) -> None:
    os.makedirs(os.path.join(out_dir, "pulses"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "curves"), exist_ok=True)
    write_scan_csv(os.path.join(out_dir, "scan.csv"), res)
    with open(os.path.join(out_dir, "fits.txt"), "w") as fh:
        fh.write(fits_text(res))
    for n, (label, fits) in enumerate(res.fits):
        if fits:
            write_curve_csv(os.path.join(out_dir, "curves", f"curve_{n:02d}.csv"), fits)
    t = np.linspace(0.0, res.cfg.T, res.cfg.n_steps + 1)
    for name, pulse in res.pulses.items():
        write_pulse_csv(os.path.join(out_dir, "pulses", f"{name}.csv"), pulse, t)
        with open(os.path.join(out_dir, "pulses", f"{name}.json"), "w") as fh:
            json.dump(pulse.to_record(), fh, indent=1)
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write(res.cfg.to_text())
    with open(os.path.join(out_dir, "timing.txt"), "w") as fh:
        fh.writelines(f"{label}: {sec:.3f} s\n" for label, sec in res.timing)
