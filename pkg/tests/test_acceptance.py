"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The scan criteria run the desk-scale default configurations and take tens of
minutes in total on one core.
"""

import filecmp
import os
import time

import numpy as np
import pytest

from qoclimits.config import default_config
from qoclimits.dynamics import (
    ControlProblem,
    Decay,
    Dephasing,
    ensemble_average,
    evolve_master,
    qubit_hamiltonian,
    survival_infidelity,
)
from qoclimits.experiments import run_experiment
from qoclimits.infobounds import colored_capacity, shannon_hartley_capacity
from qoclimits.kkfilter import decoherence_function, filter_function, kk_error_estimate
from qoclimits.linalg import (
    HERMITIAN_TOL,
    POSITIVITY_TOL,
    TRACE_TOL,
    DensityMatrix,
    haar_random_state,
    pauli,
)
from qoclimits.noise import PowerLawNoise, time_grid
from qoclimits.optimizer import DcrabConfig, SimplexConfig, dcrab_optimize, nelder_mead
from qoclimits.pulses import Pulse, PulseBasis
from qoclimits.spectra import FlatSpectrum, PowerLawSpectrum

PLUS = np.array([1.0, 1.0]) / np.sqrt(2)


@pytest.fixture
def report(capsys):
    def _report(n, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {title}" + (f" [{detail}]" if detail else ""))
        assert ok, f"criterion {n} failed: {detail}"

    return _report


def _fields(res, row, *names):
    return tuple(row[res.columns.index(n)] for n in names)


def _fit(res, label, model):
    for lab, fits in res.fits:
        if lab == label:
            for f in fits:
                if f.model_name == model:
                    return f
    raise KeyError((label, model))


# ------------------------------------------------------------------------ 1


def _order(states):
    diffs = [np.max(np.abs(a - b)) for a, b in zip(states[:-1], states[1:])]
    return -np.polyfit(np.arange(len(diffs)), np.log2(diffs), 1)[0]


def test_criterion_01_integrator_oracles(report):
    t0 = time.perf_counter()
    plus = DensityMatrix.from_pure(PLUS)
    zero = np.zeros((2, 2), complex)
    worst = 0.0
    for g in (0.1, 1.0, 10.0):
        prob = ControlProblem(zero, pauli("x"), pauli("z"), plus, plus, 1.0, 4096)
        rho = evolve_master(prob, Pulse.zero(1.0), Dephasing(g))
        worst = max(worst, abs(2 * rho.matrix[0, 1].real / np.exp(-g) - 1))
        excited = DensityMatrix.basis(1)
        prob = ControlProblem(2 * np.pi * 2 * pauli("z"), pauli("x"), pauli("z"), excited, excited, 1.0, 4096)
        rho = evolve_master(prob, Pulse.zero(1.0), Decay(g))
        worst = max(worst, abs(rho.matrix[1, 1].real / np.exp(-g) - 1))
    rng = np.random.default_rng(2)
    basis = PulseBasis(np.sort(rng.uniform(0, 2 * np.pi * 5, 3)), 1.0)
    pulse = Pulse(basis, rng.normal(0, 5, basis.size), carryover=(Pulse.constant(3.0, 1.0), 1.0)).flatten()
    prob = ControlProblem(2 * np.pi * pauli("z"), pauli("x"), pauli("z"), DensityMatrix.basis(1),
                          DensityMatrix.basis(1), 1.0, 32)
    order = _order([evolve_master(prob.with_steps(n), pulse, Decay(2.0)).matrix for n in (32, 64, 128, 256, 512)])
    wall = time.perf_counter() - t0
    ok = worst <= 1e-6 and 3.5 <= order <= 4.5 and wall < 10
    report(1, "integrator oracles", ok, f"max rel err {worst:.2e}, RK4 order {order:.2f}, {wall:.1f} s")


# ------------------------------------------------------------------------ 2


def test_criterion_02_state_invariants(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    herm = trace = neg = 0.0
    for k in range(100):
        h = rng.standard_normal((2, 2, 2)) + 1j * rng.standard_normal((2, 2, 2))
        drift, ctrl = (2 * np.pi * (m + m.conj().T) / 2 for m in h)
        if k % 2:
            g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            initial = DensityMatrix(g @ g.conj().T / np.trace(g @ g.conj().T))
        else:
            initial = DensityMatrix.from_pure(haar_random_state(rng).amplitudes)
        prob = ControlProblem(drift, ctrl, pauli("z"), initial, initial, 1.0, 1024)
        diss = [Dephasing(rng.uniform(0, 20)), Decay(rng.uniform(0, 20)), None][k % 3]
        basis = PulseBasis(rng.uniform(0, 2 * np.pi * 10, 2), 1.0)
        _, path = evolve_master(prob, Pulse(basis, rng.normal(0, 2 * np.pi, basis.size)), diss, record=True)
        dag = np.conj(np.swapaxes(path, 1, 2))
        herm = max(herm, np.max(np.abs(path - dag)))
        trace = max(trace, np.max(np.abs(np.trace(path, axis1=1, axis2=2) - 1)))
        neg = max(neg, -np.linalg.eigvalsh(0.5 * (path + dag)).min())
    wall = time.perf_counter() - t0
    ok = herm <= HERMITIAN_TOL and trace <= TRACE_TOL and neg <= POSITIVITY_TOL and wall < 60
    report(2, "state invariants on 100 random problems", ok,
           f"herm {herm:.1e}, trace {trace:.1e}, min eig {-neg:.1e}, {wall:.1f} s")


# ------------------------------------------------------------------------ 3


def test_criterion_03_capacity_cross_checks(report):
    worst = 0.0
    for ratio, lo, width in [(0.01, 0.0, 1.0), (1.0, 2.0, 5.0), (37.0, 0.5, 20.0), (1e3, 10.0, 0.3)]:
        cap = colored_capacity(FlatSpectrum(2 * ratio), FlatSpectrum(2.0), (lo, lo + width))
        worst = max(worst, abs(cap / shannon_hartley_capacity(width, ratio) - 1))
    lo, hi = 2 * np.pi, 4 * np.pi

    def trap(n):
        w = np.linspace(lo, hi, n + 1)
        return np.trapezoid(np.log2(1 + w**2), w)

    oracle = (4 * trap(200_000) - trap(100_000)) / 3
    rel = abs(colored_capacity(FlatSpectrum(1.0), PowerLawSpectrum(1.0, 2.0), (lo, hi)) / oracle - 1)
    report(3, "capacity cross-checks", worst <= 1e-9 and rel <= 1e-6,
           f"flat vs Shannon-Hartley {worst:.1e}, 1/w^2 vs trapezoid {rel:.1e}")


# -------------------------------------------------------------------- 4 and 5


@pytest.fixture(scope="module")
def dephasing_scan():
    cfg = default_config("dephasing").with_updates(d_values=(20.0,))
    t0 = time.perf_counter()
    res = run_experiment(cfg.with_updates(bound_check="warn"))
    return res, time.perf_counter() - t0


def test_criterion_04_bound_consistency(report, dephasing_scan):
    res, wall = dephasing_scan
    rows = [_fields(res, r, "snr", "error", "bound") for r in res.rows]
    held = all(e >= b for _, e, b in rows)
    log = _fit(res, "D=20.0", "log_shifted").rms_residual
    exp = _fit(res, "D=20.0", "exp_shifted").rms_residual
    ok = len(rows) == 6 and held and log < exp and wall < 600
    report(4, "bound consistency and LogShifted < ExpShifted", ok,
           f"bound held at {sum(e >= b for _, e, b in rows)}/{len(rows)} points, "
           f"RMS {log:.3g} vs {exp:.3g}, {wall:.0f} s")


def test_criterion_05_free_exponent(report, dephasing_scan):
    res, _ = dephasing_scan
    p = _fit(res, "D=20.0", "log_shifted_power").parameters["p"]
    report(5, "free exponent of the shifted power model", -1.4 <= p <= -0.7, f"p = {p:.3f}")


# ------------------------------------------------------------------------ 6


def test_criterion_06_kk_consistency(report):
    t0 = time.perf_counter()
    drift, ctrl, noise = qubit_hamiltonian("h3")
    plus = DensityMatrix.from_pure(PLUS)
    prob = ControlProblem(drift, ctrl, noise, plus, plus, 1.0, 4096)
    model = PowerLawNoise(2.0, 4 * np.pi**2)
    pulse = Pulse.constant(2 * np.pi * 16, 1.0)
    kk = kk_error_estimate(pulse, model.line_spectrum(1.0, prob.dt), prob.grid)
    rho, _ = ensemble_average(prob, pulse, model, 100, 0)
    mc = survival_infidelity(plus, rho)
    rel = abs(kk.epsilon - mc) / mc
    gamma = 0.3
    chi = decoherence_function(filter_function(Pulse.zero(1.0), time_grid(1.0, 4096)), FlatSpectrum(2 * gamma))
    rel_fi = abs(chi / (8 * gamma) - 1)
    wall = time.perf_counter() - t0
    ok = kk.chi < 0.1 and rel <= 0.25 and rel_fi <= 0.02 and wall < 120
    report(6, "KK vs Monte Carlo and free induction", ok,
           f"chi {kk.chi:.3f}, KK {kk.epsilon:.4f} vs MC {mc:.4f} ({rel:.0%}), "
           f"free induction {rel_fi:.1%}, {wall:.0f} s")


# ------------------------------------------------------------------------ 7


def test_criterion_07_colored_noise_scaling(report):
    cfg = default_config("protect")
    t0 = time.perf_counter()
    res = run_experiment(cfg)
    wall = time.perf_counter() - t0
    slopes = {a: -_fit(res, f"scenario=h3 alpha={a!r}", "loglog_linear").parameters["b"] for a in cfg.alphas}
    top = max(cfg.omega_x_grid)
    last = {}
    for r in res.rows:
        w, a, s, e = _fields(res, r, "omega_x[rad/time]", "alpha", "scenario", "error")
        if s == "h3" and w == top:
            last[a] = e
    ordered = last[4.0] < last[2.0]
    ok = all(abs(b - a) <= 0.5 for a, b in slopes.items()) and ordered and wall < 900
    report(7, "H3 colored-noise slopes", ok,
           ", ".join(f"alpha={a:g}: b={b:.2f}" for a, b in slopes.items())
           + f", errors at max omega_x {last[2.0]:.2e} > {last[4.0]:.2e}, {wall:.0f} s")


# ------------------------------------------------------------------------ 8


def test_criterion_08_transfer_scan(report):
    cfg = default_config("transfer")
    t0 = time.perf_counter()
    res = run_experiment(cfg)
    wall = time.perf_counter() - t0
    a = {al: -_fit(res, f"alpha={al!r}", "loglog_linear").parameters["b"] for al in cfg.alphas}
    ok = a[4.0] > a[2.0] > 0 and wall < 1800
    report(8, "transfer slope ordering", ok, f"a(4)={a[4.0]:.2f}, a(2)={a[2.0]:.2f}, {wall:.0f} s")


# ------------------------------------------------------------------------ 9


def test_criterion_09_decay_scan(report):
    cfg = default_config("decay")
    res = run_experiment(cfg.with_updates(bound_check="warn"))
    eps = res.column("error_max")
    mono = bool(np.all(np.diff(eps[1:]) < 0))
    exp = _fit(res, "error_max", "exp_shifted").rms_residual
    power = _fit(res, "error_max", "power_shifted").rms_residual
    ok = cfg.n_instances == 10 and len(eps) == 5 and mono and exp < power
    report(9, "decay scan monotone and ExpShifted < PowerShifted", ok,
           "eps_max " + " ".join(f"{e:.3f}" for e in eps) + f", RMS {exp:.3g} vs {power:.3g}")


# ----------------------------------------------------------------------- 10

TINY = dict(n_steps=1024, n_restarts=2, n_superiterations=1, n_realizations=2, n_instances=2, max_evals=12,
            bound_check="warn")
SMALL_GRIDS = {
    "dephasing": dict(snr_grid=(10.0, 100.0), d_values=(5.0,)),
    "decay": dict(bandwidths=(2 * np.pi, 4 * np.pi)),
    "protect": dict(omega_x_grid=(2 * np.pi * 2, 2 * np.pi * 4), alphas=(2.0,), n_steps=4096),
    "transfer": dict(bandwidths=(2 * np.pi * 4, 2 * np.pi * 8), alphas=(2.0,)),
}


def _outputs(root):
    out = []
    for d, _, names in os.walk(root):
        out += [os.path.relpath(os.path.join(d, n), root) for n in names]
    return sorted(f for f in out if f.endswith(".csv") or f == "fits.txt")


def test_criterion_10_determinism(report, tmp_path):
    bad = []
    for name, grid in SMALL_GRIDS.items():
        cfg = default_config(name).with_updates(**{**TINY, **grid})
        for tag, workers in (("a", 1), ("b", 1), ("c", 2)):
            run_experiment(cfg.with_updates(workers=workers), tmp_path / name / tag)
        files = _outputs(tmp_path / name / "a")
        for tag in ("b", "c"):
            if _outputs(tmp_path / name / tag) != files:
                bad.append(f"{name}/{tag}: file sets differ")
                continue
            _, mismatch, errors = filecmp.cmpfiles(tmp_path / name / "a", tmp_path / name / tag, files,
                                                   shallow=False)
            bad += [f"{name}/{tag}/{f}" for f in mismatch + errors]
    report(10, "byte-identical outputs across repeats and worker counts", not bad,
           "; ".join(bad) or "4 experiments x (repeat, 2 workers)")


# ----------------------------------------------------------------------- 11


def test_criterion_11_optimizer_sanity(report):
    nm = nelder_mead(lambda x: np.sum((x - 1) ** 2), np.zeros(4),
                     SimplexConfig(max_evals=5000, ftol=1e-14, xtol=1e-10))
    dist = float(np.max(np.abs(nm.x - 1)))
    drift, ctrl, noise = qubit_hamiltonian("h1", 2 * np.pi, 2 * np.pi)
    prob = ControlProblem(drift, ctrl, noise, DensityMatrix.basis(0), DensityMatrix.basis(1), 1.0, 1024)
    cfg = DcrabConfig(n_superiterations=200, n_c=4, band=(0.0, 2 * np.pi * 10), seed=1, max_evals_total=2000)
    res = dcrab_optimize(prob, None, cfg)
    ok = dist < 1e-5 and res.error < 1e-3 and res.n_evals <= 2000
    report(11, "Nelder-Mead and noiseless dCRAB", ok,
           f"NM distance {dist:.1e}, dCRAB error {res.error:.1e} in {res.n_evals} evaluations")
