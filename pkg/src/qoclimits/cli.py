"""``qoc-limits`` command line.

Subcommands: ``simulate``, ``optimize``, ``bounds``, ``fit``, ``experiment``.
Exit status is 0 on success, 2 on a configuration error and 3 when a
numerical invariant is violated.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from qoclimits.config import ConfigError, config_keys, load_config
from qoclimits.dynamics import (
    ControlProblem,
    Decay,
    Dephasing,
    ensemble_state,
    evolve_master,
    evolve_trajectory,
    qubit_hamiltonian,
    realization_matrix,
    survival_infidelity,
    write_trajectory_csv,
)
from qoclimits.experiments import run_experiment
from qoclimits.fitting import MODELS, compare_models, fit_model, write_curve_csv
from qoclimits.infobounds import colored_error_bound, white_noise_report
from qoclimits.linalg import DensityMatrix, InvariantViolation, control_error
from qoclimits.noise import PowerLawNoise, WhiteNoise
from qoclimits.optimizer import DcrabConfig, SimplexConfig, dcrab_optimize
from qoclimits.pulses import Pulse, PowerConstraint, bandwidth_for_dof, write_pulse_csv
from qoclimits.spectra import FlatSpectrum

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _state(spec: str) -> DensityMatrix:
    spec = spec.lower()
    table = {
        "0": [1, 0],
        "1": [0, 1],
        "plus": [1, 1],
        "minus": [1, -1],
        "plus_i": [1, 1j],
        "minus_i": [1, -1j],
    }
    if spec not in table:
        raise ConfigError(f"unknown state {spec!r}; choose from {sorted(table)}")
    v = np.array(table[spec], dtype=complex)
    return DensityMatrix.from_pure(v / np.linalg.norm(v))


def _add_problem_args(p):
    p.add_argument("--hamiltonian", default="h1", choices=["h1", "h2", "h3", "h4"])
    p.add_argument("--omega-y", type=float, default=2 * np.pi)
    p.add_argument("--omega-z", type=float, default=2 * np.pi)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--n-steps", type=int, default=4096)
    p.add_argument("--initial", default="0", help="0, 1, plus, minus, plus_i or minus_i")
    p.add_argument("--target", default="1")
    p.add_argument("--noise", default="none", choices=["none", "dephasing", "decay", "white", "powerlaw"])
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--noise-power", type=float, default=4 * np.pi**2)
    p.add_argument("--realizations", type=int, default=10)
    p.add_argument("--noise-seed", type=int, default=0)


def _problem(args) -> ControlProblem:
    drift, ctrl, noise = qubit_hamiltonian(args.hamiltonian, args.omega_y, args.omega_z)
    return ControlProblem(drift, ctrl, noise, _state(args.initial), _state(args.target), args.T, args.n_steps)


def _noise(args):
    if args.noise == "none":
        return None
    if args.noise == "dephasing":
        return Dephasing(args.gamma)
    if args.noise == "decay":
        return Decay(args.gamma)
    if args.noise == "white":
        return WhiteNoise(args.gamma)
    return PowerLawNoise(args.alpha, args.noise_power)


def _load_pulse(args) -> Pulse:
    if args.pulse_record:
        with open(args.pulse_record) as fh:
            return Pulse.from_record(json.load(fh))
    return Pulse.constant(args.amplitude, args.T)


def cmd_simulate(args) -> int:
    prob = _problem(args)
    pulse = _load_pulse(args)
    noise = _noise(args)
    if noise is None or isinstance(noise, (Dephasing, Decay)):
        out = evolve_master(prob, pulse, noise, record=bool(args.dump))
        state = out[0] if args.dump else out
        if args.dump:
            write_trajectory_csv(args.dump, prob.grid, out[1])
    else:
        xi = realization_matrix(prob, noise, args.realizations, args.noise_seed)
        state = ensemble_state(prob, pulse, xi)
        if args.dump:
            real = noise.sample(prob.grid, args.noise_seed)
            _, path = evolve_trajectory(prob, pulse, real, record=True)
            write_trajectory_csv(args.dump, prob.grid, path)
    print(f"control_error={control_error(prob.target, state)!r}")
    print(f"survival_infidelity={survival_infidelity(prob.target, state)!r}")
    print(f"purity={state.purity()!r}")
    for i, row in enumerate(state.matrix):
        print(f"rho_{i}=" + ",".join(repr(complex(v)) for v in row))
    return 0


def cmd_optimize(args) -> int:
    prob = _problem(args)
    noise = _noise(args)
    band = args.bandwidth if args.bandwidth is not None else bandwidth_for_dof(args.D, args.T)
    power = PowerConstraint(args.power) if args.power is not None else None
    cfg = DcrabConfig(
        n_superiterations=args.superiterations,
        n_c=args.n_c,
        band=(0.0, band),
        power=power,
        seed=args.seed,
        n_realizations=args.realizations,
        noise_seed=args.noise_seed,
        simplex=SimplexConfig(max_evals=args.max_evals_per_superiteration),
        max_evals_total=args.max_evals,
    )
    res = dcrab_optimize(prob, noise, cfg)
    print(f"error={res.error!r}")
    print(f"n_evals={res.n_evals}")
    print("history=" + ",".join(repr(float(h)) for h in res.history))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_pulse_csv(os.path.join(args.out, "pulse.csv"), res.pulse, prob.grid)
        with open(os.path.join(args.out, "pulse.json"), "w") as fh:
            json.dump(res.pulse.to_record(), fh, indent=1)
        with open(os.path.join(args.out, "trace.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["superiteration", "eval", "error"])
            w.writerows((j, e, repr(float(v))) for j, e, v in res.trace)
    return 0


def cmd_bounds(args) -> int:
    if args.alpha is None:
        rep = white_noise_report(args.signal_power, args.noise_power, args.bandwidth, args.T, args.d_w, args.epsilon)
        text = rep.to_text()
    else:
        model = PowerLawNoise(args.alpha, args.noise_power)
        phi_xi = model.spectrum(args.T, args.T / args.n_steps)
        lo, hi = phi_xi.omega_min, min(args.bandwidth, phi_xi.omega_max)
        phi_f = FlatSpectrum(2 * np.pi * args.signal_power / args.bandwidth)
        eps = colored_error_bound(phi_f, phi_xi, (lo, hi), args.T, args.d_w)
        text = f"alpha={args.alpha!r}\nband_lo={lo!r}\nband_hi={hi!r}\nerror_lower_bound={eps!r}\n"
    sys.stdout.write(text)
    if args.csv:
        rows = [line.split("=", 1) for line in text.strip().splitlines()]
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([k for k, _ in rows])
            w.writerow([v for _, v in rows])
    return 0


def _read_scan(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def cmd_fit(args) -> int:
    rows = _read_scan(args.input)
    for cond in args.where or []:
        key, value = cond.split("=", 1)
        rows = [r for r in rows if r.get(key) == value or _num_eq(r.get(key), value)]
    if not rows:
        raise ConfigError("no rows left to fit")
    try:
        x = np.array([float(r[args.x]) for r in rows])
        y = np.array([float(r[args.y]) for r in rows])
    except KeyError as exc:
        raise ConfigError(f"column {exc} not found in {args.input}") from None
    models = args.models.split(",")
    for m in models:
        if m not in MODELS:
            raise ConfigError(f"unknown model {m!r}; choose from {sorted(MODELS)}")
    fits = [fit_model(m, x, y, log_space=args.log_space, exclude_smallest=args.exclude_smallest) for m in models]
    text = "\n".join(f.to_text() for f in fits)
    if len(fits) > 1:
        ranking = compare_models(fits)
        text += "\nranking=" + ",".join(r.result.model_name for r in ranking) + "\n"
        text += "".join(f"rms_ratio_{r.result.model_name}={r.ratio!r}\n" for r in ranking)
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    if args.curve:
        write_curve_csv(args.curve, fits)
    return 0


def _num_eq(a, b) -> bool:
    try:
        return float(a) == float(b)
    except (TypeError, ValueError):
        return False


def cmd_experiment(args) -> int:
    overrides = {k: v for k, v in vars(args).items() if k in config_keys() and v is not None}
    if args.seed is not None:
        overrides["base_seed"] = str(args.seed)
    cfg = load_config(args.config, args.name, args.paper_scale, overrides)
    res = run_experiment(cfg, args.out)
    print(f"experiment={cfg.experiment} config={cfg.config_hash()} out={args.out}")
    for row in res.rows:
        print(",".join(str(v) for v in row))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qoc-limits", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="propagate one pulse and report the final state")
    _add_problem_args(p)
    p.add_argument("--amplitude", type=float, default=0.0, help="constant pulse value")
    p.add_argument("--pulse-record", help="JSON pulse record written by 'optimize'")
    p.add_argument("--dump", help="write the state trajectory to this CSV (debug)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="dCRAB pulse optimisation")
    _add_problem_args(p)
    p.add_argument("--D", type=float, default=10.0, help="degrees of freedom (sets bandwidth)")
    p.add_argument("--bandwidth", type=float, help="angular bandwidth, overrides --D")
    p.add_argument("--power", type=float, help="fixed mean pulse power")
    p.add_argument("--superiterations", type=int, default=10)
    p.add_argument("--n-c", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-evals", type=int, help="total evaluation budget")
    p.add_argument("--max-evals-per-superiteration", type=int)
    p.add_argument("--out", help="directory for pulse.csv, pulse.json and trace.csv")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("bounds", help="information-theoretic error and time bounds")
    p.add_argument("--signal-power", type=float, required=True)
    p.add_argument("--noise-power", type=float, required=True)
    p.add_argument("--bandwidth", type=float, required=True, help="angular bandwidth")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--d-w", type=int, default=3)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float, help="1/f^alpha noise instead of white noise")
    p.add_argument("--n-steps", type=int, default=4096, help="sets the colored-noise cutoff")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("fit", help="fit error-scaling models to a scan CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--models", default="log_shifted,exp_shifted")
    p.add_argument("--log-space", action="store_true")
    p.add_argument("--exclude-smallest", action="store_true")
    p.add_argument("--where", action="append", help="keep rows with column=value (repeatable)")
    p.add_argument("--out")
    p.add_argument("--curve", help="write fitted curves to this CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("experiment", help="run one of the scan experiments")
    p.add_argument("--name", choices=["dephasing", "decay", "protect", "transfer"])
    p.add_argument("--config")
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out")
    for key in config_keys():
        if key in ("experiment", "base_seed"):
            continue
        p.add_argument(f"--{key}", dest=key, metavar="VALUE")
    p.add_argument("--base_seed", dest="base_seed", metavar="VALUE")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"numerical invariant violated: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
