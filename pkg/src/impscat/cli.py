"""Command-line entry points for the scattering experiment pipeline.

Subcommands:

* ``generate``: experiment config -> dataset file (JSON).
* ``invert``: dataset (+ optional config override) -> trajectory file,
  with an optional JSON-lines iteration log.
* ``forward``: one forward solve of the configured truth shape -> receptor
  readings file.
* ``report``: trajectory + dataset -> per-frequency CSV error report.
* ``selftest``: quick oracle checks (series solution, quadrature, Jacobian
  finite differences); exits nonzero on any failure.

All runs are deterministic given the seed in the config.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .forward import forward_map
from .harness import (
    ExperimentConfig,
    ScatteringDataset,
    error_report,
    generate_data,
    invert_dataset,
    make_shape,
    report_csv,
    trajectory_from_json,
    trajectory_to_json,
)
from .models import ConstantImpedance


def _load_config(path: str) -> ExperimentConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise SystemExit(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SystemExit(f"malformed config {path}: {exc}")
    try:
        return ExperimentConfig.from_json(obj)
    except (TypeError, ValueError) as exc:
        raise SystemExit(f"invalid config {path}: {exc}")


def _write(path: str | None, text: str, verbose: bool, label: str):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
        if verbose:
            print(f"wrote {label} to {path}", file=sys.stderr)


def cmd_generate(args) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config = ExperimentConfig.from_json({**config.to_json(), "seed": args.seed})
    dataset = generate_data(config)
    _write(args.out, json.dumps(dataset.to_json()), args.verbose, "dataset")
    return 0


def cmd_invert(args) -> int:
    dataset = ScatteringDataset.from_json(json.loads(Path(args.data).read_text()))
    config = _load_config(args.config) if args.config else dataset.config
    log_entries = []
    trajectory = invert_dataset(dataset, config, log=log_entries.append)
    _write(args.out, json.dumps(trajectory_to_json(trajectory)), args.verbose, "trajectory")
    if args.log:
        with open(args.log, "w") as fh:
            for entry in log_entries:
                fh.write(json.dumps(entry) + "\n")
    if args.verbose:
        for st in trajectory:
            print(
                f"frequency index {st.frequency_index}: residual {st.residual:.3e}",
                file=sys.stderr,
            )
    return 0


def cmd_forward(args) -> int:
    config = _load_config(args.config)
    curve = make_shape(config.shape)
    omega = config.frequencies()[args.frequency_index]
    from .harness import build_sensors, DATA_NODE_FLOOR
    from .forward import nodes_for_wavenumber

    sensors, _ = build_sensors(omega, config)
    medium = config.medium(omega)
    n = nodes_for_wavenumber(curve.length, medium.k2, config.data_ppw, DATA_NODE_FLOOR)
    if args.kind == "transmission":
        sol = forward_map(curve, medium, sensors, kind="transmission", node_count=n)
    elif args.kind == "neumann":
        sol = forward_map(curve, medium, sensors, kind="neumann", node_count=n)
    else:
        lam = complex(*(float(t) for t in args.kind.split(",")))
        sol = forward_map(
            curve, medium, sensors, model=ConstantImpedance(lam), node_count=n
        )
    out = {
        "omega": omega,
        "far_re": sol.far.real.tolist(),
        "far_im": sol.far.imag.tolist(),
    }
    _write(args.out, json.dumps(out), args.verbose, "receptor field")
    return 0


def cmd_report(args) -> int:
    dataset = ScatteringDataset.from_json(json.loads(Path(args.data).read_text()))
    trajectory = trajectory_from_json(json.loads(Path(args.trajectory).read_text()))
    rows = error_report(trajectory, dataset)
    _write(args.out, report_csv(rows), args.verbose, "report")
    return 0


def cmd_selftest(args) -> int:
    from .geometry import sample_curve
    from .forward import ImpedanceSolver, Medium, SensorGeometry
    from .frechet import impedance_jacobian
    from .layerpot import integrate_periodic_log_singular
    from .models import pack_params, unpack_params
    from .inverse import unit_circle
    from scipy.special import jv, hankel1 as h1

    checks = []

    # hybrid quadrature against the cosine-series value
    got = integrate_periodic_log_singular(
        lambda s: np.log(2.0 * np.sin(s / 2.0)) * np.cos(3.0 * s), 128
    )
    checks.append(("quadrature log singularity", abs(got + np.pi / 3.0) < 1e-12))

    # impedance solver against the cylindrical-harmonics solution
    radius, lam, k2 = 1.0, 0.7 - 0.3j, 3.0
    medium = Medium(omega=3.0, c1=1.0, c2=1.0, delta=0.0, rho_r=1.0)
    samples = sample_curve(unit_circle(radius=radius), 192)
    ang = 2.0 * np.pi * np.arange(8) / 8
    sensors = SensorGeometry(
        directions=np.column_stack([np.cos(ang), np.sin(ang)]),
        receptors=10.0 * np.column_stack([np.cos(ang), np.sin(ang)]),
    )
    solver = ImpedanceSolver(samples, medium)
    sol = solver.solve(sensors, lam=np.full(samples.n, lam))
    n_modes = 25
    rho, theta = 10.0, ang
    ref = np.zeros((8, 8), dtype=complex)
    for i, td in enumerate(ang):
        for n in range(-n_modes, n_modes + 1):
            z = k2 * radius
            dj = jv(n - 1, z) - n / z * jv(n, z)
            dh = h1(n - 1, z) - n / z * h1(n, z)
            a_n = -(k2 * dj + 1j * k2 * lam * jv(n, z)) / (k2 * dh + 1j * k2 * lam * h1(n, z))
            ref[i] += (1j**n) * a_n * h1(n, k2 * rho) * np.exp(1j * n * (theta - td))
    err = np.max(np.abs(sol.far - ref)) / np.max(np.abs(ref))
    checks.append(("impedance solver vs series solution", err < 1e-8))

    # impedance Jacobian against finite differences
    model = ConstantImpedance(0.5 - 0.2j)
    sol0 = solver.solve(sensors, lam=np.full(samples.n, model.value))
    jac = impedance_jacobian(solver, sol0, model, sensors).matrix
    eps = 1e-5
    p0 = pack_params(model)
    fd_ok = True
    for i in range(p0.size):
        p = p0.copy()
        p[i] += eps
        up = solver.solve(sensors, lam=np.full(samples.n, unpack_params(model, p).value)).far
        p[i] -= 2 * eps
        dn = solver.solve(sensors, lam=np.full(samples.n, unpack_params(model, p).value)).far
        fd = ((up - dn) / (2 * eps)).ravel()
        fd_ok &= bool(np.max(np.abs(fd - jac[:, i])) < 1e-5 * np.max(np.abs(jac)))
    checks.append(("impedance Jacobian finite differences", fd_ok))

    failures = 0
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}: {name}")
        failures += 0 if ok else 1
    print(f"{len(checks) - failures}/{len(checks)} selftest checks passed")
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="impscat",
        description="Shape and impedance recovery from multifrequency scattering data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("invert", help="run the continuation inversion")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--log")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("forward", help="one forward solve of the truth shape")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--kind", default="transmission",
                   help="transmission | neumann | <lam_re>,<lam_im>")
    p.add_argument("--frequency-index", type=int, default=0)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("report", help="per-frequency error report CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--out")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="quick oracle checks")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_selftest)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
