"""Command-line front end.

Subcommands:

* ``sweep``      pump-rate sweep producing one figure-ready CSV row per w,
                 with any subset of the mcwf / cumulant / closed_form /
                 oracle solvers.
* ``subspaces``  P_{M,J} population tables and transition-rate diagrams
                 (``--fig3`` emits the N=4 preset at w = 0.1, 2.0, 10.0).
* ``coherence``  two-time dipole correlation: exact regression curve and
                 the analytic exponential.
* ``validate``   parse and echo a configuration without running solvers.

Exit codes: 0 success, 1 validation error, 2 capability error,
3 numerical error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
import time

import numpy as np

from . import analysis, cumulant, hilbert, liouville, mcwf, tables
from .errors import CapabilityError, NumericalError, ValidationError
from .model import Config, ModelParams, load_config

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CAPABILITY = 2
EXIT_NUMERICAL = 3

SWEEP_METHODS = ("mcwf", "cumulant", "closed_form", "oracle")


class _Parser(argparse.ArgumentParser):
    def error(self, message):          # argparse usage errors are validation
        raise ValidationError(message)


def _exit_code_for(exc: Exception) -> int:
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, CapabilityError):
        return EXIT_CAPABILITY
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    raise exc


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _base_header(config: Config, args) -> dict:
    return {
        "created": _now(),
        "config": config.as_dict(),
        "seed": getattr(args, "seed", None),
        "command": sys.argv[1:] if sys.argv else [],
    }


def _w_values(args) -> list[float]:
    if args.w:
        values = [float(w) for w in args.w]
    else:
        if args.w_min is None or args.w_max is None:
            raise ValidationError(
                "provide either repeated --w values or --w-min/--w-max")
        if args.w_points < 1:
            raise ValidationError("--w-points must be >= 1")
        if args.w_spacing == "log":
            if args.w_min <= 0:
                raise ValidationError("log spacing requires --w-min > 0")
            values = list(np.geomspace(args.w_min, args.w_max, args.w_points))
        else:
            values = list(np.linspace(args.w_min, args.w_max, args.w_points))
    if not values:
        raise ValidationError("empty pump-rate list")
    return [float(v) for v in values]


def _add_mcwf_args(sub):
    sub.add_argument("--n-traj", type=int, default=200)
    sub.add_argument("--t-end", type=float, default=None)
    sub.add_argument("--burn-in", type=float, default=None,
                     help="steady-state averaging start t1")
    sub.add_argument("--window", type=float, default=None,
                     help="steady-state averaging length T")
    sub.add_argument("--n-out", type=int, default=1001)
    sub.add_argument("--workers", type=int, default=1)
    sub.add_argument("--engine", choices=("auto", "spectral", "series"),
                     default="auto")


def _run_mcwf_point(params: ModelParams, args, seed: int,
                    observables) -> mcwf.SteadyStateEstimate:
    t1 = args.burn_in if args.burn_in is not None else mcwf.default_burn_in(params)
    T = args.window if args.window is not None else mcwf.default_window(params)
    t_end = args.t_end if args.t_end is not None else t1 + T
    records = mcwf.run_ensemble(params, None, t_end, args.n_traj, seed,
                                observables=observables, n_out=args.n_out,
                                engine=args.engine, workers=args.workers,
                                record_jumps=False)
    return mcwf.steady_state(records, t1, T)


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    methods = args.method or ["mcwf", "cumulant"]
    for m in methods:
        if m not in SWEEP_METHODS:
            raise ValidationError(f"unknown method {m!r} (choose from {SWEEP_METHODS})")
    w_values = _w_values(args)
    base = config.params
    columns = ["w", "regime"]
    for m in methods:
        columns += [f"I_{m}"]
        if m == "mcwf":
            columns += ["I_mcwf_err"]
        columns += [f"Ne_{m}", f"Iuncorr_{m}"]
    columns += ["errors"]
    rows = []
    timings = []
    worst = EXIT_OK
    for i, w in enumerate(w_values):
        params = ModelParams(N=base.N, gamma_c=base.gamma_c, w=w)
        row: dict = {"w": w, "regime": params.regime}
        errors = []
        row_timing = {}
        for m in methods:
            t0 = time.perf_counter()
            try:
                if m == "mcwf":
                    est = _run_mcwf_point(params, args,
                                          mcwf.derive_seed(args.seed, i),
                                          mcwf.DEFAULT_OBSERVABLES)
                    rep = analysis.emission_report(params, est)
                    row["I_mcwf"] = rep.I
                    row["I_mcwf_err"] = rep.I_err
                    row["Ne_mcwf"] = rep.Ne
                    row["Iuncorr_mcwf"] = rep.I_uncorr
                elif m == "oracle":
                    obs = liouville.steady_state_observables(params)
                    row["I_oracle"] = obs["I"]
                    row["Ne_oracle"] = obs["Ne"]
                    row["Iuncorr_oracle"] = obs["Ne"] * params.gamma_c
                elif m == "cumulant":
                    state = cumulant.steady_state_cubic(params, mode=args.cumulant_mode)
                    ne = params.N * (1.0 + state.sz) / 2.0
                    row["I_cumulant"] = cumulant.emission_rate(state, params)
                    row["Ne_cumulant"] = ne
                    row["Iuncorr_cumulant"] = ne * params.gamma_c
                else:
                    closed = cumulant.rescaled_steady_state(params)
                    ne = params.N * (0.5 + closed.jz)
                    row["I_closed_form"] = params.N**2 * params.gamma_c * closed.jpjm
                    row["Ne_closed_form"] = ne
                    row["Iuncorr_closed_form"] = ne * params.gamma_c
            except (ValidationError, CapabilityError, NumericalError) as exc:
                errors.append(f"{m}:{type(exc).__name__}:{exc}")
                worst = max(worst, _exit_code_for(exc))
            row_timing[m] = time.perf_counter() - t0
        row["errors"] = ";".join(errors).replace(",", " ")
        rows.append(row)
        timings.append(row_timing)
    header = _base_header(config, args)
    header["sweep"] = {"methods": methods, "w_values": w_values,
                       "n_traj": args.n_traj, "cumulant_mode": args.cumulant_mode}
    header["timing"] = {"rows_seconds": timings}
    tables.write_table(args.out, header, columns, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return worst


def cmd_subspaces(args) -> int:
    if args.fig3:
        config = Config(params=ModelParams(N=4, gamma_c=1.0, w=0.1))
        w_values = [0.1, 2.0, 10.0]
    else:
        if not args.config:
            raise ValidationError("--config is required without --fig3")
        config = load_config(args.config)
        w_values = [float(w) for w in args.w] if args.w else [config.params.w]
    base = config.params
    if base.N > hilbert.DECOMPOSITION_CAP:
        raise CapabilityError(
            f"subspace analysis needs the (J,M) decomposition; N={base.N} "
            f"exceeds the cap of {hilbert.DECOMPOSITION_CAP}")
    decomp = hilbert.jm_decomposition(base.N)
    worst = EXIT_OK
    for i, w in enumerate(w_values):
        params = ModelParams(N=base.N, gamma_c=base.gamma_c, w=w)
        if args.method == "oracle":
            rho = liouville.steady_state_dm(liouville.build_liouvillian(params))
            table = analysis.subspace_populations(decomp, rho)
        else:
            names = tuple(mcwf.DEFAULT_OBSERVABLES) \
                + tuple(mcwf.projector_observable_names(params.N))
            est = _run_mcwf_point(params, args, mcwf.derive_seed(args.seed, i),
                                  names)
            table = analysis.subspace_populations(decomp, est)
        diagram = analysis.transition_diagram(params, decomp, populations=table)
        header = _base_header(config, args)
        header["w"] = w
        header["method"] = args.method
        pop_path = f"{args.out}_w{w:g}_populations.csv"
        tables.write_table(
            pop_path, header, ["J", "M", "P", "P_err"],
            [{"J": J, "M": M, "P": P, "P_err": err}
             for (J, M, P, err) in table.entries])
        tr_path = f"{args.out}_w{w:g}_transitions.csv"
        rows = [{"J": e.J, "M": e.M, "J2": e.J2, "M2": e.M2,
                 "mechanism": e.mechanism, "rate": e.rate}
                for e in diagram.edges]
        rows += [{"J": e.J, "M": e.M, "J2": e.J2, "M2": e.M2,
                  "mechanism": f"net_{e.mechanism}", "rate": e.net_flow}
                 for e in diagram.net_edges]
        tables.write_table(tr_path, header,
                           ["J", "M", "J2", "M2", "mechanism", "rate"], rows)
        print(f"wrote {pop_path} and {tr_path}")
    return worst


def cmd_coherence(args) -> int:
    config = load_config(args.config)
    params = config.params
    methods = args.method or ["analytic"]
    for m in methods:
        if m not in ("analytic", "oracle"):
            raise ValidationError(f"unknown coherence method {m!r}")
    if args.tau_max <= 0:
        raise ValidationError(f"--tau-max must be > 0, got {args.tau_max}")
    if params.N < 2:
        raise ValidationError("the dipole correlation uses two distinct atoms (N >= 2)")
    taus = np.linspace(0.0, args.tau_max, args.tau_points)
    ct = cumulant.coherence_time(params)
    columns = ["tau"]
    rows = [{"tau": float(t)} for t in taus]
    if "oracle" in methods:
        liou = liouville.build_liouvillian(params)
        rho = liouville.steady_state_dm(liou)
        corr = liouville.regression_correlation(liou, rho, taus)
        columns += ["C_re_oracle", "C_im_oracle"]
        for row, c in zip(rows, corr):
            row["C_re_oracle"] = float(c.real)
            row["C_im_oracle"] = float(c.imag)
    if "analytic" in methods:
        amplitude = cumulant.steady_state_cubic(params, mode="rate_balanced").spm
        columns += ["C_analytic"]
        for row, t in zip(rows, taus):
            row["C_analytic"] = amplitude * float(np.exp(-ct.decay_rate * t))
    header = _base_header(config, args)
    header["coherence"] = {
        "t_coh": ct.t_coh,
        "decay_rate": ct.decay_rate,
        "amplitude_time": ct.amplitude_time,
        "methods": methods,
    }
    tables.write_table(args.out, header, columns, rows)
    print(f"wrote {args.out} (t_coh={ct.t_coh!r})")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = load_config(args.config)
    print(json.dumps(config.as_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="steadysr",
                     description="steady-state superradiance toolkit")
    subs = parser.add_subparsers(dest="command", required=True)

    sw = subs.add_parser("sweep", help="pump-rate sweep to a CSV table")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", required=True)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--method", action="append",
                    help=f"one of {SWEEP_METHODS}; repeatable")
    sw.add_argument("--w", action="append", type=float,
                    help="explicit pump rate; repeatable")
    sw.add_argument("--w-min", type=float)
    sw.add_argument("--w-max", type=float)
    sw.add_argument("--w-points", type=int, default=20)
    sw.add_argument("--w-spacing", choices=("linear", "log"), default="log")
    sw.add_argument("--cumulant-mode", choices=cumulant.MODES,
                    default="rate_balanced")
    _add_mcwf_args(sw)
    sw.set_defaults(func=cmd_sweep)

    sb = subs.add_parser("subspaces",
                         help="P_{M,J} tables and transition diagrams")
    sb.add_argument("--config")
    sb.add_argument("--out", required=True, help="output path prefix")
    sb.add_argument("--seed", type=int, default=0)
    sb.add_argument("--method", choices=("oracle", "mcwf"), default="oracle")
    sb.add_argument("--w", action="append", type=float)
    sb.add_argument("--fig3", action="store_true",
                    help="N=4 preset at w in {0.1, 2.0, 10.0}")
    _add_mcwf_args(sb)
    sb.set_defaults(func=cmd_subspaces)

    co = subs.add_parser("coherence", help="two-time dipole correlation table")
    co.add_argument("--config", required=True)
    co.add_argument("--out", required=True)
    co.add_argument("--seed", type=int, default=0)
    co.add_argument("--method", action="append",
                    help="analytic and/or oracle; repeatable")
    co.add_argument("--tau-max", type=float, required=True)
    co.add_argument("--tau-points", type=int, default=201)
    co.set_defaults(func=cmd_coherence)

    va = subs.add_parser("validate", help="parse and echo a configuration")
    va.add_argument("--config", required=True)
    va.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValidationError, CapabilityError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
