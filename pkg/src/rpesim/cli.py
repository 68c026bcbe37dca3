"""Command-line front end: ``rpesim run | verify | cost | spectrum``.

Exit codes: 0 on completion, 1 on compute errors (or a failed suite
verdict for ``verify``), 2 on configuration or usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from . import reporting
from .driver import MODES, ParameterError, RunConfig, Simulation, cost_report, h_for_eps, parameters_for, run
from .grid import (
    GridError,
    GridSpec,
    PotentialError,
    PotentialSpec,
    assemble_hamiltonian,
    quadratic_with_bound,
    sine_ground_state,
)
from .phase_estimation import distribution_rows, post_measurement_state
from .spectral import eigendecompose
from .suzuki import PlanError
from .verification import SUITES, run_suite

log = logging.getLogger("rpesim")

EXIT_OK, EXIT_COMPUTE, EXIT_CONFIG = 0, 1, 2

DEFAULTS = {
    "eta": 0.5,
    "k": 1,
    "mode": "energy",
    "backend": "exact-phase",
    "seed": 0,
    "repetitions": 1,
    "dim_cap": 4096,
    "account_costs": True,
    "output_dir": "rpesim-output",
    "formats": "both",
    "verbosity": 0,
}


class ConfigError(Exception):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("rpesim").joinpath("data/config.schema.json").read_text())


def shipped_configs() -> list[Path]:
    """Sample configs bundled with the package, sorted by name."""
    return sorted(Path(str(resources.files("rpesim").joinpath("data/configs"))).glob("*.json"))


def load_config(path: str | Path) -> dict:
    """Read, validate and normalize a JSON config; defaults are filled in."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON: {exc}") from None
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: schema error at {where}: {exc.message}") from None
    cfg = {**DEFAULTS, **raw}
    pot = dict(cfg["potential"])
    if "values_csv" in pot:
        csv_path = Path(pot.pop("values_csv"))
        if not csv_path.is_absolute():
            csv_path = path.parent / csv_path
        if not csv_path.is_file():
            raise ConfigError(f"tabulated potential file not found: {csv_path}")
        try:
            pot["values"] = list(PotentialSpec.from_csv(csv_path).values)
        except PotentialError as exc:
            raise ConfigError(str(exc)) from None
    cfg["potential"] = pot
    if cfg["mode"] == "state-prep" and "delta" not in cfg:
        raise ConfigError("state-prep mode needs delta")
    out_dir = Path(cfg["output_dir"])
    if out_dir.exists() and not out_dir.is_dir():
        raise ConfigError(f"output_dir {out_dir} exists and is not a directory")
    return cfg


def build_run_config(cfg: dict) -> RunConfig:
    try:
        pot_dict = cfg["potential"]
        pot = PotentialSpec(
            kind=pot_dict["kind"],
            params=dict(pot_dict.get("params", {})),
            values=tuple(pot_dict["values"]) if "values" in pot_dict else None,
        )
        g = cfg["grid"]
        grid = GridSpec(g["d"], g["n"], dim_cap=cfg["dim_cap"]) if "n" in g else None
        return RunConfig(
            pot=pot,
            grid=grid,
            eps=g.get("eps"),
            d=g["d"],
            eta=cfg["eta"],
            k=cfg["k"],
            mode=cfg["mode"],
            delta=cfg.get("delta"),
            backend=cfg["backend"],
            seed=cfg["seed"],
            overrides=dict(cfg.get("overrides", {})),
            repetitions=cfg["repetitions"],
            dim_cap=cfg["dim_cap"],
            account_costs=cfg["account_costs"],
        )
    except (GridError, PotentialError, ParameterError) as exc:
        raise ConfigError(str(exc)) from None


def _setup_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.output_dir:
            cfg["output_dir"] = args.output_dir
        if args.formats:
            cfg["formats"] = args.formats
        run_cfg = build_run_config(cfg)
        sim = Simulation(run_cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GridError, PotentialError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _setup_logging(max(cfg["verbosity"], args.verbose))
    if args.dump_config:
        reporting.write_json(args.dump_config, cfg)
    log.info("parameters: %s", sim.params)
    try:
        report = run(run_cfg, sim)
    except Exception as exc:
        print(f"error: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    out = Path(cfg["output_dir"])
    if cfg["formats"] in ("json", "both"):
        reporting.write_json(out / "report.json", report)
    if cfg["formats"] in ("csv", "both"):
        header, rows = report.stage_rows()
        reporting.write_csv(out / "stages.csv", header, rows)
    if args.dump_stage is not None:
        try:
            dump_stage(sim, report, args.dump_stage, out)
        except (ValueError, PlanError) as exc:
            print(f"error: stage dump failed: {exc}", file=sys.stderr)
            return EXIT_COMPUTE
    print(f"E_hat = {report.E_hat!r}  lambda0 = {report.lambda0_oracle!r}  E0_ref = {report.E0_ref!r}")
    print(f"rel_error = {report.rel_error!r}  success = {report.success}  N_total = {report.N_total}")
    if report.final_overlap is not None:
        print(f"final_overlap = {report.final_overlap!r}")
    print(f"wrote {out}")
    if not report.completed:
        print(f"error: run aborted: {report.error}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


def dump_stage(sim: Simulation, report, ell: int, out: Path) -> None:
    """Write the plan, distribution and post-state dumps of stage ``ell``.

    The stage input is the ground state of stage ``ell - 1`` and the post
    state is taken at the outcome the reported run observed at this stage.
    """
    L = sim.params.L
    if not 1 <= ell <= L:
        raise ValueError(f"stage must lie in 1..{L}, got {ell}")
    spec = sim.stage(ell)["spectrum"]
    prev = sim.stage(ell - 1)["spectrum"] if ell > 1 else None
    psi = prev.ground_state if prev is not None else sine_ground_state(sim.grid)
    plans = sim.plans(ell)
    reporting.write_json(out / f"plans_stage{ell}.json", [p.to_dict() for p in plans])
    header, rows = distribution_rows(sim.pe, spec, psi)
    reporting.write_csv(out / f"distribution_stage{ell}.csv", header, rows)
    if len(report.per_stage) < ell:
        raise ValueError(f"the reported run did not reach stage {ell}")
    m = report.per_stage[ell - 1].m
    post = post_measurement_state(sim.pe, spec, psi, m, trotter=sim.stage(ell).get("trotter"))
    reporting.write_csv(out / f"post_state_stage{ell}.csv", ["index", "real", "imag"], reporting.complex_rows(post.post_state))


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    if args.suite != "all" and args.suite not in SUITES:
        print(f"error: unknown suite {args.suite!r}; choose from: all, {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_CONFIG
    rows, reports, ok = [], [], True
    for name in names:
        try:
            report = run_suite(name, trials=args.trials, seed=args.seed)
        except Exception as exc:
            print(f"error: suite {name} failed to run: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_COMPUTE
        reports.append(report.to_dict())
        stats = report.statistics
        rows.append([name, report.kind, report.trials, report.failure_count, report.regenerated,
                     stats["min_margin"], report.verdict])
        ok = ok and report.passed
        print(f"{name:20s} {report.verdict:4s}  trials={report.trials} failures={report.failure_count} "
              f"regenerated={report.regenerated}")
    if args.output_dir:
        out = Path(args.output_dir)
        reporting.write_json(out / "suites.json", reports)
        reporting.write_csv(out / "suites.csv",
                            ["suite", "kind", "trials", "failures", "regenerated", "min_margin", "verdict"], rows)
    return EXIT_OK if ok else EXIT_COMPUTE


def cost_rows(d: int, C: float, eps: float, eta: float, ks, mode: str, delta: float | None, sweep: int, plan: bool):
    header = ["k", "h", "n", "b", "t0", "L", "q", "N_bound", "N_bound_terms", "N_planned", "qubits_top", "qubits_bottom"]
    rows = []
    h0 = h_for_eps(eps, d)
    for k in ks:
        for i in range(sweep):
            h = h0 / 2**i
            n = round(1 / h) - 1
            params = parameters_for(d, h, C, eta, mode, delta)
            sim = None
            if plan:
                try:
                    grid = GridSpec(d, n)
                    sim = Simulation(RunConfig(pot=quadratic_with_bound(grid, C), grid=grid, k=k, eta=eta,
                                               mode=mode, delta=delta), params=params)
                    for ell in range(1, params.L + 1):
                        sim.plans(ell)
                except (GridError, PlanError) as exc:
                    log.info("planning skipped at h=%s: %s", h, exc)
                    sim = None
            cr = cost_report(params, k, sim)
            bottom = d * math.ceil(math.log2(n + 1))
            rows.append([k, h, n, params.b, params.t0, params.L, params.q, cr.N_total_bound,
                         cr.N_total_bound_terms, cr.N_total_planned, params.q, bottom])
    return header, rows


def cmd_cost(args) -> int:
    if args.d < 1 or args.C <= 0 or not 0 < args.eps < 1 or not 0 < args.eta < 1 or args.sweep < 1:
        print("error: need d >= 1, C > 0, 0 < eps < 1, 0 < eta < 1, sweep >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if any(k < 1 for k in args.k):
        print("error: k must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.mode == "state-prep" and (args.delta is None or not 0 < args.delta < 1):
        print("error: state-prep mode needs 0 < delta < 1", file=sys.stderr)
        return EXIT_CONFIG
    _setup_logging(args.verbose)
    try:
        header, rows = cost_rows(args.d, args.C, args.eps, args.eta, args.k, args.mode, args.delta, args.sweep, args.plan)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(reporting.csv_text(header, rows), end="")
    if args.mode == "state-prep":
        top = rows[0][header.index("q")]
        asym = 3 * math.log2(1 / args.eps) + math.log2(1 / args.delta)
        print(f"# top register q = b + t0 = {top}; 3 log2(1/eps) + log2(1/delta) = {asym:.4g}; "
              f"bottom register = {rows[0][-1]} qubits (d log2(1/h))")
    if args.csv:
        reporting.write_csv(args.csv, header, rows)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    try:
        cfg = load_config(args.config)
        run_cfg = build_run_config(cfg)
        grid = run_cfg.resolved_grid()
        s = 1.0 if args.s is None else args.s
        ham = assemble_hamiltonian(grid, run_cfg.pot, s)
    except (ConfigError, GridError, PotentialError, ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        spec = eigendecompose(ham)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    header, rows = spec.to_csv_rows()
    if args.output:
        reporting.write_csv(args.output, header, rows)
        print(f"wrote {args.output}")
    else:
        print(reporting.csv_text(header, rows), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpesim", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None,
                        help="thread-count hint; exported as OMP_NUM_THREADS for child processes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the staged algorithm from a JSON config")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.add_argument("--formats", choices=["json", "csv", "both"])
    p.add_argument("--dump-config", metavar="PATH", help="write the normalized config (defaults filled in)")
    p.add_argument("--dump-stage", type=int, metavar="ELL",
                   help="also write plan JSON, distribution CSV and post-state CSV for stage ELL")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run a verification suite (or 'all')")
    p.add_argument("suite", help=f"one of: all, {', '.join(SUITES)}")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cost", help="parameter and exponential-count table over a sweep of h")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--C", type=float, default=2.0)
    p.add_argument("--eps", type=float, default=0.125)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--k", type=int, nargs="+", default=[1])
    p.add_argument("--mode", choices=MODES, default="energy")
    p.add_argument("--delta", type=float)
    p.add_argument("--sweep", type=int, default=1, help="number of h values, halving from the first")
    p.add_argument("--plan", action="store_true", help="also plan Suzuki products where feasible")
    p.add_argument("--csv", metavar="PATH")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("spectrum", help="dump the spectrum of a configured Hamiltonian as CSV")
    p.add_argument("config")
    p.add_argument("--s", type=float, help="stage fraction (default 1)")
    p.add_argument("--output", metavar="PATH")
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_CONFIG
        os.environ["OMP_NUM_THREADS"] = str(args.threads)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
