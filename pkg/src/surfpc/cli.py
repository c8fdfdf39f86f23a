"""Command-line driver for the surface predictor-corrector experiments.

Every subcommand writes its tables (CSV or JSON), a JSON summary and a run
manifest into ``--out``.  Passing a manifest back with ``--manifest`` replays
the run with identical settings.

Exit codes: 0 success, 2 solver failure, 3 domain or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, atomistic, cauchy_born, corrector, experiments
from .errors import DomainError, FitError, SolverError
from .forces import TEST2_SUPPORT, lattice_profile, read_force_csv, rescale, test2_profile
from .optimize import SolverConfig
from .potentials import EAMPotential, PotentialParams

logger = logging.getLogger("surfpc")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 2, 3

SUBCOMMANDS = ("ground-state", "converge-L", "long-wavelength", "fixed-force", "check", "error-budget")


def _int_list(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text):
    return [float(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--n", type=int, default=atomistic.DEFAULT_N, help="number of free bonds (default 1000)")
    shared.add_argument("--tol", type=float, default=1e-10, help="residual l2 tolerance")
    shared.add_argument("--max-iter", type=int, default=200_000)
    shared.add_argument("--out", type=Path, default=Path("results"))
    shared.add_argument("--potential", type=Path, default=None, help="key=value parameter file")
    shared.add_argument("--format", choices=("csv", "json"), default="csv")
    shared.add_argument("--trace", action="store_true", help="dump the optimiser energy trace as CSV")
    shared.add_argument("--manifest", type=Path, default=None, help="replay settings from a run manifest")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="surfpc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground-state", parents=[shared], help="force-free ground state and u_pc_L = q_L")
    p.add_argument("--layers", type=_int_list, default=[1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20])

    p = sub.add_parser("converge-L", parents=[shared], help="corrector convergence in the layer width")
    p.add_argument("--layers", type=_int_list, default=list(range(2, 13)))
    p.add_argument("--ref-layer", type=int, default=40)
    p.add_argument("--F0", type=float, default=0.0)

    p = sub.add_parser("long-wavelength", parents=[shared], help="rescaled forces f_l = lam fhat(lam l)")
    p.add_argument("--lambda", dest="lambdas", type=_float_list,
                   default=[2.0**-k for k in range(1, 7)], help="comma-separated scaling factors")
    p.add_argument("--force", default="builtin:test2", help="profile: CSV path or builtin:test2")
    p.add_argument("--load", choices=("midpoint", "lattice"), default="midpoint")

    p = sub.add_parser("fixed-force", parents=[shared], help="fixed force, sweep of layer widths")
    p.add_argument("--layers", type=_int_list, default=[0, 1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20])
    p.add_argument("--lambda", dest="lambdas", type=_float_list, default=[1.0])
    p.add_argument("--force", default="builtin:test2")
    p.add_argument("--load", choices=("midpoint", "lattice"), default="midpoint")

    sub.add_parser("check", parents=[shared], help="derivative, symmetry and identity checks")

    p = sub.add_parser("error-budget", parents=[shared], help="Cauchy-Born predictor and error-budget terms")
    p.add_argument("--lambda", dest="lambdas", type=_float_list, default=[1.0])
    p.add_argument("--force", default="builtin:test2")
    p.add_argument("--load", choices=("midpoint", "lattice"), default="midpoint")
    return parser


def _profile(source: str):
    if source == "builtin:test2":
        return test2_profile, TEST2_SUPPORT
    if source.startswith("builtin:"):
        raise DomainError(f"unknown builtin force {source!r}")
    return lattice_profile(read_force_csv(source))


def _force(source: str, lam: float):
    """``builtin:test2`` is rescaled; a CSV force is used as-is for ``lam = 1``."""
    if source != "builtin:test2" and lam == 1.0:
        return read_force_csv(source)
    fhat, support = _profile(source)
    return rescale(fhat, lam, support)


def _manifest(args, pot: EAMPotential, cfg: SolverConfig) -> dict:
    settings = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
                if k not in ("manifest", "verbose", "out")}
    return {
        "program": "surfpc",
        "version": __version__,
        "command": args.command,
        "settings": settings,
        "potential": pot.params.to_dict(),
        "solver": {k: getattr(cfg, k) for k in cfg.__dataclass_fields__},
    }


def _apply_manifest(args, path: Path):
    data = json.loads(path.read_text())
    if data.get("command") != args.command:
        raise DomainError(f"manifest is for {data.get('command')!r}, not {args.command!r}")
    for k, v in data.get("settings", {}).items():
        if k in ("command",):
            continue
        if k == "potential":
            v = Path(v) if v is not None else None
        setattr(args, k, v)
    args._manifest_potential = data.get("potential")
    return args


def _write_table(rows, path_stem: Path, fmt: str) -> Path:
    path = path_stem.with_suffix("." + fmt)
    if fmt == "json":
        path.write_text(json.dumps(rows, indent=2))
    else:
        with open(path, "w", newline="") as fh:
            if rows:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]))
                w.writeheader()
                for r in rows:
                    w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return path


def _write_profiles(path: Path, columns: dict) -> None:
    n = max(len(v) for v in columns.values())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bond", *columns])
        for i in range(n):
            w.writerow([i, *(repr(float(v[i])) if i < len(v) else "0.0" for v in columns.values())])


def _trace(args, name, report):
    if args.trace and report is not None and report.energy_trace:
        report.write_trace(args.out / f"{name}_trace.csv")


def _emit(args, summary: dict) -> None:
    (args.out / f"{args.command}_summary.json").write_text(json.dumps(summary, indent=2, default=float))
    print(json.dumps(summary, indent=2, default=float))


def cmd_ground_state(args, pot, cfg):
    res = experiments.run_ground_state(args.n, args.layers, pot, cfg)
    _trace(args, "atomistic", res["atomistic_report"])
    _write_table(res["rows"], args.out / "ground_state_errors", args.format)
    cols = {"atomistic": res["u_gr"].strains, "cauchy_born": res["u_cb"].strains}
    for L, q in res["correctors"].items():
        cols[f"pc_L{L}"] = q.padded(args.n)
    _write_profiles(args.out / "ground_state_profiles.csv", cols)
    res["u_gr"].to_csv(args.out / "ground_state_atomistic.csv")
    _emit(args, {
        "error_cb": res["error_cb"],
        "errors": {r["L"]: r["error"] for r in res["rows"]},
        "lambda_plus": res["lambda_plus"],
        "mu_a_fit": res["mu_a_fit"].to_dict(),
        "alternating_sign": res["alternating"],
        "hessian_min_eig": res["atomistic_report"].hessian_min_eig,
        "surface_residual": float(atomistic.residual(np.zeros(args.n), None, pot)[0]),
    })


def cmd_converge_L(args, pot, cfg):
    res = experiments.run_converge_L(args.layers, args.ref_layer, args.F0, pot, cfg)
    _write_table(res["rows"], args.out / "converge_L", args.format)
    res["q_ref"].to_csv(args.out / f"corrector_L{args.ref_layer}.csv")
    corrector.write_corrector_report(args.out / f"corrector_L{args.ref_layer}.json",
                                     res["q_ref"], res["ref_report"], res["mu_q_fit"])
    _emit(args, {"mu_q_fit": res["mu_q_fit"].to_dict(), "log_linear_ratio": res["ratio"],
                 "differences": {r["L"]: r["difference"] for r in res["rows"]}})


def cmd_long_wavelength(args, pot, cfg):
    fhat, support = _profile(args.force)
    res = experiments.run_long_wavelength(args.lambdas, args.n, pot, cfg, args.load, fhat, support)
    _write_table(res["rows"], args.out / "long_wavelength", args.format)
    _emit(args, {"slope": res["slope"], "rows": res["rows"]})


def cmd_fixed_force(args, pot, cfg):
    if len(args.lambdas) != 1:
        raise DomainError("fixed-force takes a single --lambda")
    force = _force(args.force, args.lambdas[0])
    res = experiments.run_fixed_force(args.layers, args.n, pot, cfg, args.load, force=force)
    _trace(args, "atomistic", res["reports"]["atomistic"])
    _write_table(res["rows"], args.out / "fixed_force_errors", args.format)
    cols = {"atomistic": res["u_a"].strains, "cauchy_born": res["u_cb"].strains}
    cols.update({f"pc_L{L}": u.strains for L, u in res["profiles"].items()})
    _write_profiles(args.out / "fixed_force_profiles.csv", cols)
    _emit(args, {"error_cb": res["error_cb"], "F0": res["F0"],
                 "errors": {r["L"]: r["error_pc"] for r in res["rows"]},
                 f"ratio_cb_to_pc_L{res['ratio_L']}": res["ratio"],
                 "budget": res["budget"].to_dict()})


def cmd_check(args, pot, cfg):
    rep = experiments.run_potential_check(pot)
    for line in rep.lines():
        print(line)
    (args.out / "check_summary.json").write_text(json.dumps(
        {"passed": rep.passed, "failures": rep.failures, "results": rep.results}, indent=2))
    if not rep.passed:
        print("failed checks: " + ", ".join(rep.failures), file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_error_budget(args, pot, cfg):
    rows = []
    for lam in args.lambdas:
        force = _force(args.force, lam)
        u_cb, rep = cauchy_born.solve_cb(force, args.n, pot, cfg, load=args.load)
        _trace(args, f"cb_lambda{lam:g}", rep)
        budget = cauchy_born.error_budget(u_cb, force)
        F0 = cauchy_born.surface_strain_F0(u_cb, force, pot)
        cauchy_born.write_cb_csv(u_cb, force, args.out / f"cb_lambda{lam:g}.csv")
        rows.append({"lambda": lam, "F0": F0, "dual_norm": force.dual_norm(), **budget.to_dict()})
    _write_table(rows, args.out / "error_budget", args.format)
    _emit(args, {"rows": rows})


COMMANDS = {
    "ground-state": cmd_ground_state,
    "converge-L": cmd_converge_L,
    "long-wavelength": cmd_long_wavelength,
    "fixed-force": cmd_fixed_force,
    "check": cmd_check,
    "error-budget": cmd_error_budget,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.manifest is not None:
            _apply_manifest(args, args.manifest)
        if getattr(args, "_manifest_potential", None) is not None:
            params = PotentialParams.from_mapping(args._manifest_potential)
        elif args.potential is not None:
            params = PotentialParams.from_file(args.potential)
        else:
            params = PotentialParams()
        pot = EAMPotential(params)
        cfg = SolverConfig(grad_tol=args.tol, max_iter=args.max_iter, record_trace=args.trace)
        if args.n < 1:
            raise DomainError("--n must be positive")
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"{args.command}_manifest.json").write_text(
            json.dumps(_manifest(args, pot, cfg), indent=2))
        status = COMMANDS[args.command](args, pot, cfg)
        return EXIT_OK if status is None else status
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DomainError, FitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
