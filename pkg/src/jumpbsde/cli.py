"""Command-line front end.

Exit codes: 0 success, 1 verdict-level failure (audit failed, comparison
violated), 2 usage or config error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audit import run_audit
from .backward import solve_backward
from .comparison import (
    VIOLATED, run_comparison, run_converse_experiment, run_strict_comparison,
)
from .config import Experiment, load_config
from .errors import AssumptionError, ConfigError, ModelError, NumericalError
from .io import dump_paths, dump_solution, dumps, write_csv, write_json
from .model import validate_model
from .oracles import run_oracle_suite
from .paths import simulate_paths

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

REPORT_COLUMNS = ["experiment", "seed", "Y1", "SE1", "Y2", "SE2", "gap", "tau_mean", "verdict"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load(args) -> Experiment:
    return load_config(args.config, seed=args.seed, n_paths=args.paths)


def _with_workers(exp: Experiment, workers: int) -> Experiment:
    from dataclasses import replace

    exp.mc = replace(exp.mc, workers=max(1, workers))
    return exp


def cmd_simulate(args) -> int:
    exp = _with_workers(_load(args), args.workers)
    bundle = simulate_paths(exp.model, exp.measure, exp.grid, exp.mc.n_paths, exp.seed,
                            workers=exp.mc.workers)
    p1, p2 = dump_paths(bundle, Path(args.out), exp.raw)
    print(f"wrote {p1} and {p2}")
    return EXIT_OK


def _audit(exp: Experiment, gens) -> tuple[dict, bool]:
    validation = validate_model(exp.model, exp.generator, exp.terminal, exp.grid, exp.measure,
                                domain_radius=exp.domain_radius, seed=exp.audit.seed)
    out = {"validation": validation.to_dict(), "audits": {}}
    ok = validation.passed
    for label, gen in gens:
        rep = run_audit(gen, exp.measure, exp.grid, exp.audit)
        out["audits"][label] = rep.to_dict()
        ok = ok and rep.passed
    return out, ok


def _failed_summary(report: dict) -> list[str]:
    names = [f"validation:{c['name']}" for c in report["validation"]["checks"] if not c["passed"]]
    for label, rep in report["audits"].items():
        names += [f"{label}:{n}" for n in rep["failed"]]
    return names


def cmd_audit(args) -> int:
    exp = _load(args)
    gens = [("generator", exp.generator)]
    if exp.generator2 is not None:
        gens.append(("generator2", exp.generator2))
    report, ok = _audit(exp, gens)
    if args.out:
        write_json(Path(args.out) / "audit.json", {"audit": report, "passed": ok}, exp.seed, exp.raw)
    sys.stdout.write(dumps({"passed": ok, "failed": _failed_summary(report)}))
    if not ok:
        print("audit failed: " + ", ".join(_failed_summary(report)), file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_solve(args) -> int:
    exp = _with_workers(_load(args), args.workers)
    report, ok = _audit(exp, [("generator", exp.generator)])
    if not ok:
        print("solve refused, audit failed: " + ", ".join(_failed_summary(report)), file=sys.stderr)
        return EXIT_VERDICT
    bundle = simulate_paths(exp.model, exp.measure, exp.grid, exp.mc.n_paths, exp.seed,
                            workers=exp.mc.workers)
    xi = np.asarray(exp.terminal.h(bundle.states[:, -1]), float)
    sol = solve_backward(bundle, exp.generator, exp.measure, xi, exp.mc.basis,
                         terminal_fn=exp.terminal.h)
    out = Path(args.out)
    dump_solution(sol, out, exp.seed, exp.raw)
    summary = {"Y0": sol.y0, "SE": sol.se, "Z0": sol.z0.tolist(), "Gamma0": sol.gamma0,
               "n_paths": sol.n_paths, "n_steps": exp.grid.n_steps}
    write_json(out / "summary.json", {"summary": summary}, exp.seed, exp.raw)
    write_csv(out / "summary.csv", ["seed", "Y0", "SE", "Gamma0"] +
              [f"Z0_{q + 1}" for q in range(sol.Z.shape[2])],
              [[exp.seed, sol.y0, sol.se, sol.gamma0, *sol.z0]], exp.seed, exp.raw)
    print(f"Y0 = {sol.y0!r}  SE = {sol.se:.6g}")
    return EXIT_OK


def _write_report(report, out: Path, exp: Experiment) -> int:
    write_json(out / "report.json", {"report": report.to_dict()}, exp.seed, exp.raw)
    row = report.csv_row()
    write_csv(out / "report.csv", REPORT_COLUMNS, [[row[k] for k in REPORT_COLUMNS]], exp.seed, exp.raw)
    print(f"{report.experiment}: Y1 = {report.Y1!r} (SE {report.SE1:.4g}), "
          f"Y2 = {report.Y2!r} (SE {report.SE2:.4g}), gap = {report.generator_gap!r}, "
          f"verdict = {report.verdict}")
    return EXIT_VERDICT if report.verdict == VIOLATED else EXIT_OK


def _second_generator(exp: Experiment):
    if exp.generator2 is None:
        raise ConfigError("this command needs a [generator2] section")
    return exp.generator2


def cmd_compare(args) -> int:
    exp = _with_workers(_load(args), args.workers)
    gen2 = _second_generator(exp)
    if exp.strict is not None:
        report = run_strict_comparison(
            exp.generator, gen2, exp.terminal, exp.model, exp.measure, exp.grid, exp.mc,
            margin=exp.strict.get("margin"), audit_settings=exp.audit, config=exp.raw,
        )
    else:
        report = run_comparison(
            exp.generator, gen2, exp.terminal, exp.terminal2 or exp.terminal, exp.model,
            exp.measure, exp.grid, exp.mc, audit_settings=exp.audit, config=exp.raw,
        )
    return _write_report(report, Path(args.out), exp)


def cmd_converse(args) -> int:
    exp = _with_workers(_load(args), args.workers)
    gen2 = _second_generator(exp)
    c = exp.converse
    if c is None:
        raise ConfigError("this command needs a [converse] section")
    try:
        report = run_converse_experiment(
            exp.generator, gen2, exp.model, exp.measure, exp.terminal,
            float(c.get("anchor_t", exp.grid.t_start)), c.get("anchor_x", exp.model.x0.tolist()),
            float(c["eta"]), float(c["delta"]), exp.grid, exp.mc,
            max_extrapolated_fraction=float(c.get("max_extrapolated_fraction", 0.01)),
            audit_settings=exp.audit, config=exp.raw,
        )
    except KeyError as exc:
        raise ConfigError(f"missing key 'converse.{exc.args[0]}'") from None
    return _write_report(report, Path(args.out), exp)


def cmd_oracles(args) -> int:
    n = args.paths or 10_000
    seed = args.seed if args.seed is not None else 0
    cases = run_oracle_suite(n, seed, max(1, args.workers))
    for c in cases:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<24} estimate={c.estimate:.6f} "
              f"exact={c.exact:.6f} error={c.error:.2e} tol={c.tolerance:.2e} ({c.rule})")
    if args.out:
        cfg = {"n_paths": n, "seed": seed}
        write_json(Path(args.out) / "oracles.json", {"cases": [c.to_dict() for c in cases]}, seed, cfg)
    return EXIT_OK if all(c.passed for c in cases) else EXIT_VERDICT


COMMANDS = {
    "simulate": cmd_simulate,
    "solve": cmd_solve,
    "audit": cmd_audit,
    "compare": cmd_compare,
    "converse": cmd_converse,
    "oracles": cmd_oracles,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jumpbsde", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"jumpbsde {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "oracles", help="experiment TOML file")
        p.add_argument("--out", default=None if name in ("audit", "oracles") else "out",
                       help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override mc.seed (u64)")
        p.add_argument("--workers", type=int, default=1, help="threads for path sampling")
        p.add_argument("--paths", type=int, default=None, help="override mc.n_paths")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssumptionError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_VERDICT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
