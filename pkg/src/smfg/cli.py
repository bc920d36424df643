"""Command-line entry point.

    smfg solve CONFIG.json [--output DIR]
    smfg study refinement CONFIG.json --sizes 25,50,100,200
    smfg check adjoint|monotonicity|contraction [--seed S] [--sizes 4,16,64]

Exit codes: 0 success, 1 configuration error, 2 numerical failure (including
a failed check), 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import diagnostics
from .config import ConfigError, RunSpec, load_config
from .exact import error_report, sum_form_2d
from .expr import ExprDomainError, ExprSyntaxError
from .flows import Trajectory, solve_gradient_flow, solve_monotonic_flow
from .hamiltonian import Variant, make_grid_data
from .integrators import FlowConfig, IntegrationError
from .operators import MfgState, residual

logger = logging.getLogger("smfg")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class NumericalFailure(RuntimeError):
    pass


def fmt(value) -> str:
    return f"{float(value):.17g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


# -- solve --------------------------------------------------------------------

def solve(spec: RunSpec) -> tuple[MfgState, Trajectory]:
    data = spec.problem()
    m0, u0 = spec.initial_state()
    try:
        if spec.flow == "gradient":
            return solve_gradient_flow(data, u0, spec.flow_config)
        return solve_monotonic_flow(data, m0, u0, spec.flow_config)
    except (IntegrationError, ExprDomainError) as exc:
        raise NumericalFailure(str(exc)) from exc


def run(spec: RunSpec, output: Path) -> dict:
    """Solve ``spec`` and write the four output files into ``output``."""
    start = time.perf_counter()
    state, traj = solve(spec)
    wall = time.perf_counter() - start
    output.mkdir(parents=True, exist_ok=True)
    data = spec.problem()
    grid = data.grid

    oracle = spec.oracle() if spec.compare_exact is not False else None
    _write_csv(output / "trajectory.csv", ["t", "phi", "residual_linf", "mass", "mean_u", "hbar"], traj.rows())
    _write_final_state(output / "final_state.csv", spec, state, oracle)
    _write_snapshots(output / "snapshots.dat", grid, traj)

    res = residual(state, data)
    report = {
        "spec": spec.to_dict(),
        "reason": traj.reason,
        "final_time": float(traj.times[-1]),
        "hbar": state.hbar,
        "residual": {**dataclasses.asdict(res), "max": res.max_norm},
        "residual_blended_max": residual(state, data, tie_width=spec.flow_config.tie_width).max_norm,
        "mass": grid.integrate(state.m),
        "sum_u": float(np.sum(state.u)),
        "wall_time_s": wall,
        "integrator": dataclasses.asdict(traj.stats),
    }
    if oracle is not None:
        report["errors"] = dataclasses.asdict(error_report(state, oracle))
        report["exact_hbar"] = oracle.hbar
        if spec.dimension == 2:
            V1 = spec.separable_potential()
            report["density_form_check"] = {
                "product_m_linf": float(np.max(np.abs(state.m - oracle.m))),
                "sum_m_linf": float(np.max(np.abs(state.m - sum_form_2d(V1, grid)))),
            }
    (output / "report.json").write_text(json.dumps(diagnostics._jsonable(report), indent=2) + "\n")
    return report


def _write_final_state(path: Path, spec: RunSpec, state: MfgState, oracle) -> None:
    grid = state.grid
    if spec.dimension == 1:
        flat = np.ravel
        coords, header = [grid.nodes], ["x"]
    else:
        # 2-D rows are lexicographic with i (the x index) fastest
        flat = grid.flatten
        coords, header = [flat(c) for c in grid.nodes], ["x", "y"]
    cols = coords + [flat(state.u), flat(state.m)]
    header += ["u", "m"]
    if oracle is not None:
        cols += [flat(oracle.u), flat(oracle.m), flat(np.abs(state.u - oracle.u)), flat(np.abs(state.m - oracle.m))]
        header += ["u_exact", "m_exact", "u_error", "m_error"]
    _write_csv(path, header, zip(*cols))


def _write_snapshots(path: Path, grid, traj: Trajectory) -> None:
    """gnuplot data: one indexed block (x, m) or (x, y, m) per record time."""
    with path.open("w") as fh:
        for k, (t, m) in enumerate(zip(traj.times, traj.densities)):
            if k:
                fh.write("\n\n")
            fh.write(f"# index {k} t = {fmt(t)}\n")
            if grid.ndim == 1:
                for x, v in zip(grid.nodes, m):
                    fh.write(f"{fmt(x)} {fmt(v)}\n")
            else:
                X, Y = grid.nodes
                for i in range(grid.n):
                    if i:
                        fh.write("\n")
                    for j in range(grid.n):
                        fh.write(f"{fmt(X[i, j])} {fmt(Y[i, j])} {fmt(m[i, j])}\n")


# -- study and checks -----------------------------------------------------------

def study_refinement(spec: RunSpec, sizes: list[int], output: Path | None) -> diagnostics.StudyResult:
    if spec.dimension != 1:
        raise ConfigError("refinement studies are 1-D only", "/dimension")
    if spec.oracle() is None:
        raise ConfigError("refinement studies need a problem with an exact solution", "/b")
    family = diagnostics.ProblemFamily(
        V=spec.function(spec.potential),
        b=None if spec.drift is None else spec.function(spec.drift),
        variant=spec.variant,
        flow=spec.flow,
        u0=spec.function(spec.u0),
        m0=None if spec.m0 is None else spec.function(spec.m0),
        exact=lambda grid: dataclasses.replace(spec, n=grid.n).oracle(),
    )
    try:
        result = diagnostics.run_refinement_study(family, sizes, spec.flow_config)
    except IntegrationError as exc:
        raise NumericalFailure(str(exc)) from exc
    if output is not None:
        output.mkdir(parents=True, exist_ok=True)
        (output / "study.json").write_text(json.dumps(result.to_dict(), indent=2) + "\n")
        rows = [
            (n, e.u_linf, e.m_linf, e.hbar_err, q, h, r)
            for n, e, q, h, r in zip(result.sizes, result.errors, result.mean_u_sq, result.hbar, result.residuals)
        ]
        _write_csv(output / "study.csv", ["n", "u_linf", "m_linf", "hbar_err", "mean_u_sq", "abs_hbar", "residual"], rows)
    return result


def contraction_check(n: int = 100, t_max: float = 10.0) -> diagnostics.SuiteReport:
    """Paper-style initial data against the uniform state on V = sin(2 pi x)."""
    data = make_grid_data(n, lambda x: np.sin(2 * np.pi * x))
    x = data.grid.nodes
    paper = (1 + 0.2 * np.cos(2 * np.pi * x), 0.2 * np.cos(2 * np.pi * x))
    uniform = (np.ones(n), np.zeros(n))
    cfg = FlowConfig(t_max=t_max, rtol=1e-6, atol=1e-8, record_every=t_max / 50)
    return diagnostics.run_contraction_test(data, paper, uniform, cfg)


def run_check(name: str, seed: int, sizes: list[int] | None, variant: str) -> diagnostics.SuiteReport:
    if name == "adjoint":
        return diagnostics.run_adjoint_suite(seed, sizes or (4, 16, 64))
    if name == "monotonicity":
        return diagnostics.run_monotonicity_suite(seed, sizes or (4, 8, 16), Variant(variant))
    if name == "gradient":
        return diagnostics.run_gradient_check(seed, (sizes or [16])[0])
    return contraction_check((sizes or [100])[0])


# -- argument handling --------------------------------------------------------

def _sizes(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 3 for v in values):
        raise argparse.ArgumentTypeError("sizes must be integers >= 3")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", type=Path, help="directory for output files")
    common.add_argument("--quiet", action="store_true", help="only print errors")

    parser = argparse.ArgumentParser(prog="smfg", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", parents=[common], help="run one configuration")
    p_solve.add_argument("config", type=Path)

    p_study = sub.add_parser("study", parents=[common], help="grid-refinement study")
    p_study.add_argument("kind", choices=["refinement"])
    p_study.add_argument("config", type=Path)
    p_study.add_argument("--sizes", type=_sizes, default=[25, 50, 100, 200])

    p_check = sub.add_parser("check", parents=[common], help="property suites")
    p_check.add_argument("suite", choices=["adjoint", "monotonicity", "contraction", "gradient"])
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--sizes", type=_sizes, default=None)
    p_check.add_argument("--variant", choices=[v.value for v in Variant], default="standard")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    say = (lambda *a: None) if args.quiet else print
    try:
        if args.command == "solve":
            spec = load_config(args.config)
            output = args.output or Path(spec.output or "output")
            report = run(spec, output)
            say(f"{spec.name or args.config.stem}: {report['reason']} at t={report['final_time']:.6g}, "
                f"residual {report['residual']['max']:.3e}, Hbar {report['hbar']:.10g}")
            if "errors" in report:
                e = report["errors"]
                say(f"  errors: u_linf {e['u_linf']:.3e}  m_linf {e['m_linf']:.3e}  hbar {e['hbar_err']:.3e}")
            say(f"  wrote {output}/")
            return EXIT_OK
        if args.command == "study":
            spec = load_config(args.config)
            result = study_refinement(spec, args.sizes, args.output)
            for n, e in zip(result.sizes, result.errors):
                say(f"n={n:5d}  u_linf {e.u_linf:.3e}  m_linf {e.m_linf:.3e}  hbar_err {e.hbar_err:.3e}")
            say(f"refinement: {'PASS' if result.passed else 'FAIL'} {'; '.join(result.notes)}")
            return EXIT_OK if result.passed else EXIT_NUMERICAL
        report = run_check(args.suite, args.seed, args.sizes, args.variant)
        if args.output is not None:
            args.output.mkdir(parents=True, exist_ok=True)
            (args.output / f"{args.suite}.json").write_text(report.to_json(indent=2) + "\n")
        say(report.summary())
        return EXIT_NUMERICAL if report.passed is False else EXIT_OK
    except (ConfigError, ExprSyntaxError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, IntegrationError, ExprDomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
