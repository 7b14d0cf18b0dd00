"""``axihp`` command line: solve, study, coupled, skin-depth, list-benchmarks.

Exit codes: 0 success, 1 usage or problem error, 2 solver error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

from .adaptivity import Strategy, StrategyConfig, run_adaptive
from .constants import MU0
from .coupled import CouplingError, CouplingSchedule, run_coupled
from .fem.assembly import AssemblyError
from .fem.solver import SolverError
from .mesh import MeshError
from .problem import BENCHMARK_NAMES, ProblemError, builtin_benchmark, resolve_problem
from .quantities import QoI, QuantityError, conductor, default_qois, skin_depth, skin_depth_curve
from .study import StudySpec, run_study, svg_lines

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _strategy_flags(sp, max_steps: int):
    sp.add_argument("--problem", required=True, help="benchmark name or problem file path")
    sp.add_argument("--theta", type=float, default=0.6, help="Doerfler bulk parameter")
    sp.add_argument("--zeta", type=float, default=0.3, help="hp smoothness threshold")
    sp.add_argument("--max-dofs", type=int, default=200_000)
    sp.add_argument("--max-steps", type=int, default=max_steps)
    sp.add_argument("--out", type=Path, default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="axihp", description="Axisymmetric hp-FEM benchmarks and convergence studies.")
    sub = ap.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    sp = sub.add_parser("solve", help="adaptive solve of one problem; prints QoIs")
    _strategy_flags(sp, 30)
    sp.add_argument("--strategy", default="AdaptiveHP")
    sp.add_argument("--qoi", action="append", default=None, help="e.g. energy, energy@air, field_stress@P1, eddy_loss")
    sp.add_argument("--target", type=float, default=1e-4, help="relative error estimate to stop at")

    sp = sub.add_parser("study", help="convergence study comparing strategies")
    _strategy_flags(sp, 30)
    sp.add_argument("--strategy", action="append", default=None, help="repeatable; default all four")
    sp.add_argument("--no-default-strategies", action="store_true", help="use only the --strategy list (may be empty)")
    sp.add_argument("--qoi", action="append", default=None)

    sp = sub.add_parser("coupled", help="staggered induction heating run")
    _strategy_flags(sp, 25)
    sp.add_argument("--dt", type=float, default=0.1, help="time step (s)")
    sp.add_argument("--duration", type=float, default=60.0, help="heating time (s)")
    sp.add_argument("--temperature-dependence", choices=("on", "off"), default=None,
                    help="run only one case; by default both are run and overlaid")
    sp.add_argument("--threshold", type=float, default=0.02, help="relative sigma change that triggers an EM re-solve")

    sp = sub.add_parser("skin-depth", help="skin depth table vs temperature or permeability")
    sp.add_argument("--material", default=None, help="aluminium, copper, steel")
    sp.add_argument("--rho", type=float, default=None, help="explicit resistivity (Ohm m), no sweep")
    sp.add_argument("--mu-r", type=float, action="append", default=None, help="relative permeability (repeatable)")
    sp.add_argument("--frequency", type=float, default=2000.0, help="Hz")
    sp.add_argument("--t-start", type=float, default=None)
    sp.add_argument("--t-stop", type=float, default=None)
    sp.add_argument("--t-step", type=float, default=None)
    sp.add_argument("--out", type=Path, default=None, help="CSV file (default stdout)")

    sub.add_parser("list-benchmarks", help="print the built-in benchmark names")
    return ap


# --------------------------------------------------------------------------
# verbs


def _problem(ref: str):
    return resolve_problem(ref)


def cmd_solve(a) -> int:
    p = _problem(a.problem)
    qois = [QoI.parse(q) for q in a.qoi] if a.qoi else default_qois(p)
    cfg = StrategyConfig(a.strategy, theta=a.theta, zeta=a.zeta, max_dofs=a.max_dofs, max_steps=a.max_steps, target=a.target)
    run = run_adaptive(p, cfg, qois)
    if not run.records:
        print("no steps run")
        return EXIT_OK
    last = run.records[-1]
    print(f"{p.name}: {cfg.strategy.value}, {last.step + 1} steps, {last.dofs} DOFs, max p {last.max_p}, "
          f"relative error estimate {last.rel_error_est:.3e}")
    for name, val in last.qois.items():
        print(f"  {name} = {val:.10g}")
    if a.out is not None:
        from .export import write_vtk

        a.out.mkdir(parents=True, exist_ok=True)
        write_vtk(run.solution, a.out / "solution.vtk")
        (a.out / "mesh.txt").write_text(run.mesh.to_text())
    return EXIT_OK


def cmd_study(a) -> int:
    strategies = list(a.strategy or [])
    if not strategies and not a.no_default_strategies:
        strategies = [s.value for s in Strategy]
    if not strategies:
        raise UsageError("no strategies")
    strategies = [Strategy.parse(s).value for s in strategies]
    spec = StudySpec(
        _problem(a.problem), tuple(strategies), tuple(a.qoi or ()), a.out or Path("."),
        theta=a.theta, zeta=a.zeta, max_dofs=a.max_dofs, max_steps=a.max_steps,
    )

    def progress(name, recs):
        print(f"{name}: {len(recs)} steps, final DOFs {recs[-1].dofs if recs else 0}", file=sys.stderr)

    rep = run_study(spec, progress)
    for q in rep.qois:
        val, src = rep.references[q]
        print(f"reference {q} = {val:.10g} ({src})")
    print(f"wrote {spec.out / 'convergence.csv'}, report.txt, convergence.svg")
    return EXIT_OK


def history_csv(hist) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_s", "hotspot_C", "mean_C", "loss_W", "em_resolved"])
    for t, th, tm, P, res in hist.rows():
        w.writerow(["%.17g" % t, "%.17g" % th, "%.17g" % tm, "%.17g" % P, int(res)])
    return buf.getvalue()


def cmd_coupled(a) -> int:
    p = _problem(a.problem)
    cases = {"on": [True], "off": [False], None: [True, False]}[a.temperature_dependence]
    cfg = StrategyConfig("AdaptiveHP", theta=a.theta, zeta=a.zeta, max_dofs=a.max_dofs, max_steps=a.max_steps)
    out = a.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    scheds = [CouplingSchedule(total_time=a.duration, dt=a.dt, threshold=a.threshold, temperature_dependence=c) for c in cases]
    em_mesh = run_adaptive(p, cfg).mesh
    curves = []
    for sched, on in zip(scheds, cases):
        hist = run_coupled(p, sched, cfg, em_mesh=em_mesh)
        tag = "on" if on else "off"
        (out / f"history_{tag}.csv").write_text(history_csv(hist))
        curves.append((f"temperature dependence {tag}", hist.t, hist.hotspot))
        print(f"{tag}: T_hot({hist.t[-1]:g} s) = {hist.hotspot[-1]:.4f} C, loss {hist.loss[0]:.6g} -> {hist.loss[-1]:.6g} W, "
              f"EM solves {hist.em_solves}")
    (out / "hotspot.svg").write_text(svg_lines(curves, "time (s)", "hot-spot temperature (C)", f"{p.name}: hot-spot temperature"))
    if len(curves) == 2:
        on, off = curves[0][2][-1], curves[1][2][-1]
        print(f"on/off hot-spot difference at t end: {(on - off) / off * 100:+.3f} %")
    return EXIT_OK


def cmd_skin_depth(a) -> int:
    f = a.frequency
    if not f > 0:
        raise UsageError("frequency must be positive")
    if a.rho is not None:
        rows = [(mu_r, skin_depth(a.rho, 2 * math.pi * f, mu_r * MU0)) for mu_r in (a.mu_r or [1.0])]
    else:
        if a.material is None:
            raise UsageError("give --material or --rho")
        mat = conductor(a.material)
        T_range = None
        if any(v is not None for v in (a.t_start, a.t_stop, a.t_step)):
            if a.t_start is None:
                raise UsageError("--t-start is required for a temperature sweep")
            stop = a.t_stop if a.t_stop is not None else a.t_start
            step = a.t_step if a.t_step is not None else 1.0
            if not step > 0:
                raise UsageError("--t-step must be positive")
            n = int(math.floor((stop - a.t_start) / step + 1e-9)) + 1
            T_range = [a.t_start + k * step for k in range(max(n, 0))]
        elif a.mu_r is None:
            T_range = [mat.T_ref]
        rows = skin_depth_curve(mat, f, T_range=T_range, mu_r_list=a.mu_r)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sweep_var", "delta_m"])
    for v, d in rows:
        w.writerow(["%.17g" % v, "%.17g" % d])
    if a.out is None:
        sys.stdout.write(buf.getvalue())
    else:
        Path(a.out).write_text(buf.getvalue())
    return EXIT_OK


def cmd_list(a) -> int:
    for name in BENCHMARK_NAMES:
        p = builtin_benchmark(name)
        print(f"{name}\t{p.physics.value}\t{', '.join(q.name for q in default_qois(p))}")
    return EXIT_OK


VERBS = {"solve": cmd_solve, "study": cmd_study, "coupled": cmd_coupled, "skin-depth": cmd_skin_depth, "list-benchmarks": cmd_list}


def main(argv=None) -> int:
    try:
        a = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    try:
        return VERBS[a.verb](a)
    except SolverError as exc:
        print(f"axihp: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, ProblemError, QuantityError, CouplingError, MeshError, AssemblyError, ValueError, OSError) as exc:
        print(f"axihp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
