"""crnpp command line: compile, simulate, interpret, check-error, sweep, corpus."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from crnpp import __version__
from crnpp.compiler import CompileConfig, compile_program
from crnpp.errors import CrnppError, DiagnosticError
from crnpp.frontend import load
from crnpp.programs import (
    PUBLISHED_SIZES,
    list_programs,
    read_directives,
    resolve,
    size_breakdown,
    size_report,
)
from crnpp.simulator import IdealClock, Oscillator, SolverConfig

EXIT_OK, EXIT_USER, EXIT_NUMERIC = 0, 1, 2


def _param(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None


def _names(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


class Loaded:
    """A resolved program with its bindings (header defaults overridden by -p)."""

    def __init__(self, args):
        self.path = resolve(args.program)
        self.source = self.path.read_text(encoding="utf-8")
        self.name = self.path.stem
        self.directives = read_directives(self.source)
        self.bindings = {**self.directives.params, **dict(args.param or [])}
        try:
            self.vp = load(self.source)
        except DiagnosticError as e:
            e.filename = str(self.path)
            raise
        for w in self.vp.warnings:
            print(w.format(str(self.path)), file=sys.stderr)
        self.cfg = CompileConfig(epsilon=args.epsilon)

    def compile(self):
        return compile_program(self.vp, self.bindings, self.cfg)


def _outdir(args) -> Path:
    out = Path(args.output).resolve()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solver(args) -> SolverConfig:
    return SolverConfig(rel_tol=args.rtol, abs_tol=args.atol, max_step=args.max_step,
                        duration=args.duration, kernel=args.kernel)


def _backend(args):
    if args.clock == "oscillator":
        return Oscillator()
    return IdealClock(args.phase_duration)


def _manifest(out: Path, stem: str, command: str, loaded: Loaded | None, **extra) -> None:
    data = {
        "command": command,
        "version": __version__,
        "output_dir": str(out),
    }
    if loaded is not None:
        data["program"] = str(loaded.path.resolve())
        data["bindings"] = dict(sorted(loaded.bindings.items()))
        data["epsilon"] = loaded.cfg.epsilon
    data.update(extra)
    (out / f"{stem}.{command}.manifest.json").write_text(
        json.dumps(data, indent=2, sort_keys=True) + "\n")


def _backend_dict(b) -> dict:
    return {"clock": b.name, **asdict(b)}


# ------------------------------------------------------------------- commands


def cmd_compile(args) -> int:
    prog = Loaded(args)
    cp = prog.compile()
    if args.stats:
        b = size_breakdown(cp)
        print(f"{prog.name}: {b.species} species, {b.reactions} reactions "
              f"({b.user} program, {b.clock} clock, {b.flag} flag, {b.temp} helper species; "
              f"{cp.schedule.total_phases} phases)")
        ref = PUBLISHED_SIZES.get(prog.name)
        if ref:
            print(f"{'':{len(prog.name)}}  published: {ref[0]} species, {ref[1]} reactions")
    if args.output:
        out = _outdir(args)
        (out / f"{prog.name}.crn.json").write_text(cp.to_json() + "\n")
        _manifest(out, prog.name, "compile", prog)
    elif not args.stats:
        print(cp.to_json())
    return EXIT_OK


def cmd_simulate(args) -> int:
    from crnpp.plotting import plot_trace
    from crnpp.simulator import simulate

    prog = Loaded(args)
    cp = prog.compile()
    backend, solver = _backend(args), _solver(args)
    trace = simulate(cp, backend, solver, cycles=args.cycles)
    out = _outdir(args)
    trace.write_csv(out / f"{prog.name}.trace.csv", every=args.every)
    if args.plot:
        names = _names(args.plot)
        missing = [s for s in names if s not in trace.species]
        if missing:
            raise CrnppError(f"cannot plot unknown species: {', '.join(missing)}")
        plot_trace(trace, names, out / f"{prog.name}.trace.svg", title=prog.name)
    _manifest(out, prog.name, "simulate", prog, backend=_backend_dict(backend),
              solver=asdict(solver), cycles=args.cycles)
    shown = _names(args.plot) if args.plot else (list(prog.directives.track) or [])
    for s in shown:
        print(f"{s} = {trace.final(s):.6g} at t = {trace.times[-1]:.6g}")
    return EXIT_OK


def cmd_interpret(args) -> int:
    from crnpp.oracle import interpret

    prog = Loaded(args)
    tl = interpret(prog.vp, prog.bindings, args.cycles, args.epsilon, strict=args.strict)
    out = _outdir(args)
    tl.write_csv(out / f"{prog.name}.timeline.csv")
    _manifest(out, prog.name, "interpret", prog, cycles=args.cycles, strict=args.strict)
    for _, note in tl.annotations():
        print(f"warning: {note}", file=sys.stderr)
    for s in prog.directives.track:
        print(f"{s} = {float(tl.final(s)):.10g}")
    return EXIT_OK


def cmd_check_error(args) -> int:
    from crnpp.analysis import evaluate_error
    from crnpp.plotting import plot_error

    prog = Loaded(args)
    tracked = _names(args.track) if args.track else list(prog.directives.track)
    backend, solver = _backend(args), _solver(args)
    report = evaluate_error(prog.vp, prog.bindings, tracked=tracked or None, cycles=args.cycles,
                            backend=backend, solver=solver, compile_config=prog.cfg)
    out = _outdir(args)
    report.write_csv(out / f"{prog.name}.error.csv")
    report.write_curve_csv(out / f"{prog.name}.error_curve.csv", every=args.every)
    plot_error(report, out / f"{prog.name}.error.svg", title=prog.name)
    _manifest(out, prog.name, "check-error", prog, backend=_backend_dict(backend),
              solver=asdict(solver), cycles=args.cycles, tracked=list(report.summary),
              max_error=args.max_error)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for s, summ in report.summary.items():
        print(f"{s}: max error {summ.max_error:.3g}, final error {summ.final_error:.3g}, "
              f"growth {summ.growth_rate:.3g}/cycle")
    if args.max_error is not None and report.max_error > args.max_error:
        print(f"error {report.max_error:.3g} exceeds threshold {args.max_error:g}",
              file=sys.stderr)
        return EXIT_USER
    return EXIT_OK


def cmd_sweep(args) -> int:
    from crnpp.analysis import grid, sweep_module_error
    from crnpp.plotting import plot_surface

    values = grid(args.min, args.max, args.step)
    solver = SolverConfig(rel_tol=args.rtol, abs_tol=args.atol, kernel=args.kernel)
    surface = sweep_module_error(args.kind, values, values, phase_duration=args.phase_duration,
                                 solver=solver, workers=args.workers)
    out = _outdir(args)
    surface.write_csv(out / f"{args.kind}.surface.csv")
    plot_surface(surface, out / f"{args.kind}.surface.svg")
    _manifest(out, args.kind, "sweep", None, kind=args.kind, min=args.min, max=args.max,
              step=args.step, phase_duration=args.phase_duration, solver=asdict(solver))
    a, b = surface.argmax()
    print(f"{args.kind}: {len(values)}x{len(values)} grid, max error "
          f"{surface.errors.max():.3g} at a={a:g}, b={b:g}")
    return EXIT_OK


def cmd_corpus(args) -> int:
    names = list_programs()
    if args.sizes:
        compiled = {}
        for n in names:
            path = resolve(n)
            source = path.read_text(encoding="utf-8")
            compiled[n] = compile_program(load(source), read_directives(source).params)
        text = size_report(compiled)
        if args.output:
            out = _outdir(args)
            (out / "sizes.txt").write_text(text)
        print(text, end="")
        return EXIT_OK
    for n in names:
        print(n if not args.paths else resolve(n))
    return EXIT_OK


# --------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crnpp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def program_args(sp):
        sp.add_argument("program", help="path to a .crnpp file, or the name of a corpus program")
        sp.add_argument("-p", "--param", type=_param, action="append", metavar="NAME=VALUE",
                        help="bind a parameter (repeatable)")
        sp.add_argument("--epsilon", type=float, default=0.5, help="cmp equality band")

    def sim_args(sp, output_default):
        sp.add_argument("-o", "--output", default=output_default, help="output directory")
        sp.add_argument("--clock", choices=("ideal", "oscillator"), default="oscillator")
        sp.add_argument("--cycles", type=int, default=6)
        sp.add_argument("--phase-duration", type=float, default=50.0,
                        help="ideal clock phase length in time units")
        sp.add_argument("--duration", type=float, help="run length in time units")
        sp.add_argument("--rtol", type=float, default=1e-8)
        sp.add_argument("--atol", type=float, default=1e-10)
        sp.add_argument("--max-step", type=float)
        sp.add_argument("--kernel", choices=("cython", "python"))
        sp.add_argument("--every", type=int, default=1, help="keep every Nth trace row")

    c = sub.add_parser("compile", help="lower a program to a reaction network")
    program_args(c)
    c.add_argument("-o", "--output", help="write <name>.crn.json here")
    c.add_argument("--stats", action="store_true", help="print species and reaction counts")
    c.set_defaults(func=cmd_compile)

    s = sub.add_parser("simulate", help="integrate the compiled network")
    program_args(s)
    sim_args(s, "out")
    s.add_argument("--plot", help="comma-separated species to plot as SVG")
    s.set_defaults(func=cmd_simulate)

    i = sub.add_parser("interpret", help="run the exact reference interpreter")
    program_args(i)
    i.add_argument("-o", "--output", default="out")
    i.add_argument("--cycles", type=int, default=6)
    i.add_argument("--strict", action="store_true", help="fail on tied comparisons")
    i.set_defaults(func=cmd_interpret)

    e = sub.add_parser("check-error", help="compare simulation against the interpreter")
    program_args(e)
    sim_args(e, "out")
    e.add_argument("--track", help="comma-separated species (default: header @track)")
    e.add_argument("--max-error", type=float, help="exit 1 if exceeded")
    e.set_defaults(func=cmd_check_error)

    w = sub.add_parser("sweep", help="module error surface over an operand grid")
    w.add_argument("kind", choices=("add", "sub", "mul", "div"))
    w.add_argument("--min", type=float, default=0.5)
    w.add_argument("--max", type=float, default=10.0)
    w.add_argument("--step", type=float, default=0.5)
    w.add_argument("--phase-duration", type=float, default=10.0)
    w.add_argument("--rtol", type=float, default=1e-8)
    w.add_argument("--atol", type=float, default=1e-10)
    w.add_argument("--kernel", choices=("cython", "python"))
    w.add_argument("--workers", type=int)
    w.add_argument("-o", "--output", default="out")
    w.set_defaults(func=cmd_sweep)

    k = sub.add_parser("corpus", help="list bundled example programs")
    k.add_argument("--paths", action="store_true")
    k.add_argument("--sizes", action="store_true", help="compare sizes with published counts")
    k.add_argument("-o", "--output")
    k.set_defaults(func=cmd_corpus)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DiagnosticError as e:
        for d in e.diagnostics:
            print(d.format(e.filename), file=sys.stderr)
        return e.exit_code
    except CrnppError as e:
        print(f"crnpp: error: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError) as e:
        print(f"crnpp: error: {e}", file=sys.stderr)
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
