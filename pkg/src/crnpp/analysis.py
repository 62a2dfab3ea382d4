"""Error evaluation against the oracle, module error sweeps and the subtraction comparison."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from crnpp import kernels
from crnpp.compiler import CompileConfig, compile_program, expand_module, schedule_steps
from crnpp.crn import Crn, mass_action_odes
from crnpp.frontend import Module, ValidatedProgram, load
from crnpp.oracle import expected_series, interpret
from crnpp.simulator import (
    IdealClock,
    Oscillator,
    SolverConfig,
    phase_windows,
    sample_at_phase_ends,
    simulate,
)


@dataclass(frozen=True)
class ErrorRow:
    species: str
    occurrence: int
    cycle: int
    phase: int
    time: float
    simulated: float
    expected: float
    error: float


@dataclass(frozen=True)
class ErrorSummary:
    max_error: float
    final_error: float
    growth_rate: float  # slope of per-cycle max error against cycle index


@dataclass(frozen=True)
class ErrorReport:
    rows: tuple[ErrorRow, ...]
    summary: Mapping[str, ErrorSummary]
    curve_times: np.ndarray = field(repr=False)
    curves: Mapping[str, np.ndarray] = field(repr=False)
    warnings: tuple[str, ...] = ()

    @property
    def max_error(self) -> float:
        return max((s.max_error for s in self.summary.values()), default=0.0)

    @property
    def final_error(self) -> float:
        return max((s.final_error for s in self.summary.values()), default=0.0)

    def for_species(self, species: str) -> list[ErrorRow]:
        return [r for r in self.rows if r.species == species]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["species", "occurrence", "cycle", "phase", "time", "simulated",
                        "expected", "error"])
            for r in self.rows:
                w.writerow([r.species, r.occurrence, r.cycle, r.phase, f"{r.time:.17g}",
                            f"{r.simulated:.17g}", f"{r.expected:.17g}", f"{r.error:.17g}"])

    def write_curve_csv(self, path, every: int = 1) -> None:
        names = list(self.curves)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", *names])
            idx = list(range(0, len(self.curve_times), max(1, every)))
            for i in idx:
                w.writerow([f"{self.curve_times[i]:.17g}",
                            *(f"{self.curves[s][i]:.17g}" for s in names)])


def _summarise(rows: Sequence[ErrorRow]) -> ErrorSummary:
    if not rows:
        return ErrorSummary(0.0, 0.0, 0.0)
    per_cycle: dict[int, float] = {}
    for r in rows:
        per_cycle[r.cycle] = max(per_cycle.get(r.cycle, 0.0), r.error)
    slope = 0.0
    if len(per_cycle) > 1:
        xs = np.array(sorted(per_cycle), dtype=float)
        ys = np.array([per_cycle[int(c)] for c in xs])
        slope = float(np.polyfit(xs, ys, 1)[0])
    return ErrorSummary(max(r.error for r in rows), rows[-1].error, slope)


def evaluate_error(vp: ValidatedProgram, bindings: Mapping[str, float] | None = None,
                   duration: float | None = None, tracked: Sequence[str] | None = None, *,
                   cycles: int | None = None, backend: IdealClock | Oscillator | None = None,
                   solver: SolverConfig | None = None,
                   compile_config: CompileConfig | None = None) -> ErrorReport:
    """Simulate, sample every phase end and compare against the exact interpreter.

    ``duration`` is in time units and takes precedence over ``cycles`` (default 6).
    """
    compile_config = compile_config or CompileConfig()
    backend = backend or IdealClock()
    solver = solver or SolverConfig()
    if duration is not None:
        solver = SolverConfig(**{**solver.__dict__, "duration": float(duration)})
    cp = compile_program(vp, bindings, compile_config)
    tracked = list(tracked) if tracked else list(cp.user_species())
    unknown = [s for s in tracked if s not in vp.program.species()]
    if unknown:
        raise ValueError(f"unknown tracked species: {', '.join(unknown)}")
    trace = simulate(cp, backend, solver, cycles=cycles)
    samples = sample_at_phase_ends(trace, cp.schedule)
    windows = phase_windows(trace, cp.schedule)
    n_phases = cp.schedule.total_phases
    n_cycles = max(len(samples), len(windows)) // n_phases + 1
    tl = interpret(vp, bindings, n_cycles, compile_config.epsilon)

    rows = []
    summary = {}
    curves = {}
    starts = np.array([w[1] for w in windows])
    occ = np.searchsorted(starts, trace.times, side="left") - 1
    for s in tracked:
        series = expected_series(tl, s)
        srows = []
        for sm in samples:
            sim = sm.values[s]
            exp = float(series(sm.occurrence))
            srows.append(ErrorRow(s, sm.occurrence, sm.cycle, sm.phase, sm.time, sim, exp,
                                  abs(sim - exp)))
        rows += srows
        summary[s] = _summarise(srows)
        expected_t = np.array([float(series(int(k))) for k in occ])
        curves[s] = np.abs(trace.column(s) - expected_t)
    warnings = tuple(note for _, note in tl.annotations())
    return ErrorReport(tuple(rows), summary, trace.times, curves, warnings)


# ------------------------------------------------------------------ sweeps


SWEEP_KINDS = ("add", "sub", "mul", "div")


def exact_result(kind: str, a: float, b: float) -> float:
    if kind == "add":
        return a + b
    if kind == "sub":
        return max(a - b, 0.0)
    if kind == "mul":
        return a * b
    if kind == "div":
        return a / b
    raise ValueError(f"unsupported module {kind!r}")


@dataclass(frozen=True)
class ErrorSurface:
    kind: str
    a_values: tuple[float, ...]
    b_values: tuple[float, ...]
    errors: np.ndarray  # errors[i, j] for a_values[i], b_values[j]
    phase_duration: float

    def error(self, a: float, b: float) -> float:
        return float(self.errors[self.a_values.index(a), self.b_values.index(b)])

    def argmax(self) -> tuple[float, float]:
        i, j = np.unravel_index(int(np.argmax(self.errors)), self.errors.shape)
        return self.a_values[i], self.b_values[j]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["a\\b", *(f"{b:.17g}" for b in self.b_values)])
            for a, row in zip(self.a_values, self.errors):
                w.writerow([f"{a:.17g}", *(f"{e:.17g}" for e in row)])


def grid(lo: float = 0.5, hi: float = 10.0, step: float = 0.5) -> tuple[float, ...]:
    if step <= 0 or hi < lo:
        raise ValueError("grid needs step > 0 and max >= min")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(round(lo + i * step, 12) for i in range(n))


def _module_cell(kind: str, a: float, b: float, phase_duration: float,
                 solver: SolverConfig) -> float:
    crn = Crn(tuple(expand_module(Module(kind, ("a", "b", "c")))), {"a": a, "b": b})
    ode = mass_action_odes(crn)
    init = crn.concentrations()
    y0 = np.array([init[s] for s in ode.species])
    impl = kernels.load(solver.kernel) if solver.kernel else kernels.impl
    res = impl.integrate(ode.packed, y0, 0.0, phase_duration, solver.rel_tol, solver.abs_tol,
                         solver.max_step or phase_duration / 50, 0.0, solver.max_steps,
                         solver.overflow)
    return abs(float(res.states[-1, ode.index["c"]]) - exact_result(kind, a, b))


def sweep_module_error(kind: str, a_values: Sequence[float] | None = None,
                       b_values: Sequence[float] | None = None, *,
                       phase_duration: float = 10.0, solver: SolverConfig | None = None,
                       workers: int | None = None) -> ErrorSurface:
    """Run a single module for one phase at every (a, b) and record the output error."""
    if kind not in SWEEP_KINDS:
        raise ValueError(f"sweep supports {', '.join(SWEEP_KINDS)}; got {kind!r}")
    a_values = tuple(a_values) if a_values is not None else grid()
    b_values = tuple(b_values) if b_values is not None else grid()
    solver = solver or SolverConfig()
    cells = [(a, b) for a in a_values for b in b_values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        errs = list(pool.map(lambda ab: _module_cell(kind, ab[0], ab[1], phase_duration, solver),
                             cells))
    errors = np.array(errs, dtype=float).reshape(len(a_values), len(b_values))
    return ErrorSurface(kind, a_values, b_values, errors, phase_duration)


# ------------------------------------------------------ subtraction strategies

_SUB_MODULE = "crn = { conc[a, a0], conc[b, b0], step[{ sub[a, b, c] }] };"

_SUB_ITERATED = """
crn = {
  conc[a, a0], conc[b, b0],
  conc[one, 1], conc[zero, 0],
  step[{ cmp[b, zero] }],
  step[{ ifGE[{ sub[a, one, anext], sub[b, one, bnext] }] }],
  step[{ ifGE[{ ld[anext, a], ld[bnext, b] }] }]
};
"""


@dataclass(frozen=True)
class SubtractionComparison:
    module: ErrorReport  # species c, one phase
    alternative: ErrorReport  # species a, one row per decrement

    @property
    def module_error(self) -> float:
        return self.module.summary["c"].final_error

    @property
    def alternative_error(self) -> float:
        return self.alternative.summary["a"].final_error


def _truncate(report: ErrorReport, keep) -> ErrorReport:
    rows = tuple(r for r in report.rows if keep(r))
    summary = {s: _summarise([r for r in rows if r.species == s]) for s in report.summary}
    return ErrorReport(rows, summary, report.curve_times, report.curves, report.warnings)


def compare_subtraction_strategies(a0: float, b0: int, *, phase_duration: float = 50.0,
                                   solver: SolverConfig | None = None) -> SubtractionComparison:
    """Subtract with the sub module versus decrementing both operands b0 times.

    The iterated program keeps decrementing after b reaches 0 (its guard is
    ifGE), so it is read out after exactly b0 iterations.
    """
    if not a0 >= b0 >= 0:
        raise ValueError("need a0 >= b0 >= 0")
    iterations = int(round(b0))
    backend = IdealClock(phase_duration)
    bindings = {"a0": a0, "b0": b0}
    module = evaluate_error(load(_SUB_MODULE), bindings, tracked=["c"], cycles=1,
                            backend=backend, solver=solver)
    module = _truncate(module, lambda r: r.occurrence == 0)
    alt_vp = load(_SUB_ITERATED)
    alt = evaluate_error(alt_vp, bindings, tracked=["a"], cycles=max(1, iterations),
                         backend=backend, solver=solver)
    last_phase = schedule_steps(alt_vp).total_phases - 1
    alt = _truncate(alt, lambda r: r.cycle < iterations and r.phase == last_phase)
    return SubtractionComparison(module, alt)
