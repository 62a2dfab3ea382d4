"""Deterministic mass-action simulation of compiled programs.

Two clock backends are available. :class:`Oscillator` integrates the clock ring
together with the program, exactly as a chemist would mix it. :class:`IdealClock`
removes the clock species and gates each phase's reactions with an exogenous
square wave, which isolates module error from clock-overlap error.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from crnpp import kernels
from crnpp.compiler import ClockSchedule, CompiledProgram, synthesize_oscillator
from crnpp.crn import (
    CLOCK_PREFIX,
    Crn,
    Multiset,
    OdeSystem,
    Reaction,
    mass_action_odes,
    species_namespace,
)
from crnpp.errors import NumericalError, PhaseReconstructionError


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float | None = None  # default: phase duration / 50
    duration: float | None = None  # overrides cycle-based run length when set
    method: str = "dopri5"
    overflow: float = 1e12
    max_steps: int = 10_000_000
    kernel: str | None = None  # "cython" | "python"; None = import-time choice

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.duration is not None and not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.method != "dopri5":
            raise ValueError(f"unsupported method {self.method!r}")


@dataclass(frozen=True)
class IdealClock:
    phase_duration: float = 50.0

    name = "ideal"


@dataclass(frozen=True)
class Oscillator:
    # A phase occurrence is a maximal interval where its catalyst exceeds
    # dominance * clock_total.
    dominance: float = 0.5
    # Clock troughs fall far below clock_eps and their depth sets the timing
    # of the next pulse, so clock species get a much tighter absolute tolerance.
    clock_atol_factor: float = 1e-12

    name = "oscillator"


@dataclass(frozen=True)
class Trace:
    times: np.ndarray
    states: np.ndarray  # len(times) x len(species)
    species: tuple[str, ...]
    phase_annotations: tuple[tuple[int, float, float], ...] = ()
    backend: str = "ideal"
    clock_total: float = 2.0
    dominance: float = 0.5
    min_raw: float = 0.0  # most negative concentration before clamping
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.times)

    def column(self, species: str) -> np.ndarray:
        return self.states[:, self.species.index(species)]

    def final(self, species: str) -> float:
        return float(self.column(species)[-1])

    def value_at(self, species: str, t: float) -> float:
        return float(np.interp(t, self.times, self.column(species)))

    def state_at(self, t: float) -> np.ndarray:
        i = int(np.searchsorted(self.times, t))
        if i < len(self.times) and self.times[i] == t:
            return self.states[i].copy()
        i = min(max(i, 1), len(self.times) - 1)
        t0, t1 = self.times[i - 1], self.times[i]
        w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        return (1 - w) * self.states[i - 1] + w * self.states[i]

    def write_csv(self, path, every: int = 1, species: Sequence[str] | None = None) -> None:
        cols = list(species) if species else list(self.species)
        idx = [self.species.index(s) for s in cols]
        rows = list(range(0, len(self.times), max(1, every)))
        if rows and rows[-1] != len(self.times) - 1:
            rows.append(len(self.times) - 1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", *cols])
            for r in rows:
                w.writerow([f"{self.times[r]:.17g}", *(f"{self.states[r, i]:.17g}" for i in idx)])


@dataclass(frozen=True)
class PhaseSample:
    occurrence: int
    cycle: int
    phase: int
    t_start: float
    time: float  # end of the phase occurrence; the snapshot time
    values: dict[str, float]


# -------------------------------------------------------------------- helpers


def _clock_index(name: str) -> int:
    return int(name[len(CLOCK_PREFIX):])


def _strip_clocks(reactions: Sequence[Reaction], schedule: ClockSchedule):
    """Drop oscillator reactions, remove clock catalysts and report each reaction's phase."""
    stripped, phases = [], []
    for r in reactions:
        clocks = [s for s in r.reactants if species_namespace(s) == "clock"]
        if r.provenance is not None and r.provenance.role == "oscillator":
            continue
        if len(clocks) > 1:
            raise NumericalError(f"reaction {r} carries several clock catalysts")
        phase = None
        if clocks:
            idx = _clock_index(clocks[0])
            phase = idx // 3 - 1
            keep_r = {s: m for s, m in r.reactants.items() if s != clocks[0]}
            keep_p = {s: m for s, m in r.products.items() if s != clocks[0]}
            r = Reaction(Multiset(keep_r), Multiset(keep_p), r.rate, r.provenance)
        stripped.append(r)
        phases.append(phase)
    return stripped, phases


def _run(ode: OdeSystem, y0, t0, t1, cfg: SolverConfig, max_step: float, atol, rates=None):
    impl = kernels.load(cfg.kernel) if cfg.kernel else kernels.impl
    net = ode.packed if rates is None else ode.packed._replace(rates=rates)
    res = impl.integrate(net, np.asarray(y0, dtype=np.float64), float(t0), float(t1),
                         cfg.rel_tol, atol, float(max_step), 0.0, cfg.max_steps, cfg.overflow)
    if res.status == kernels.OVERFLOW:
        y = res.states[-1]
        flux = ode.fluxes(y, rates)
        worst = int(np.argmax(np.abs(flux)))
        rx = ode.reactions[worst]
        where = rx.provenance.describe() if rx.provenance else "unattributed reaction"
        big = ode.species[int(np.argmax(y))]
        raise NumericalError(
            f"concentration of {big!r} exceeded {cfg.overflow:g} at t={res.times[-1]:.6g}; "
            f"dominant flux from {rx} [{where}]")
    if res.status == kernels.STEP_UNDERFLOW:
        raise NumericalError(f"step size underflow at t={res.times[-1]:.6g} (stiff dynamics?)")
    if res.status == kernels.TOO_MANY_STEPS:
        raise NumericalError(f"step budget of {cfg.max_steps} exhausted at t={res.times[-1]:.6g}")
    return res


# --------------------------------------------------------------- oscillator


@dataclass(frozen=True)
class OscillatorTiming:
    cycle_ends: tuple[float, ...]  # when the last phase's catalyst drops below dominance

    @property
    def period(self) -> float:
        """Mean cycle length; the ring is conservative, so single periods vary."""
        ends = self.cycle_ends
        return (ends[-1] - ends[0]) / (len(ends) - 1) if len(ends) > 1 else ends[0]


@lru_cache(maxsize=64)
def oscillator_timing(n_species: int, clock_eps: float, clock_total: float,
                      dominance: float = 0.5, cycles: int = 6,
                      kernel: str | None = None) -> OscillatorTiming:
    """Integrate the clock ring alone; program species never feed back into it."""
    reactions, initial = synthesize_oscillator(n_species, clock_eps, clock_total)
    crn = Crn(tuple(reactions), initial)
    ode = mass_action_odes(crn)
    y0 = np.array([crn.concentrations()[s] for s in ode.species])
    atol = clock_eps * Oscillator.clock_atol_factor
    cfg = SolverConfig(rel_tol=1e-10, abs_tol=atol, kernel=kernel)
    thr = dominance * clock_total
    # one pulse traversal takes roughly n * ln(total/eps) / total time units
    horizon = (cycles + 1) * n_species * math.log(clock_total / clock_eps) / clock_total
    while True:
        res = _run(ode, y0, 0.0, horizon, cfg, horizon / (200 * n_species * (cycles + 1)), atol)
        xn = res.states[:, ode.index[CLOCK_PREFIX + str(n_species)]]
        downs = np.nonzero((xn[:-1] > thr) & (xn[1:] <= thr))[0]
        if len(downs) >= cycles:
            ends = tuple(_crossing(res.times, xn, i, thr) for i in downs[:cycles])
            return OscillatorTiming(ends)
        horizon *= 2


def oscillator_period(n_species: int, clock_eps: float = 1e-10, clock_total: float = 2.0) -> float:
    return oscillator_timing(n_species, clock_eps, clock_total, cycles=8).period


# ------------------------------------------------------------------ simulate


def simulate(cp: CompiledProgram, backend: IdealClock | Oscillator | None = None,
             cfg: SolverConfig | None = None, cycles: int | None = None,
             phases: int | None = None) -> Trace:
    """Integrate a compiled program.

    Run length is, in order of precedence: ``phases`` phase occurrences (ideal
    clock only), ``cfg.duration`` time units, or ``cycles`` full passes over the
    schedule (default 6).
    """
    backend = backend or IdealClock()
    cfg = cfg or SolverConfig()
    if isinstance(backend, IdealClock):
        return _simulate_ideal(cp, backend, cfg, cycles, phases)
    return _simulate_oscillator(cp, backend, cfg, cycles)


def _simulate_ideal(cp, backend: IdealClock, cfg: SolverConfig, cycles, phases) -> Trace:
    schedule = cp.schedule
    T = backend.phase_duration
    if phases is None:
        if cfg.duration is not None:
            phases = max(1, int(math.floor(cfg.duration / T + 1e-9)))
        else:
            phases = (6 if cycles is None else cycles) * schedule.total_phases
    reactions, gate_phase = _strip_clocks(cp.crn.reactions, schedule)
    species = tuple(s for s in cp.crn.species if species_namespace(s) != "clock")
    ode = OdeSystem(species, reactions)
    init = cp.crn.concentrations()
    y = np.array([init[s] for s in species], dtype=np.float64)
    base = ode.rates.copy()
    masks = []
    for p in range(schedule.total_phases):
        masks.append(np.array([1.0 if g is None or g == p else 0.0 for g in gate_phase]))
    max_step = cfg.max_step or T / 50
    times, states, notes = [np.array([0.0])], [y[None, :]], []
    min_raw = 0.0
    t = 0.0
    for k in range(phases):
        p = k % schedule.total_phases
        res = _run(ode, y, t, t + T, cfg, max_step, cfg.abs_tol, base * masks[p])
        times.append(res.times[1:])
        states.append(res.states[1:])
        min_raw = min(min_raw, res.min_raw)
        y = res.states[-1].copy()
        notes.append((p, t, float(res.times[-1])))
        t = float(res.times[-1])
    return Trace(np.concatenate(times), np.concatenate(states), species, tuple(notes),
                 "ideal", cp.config.clock_total, min_raw=min_raw,
                 meta={"phase_duration": T, "phases": phases})


def _simulate_oscillator(cp, backend: Oscillator, cfg: SolverConfig, cycles) -> Trace:
    n_clock = cp.schedule.n_clock_species
    n = 6 if cycles is None else cycles
    timing = oscillator_timing(n_clock, cp.config.clock_eps, cp.config.clock_total,
                               backend.dominance, max(n, 2), cfg.kernel)
    period = timing.period
    if cfg.duration is not None:
        duration = cfg.duration
    else:
        # stop shortly after the last phase of the final cycle closes
        duration = timing.cycle_ends[n - 1] + 0.1 * period / cp.schedule.total_phases
    ode = mass_action_odes(cp.crn)
    init = cp.crn.concentrations()
    y0 = np.array([init[s] for s in ode.species], dtype=np.float64)
    atol = np.array([
        cp.config.clock_eps * backend.clock_atol_factor if species_namespace(s) == "clock"
        else cfg.abs_tol
        for s in ode.species
    ])
    max_step = cfg.max_step or period / cp.schedule.total_phases / 50
    res = _run(ode, y0, 0.0, duration, cfg, max_step, atol)
    return Trace(res.times, res.states, ode.species, (), "oscillator", cp.config.clock_total,
                 backend.dominance, res.min_raw, meta={"period": period, "duration": duration})


# ------------------------------------------------------------ phase sampling


def _crossing(times, values, i, thr):
    v0, v1 = values[i], values[i + 1]
    if v1 == v0:
        return float(times[i + 1])
    return float(times[i] + (thr - v0) / (v1 - v0) * (times[i + 1] - times[i]))


def phase_windows(trace: Trace, schedule: ClockSchedule) -> list[tuple[int, float, float]]:
    """Phase occurrences as (phase, t_start, t_end), chronological."""
    if trace.phase_annotations:
        return list(trace.phase_annotations)
    if len(trace.times) == 0:
        return []
    thr = trace.dominance * trace.clock_total
    windows = []
    for p in range(schedule.total_phases):
        name = schedule.catalyst_of_phase(p)
        if name not in trace.species:
            raise PhaseReconstructionError(f"clock species {name} missing from trace")
        x = trace.column(name)
        above = x > thr
        ups = list(np.nonzero(~above[:-1] & above[1:])[0])
        downs = list(np.nonzero(above[:-1] & ~above[1:])[0])
        for u in ups:
            later = [d for d in downs if d >= u]
            if not later:
                break  # window still open at the end of the run
            d = later[0]
            windows.append((p, _crossing(trace.times, x, u, thr),
                            _crossing(trace.times, x, d, thr)))
    windows.sort(key=lambda w: w[1])
    for k, (p, _, _) in enumerate(windows):
        if p != k % schedule.total_phases:
            raise PhaseReconstructionError(
                f"clock phases out of order: occurrence {k} is phase {p}")
    if not windows and len(trace.times) > 1:
        raise PhaseReconstructionError("no clock dominance interval found")
    return windows


def sample_at_phase_ends(trace: Trace, schedule: ClockSchedule) -> list[PhaseSample]:
    """One snapshot at the end of every completed phase occurrence."""
    if len(trace.times) == 0:
        return []
    samples = []
    for k, (p, t0, t1) in enumerate(phase_windows(trace, schedule)):
        state = trace.state_at(t1)
        values = {s: float(state[i]) for i, s in enumerate(trace.species)}
        samples.append(PhaseSample(k, k // schedule.total_phases, p, t0, t1, values))
    return samples
