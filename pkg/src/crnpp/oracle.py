"""Exact reference interpreter for CRN++ programs.

Values are exact rationals; square roots of non-squares are rounded to 60
significant digits, well below anything the simulator can resolve. Commands of
a step run in dataflow order, so a command reading a species written earlier in
the same step sees the new value, which is where the chemistry settles as well.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from decimal import Context
from fractions import Fraction
from typing import Mapping, Sequence

from crnpp.compiler import bind_initials, schedule_steps
from crnpp.crn import species_sort_key
from crnpp.errors import OracleError, OracleTieError
from crnpp.frontend import ExplicitRxn, ValidatedProgram

GT, EQ, LT, TIE = "GT", "EQ", "LT", "TIE-UNDEFINED"

_ACCEPTS = {
    "ifGT": {GT},
    "ifEQ": {EQ},
    "ifLT": {LT},
    "ifGE": {GT, EQ},
    "ifLE": {LT, EQ},
}

_SQRT_CTX = Context(prec=60)


def exact_sqrt(value: Fraction) -> Fraction:
    if value < 0:
        raise OracleError(f"square root of negative value {value}")
    num, den = value.numerator, value.denominator
    rn, rd = _isqrt_exact(num), _isqrt_exact(den)
    if rn is not None and rd is not None:
        return Fraction(rn, rd)
    return Fraction(_SQRT_CTX.sqrt(_SQRT_CTX.divide(num, den)))


def _isqrt_exact(n: int) -> int | None:
    from math import isqrt

    r = isqrt(n)
    return r if r * r == n else None


def compare(x: Fraction, y: Fraction, epsilon: Fraction) -> str:
    if x > y + epsilon:
        return GT
    if y > x + epsilon:
        return LT
    if abs(x - y) < epsilon:
        return EQ
    return TIE


@dataclass(frozen=True)
class OracleEntry:
    cycle: int
    phase: int
    step: int
    env: Mapping[str, Fraction]
    flag: str | None  # outcome of the live comparison, if any
    note: str | None = None  # e.g. a conditional skipped on a tie

    def value(self, species: str) -> Fraction:
        return self.env[species]


@dataclass(frozen=True)
class OracleTimeline:
    entries: tuple[OracleEntry, ...]
    species: tuple[str, ...]
    total_phases: int
    initial: Mapping[str, Fraction]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def final(self, species: str) -> Fraction:
        return self.entries[-1].env[species] if self.entries else self.initial[species]

    def annotations(self) -> list[tuple[int, str]]:
        return [(i, e.note) for i, e in enumerate(self.entries) if e.note]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cycle", "phase", *self.species, "flag"])
            for e in self.entries:
                w.writerow([e.cycle, e.phase, *(f"{float(e.env[s]):.17g}" for s in self.species),
                            e.flag or ""])


def _apply(cmd, env: dict[str, Fraction]) -> None:
    if isinstance(cmd, ExplicitRxn):
        raise OracleError("explicit rxn commands have no imperative meaning; "
                          "the oracle cannot interpret them")
    a = [env[s] for s in cmd.inputs]
    if cmd.kind == "ld":
        env[cmd.output] = a[0]
    elif cmd.kind == "add":
        env[cmd.output] = a[0] + a[1]
    elif cmd.kind == "sub":
        env[cmd.output] = max(a[0] - a[1], Fraction(0))
    elif cmd.kind == "mul":
        env[cmd.output] = a[0] * a[1]
    elif cmd.kind == "div":
        if a[1] == 0:
            raise OracleError(f"division by zero in {cmd.kind}[{', '.join(cmd.args)}]")
        env[cmd.output] = a[0] / a[1]
    elif cmd.kind == "sqrt":
        env[cmd.output] = exact_sqrt(a[0])
    else:
        raise OracleError(f"unexpected command {cmd.kind}")


def interpret(vp: ValidatedProgram, bindings: Mapping[str, float] | None = None,
              n_cycles: int = 6, epsilon: float | Fraction = Fraction(1, 2),
              strict: bool = False) -> OracleTimeline:
    """Run the program for ``n_cycles`` passes and record the state after every phase.

    With ``strict`` a conditional evaluated on a tied comparison raises
    :class:`OracleTieError`; otherwise its body is skipped and the entry is annotated.
    """
    eps = Fraction(str(epsilon)) if not isinstance(epsilon, Fraction) else epsilon
    species = tuple(sorted(vp.program.species(), key=species_sort_key))
    env: dict[str, Fraction] = {s: Fraction(0) for s in species}
    env.update(bind_initials(vp, dict(bindings or {})))
    initial = dict(env)
    schedule = schedule_steps(vp)
    flag: str | None = None
    entries = []
    for cycle in range(n_cycles):
        for s, leaves in enumerate(vp.step_orders):
            notes = []
            for cmd, guard in leaves:
                if isinstance(cmd, ExplicitRxn) or cmd.kind != "cmp":
                    if guard is not None:
                        if flag == TIE:
                            msg = f"cycle {cycle}: {guard} evaluated on a tied comparison"
                            if strict:
                                raise OracleTieError(msg)
                            notes.append(msg)
                            continue
                        if flag not in _ACCEPTS[guard]:
                            continue
                    _apply(cmd, env)
                else:
                    x, y = (env[v] for v in cmd.args)
                    flag = compare(x, y, eps)
            note = "; ".join(notes) or None
            for phase in schedule.step_to_phases[s]:
                entries.append(OracleEntry(cycle, phase, s, dict(env), flag, note))
        # padding phases of single-step programs change nothing
        for phase in range(sum(map(len, schedule.step_to_phases)), schedule.total_phases):
            entries.append(OracleEntry(cycle, phase, -1, dict(env), flag))
    return OracleTimeline(tuple(entries), species, schedule.total_phases, initial)


@dataclass(frozen=True)
class ExpectedSeries:
    """Piecewise-constant expectation indexed by phase occurrence."""

    species: str
    values: tuple[Fraction, ...]
    initial: Fraction

    def __call__(self, occurrence: int) -> Fraction:
        if occurrence < 0:
            return self.initial
        if occurrence >= len(self.values):
            raise IndexError(f"occurrence {occurrence} beyond the oracle timeline")
        return self.values[occurrence]

    def __len__(self):
        return len(self.values)


def expected_series(tl: OracleTimeline, species: str) -> ExpectedSeries:
    if species not in tl.species:
        raise OracleError(f"unknown species {species!r}")
    return ExpectedSeries(species, tuple(e.env[species] for e in tl.entries), tl.initial[species])


def expected_many(tl: OracleTimeline, species: Sequence[str]) -> dict[str, ExpectedSeries]:
    return {s: expected_series(tl, s) for s in species}
