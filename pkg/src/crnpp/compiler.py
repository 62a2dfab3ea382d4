"""Lowering of validated programs to a single clocked reaction network."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from crnpp.crn import (
    FLAG_PREFIX,
    TEMP_PREFIX,
    Crn,
    Provenance,
    Reaction,
    clock_species,
    merge,
    rxn,
)
from crnpp.errors import CompileError
from crnpp.frontend import (
    Command,
    Conditional,
    ExplicitRxn,
    Module,
    Param,
    ValidatedProgram,
    format_program,
    _format_command,
)


@dataclass(frozen=True)
class CompileConfig:
    epsilon: float = 0.5  # half-width of the equality band used by cmp
    clock_eps: float = 1e-10  # initial concentration of every clock species but X1
    clock_total: float = 2.0  # initial concentration of X1
    min_phases: int = 2


@dataclass(frozen=True)
class FlagSet:
    x_gt_y: str = FLAG_PREFIX + "XgtY"
    x_lt_y: str = FLAG_PREFIX + "XltY"
    b_x: str = FLAG_PREFIX + "Bx"
    y_gt_x: str = FLAG_PREFIX + "YgtX"
    y_lt_x: str = FLAG_PREFIX + "YltX"
    b_y: str = FLAG_PREFIX + "By"
    offset: str = FLAG_PREFIX + "CmpOffset"

    def initial(self, epsilon: float) -> dict[str, float]:
        return {self.x_gt_y: 0.5, self.x_lt_y: 0.5, self.b_x: 0.0,
                self.y_gt_x: 0.5, self.y_lt_x: 0.5, self.b_y: 0.0,
                self.offset: float(epsilon)}

    def names(self) -> tuple[str, ...]:
        return (self.x_gt_y, self.x_lt_y, self.b_x, self.y_gt_x, self.y_lt_x, self.b_y,
                self.offset)


@dataclass(frozen=True)
class ClockSchedule:
    total_phases: int
    step_to_phases: tuple[tuple[int, ...], ...]

    def catalyst_of_phase(self, phase: int) -> str:
        return clock_species(3 * (phase + 1))

    @property
    def n_clock_species(self) -> int:
        return 3 * self.total_phases

    @property
    def catalysts(self) -> tuple[str, ...]:
        return tuple(self.catalyst_of_phase(i) for i in range(self.total_phases))


@dataclass(frozen=True)
class CompiledProgram:
    crn: Crn
    schedule: ClockSchedule
    flag_sets: tuple[FlagSet, ...]
    param_bindings: Mapping[str, float]
    config: CompileConfig
    program: ValidatedProgram = field(repr=False, compare=False)

    def phase_of_reaction(self) -> list[int | None]:
        return [r.provenance.phase if r.provenance else None for r in self.crn.reactions]

    def user_species(self) -> tuple[str, ...]:
        return self.program.program.species()

    def to_json_dict(self) -> dict:
        data = self.crn.to_json_dict()
        steps = []
        for i, phases in enumerate(self.schedule.step_to_phases):
            steps.append({
                "step": i,
                "phases": list(phases),
                "commands": [_format_command(c, "") for c in self.program.steps[i].commands],
            })
        data["schedule"] = {
            "total_phases": self.schedule.total_phases,
            "clock_species": self.schedule.n_clock_species,
            "catalysts": list(self.schedule.catalysts),
            "steps": steps,
        }
        data["flags"] = [list(f.names()) for f in self.flag_sets]
        data["bindings"] = dict(sorted(self.param_bindings.items()))
        data["config"] = {
            "epsilon": self.config.epsilon,
            "clock_eps": self.config.clock_eps,
            "clock_total": self.config.clock_total,
        }
        data["source"] = format_program(self.program.program)
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


# -------------------------------------------------------------- module expansion


def expand_module(m: Module, helper_tag: str = "0") -> list[Reaction]:
    """Reactions implementing an arithmetic module (every rate 1 except sqrt's annihilation)."""
    a = m.args
    if m.kind == "ld":
        return [rxn([a[0]], [a[0], a[1]]), rxn([a[1]], [])]
    if m.kind == "add":
        return [rxn([a[0]], [a[0], a[2]]), rxn([a[1]], [a[1], a[2]]), rxn([a[2]], [])]
    if m.kind == "sub":
        h = f"{TEMP_PREFIX}H{helper_tag}"
        return [rxn([a[0]], [a[0], a[2]]), rxn([a[1]], [a[1], h]), rxn([a[2]], []),
                rxn([a[2], h], [])]
    if m.kind == "mul":
        return [rxn([a[0], a[1]], [a[0], a[1], a[2]]), rxn([a[2]], [])]
    if m.kind == "div":
        return [rxn([a[0]], [a[0], a[2]]), rxn([a[1], a[2]], [a[1]])]
    if m.kind == "sqrt":
        return [rxn([a[0]], [a[0], a[1]]), rxn([a[1], a[1]], [], 0.5)]
    raise CompileError(f"no reaction template for module {m.kind!r}")


def expand_cmp(m: Module, flags: FlagSet | None = None):
    """Return (normalisation reactions, approximate-majority reactions, flags) for cmp[x, y]."""
    flags = flags or FlagSet()
    x, y = m.args
    f = flags
    normalize = [
        rxn([f.x_gt_y, y], [f.x_lt_y, y]),
        rxn([f.x_lt_y, x], [f.x_gt_y, x]),
        rxn([f.x_lt_y, f.offset], [f.x_gt_y, f.offset]),
        rxn([f.y_gt_x, x], [f.y_lt_x, x]),
        rxn([f.y_lt_x, y], [f.y_gt_x, y]),
        rxn([f.y_lt_x, f.offset], [f.y_gt_x, f.offset]),
    ]
    majority = []
    for hi, lo, b in ((f.x_gt_y, f.x_lt_y, f.b_x), (f.y_gt_x, f.y_lt_x, f.b_y)):
        majority += [
            rxn([hi, lo], [lo, b]),
            rxn([b, lo], [lo, lo]),
            rxn([lo, hi], [hi, b]),
            rxn([b, hi], [hi, hi]),
        ]
    return normalize, majority, flags


def flag_catalysts(kind: str, flags: FlagSet) -> list[str]:
    table = {
        "ifGT": [flags.x_gt_y, flags.y_lt_x],
        "ifEQ": [flags.x_gt_y, flags.y_gt_x],
        "ifLT": [flags.x_lt_y, flags.y_gt_x],
        "ifGE": [flags.x_gt_y],
        "ifLE": [flags.y_gt_x],
    }
    try:
        return table[kind]
    except KeyError:
        raise CompileError(f"unknown conditional {kind!r}") from None


# ------------------------------------------------------------------- scheduling


def schedule_steps(vp: ValidatedProgram, min_phases: int = 2) -> ClockSchedule:
    phases = []
    nxt = 0
    for step in vp.steps:
        width = 2 if step.has_cmp() else 1
        phases.append(tuple(range(nxt, nxt + width)))
        nxt += width
    return ClockSchedule(max(nxt, min_phases), tuple(phases))


def synthesize_oscillator(n_species: int, clock_eps: float = 1e-10, clock_total: float = 2.0):
    """Cyclic autocatalytic ring X_i + X_{i+1} -> 2 X_{i+1}, closed by X_n + X_1 -> 2 X_1."""
    if n_species < 3 or n_species % 3:
        raise CompileError(f"oscillator size must be a positive multiple of 3, got {n_species}")
    prov = Provenance("oscillator")
    reactions = []
    for i in range(1, n_species + 1):
        a = clock_species(i)
        b = clock_species(i % n_species + 1)
        reactions.append(rxn([a, b], [b, b], provenance=prov))
    initial = {clock_species(i): clock_eps for i in range(2, n_species + 1)}
    initial[clock_species(1)] = clock_total
    return reactions, initial


# ---------------------------------------------------------------------- compile


def _command_reactions(cmd: Command, tag: str) -> list[Reaction]:
    if isinstance(cmd, ExplicitRxn):
        return [rxn(list(cmd.reactants), list(cmd.products), float(cmd.rate))]
    return expand_module(cmd, tag)


def bind_initials(vp: ValidatedProgram, bindings: Mapping[str, float]) -> dict[str, Fraction]:
    values = {}
    for decl in vp.program.concs:
        if isinstance(decl.value, Param):
            if decl.value.name not in bindings:
                raise CompileError(f"unbound parameter {decl.value.name!r} "
                                   f"(initial concentration of {decl.species!r})")
            value = Fraction(str(bindings[decl.value.name]))
            if value < 0:
                raise CompileError(f"parameter {decl.value.name!r} must be nonnegative")
            values[decl.species] = value
        else:
            values[decl.species] = decl.value
    return values


def compile_program(vp: ValidatedProgram, bindings: Mapping[str, float] | None = None,
                    cfg: CompileConfig | None = None) -> CompiledProgram:
    """Lower a validated program to one CRN with clock and flag catalysis."""
    cfg = cfg or CompileConfig()
    bindings = dict(bindings or {})
    initials = {k: float(v) for k, v in bind_initials(vp, bindings).items()}
    schedule = schedule_steps(vp, cfg.min_phases)
    flags = FlagSet()
    uses_cmp = False

    reactions: list[Reaction] = []
    counter = 0
    for s, step in enumerate(vp.steps):
        phases = schedule.step_to_phases[s]
        clock = schedule.catalyst_of_phase(phases[0])
        for cmd in step.commands:
            leaves = cmd.body if isinstance(cmd, Conditional) else (cmd,)
            guard = flag_catalysts(cmd.kind, flags) if isinstance(cmd, Conditional) else []
            for leaf in leaves:
                text = _format_command(leaf, "")
                if isinstance(cmd, Conditional):
                    text = f"{cmd.kind}: {text}"
                if isinstance(leaf, Module) and leaf.kind == "cmp":
                    uses_cmp = True
                    normalize, majority, _ = expand_cmp(leaf, flags)
                    p1 = Provenance("cmp-normalize", s, text, phases[0])
                    p2 = Provenance("cmp-am", s, text, phases[1])
                    reactions += [r.with_catalysts([clock], p1) for r in normalize]
                    am_clock = schedule.catalyst_of_phase(phases[1])
                    reactions += [r.with_catalysts([am_clock], p2) for r in majority]
                else:
                    role = "rxn" if isinstance(leaf, ExplicitRxn) else "module"
                    prov = Provenance(role, s, text, phases[0])
                    for r in _command_reactions(leaf, f"_s{s}_c{counter}"):
                        reactions.append(r.with_catalysts([clock, *guard], prov))
                counter += 1

    osc_reactions, osc_initial = synthesize_oscillator(
        schedule.n_clock_species, cfg.clock_eps, cfg.clock_total)
    parts = [Crn(tuple(reactions), initials), Crn(tuple(osc_reactions), osc_initial)]
    if uses_cmp:
        parts.append(Crn((), flags.initial(cfg.epsilon)))
    crn = merge(parts)
    return CompiledProgram(crn, schedule, (flags,) if uses_cmp else (), bindings, cfg, vp)


compile = compile_program  # noqa: A001 - public name matching the pipeline stage
