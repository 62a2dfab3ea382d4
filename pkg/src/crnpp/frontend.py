"""Lexer, parser, pretty-printer and semantic checks for CRN++ source.

Accepted concrete syntax is the bracketed form used in the published listings::

    crn = {
      conc[a, a0], conc[b, b0],
      step[{ ld[a, atmp], ld[b, btmp], cmp[a, b] }],
      step[{ ifGT[{ sub[atmp, btmp, a] }], ifLT[{ sub[btmp, atmp, b] }] }]
    };

Braces around command lists are optional, the trailing semicolon is optional,
``#`` starts a line comment, and ``nil`` denotes an empty side of ``rxn``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Union

import networkx as nx

from crnpp.errors import Diagnostic, ParseError, ValidationError

MODULE_ARITY = {"ld": 2, "add": 3, "sub": 3, "mul": 3, "div": 3, "sqrt": 2, "cmp": 2}
CONDITIONAL_KINDS = ("ifGT", "ifGE", "ifEQ", "ifLT", "ifLE")

# Pairs of conditional kinds that can never be active together.
_EXCLUSIVE = {
    frozenset(p)
    for p in [("ifGT", "ifLT"), ("ifGT", "ifLE"), ("ifGT", "ifEQ"),
              ("ifLT", "ifGE"), ("ifLT", "ifEQ")]
}


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Loc:
    line: int
    col: int


_NOLOC = Loc(0, 0)


def _loc_field():
    return field(default=_NOLOC, compare=False, repr=False)


@dataclass(frozen=True)
class Param:
    """A named, externally bound initial concentration (``conc[a, a0]``)."""

    name: str


@dataclass(frozen=True)
class ConcDecl:
    species: str
    value: Union[Fraction, Param]
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class ExplicitRxn:
    reactants: tuple[str, ...]
    products: tuple[str, ...]
    rate: Fraction
    loc: Loc = _loc_field()


@dataclass(frozen=True)
class Module:
    kind: str
    args: tuple[str, ...]
    loc: Loc = _loc_field()

    @property
    def inputs(self) -> tuple[str, ...]:
        if self.kind == "cmp":
            return self.args
        return self.args[:-1]

    @property
    def output(self) -> str | None:
        return None if self.kind == "cmp" else self.args[-1]


@dataclass(frozen=True)
class Conditional:
    kind: str
    body: tuple["Command", ...]
    loc: Loc = _loc_field()


Command = Union[ExplicitRxn, Module, Conditional]


@dataclass(frozen=True)
class Step:
    commands: tuple[Command, ...]
    loc: Loc = _loc_field()

    def has_cmp(self) -> bool:
        return any(isinstance(c, Module) and c.kind == "cmp" for c in self.commands)


@dataclass(frozen=True)
class Program:
    concs: tuple[ConcDecl, ...]
    steps: tuple[Step, ...]

    @property
    def params(self) -> tuple[str, ...]:
        return tuple(sorted({c.value.name for c in self.concs if isinstance(c.value, Param)}))

    def species(self) -> tuple[str, ...]:
        """All user species mentioned anywhere, sorted."""
        names = {c.species for c in self.concs}
        for _, cmd, _ in iter_commands(self):
            if isinstance(cmd, Module):
                names.update(cmd.args)
            else:
                names.update(cmd.reactants)
                names.update(cmd.products)
        return tuple(sorted(names))


def iter_commands(program: Program) -> Iterator[tuple[int, Command, str | None]]:
    """Yield ``(step_index, leaf_command, guard)`` with conditionals flattened."""
    for i, step in enumerate(program.steps):
        for cmd in step.commands:
            if isinstance(cmd, Conditional):
                for inner in cmd.body:
                    yield i, inner, cmd.kind
            else:
                yield i, cmd, None


# ------------------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>\d+/\d+|(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<punct>[{}\[\],+=;])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "number" | "ident" | "punct" | "eof"
    text: str
    loc: Loc


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        loc = Loc(line, pos - line_start + 1)
        if m is None:
            raise ParseError([Diagnostic("error", loc.line, loc.col,
                                         f"unexpected character {source[pos]!r}", "syntax")])
        kind, text = m.lastgroup, m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, loc))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + text.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", Loc(line, pos - line_start + 1)))
    return tokens


def _to_fraction(text: str) -> Fraction:
    if text.endswith("."):
        text += "0"
    return Fraction(text)


# ------------------------------------------------------------------------ parser


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        # Recoverable problems (bad arity, unknown module) collected while parsing.
        self.errors: list[Diagnostic] = []

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(self.errors + [Diagnostic(
            "error", tok.loc.line, tok.loc.col, f"{message}, found {found}", "syntax")])

    def error(self, loc: Loc, message: str, rule: str):
        self.errors.append(Diagnostic("error", loc.line, loc.col, message, rule))

    def advance(self) -> Token:
        tok = self.tok
        self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        return self.tok.kind == "punct" and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            self.fail(f"expected {what}")
        return self.advance()

    def number(self) -> Fraction:
        if self.tok.kind != "number":
            self.fail("expected number")
        return _to_fraction(self.advance().text)

    # crn = { RootSList } [;]
    def program(self) -> Program:
        head = self.ident("'crn'")
        if head.text != "crn":
            self.fail("expected 'crn'", head)
        self.expect("=")
        self.expect("{")
        concs: list[ConcDecl] = []
        steps: list[Step] = []
        while True:
            tok = self.ident("'conc' or 'step'")
            if tok.text == "conc":
                concs.append(self.conc(tok))
            elif tok.text == "step":
                steps.append(self.step(tok))
            else:
                self.fail("expected 'conc' or 'step'", tok)
            if not self.at(","):
                break
            self.advance()
        self.expect("}")
        if self.at(";"):
            self.advance()
        if self.tok.kind != "eof":
            self.fail("expected end of input")
        if not steps:
            self.error(head.loc, "program has no step", "syntax")
        return Program(tuple(concs), tuple(steps))

    def conc(self, head: Token) -> ConcDecl:
        self.expect("[")
        species = self.ident("species name").text
        self.expect(",")
        if self.tok.kind == "ident":
            value: Fraction | Param = Param(self.advance().text)
        else:
            value = self.number()
        self.expect("]")
        return ConcDecl(species, value, head.loc)

    def step(self, head: Token) -> Step:
        self.expect("[")
        commands = self.command_list(nested=False)
        self.expect("]")
        return Step(tuple(commands), head.loc)

    def command_list(self, nested: bool) -> list[Command]:
        braced = self.at("{")
        if braced:
            self.advance()
        commands = [self.command(nested)]
        while self.at(","):
            self.advance()
            commands.append(self.command(nested))
        if braced:
            self.expect("}")
        return commands

    def command(self, nested: bool) -> Command:
        head = self.ident("command")
        name = head.text
        if name == "rxn":
            return self.rxn(head)
        cond = _conditional_kind(name)
        if cond is not None:
            if nested:
                self.error(head.loc, f"{name} nested inside a conditional", "nested-conditional")
            self.expect("[")
            body = self.command_list(nested=True)
            self.expect("]")
            return Conditional(cond, tuple(body), head.loc)
        self.expect("[")
        args = [self.ident("species name").text]
        while self.at(","):
            self.advance()
            args.append(self.ident("species name").text)
        self.expect("]")
        if name not in MODULE_ARITY:
            self.error(head.loc, f"unknown module {name!r}", "unknown-module")
        elif len(args) != MODULE_ARITY[name]:
            self.error(head.loc, f"{name} takes {MODULE_ARITY[name]} arguments, got {len(args)}",
                       "arity")
        elif name == "cmp" and nested:
            self.error(head.loc, "cmp inside a conditional", "nested-conditional")
        return Module(name, tuple(args), head.loc)

    def rxn(self, head: Token) -> ExplicitRxn:
        self.expect("[")
        reactants = self.species_sum()
        self.expect(",")
        products = self.species_sum()
        self.expect(",")
        rate = self.number()
        self.expect("]")
        if rate <= 0:
            self.error(head.loc, "reaction rate must be positive", "rate")
        if not reactants and not products:
            self.error(head.loc, "reaction with both sides empty", "empty-reaction")
        return ExplicitRxn(tuple(reactants), tuple(products), rate, head.loc)

    def species_sum(self) -> list[str]:
        first = self.ident("species or 'nil'").text
        if first == "nil":
            return []
        names = [first]
        while self.at("+"):
            self.advance()
            names.append(self.ident("species name").text)
        return names


def _conditional_kind(name: str) -> str | None:
    # The integer-division listing spells it IfGE; accept either capitalisation.
    if len(name) == 4 and name[:2].lower() == "if":
        canonical = "if" + name[2:]
        if canonical in CONDITIONAL_KINDS:
            return canonical
    return None


def parse(source: str) -> Program:
    """Parse CRN++ source text; raises :class:`ParseError` carrying diagnostics."""
    parser = _Parser(tokenize(source))
    program = parser.program()
    if parser.errors:
        raise ParseError(parser.errors)
    return program


# ---------------------------------------------------------------- pretty printer


def format_number(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    d = value.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    if d != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = 0
    scaled = value
    while scaled.denominator != 1:
        scaled *= 10
        digits += 1
    text = str(scaled.numerator).rjust(digits + 1, "0")
    return f"{text[:-digits]}.{text[-digits:]}"


def _format_command(cmd: Command, indent: str) -> str:
    if isinstance(cmd, Module):
        return f"{indent}{cmd.kind}[{', '.join(cmd.args)}]"
    if isinstance(cmd, ExplicitRxn):
        lhs = " + ".join(cmd.reactants) or "nil"
        rhs = " + ".join(cmd.products) or "nil"
        return f"{indent}rxn[{lhs}, {rhs}, {format_number(cmd.rate)}]"
    body = ",\n".join(_format_command(c, indent + "  ") for c in cmd.body)
    return f"{indent}{cmd.kind}[{{\n{body}\n{indent}}}]"


def format_program(program: Program) -> str:
    """Render a program as canonical source; ``parse(format_program(p)) == p``."""
    items = []
    for c in program.concs:
        value = c.value.name if isinstance(c.value, Param) else format_number(c.value)
        items.append(f"  conc[{c.species}, {value}]")
    for step in program.steps:
        body = ",\n".join(_format_command(c, "    ") for c in step.commands)
        items.append(f"  step[{{\n{body}\n  }}]")
    return "crn = {\n" + ",\n".join(items) + "\n};\n"


# -------------------------------------------------------------------- validation


@dataclass(frozen=True)
class ValidatedProgram:
    program: Program
    warnings: tuple[Diagnostic, ...] = ()
    # Per step: leaf commands (with guard) in dataflow order.
    step_orders: tuple[tuple[tuple[Command, str | None], ...], ...] = ()

    @property
    def steps(self) -> tuple[Step, ...]:
        return self.program.steps


def command_reads_writes(cmd: Command) -> tuple[set[str], set[str]]:
    if isinstance(cmd, Module):
        out = cmd.output
        return set(cmd.inputs), ({out} if out else set())
    produced: dict[str, int] = {}
    for s in cmd.products:
        produced[s] = produced.get(s, 0) + 1
    for s in cmd.reactants:
        produced[s] = produced.get(s, 0) - 1
    return set(cmd.reactants), {s for s, n in produced.items() if n != 0}


def _restriction_errors(cmd: Module) -> list[str]:
    if cmd.kind in ("ld", "sqrt") and cmd.args[0] == cmd.args[1]:
        return [f"{cmd.kind}[{', '.join(cmd.args)}]: output species must differ from input"]
    if cmd.kind == "cmp" and cmd.args[0] == cmd.args[1]:
        return [f"cmp[{', '.join(cmd.args)}]: compared species must differ"]
    if MODULE_ARITY.get(cmd.kind) == 3 and cmd.args[2] in cmd.args[:2]:
        return [f"{cmd.kind}[{', '.join(cmd.args)}]: output species must differ from inputs"]
    return []


def _dataflow_order(leaves: list[tuple[Command, str | None]]) -> tuple[list[int], list[list[str]]]:
    """Order commands so writers precede readers; also return sorted species cycles."""
    species_graph = nx.DiGraph()
    for cmd, _ in leaves:
        reads, writes = command_reads_writes(cmd)
        for w in writes:
            species_graph.add_node(w)
            for r in reads:
                if isinstance(cmd, ExplicitRxn) and r == w:
                    continue  # a reaction consuming its own reactant is not a cycle
                species_graph.add_edge(r, w)
    cycles = sorted(
        sorted(scc) for scc in nx.strongly_connected_components(species_graph)
        if len(scc) > 1 or species_graph.has_edge(next(iter(scc)), next(iter(scc)))
    )
    if cycles:
        return list(range(len(leaves))), cycles
    cmd_graph = nx.DiGraph()
    cmd_graph.add_nodes_from(range(len(leaves)))
    rw = [command_reads_writes(c) for c, _ in leaves]
    for i, (_, writes_i) in enumerate(rw):
        for j, (reads_j, _) in enumerate(rw):
            if i != j and writes_i & reads_j:
                cmd_graph.add_edge(i, j)
    # Explicit reactions may feed each other (exempt above); keep such groups
    # together in source order.
    dag = nx.condensation(cmd_graph)
    members = dag.graph["mapping"]
    groups = {c: sorted(i for i, g in members.items() if g == c) for c in dag.nodes}
    order = nx.lexicographical_topological_sort(dag, key=lambda c: groups[c][0])
    return [i for c in order for i in groups[c]], []


def validate(program: Program) -> ValidatedProgram:
    """Check module restrictions, intra-step cycles and conditional/cmp ordering."""
    errors: list[Diagnostic] = []
    warnings: list[Diagnostic] = []

    def err(loc: Loc, msg: str, rule: str):
        errors.append(Diagnostic("error", loc.line, loc.col, msg, rule))

    seen: dict[str, ConcDecl] = {}
    for c in program.concs:
        if c.species in seen:
            err(c.loc, f"duplicate conc declaration for {c.species!r}", "duplicate-conc")
        seen[c.species] = c
        if isinstance(c.value, Fraction) and c.value < 0:
            err(c.loc, f"negative initial concentration for {c.species!r}", "negative-conc")
    if not program.steps:
        err(_NOLOC, "program has no step", "syntax")

    cmp_seen = False
    orders = []
    for step in program.steps:
        leaves: list[tuple[Command, str | None]] = []
        n_cmp = 0
        has_conditional = False
        for cmd in step.commands:
            if isinstance(cmd, Conditional):
                has_conditional = True
                if not cmp_seen:
                    err(cmd.loc, f"{cmd.kind} without a cmp in an earlier step",
                        "conditional-without-cmp")
                for inner in cmd.body:
                    if isinstance(inner, Conditional) or (
                            isinstance(inner, Module) and inner.kind == "cmp"):
                        err(inner.loc, "conditional bodies may not contain cmp or conditionals",
                            "nested-conditional")
                    leaves.append((inner, cmd.kind))
            else:
                if isinstance(cmd, Module) and cmd.kind == "cmp":
                    n_cmp += 1
                leaves.append((cmd, None))
        for cmd, _ in leaves:
            if isinstance(cmd, Module):
                for msg in _restriction_errors(cmd):
                    err(cmd.loc, msg, "restriction")
        if n_cmp > 1:
            err(step.loc, "more than one cmp in a step; only one comparison can be live",
                "multiple-cmp")
        if n_cmp and has_conditional:
            err(step.loc, "conditional in the same step as cmp would read flags being rewritten",
                "conditional-in-cmp-step")

        order, cycles = _dataflow_order(leaves)
        for cyc in cycles:
            err(step.loc, f"cyclic dependence within step between species {', '.join(cyc)}",
                "cycle")
        writers: dict[str, list[str | None]] = {}
        for cmd, guard in leaves:
            for w in command_reads_writes(cmd)[1]:
                writers.setdefault(w, []).append(guard)
        for species, guards in sorted(writers.items()):
            if len(guards) < 2:
                continue
            exclusive = all(
                a is not None and b is not None and frozenset((a, b)) in _EXCLUSIVE
                for i, a in enumerate(guards) for b in guards[i + 1:]
            )
            if not exclusive:
                warnings.append(Diagnostic(
                    "warning", step.loc.line, step.loc.col,
                    f"species {species!r} written by several commands in one step", "multiple-writers"))
        orders.append(tuple(leaves[i] for i in order))
        if n_cmp:
            cmp_seen = True

    if errors:
        raise ValidationError(errors)
    return ValidatedProgram(program, tuple(warnings), tuple(orders))


def load(source: str) -> ValidatedProgram:
    return validate(parse(source))
