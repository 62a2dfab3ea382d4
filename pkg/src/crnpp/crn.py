"""Chemical reaction networks and their mass-action ODE semantics."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from crnpp import kernels
from crnpp.errors import CrnError

CLOCK_PREFIX = "_X"
FLAG_PREFIX = "_F_"
TEMP_PREFIX = "_T_"
_NS_RANK = {"user": 0, "clock": 1, "flag": 2, "temp": 3}


def species_namespace(name: str) -> str:
    """Namespace tag of a species name. User identifiers can never start with ``_``."""
    if name.startswith(CLOCK_PREFIX):
        return "clock"
    if name.startswith(FLAG_PREFIX):
        return "flag"
    if name.startswith(TEMP_PREFIX):
        return "temp"
    return "user"


def clock_species(i: int) -> str:
    return f"{CLOCK_PREFIX}{i}"


def species_sort_key(name: str):
    natural = tuple(int(t) if t.isdigit() else t for t in re.split(r"(\d+)", name))
    return (_NS_RANK[species_namespace(name)], natural)


class Multiset(Mapping[str, int]):
    """Immutable multiset of species names (name -> positive multiplicity)."""

    __slots__ = ("_items",)

    def __init__(self, items: Mapping[str, int] | Iterable[str] = ()):
        if isinstance(items, Mapping):
            counts = Counter()
            for name, m in items.items():
                if int(m) != m or m < 1:
                    raise CrnError(f"multiplicity of {name!r} must be a positive integer, got {m}")
                counts[name] += int(m)
        else:
            counts = Counter(items)
        self._items = tuple(sorted(counts.items()))

    @classmethod
    def of(cls, *names: str) -> "Multiset":
        return cls(names)

    def __getitem__(self, name: str) -> int:
        for k, v in self._items:
            if k == name:
                return v
        raise KeyError(name)

    def get(self, name, default=0):
        return dict(self._items).get(name, default)

    def __iter__(self) -> Iterator[str]:
        return (k for k, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self):
        return hash(self._items)

    def __eq__(self, other):
        if isinstance(other, Multiset):
            return self._items == other._items
        return NotImplemented

    def __add__(self, other: "Multiset") -> "Multiset":
        c = Counter(dict(self._items))
        c.update(dict(other._items))
        return Multiset(dict(c))

    def __repr__(self):
        return f"Multiset({dict(self._items)!r})"

    def __str__(self):
        if not self._items:
            return "0"
        return " + ".join(n if m == 1 else f"{m}{n}" for n, m in self._items)


@dataclass(frozen=True)
class Provenance:
    """Where a compiled reaction came from."""

    role: str  # module | cmp-normalize | cmp-am | rxn | oscillator
    step: int | None = None
    command: str | None = None
    phase: int | None = None

    def to_json(self) -> dict:
        return {"role": self.role, "step": self.step, "command": self.command, "phase": self.phase}

    def describe(self) -> str:
        if self.role == "oscillator":
            return "oscillator"
        return f"step {self.step} ({self.command}), phase {self.phase}"


@dataclass(frozen=True)
class Reaction:
    reactants: Multiset
    products: Multiset
    rate: float = 1.0
    provenance: Provenance | None = field(default=None, compare=False)

    def __post_init__(self):
        if not isinstance(self.reactants, Multiset):
            object.__setattr__(self, "reactants", Multiset(self.reactants))
        if not isinstance(self.products, Multiset):
            object.__setattr__(self, "products", Multiset(self.products))
        if not self.rate > 0:
            raise CrnError(f"reaction rate must be positive, got {self.rate}")
        if not self.reactants and not self.products:
            raise CrnError("reaction with both sides empty")

    def species(self) -> set[str]:
        return set(self.reactants) | set(self.products)

    def with_catalysts(self, catalysts: Iterable[str], provenance: Provenance | None = None) -> "Reaction":
        extra = Multiset(list(catalysts))
        return Reaction(self.reactants + extra, self.products + extra, self.rate,
                        provenance if provenance is not None else self.provenance)

    def catalysts(self) -> set[str]:
        return {s for s in self.reactants if self.products.get(s) == self.reactants[s]}

    def __str__(self):
        k = "" if self.rate == 1 else f" (k={self.rate:g})"
        return f"{self.reactants} -> {self.products}{k}"


def rxn(reactants: Iterable[str] | str, products: Iterable[str] | str, rate: float = 1.0,
        provenance: Provenance | None = None) -> Reaction:
    """Shorthand: ``rxn("A B", "A B C")`` builds A + B -> A + B + C."""
    if isinstance(reactants, str):
        reactants = reactants.split()
    if isinstance(products, str):
        products = products.split()
    return Reaction(Multiset(reactants), Multiset(products), rate, provenance)


def net_change(species: str, reaction: Reaction) -> int:
    return reaction.products.get(species, 0) - reaction.reactants.get(species, 0)


@dataclass(frozen=True)
class Crn:
    reactions: tuple[Reaction, ...] = ()
    initial: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "reactions", tuple(self.reactions))
        explicit = {}
        for name in sorted(self.initial, key=species_sort_key):
            value = float(self.initial[name])
            if value < 0:
                raise CrnError(f"negative initial concentration for {name!r}")
            explicit[name] = value
        object.__setattr__(self, "initial", explicit)
        names = set(explicit)
        for r in self.reactions:
            names |= r.species()
        object.__setattr__(self, "_species", tuple(sorted(names, key=species_sort_key)))

    @property
    def species(self) -> tuple[str, ...]:
        return self._species

    def concentrations(self) -> dict[str, float]:
        """Initial concentration of every species, 0 where not given."""
        return {s: self.initial.get(s, 0.0) for s in self._species}

    def to_json_dict(self) -> dict:
        return {
            "species": self.concentrations(),
            "reactions": [
                {
                    "reactants": dict(r.reactants),
                    "products": dict(r.products),
                    "rate": r.rate,
                    "provenance": r.provenance.to_json() if r.provenance else None,
                }
                for r in self.reactions
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Crn":
        reactions = []
        for r in data["reactions"]:
            prov = Provenance(**r["provenance"]) if r.get("provenance") else None
            reactions.append(Reaction(Multiset(r["reactants"]), Multiset(r["products"]),
                                      float(r["rate"]), prov))
        return cls(tuple(reactions), dict(data["species"]))

    @classmethod
    def from_json(cls, text: str) -> "Crn":
        return cls.from_json_dict(json.loads(text))


def merge(crns: Iterable[Crn]) -> Crn:
    """Union of reactions (duplicates kept, their fluxes add) and of initial values."""
    reactions: list[Reaction] = []
    initial: dict[str, float] = {}
    for crn in crns:
        reactions.extend(crn.reactions)
        for name, value in crn.initial.items():
            if name in initial and initial[name] != value:
                raise CrnError(f"conflicting initial concentration for {name!r}: "
                               f"{initial[name]} vs {value}")
            initial[name] = value
    return Crn(tuple(reactions), initial)


class OdeSystem:
    """d[S]/dt = sum_r k_r * netChange(S, r) * prod_R [R]^m_r(R), in packed array form."""

    def __init__(self, species: Iterable[str], reactions: Iterable[Reaction]):
        self.species = tuple(species)
        self.reactions = tuple(reactions)
        self.index = {s: i for i, s in enumerate(self.species)}
        self.packed = pack_network(self.species, self.reactions)

    def __len__(self):
        return len(self.species)

    @property
    def rates(self) -> np.ndarray:
        return self.packed.rates

    def derivative(self, y, rates=None) -> np.ndarray:
        y = np.ascontiguousarray(y, dtype=np.float64)
        return kernels.impl.rhs(y, self.packed if rates is None else self.packed._replace(
            rates=np.ascontiguousarray(rates, dtype=np.float64)))

    __call__ = derivative

    def fluxes(self, y, rates=None) -> np.ndarray:
        y = np.ascontiguousarray(y, dtype=np.float64)
        return kernels.impl.fluxes(y, self.packed if rates is None else self.packed._replace(
            rates=np.ascontiguousarray(rates, dtype=np.float64)))


def pack_network(species: tuple[str, ...], reactions: tuple[Reaction, ...]) -> kernels.PackedNetwork:
    index = {s: i for i, s in enumerate(species)}
    rct_ptr, rct_idx, rct_mult = [0], [], []
    chg_ptr, chg_idx, chg_val = [0], [], []
    for r in reactions:
        for s, m in r.reactants.items():
            rct_idx.append(index[s])
            rct_mult.append(m)
        rct_ptr.append(len(rct_idx))
        for s in sorted(r.species(), key=index.__getitem__):
            delta = net_change(s, r)
            if delta:
                chg_idx.append(index[s])
                chg_val.append(float(delta))
        chg_ptr.append(len(chg_idx))
    i64 = np.int64
    return kernels.PackedNetwork(
        n_species=len(species),
        rates=np.array([r.rate for r in reactions], dtype=np.float64),
        rct_ptr=np.array(rct_ptr, dtype=i64),
        rct_idx=np.array(rct_idx, dtype=i64),
        rct_mult=np.array(rct_mult, dtype=i64),
        chg_ptr=np.array(chg_ptr, dtype=i64),
        chg_idx=np.array(chg_idx, dtype=i64),
        chg_val=np.array(chg_val, dtype=np.float64),
    )


def mass_action_odes(crn: Crn) -> OdeSystem:
    return OdeSystem(crn.species, crn.reactions)
