"""Redundancy lattice of source antichains and Möbius inversion.

Sources are referred to by 1-based index.  An antichain is a collection of
non-empty index sets, none contained in another.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .probcore import JointTable, ProbabilityError, specific_information_vector, marginal_array

MAX_LATTICE_SOURCES = 3
ROUNDTRIP_TOL = 1e-10


class LatticeError(ValueError):
    pass


def _member_key(m: frozenset) -> tuple:
    return (len(m), tuple(sorted(m)))


@dataclass(frozen=True)
class Antichain:
    members: frozenset

    def __init__(self, members):
        ms = frozenset(frozenset(m) for m in members)
        if not ms:
            raise LatticeError("an antichain needs at least one member")
        for m in ms:
            if not m:
                raise LatticeError("antichain members must be non-empty")
        for a, b in itertools.permutations(ms, 2):
            if a < b:
                raise LatticeError(f"{sorted(a)} is contained in {sorted(b)}: not an antichain")
        object.__setattr__(self, "members", ms)

    def sorted_members(self) -> list[tuple[int, ...]]:
        return [tuple(sorted(m)) for m in sorted(self.members, key=_member_key)]

    def __str__(self):
        return "{" + ",".join("{" + ",".join(map(str, m)) + "}" for m in self.sorted_members()) + "}"

    def __repr__(self):
        return f"Antichain({self})"

    def sort_key(self):
        return (len(self.members), [_member_key(m) for m in sorted(self.members, key=_member_key)])

    @classmethod
    def parse(cls, text: str) -> "Antichain":
        s = text.replace(" ", "")
        if not (s.startswith("{") and s.endswith("}")):
            raise LatticeError(f"cannot parse antichain {text!r}")
        inner = s[1:-1]
        members = []
        for part in inner.split("}"):
            part = part.lstrip(",")
            if not part:
                continue
            if not part.startswith("{"):
                raise LatticeError(f"cannot parse antichain {text!r}")
            members.append({int(x) for x in part[1:].split(",")})
        return cls(members)


def precedes(a: Antichain, b: Antichain) -> bool:
    """a ⪯ b: every member of b contains some member of a."""
    return all(any(A <= B for A in a.members) for B in b.members)


class RedundancyLattice:
    """The antichain lattice for d sources with a precomputed order."""

    def __init__(self, d: int):
        if d < 1:
            raise LatticeError("need at least one source")
        if d > MAX_LATTICE_SOURCES:
            raise LatticeError(
                f"d={d} unsupported: lattice size follows the Dedekind numbers and "
                f"only d <= {MAX_LATTICE_SOURCES} is enumerated"
            )
        self.d = d
        subsets = [frozenset(c) for k in range(1, d + 1) for c in itertools.combinations(range(1, d + 1), k)]
        elems = []
        for k in range(1, len(subsets) + 1):
            for combo in itertools.combinations(subsets, k):
                if all(not (a < b or b < a) for a, b in itertools.combinations(combo, 2)):
                    elems.append(Antichain(combo))
        # a linear extension: fewer elements below come first
        below = {e: sum(precedes(o, e) for o in elems) for e in elems}
        self.elements: list[Antichain] = sorted(elems, key=lambda e: (below[e], e.sort_key()))
        self.index = {e: i for i, e in enumerate(self.elements)}
        n = len(self.elements)
        order = np.zeros((n, n), dtype=bool)
        for i, a in enumerate(self.elements):
            for j, b in enumerate(self.elements):
                order[i, j] = precedes(a, b)
        order.setflags(write=False)
        self.order = order
        self._check_order()
        self.top = Antichain([range(1, d + 1)])
        self.bottom = Antichain([[i] for i in range(1, d + 1)])

    def _check_order(self):
        o = self.order
        if not o.diagonal().all():
            raise LatticeError("order is not reflexive")
        if (o & o.T & ~np.eye(len(o), dtype=bool)).any():
            raise LatticeError("order is not antisymmetric")
        if ((o.astype(int) @ o.astype(int) > 0) & ~o).any():
            raise LatticeError("order is not transitive")

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def leq(self, a: Antichain, b: Antichain) -> bool:
        return bool(self.order[self.index[a], self.index[b]])

    def down_set(self, b: Antichain) -> list[Antichain]:
        j = self.index[b]
        return [e for i, e in enumerate(self.elements) if self.order[i, j]]

    @cached_property
    def covers(self) -> list[tuple[Antichain, Antichain]]:
        """Hasse diagram edges (a, b) with a ⋖ b."""
        out = []
        n = len(self.elements)
        for i in range(n):
            for j in range(n):
                if i != j and self.order[i, j]:
                    if not any(k not in (i, j) and self.order[i, k] and self.order[k, j] for k in range(n)):
                        out.append((self.elements[i], self.elements[j]))
        return out


_LATTICES: dict[int, RedundancyLattice] = {}


def enumerate_lattice(d: int) -> RedundancyLattice:
    if d not in _LATTICES:
        _LATTICES[d] = RedundancyLattice(d)
    return _LATTICES[d]


class AtomMap(dict):
    """Antichain -> bits."""

    def to_json(self) -> dict:
        return {str(k): float(v) for k, v in sorted(self.items(), key=lambda kv: kv[0].sort_key())}

    def total(self) -> float:
        return float(sum(self.values()))


def moebius_atoms(lattice: RedundancyLattice, redundancy: Mapping[Antichain, float]) -> AtomMap:
    missing = [str(e) for e in lattice.elements if e not in redundancy]
    if missing:
        raise LatticeError(f"redundancy undefined on {missing}")
    atoms = AtomMap()
    for j, b in enumerate(lattice.elements):
        below = sum(atoms[a] for i, a in enumerate(lattice.elements[:j]) if lattice.order[i, j])
        atoms[b] = float(redundancy[b]) - below
    return atoms


def resum(lattice: RedundancyLattice, atoms: Mapping[Antichain, float]) -> dict:
    """Zeta transform: redundancy of every element from its atoms."""
    return {b: float(sum(atoms[a] for a in lattice.down_set(b))) for b in lattice.elements}


def _source_names(sources: Sequence, i: int) -> list[str]:
    s = sources[i - 1]
    return [s] if isinstance(s, str) else list(s)


def specific_informations(table: JointTable, sources: Sequence, alpha: Antichain, target) -> np.ndarray:
    """Rows: members of alpha in canonical order; columns: target states."""
    rows = []
    for m in alpha.sorted_members():
        names = [n for i in m for n in _source_names(sources, i)]
        rows.append(specific_information_vector(table, target, names))
    return np.array(rows)


def imin_redundancy(table: JointTable, sources: Sequence, alpha: Antichain, target) -> float:
    """Minimum-specific-information redundancy Σ_t p(t) min_A I(A; T=t)."""
    target = [target] if isinstance(target, str) else list(target)
    used = {n for i in range(1, len(sources) + 1) for n in _source_names(sources, i)}
    if used & set(target):
        raise ProbabilityError("target overlaps the sources")
    for m in alpha.members:
        if max(m) > len(sources):
            raise LatticeError(f"antichain {alpha} refers to a source beyond the {len(sources)} given")
    pt = marginal_array(table, target).ravel()
    spec = specific_informations(table, sources, alpha, target)
    return float((pt * spec.min(axis=0)).sum())
