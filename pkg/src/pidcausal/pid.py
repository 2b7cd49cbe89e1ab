"""Bivariate and trivariate partial information decomposition.

Two redundancy strategies are available:

``imin``
    minimum specific information; lattice-compatible, closed form, works
    for d <= 3.
``opt``
    bivariate only; unique information from the constrained optimization
    in :mod:`pidcausal.broja`.

The supervariable helpers reduce a d-variable system to bivariate queries
by lumping every variable other than the probe and the target into one
composite source.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from . import broja
from .lattice import Antichain, AtomMap, enumerate_lattice, imin_redundancy, moebius_atoms
from .probcore import (
    JointTable,
    ProbabilityError,
    _names,
    marginal_array,
    mutual_information,
)

ZERO_THRESHOLD = 1e-7
ATOM_CLAMP = 1e-9
OPT_CLAMP = 1e-7
SUPERVARIABLE_CAP = 4096


class SupervariableCapError(ProbabilityError):
    pass


@dataclass(frozen=True)
class Measure:
    name: str
    lattice_compatible: bool
    # desideratum id -> "proven" | "empirical" | "violated"
    desiderata: dict = field(default_factory=dict, compare=False, hash=False)


IMIN = Measure("imin", True, {"D1": "proven", "D2": "proven", "D3": "violated"})
OPT = Measure("opt", False, {"D1": "proven", "D2": "empirical", "D3": "violated"})
MEASURES = {m.name: m for m in (IMIN, OPT)}


def get_measure(measure) -> Measure:
    if isinstance(measure, Measure):
        return measure
    try:
        return MEASURES[measure]
    except KeyError:
        raise ValueError(f"unknown measure {measure!r}; choose from {sorted(MEASURES)}") from None


@dataclass(frozen=True)
class PIDAtoms:
    redundant: float
    unique_1: float
    unique_2: float
    synergistic: float
    measure: str
    sources: tuple = ()
    target: tuple = ()

    @property
    def total(self) -> float:
        return self.redundant + self.unique_1 + self.unique_2 + self.synergistic

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.redundant, self.unique_1, self.unique_2, self.synergistic)

    def to_json(self) -> dict:
        d = asdict(self)
        d["sources"] = [list(s) for s in self.sources]
        d["target"] = list(self.target)
        return d


@dataclass(frozen=True)
class SupervariableQuery:
    target: str
    probe: str
    rest: tuple

    @classmethod
    def for_table(cls, table: JointTable, target: str, probe: str) -> "SupervariableQuery":
        if target == probe:
            raise ProbabilityError("probe and target must differ")
        table.variable(target), table.variable(probe)
        return cls(target, probe, tuple(n for n in table.names if n not in (target, probe)))


def _check_sets(*groups):
    seen = set()
    for g in groups:
        if not g:
            raise ProbabilityError("PID argument sets must be non-empty")
        for n in g:
            if n in seen:
                raise ProbabilityError(f"variable {n!r} appears in more than one PID argument")
            seen.add(n)


def _clamp_atom(v: float, clamp: float) -> float:
    if v < 0:
        if v < -clamp:
            raise ArithmeticError(f"PID atom {v!r} is negative beyond tolerance {clamp}")
        return 0.0
    return v


def flat_triple(table: JointTable, target, s1, s2) -> np.ndarray:
    """Joint laid out as (target, s1, s2) with each group flattened."""
    groups = [target, s1, s2]
    allnames = [n for g in groups for n in g]
    arr = marginal_array(table, allnames)
    order = table.canonical(allnames)
    pos = {n: i for i, n in enumerate(order)}
    perm = [pos[n] for g in groups for n in table.canonical(g)]
    arr = np.transpose(arr, perm)
    return arr.reshape(table.cardinality(target), table.cardinality(s1), table.cardinality(s2))


def _imin_bivariate(table, s1, s2, target):
    lat = enumerate_lattice(2)
    red = {a: imin_redundancy(table, [s1, s2], a, target) for a in lat}
    atoms = moebius_atoms(lat, red)
    return (
        atoms[Antichain([[1], [2]])],
        atoms[Antichain([[1]])],
        atoms[Antichain([[2]])],
        atoms[Antichain([[1, 2]])],
    )


def _opt_bivariate(table, s1, s2, target):
    p = flat_triple(table, target, s1, s2)
    sol = broja.solve(p)
    ui1, ui2, i_q = broja.cond_mi_bits(sol.q)
    i_1 = mutual_information(table, s1, target)
    i_all = mutual_information(table, list(s1) + list(s2), target)
    red = i_1 - ui1
    syn = i_all - i_q
    return red, ui1, ui2, syn


def pid_bivariate(table: JointTable, s1, s2, target, measure="imin") -> PIDAtoms:
    s1, s2, target = _names(s1), _names(s2), _names(target)
    _check_sets(s1, s2, target)
    m = get_measure(measure)
    if m is OPT:
        raw = _opt_bivariate(table, s1, s2, target)
        clamp = OPT_CLAMP
    else:
        raw = _imin_bivariate(table, s1, s2, target)
        clamp = ATOM_CLAMP
    vals = [_clamp_atom(v, clamp) for v in raw]
    return PIDAtoms(*vals, measure=m.name,
                    sources=(table.canonical(s1), table.canonical(s2)),
                    target=table.canonical(target))


def _check_cap(table: JointTable, names, cap: int):
    card = table.cardinality(names) if names else 1
    if card > cap:
        raise SupervariableCapError(
            f"supervariable {list(names)} has {card} states, above the cap of {cap}")


def unique_info_vs_rest(table: JointTable, q: SupervariableQuery, measure="imin",
                        cap: int = SUPERVARIABLE_CAP) -> float:
    """Unique information of the probe about the target, against the rest lumped together."""
    if not q.rest:
        return mutual_information(table, [q.probe], [q.target])
    _check_cap(table, q.rest, cap)
    return pid_bivariate(table, [q.probe], list(q.rest), [q.target], measure).unique_1


def synergy_pair(table: JointTable, xj: str, xk: str, target: str, measure="imin") -> float:
    if len({xj, xk, target}) != 3:
        raise ProbabilityError("synergy_pair needs three distinct variables")
    return pid_bivariate(table, [xj], [xk], [target], measure).synergistic


def pid_trivariate(table: JointTable, sources: Sequence, target, measure="imin") -> AtomMap:
    m = get_measure(measure)
    if len(sources) > 3:
        raise ValueError("at most three sources are supported")
    if not m.lattice_compatible:
        raise ValueError(f"measure {m.name!r} is bivariate only; use 'imin' for three sources")
    sources = [_names(s) for s in sources]
    target = _names(target)
    _check_sets(*sources, target)
    lat = enumerate_lattice(len(sources))
    red = {a: imin_redundancy(table, sources, a, target) for a in lat}
    return moebius_atoms(lat, red)


# -- desiderata 2 and 3 --------------------------------------------------------

@dataclass(frozen=True)
class MonotonicityScenario:
    """Augment ``other`` with ``augment`` and watch the atoms of the bivariate PID."""
    probe: tuple
    other: tuple
    augment: tuple
    target: tuple


@dataclass(frozen=True)
class MonotonicityReport:
    measure: str
    before: PIDAtoms
    after: PIDAtoms
    unique_monotone: bool          # probe's unique info does not grow
    info_monotone: dict            # atom name -> does not shrink (atoms involving the augmented source)
    tol: float

    @property
    def passed(self) -> bool:
        return self.unique_monotone and all(self.info_monotone.values())

    def to_json(self) -> dict:
        return {
            "measure": self.measure,
            "before": self.before.to_json(),
            "after": self.after.to_json(),
            "desideratum_2": self.unique_monotone,
            "desideratum_3": dict(self.info_monotone),
            "tol": self.tol,
        }


def check_desideratum_monotonicity(table: JointTable, scenario: MonotonicityScenario,
                                   measure="imin", tol: float = 1e-9) -> MonotonicityReport:
    probe, other = list(scenario.probe), list(scenario.other)
    aug, target = list(scenario.augment), list(scenario.target)
    before = pid_bivariate(table, probe, other, target, measure)
    after = pid_bivariate(table, probe, other + aug, target, measure)
    unique_ok = after.unique_1 <= before.unique_1 + tol
    info_ok = {
        "redundant": after.redundant >= before.redundant - tol,
        "unique_augmented": after.unique_2 >= before.unique_2 - tol,
        "synergistic": after.synergistic >= before.synergistic - tol,
    }
    return MonotonicityReport(get_measure(measure).name, before, after, unique_ok, info_ok, tol)
