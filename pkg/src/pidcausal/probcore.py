"""Exact finite discrete probability over named variables.

A :class:`JointTable` holds a dense numpy array whose axes follow the
table's variable order.  Every information quantity is in bits and every
sum runs over axes in the table's own order, so results do not depend on
the order in which callers list variables.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_DENSE_STATES = 2**20
NORM_TOL = 1e-12
CLAMP_TOL = 1e-9
CI_TOL = 1e-10


class ProbabilityError(ValueError):
    """Base class for invalid probabilistic input."""


class UnknownVariableError(ProbabilityError):
    pass


class UnsupportedEvidenceError(ProbabilityError):
    pass


class TableSizeError(ProbabilityError):
    pass


@dataclass(frozen=True, order=True)
class Variable:
    name: str
    cardinality: int

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ProbabilityError(f"variable name must be a non-empty string, got {self.name!r}")
        if int(self.cardinality) < 2:
            raise ProbabilityError(f"variable {self.name} needs at least two states")


@dataclass(frozen=True)
class CIQuery:
    x: str
    y: str
    conditioning: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "conditioning", frozenset(self.conditioning))
        if self.x == self.y:
            raise ProbabilityError("CI query needs two distinct variables")
        if self.x in self.conditioning or self.y in self.conditioning:
            raise ProbabilityError("CI query variables may not appear in the conditioning set")


def _names(vs) -> list[str]:
    if isinstance(vs, str):
        return [vs]
    return [v.name if isinstance(v, Variable) else v for v in vs]


class JointTable:
    """Dense joint distribution.  Immutable after construction."""

    __slots__ = ("_variables", "_p", "_index")

    def __init__(self, variables: Sequence[Variable], probabilities, *, check: bool = True):
        variables = tuple(variables)
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise ProbabilityError(f"duplicate variable names in {names}")
        shape = tuple(int(v.cardinality) for v in variables)
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if size > MAX_DENSE_STATES:
            raise TableSizeError(f"joint state space {size} exceeds the dense cap {MAX_DENSE_STATES}")
        p = np.array(probabilities, dtype=np.float64).reshape(shape)
        if check:
            if not np.all(np.isfinite(p)) or np.any(p < 0):
                raise ProbabilityError("probabilities must be finite and non-negative")
            total = p.sum()
            if abs(total - 1.0) > NORM_TOL:
                raise ProbabilityError(f"probabilities sum to {total!r}, not 1")
        p.setflags(write=False)
        self._variables = variables
        self._p = p
        self._index = {n: i for i, n in enumerate(names)}

    @classmethod
    def from_unnormalized(cls, variables: Sequence[Variable], weights) -> "JointTable":
        w = np.array(weights, dtype=np.float64)
        total = w.sum()
        if not total > 0:
            raise ProbabilityError("weights have no positive mass")
        return cls(variables, w / total)

    @classmethod
    def from_function(cls, variables: Sequence[Variable], fn) -> "JointTable":
        """Build from ``fn(state_tuple) -> weight`` and normalize."""
        shape = tuple(v.cardinality for v in variables)
        w = np.zeros(shape)
        for state in itertools.product(*(range(c) for c in shape)):
            w[state] = fn(state)
        return cls.from_unnormalized(variables, w)

    @property
    def variables(self) -> tuple[Variable, ...]:
        return self._variables

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self._variables)

    @property
    def array(self) -> np.ndarray:
        return self._p

    def variable(self, name: str) -> Variable:
        return self._variables[self._axis(name)]

    def cardinality(self, names) -> int:
        return int(np.prod([self.variable(n).cardinality for n in _names(names)], dtype=np.int64))

    def _axis(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownVariableError(f"unknown variable {name!r}; table has {list(self._index)}") from None

    def axes(self, names) -> list[int]:
        """Axis indices of ``names`` sorted into table order."""
        return sorted(self._axis(n) for n in _names(names))

    def canonical(self, names) -> tuple[str, ...]:
        return tuple(self._variables[a].name for a in self.axes(names))

    def prob(self, assignment: Mapping[str, int]) -> float:
        m = marginalize(self, list(assignment))
        return float(m.array[tuple(assignment[n] for n in m.names)])

    def items(self, include_zero: bool = False):
        for state in itertools.product(*(range(v.cardinality) for v in self._variables)):
            p = float(self._p[state])
            if include_zero or p > 0:
                yield state, p

    def allclose(self, other: "JointTable", atol: float = 1e-12) -> bool:
        return self.names == other.names and np.allclose(self._p, other._p, atol=atol, rtol=0)

    def __repr__(self):
        vs = ", ".join(f"{v.name}:{v.cardinality}" for v in self._variables)
        return f"JointTable({vs})"


def marginal_array(table: JointTable, names) -> np.ndarray:
    """Marginal over ``names`` with axes in table order."""
    keep = table.axes(names)
    drop = tuple(a for a in range(len(table.variables)) if a not in keep)
    return table.array.sum(axis=drop) if drop else table.array


def marginalize(table: JointTable, keep) -> JointTable:
    keep = _names(keep)
    if not keep:
        raise ProbabilityError("marginalize needs a non-empty set of variables to keep")
    axes = table.axes(keep)
    if len(axes) != len(set(keep)):
        raise ProbabilityError("duplicate variables in keep set")
    arr = marginal_array(table, keep)
    return JointTable([table.variables[a] for a in axes], arr, check=False)


def condition(table: JointTable, evidence: Mapping[str, int]) -> JointTable:
    if not evidence:
        return table
    idx: list = [slice(None)] * len(table.variables)
    for name, state in evidence.items():
        ax = table._axis(name)
        card = table.variables[ax].cardinality
        if not 0 <= int(state) < card:
            raise ProbabilityError(f"state {state} out of range for {name} (cardinality {card})")
        idx[ax] = int(state)
    sub = table.array[tuple(idx)]
    mass = float(sub.sum())
    if not mass > 0:
        raise UnsupportedEvidenceError(f"evidence {dict(evidence)} has zero probability")
    rest = [v for v in table.variables if v.name not in evidence]
    if not rest:
        return JointTable([], np.array(1.0), check=False)
    return JointTable(rest, sub / mass, check=False)


def _plogp_sum(arr: np.ndarray) -> float:
    flat = arr.ravel()
    nz = flat[flat > 0]
    return float(-(nz * np.log2(nz)).sum())


def entropy(table: JointTable, subset) -> float:
    subset = _names(subset)
    if not subset:
        raise ProbabilityError("entropy of an empty set of variables is undefined here")
    return _plogp_sum(marginal_array(table, subset))


def _joint_entropy(table: JointTable, names: Sequence[str]) -> float:
    return entropy(table, names) if names else 0.0


def _clamp(value: float, what: str) -> float:
    if value < 0:
        if value < -CLAMP_TOL:
            raise ArithmeticError(f"{what} came out at {value!r}, beyond rounding tolerance")
        return 0.0
    return value


def _check_disjoint(*groups):
    seen: set[str] = set()
    for g in groups:
        for n in g:
            if n in seen:
                raise ProbabilityError(f"variable {n!r} appears in more than one argument set")
            seen.add(n)


def mutual_information(table: JointTable, a, b) -> float:
    a, b = _names(a), _names(b)
    if not a or not b:
        raise ProbabilityError("mutual information needs non-empty argument sets")
    _check_disjoint(a, b)
    value = _joint_entropy(table, a) + _joint_entropy(table, b) - entropy(table, a + b)
    return _clamp(value, "mutual information")


def conditional_mutual_information(table: JointTable, a, b, c=()) -> float:
    a, b, c = _names(a), _names(b), _names(c)
    if not a or not b:
        raise ProbabilityError("conditional mutual information needs non-empty a and b")
    _check_disjoint(a, b, c)
    if not c:
        return mutual_information(table, a, b)
    value = (
        entropy(table, a + c) + entropy(table, b + c)
        - entropy(table, a + b + c) - entropy(table, c)
    )
    return _clamp(value, "conditional mutual information")


def flat_pair(table: JointTable, a, b) -> np.ndarray:
    """Joint of two variable groups as a 2-D array (flattened group states)."""
    a, b = _names(a), _names(b)
    _check_disjoint(a, b)
    joint = marginal_array(table, a + b)
    order = table.axes(a + b)
    a_axes = set(table.axes(a))
    perm = [i for i, ax in enumerate(order) if ax in a_axes] + [i for i, ax in enumerate(order) if ax not in a_axes]
    joint = np.transpose(joint, perm)
    return joint.reshape(table.cardinality(a), table.cardinality(b))


def specific_information_vector(table: JointTable, target, a) -> np.ndarray:
    """Specific information I(a; T=t) for every target state t (0 where p(t)=0)."""
    pat = flat_pair(table, a, target)
    pa = pat.sum(axis=1)
    pt = pat.sum(axis=0)
    out = np.zeros(pat.shape[1])
    for t in range(pat.shape[1]):
        if pt[t] <= 0:
            continue
        cond = pat[:, t] / pt[t]
        nz = cond > 0
        out[t] = float((cond[nz] * (np.log2(cond[nz]) - np.log2(pa[nz]))).sum())
    return out


def specific_information(table: JointTable, target, t_state, a) -> float:
    """Σ_a p(a|t) [log p(a|t) − log p(a)] for a single (flattened) target state."""
    target = _names(target)
    pt = marginal_array(table, target).ravel()
    t = int(np.ravel_multi_index(t_state, [table.variable(n).cardinality for n in table.canonical(target)])) \
        if isinstance(t_state, (tuple, list)) else int(t_state)
    if not 0 <= t < pt.size:
        raise ProbabilityError(f"target state {t_state} out of range")
    if not pt[t] > 0:
        raise UnsupportedEvidenceError(f"target state {t_state} has zero probability")
    return float(specific_information_vector(table, target, a)[t])


def is_conditionally_independent(table: JointTable, q: CIQuery, tol: float = CI_TOL) -> bool:
    return conditional_mutual_information(table, [q.x], [q.y], sorted(q.conditioning)) <= tol


def min_conditional_mi(table: JointTable, x: str, y: str, pool=None):
    """Smallest I(x; y | C) over all C drawn from ``pool`` (default: all other variables).

    Returns ``(value, C)``; subsets are visited by size then table order.
    """
    if pool is None:
        pool = [n for n in table.names if n not in (x, y)]
    best = (float("inf"), ())
    for k in range(len(pool) + 1):
        for c in itertools.combinations(pool, k):
            v = conditional_mutual_information(table, [x], [y], list(c))
            if v < best[0]:
                best = (v, c)
    return best


def empirical_from_samples(rows: Iterable[Sequence[int]], schema: Sequence[Variable]) -> JointTable:
    """Plug-in frequency table.  Row order does not affect the result."""
    schema = list(schema)
    shape = tuple(v.cardinality for v in schema)
    counts = np.zeros(shape, dtype=np.int64)
    n = 0
    for i, row in enumerate(rows):
        row = list(row)
        if len(row) != len(schema):
            raise ProbabilityError(f"row {i}: expected {len(schema)} values, got {len(row)}")
        try:
            state = tuple(int(x) for x in row)
        except (TypeError, ValueError):
            raise ProbabilityError(f"row {i}: non-integer state in {row!r}") from None
        for v, s in zip(schema, state):
            if not 0 <= s < v.cardinality:
                raise ProbabilityError(f"row {i}: state {s} invalid for {v.name} (cardinality {v.cardinality})")
        counts[state] += 1
        n += 1
    if n == 0:
        raise ProbabilityError("no sample rows")
    return JointTable(schema, counts / n, check=False)


# -- serialization ---------------------------------------------------------

def table_to_dict(table: JointTable) -> dict:
    return {
        "variables": [{"name": v.name, "cardinality": v.cardinality} for v in table.variables],
        "probabilities": [{"state": list(s), "p": p} for s, p in table.items()],
    }


def table_from_dict(data: Mapping) -> JointTable:
    try:
        variables = [Variable(str(v["name"]), int(v["cardinality"])) for v in data["variables"]]
        entries = data["probabilities"]
    except (KeyError, TypeError) as exc:
        raise ProbabilityError(f"joint table JSON is missing field {exc}") from None
    shape = tuple(v.cardinality for v in variables)
    p = np.zeros(shape)
    seen = set()
    for i, e in enumerate(entries):
        try:
            state = tuple(int(s) for s in e["state"])
            mass = float(e["p"])
        except (KeyError, TypeError, ValueError):
            raise ProbabilityError(f"probabilities[{i}] is malformed: {e!r}") from None
        if len(state) != len(variables) or any(not 0 <= s < c for s, c in zip(state, shape)):
            raise ProbabilityError(f"probabilities[{i}] has invalid state {list(state)}")
        if state in seen:
            raise ProbabilityError(f"probabilities[{i}] repeats state {list(state)}")
        seen.add(state)
        p[state] = mass
    return JointTable(variables, p)


def read_samples_csv(text: str, schema: Sequence[Variable] | None = None) -> JointTable:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ProbabilityError("empty CSV input") from None
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            rows.append([int(c) for c in row])
        except ValueError:
            raise ProbabilityError(f"CSV line {lineno}: non-integer state in {row!r}") from None
    if schema is None:
        if not rows:
            raise ProbabilityError("CSV has no data rows")
        width = len(header)
        for i, r in enumerate(rows):
            if len(r) != width:
                raise ProbabilityError(f"row {i}: expected {width} values, got {len(r)}")
        cards = [max(2, max(r[j] for r in rows) + 1) for j in range(width)]
        schema = [Variable(h, c) for h, c in zip(header, cards)]
    elif [v.name for v in schema] != header:
        raise ProbabilityError(f"CSV header {header} does not match schema")
    return empirical_from_samples(rows, schema)


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
