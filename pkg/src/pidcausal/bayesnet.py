"""Bayesian networks over discrete variables.

Structure (:class:`Dag`), conditional probability tables, exact joint
synthesis, d-separation, Markov blankets and the assumption checkers used to
gate the discovery batteries.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .pid import SUPERVARIABLE_CAP, ZERO_THRESHOLD, SupervariableQuery, unique_info_vs_rest
from .probcore import (
    CI_TOL,
    MAX_DENSE_STATES,
    JointTable,
    ProbabilityError,
    TableSizeError,
    UnknownVariableError,
    Variable,
    conditional_mutual_information,
    marginal_array,
    mutual_information,
)

ROW_TOL = 1e-12
MAX_RANDOM_NODES = 7
DEGENERACY_GAP = 0.05
DEFAULT_SUBSET_CAP = 4096


class StructureError(ValueError):
    pass


@dataclass(frozen=True)
class Dag:
    nodes: tuple
    edges: frozenset

    def __init__(self, nodes: Sequence[str], edges=()):
        nodes = tuple(nodes)
        if len(set(nodes)) != len(nodes):
            raise StructureError(f"duplicate node names in {list(nodes)}")
        edge_list = [tuple(e) for e in edges]
        es = frozenset(edge_list)
        if len(es) != len(edge_list):
            raise StructureError("duplicate edges")
        known = set(nodes)
        for p, c in es:
            if p not in known or c not in known:
                raise UnknownVariableError(f"edge ({p}, {c}) refers to an unknown node")
            if p == c:
                raise StructureError(f"self-loop on {p}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", es)
        self.topological_order()

    def parents(self, x: str) -> tuple:
        self._check(x)
        return tuple(n for n in self.nodes if (n, x) in self.edges)

    def children(self, x: str) -> tuple:
        self._check(x)
        return tuple(n for n in self.nodes if (x, n) in self.edges)

    def adjacent(self, a: str, b: str) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges

    def skeleton(self) -> frozenset:
        return frozenset(frozenset(e) for e in self.edges)

    def colliders(self) -> list[tuple[str, str, str]]:
        """Every (i, j, k) with i -> j <- k, i before k in node order."""
        out = []
        for j in self.nodes:
            pa = self.parents(j)
            for i, k in itertools.combinations(pa, 2):
                out.append((i, j, k))
        return out

    def _check(self, x: str):
        if x not in self.nodes:
            raise UnknownVariableError(f"unknown node {x!r}")

    def topological_order(self) -> tuple:
        indeg = {n: 0 for n in self.nodes}
        for _, c in self.edges:
            indeg[c] += 1
        ready = [n for n in self.nodes if indeg[n] == 0]
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for c in self.nodes:
                if (n, c) in self.edges:
                    indeg[c] -= 1
                    if indeg[c] == 0:
                        ready.append(c)
        if len(order) != len(self.nodes):
            raise StructureError("graph has a directed cycle")
        return tuple(order)

    def sorted_edges(self) -> list[tuple[str, str]]:
        pos = {n: i for i, n in enumerate(self.nodes)}
        return sorted(self.edges, key=lambda e: (pos[e[0]], pos[e[1]]))


@dataclass(frozen=True)
class Cpt:
    """P(child | parents) as an array indexed ``[*parent_states, child_state]``."""
    child: str
    parents: tuple
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.array(self.table, dtype=np.float64)
        object.__setattr__(self, "parents", tuple(self.parents))
        if t.ndim != len(self.parents) + 1:
            raise ProbabilityError(f"CPT for {self.child} has {t.ndim} axes, expected {len(self.parents) + 1}")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ProbabilityError(f"CPT for {self.child} has negative or non-finite entries")
        sums = t.sum(axis=-1)
        bad = np.argwhere(np.atleast_1d(np.abs(sums - 1.0) > ROW_TOL).reshape(sums.shape or (1,)))
        if len(bad):
            row = tuple(int(i) for i in bad[0])[:sums.ndim]
            raise ProbabilityError(f"CPT row {row} for {self.child} sums to {sums[row]!r}")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def rows(self):
        for idx in itertools.product(*(range(s) for s in self.table.shape[:-1])):
            yield idx, self.table[idx]


@dataclass(frozen=True)
class BayesianNetwork:
    variables: tuple
    dag: Dag
    cpts: Mapping

    def __init__(self, variables: Sequence[Variable], dag: Dag, cpts):
        variables = tuple(variables)
        if tuple(v.name for v in variables) != dag.nodes:
            raise StructureError("variable list and DAG nodes must agree in order")
        cmap = {c.child: c for c in cpts}
        if set(cmap) != set(dag.nodes):
            raise StructureError("need exactly one CPT per node")
        cards = {v.name: v.cardinality for v in variables}
        for n in dag.nodes:
            c = cmap[n]
            if set(c.parents) != set(dag.parents(n)) or len(c.parents) != len(dag.parents(n)):
                raise StructureError(f"CPT parents {list(c.parents)} for {n} differ from DAG parents {list(dag.parents(n))}")
            want = tuple(cards[p] for p in c.parents) + (cards[n],)
            if c.table.shape != want:
                raise ProbabilityError(f"CPT for {n} has shape {c.table.shape}, expected {want}")
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "dag", dag)
        object.__setattr__(self, "cpts", {n: cmap[n] for n in dag.nodes})

    @property
    def names(self) -> tuple:
        return self.dag.nodes

    def cardinality(self, name: str) -> int:
        return next(v.cardinality for v in self.variables if v.name == name)


def joint_from_bn(bn: BayesianNetwork) -> JointTable:
    shape = tuple(v.cardinality for v in bn.variables)
    size = int(np.prod(shape, dtype=np.int64))
    if size > MAX_DENSE_STATES:
        raise TableSizeError(f"joint state space {size} exceeds the dense cap {MAX_DENSE_STATES}")
    pos = {n: i for i, n in enumerate(bn.names)}
    joint = np.ones(shape)
    for n in bn.dag.topological_order():
        cpt = bn.cpts[n]
        axes = [pos[p] for p in cpt.parents] + [pos[n]]
        # move CPT axes into table order, then broadcast
        order = np.argsort(axes)
        arr = np.transpose(cpt.table, order)
        bshape = [1] * len(shape)
        for a in sorted(axes):
            bshape[a] = shape[a]
        joint = joint * arr.reshape(bshape)
    return JointTable(bn.variables, joint / joint.sum())


def cpt_from_table(table: JointTable, child: str, parents: Sequence[str]) -> Cpt:
    """Re-derive P(child | parents) from a joint; rows with zero parent mass become uniform."""
    names = list(parents) + [child]
    arr = marginal_array(table, names)
    order = table.canonical(names)
    arr = np.transpose(arr, [order.index(n) for n in names])
    z = arr.sum(axis=-1, keepdims=True)
    k = arr.shape[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        rows = np.where(z > 0, arr / np.where(z > 0, z, 1.0), 1.0 / k)
    return Cpt(child, tuple(parents), rows)


# -- graphical queries ----------------------------------------------------------

def d_separated(dag: Dag, x: str, y: str, c=()) -> bool:
    """Reachability with collider activation (the ball-bouncing rules)."""
    c = set(c)
    for n in (x, y, *c):
        dag._check(n)
    if x == y:
        raise StructureError("d-separation needs two distinct nodes")
    if x in c or y in c:
        raise StructureError("query nodes may not be in the conditioning set")
    # ancestors of the conditioning set (colliders there are open)
    anc = set()
    stack = list(c)
    while stack:
        n = stack.pop()
        if n in anc:
            continue
        anc.add(n)
        stack.extend(dag.parents(n))
    # states: (node, direction) with "up" = arrived from a child, "down" = from a parent
    seen = set()
    queue = deque([(x, "up")])
    while queue:
        n, d = queue.popleft()
        if (n, d) in seen:
            continue
        seen.add((n, d))
        if n == y:
            return False
        if d == "up" and n not in c:
            for p in dag.parents(n):
                queue.append((p, "up"))
            for ch in dag.children(n):
                queue.append((ch, "down"))
        elif d == "down":
            if n not in c:
                for ch in dag.children(n):
                    queue.append((ch, "down"))
            if n in anc:
                for p in dag.parents(n):
                    queue.append((p, "up"))
    return True


def markov_blanket(dag: Dag, x: str) -> frozenset:
    pa = set(dag.parents(x))
    ch = set(dag.children(x))
    co = {p for c in ch for p in dag.parents(c)}
    return frozenset((pa | ch | co) - {x})


# -- assumption checkers -------------------------------------------------------

def _subsets(pool, cap):
    n = 0
    for k in range(len(pool) + 1):
        for s in itertools.combinations(pool, k):
            n += 1
            if n > cap:
                raise ProbabilityError(f"more than {cap} conditioning subsets; raise the cap to check exhaustively")
            yield s


@dataclass(frozen=True)
class CIMismatch:
    x: str
    y: str
    conditioning: tuple
    d_separated: bool
    cmi: float
    kind: str  # "missing-independence" | "extra-independence"

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y, "conditioning": list(self.conditioning),
                "d_separated": self.d_separated, "cmi": self.cmi, "kind": self.kind}


@dataclass(frozen=True)
class FaithfulnessReport:
    checked: int
    mismatches: tuple
    tol: float

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def to_json(self) -> dict:
        return {"checked": self.checked, "passed": self.passed, "tol": self.tol,
                "mismatches": [m.to_json() for m in self.mismatches]}


def check_faithfulness(bn: BayesianNetwork, tol: float = CI_TOL, table: JointTable | None = None,
                       cap: int = DEFAULT_SUBSET_CAP) -> FaithfulnessReport:
    """Compare every CI statement on the joint with d-separation, both directions."""
    table = joint_from_bn(bn) if table is None else table
    names = bn.names
    out = []
    checked = 0
    for x, y in itertools.combinations(names, 2):
        pool = [n for n in names if n not in (x, y)]
        for cset in _subsets(pool, cap):
            checked += 1
            sep = d_separated(bn.dag, x, y, cset)
            cmi = conditional_mutual_information(table, [x], [y], list(cset))
            indep = cmi <= tol
            if sep and not indep:
                out.append(CIMismatch(x, y, cset, True, cmi, "missing-independence"))
            elif indep and not sep:
                out.append(CIMismatch(x, y, cset, False, cmi, "extra-independence"))
    return FaithfulnessReport(checked, tuple(out), tol)


@dataclass(frozen=True)
class AmplificationEntry:
    i: str
    j: str
    k: str
    conditional: float
    marginal: float

    @property
    def margin(self) -> float:
        return self.conditional - self.marginal

    def to_json(self) -> dict:
        return {"pair": [self.i, self.k], "collider": self.j, "conditional": self.conditional,
                "marginal": self.marginal, "margin": self.margin}


@dataclass(frozen=True)
class AmplificationReport:
    entries: tuple
    tol: float

    @property
    def violations(self) -> tuple:
        return tuple(e for e in self.entries if not e.margin > self.tol)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"passed": self.passed, "tol": self.tol, "entries": [e.to_json() for e in self.entries],
                "violations": [e.to_json() for e in self.violations]}


def amplification_entries(table: JointTable, triples) -> tuple:
    out = []
    for i, j, k in triples:
        out.append(AmplificationEntry(
            i, j, k,
            conditional_mutual_information(table, [i], [k], [j]),
            mutual_information(table, [i], [k]),
        ))
    return tuple(out)


def check_collider_amplification(bn: BayesianNetwork, tol: float = CI_TOL,
                                 table: JointTable | None = None) -> AmplificationReport:
    table = joint_from_bn(bn) if table is None else table
    return AmplificationReport(amplification_entries(table, bn.dag.colliders()), tol)


@dataclass(frozen=True)
class RelevanceEntry:
    target: str
    source: str
    min_cmi: float
    argmin: tuple
    unique: float | None

    def to_json(self) -> dict:
        return {"target": self.target, "source": self.source, "min_cmi": self.min_cmi,
                "argmin": list(self.argmin), "unique": self.unique}


@dataclass(frozen=True)
class RelevanceReport:
    measure: str
    entries: tuple         # every pair that is dependent under all conditioning sets
    failures: tuple        # ... of which the unique information is not positive
    threshold: float

    @property
    def passed(self) -> bool:
        return not self.failures

    def failed_targets(self) -> list[str]:
        return sorted({f.target for f in self.failures})

    def to_json(self) -> dict:
        return {"measure": self.measure, "passed": self.passed, "threshold": self.threshold,
                "entries": [e.to_json() for e in self.entries],
                "failures": [f.to_json() for f in self.failures]}


def check_persistent_relevance(model, target: str | None = None, measure="imin",
                               threshold: float = ZERO_THRESHOLD, ci_tol: float = CI_TOL,
                               cap: int = DEFAULT_SUBSET_CAP,
                               supervariable_cap: int = SUPERVARIABLE_CAP) -> RelevanceReport:
    """Persistently relevant sources must carry positive unique information.

    ``model`` is a :class:`BayesianNetwork` or any object with a joint table
    (a :class:`JointTable` itself is accepted).  With ``target=None`` every
    variable is tried as the target.
    """
    table = _as_table(model)
    targets = [target] if target is not None else list(table.names)
    entries, failures = [], []
    for t in targets:
        table.variable(t)
        for s in table.names:
            if s == t:
                continue
            pool = [n for n in table.names if n not in (s, t)]
            best = (float("inf"), ())
            for cset in _subsets(pool, cap):
                v = conditional_mutual_information(table, [s], [t], list(cset))
                if v < best[0]:
                    best = (v, cset)
                if v <= ci_tol:
                    break
            if best[0] <= ci_tol:
                continue
            u = unique_info_vs_rest(table, SupervariableQuery.for_table(table, t, s), measure, supervariable_cap)
            e = RelevanceEntry(t, s, best[0], tuple(best[1]), u)
            entries.append(e)
            if not u > threshold:
                failures.append(e)
    name = measure if isinstance(measure, str) else measure.name
    return RelevanceReport(name, tuple(entries), tuple(failures), threshold)


def _as_table(model) -> JointTable:
    if isinstance(model, JointTable):
        return model
    if isinstance(model, BayesianNetwork):
        return joint_from_bn(model)
    joint = getattr(model, "joint", None)
    if callable(joint):
        return joint()
    raise TypeError(f"cannot derive a joint table from {type(model).__name__}")


# -- random generation -----------------------------------------------------------

def _cpt_is_degenerate(t: np.ndarray, gap: float) -> bool:
    """A parent is ignorable if flipping it never moves the child by more than ``gap``."""
    npar = t.ndim - 1
    for a in range(npar):
        moved = False
        for i, j in itertools.combinations(range(t.shape[a]), 2):
            diff = np.abs(np.take(t, i, axis=a) - np.take(t, j, axis=a)).max(axis=-1)
            if np.all(diff > gap):
                moved = True
                break
        if not moved:
            return True
    return False


def random_bn(node_count: int, edge_probability: float, cpt_concentration: float = 1.0,
              seed: int = 0, cardinality: int = 2, max_tries: int = 1000) -> BayesianNetwork:
    """Random DAG over a random topological order with Dirichlet CPT rows.

    CPTs in which some parent can be switched without moving every child row
    by more than 0.05 are resampled.
    """
    if not 1 <= node_count <= MAX_RANDOM_NODES:
        raise ValueError(f"node_count must be in 1..{MAX_RANDOM_NODES}")
    if not 0.0 <= edge_probability <= 1.0:
        raise ValueError("edge_probability must lie in [0, 1]")
    if not cpt_concentration > 0:
        raise ValueError("cpt_concentration must be positive")
    if cardinality < 2:
        raise ValueError("cardinality must be at least 2")
    rng = np.random.default_rng(seed)
    names = [f"X{i + 1}" for i in range(node_count)]
    order = list(rng.permutation(node_count))
    edges = []
    for a in range(node_count):
        for b in range(a + 1, node_count):
            if rng.random() < edge_probability:
                edges.append((names[order[a]], names[order[b]]))
    dag = Dag(names, edges)
    variables = [Variable(n, cardinality) for n in names]
    cpts = []
    for n in names:
        pa = dag.parents(n)
        shape = (cardinality,) * len(pa)
        for _ in range(max_tries):
            t = rng.dirichlet([cpt_concentration] * cardinality, size=shape or None)
            t = np.asarray(t).reshape(shape + (cardinality,))
            if not pa or not _cpt_is_degenerate(t, DEGENERACY_GAP):
                break
        else:
            raise RuntimeError(f"could not draw a non-degenerate CPT for {n} in {max_tries} tries")
        cpts.append(Cpt(n, pa, t))
    return BayesianNetwork(variables, dag, cpts)


# -- serialization -----------------------------------------------------------------

def bn_to_dict(bn: BayesianNetwork) -> dict:
    return {
        "nodes": [{"name": v.name, "cardinality": v.cardinality} for v in bn.variables],
        "edges": [list(e) for e in bn.dag.sorted_edges()],
        "cpts": [
            {"child": c.child, "parents": list(c.parents),
             "rows": [{"parents": list(idx), "p": [float(x) for x in row]} for idx, row in c.rows()]}
            for c in bn.cpts.values()
        ],
    }


def bn_from_dict(data: Mapping) -> BayesianNetwork:
    try:
        variables = [Variable(str(v["name"]), int(v["cardinality"])) for v in data["nodes"]]
        dag = Dag([v.name for v in variables], [tuple(e) for e in data.get("edges", [])])
        cards = {v.name: v.cardinality for v in variables}
        cpts = []
        for c in data["cpts"]:
            child, parents = c["child"], tuple(c["parents"])
            shape = tuple(cards[p] for p in parents) + (cards[child],)
            t = np.full(shape, np.nan)
            for r in c["rows"]:
                t[tuple(r["parents"])] = r["p"]
            if np.isnan(t).any():
                raise ProbabilityError(f"CPT for {child} does not cover every parent assignment")
            cpts.append(Cpt(child, parents, t))
    except (KeyError, TypeError, IndexError) as exc:
        raise ProbabilityError(f"malformed network JSON: {exc!r}") from None
    return BayesianNetwork(variables, dag, cpts)


def to_dot(dag: Dag, name: str = "G") -> str:
    lines = [f"digraph {name} {{"]
    lines += [f'  "{n}";' for n in dag.nodes]
    lines += [f'  "{p}" -> "{c}";' for p, c in dag.sorted_edges()]
    lines.append("}")
    return "\n".join(lines) + "\n"
