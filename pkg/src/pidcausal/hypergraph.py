"""Directed hypergraphs and Bayesian-hypergraph factorizations.

A hyperedge runs from a tail set to a head set.  Head members of one edge
are co-heads; the transitive closure of the co-head relation partitions the
nodes into chain components, and tail-to-head incidences between components
give the canonical DAG.  The joint factorizes over chain components, each
conditional being a normalized product of potentials.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bayesnet import AmplificationReport, Dag, StructureError, amplification_entries
from .probcore import (
    CI_TOL,
    MAX_DENSE_STATES,
    JointTable,
    ProbabilityError,
    TableSizeError,
    UnknownVariableError,
    Variable,
    marginal_array,
)

FIT_TOL = 1e-8


class FactorizationError(ProbabilityError):
    pass


@dataclass(frozen=True)
class DirectedHyperedge:
    tail: frozenset
    head: frozenset

    def __init__(self, tail=(), head=()):
        t, h = frozenset(tail), frozenset(head)
        if t & h:
            raise StructureError(f"tail and head overlap on {sorted(t & h)}")
        if not (t or h):
            raise StructureError("a hyperedge needs at least one vertex")
        object.__setattr__(self, "tail", t)
        object.__setattr__(self, "head", h)

    @property
    def support(self) -> frozenset:
        return self.tail | self.head

    def ordered(self, order: Sequence[str]) -> tuple[tuple, tuple]:
        pos = {n: i for i, n in enumerate(order)}
        return (tuple(sorted(self.tail, key=pos.__getitem__)), tuple(sorted(self.head, key=pos.__getitem__)))

    def key(self, order: Sequence[str]):
        pos = {n: i for i, n in enumerate(order)}
        t, h = self.ordered(order)
        return (len(self.support), [pos[n] for n in t], [pos[n] for n in h])

    def label(self, order: Sequence[str] | None = None) -> str:
        t = sorted(self.tail) if order is None else self.ordered(order)[0]
        h = sorted(self.head) if order is None else self.ordered(order)[1]
        return "{" + ",".join(t) + "}->{" + ",".join(h) + "}"

    def to_json(self, order: Sequence[str]) -> dict:
        t, h = self.ordered(order)
        return {"tail": list(t), "head": list(h)}

    def __repr__(self):
        return f"DirectedHyperedge({self.label()})"


def contains(e1: DirectedHyperedge, e2: DirectedHyperedge) -> bool:
    """True when e1's vertex support is a strict subset of e2's."""
    return e1.support < e2.support


@dataclass(frozen=True)
class DirectedHypergraph:
    nodes: tuple
    edges: tuple

    def __init__(self, nodes: Sequence[str], edges: Sequence[DirectedHyperedge] = (), *, check: bool = True):
        nodes = tuple(nodes)
        if len(set(nodes)) != len(nodes):
            raise StructureError(f"duplicate node names in {list(nodes)}")
        seen, es = set(), []
        for e in edges:
            if not e.support <= set(nodes):
                raise UnknownVariableError(f"edge {e.label()} refers to unknown nodes {sorted(e.support - set(nodes))}")
            if e in seen:
                raise StructureError(f"duplicate edge {e.label()}")
            seen.add(e)
            es.append(e)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", tuple(es))
        if check and has_partially_directed_cycle(self):
            raise StructureError("hypergraph has a partially directed cycle")

    def parents(self, x: str) -> frozenset:
        return frozenset(n for e in self.edges if x in e.head for n in e.tail)

    def children(self, x: str) -> frozenset:
        return frozenset(n for e in self.edges if x in e.tail for n in e.head)

    def coheads(self, x: str) -> frozenset:
        return frozenset(n for e in self.edges if x in e.head for n in e.head if n != x)

    def cotails(self, x: str) -> frozenset:
        return frozenset(n for e in self.edges if x in e.tail for n in e.tail if n != x)

    def role(self, j: str, i: str) -> str:
        """Role of ``j`` relative to ``i``: parent, child, co-head, co-tail or none.

        Parent/child/co-head take precedence over co-tail, since those imply
        positive unique information.
        """
        if j in self.parents(i):
            return "parent"
        if j in self.children(i):
            return "child"
        if j in self.coheads(i):
            return "co-head"
        if j in self.cotails(i):
            return "co-tail"
        return "none"


def chain_components(h: DirectedHypergraph) -> list[frozenset]:
    """Partition of the nodes under the co-head relation, in node order."""
    parent = {n: n for n in h.nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in h.edges:
        hs = list(e.head)
        for a, b in zip(hs, hs[1:]):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra
    groups: dict = {}
    for n in h.nodes:
        groups.setdefault(find(n), []).append(n)
    return [frozenset(g) for g in groups.values()]


def _component_index(h: DirectedHypergraph):
    comps = chain_components(h)
    where = {n: i for i, c in enumerate(comps) for n in c}
    return comps, where


def has_partially_directed_cycle(h: DirectedHypergraph) -> bool:
    """Cycle detection over the parent relation after collapsing co-head classes."""
    comps, where = _component_index(h)
    succ = {i: set() for i in range(len(comps))}
    for e in h.edges:
        for t in e.tail:
            for x in e.head:
                a, b = where[t], where[x]
                if a == b:
                    return True
                succ[a].add(b)
    state = {}

    def visit(i):
        state[i] = 1
        for j in succ[i]:
            s = state.get(j, 0)
            if s == 1 or (s == 0 and visit(j)):
                return True
        state[i] = 2
        return False

    return any(state.get(i, 0) == 0 and visit(i) for i in succ)


def component_label(comp, order: Sequence[str]) -> str:
    pos = {n: i for i, n in enumerate(order)}
    return "{" + ",".join(sorted(comp, key=pos.__getitem__)) + "}"


@dataclass(frozen=True)
class CanonicalDag:
    components: tuple      # frozensets of node names
    dag: Dag               # over component labels

    def label(self, comp) -> str:
        return self.dag.nodes[self.components.index(frozenset(comp))]


def canonical_dag(h: DirectedHypergraph) -> CanonicalDag:
    comps, where = _component_index(h)
    labels = [component_label(c, h.nodes) for c in comps]
    edges = set()
    for e in h.edges:
        for t in e.tail:
            for x in e.head:
                a, b = where[t], where[x]
                if a == b:
                    raise StructureError(f"edge {e.label()} points into its own chain component")
                edges.add((labels[a], labels[b]))
    try:
        dag = Dag(labels, sorted(edges))
    except StructureError as exc:
        raise StructureError(f"canonical DAG is cyclic: {exc}") from None
    return CanonicalDag(tuple(comps), dag)


def irreducible_edges(h: DirectedHypergraph) -> list[DirectedHyperedge]:
    return [e for e in h.edges if not any(contains(e, o) for o in h.edges if o is not e)]


def component_edges(h: DirectedHypergraph, comp) -> list[DirectedHyperedge]:
    """Irreducible edges among those heading into one chain component.

    These are the edges that carry potentials for that component's
    conditional.
    """
    comp = frozenset(comp)
    into = [e for e in h.edges if e.head and e.head <= comp]
    return [e for e in into if not any(contains(e, o) for o in into if o is not e)]


def potential_edges(h: DirectedHypergraph) -> list[DirectedHyperedge]:
    out = []
    for c in chain_components(h):
        out.extend(component_edges(h, c))
    order = h.nodes
    return sorted(out, key=lambda e: e.key(order))


def component_parents(h: DirectedHypergraph, comp) -> tuple:
    comp = frozenset(comp)
    pa = {n for e in h.edges if e.head and e.head <= comp for n in e.tail}
    return tuple(n for n in h.nodes if n in pa - comp)


@dataclass(frozen=True)
class Potential:
    """Unnormalized factor; ``values`` is indexed by ``variables`` in order."""
    edge: DirectedHyperedge
    variables: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        object.__setattr__(self, "variables", tuple(self.variables))
        if set(self.variables) != set(self.edge.support) or len(self.variables) != len(self.edge.support):
            raise FactorizationError(f"potential variables {list(self.variables)} do not match edge {self.edge.label()}")
        if v.ndim != len(self.variables):
            raise FactorizationError(f"potential for {self.edge.label()} has {v.ndim} axes, expected {len(self.variables)}")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise FactorizationError(f"potential for {self.edge.label()} has negative or non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class BayesianHypergraph:
    variables: tuple
    structure: DirectedHypergraph
    potentials: Mapping

    def __init__(self, variables: Sequence[Variable], structure: DirectedHypergraph, potentials):
        variables = tuple(variables)
        if tuple(v.name for v in variables) != structure.nodes:
            raise StructureError("variable list and hypergraph nodes must agree in order")
        cards = {v.name: v.cardinality for v in variables}
        pmap = {}
        for p in potentials:
            if p.edge in pmap:
                raise FactorizationError(f"two potentials for {p.edge.label()}")
            want = tuple(cards[n] for n in p.variables)
            if p.values.shape != want:
                raise FactorizationError(f"potential for {p.edge.label()} has shape {p.values.shape}, expected {want}")
            pmap[p.edge] = p
        need = set(potential_edges(structure))
        if set(pmap) != need:
            missing = sorted(e.label() for e in need - set(pmap))
            extra = sorted(e.label() for e in set(pmap) - need)
            raise FactorizationError(f"potentials must cover exactly the irreducible edges; missing {missing}, unexpected {extra}")
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "structure", structure)
        object.__setattr__(self, "potentials", pmap)

    @property
    def names(self) -> tuple:
        return self.structure.nodes

    def joint(self) -> JointTable:
        return joint_from_bh(self)


def _broadcast(values: np.ndarray, variables: Sequence[str], names: Sequence[str], shape) -> np.ndarray:
    pos = {n: i for i, n in enumerate(names)}
    axes = [pos[n] for n in variables]
    arr = np.transpose(values, np.argsort(axes))
    bshape = [1] * len(shape)
    for a in sorted(axes):
        bshape[a] = shape[a]
    return arr.reshape(bshape)


def component_conditional(bh: BayesianHypergraph, comp) -> np.ndarray:
    """P(X_comp | X_pa(comp)) broadcast over the full joint shape."""
    names = bh.names
    shape = tuple(v.cardinality for v in bh.variables)
    pos = {n: i for i, n in enumerate(names)}
    f = np.ones([1] * len(shape))
    for e in component_edges(bh.structure, comp):
        p = bh.potentials[e]
        f = f * _broadcast(p.values, p.variables, names, shape)
    # make sure every component axis is materialized
    f = f * np.ones([shape[i] if names[i] in comp else 1 for i in range(len(shape))])
    caxes = tuple(pos[n] for n in comp)
    z = f.sum(axis=caxes, keepdims=True)
    if np.any(z <= 0):
        bad = np.argwhere(z.reshape(z.shape) <= 0)[0]
        pa = component_parents(bh.structure, comp)
        assignment = {n: int(bad[pos[n]]) for n in pa}
        raise FactorizationError(
            f"chain component {component_label(comp, names)} has zero normalizer at parent assignment {assignment}")
    return f / z


def joint_from_bh(bh: BayesianHypergraph) -> JointTable:
    shape = tuple(v.cardinality for v in bh.variables)
    size = int(np.prod(shape, dtype=np.int64))
    if size > MAX_DENSE_STATES:
        raise TableSizeError(f"joint state space {size} exceeds the dense cap {MAX_DENSE_STATES}")
    cd = canonical_dag(bh.structure)
    joint = np.ones(shape)
    for label in cd.dag.topological_order():
        comp = cd.components[cd.dag.nodes.index(label)]
        joint = joint * component_conditional(bh, comp)
    return JointTable(bh.variables, joint / joint.sum())


def check_hypergraph_collider_amplification(bh, tol: float = CI_TOL,
                                            table: JointTable | None = None) -> AmplificationReport:
    """The collider inequality for every co-tail pair and head member of each edge."""
    table = bh.joint() if table is None else table
    structure = bh.structure if isinstance(bh, BayesianHypergraph) else bh
    order = structure.nodes
    triples = []
    seen = set()
    for e in structure.edges:
        t, h = e.ordered(order)
        for i, k in itertools.combinations(t, 2):
            for j in h:
                if (i, j, k) not in seen:
                    seen.add((i, j, k))
                    triples.append((i, j, k))
    return AmplificationReport(amplification_entries(table, triples), tol)


# -- fitting ---------------------------------------------------------------------

def with_root_priors(h: DirectedHypergraph) -> DirectedHypergraph:
    """Add an empty-tail singleton edge for every node no edge points into."""
    headed = {n for e in h.edges for n in e.head}
    extra = [DirectedHyperedge((), (n,)) for n in h.nodes if n not in headed]
    return DirectedHypergraph(h.nodes, list(h.edges) + extra)


def fit_bayesian_hypergraph(table: JointTable, h: DirectedHypergraph) -> BayesianHypergraph:
    """Potentials on ``h`` reproducing the chain-component conditionals of ``table``.

    When one edge covers a component and its parents, the conditional is put
    on it directly.  Otherwise log-potentials are solved for by least squares
    (exact when the conditional factorizes over the edges; needs positive
    conditionals).
    """
    if tuple(table.names) != h.nodes:
        raise StructureError("table and hypergraph must list the same variables in the same order")
    names = h.nodes
    cards = {v.name: v.cardinality for v in table.variables}
    potentials = []
    for comp in chain_components(h):
        edges = sorted(component_edges(h, comp), key=lambda e: e.key(names))
        if not edges:
            continue
        pa = component_parents(h, comp)
        scope = [n for n in names if n in comp or n in pa]
        arr = marginal_array(table, scope)
        caxes = tuple(i for i, n in enumerate(scope) if n in comp)
        z = arr.sum(axis=caxes, keepdims=True)
        cond = np.where(z > 0, arr / np.where(z > 0, z, 1.0), 1.0)
        cover = [e for e in edges if set(scope) <= e.support]
        if cover:
            for e in edges:
                vars_e = [n for n in names if n in e.support]
                if e is cover[0]:
                    potentials.append(Potential(e, vars_e, cond))
                else:
                    potentials.append(Potential(e, vars_e, np.ones([cards[n] for n in vars_e])))
            continue
        potentials.extend(_fit_log_linear(cond, scope, edges, pa, names, cards))
    return BayesianHypergraph(table.variables, h, potentials)


def _fit_log_linear(cond, scope, edges, pa, names, cards):
    if np.any(cond <= 0):
        raise FactorizationError("least-squares potential fit needs a strictly positive conditional")
    states = list(itertools.product(*(range(cards[n]) for n in scope)))
    blocks = []
    offset = 0
    for e in edges:
        vars_e = [n for n in names if n in e.support]
        size = int(np.prod([cards[n] for n in vars_e]))
        blocks.append((e, vars_e, offset, size))
        offset += size
    pa_size = int(np.prod([cards[n] for n in pa])) if pa else 1
    ncols = offset + pa_size
    A = np.zeros((len(states), ncols))
    b = np.zeros(len(states))
    idx = {n: i for i, n in enumerate(scope)}
    for r, s in enumerate(states):
        for e, vars_e, off, _ in blocks:
            sub = tuple(s[idx[n]] for n in vars_e)
            A[r, off + int(np.ravel_multi_index(sub, [cards[n] for n in vars_e]))] = 1.0
        if pa:
            psub = tuple(s[idx[n]] for n in pa)
            A[r, offset + int(np.ravel_multi_index(psub, [cards[n] for n in pa]))] = -1.0
        b[r] = np.log(cond[s])
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = float(np.abs(A @ x - b).max())
    if resid > FIT_TOL:
        raise FactorizationError(
            f"conditional of {list(scope)} does not factorize over the given edges (log residual {resid:.2e})")
    out = []
    for e, vars_e, off, size in blocks:
        vals = np.exp(x[off:off + size]).reshape([cards[n] for n in vars_e])
        out.append(Potential(e, vars_e, vals / vals.max()))
    return out


# -- serialization ---------------------------------------------------------------

def hypergraph_to_dict(h: DirectedHypergraph) -> dict:
    order = h.nodes
    return {"nodes": list(order), "edges": [e.to_json(order) for e in h.edges]}


def bh_to_dict(bh: BayesianHypergraph) -> dict:
    order = bh.names
    out = {
        "nodes": [{"name": v.name, "cardinality": v.cardinality} for v in bh.variables],
        "edges": [e.to_json(order) for e in bh.structure.edges],
        "potentials": [],
    }
    for e in sorted(bh.potentials, key=lambda e: e.key(order)):
        p = bh.potentials[e]
        rows = [{"state": list(s), "value": float(p.values[s])}
                for s in itertools.product(*(range(k) for k in p.values.shape))]
        out["potentials"].append({"edge": e.to_json(order), "variables": list(p.variables), "values": rows})
    return out


def bh_from_dict(data: Mapping) -> BayesianHypergraph:
    try:
        variables = [Variable(str(v["name"]), int(v["cardinality"])) for v in data["nodes"]]
        names = [v.name for v in variables]
        cards = {v.name: v.cardinality for v in variables}
        edges = [DirectedHyperedge(e.get("tail", []), e.get("head", [])) for e in data["edges"]]
        h = DirectedHypergraph(names, edges)
        pots = []
        for p in data["potentials"]:
            e = DirectedHyperedge(p["edge"].get("tail", []), p["edge"].get("head", []))
            vs = list(p["variables"])
            vals = np.full([cards[n] for n in vs], np.nan)
            for r in p["values"]:
                vals[tuple(r["state"])] = r["value"]
            if np.isnan(vals).any():
                raise FactorizationError(f"potential for {e.label()} does not cover every assignment")
            pots.append(Potential(e, vs, vals))
    except (KeyError, TypeError, IndexError, AttributeError) as exc:
        raise ProbabilityError(f"malformed hypergraph JSON: {exc!r}") from None
    return BayesianHypergraph(variables, h, pots)
