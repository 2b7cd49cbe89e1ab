"""Structure discovery from PID signatures.

``discover_bayesnet`` finds neighbors through positive unique information
(against the rest of the system), orients edges into a child when a
non-neighbor of the target synergizes with that child, then propagates
orientations.  ``discover_hypergraph`` searches tail/head pairs whose
signatures hold, extends each to a maximal hyperedge, and canonicalizes the
collection.

Every PID number that feeds a conclusion is logged as a query, and every
conclusion lists the queries it rests on.
"""
from __future__ import annotations

import itertools
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .hypergraph import DirectedHyperedge
from .pid import (
    SUPERVARIABLE_CAP,
    ZERO_THRESHOLD,
    SupervariableCapError,
    SupervariableQuery,
    get_measure,
    synergy_pair,
    unique_info_vs_rest,
)
from .probcore import JointTable

DEFAULT_MAX_EDGE_SIZE = 4
DEFAULT_CANDIDATE_BUDGET = 200_000


class InconsistencyError(RuntimeError):
    def __init__(self, message: str, trail: Sequence[dict] = ()):
        super().__init__(message)
        self.trail = list(trail)


class BudgetError(RuntimeError):
    def __init__(self, message: str, candidates: int, budget: int):
        super().__init__(f"{message}: {candidates} candidates exceed the budget of {budget}")
        self.candidates = candidates
        self.budget = budget


def unique_key(probe: str, target: str) -> str:
    return f"unique:{probe}->{target}"


def synergy_key(a: str, b: str, target: str) -> str:
    a, b = sorted((a, b))
    return f"synergy:{a},{b}->{target}"


class PIDEngine:
    """Cached PID queries over one table with a thread-safe query log."""

    def __init__(self, table: JointTable, measure="imin", threshold: float = ZERO_THRESHOLD,
                 cap: int = SUPERVARIABLE_CAP):
        if not threshold > 0:
            raise ValueError("threshold must be positive")
        self.table = table
        self.measure = get_measure(measure).name
        self.threshold = threshold
        self.cap = cap
        self._lock = threading.Lock()
        self._cache: dict[str, float] = {}
        self._log: dict[str, dict] = {}

    @property
    def names(self) -> tuple:
        return self.table.names

    def _record(self, key: str, entry: dict):
        with self._lock:
            self._log.setdefault(key, entry)
            self._cache[key] = entry["value"]

    def _cached(self, key: str):
        with self._lock:
            return self._cache.get(key)

    def unique(self, probe: str, target: str) -> float:
        key = unique_key(probe, target)
        v = self._cached(key)
        if v is None:
            q = SupervariableQuery.for_table(self.table, target, probe)
            try:
                v = float(unique_info_vs_rest(self.table, q, self.measure, self.cap))
            except SupervariableCapError as exc:
                raise SupervariableCapError(f"probe {probe!r} -> target {target!r}: {exc}") from None
            self._record(key, {
                "query": key, "kind": "unique", "probe": probe, "target": target,
                "rest": list(q.rest), "measure": self.measure, "value": v,
                "threshold": self.threshold, "margin": v - self.threshold,
            })
        return v

    def synergy(self, a: str, b: str, target: str) -> float:
        key = synergy_key(a, b, target)
        v = self._cached(key)
        if v is None:
            x, y = sorted((a, b))
            v = float(synergy_pair(self.table, x, y, target, self.measure))
            self._record(key, {
                "query": key, "kind": "synergy", "sources": [x, y], "target": target,
                "measure": self.measure, "value": v, "threshold": self.threshold,
                "margin": v - self.threshold,
            })
        return v

    def positive(self, value: float) -> bool:
        return value > self.threshold

    def unique_matrix(self, workers: int = 1) -> dict:
        pairs = [(j, i) for i in self.names for j in self.names if i != j]
        _run(lambda p: self.unique(*p), pairs, workers)
        return {p: self.unique(*p) for p in pairs}

    def queries(self) -> list[dict]:
        with self._lock:
            return [dict(self._log[k]) for k in sorted(self._log)]


def _run(fn, items, workers: int):
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# -- results ---------------------------------------------------------------------

@dataclass(frozen=True)
class NeighborReport:
    target: str
    neighbors: dict          # probe -> bits, only probes above threshold
    values: dict             # every probe -> bits
    threshold: float

    def to_json(self) -> dict:
        return {"target": self.target, "neighbors": dict(sorted(self.neighbors.items())),
                "values": dict(sorted(self.values.items())), "threshold": self.threshold}


@dataclass(frozen=True)
class OrientationEvidence:
    source: str              # X_i, the parent
    dest: str                # X_j, its child
    coparent: str            # X_k
    synergy: float
    coparent_unique: float
    corroboration: tuple = ()

    def to_json(self) -> dict:
        return {"from": self.source, "to": self.dest, "coparent": self.coparent,
                "synergy": self.synergy, "coparent_unique": self.coparent_unique,
                "corroboration": list(self.corroboration)}


def _pair(a: str, b: str) -> frozenset:
    return frozenset((a, b))


@dataclass(frozen=True)
class DiscoveredStructure:
    nodes: tuple
    skeleton: frozenset
    directed: frozenset
    undecided: frozenset
    hyperedges: tuple = ()
    colliders: frozenset = frozenset()
    queries: tuple = ()
    decisions: tuple = ()
    flags: tuple = ()
    measure: str = "imin"
    threshold: float = ZERO_THRESHOLD

    def __post_init__(self):
        und = {frozenset(p) for p in self.undecided}
        dirp = {frozenset(e) for e in self.directed}
        if und & dirp or (und | dirp) != set(self.skeleton):
            raise InconsistencyError("directed and undecided edges must partition the skeleton", self.decisions)
        if _has_cycle(self.nodes, self.directed):
            raise InconsistencyError("directed edges form a cycle", self.decisions)

    def _order(self):
        pos = {n: i for i, n in enumerate(self.nodes)}
        return pos

    def sorted_pairs(self, pairs) -> list[list[str]]:
        pos = self._order()
        return sorted((sorted(p, key=pos.__getitem__) for p in pairs), key=lambda p: [pos[x] for x in p])

    def sorted_directed(self) -> list[list[str]]:
        pos = self._order()
        return [list(e) for e in sorted(self.directed, key=lambda e: (pos[e[0]], pos[e[1]]))]

    def to_json(self) -> dict:
        pos = self._order()
        return {
            "nodes": list(self.nodes),
            "measure": self.measure,
            "threshold": self.threshold,
            "skeleton": self.sorted_pairs(self.skeleton),
            "directed": self.sorted_directed(),
            "undecided": self.sorted_pairs(self.undecided),
            "colliders": [list(c) for c in sorted(self.colliders, key=lambda c: [pos[x] for x in c])],
            "hyperedges": [e.to_json(self.nodes) for e in self.hyperedges],
            "flags": list(self.flags),
            "decisions": list(self.decisions),
            "queries": list(self.queries),
        }


def _has_cycle(nodes, directed) -> bool:
    succ = {n: [] for n in nodes}
    for a, b in directed:
        succ[a].append(b)
    state = {}

    def visit(n):
        state[n] = 1
        for m in succ[n]:
            s = state.get(m, 0)
            if s == 1 or (s == 0 and visit(m)):
                return True
        state[n] = 2
        return False

    return any(state.get(n, 0) == 0 and visit(n) for n in nodes)


# -- Procedure for Bayesian networks ------------------------------------------

def discover_neighbors(table: JointTable, target: str, measure="imin", threshold: float = ZERO_THRESHOLD,
                       engine: PIDEngine | None = None) -> NeighborReport:
    engine = engine or PIDEngine(table, measure, threshold)
    table.variable(target)
    values = {p: engine.unique(p, target) for p in table.names if p != target}
    nb = {p: v for p, v in values.items() if v > threshold}
    return NeighborReport(target, nb, values, threshold)


def orient_edges(table: JointTable, reports: dict, measure="imin", threshold: float = ZERO_THRESHOLD,
                 engine: PIDEngine | None = None) -> list[OrientationEvidence]:
    """Co-parent search: a non-neighbor X_k of X_i that synergizes with X_j about X_i.

    Candidates are restricted to X_k whose own neighborhood contains X_j, so
    that X_j is a plausible joint child.  Hits are ranked by synergy; the
    first orients, the rest are kept as corroboration.
    """
    engine = engine or PIDEngine(table, measure, threshold)
    names = table.names
    out = []
    for xi in names:
        nbi = reports[xi].neighbors
        for xj in names:
            if xj not in nbi:
                continue
            hits = []
            for xk in names:
                if xk in (xi, xj) or xk in nbi:
                    continue
                if xj not in reports[xk].neighbors:
                    continue
                s = engine.synergy(xj, xk, xi)
                if s > threshold:
                    hits.append((s, xk))
            if hits:
                hits.sort(key=lambda h: (-h[0], names.index(h[1])))
                s, xk = hits[0]
                out.append(OrientationEvidence(xi, xj, xk, s, reports[xi].values[xk],
                                               tuple(k for _, k in hits[1:])))
    return out


def _meek(nodes, skeleton, directed, colliders, log):
    """Orientation propagation to a fixpoint (rules 1-3)."""
    directed = set(directed)
    adj = {n: set() for n in nodes}
    for p in skeleton:
        a, b = tuple(p)
        adj[a].add(b)
        adj[b].add(a)

    def is_undirected(a, b):
        return frozenset((a, b)) in skeleton and (a, b) not in directed and (b, a) not in directed

    collider_mid = {(c[0], c[1], c[2]) for c in colliders} | {(c[2], c[1], c[0]) for c in colliders}
    derived = set()

    def orient(a, b, rule, why):
        if (b, a) in directed:
            raise InconsistencyError(f"{rule} wants {a}->{b} but {b}->{a} is already oriented", log)
        directed.add((a, b))
        derived.add((a, b))
        if _has_cycle(nodes, directed):
            raise InconsistencyError(f"{rule} orientation {a}->{b} closes a directed cycle", log)
        log.append({"conclusion": f"orient {a}->{b}", "rule": rule, "because": why, "evidence": []})

    changed = True
    while changed:
        changed = False
        for b in nodes:
            for c in sorted(adj[b], key=nodes.index):
                if not is_undirected(b, c):
                    continue
                # rule 1: a -> b - c, a and c non-adjacent, (a, b, c) not a collider
                for a in nodes:
                    if (a, b) in directed and a != c and c not in adj[a] and (a, b, c) not in collider_mid:
                        orient(b, c, "R1", f"{a}->{b} with {a},{c} non-adjacent")
                        changed = True
                        break
                if not is_undirected(b, c):
                    continue
                # rule 2: b -> x -> c with b - c
                for x in nodes:
                    if (b, x) in directed and (x, c) in directed:
                        orient(b, c, "R2", f"{b}->{x}->{c}")
                        changed = True
                        break
                if not is_undirected(b, c):
                    continue
                # rule 3: b - x, b - y, x -> c <- y, x,y non-adjacent
                tails = [x for x in adj[b] if is_undirected(b, x) and (x, c) in directed]
                for x, y in itertools.combinations(tails, 2):
                    if y not in adj[x]:
                        orient(b, c, "R3", f"{b}-{x}, {b}-{y}, {x}->{c}<-{y}")
                        changed = True
                        break
    # a propagated edge that completes an unrecorded unshielded collider means
    # rule 1 pushed that edge both ways
    for x, y in sorted(derived):
        for a in nodes:
            if a != x and (a, y) in directed and a not in adj[x] and (a, y, x) not in collider_mid:
                raise InconsistencyError(
                    f"{a}->{y}<-{x} is an unshielded collider without co-parent evidence", log)
    return directed


def resolve_remaining(partial: DiscoveredStructure) -> DiscoveredStructure:
    decisions = list(partial.decisions)
    directed = _meek(partial.nodes, partial.skeleton, partial.directed, partial.colliders, decisions)
    undecided = frozenset(p for p in partial.skeleton if tuple(p) not in directed and tuple(p)[::-1] not in directed)
    return DiscoveredStructure(
        partial.nodes, partial.skeleton, frozenset(directed), undecided, partial.hyperedges,
        partial.colliders, partial.queries, tuple(decisions), partial.flags, partial.measure, partial.threshold,
    )


def discover_bayesnet(table: JointTable, measure="imin", threshold: float = ZERO_THRESHOLD,
                      workers: int = 1, engine: PIDEngine | None = None) -> DiscoveredStructure:
    engine = engine or PIDEngine(table, measure, threshold)
    names = table.names
    engine.unique_matrix(workers)
    reports = {t: discover_neighbors(table, t, engine=engine, threshold=threshold) for t in names}
    decisions: list[dict] = []
    flags: list[str] = []
    skeleton = set()
    for a, b in itertools.combinations(names, 2):
        ab, ba = b in reports[a].neighbors, a in reports[b].neighbors
        if ab or ba:
            skeleton.add(_pair(a, b))
            ev = [unique_key(x, y) for x, y in ((b, a), (a, b)) if x in reports[y].neighbors]
            decisions.append({"conclusion": f"adjacent {a}-{b}", "rule": "positive unique information",
                              "evidence": ev})
            if ab != ba:
                flags.append(f"asymmetric-neighbor:{a}-{b}")
    evidence = orient_edges(table, reports, threshold=threshold, engine=engine)
    directed: set = set()
    colliders = set()
    for ev in evidence:
        xi, xj, xk = ev.source, ev.dest, ev.coparent
        for a, b in ((xi, xj), (xk, xj)):
            if (b, a) in directed:
                raise InconsistencyError(f"co-parent evidence orients both {a}->{b} and {b}->{a}", decisions)
            directed.add((a, b))
        for k in (xk, *ev.corroboration):
            c = tuple(sorted((xi, k), key=names.index))
            colliders.add((c[0], xj, c[1]))
        decisions.append({
            "conclusion": f"orient {xi}->{xj} and {xk}->{xj}", "rule": "co-parent synergy",
            "coparent": xk, "evidence": [synergy_key(xj, xk, xi), unique_key(xk, xi), unique_key(xj, xi)]
            + [synergy_key(xj, k, xi) for k in ev.corroboration],
        })
    if _has_cycle(names, directed):
        raise InconsistencyError("co-parent orientations form a directed cycle", decisions)
    undecided = frozenset(p for p in skeleton if tuple(p) not in directed and tuple(p)[::-1] not in directed)
    partial = DiscoveredStructure(names, frozenset(skeleton), frozenset(directed), undecided, (),
                                  frozenset(colliders), (), tuple(decisions), tuple(flags),
                                  engine.measure, threshold)
    out = resolve_remaining(partial)
    return _with_queries(out, engine)


def _with_queries(s: DiscoveredStructure, engine: PIDEngine) -> DiscoveredStructure:
    return DiscoveredStructure(s.nodes, s.skeleton, s.directed, s.undecided, s.hyperedges, s.colliders,
                               tuple(engine.queries()), s.decisions, s.flags, s.measure, s.threshold)


# -- Procedure for Bayesian hypergraphs ------------------------------------------

@dataclass(frozen=True)
class SignatureResult:
    tail: tuple
    head: tuple
    passed: bool
    failures: tuple          # human-readable reasons
    evidence: tuple          # query keys consulted

    def __bool__(self):
        return self.passed


def hyperedge_signature_check(table: JointTable, tail: Iterable[str], head: Iterable[str], measure="imin",
                              threshold: float = ZERO_THRESHOLD, engine: PIDEngine | None = None,
                              first_failure: bool = False) -> SignatureResult:
    engine = engine or PIDEngine(table, measure, threshold)
    names = table.names
    tail = tuple(sorted(set(tail), key=names.index))
    head = tuple(sorted(set(head), key=names.index))
    if set(tail) & set(head):
        raise ValueError("tail and head overlap")
    if not head and len(tail) < 2:
        raise ValueError("need a non-empty head or at least two tail members")
    fails, ev = [], []

    def check(ok, msg, key):
        ev.append(key)
        if not ok:
            fails.append(msg)
        return ok or not first_failure

    # co-tails must not be neighbors of each other
    for xi, xk in itertools.permutations(tail, 2):
        u = engine.unique(xk, xi)
        if not check(u <= threshold, f"co-tail {xk} has unique information about {xi}", unique_key(xk, xi)):
            return SignatureResult(tail, head, False, tuple(fails), tuple(ev))
    for xi in tail:
        for xj in head:
            u = engine.unique(xj, xi)
            if not check(u > threshold, f"head {xj} lacks unique information about tail {xi}", unique_key(xj, xi)):
                return SignatureResult(tail, head, False, tuple(fails), tuple(ev))
    for xj, xk in itertools.permutations(head, 2):
        u = engine.unique(xj, xk)
        if not check(u > threshold, f"co-head {xj} lacks unique information about {xk}", unique_key(xj, xk)):
            return SignatureResult(tail, head, False, tuple(fails), tuple(ev))
    for xi, xk in itertools.permutations(tail, 2):
        for xj in head:
            s = engine.synergy(xj, xk, xi)
            if not check(s > threshold, f"co-tail {xk} and head {xj} lack synergy about {xi}", synergy_key(xj, xk, xi)):
                return SignatureResult(tail, head, False, tuple(fails), tuple(ev))
    return SignatureResult(tail, head, not fails, tuple(fails), tuple(ev))


def maximal_extend(table: JointTable, tail, head, measure="imin", threshold: float = ZERO_THRESHOLD,
                   engine: PIDEngine | None = None) -> DirectedHyperedge:
    """Grow the tail, then the head, one variable at a time in table order."""
    engine = engine or PIDEngine(table, measure, threshold)
    names = table.names
    tail, head = set(tail), set(head)

    def ok(t, h):
        return hyperedge_signature_check(table, t, h, threshold=threshold, engine=engine, first_failure=True).passed

    if not ok(tail, head):
        raise ValueError("seed hyperedge does not pass the signature check")
    changed = True
    while changed:
        changed = False
        for side in ("tail", "head"):
            for v in names:
                if v in tail or v in head:
                    continue
                t2 = tail | {v} if side == "tail" else tail
                h2 = head | {v} if side == "head" else head
                if ok(t2, h2):
                    tail, head = t2, h2
                    changed = True
    return DirectedHyperedge(tail, head)


def _candidates(engine: PIDEngine, max_edge_size: int, budget: int):
    names = engine.names
    U = engine.unique_matrix()
    thr = engine.threshold
    nb = {i: {j for j in names if j != i and U[(j, i)] > thr} for i in names}
    count = 0
    out = []
    for tsize in range(0, max_edge_size):
        for tail in itertools.combinations(names, tsize):
            if any(U[(k, i)] > thr for i, k in itertools.permutations(tail, 2)):
                continue
            pool = set(names) - set(tail)
            for i in tail:
                pool &= nb[i]
            pool = [n for n in names if n in pool]
            for hsize in range(1, max_edge_size - tsize + 1):
                if tsize + hsize < 2:
                    continue
                for head in itertools.combinations(pool, hsize):
                    count += 1
                    if count > budget:
                        raise BudgetError("hyperedge candidate search", count, budget)
                    out.append((tail, head))
    return out, count


def discover_hypergraph(table: JointTable, measure="imin", threshold: float = ZERO_THRESHOLD,
                        max_edge_size: int = DEFAULT_MAX_EDGE_SIZE, budget: int = DEFAULT_CANDIDATE_BUDGET,
                        workers: int = 1, engine: PIDEngine | None = None) -> DiscoveredStructure:
    if max_edge_size < 2:
        raise ValueError("max_edge_size must be at least 2")
    engine = engine or PIDEngine(table, measure, threshold)
    names = table.names
    engine.unique_matrix(workers)
    cands, count = _candidates(engine, max_edge_size, budget)
    checks = _run(lambda c: hyperedge_signature_check(table, c[0], c[1], threshold=threshold,
                                                      engine=engine, first_failure=True), cands, workers)
    passing = [r for r in checks if r.passed]
    decisions: list[dict] = []
    flags: list[str] = []
    # every passing candidate is extended; the candidate set already covers
    # all seeds, so one sweep reaches the fixpoint
    found: dict = {}
    for r in passing:
        e = maximal_extend(table, r.tail, r.head, threshold=threshold, engine=engine)
        if e not in found:
            found[e] = hyperedge_signature_check(table, e.tail, e.head, threshold=threshold, engine=engine)
    maximal = sorted(found, key=lambda e: e.key(names))
    # canonical selection: supports strictly inside another support are absorbed
    kept = [e for e in maximal if not any(e.support < o.support for o in maximal)]
    by_support: dict = {}
    for e in kept:
        by_support.setdefault(e.support, []).append(e)
    hyperedges, undecided_pairs = [], set()
    for support, group in by_support.items():
        if len(support) == 2 and all(len(e.tail) <= 1 and len(e.head) + len(e.tail) == 2 for e in group):
            a, b = sorted(support, key=names.index)
            undecided_pairs.add(_pair(a, b))
            decisions.append({"conclusion": f"adjacent {a}-{b}, direction undetermined",
                              "rule": "two-variable maximal hyperedge",
                              "evidence": sorted({k for e in group for k in found[e].evidence})})
            continue
        if len(group) > 1:
            flags.append("ambiguous-support:" + "|".join(e.label(names) for e in group))
        for e in group:
            hyperedges.append(e)
            decisions.append({"conclusion": f"maximal hyperedge {e.label(names)}", "rule": "hyperedge signature",
                              "evidence": list(found[e].evidence)})
    hyperedges.sort(key=lambda e: e.key(names))
    decisions.insert(0, {"conclusion": f"{count} candidates, {len(passing)} passing, {len(maximal)} maximal",
                         "rule": "candidate search", "evidence": []})
    directed, colliders, skeleton = set(), set(), set(undecided_pairs)
    for e in hyperedges:
        t, h = e.ordered(names)
        for a in t:
            for b in h:
                directed.add((a, b))
                skeleton.add(_pair(a, b))
        for a, b in itertools.combinations(h, 2):
            skeleton.add(_pair(a, b))
            undecided_pairs.add(_pair(a, b))
        for a, c in itertools.combinations(t, 2):
            for b in h:
                colliders.add((a, b, c))
    for p in list(undecided_pairs):
        a, b = tuple(p)
        if (a, b) in directed or (b, a) in directed:
            undecided_pairs.discard(p)
    undecided = frozenset(p for p in skeleton if tuple(p) not in directed and tuple(p)[::-1] not in directed)
    out = DiscoveredStructure(names, frozenset(skeleton), frozenset(directed), undecided, tuple(hyperedges),
                              frozenset(colliders), (), tuple(decisions), tuple(flags), engine.measure, threshold)
    if all(len(e.head) == 1 for e in hyperedges):
        # graph-shaped result: propagate orientations as for a network
        out = resolve_remaining(out)
    return _with_queries(out, engine)
