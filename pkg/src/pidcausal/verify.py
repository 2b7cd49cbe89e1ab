"""Brute-force checks of the structural claims on small exact instances.

Each check returns one :class:`TheoremVerdict` per instance.  A verdict is
``pass``, ``fail``, ``vacuous`` (nothing to check) or ``quarantined`` (the
instance does not meet the claim's assumptions, so no claim is evaluated).
Instances are described by small JSON descriptors from which the model is
rebuilt, so every verdict can be reproduced from its descriptor alone.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import fixtures
from .bayesnet import (
    BayesianNetwork,
    bn_to_dict,
    check_collider_amplification,
    check_faithfulness,
    check_persistent_relevance,
    joint_from_bn,
    random_bn,
)
from .discovery import PIDEngine, hyperedge_signature_check, maximal_extend
from .hypergraph import BayesianHypergraph, bh_to_dict, check_hypergraph_collider_amplification
from .lattice import enumerate_lattice, imin_redundancy, moebius_atoms
from .pid import (
    ZERO_THRESHOLD,
    _imin_bivariate,
    _opt_bivariate,
    get_measure,
)
from .probcore import CI_TOL, JointTable, Variable, min_conditional_mi

THEOREMS = ("T1", "T2", "T3", "T4", "T5", "T6")
NEGATIVE_TOL = 1e-9
MONOTONE_TOL = 1e-9


class Instance:
    """A model rebuilt from its descriptor, with cached joint and assumption checks."""

    def __init__(self, descriptor: dict):
        self.descriptor = dict(descriptor)
        self.model = build_model(descriptor)

    @property
    def kind(self) -> str:
        return "bn" if isinstance(self.model, BayesianNetwork) else "bh"

    @property
    def label(self) -> str:
        d = self.descriptor
        if d["source"] == "fixture":
            return d["name"]
        return f"{d['source']}:{d.get('seed')}"

    @cached_property
    def table(self) -> JointTable:
        return joint_from_bn(self.model) if self.kind == "bn" else self.model.joint()

    @cached_property
    def engine(self) -> PIDEngine:
        return PIDEngine(self.table, self.descriptor.get("measure", "imin"))

    @cached_property
    def assumptions(self) -> dict:
        out = {}
        if self.kind == "bn":
            out["faithfulness"] = check_faithfulness(self.model, table=self.table).passed
            out["collider_amplification"] = check_collider_amplification(self.model, table=self.table).passed
        else:
            out["hypergraph_collider_amplification"] = check_hypergraph_collider_amplification(
                self.model, table=self.table).passed
        out["persistent_relevance"] = check_persistent_relevance(self.table, measure=self.engine.measure).passed
        return out

    def model_json(self) -> dict:
        return bn_to_dict(self.model) if self.kind == "bn" else bh_to_dict(self.model)


def build_model(descriptor: dict):
    src = descriptor["source"]
    if src == "fixture":
        fx = fixtures.FIXTURES.get(descriptor["name"])
        if fx is None:
            raise ValueError(f"unknown fixture {descriptor['name']!r}")
        return fx.build()
    if src == "random_bn":
        return random_bn(descriptor["node_count"], descriptor["edge_probability"],
                         descriptor.get("cpt_concentration", 1.0), descriptor["seed"])
    if src == "fig1c_random":
        return fixtures.fig1c_random(descriptor["seed"])
    raise ValueError(f"unknown instance source {src!r}")


def random_bn_descriptors(count: int, node_count: int, edge_probability: float, seed: int = 0,
                          cpt_concentration: float = 1.0) -> list[dict]:
    return [{"source": "random_bn", "seed": seed + i, "node_count": node_count,
             "edge_probability": edge_probability, "cpt_concentration": cpt_concentration}
            for i in range(count)]


def fixture_descriptors(kind: str | None = None) -> list[dict]:
    return [{"source": "fixture", "name": n} for n, f in fixtures.FIXTURES.items() if kind in (None, f.kind)]


@dataclass(frozen=True)
class TheoremVerdict:
    theorem: str
    instance: dict
    status: str                      # pass | fail | vacuous | quarantined
    assumptions: dict = field(default_factory=dict)
    claims: tuple = ()
    reasons: tuple = ()
    counterexample: dict | None = None

    @property
    def failures(self) -> list[dict]:
        return [c for c in self.claims if not c["passed"]]

    def to_json(self) -> dict:
        return {"theorem": self.theorem, "instance": self.instance, "status": self.status,
                "assumptions": self.assumptions, "claims": list(self.claims),
                "reasons": list(self.reasons), "counterexample": self.counterexample}


def _verdict(theorem: str, inst: Instance, claims: list[dict], assumptions: dict | None = None) -> TheoremVerdict:
    assumptions = assumptions or {}
    if not claims:
        return TheoremVerdict(theorem, inst.descriptor, "vacuous", assumptions)
    failed = [c for c in claims if not c["passed"]]
    if failed:
        cx = {"descriptor": inst.descriptor, "model": inst.model_json(), "failed_claims": failed}
        return TheoremVerdict(theorem, inst.descriptor, "fail", assumptions, tuple(claims), (), cx)
    return TheoremVerdict(theorem, inst.descriptor, "pass", assumptions, tuple(claims))


def _gate(theorem: str, inst: Instance, needed: Sequence[str]):
    a = inst.assumptions
    unmet = [k for k in needed if k in a and not a[k]]
    if unmet:
        return TheoremVerdict(theorem, inst.descriptor, "quarantined", a, (),
                              tuple(f"{k} fails" for k in unmet))
    return None


def _as_instances(items) -> list[Instance]:
    return [x if isinstance(x, Instance) else Instance(x) for x in items]


# -- network claims -----------------------------------------------------------

def verify_theorem_1(instances, ci_tol: float = CI_TOL, threshold: float = ZERO_THRESHOLD) -> list[TheoremVerdict]:
    """A separating set (CMI <= ci_tol) forces unique information <= threshold."""
    out = []
    for inst in _as_instances(instances):
        t, eng = inst.table, inst.engine
        claims = []
        for i, j in itertools.permutations(t.names, 2):
            if i > j:
                continue
            v, cset = min_conditional_mi(t, i, j)
            if v > ci_tol:
                continue
            for a, b in ((i, j), (j, i)):
                u = eng.unique(a, b)
                claims.append({"claim": "separated pair has zero unique information", "probe": a, "target": b,
                               "min_cmi": v, "conditioning": list(cset), "unique": u, "passed": u <= threshold})
        out.append(_verdict("T1", inst, claims))
    return out


def _bn_gate(theorem, inst):
    if inst.kind != "bn":
        return TheoremVerdict(theorem, inst.descriptor, "quarantined", {}, (), ("not a Bayesian network",))
    return _gate(theorem, inst, ("faithfulness", "persistent_relevance", "collider_amplification"))


def verify_theorem_2(instances, threshold: float = ZERO_THRESHOLD) -> list[TheoremVerdict]:
    """Positive unique information exactly for parents and children."""
    out = []
    for inst in _as_instances(instances):
        q = _bn_gate("T2", inst)
        if q:
            out.append(q)
            continue
        dag, eng = inst.model.dag, inst.engine
        claims = []
        for i, j in itertools.permutations(dag.nodes, 2):
            u = eng.unique(j, i)
            truth = dag.adjacent(i, j)
            claims.append({"claim": "unique information positive iff adjacent", "probe": j, "target": i,
                           "unique": u, "adjacent": truth, "passed": (u > threshold) == truth})
        out.append(_verdict("T2", inst, claims, inst.assumptions))
    return out


def _coparent_signature(eng: PIDEngine, names, i: str, k: str, threshold: float,
                        restrict_to_common_neighbors: bool):
    """(zero unique of k about i, witnessing j or None)."""
    uki = eng.unique(k, i)
    if uki > threshold:
        return uki, None
    for j in names:
        if j in (i, k) or not eng.unique(j, i) > threshold:
            continue
        if restrict_to_common_neighbors and not eng.unique(j, k) > threshold and not eng.unique(k, j) > threshold:
            continue
        if eng.synergy(j, k, i) > threshold:
            return uki, j
    return uki, None


def verify_theorem_3(instances, threshold: float = ZERO_THRESHOLD) -> list[TheoremVerdict]:
    """Co-parents are exactly the zero-unique variables that synergize with a neighbor.

    Two readings are evaluated per ordered pair: ``literal`` lets the
    synergizing partner be any variable with positive unique information
    about the target; ``joint-child`` also requires the partner to be a
    discovered neighbor of the co-parent candidate, as the discovery
    pipeline does.
    """
    out = []
    for inst in _as_instances(instances):
        q = _bn_gate("T3", inst)
        if q:
            out.append(q)
            continue
        dag, eng = inst.model.dag, inst.engine
        names = dag.nodes
        claims = []
        for i, k in itertools.permutations(names, 2):
            truth = (not dag.adjacent(i, k)) and bool(set(dag.children(i)) & set(dag.children(k)))
            for reading, restrict in (("literal", False), ("joint-child", True)):
                uki, j = _coparent_signature(eng, names, i, k, threshold, restrict)
                pred = j is not None
                claims.append({"claim": f"co-parent iff synergy signature ({reading})", "target": i,
                               "candidate": k, "witness": j, "unique": uki, "coparent": truth,
                               "passed": pred == truth})
        out.append(_verdict("T3", inst, claims, inst.assumptions))
    return out


# -- hypergraph claims --------------------------------------------------------------

def _bh_gate(theorem, inst):
    if inst.kind != "bh":
        return TheoremVerdict(theorem, inst.descriptor, "quarantined", {}, (), ("not a Bayesian hypergraph",))
    return _gate(theorem, inst, ("persistent_relevance", "hypergraph_collider_amplification"))


def verify_theorem_4(instances, threshold: float = ZERO_THRESHOLD) -> list[TheoremVerdict]:
    """Positive unique information exactly for parents, children and co-heads."""
    out = []
    for inst in _as_instances(instances):
        q = _bh_gate("T4", inst)
        if q:
            out.append(q)
            continue
        h, eng = inst.model.structure, inst.engine
        claims = []
        for i, j in itertools.permutations(h.nodes, 2):
            role = h.role(j, i)
            u = eng.unique(j, i)
            truth = role in ("parent", "child", "co-head")
            claims.append({"claim": "unique information positive iff parent, child or co-head", "probe": j,
                           "target": i, "role": role, "unique": u, "passed": (u > threshold) == truth})
        out.append(_verdict("T4", inst, claims, inst.assumptions))
    return out


def verify_theorem_5(instances, threshold: float = ZERO_THRESHOLD) -> list[TheoremVerdict]:
    """Co-tails are exactly the zero-unique variables that synergize with a neighbor."""
    out = []
    for inst in _as_instances(instances):
        q = _bh_gate("T5", inst)
        if q:
            out.append(q)
            continue
        h, eng = inst.model.structure, inst.engine
        claims = []
        for i, k in itertools.permutations(h.nodes, 2):
            truth = k in h.cotails(i)
            uki, j = _coparent_signature(eng, h.nodes, i, k, threshold, False)
            claims.append({"claim": "co-tail iff synergy signature", "target": i, "candidate": k,
                           "witness": j, "unique": uki, "cotail": truth, "passed": (j is not None) == truth})
        out.append(_verdict("T5", inst, claims, inst.assumptions))
    return out


EXPECTED_MAXIMAL = {"fig2": fixtures.fig2_maximal}


def verify_theorem_6(instances, threshold: float = ZERO_THRESHOLD) -> list[TheoremVerdict]:
    """Every edge shows the hyperedge signature; maximal extensions match the expected edges."""
    out = []
    for inst in _as_instances(instances):
        q = _bh_gate("T6", inst)
        if q:
            out.append(q)
            continue
        h, eng, t = inst.model.structure, inst.engine, inst.table
        claims = []
        edges = [e for e in h.edges if len(e.support) >= 2 and e.head]
        for e in edges:
            r = hyperedge_signature_check(t, e.tail, e.head, threshold=threshold, engine=eng)
            claims.append({"claim": "edge shows the hyperedge signature", "edge": e.to_json(h.nodes),
                           "failures": list(r.failures), "passed": r.passed})
        name = inst.descriptor.get("name")
        expected = EXPECTED_MAXIMAL[name]().edges if name in EXPECTED_MAXIMAL else [
            e for e in edges if e.tail]
        got = set()
        for e in edges:
            if hyperedge_signature_check(t, e.tail, e.head, threshold=threshold, engine=eng).passed:
                got.add(maximal_extend(t, e.tail, e.head, threshold=threshold, engine=eng))
        got = {e for e in got if not any(e.support < o.support for o in got)}
        claims.append({"claim": "maximal extensions of the edges are the expected maximal edges",
                       "expected": sorted(e.label(h.nodes) for e in expected),
                       "found": sorted(e.label(h.nodes) for e in got),
                       "passed": got == set(expected)})
        out.append(_verdict("T6", inst, claims, inst.assumptions))
    return out


VERIFIERS = {
    "T1": verify_theorem_1, "T2": verify_theorem_2, "T3": verify_theorem_3,
    "T4": verify_theorem_4, "T5": verify_theorem_5, "T6": verify_theorem_6,
}


# -- desiderata ---------------------------------------------------------------------

def _random_table(rng, cards: Sequence[int], names: Sequence[str]) -> JointTable:
    w = rng.dirichlet([0.5] * int(np.prod(cards))).reshape(cards)
    return JointTable([Variable(n, c) for n, c in zip(names, cards)], w)


def _raw_bivariate(table, s1, s2, target, measure):
    if get_measure(measure).name == "opt":
        return _opt_bivariate(table, s1, s2, target)
    return _imin_bivariate(table, s1, s2, target)


@dataclass(frozen=True)
class DesideratumVerdict:
    desideratum: str
    measure: str
    trials: int
    violations: int
    worst_margin: float
    examples: tuple = ()
    status_note: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {"desideratum": self.desideratum, "measure": self.measure, "trials": self.trials,
                "violations": self.violations, "worst_margin": self.worst_margin,
                "examples": list(self.examples), "known_status": self.status_note}


def verify_desiderata(measure="imin", trials: int = 1000, seed: int = 0) -> list[DesideratumVerdict]:
    """Seeded random checks of non-negativity and the two monotonicity properties.

    Margins are signed so that negative means violated.
    """
    m = get_measure(measure)
    rng = np.random.default_rng(seed)
    names = ["S1", "S2", "T"]
    d1 = {"n": 0, "bad": 0, "worst": np.inf, "ex": []}
    d2 = {"n": 0, "bad": 0, "worst": np.inf, "ex": []}
    d3 = {"n": 0, "bad": 0, "worst": np.inf, "ex": []}

    def note(acc, margin, tol, example):
        acc["n"] += 1
        acc["worst"] = min(acc["worst"], margin)
        if margin < -tol:
            acc["bad"] += 1
            if len(acc["ex"]) < 3:
                acc["ex"].append(example)

    for trial in range(trials):
        cards = list(rng.integers(2, 4, size=3))
        t = _random_table(rng, cards, names)
        atoms = _raw_bivariate(t, ["S1"], ["S2"], ["T"], m)
        note(d1, min(atoms), NEGATIVE_TOL, {"trial": trial, "sources": 2, "atoms": list(atoms)})
        if m.lattice_compatible:
            t3 = _random_table(rng, [2, 2, 2, 2], ["S1", "S2", "S3", "T"])
            lat = enumerate_lattice(3)
            red = {a: imin_redundancy(t3, ["S1", "S2", "S3"], a, ["T"]) for a in lat}
            a3 = moebius_atoms(lat, red)
            note(d1, min(a3.values()), NEGATIVE_TOL, {"trial": trial, "sources": 3, "min_atom": min(a3.values())})
        # augmentation: K joins S2
        t4 = _random_table(rng, [2, 2, 2, 2], ["S1", "S2", "K", "T"])
        before = _raw_bivariate(t4, ["S1"], ["S2"], ["T"], m)
        after = _raw_bivariate(t4, ["S1"], ["S2", "K"], ["T"], m)
        note(d2, before[1] - after[1], MONOTONE_TOL, {"trial": trial, "before": before[1], "after": after[1]})
        for idx, atom in ((0, "redundant"), (2, "unique_augmented"), (3, "synergistic")):
            note(d3, after[idx] - before[idx], MONOTONE_TOL,
                 {"trial": trial, "atom": atom, "before": before[idx], "after": after[idx]})
    out = []
    for key, acc in (("D1", d1), ("D2", d2), ("D3", d3)):
        out.append(DesideratumVerdict(key, m.name, acc["n"], acc["bad"], float(acc["worst"]),
                                      tuple(acc["ex"]), m.desiderata.get(key, "")))
    return out


# -- batteries and output ------------------------------------------------------------

def default_manifest(seed: int = 0) -> dict:
    """Fixture sets plus small seeded random batches."""
    return {
        "seed": seed,
        "batteries": {
            "T1": fixture_descriptors("bn") + random_bn_descriptors(20, 4, 0.5, seed),
            "T2": fixture_descriptors("bn") + random_bn_descriptors(40, 5, 0.4, seed),
            "T3": fixture_descriptors("bn") + random_bn_descriptors(40, 5, 0.4, seed),
            "T4": fixture_descriptors("bh"),
            "T5": fixture_descriptors("bh"),
            "T6": fixture_descriptors("bh"),
        },
        "desiderata": {"imin": 200, "opt": 20},
    }


def run_battery(manifest: dict, theorems: Iterable[str] | None = None,
                threshold: float = ZERO_THRESHOLD, measure: str | None = None):
    """Run the named batteries; ``measure`` fills descriptors that do not pick one."""
    theorems = list(theorems) if theorems is not None else list(THEOREMS)
    unknown = [t for t in theorems if t not in VERIFIERS]
    if unknown:
        raise KeyError(f"unknown theorem ids {unknown}; choose from {list(THEOREMS)}")
    cache: dict = {}

    def inst(d):
        if measure is not None and "measure" not in d:
            d = {**d, "measure": measure}
        key = repr(sorted(d.items()))
        if key not in cache:
            cache[key] = Instance(d)
        return cache[key]

    verdicts = []
    for th in theorems:
        verdicts.extend(VERIFIERS[th]([inst(d) for d in manifest["batteries"].get(th, [])], threshold=threshold))
    des = []
    for measure, trials in sorted(manifest.get("desiderata", {}).items()):
        des.extend(verify_desiderata(measure, trials, manifest.get("seed", 0)))
    return verdicts, des


def summary_rows(verdicts: Sequence[TheoremVerdict]) -> list[dict]:
    rows = {}
    for v in verdicts:
        r = rows.setdefault(v.theorem, {"theorem": v.theorem, "instances": 0, "pass": 0, "fail": 0,
                                         "vacuous": 0, "quarantined": 0})
        r["instances"] += 1
        r[v.status] += 1
    return [rows[k] for k in sorted(rows)]


def summary_csv(verdicts: Sequence[TheoremVerdict], desiderata: Sequence[DesideratumVerdict] = ()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "measure", "instances", "pass", "fail", "vacuous", "quarantined", "worst_margin"])
    for r in summary_rows(verdicts):
        w.writerow([r["theorem"], "", r["instances"], r["pass"], r["fail"], r["vacuous"], r["quarantined"], ""])
    for d in desiderata:
        w.writerow([d.desideratum, d.measure, d.trials, d.trials - d.violations, d.violations, 0, 0,
                    repr(d.worst_margin)])
    return buf.getvalue()
