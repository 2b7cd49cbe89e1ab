import json

import numpy as np
import pytest

from pidcausal import fixtures
from pidcausal.bayesnet import BayesianNetwork, Cpt, Dag, joint_from_bn
from pidcausal.discovery import (
    BudgetError,
    DiscoveredStructure,
    InconsistencyError,
    PIDEngine,
    discover_bayesnet,
    discover_hypergraph,
    discover_neighbors,
    hyperedge_signature_check,
    maximal_extend,
    resolve_remaining,
)
from pidcausal.hypergraph import DirectedHyperedge as E, DirectedHypergraph, fit_bayesian_hypergraph, with_root_priors
from pidcausal.probcore import Variable


def bn_table(name):
    return joint_from_bn(fixtures.FIXTURES[name].build())


def pairs(*ps):
    return frozenset(frozenset(p) for p in ps)


def test_chain_neighbors_of_end():
    rep = discover_neighbors(bn_table("chain"), "X3")
    assert set(rep.neighbors) == {"X2"}
    assert rep.values["X1"] <= 1e-12


def test_xor_target_has_no_neighbors():
    # unique information is bounded by mutual information, which is zero for each XOR parent
    rep = discover_neighbors(bn_table("xor"), "X3")
    assert rep.neighbors == {}


def test_isolated_variable_has_empty_report():
    bn = fixtures.collider()
    vs = list(bn.variables) + [Variable("Z", 2)]
    dag = Dag([v.name for v in vs], bn.dag.edges)
    cpts = list(bn.cpts.values()) + [Cpt("Z", (), np.array([0.3, 0.7]))]
    t = joint_from_bn(BayesianNetwork(vs, dag, cpts))
    assert discover_neighbors(t, "Z").neighbors == {}


@pytest.mark.parametrize("name,directed,undecided", [
    ("chain", set(), pairs(("X1", "X2"), ("X2", "X3"))),
    ("fork", set(), pairs(("X1", "X2"), ("X2", "X3"))),
    ("collider", {("X1", "X3"), ("X2", "X3")}, frozenset()),
    ("fig1a", {(f"X{i}", "X5") for i in range(1, 5)}, frozenset()),
])
@pytest.mark.parametrize("measure", ["imin", "opt"])
def test_equivalence_class_recovery(name, directed, undecided, measure):
    s = discover_bayesnet(bn_table(name), measure)
    assert set(s.directed) == directed
    assert s.undecided == undecided


def test_collider_evidence_recorded():
    s = discover_bayesnet(bn_table("collider"))
    assert s.colliders == {("X1", "X3", "X2")}
    rules = [d["rule"] for d in s.decisions]
    assert "co-parent synergy" in rules
    keys = {q["query"] for q in s.queries}
    assert "synergy:X2,X3->X1" in keys
    assert all(q["margin"] == pytest.approx(q["value"] - q["threshold"]) for q in s.queries)


def test_report_is_deterministic_and_thread_independent():
    t = bn_table("fig1a")
    a = json.dumps(discover_bayesnet(t).to_json(), sort_keys=True)
    b = json.dumps(discover_bayesnet(t, workers=3).to_json(), sort_keys=True)
    assert a == b


def test_conflicting_propagation_raises_with_trail():
    # A -> B - C <- D with A, C and B, D non-adjacent: rule 1 pushes both ways
    nodes = ("A", "B", "C", "D")
    skel = pairs(("A", "B"), ("B", "C"), ("C", "D"))
    partial = DiscoveredStructure(nodes, skel, frozenset({("A", "B"), ("D", "C")}), pairs(("B", "C")),
                                  decisions=({"conclusion": "seed", "rule": "test", "evidence": []},))
    with pytest.raises(InconsistencyError) as err:
        resolve_remaining(partial)
    assert err.value.trail[0]["conclusion"] == "seed"


def test_structure_partition_enforced():
    with pytest.raises(InconsistencyError):
        DiscoveredStructure(("A", "B"), pairs(("A", "B")), frozenset({("A", "B")}), pairs(("A", "B")))
    with pytest.raises(InconsistencyError):
        DiscoveredStructure(("A", "B", "C"), pairs(("A", "B"), ("B", "C"), ("A", "C")),
                            frozenset({("A", "B"), ("B", "C"), ("C", "A")}), frozenset())


def test_engine_caches_and_validates():
    eng = PIDEngine(bn_table("chain"))
    v = eng.unique("X2", "X3")
    assert eng.unique("X2", "X3") == v
    assert len(eng.queries()) == 1
    with pytest.raises(ValueError):
        PIDEngine(bn_table("chain"), threshold=0)


# -- hypergraph pipeline --------------------------------------------------------------

def labels(s):
    return sorted(e.label(s.nodes) for e in s.hyperedges)


def test_fig2_absorbed_into_one_edge():
    s = discover_hypergraph(fixtures.fig2().joint())
    assert labels(s) == ["{X1,X2}->{X3,X4}"]
    assert s.undecided == pairs(("X3", "X4"))
    assert not s.flags


def test_fig1b_and_fig1c():
    b = discover_hypergraph(fixtures.fig1b().joint())
    assert labels(b) == ["{X1,X2}->{X5,X6}", "{X3,X4}->{X5,X6}"]
    c = discover_hypergraph(fixtures.fig1c().joint())
    assert labels(c) == ["{X1,X2}->{X5}", "{X3,X4}->{X5}"]


def test_network_shaped_results():
    s = discover_hypergraph(bn_table("fig1a"))
    assert labels(s) == ["{X1,X2,X3,X4}->{X5}"]
    chain = discover_hypergraph(bn_table("chain"))
    assert chain.hyperedges == ()
    assert chain.undecided == pairs(("X1", "X2"), ("X2", "X3"))


def test_budget_error():
    with pytest.raises(BudgetError) as err:
        discover_hypergraph(fixtures.fig2().joint(), budget=5)
    assert err.value.budget == 5


def test_max_edge_size_validated():
    with pytest.raises(ValueError):
        discover_hypergraph(bn_table("chain"), max_edge_size=1)


def test_signature_check_reasons():
    t = fixtures.fig2().joint()
    assert hyperedge_signature_check(t, ["X1", "X2"], ["X3", "X4"]).passed
    bad = hyperedge_signature_check(t, ["X1", "X3"], ["X4"])
    assert not bad.passed and bad.failures
    with pytest.raises(ValueError):
        hyperedge_signature_check(t, ["X1"], ["X1"])


def test_maximal_extend_from_sub_edge():
    t = fixtures.fig2().joint()
    assert maximal_extend(t, ["X1", "X2"], ["X3"]) == E(("X1", "X2"), ("X3", "X4"))
    assert maximal_extend(t, [], ["X3", "X4"]) == E(("X1", "X2"), ("X3", "X4"))


@pytest.mark.parametrize("name", ["fig1c", "fig2"])
def test_refit_and_rediscover_is_idempotent(name):
    t = fixtures.FIXTURES[name].build().joint()
    first = discover_hypergraph(t)
    h = with_root_priors(DirectedHypergraph(t.names, list(first.hyperedges)))
    t2 = fit_bayesian_hypergraph(t, h).joint()
    assert t2.allclose(t, atol=1e-9)
    second = discover_hypergraph(t2)
    assert labels(second) == labels(first)
