import csv
import io
import json

import pytest

from pidcausal import verify
from pidcausal.bayesnet import joint_from_bn, random_bn


def fx(name):
    return {"source": "fixture", "name": name}


def test_chain_theorem_1_passes():
    (v,) = verify.verify_theorem_1([fx("chain")])
    assert v.status == "pass"
    assert {(c["probe"], c["target"]) for c in v.claims} == {("X1", "X3"), ("X3", "X1")}


def test_theorem_1_without_separable_pairs_is_vacuous():
    (v,) = verify.verify_theorem_1([fx("fig1a")])
    # parents of the 4-state collider are marginally independent, so claims exist
    assert v.status == "pass"
    (w,) = verify.verify_theorem_1([{"source": "random_bn", "seed": 0, "node_count": 2,
                                     "edge_probability": 1.0}])
    assert w.status == "vacuous"


def test_unfaithful_instance_is_quarantined():
    (v,) = verify.verify_theorem_2([fx("xor")])
    assert v.status == "quarantined"
    assert "faithfulness fails" in v.reasons
    assert v.claims == ()


@pytest.mark.parametrize("theorem", ["T2", "T3"])
@pytest.mark.parametrize("name", ["chain", "fork", "collider", "fig1a"])
def test_network_fixtures_pass(theorem, name):
    (v,) = verify.VERIFIERS[theorem]([fx(name)])
    assert v.status == "pass", v.failures


@pytest.mark.parametrize("theorem", ["T4", "T5", "T6"])
@pytest.mark.parametrize("name", ["fig1b", "fig1c", "fig2"])
def test_hypergraph_fixtures_pass(theorem, name):
    (v,) = verify.VERIFIERS[theorem]([fx(name)])
    assert v.status == "pass", v.failures


def test_network_given_to_hypergraph_check_is_quarantined():
    (v,) = verify.verify_theorem_4([fx("chain")])
    assert v.status == "quarantined"


def test_failures_carry_reproducible_counterexample():
    # an absurd threshold makes every true neighbor look irrelevant
    (v,) = verify.verify_theorem_2([fx("chain")], threshold=10.0)
    assert v.status == "fail"
    cx = v.counterexample
    assert cx["descriptor"] == fx("chain")
    assert cx["model"]["edges"] == [["X1", "X2"], ["X2", "X3"]]
    assert all(not c["passed"] for c in cx["failed_claims"])
    json.dumps(v.to_json())


def test_descriptor_rebuilds_same_model():
    d = verify.random_bn_descriptors(1, 5, 0.4, seed=42)[0]
    assert verify.Instance(d).table.allclose(joint_from_bn(random_bn(5, 0.4, 1.0, 42)), atol=0)
    with pytest.raises(ValueError):
        verify.Instance({"source": "nowhere"})


def test_desiderata_imin():
    res = {d.desideratum: d for d in verify.verify_desiderata("imin", trials=100, seed=1)}
    assert res["D1"].violations == 0
    assert res["D2"].violations == 0
    assert res["D3"].violations > 0 and res["D3"].status_note == "violated"
    assert res["D3"].examples


def test_desiderata_are_seeded():
    a = [d.to_json() for d in verify.verify_desiderata("imin", trials=20, seed=5)]
    b = [d.to_json() for d in verify.verify_desiderata("imin", trials=20, seed=5)]
    assert a == b


def test_battery_summary():
    manifest = {"seed": 0, "batteries": {"T1": [fx("chain"), fx("collider")], "T4": [fx("fig2")]},
                "desiderata": {"imin": 5}}
    verdicts, des = verify.run_battery(manifest, ["T1", "T4"])
    rows = list(csv.DictReader(io.StringIO(verify.summary_csv(verdicts, des))))
    t1 = next(r for r in rows if r["check"] == "T1")
    assert (t1["instances"], t1["pass"], t1["fail"]) == ("2", "2", "0")
    assert any(r["check"] == "D1" and r["measure"] == "imin" for r in rows)
    with pytest.raises(KeyError):
        verify.run_battery(manifest, ["T7"])
