import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pidcausal import broja, fixtures
from pidcausal.bayesnet import joint_from_bn
from pidcausal.lattice import Antichain, enumerate_lattice
from pidcausal.pid import (
    IMIN,
    OPT,
    MonotonicityScenario,
    SupervariableCapError,
    SupervariableQuery,
    check_desideratum_monotonicity,
    flat_triple,
    get_measure,
    pid_bivariate,
    pid_trivariate,
    synergy_pair,
    unique_info_vs_rest,
)
from pidcausal.probcore import JointTable, ProbabilityError, Variable, mutual_information

BITS = [Variable(n, 2) for n in ("X1", "X2", "T")]


def gate(fn):
    return JointTable.from_function(BITS, lambda s: float(s[2] == fn(s[0], s[1])))


XOR = gate(lambda a, b: a ^ b)
COPY = gate(lambda a, b: a)
AND = gate(lambda a, b: a & b)
DUPLICATE = JointTable.from_function(BITS, lambda s: float(s[0] == s[1] == s[2]))


def random_table(seed, cards=(2, 2, 2)):
    rng = np.random.default_rng(seed)
    vs = [Variable(n, c) for n, c in zip(("X1", "X2", "T"), cards)]
    return JointTable(vs, rng.dirichlet(np.full(int(np.prod(cards)), 0.7)).reshape(cards))


@pytest.mark.parametrize("measure", ["imin", "opt"])
@pytest.mark.parametrize("table,expected", [
    (XOR, (0, 0, 0, 1)),
    (COPY, (0, 1, 0, 0)),
    (DUPLICATE, (1, 0, 0, 0)),
])
def test_canonical_gates(measure, table, expected):
    atoms = pid_bivariate(table, ["X1"], ["X2"], ["T"], measure)
    assert atoms.as_tuple() == pytest.approx(expected, abs=1e-9)


def test_and_gate_imin_values():
    # I_min on AND: redundancy 0.311 bits, no unique information
    atoms = pid_bivariate(AND, ["X1"], ["X2"], ["T"])
    names, d = oracles.as_dict(AND)
    assert atoms.as_tuple() == pytest.approx(oracles.imin_bivariate(names, d, ["X1"], ["X2"], ["T"]), abs=1e-12)
    assert atoms.unique_1 == pytest.approx(0.0, abs=1e-12)
    assert atoms.redundant == pytest.approx(0.3112781244591328, abs=1e-12)


def test_frozen_collider_atoms():
    t = joint_from_bn(fixtures.collider())
    imin = pid_bivariate(t, ["X1"], ["X2"], ["X3"], "imin").as_tuple()
    assert imin == pytest.approx((0.10521192093023045, 0.036127086594415755,
                                  0.010505107966020069, 0.16546756950247776), abs=1e-10)
    opt = pid_bivariate(t, ["X1"], ["X2"], ["X3"], "opt")
    assert (opt.unique_1, opt.unique_2) == pytest.approx((0.07008624726448287, 0.044464268636087656), abs=1e-6)


@pytest.mark.parametrize("seed", range(25))
@pytest.mark.parametrize("measure", ["imin", "opt"])
def test_decomposition_identities(seed, measure):
    t = random_table(seed, cards=(2 + seed % 2, 2, 2 + seed % 3))
    a = pid_bivariate(t, ["X1"], ["X2"], ["T"], measure)
    i1 = mutual_information(t, ["X1"], ["T"])
    i2 = mutual_information(t, ["X2"], ["T"])
    i12 = mutual_information(t, ["X1", "X2"], ["T"])
    assert a.redundant + a.unique_1 == pytest.approx(i1, abs=1e-9)
    assert a.redundant + a.unique_2 == pytest.approx(i2, abs=1e-9)
    assert a.total == pytest.approx(i12, abs=1e-9)
    assert min(a.as_tuple()) >= 0


@pytest.mark.parametrize("seed", range(8))
def test_opt_matches_conic_oracle(seed):
    pytest.importorskip("cvxpy")
    t = random_table(100 + seed, cards=(3, 3, 2))
    a = pid_bivariate(t, ["X1"], ["X2"], ["T"], "opt")
    ui1, ui2 = oracles.broja_cvxpy(flat_triple(t, ["T"], ["X1"], ["X2"]))
    assert a.unique_1 == pytest.approx(max(ui1, 0), abs=1e-6)
    assert a.unique_2 == pytest.approx(max(ui2, 0), abs=1e-6)


def test_opt_unique_bounded_by_imin_relation():
    # the optimization measure's redundancy never exceeds the smaller marginal MI
    for seed in range(10):
        t = random_table(seed)
        a = pid_bivariate(t, ["X1"], ["X2"], ["T"], "opt")
        assert a.redundant <= min(mutual_information(t, ["X1"], ["T"]),
                                  mutual_information(t, ["X2"], ["T"])) + 1e-9


def test_broja_reports_non_convergence():
    p = random_table(3, cards=(3, 3, 3)).array.transpose(2, 0, 1)
    with pytest.raises(broja.ConvergenceError) as err:
        broja.solve(p, tol=0.0, max_sweeps=2)
    assert err.value.sweeps == 2


def test_supervariable_query_and_rest():
    t = joint_from_bn(fixtures.chain())
    q = SupervariableQuery.for_table(t, "X3", "X2")
    assert q.rest == ("X1",)
    assert unique_info_vs_rest(t, q) == pytest.approx(0.1383982567366832, abs=1e-10)
    assert unique_info_vs_rest(t, SupervariableQuery.for_table(t, "X3", "X1")) == pytest.approx(0, abs=1e-12)
    with pytest.raises(ProbabilityError):
        SupervariableQuery.for_table(t, "X1", "X1")


def test_supervariable_cap():
    t = joint_from_bn(fixtures.chain())
    with pytest.raises(SupervariableCapError):
        unique_info_vs_rest(t, SupervariableQuery.for_table(t, "X3", "X2"), cap=1)


@pytest.mark.parametrize("measure", ["imin", "opt"])
def test_frozen_fig1a_parent_unique(measure):
    t = joint_from_bn(fixtures.fig1a())
    vals = [unique_info_vs_rest(t, SupervariableQuery.for_table(t, "X5", p), measure) for p in ("X1", "X2", "X3", "X4")]
    if measure == "imin":
        assert vals == pytest.approx([0.08169415710992196] * 4, abs=1e-10)
    else:
        assert min(vals) > 1e-3


def test_synergy_pair():
    assert synergy_pair(XOR, "X1", "X2", "T") == pytest.approx(1.0, abs=1e-12)
    assert synergy_pair(COPY, "X1", "X2", "T") == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ProbabilityError):
        synergy_pair(XOR, "X1", "X1", "T")


def test_overlapping_arguments_rejected():
    with pytest.raises(ProbabilityError):
        pid_bivariate(XOR, ["X1"], ["X1"], ["T"])
    with pytest.raises(ValueError):
        get_measure("nope")


def test_trivariate_requires_lattice_measure():
    vs = [Variable(n, 2) for n in ("A", "B", "C", "T")]
    t = JointTable.from_function(vs, lambda s: float(s[3] == s[0]))
    atoms = pid_trivariate(t, ["A", "B", "C"], "T")
    assert atoms[Antichain([[1]])] == pytest.approx(1.0, abs=1e-12)
    assert atoms.total() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        pid_trivariate(t, ["A", "B", "C"], "T", "opt")
    assert len(atoms) == len(enumerate_lattice(3))


def test_measure_registry_records_desiderata():
    assert IMIN.lattice_compatible and not OPT.lattice_compatible
    assert IMIN.desiderata["D1"] == "proven"
    assert IMIN.desiderata["D3"] == "violated"


# -- monotonicity scenarios -----------------------------------------------------------

def augmented(seed, mode):
    rng = np.random.default_rng(seed)
    base = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)      # X1, X2, T
    vs = [Variable(n, 2) for n in ("X1", "X2", "T", "K")]
    p = np.zeros((2,) * 4)
    kind = {"independent": None, "probe": 0, "target": 2}[mode]
    q = rng.dirichlet(np.ones(2))
    for s in np.ndindex(2, 2, 2):
        for k in range(2):
            p[s + (k,)] = base[s] * (q[k] if kind is None else float(k == s[kind]))
    return JointTable(vs, p)


SCENARIO = MonotonicityScenario(("X1",), ("X2",), ("K",), ("T",))


@pytest.mark.parametrize("measure", ["imin", "opt"])
@pytest.mark.parametrize("seed", range(5))
def test_independent_augmentation_changes_nothing(measure, seed):
    r = check_desideratum_monotonicity(augmented(seed, "independent"), SCENARIO, measure)
    tol = 1e-9 if measure == "imin" else 1e-6
    assert r.after.as_tuple() == pytest.approx(r.before.as_tuple(), abs=tol)


@pytest.mark.parametrize("measure", ["imin", "opt"])
@pytest.mark.parametrize("seed", range(5))
def test_copy_of_probe_does_not_raise_probe_unique(measure, seed):
    r = check_desideratum_monotonicity(augmented(seed, "probe"), SCENARIO, measure, tol=1e-7)
    assert r.unique_monotone
    assert r.after.unique_1 == pytest.approx(0.0, abs=1e-7)


@pytest.mark.parametrize("measure", ["imin", "opt"])
@pytest.mark.parametrize("seed", range(5))
def test_copy_of_target_raises_augmented_unique(measure, seed):
    t = augmented(seed, "target")
    r = check_desideratum_monotonicity(t, SCENARIO, measure, tol=1e-7)
    assert r.info_monotone["unique_augmented"]
    assert r.after.unique_2 > r.before.unique_2
    # synergy collapses: the augmented source alone determines the target
    assert r.after.synergistic == pytest.approx(0.0, abs=1e-7)
