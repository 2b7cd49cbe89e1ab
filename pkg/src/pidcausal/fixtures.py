"""Curated models used by the tests, the verifier and ``pidcausal gen``.

Binary variables are too small for the minimum-specific-information measure
to give every neighbor of a high-degree node positive unique information
(each target state can be claimed by only one source), so hub variables
here carry more states.  The hypergraph heads are product states: one part
driven by each tail group, with an extra "null" state whose probability
does not depend on the tails.  Co-head coupling lives on split null states.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bayesnet import BayesianNetwork, Cpt, Dag
from .hypergraph import (
    BayesianHypergraph,
    DirectedHyperedge,
    DirectedHypergraph,
    Potential,
    with_root_priors,
)
from .probcore import JointTable, Variable

E = DirectedHyperedge


def _bn(names, cards, edges, tables) -> BayesianNetwork:
    dag = Dag(names, edges)
    variables = [Variable(n, c) for n, c in zip(names, cards)]
    cpts = [Cpt(n, dag.parents(n), tables[n]) for n in names]
    return BayesianNetwork(variables, dag, cpts)


def chain() -> BayesianNetwork:
    """X1 -> X2 -> X3 with one-sided noise, so X2 is claimed by both neighbors."""
    return _bn(["X1", "X2", "X3"], [2, 2, 2], [("X1", "X2"), ("X2", "X3")], {
        "X1": [0.8, 0.2],
        "X2": [[0.9, 0.1], [0.05, 0.95]],
        "X3": [[0.7, 0.3], [0.02, 0.98]],
    })


def fork() -> BayesianNetwork:
    """X1 <- X2 -> X3."""
    return _bn(["X1", "X2", "X3"], [2, 2, 2], [("X2", "X1"), ("X2", "X3")], {
        "X1": [[0.98, 0.02], [0.2, 0.8]],
        "X2": [0.25, 0.75],
        "X3": [[0.2, 0.8], [0.98, 0.02]],
    })


def collider() -> BayesianNetwork:
    """Noisy X1 -> X3 <- X2."""
    return _bn(["X1", "X2", "X3"], [2, 2, 2], [("X1", "X3"), ("X2", "X3")], {
        "X1": [0.4, 0.6],
        "X2": [0.1, 0.9],
        "X3": [[[0.85, 0.15], [0.45, 0.55]], [[0.8, 0.2], [0.02, 0.98]]],
    })


def xor_collider() -> BayesianNetwork:
    """Noiseless X3 = X1 xor X2 over fair coins."""
    t = np.zeros((2, 2, 2))
    for a, b in itertools.product(range(2), repeat=2):
        t[a, b, a ^ b] = 1.0
    return _bn(["X1", "X2", "X3"], [2, 2, 2], [("X1", "X3"), ("X2", "X3")],
               {"X1": [0.5, 0.5], "X2": [0.5, 0.5], "X3": t})


def copy_chain(noise: float = 0.0) -> BayesianNetwork:
    """X1 -> X2 -> X3 where each child copies its parent (flipped with prob ``noise``)."""
    t = [[1 - noise, noise], [noise, 1 - noise]]
    return _bn(["X1", "X2", "X3"], [2, 2, 2], [("X1", "X2"), ("X2", "X3")],
               {"X1": [0.5, 0.5], "X2": t, "X3": t})


def fig1a(strength: float = 3.0) -> BayesianNetwork:
    """X1..X4 -> X5; X5 has four states, state k leaning on parent k+1."""
    names = ["X1", "X2", "X3", "X4", "X5"]
    t = np.zeros((2, 2, 2, 2, 4))
    for x in itertools.product(range(2), repeat=4):
        w = np.exp(strength * np.array(x, dtype=float))
        t[x] = w / w.sum()
    tables = {n: [0.5, 0.5] for n in names[:4]}
    tables["X5"] = t
    return _bn(names, [2, 2, 2, 2, 4], [(p, "X5") for p in names[:4]], tables)


def fig1a_parity() -> BayesianNetwork:
    """X1..X4 -> X5 with X5 the parity of its parents."""
    names = ["X1", "X2", "X3", "X4", "X5"]
    t = np.zeros((2, 2, 2, 2, 2))
    for x in itertools.product(range(2), repeat=4):
        t[x + (sum(x) % 2,)] = 1.0
    tables = {n: [0.5, 0.5] for n in names[:4]}
    tables["X5"] = t
    return _bn(names, [2] * 5, [(p, "X5") for p in names[:4]], tables)


# -- hypergraph building blocks ------------------------------------------------------

def logit_part(b1: float, b2: float, c: float, null: float) -> np.ndarray:
    """P(part | x1, x2) over four states: two leaning on each tail, a filler, a null."""
    f = np.zeros((2, 2, 4))
    for x1, x2 in itertools.product(range(2), repeat=2):
        w = np.exp([b1 * x1, b2 * x2, c])
        f[x1, x2, :3] = (1 - null) * w / w.sum()
        f[x1, x2, 3] = null
    return f


def z_part(q: float, null: float, flip: int = 0, nulls: int = 1) -> np.ndarray:
    """P(part | x1, x2): state 0 fires only when x1 = 1 - flip, state 1 likewise for x2."""
    f = np.zeros((2, 2, 3 + nulls))
    for x1, x2 in itertools.product(range(2), repeat=2):
        u1, u2 = x1 ^ flip, x2 ^ flip
        f[x1, x2, 0] = (1 - null) * q * u1
        f[x1, x2, 1] = (1 - null) * q * u2
        f[x1, x2, 2] = (1 - null) * (1 - q * u1 - q * u2)
        f[x1, x2, 3:] = null / nulls
    return f


def _priors(names, probs):
    return [Potential(E((), (n,)), (n,), [1 - p, p]) for n, p in zip(names, probs)]


def fig1c_from_parts(f: np.ndarray, g: np.ndarray, priors=(0.5, 0.5, 0.5, 0.5)) -> BayesianHypergraph:
    """psi_125 and psi_345 on a product-state X5 = (A, B); A follows f(.|x1,x2), B follows g(.|x3,x4)."""
    names = ["X1", "X2", "X3", "X4", "X5"]
    ka, kb = f.shape[-1], g.shape[-1]
    e1, e2 = E(("X1", "X2"), ("X5",)), E(("X3", "X4"), ("X5",))
    h = with_root_priors(DirectedHypergraph(names, [e1, e2]))
    F = np.repeat(f, kb, axis=-1)           # X5 = kb * a + b
    G = np.tile(g, (1, 1, ka))
    pots = _priors(names[:4], priors) + [Potential(e1, ("X1", "X2", "X5"), F), Potential(e2, ("X3", "X4", "X5"), G)]
    variables = [Variable(n, 2) for n in names[:4]] + [Variable("X5", ka * kb)]
    return BayesianHypergraph(variables, h, pots)


def fig1c() -> BayesianHypergraph:
    f = logit_part(3.0, 3.0, 1.0, 0.25)
    return fig1c_from_parts(f, f)


def part_is_degenerate(f: np.ndarray, gap: float = 0.05) -> bool:
    """A part ignores a tail if flipping it never moves the distribution by more than ``gap``."""
    d1 = np.abs(f[1] - f[0]).max(axis=-1)
    d2 = np.abs(f[:, 1] - f[:, 0]).max(axis=-1)
    return not (np.all(d1 > gap) and np.all(d2 > gap))


def is_rectangular(phi: np.ndarray) -> bool:
    """True when every level set of phi(x1, x2) is a product set.

    Such a map reveals each tail separately, so the part cannot couple them.
    """
    for a in np.unique(phi):
        pts = {(int(i), int(j)) for i, j in zip(*np.nonzero(phi == a))}
        rows = {i for i, _ in pts}
        cols = {j for _, j in pts}
        if pts != set(itertools.product(rows, cols)):
            return False
    return True


def noisy_function_part(phi: np.ndarray, eps: float, noise: np.ndarray) -> np.ndarray:
    """P(part | x1, x2) = (1 - eps) [part = phi(x1, x2)] + eps * noise[x1, x2]."""
    k = noise.shape[-1]
    return (1 - eps) * np.eye(k)[phi] + eps * noise


def fig1c_random(seed: int, states: int = 3, max_eps: float = 0.3, max_tries: int = 1000) -> BayesianHypergraph:
    """Random potentials on the Figure 1c structure.

    Each part is a noisy function of its two tails.  Degenerate draws are
    resampled: rectangular functions (no coupling between the tails) and
    parts that barely react to one of the tails.
    """
    rng = np.random.default_rng(seed)

    def part():
        for _ in range(max_tries):
            phi = rng.integers(0, states, size=(2, 2))
            eps = rng.uniform(0.02, max_eps)
            f = noisy_function_part(phi, eps, rng.dirichlet(np.ones(states), size=(2, 2)))
            if not is_rectangular(phi) and not part_is_degenerate(f):
                return f
        raise RuntimeError("no non-degenerate part found")

    f, g = part(), part()
    priors = tuple(rng.uniform(0.2, 0.8, size=4))
    return fig1c_from_parts(f, g, priors)


def fig1b(q: float = 0.4, null: float = 0.2, coupling: float = 6.0) -> BayesianHypergraph:
    """({X1,X2},{X5,X6}) and ({X3,X4},{X5,X6}).

    Each head is a product (A, B).  A parts follow x1, x2 and B parts follow
    x3, x4; the X5 parts fire on ones and the X6 parts on zeros.  The A parts
    carry two null states, coupled across the heads.
    """
    names = ["X1", "X2", "X3", "X4", "X5", "X6"]
    a5, a6 = z_part(q, null, 0, 2), z_part(q, null, 1, 2)
    b5, b6 = z_part(q, null, 0, 1), z_part(q, null, 1, 1)
    ka, kb = a5.shape[-1], b5.shape[-1]
    K = np.ones((ka, ka))
    K[3:, 3:] = [[coupling, 1 / coupling], [1 / coupling, coupling]]
    n = ka * kb
    states = [(a, b) for a in range(ka) for b in range(kb)]
    F = np.zeros((2, 2, n, n))
    G = np.zeros((2, 2, n, n))
    for i, (x5a, x5b) in enumerate(states):
        for j, (x6a, x6b) in enumerate(states):
            F[:, :, i, j] = a5[:, :, x5a] * a6[:, :, x6a] * K[x5a, x6a]
            G[:, :, i, j] = b5[:, :, x5b] * b6[:, :, x6b]
    e1, e2 = E(("X1", "X2"), ("X5", "X6")), E(("X3", "X4"), ("X5", "X6"))
    h = with_root_priors(DirectedHypergraph(names, [e1, e2]))
    pots = _priors(names[:4], [0.5] * 4) + [
        Potential(e1, ("X1", "X2", "X5", "X6"), F), Potential(e2, ("X3", "X4", "X5", "X6"), G)]
    variables = [Variable(n_, 2) for n_ in names[:4]] + [Variable("X5", n), Variable("X6", n)]
    return BayesianHypergraph(variables, h, pots)


def fig2(q: float = 0.4, null: float = 0.2, coupling: float = 6.0) -> BayesianHypergraph:
    """Three edges: ({X1,X2},{X3}), ({X1,X2},{X4}), ({},{X3,X4})."""
    names = ["X1", "X2", "X3", "X4"]
    f3, f4 = z_part(q, null, 0, 2), z_part(q, null, 1, 2)
    K = np.ones((5, 5))
    K[3:, 3:] = [[coupling, 1 / coupling], [1 / coupling, coupling]]
    e1, e2, e3 = E(("X1", "X2"), ("X3",)), E(("X1", "X2"), ("X4",)), E((), ("X3", "X4"))
    h = with_root_priors(DirectedHypergraph(names, [e1, e2, e3]))
    pots = _priors(names[:2], [0.5, 0.5]) + [
        Potential(e1, ("X1", "X2", "X3"), f3), Potential(e2, ("X1", "X2", "X4"), f4),
        Potential(e3, ("X3", "X4"), K)]
    variables = [Variable("X1", 2), Variable("X2", 2), Variable("X3", 5), Variable("X4", 5)]
    return BayesianHypergraph(variables, h, pots)


def fig2_maximal() -> DirectedHypergraph:
    return DirectedHypergraph(["X1", "X2", "X3", "X4"], [E(("X1", "X2"), ("X3", "X4"))])


def relevance_counterexample() -> JointTable:
    """XOR sources and target each bundled with one shared fair coin K.

    Variables: A = (X1, K), B = (X2, K), C = (X1 xor X2, K), each with four
    states encoded as 2 * bit + k.
    """
    vs = [Variable("A", 4), Variable("B", 4), Variable("C", 4)]
    p = np.zeros((4, 4, 4))
    for x1, x2, k in itertools.product(range(2), repeat=3):
        p[2 * x1 + k, 2 * x2 + k, 2 * (x1 ^ x2) + k] = 1 / 8
    return JointTable(vs, p)


@dataclass(frozen=True)
class Fixture:
    name: str
    kind: str          # "bn" | "bh"
    build: Callable
    description: str


FIXTURES = {f.name: f for f in [
    Fixture("chain", "bn", chain, "X1 -> X2 -> X3"),
    Fixture("fork", "bn", fork, "X1 <- X2 -> X3"),
    Fixture("collider", "bn", collider, "X1 -> X3 <- X2"),
    Fixture("xor", "bn", xor_collider, "X3 = X1 xor X2"),
    Fixture("fig1a", "bn", fig1a, "X1..X4 -> X5"),
    Fixture("fig1b", "bh", fig1b, "({X1,X2},{X5,X6}), ({X3,X4},{X5,X6})"),
    Fixture("fig1c", "bh", fig1c, "({X1,X2},{X5}), ({X3,X4},{X5})"),
    Fixture("fig2", "bh", fig2, "({X1,X2},{X3}), ({X1,X2},{X4}), ({},{X3,X4})"),
]}
