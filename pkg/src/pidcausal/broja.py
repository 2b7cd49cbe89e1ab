"""Bivariate unique information by constrained optimization.

Minimizes I_Q(T; X | Y) over joints Q(t, x, y) that keep the pairwise
marginals Q(t, x) = P(t, x) and Q(t, y) = P(t, y).  For each target state
the feasible slice Q(t, ., .) is a transportation polytope; the solver
cycles through its elementary 2x2 moves (+δ, −δ, −δ, +δ), each of which
preserves both marginals, and takes an exact line search along each one.
The objective is convex along every move.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

MAX_SWEEPS = 100_000
RESIDUAL_TOL = 1e-8
ZERO_OBJECTIVE_TOL = 1e-12
LN2 = math.log(2.0)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float, sweeps: int):
        super().__init__(f"{message} (residual {residual:.3e} after {sweeps} sweeps)")
        self.residual = residual
        self.sweeps = sweeps


@dataclass(frozen=True)
class BrojaSolution:
    q: np.ndarray
    sweeps: int
    residual: float


@njit(cache=True)
def _dphi(delta, q, big, sign):
    total = 0.0
    for c in range(4):
        a = q[c] + sign[c] * delta
        b = big[c] + sign[c] * delta
        if b <= 0.0:
            continue
        if a <= 0.0:
            total += sign[c] * -np.inf
        else:
            total += sign[c] * (math.log(a) - math.log(b))
    return total


@njit(cache=True)
def _ddphi(delta, q, big, sign):
    total = 0.0
    for c in range(4):
        a = q[c] + sign[c] * delta
        b = big[c] + sign[c] * delta
        if a > 0.0 and b > 0.0:
            total += 1.0 / a - 1.0 / b
    return total


@njit(cache=True)
def _line_search(q, big, sign, lo, hi):
    """Root of the (monotone) derivative on [lo, hi]; 0 when already flat."""
    g0 = _dphi(0.0, q, big, sign)
    if abs(g0) < 1e-15:
        return 0.0
    if _dphi(lo, q, big, sign) >= 0.0:
        return lo
    if _dphi(hi, q, big, sign) <= 0.0:
        return hi
    a, b = lo, hi
    x = 0.0
    for _ in range(200):
        g = _dphi(x, q, big, sign)
        if abs(g) < 1e-15:
            break
        if g > 0:
            b = x
        else:
            a = x
        if b - a < 1e-18:
            break
        h = _ddphi(x, q, big, sign)
        if h > 0 and math.isfinite(g):
            step = x - g / h
            if step == x:
                break
            if a < step < b:
                x = step
                continue
        x = 0.5 * (a + b)
    return x


@njit(cache=True)
def _objective(q, qxy, h_t_given_y):
    """I(T; X | Y) in nats under q."""
    f = 0.0
    for v in q.ravel():
        if v > 0.0:
            f += v * math.log(v)
    for v in qxy.ravel():
        if v > 0.0:
            f -= v * math.log(v)
    return h_t_given_y + f


@njit(cache=True)
def _sweeps(q, qxy, moves, tol, max_sweeps, h_t_given_y, zero_tol):
    sign = np.array([1.0, -1.0, -1.0, 1.0])
    qc = np.empty(4)
    Qc = np.empty(4)
    ca = np.empty(4, dtype=np.int64)
    cb = np.empty(4, dtype=np.int64)
    residual = 0.0
    for sweep in range(1, max_sweeps + 1):
        residual = 0.0
        for m in range(moves.shape[0]):
            t = moves[m, 0]
            ca[0] = moves[m, 1]; cb[0] = moves[m, 3]
            ca[1] = moves[m, 1]; cb[1] = moves[m, 4]
            ca[2] = moves[m, 2]; cb[2] = moves[m, 3]
            ca[3] = moves[m, 2]; cb[3] = moves[m, 4]
            for c in range(4):
                qc[c] = q[t, ca[c], cb[c]]
                Qc[c] = qxy[ca[c], cb[c]]
            lo = -min(qc[0], qc[3])
            hi = min(qc[1], qc[2])
            if hi - lo <= 0.0:
                continue
            d = _line_search(qc, Qc, sign, lo, hi)
            if d == 0.0:
                continue
            for c in range(4):
                q[t, ca[c], cb[c]] = max(qc[c] + sign[c] * d, 0.0)
                qxy[ca[c], cb[c]] = max(Qc[c] + sign[c] * d, 0.0)
            residual = max(residual, abs(d))
        if residual <= tol:
            return sweep, residual
        # the objective is non-negative, so reaching zero certifies the optimum
        if _objective(q, qxy, h_t_given_y) <= zero_tol:
            return sweep, residual
    return -1, residual


def solve(p_txy: np.ndarray, *, tol: float = RESIDUAL_TOL, max_sweeps: int = MAX_SWEEPS) -> BrojaSolution:
    p = np.asarray(p_txy, dtype=np.float64)
    nt, nx, ny = p.shape
    p_t = p.sum(axis=(1, 2))
    p_tx = p.sum(axis=2)
    p_ty = p.sum(axis=1)
    q = np.zeros_like(p)
    for t in range(nt):
        if p_t[t] > 0:
            q[t] = np.outer(p_tx[t], p_ty[t]) / p_t[t]
    qxy = q.sum(axis=0)
    moves = []
    for t in range(nt):
        xs = [x for x in range(nx) if p_tx[t, x] > 0]
        ys = [y for y in range(ny) if p_ty[t, y] > 0]
        for i, x in enumerate(xs):
            for x2 in xs[i + 1:]:
                for j, y in enumerate(ys):
                    for y2 in ys[j + 1:]:
                        moves.append((t, x, x2, y, y2))
    moves = np.array(moves, dtype=np.int64).reshape(-1, 5)
    p_y = p_ty.sum(axis=0)
    h_t_given_y = float(-(p_ty[p_ty > 0] * np.log(p_ty[p_ty > 0])).sum() + (p_y[p_y > 0] * np.log(p_y[p_y > 0])).sum())
    sweeps, residual = _sweeps(q, qxy, moves, tol, max_sweeps, h_t_given_y, ZERO_OBJECTIVE_TOL)
    if sweeps < 0:
        raise ConvergenceError("unique-information optimizer did not converge", residual, max_sweeps)
    return BrojaSolution(q, sweeps=sweeps, residual=residual)


def cond_mi_bits(q: np.ndarray) -> tuple[float, float, float]:
    """(I(T;X|Y), I(T;Y|X), I(T;X,Y)) in bits for a joint laid out as (t, x, y)."""
    def H(arr):
        a = arr[arr > 0]
        return float(-(a * np.log2(a)).sum())
    h_txy = H(q)
    h_xy = H(q.sum(axis=0))
    h_tx = H(q.sum(axis=2))
    h_ty = H(q.sum(axis=1))
    h_x = H(q.sum(axis=(0, 2)))
    h_y = H(q.sum(axis=(0, 1)))
    h_t = H(q.sum(axis=(1, 2)))
    i_x_given_y = h_ty + h_xy - h_txy - h_y
    i_y_given_x = h_tx + h_xy - h_txy - h_x
    i_joint = h_t + h_xy - h_txy
    return i_x_given_y, i_y_given_x, i_joint
