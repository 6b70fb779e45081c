"""Exact projection onto the perfect phylogeny polytope for a fixed tree.

For one frequency column the projection is computed by following the
piecewise-linear path of the dual minimizer as the scalar dual variable t
decreases.  Starting from the largest cumulative frequency sum, nodes join
the constraint boundary one segment at a time; each segment's slopes come
from :mod:`ppmproj.rates`.  The sweep stops as soon as the objective
derivative drops below -1, pins down the optimal t by linear interpolation
on the final segment, and converts the dual minimizer into the projected
mutant fractions and frequencies.

The sweep is finite: at most q segments, each costing O(q), so a column
costs O(q^2) in the worst case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .rates import RATE_ONE_EPS, _compute_rates_internal
from .tree import RootedTree, ancestor_sums

LSECOND_GUARD = 1e-14


class DegeneracyError(ArithmeticError):
    """Vanishing curvature at finalization; indicates numerical corruption."""


def tie_tolerance(t: float) -> float:
    """Absolute tolerance for grouping simultaneous boundary events at t."""
    return 1e-9 * max(1.0, abs(t))


@dataclass
class PathState:
    """Sweep state at the i-th critical value."""

    index: int
    t: float
    boundary: frozenset
    z: np.ndarray
    z_rate: np.ndarray
    lprime: float
    lsecond: float


@dataclass
class ProjectionResult:
    """Projection of one frequency column onto the model polytope."""

    t_star: float
    z_star: np.ndarray
    m_star: np.ndarray
    f_star: np.ndarray
    cost: float
    iterations: int
    rate_recomputations: int
    path: Optional[list] = None


def recover_solution(tree: RootedTree, z_star):
    """Mutant fractions and frequencies from a completed dual minimizer.

    f[i] is the negated difference of z across the edge above node i (the
    root differencing against zero); m[i] subtracts the children's f from
    the node's own.  O(q).
    """
    q = tree.q
    z = np.asarray(z_star, dtype=float)
    f = np.empty(q)
    parent = tree.parent
    for i in range(1, q + 1):
        p = parent[i]
        f[i - 1] = -z[i - 1] + (z[p - 1] if p else 0.0)
    m = f.copy()
    for i in range(2, q + 1):
        m[parent[i] - 1] -= f[i - 1]
    return m, f


def next_critical(state: PathState, sums):
    """Largest t below the current critical value where a free node's path
    line meets its constraint line.

    Returns ``(t_next, newly_fixed)``; ``t_next`` is None when every free
    node moves at unit rate (parallel lines never intersect), which leaves
    the exit on the derivative test.  All candidates within the tie
    tolerance of the maximum are returned together.
    """
    n = np.asarray(sums, dtype=float)
    t_i = state.t
    boundary = state.boundary
    z = state.z
    rate = state.z_rate
    best = -math.inf
    p_vals = {}
    for r in range(1, len(n) + 1):
        if r in boundary:
            continue
        c = rate[r - 1]
        if c >= 1.0 - RATE_ONE_EPS:
            continue
        p_r = (n[r - 1] + z[r - 1] - t_i * c) / (1.0 - c)
        if p_r >= t_i:
            continue
        p_vals[r] = p_r
        if p_r > best:
            best = p_r
    if not p_vals:
        return None, frozenset()
    eps = tie_tolerance(best)
    newly = frozenset(r for r, p_r in p_vals.items() if p_r >= best - eps)
    return best, newly


def _sweep(tree: RootedTree, fhat_col, keep_path=False, counters=None):
    """Run the path-following sweep; shared core of :func:`project`."""
    q = tree.q
    n_arr = ancestor_sums(tree, fhat_col)
    n = [0.0] + n_arr.tolist()
    tparent = tree.parent

    t = max(n[1:])
    eps = tie_tolerance(t)
    fixed = [False] * (q + 1)
    z = [0.0] * (q + 1)
    for r in range(1, q + 1):
        if n[r] >= t - eps:
            fixed[r] = True
            z[r] = t - n[r]
    lp = 0.0
    path = [] if keep_path else None
    iterations = 0
    rate = None
    lpp = None

    while True:
        iterations += 1
        if iterations > q + 1:
            raise AssertionError("sweep exceeded the segment bound")
        rate, lpp = _compute_rates_internal(tree, fixed, counters=counters)
        if keep_path:
            path.append(PathState(
                index=iterations, t=t,
                boundary=frozenset(r for r in range(1, q + 1) if fixed[r]),
                z=np.array(z[1:]), z_rate=np.array(rate[1:]),
                lprime=lp, lsecond=lpp,
            ))

        best = -math.inf
        p_list = None
        for r in range(1, q + 1):
            if fixed[r]:
                continue
            c = rate[r]
            if c >= 1.0 - RATE_ONE_EPS:
                continue
            p_r = (n[r] + z[r] - t * c) / (1.0 - c)
            if p_r >= t:
                continue
            if p_list is None:
                p_list = [-math.inf] * (q + 1)
            p_list[r] = p_r
            if p_r > best:
                best = p_r
        if p_list is None:
            break

        t_next = best
        lp_next = lp + (t_next - t) * lpp
        if lp_next < -1.0:
            break

        dt = t_next - t
        for r in range(1, q + 1):
            z[r] += dt * rate[r]
        eps = tie_tolerance(t_next)
        for r in range(1, q + 1):
            if p_list[r] >= t_next - eps:
                fixed[r] = True
            if fixed[r]:
                z[r] = t_next - n[r]
        t = t_next
        lp = lp_next

    if lpp < LSECOND_GUARD:
        raise DegeneracyError(
            f"curvature {lpp} vanished at finalization (expected > 0)")
    t_star = t - (1.0 + lp) / lpp
    z_star = np.array([z[r] + (t_star - t) * rate[r] for r in range(1, q + 1)])
    return t_star, z_star, iterations, path


def project(tree: RootedTree, fhat_col, keep_path=False,
            counters=None) -> ProjectionResult:
    """Project one frequency column onto the model polytope of ``tree``.

    ``fhat_col`` may be any finite real vector; entries outside [0, 1] are
    legal (the dual is defined for any cumulative sums).  Returns the unique
    minimizer: optimal mutant fractions ``m_star`` on the simplex, model
    frequencies ``f_star``, the dual values, and the Euclidean cost.

    With ``keep_path=True`` the result carries the list of per-segment
    :class:`PathState` records for path-structure inspection.
    """
    f = np.asarray(fhat_col, dtype=float).reshape(-1)
    t_star, z_star, iterations, path = _sweep(tree, f, keep_path=keep_path,
                                              counters=counters)
    m, fv = recover_solution(tree, z_star)
    cost = float(np.linalg.norm(f - fv))
    return ProjectionResult(
        t_star=t_star, z_star=z_star, m_star=m, f_star=fv, cost=cost,
        iterations=iterations, rate_recomputations=iterations, path=path,
    )


def project_matrix(tree: RootedTree, fhat):
    """Project every column of a q-by-p frequency matrix independently.

    Returns ``(results, total_cost)`` with one :class:`ProjectionResult`
    per column and the aggregate cost ``sqrt(sum of squared column costs)``
    (the matrix objective decomposes column-wise after squaring).
    """
    mat = np.asarray(fhat, dtype=float)
    if mat.ndim == 1:
        mat = mat[:, None]
    if mat.shape[0] != tree.q:
        raise ValueError(f"matrix has {mat.shape[0]} rows, tree has {tree.q} nodes")
    results = [project(tree, mat[:, s]) for s in range(mat.shape[1])]
    total = math.sqrt(sum(r.cost ** 2 for r in results))
    return results, total
