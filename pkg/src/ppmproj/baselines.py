"""Iterative reference solvers: ADMM and projected gradient, primal and dual.

These exist to benchmark the exact sweep, not to compete with it.  All four
solvers monitor the error max_j |M_j - M*_j| against a supplied reference
when available, otherwise the max-abs change between successive iterates.

The ancestry matrix is never inverted: its inverse is I minus the
closest-ancestor adjacency, so the dual quadratic is applied with a parent
difference followed by a child-sum subtraction, and the primal products use
per-depth batched path and subtree sums.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .tree import RootedTree, ancestor_sums, ancestry_matrix


@dataclass
class SolverConfig:
    """Tuning knobs shared by the iterative solvers."""

    rho: float = 1.0
    alpha: float = 1.0
    max_iters: int = 20000
    tol: float = 1e-8

    def __post_init__(self):
        if self.rho <= 0 or self.alpha <= 0 or self.tol <= 0:
            raise ValueError("rho, alpha and tol must all be positive")


@dataclass
class ConvergenceTrace:
    """Per-iteration error, objective, and elapsed wall time."""

    iterations: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    times: list = field(default_factory=list)
    converged: bool = False

    def record(self, it, error, objective, elapsed):
        self.iterations.append(it)
        self.errors.append(error)
        self.objectives.append(objective)
        self.times.append(elapsed)

    @property
    def final_error(self):
        return self.errors[-1] if self.errors else np.inf

    def iterations_to(self, tol):
        """First iteration index at which the error reached ``tol``; None if never."""
        for it, err in zip(self.iterations, self.errors):
            if err <= tol:
                return it
        return None

    def time_to(self, tol):
        """Elapsed seconds when the error first reached ``tol``; None if never."""
        for elapsed, err in zip(self.times, self.errors):
            if err <= tol:
                return elapsed
        return None

    def write_csv(self, fileobj):
        fileobj.write("iteration,error,objective,elapsed-seconds\n")
        for it, err, obj, el in zip(self.iterations, self.errors,
                                    self.objectives, self.times):
            fileobj.write(f"{it},{err:.17g},{obj:.17g},{el:.17g}\n")


class TreeOps:
    """Matrix-free applications of the ancestry matrix and its inverse."""

    def __init__(self, tree: RootedTree):
        self.q = tree.q
        parent = np.array(tree.parent[1:], dtype=np.intp) - 1  # root -> -1
        self.parent_idx = parent
        self.nonroot = np.flatnonzero(parent >= 0)
        depth = np.zeros(tree.q, dtype=np.intp)
        for v in tree.bfs_order():
            if tree.parent[v]:
                depth[v - 1] = depth[tree.parent[v] - 1] + 1
        levels = []
        for d in range(1, int(depth.max()) + 1 if tree.q > 1 else 1):
            levels.append(np.flatnonzero(depth == d))
        self.levels = levels

    def ancestor_cumsum(self, x):
        """U^T x: sum of x over each node's ancestors and itself."""
        out = np.array(x, dtype=float)
        for lvl in self.levels:
            out[lvl] += out[self.parent_idx[lvl]]
        return out

    def subtree_sum(self, x):
        """U x: sum of x over each node's subtree."""
        out = np.array(x, dtype=float)
        for lvl in reversed(self.levels):
            np.add.at(out, self.parent_idx[lvl], out[lvl])
        return out

    def diff_parent(self, z):
        """(U^-1)^T z, i.e. z minus the parent's value (root keeps its own)."""
        out = np.array(z, dtype=float)
        nr = self.nonroot
        out[nr] -= z[self.parent_idx[nr]]
        return out

    def subtract_children(self, w):
        """U^-1 w, i.e. w minus the sum of the children's values."""
        out = np.array(w, dtype=float)
        nr = self.nonroot
        np.subtract.at(out, self.parent_idx[nr], w[nr])
        return out

    def recover_fractions(self, z):
        """Mutant fractions and frequencies from a dual point; O(q) vectorized."""
        z = np.asarray(z, dtype=float)
        f = -z.copy()
        nr = self.nonroot
        f[nr] += z[self.parent_idx[nr]]
        m = f.copy()
        np.subtract.at(m, self.parent_idx[nr], f[nr])
        return m, f

    def gram_lmax(self, iters=60, seed=0):
        """Power-iteration estimate of the largest eigenvalue of U^T U."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(self.q)
        x /= np.linalg.norm(x)
        lam = 1.0
        for _ in range(iters):
            y = self.ancestor_cumsum(self.subtree_sum(x))
            lam = float(np.linalg.norm(y))
            if lam == 0.0:
                return 1.0
            x = y / lam
        return lam


def simplex_project(v):
    """Euclidean projection onto {x >= 0, sum x = 1}.

    Sort-free threshold refinement: repeatedly average the surviving active
    set to propose a threshold and drop entries at or below it; terminates
    in at most n rounds with the exact threshold.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    active = v
    tau = (active.sum() - 1.0) / active.size
    while True:
        mask = active > tau
        kept = int(mask.sum())
        if kept == active.size:
            break
        active = active[mask]
        tau = (active.sum() - 1.0) / kept
    return np.maximum(v - tau, 0.0)


def _simplex_project_sorted(v):
    """Sort-based simplex projection; validation twin of simplex_project."""
    v = np.asarray(v, dtype=float).reshape(-1)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    valid = u > css / ks
    k = int(np.max(ks[valid]))
    tau = css[k - 1] / k
    return np.maximum(v - tau, 0.0)


def polyhedron_project(a, b, n, return_stats=False):
    """Euclidean projection of (a, b) onto {(z, t): t*1 - z >= n}.

    Dual thresholding: sort the violations r = a + n - b, find the smallest
    sorted position whose suffix average certifies a nonnegative multiplier,
    and shift.  O(q log q), dominated by the single sort.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    n = np.asarray(n, dtype=float).reshape(-1)
    b = float(b)
    q = a.size
    r = a + n - b
    idx = np.argsort(r, kind="stable")
    rs = r[idx]
    suffix = np.cumsum(rs[::-1])[::-1]
    denom = 2.0 + q - np.arange(1, q + 1)
    c = rs - suffix / denom
    nonneg = np.flatnonzero(c >= 0.0)
    stats = {"sort_size": q, "scan_steps": q, "sorts": 1}
    if nonneg.size == 0:
        z, t = a.copy(), b
    else:
        tau = int(nonneg[0])
        lam_total = suffix[tau] / denom[tau]
        lam = np.zeros(q)
        lam[idx[tau:]] = rs[tau:] - lam_total
        z = a - lam
        t = b + lam_total
    if return_stats:
        return (z, t), stats
    return z, t


def _error_metric(m, reference_m, prev_m):
    if reference_m is not None:
        return float(np.max(np.abs(m - reference_m)))
    return float(np.max(np.abs(m - prev_m)))


class _DivergenceGuard:
    """Raises once the objective has risen a fixed number of times in a row."""

    def __init__(self, patience=10):
        self.patience = patience
        self.prev = np.inf
        self.rising = 0

    def check(self, objective):
        if objective > self.prev:
            self.rising += 1
            if self.rising >= self.patience:
                raise RuntimeError(
                    f"objective rose for {self.patience} consecutive "
                    "iterations; the step size is too large, reduce alpha")
        else:
            self.rising = 0
        self.prev = objective


def admm_primal(tree: RootedTree, fhat_col, cfg: SolverConfig = None,
                reference_m=None):
    """Consensus ADMM on the primal projection: quadratic prox by a cached
    factorization, simplex prox, then averaging and dual ascent.

    Returns ``(m, trace)``; ``trace.converged`` is False if the iteration
    cap was hit before the tolerance.
    """
    cfg = cfg or SolverConfig()
    f = np.asarray(fhat_col, dtype=float).reshape(-1)
    q = tree.q
    u = ancestry_matrix(tree).astype(float)
    rho, alpha = cfg.rho, cfg.alpha
    fac = cho_factor(rho * np.eye(q) + u.T @ u)
    utf = u.T @ f

    m = np.zeros(q)
    u1 = np.zeros(q)
    u2 = np.zeros(q)
    trace = ConvergenceTrace()
    start = time.perf_counter()
    for it in range(1, cfg.max_iters + 1):
        prev = m
        m1 = cho_solve(fac, rho * m - rho * u1 + utf)
        m2 = simplex_project(m - u2)
        m = 0.5 * (m1 + u1 + m2 + u2)
        u1 = u1 + alpha * (m1 - m)
        u2 = u2 + alpha * (m2 - m)
        err = _error_metric(m, reference_m, prev)
        obj = float(np.linalg.norm(f - u @ m))
        trace.record(it, err, obj, time.perf_counter() - start)
        if err <= cfg.tol:
            trace.converged = True
            break
    return m, trace


def admm_dual(tree: RootedTree, fhat_col, cfg: SolverConfig = None,
              reference_m=None):
    """Three-way consensus ADMM on the dual: quadratic prox, linear-in-t
    prox, and the polyhedron projection.  Returns ``(z, t, m, trace)``."""
    cfg = cfg or SolverConfig()
    f = np.asarray(fhat_col, dtype=float).reshape(-1)
    q = tree.q
    ops = TreeOps(tree)
    n = ancestor_sums(tree, f)
    rho, alpha = cfg.rho, cfg.alpha
    # U^-1 (U^-1)^T assembled from parent differences; dense factor cached.
    uinv = np.eye(q)
    for j in range(2, q + 1):
        uinv[tree.parent[j] - 1, j - 1] -= 1.0
    fac = cho_factor(rho * np.eye(q) + uinv @ uinv.T)

    z = np.zeros(q)
    t = 0.0
    u_z = np.zeros(q)
    u_gz = np.zeros(q)
    u_t = 0.0
    u_gt = 0.0
    m = np.zeros(q)
    trace = ConvergenceTrace()
    start = time.perf_counter()
    for it in range(1, cfg.max_iters + 1):
        prev = m
        x_z = cho_solve(fac, rho * (z - u_z))
        x_t = (rho * t - rho * u_t - 1.0) / rho
        x_gz, x_gt = polyhedron_project(z - u_gz, t - u_gt, n)
        z = 0.5 * (x_z + u_z + x_gz + u_gz)
        u_z = u_z + alpha * (x_z - z)
        u_gz = u_gz + alpha * (x_gz - z)
        t = 0.5 * (x_t + u_t + x_gt + u_gt)
        u_t = u_t + alpha * (x_t - t)
        u_gt = u_gt + alpha * (x_gt - t)
        m, _ = ops.recover_fractions(z)
        err = _error_metric(m, reference_m, prev)
        obj = t + 0.5 * float(np.sum(ops.diff_parent(z) ** 2))
        trace.record(it, err, obj, time.perf_counter() - start)
        if err <= cfg.tol:
            trace.converged = True
            break
    return z, t, m, trace


def default_pgd_step(tree: RootedTree) -> float:
    """Conservative gradient step: 0.99 over the largest Gram eigenvalue."""
    return 0.99 / TreeOps(tree).gram_lmax()


def pgd_primal(tree: RootedTree, fhat_col, cfg: SolverConfig = None,
               reference_m=None):
    """Projected gradient on the primal: gradient step, simplex projection.

    Raises RuntimeError when the objective rises for 10 straight iterations,
    which signals a step size above the descent range.
    """
    f = np.asarray(fhat_col, dtype=float).reshape(-1)
    ops = TreeOps(tree)
    if cfg is None:
        cfg = SolverConfig(alpha=0.99 / ops.gram_lmax())
    alpha = cfg.alpha
    m = simplex_project(np.zeros(tree.q))
    trace = ConvergenceTrace()
    guard = _DivergenceGuard()
    start = time.perf_counter()
    for it in range(1, cfg.max_iters + 1):
        prev = m
        residual = f - ops.subtree_sum(m)
        m = simplex_project(m + alpha * ops.ancestor_cumsum(residual))
        err = _error_metric(m, reference_m, prev)
        obj = float(np.linalg.norm(f - ops.subtree_sum(m)))
        trace.record(it, err, obj, time.perf_counter() - start)
        guard.check(obj)
        if err <= cfg.tol:
            trace.converged = True
            break
    return m, trace


def pgd_dual(tree: RootedTree, fhat_col, cfg: SolverConfig = None,
             reference_m=None):
    """Projected gradient on the dual: quadratic gradient via two sparse
    triangular applications, unit drift on t, polyhedron projection.

    Returns ``(z, t, m, trace)``.
    """
    f = np.asarray(fhat_col, dtype=float).reshape(-1)
    ops = TreeOps(tree)
    n = ancestor_sums(tree, f)
    if cfg is None:
        # The dual quadratic's curvature is bounded by the Gram spectrum of
        # the inverse ancestry factor; estimate it the same way.
        lam = _dual_lmax(ops)
        cfg = SolverConfig(alpha=0.99 / lam)
    alpha = cfg.alpha
    z = np.zeros(tree.q)
    t = float(np.max(n))
    m = np.zeros(tree.q)
    trace = ConvergenceTrace()
    guard = _DivergenceGuard()
    start = time.perf_counter()
    for it in range(1, cfg.max_iters + 1):
        prev = m
        z = z - alpha * ops.subtract_children(ops.diff_parent(z))
        t = t - alpha
        z, t = polyhedron_project(z, t, n)
        m, _ = ops.recover_fractions(z)
        err = _error_metric(m, reference_m, prev)
        obj = t + 0.5 * float(np.sum(ops.diff_parent(z) ** 2))
        trace.record(it, err, obj, time.perf_counter() - start)
        guard.check(obj)
        if err <= cfg.tol:
            trace.converged = True
            break
    return z, t, m, trace


def _dual_lmax(ops: TreeOps, iters=60, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(ops.q)
    x /= np.linalg.norm(x)
    lam = 1.0
    for _ in range(iters):
        y = ops.subtract_children(ops.diff_parent(x))
        lam = float(np.linalg.norm(y))
        if lam == 0.0:
            return 1.0
        x = y / lam
    return lam


SOLVERS = {
    "admm-primal": admm_primal,
    "admm-dual": admm_dual,
    "pgd-primal": pgd_primal,
    "pgd-dual": pgd_dual,
}


def _run_solver(solver_id, tree, fhat_col, cfg, reference_m):
    fn = SOLVERS[solver_id]
    try:
        out = fn(tree, fhat_col, cfg, reference_m=reference_m)
    except RuntimeError:
        return None  # diverging grid point; treat as a failed probe
    return out[-1]  # trace is always last


def autotune(solver_id, tree: RootedTree, fhat_col, grid,
             reference_m=None, return_trace=False):
    """Pick the grid config reaching the config's tolerance in the fewest
    iterations on this instance; ties go to the earlier grid entry.

    If nothing converges, the config with the smallest final error is
    returned and a warning is emitted.  With ``return_trace=True`` the
    winning probe's trace comes back too, saving a redundant re-run.
    """
    if solver_id not in SOLVERS:
        raise ValueError(f"unknown solver {solver_id!r}; choose from {sorted(SOLVERS)}")
    grid = list(grid)
    if not grid:
        raise ValueError("autotune grid is empty")
    best_cfg = None
    best_iters = None
    best_trace = None
    fallback_cfg = None
    fallback_trace = None
    fallback_err = np.inf
    for cfg in grid:
        trace = _run_solver(solver_id, tree, fhat_col, cfg, reference_m)
        if trace is None:
            continue
        its = trace.iterations_to(cfg.tol)
        if its is not None and (best_iters is None or its < best_iters):
            best_iters = its
            best_cfg = cfg
            best_trace = trace
        if trace.final_error < fallback_err:
            fallback_err = trace.final_error
            fallback_cfg = cfg
            fallback_trace = trace
    if best_cfg is None:
        if fallback_cfg is None:
            raise RuntimeError(f"every {solver_id} grid point diverged")
        warnings.warn(f"autotune: no grid point converged for {solver_id}; "
                      "returning the best-effort config")
        best_cfg, best_trace = fallback_cfg, fallback_trace
    if return_trace:
        return best_cfg, best_trace
    return best_cfg
