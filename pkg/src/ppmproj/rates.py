"""Slope computation for the piecewise-linear dual path.

Once a set of nodes is pinned to the constraint boundary, the remaining free
coordinates of the path minimizer solve an unconstrained weighted tree
quadratic.  This module computes the per-node slopes (rates of change with
respect to the sweep parameter t) by decomposing the tree into subtrees
separated by boundary nodes and solving each subtree with three local moves:

* pruning free leaves (their optimum copies the parent's),
* a closed-form star solve when a single free node remains,
* collapsing fixed children into their free parent (a harmonic-weight
  reduction), shrinking the problem by one node per step.

The reduction recursion mutates the problem in place and restores it on the
way out, so memory stays linear in the subtree size.
"""

from __future__ import annotations

import numpy as np

from .tree import RootedTree

RATE_ONE_EPS = 1e-12


class SubtreeInvariantError(RuntimeError):
    """A boundary node ended up neither a leaf nor the root of its subtree."""


def star_solve(gammas, alphas, betas):
    """Solve a star problem with a single free center node.

    Layout follows the star convention: position 0 is the free center,
    position 1 is the root the center hangs from, positions 2.. are fixed
    leaf children.  Fixed node i moves along the line ``alphas[i] * t +
    betas[i]``; ``gammas[i]`` is the weight of the edge from node i to its
    parent (so ``gammas[0]`` weighs the center-root edge).  ``gammas[1]``,
    ``alphas[0]`` and ``betas[0]`` are ignored and may be None.

    Returns the (slope, intercept) of the center's optimum, the weighted
    average of the neighbor lines.
    """
    g_center = float(gammas[0])
    num_a = g_center * float(alphas[1])
    num_b = g_center * float(betas[1])
    den = g_center
    for i in range(2, len(gammas)):
        g = float(gammas[i])
        num_a += g * float(alphas[i])
        num_b += g * float(betas[i])
        den += g
    return num_a / den, num_b / den


class SubtreeProblem:
    """A weighted tree quadratic with some nodes fixed on affine lines of t.

    Nodes keep their global labels.  ``parent``/``children`` describe the
    subtree; fixed nodes sit on ``alpha[j] * t + beta[j]`` and must be leaves
    or the root.  ``gamma[j] > 0`` weighs the edge from j to its parent; for
    an anchored root it weighs the root-to-zero term instead.

    ``root_anchored`` marks the case where the subtree root is the global
    root and free: its optimum is tied toward zero by the anchor term, which
    behaves exactly like a fixed parent on the line 0*t + 0.
    """

    def __init__(self, root, parent, children, fixed, alpha, beta, gamma,
                 root_anchored=False, validate=True):
        self.root = root
        self.parent = parent
        self.children = children
        self.fixed = fixed
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.root_anchored = root_anchored
        self.pruned = []
        self._undo = []
        if validate:
            self._validate()

    def _validate(self):
        for j in self.fixed:
            if j != self.root and self.children[j]:
                raise SubtreeInvariantError(
                    f"fixed node {j} is neither a leaf nor the root of its subtree")
        for j, g in self.gamma.items():
            if not g > 0:
                raise ValueError(f"gamma[{j}] = {g} must be positive")
        if not self.free_nodes():
            raise ValueError("subtree problem has no free nodes")

    def free_nodes(self):
        return [j for j in self.children if j not in self.fixed]

    def parent_is_fixed(self, j):
        if j == self.root:
            return self.root_anchored
        return self.parent[j] in self.fixed

    def parent_line(self, j):
        """(alpha, beta) of the line the parent of free node j sits on."""
        if j == self.root:
            return 0.0, 0.0
        p = self.parent[j]
        return self.alpha[p], self.beta[p]

    def snapshot(self):
        return (
            dict(self.alpha), dict(self.beta), dict(self.gamma),
            {k: tuple(v) for k, v in self.children.items()},
            set(self.fixed),
        )


def build_subtree_problem(tree: RootedTree, fixed_flags, seed, visited=None):
    """Assemble the subtree problem for the free component containing ``seed``.

    ``fixed_flags`` is a 1-indexed boolean sequence marking boundary nodes.
    The component is grown over free nodes only; adjacent fixed nodes join as
    the subtree root (when above) or as leaves (when below), all on the line
    1*t + 0, with unit edge weights.  ``visited`` (1-indexed booleans) is
    marked for every free node absorbed.
    """
    tparent, tchildren = tree.parent, tree.children
    comp = [seed]
    in_comp = {seed}
    if visited is not None:
        visited[seed] = True
    head = 0
    while head < len(comp):
        u = comp[head]
        head += 1
        p = tparent[u]
        if p and not fixed_flags[p] and p not in in_comp:
            in_comp.add(p)
            comp.append(p)
            if visited is not None:
                visited[p] = True
        for c in tchildren[u]:
            if not fixed_flags[c] and c not in in_comp:
                in_comp.add(c)
                comp.append(c)
                if visited is not None:
                    visited[c] = True

    top = None
    for u in comp:
        p = tparent[u]
        if p == 0 or fixed_flags[p]:
            top = u
            break

    parent, children, fixed = {}, {}, set()
    alpha, beta, gamma = {}, {}, {}
    anchor = tparent[top] == 0
    if anchor:
        root = top
        parent[top] = 0
    else:
        root = tparent[top]
        parent[root] = 0
        parent[top] = root
        children[root] = [top]
        fixed.add(root)
        alpha[root], beta[root] = 1.0, 0.0
        gamma[root] = 1.0
    for u in comp:
        gamma[u] = 1.0
        kids = []
        for c in tchildren[u]:
            kids.append(c)
            parent[c] = u
            if fixed_flags[c]:
                fixed.add(c)
                alpha[c], beta[c] = 1.0, 0.0
                gamma[c] = 1.0
                children[c] = []
        children[u] = kids
    return SubtreeProblem(root, parent, children, fixed, alpha, beta, gamma,
                          root_anchored=anchor, validate=False)


def prune_free_leaves(problem: SubtreeProblem) -> SubtreeProblem:
    """Repeatedly remove free leaves; their optimum equals their parent's.

    Each removal is recorded in ``problem.pruned`` as (node, parent) so the
    caller can back-fill values parent-to-child in reverse prune order.  The
    subtree root is never pruned.
    """
    children = problem.children
    fixed = problem.fixed
    stack = [j for j in children
             if j not in fixed and not children[j] and j != problem.root]
    while stack:
        u = stack.pop()
        p = problem.parent[u]
        children[p].remove(u)
        del children[u]
        del problem.gamma[u]
        del problem.parent[u]
        problem.pruned.append((u, p))
        if p != problem.root and p not in fixed and not children[p]:
            stack.append(p)
    return problem


def reduce_node(problem: SubtreeProblem, j) -> SubtreeProblem:
    """Collapse the fixed children of free node j, fixing j in their place.

    j's replacement line is the gamma-weighted average of its children's
    lines, and its new edge weight is the harmonic combination of its own
    weight with the children's total.  The mutation is recorded so
    :func:`restore_reduction` can undo it exactly.
    """
    if j in problem.fixed:
        raise SubtreeInvariantError(f"reduce_node: node {j} is already fixed")
    if problem.parent_is_fixed(j):
        raise SubtreeInvariantError(f"reduce_node: parent of node {j} is not free")
    kids = problem.children[j]
    if not kids or any(c not in problem.fixed for c in kids):
        raise SubtreeInvariantError(f"reduce_node: children of {j} are not all fixed")
    s = a = b = 0.0
    for c in kids:
        g = problem.gamma[c]
        s += g
        a += g * problem.alpha[c]
        b += g * problem.beta[c]
    problem._undo.append((j, problem.gamma[j], kids))
    problem.alpha[j] = a / s
    problem.beta[j] = b / s
    problem.gamma[j] = 1.0 / (1.0 / problem.gamma[j] + 1.0 / s)
    problem.children[j] = []
    problem.fixed.add(j)
    return problem


def restore_reduction(problem: SubtreeProblem):
    """Undo the most recent :func:`reduce_node`; returns the node restored."""
    j, g, kids = problem._undo.pop()
    problem.fixed.remove(j)
    del problem.alpha[j]
    del problem.beta[j]
    problem.gamma[j] = g
    problem.children[j] = kids
    return j


def _star_rate(problem, j, parent_alpha):
    """Slope of free node j from the star around it (children must be fixed)."""
    num = problem.gamma[j] * parent_alpha
    den = problem.gamma[j]
    for c in problem.children[j]:
        g = problem.gamma[c]
        num += g * problem.alpha[c]
        den += g
    return num / den


def compute_rates_rec(problem: SubtreeProblem, out_rates: dict,
                      debug: bool = False, counters=None) -> None:
    """Fill ``out_rates[j]`` with the slope of every free node of the problem.

    The problem must be pre-pruned (every leaf fixed) with its free nodes
    forming a connected set.  Runs the reduce-recurse-restore scheme
    iteratively: reductions are applied until the current candidate's parent
    is fixed (a star problem), then unwound in reverse, solving one star per
    node.  On return the problem state is exactly as passed in; with
    ``debug=True`` this is verified against a snapshot.
    """
    before = problem.snapshot() if debug else None
    fixed = problem.fixed
    children = problem.children
    ready = [j for j in children
             if j not in fixed and all(c in fixed for c in children[j])]
    n_reduced = 0
    while True:
        if not ready:
            raise SubtreeInvariantError("no reducible free node; problem not pruned?")
        j = ready.pop()
        if problem.parent_is_fixed(j):
            alpha_p = problem.parent_line(j)[0]
            out_rates[j] = _star_rate(problem, j, alpha_p)
            if counters is not None:
                counters["star_ops"] = counters.get("star_ops", 0) + 1
                counters["edges_touched"] = (
                    counters.get("edges_touched", 0) + len(children[j]) + 1)
            break
        p = problem.parent[j]
        n_kids = len(children[j])
        reduce_node(problem, j)
        n_reduced += 1
        if counters is not None:
            counters["reduce_ops"] = counters.get("reduce_ops", 0) + 1
            counters["edges_touched"] = (
                counters.get("edges_touched", 0) + n_kids + 1)
        if all(c in fixed for c in children[p]):
            ready.append(p)
    for _ in range(n_reduced):
        j = restore_reduction(problem)
        parent_rate = out_rates[problem.parent[j]]
        out_rates[j] = _star_rate(problem, j, parent_rate)
        if counters is not None:
            counters["star_ops"] = counters.get("star_ops", 0) + 1
            counters["edges_touched"] = (
                counters.get("edges_touched", 0) + len(children[j]) + 1)
    if debug and problem.snapshot() != before:
        raise SubtreeInvariantError("problem state not restored after recursion")


def _compute_rates_internal(tree: RootedTree, fixed_flags, counters=None,
                            debug=False):
    """Rates for all nodes as a 1-indexed list, plus the curvature L''.

    ``fixed_flags`` is a 1-indexed boolean list marking the boundary set.
    Boundary nodes move at unit rate; free nodes get the slope of their
    subtree problem; the curvature is the sum of squared rate differences
    across all edges (the root differencing against the zero anchor).
    """
    q = tree.q
    rate = [0.0] * (q + 1)
    visited = [False] * (q + 1)
    for v in range(1, q + 1):
        if fixed_flags[v]:
            rate[v] = 1.0
    for v in range(1, q + 1):
        if fixed_flags[v] or visited[v]:
            continue
        problem = build_subtree_problem(tree, fixed_flags, v, visited)
        if counters is not None:
            counters["components"] = counters.get("components", 0) + 1
            counters["nodes_visited"] = (
                counters.get("nodes_visited", 0) + len(problem.children))
        prune_free_leaves(problem)
        solved = {}
        if any(j not in problem.fixed for j in problem.children):
            compute_rates_rec(problem, solved, debug=debug, counters=counters)
        for j, r in solved.items():
            rate[j] = r
        for u, p in reversed(problem.pruned):
            rate[u] = rate[p]
    lsecond = 0.0
    tparent = tree.parent
    for j in range(1, q + 1):
        p = tparent[j]
        d = rate[j] - (rate[p] if p else 0.0)
        lsecond += d * d
    return rate, lsecond


def compute_rates(tree: RootedTree, boundary, counters=None, debug=False):
    """Path slopes for a given boundary set.

    Returns ``(z_rate, lsecond)`` where ``z_rate`` is a length-q array
    (entry i-1 for node i, equal to 1 on the boundary and in [0, 1]
    elsewhere) and ``lsecond`` is the curvature of the dual objective on the
    current segment.
    """
    if not boundary:
        raise ValueError("boundary set must be nonempty")
    fixed_flags = [False] * (tree.q + 1)
    for b in boundary:
        fixed_flags[int(b)] = True
    rate, lsecond = _compute_rates_internal(tree, fixed_flags,
                                            counters=counters, debug=debug)
    return np.array(rate[1:]), lsecond
