"""Rooted labeled trees on nodes {1..q} with node 1 fixed as the root.

Nodes are labeled 1..q and node 1 is always the root (the null-mutation
convention: every genome carries the root mutation).  Internally the tree is
stored both as a parent array and as child adjacency lists so that downward
recursions and upward accumulations each get their natural access pattern.

Public vectors indexed by node (frequencies, ancestor sums, ...) are plain
sequences of length q where position ``i-1`` holds the value for node ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class TreeInputError(ValueError):
    """Raised for malformed tree descriptions (bad labels, cycles, ...)."""


@dataclass(frozen=True)
class RootedTree:
    """A labeled rooted tree on nodes {1..q} with root 1.

    Attributes
    ----------
    q : int
        Number of nodes.
    parent : tuple[int]
        Length q+1, 1-indexed; ``parent[i]`` is the parent label of node i,
        0 for the root.  Index 0 is unused.
    children : tuple[tuple[int]]
        Length q+1, 1-indexed; ``children[i]`` lists the children of node i
        in ascending label order.  Index 0 is unused.
    """

    q: int
    parent: tuple
    children: tuple
    _order: tuple = field(default=None, repr=False, compare=False)

    @staticmethod
    def from_parent_array(parents) -> "RootedTree":
        """Build a tree from ``parents[i-1] = parent of node i`` (0 = root).

        Validates that node 1 is the unique root, all parents are in range,
        and the structure is connected and acyclic.
        """
        q = len(parents)
        if q < 1:
            raise TreeInputError("tree must have at least one node")
        parent = [0] * (q + 1)
        children = [[] for _ in range(q + 1)]
        roots = 0
        for i, p in enumerate(parents, start=1):
            p = int(p)
            if p == 0:
                roots += 1
                if i != 1:
                    raise TreeInputError(f"node {i} marked as root; root must be node 1")
            elif not (1 <= p <= q):
                raise TreeInputError(f"parent of node {i} is {p}, outside 1..{q}")
            elif p == i:
                raise TreeInputError(f"node {i} is its own parent")
            else:
                children[p].append(i)
            parent[i] = p
        if roots != 1:
            raise TreeInputError(f"expected exactly one root, found {roots}")
        for c in children:
            c.sort()
        tree = RootedTree(
            q=q,
            parent=tuple(parent),
            children=tuple(tuple(c) for c in children),
        )
        # Connectivity: a BFS from the root must reach all q nodes.
        if len(tree.bfs_order()) != q:
            raise TreeInputError("tree is not connected (cycle or unreachable nodes)")
        return tree

    def bfs_order(self) -> tuple:
        """Nodes in breadth-first order from the root (parents before children)."""
        if self._order is not None:
            return self._order
        order = [1]
        children = self.children
        head = 0
        while head < len(order):
            order.extend(children[order[head]])
            head += 1
        order = tuple(order)
        object.__setattr__(self, "_order", order)
        return order

    def parent_array(self) -> list:
        """Parent labels as a 0-indexed list (entry i-1 for node i; 0 = root)."""
        return list(self.parent[1:])

    def is_ancestor(self, a: int, b: int) -> bool:
        """True iff node ``a`` is an ancestor of ``b`` or ``a == b``."""
        while b != 0:
            if b == a:
                return True
            b = self.parent[b]
        return False

    def leaf_count(self) -> int:
        return sum(1 for i in range(1, self.q + 1) if not self.children[i])

    def to_text(self) -> str:
        """One line of q space-separated parent labels, 0 for the root."""
        return " ".join(str(p) for p in self.parent[1:])

    @staticmethod
    def from_text(text: str) -> "RootedTree":
        """Parse the one-line parent-array format (inverse of :meth:`to_text`)."""
        fields = text.split()
        if not fields:
            raise TreeInputError("empty tree description")
        try:
            parents = [int(f) for f in fields]
        except ValueError as exc:
            raise TreeInputError(f"non-integer entry in tree description: {exc}") from None
        return RootedTree.from_parent_array(parents)


def count_trees(q: int) -> int:
    """Number of labeled trees on q nodes, each rooted at node 1.

    Cayley's formula gives q^(q-2) labeled trees for q >= 3; for q in {1, 2}
    there is exactly one tree.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if q <= 2:
        return 1
    return q ** (q - 2)


def decode_prufer(code, q: int) -> RootedTree:
    """Decode a Prüfer sequence into the labeled tree on {1..q} rooted at 1.

    ``code`` must have length q-2 with entries in 1..q (empty for q <= 2).
    The classic decoding produces an unrooted labeled tree, which is then
    oriented away from node 1.
    """
    code = tuple(int(c) for c in code)
    if q < 1:
        raise TreeInputError(f"q must be >= 1, got {q}")
    if q <= 2:
        if code:
            raise TreeInputError(f"q={q} admits no Prüfer code, got length {len(code)}")
        return RootedTree.from_parent_array([0] if q == 1 else [0, 1])
    if len(code) != q - 2:
        raise TreeInputError(f"code length {len(code)} != q-2 = {q - 2}")
    for c in code:
        if not (1 <= c <= q):
            raise TreeInputError(f"code entry {c} outside 1..{q}")

    degree = [1] * (q + 1)
    for c in code:
        degree[c] += 1

    # Pointer-based decode: O(q) amortized scan for the smallest current leaf.
    adjacency = [[] for _ in range(q + 1)]
    ptr = 1
    while degree[ptr] != 1:
        ptr += 1
    leaf = ptr
    for c in code:
        adjacency[leaf].append(c)
        adjacency[c].append(leaf)
        degree[c] -= 1
        if degree[c] == 1 and c < ptr:
            leaf = c
        else:
            ptr += 1
            while degree[ptr] != 1:
                ptr += 1
            leaf = ptr
    adjacency[leaf].append(q)
    adjacency[q].append(leaf)

    # Orient away from node 1.
    parents = [0] * q
    stack = [1]
    seen = [False] * (q + 1)
    seen[1] = True
    while stack:
        v = stack.pop()
        for w in adjacency[v]:
            if not seen[w]:
                seen[w] = True
                parents[w - 1] = v
                stack.append(w)
    return RootedTree.from_parent_array(parents)


def encode_prufer(tree: RootedTree) -> tuple:
    """Prüfer sequence of a tree (length q-2); inverse of :func:`decode_prufer`."""
    q = tree.q
    if q <= 2:
        return ()
    degree = [0] * (q + 1)
    adjacency = [[] for _ in range(q + 1)]
    for i in range(2, q + 1):
        p = tree.parent[i]
        adjacency[i].append(p)
        adjacency[p].append(i)
        degree[i] += 1
        degree[p] += 1
    removed = [False] * (q + 1)
    code = []
    ptr = 1
    while degree[ptr] != 1:
        ptr += 1
    leaf = ptr
    for _ in range(q - 2):
        neighbor = next(w for w in adjacency[leaf] if not removed[w])
        code.append(neighbor)
        removed[leaf] = True
        degree[neighbor] -= 1
        if degree[neighbor] == 1 and neighbor < ptr:
            leaf = neighbor
        else:
            # Every removed node has index <= ptr, so the forward scan never
            # lands on one even though removed leaves keep degree 1.
            ptr += 1
            while degree[ptr] != 1:
                ptr += 1
            leaf = ptr
    return tuple(code)


def ancestor_sums(tree: RootedTree, fhat_col) -> np.ndarray:
    """Cumulative frequency sums along ancestry: N_i = sum of F̂ over node i
    and all its ancestors.

    Computed in one pass over a breadth-first order with a running accumulator
    per node; O(q).
    """
    q = tree.q
    f = np.asarray(fhat_col, dtype=float)
    if f.shape != (q,):
        raise ValueError(f"expected a length-{q} vector, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("frequency vector contains non-finite entries")
    n = np.empty(q)
    parent = tree.parent
    for v in tree.bfs_order():
        p = parent[v]
        n[v - 1] = f[v - 1] + (n[p - 1] if p else 0.0)
    return n


def ancestry_matrix(tree: RootedTree) -> np.ndarray:
    """Integer matrix U with U[i-1, j-1] = 1 iff node i is an ancestor of j or i == j.

    Satisfies U @ (I - T) == I exactly in integer arithmetic, where T is the
    closest-ancestor adjacency from :func:`closest_ancestor_matrix`.
    """
    q = tree.q
    u = np.zeros((q, q), dtype=np.int64)
    parent = tree.parent
    for v in tree.bfs_order():
        p = parent[v]
        if p:
            u[:, v - 1] = u[:, p - 1]
        u[v - 1, v - 1] = 1
    return u


def closest_ancestor_matrix(tree: RootedTree) -> np.ndarray:
    """Integer matrix T with T[i-1, j-1] = 1 iff node i is the parent of node j."""
    q = tree.q
    t = np.zeros((q, q), dtype=np.int64)
    for j in range(2, q + 1):
        t[tree.parent[j] - 1, j - 1] = 1
    return t
