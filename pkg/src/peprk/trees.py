"""Rooted trees as canonical level sequences, with the leaf/trunk combinatorics
used by the energy-preservation analysis.

A tree is stored as its level sequence: the root has level 1, and each
subsequent entry is the level of the next node in depth-first order.  Among
all level sequences describing the same tree, the lexicographically greatest
one is the canonical representative, so equality and hashing reduce to tuple
comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache, total_ordering
from typing import Iterable, Sequence

MAX_ORDER = 10

__all__ = [
    "MAX_ORDER",
    "OrderCapExceeded",
    "NotALeafError",
    "RootedTree",
    "Forest",
    "LeafRef",
    "generate_trees",
    "trees_of_order",
    "symmetry",
    "density",
    "leaves",
    "trunk_remainder",
    "ep_conjugate",
    "ep_conjugate_by_rerooting",
    "conjugacy_classes",
]


class OrderCapExceeded(ValueError):
    """Requested tree order outside the supported range (1..MAX_ORDER)."""


class NotALeafError(ValueError):
    """A LeafRef does not point at a childless node of the given tree."""


def _validate_levels(levels: Sequence[int]) -> None:
    if len(levels) == 0:
        raise ValueError("level sequence must be nonempty")
    if levels[0] != 1:
        raise ValueError(f"root must have level 1, got {levels[0]}")
    for prev, cur in zip(levels, levels[1:]):
        if cur < 2:
            raise ValueError(f"non-root level must be >= 2, got {cur}")
        if cur > prev + 1:
            raise ValueError(f"level jump {prev} -> {cur} is not a valid tree")


def _child_slices(levels: Sequence[int], node: int) -> list[tuple[int, int]]:
    """Half-open index ranges of the child subtrees of ``node``."""
    lv = levels[node]
    out = []
    i = node + 1
    n = len(levels)
    while i < n and levels[i] > lv:
        j = i + 1
        while j < n and levels[j] > levels[i]:
            j += 1
        out.append((i, j))
        i = j
    return out


def _canonical(levels: Sequence[int]) -> tuple[int, ...]:
    """Lexicographically greatest level sequence of the same tree."""
    kids = _child_slices(levels, 0)
    if not kids:
        return (levels[0],)
    shift = levels[0]
    sub = []
    for i, j in kids:
        rel = tuple(lv - shift for lv in levels[i:j])  # child rooted at level 1
        sub.append(_canonical(rel))
    sub.sort(reverse=True)
    out = [levels[0]]
    for s in sub:
        out.extend(lv + shift for lv in s)
    return tuple(out)


@total_ordering
@dataclass(frozen=True)
class RootedTree:
    """A rooted tree in canonical level-sequence form.

    Any valid level sequence may be passed in; it is canonicalized on
    construction.  Trees sort by (order, level sequence).
    """

    levels: tuple[int, ...]

    def __post_init__(self) -> None:
        levels = tuple(self.levels)
        _validate_levels(levels)
        object.__setattr__(self, "levels", _canonical(levels))

    @property
    def order(self) -> int:
        return len(self.levels)

    @classmethod
    def single(cls) -> "RootedTree":
        return cls((1,))

    @classmethod
    def from_children(cls, children: Iterable["RootedTree"]) -> "RootedTree":
        levels = [1]
        for c in sorted(children, reverse=True):
            levels.extend(lv + 1 for lv in c.levels)
        return cls(tuple(levels))

    def children(self) -> tuple["RootedTree", ...]:
        return tuple(
            RootedTree(tuple(lv - 1 for lv in self.levels[i:j]))
            for i, j in _child_slices(self.levels, 0)
        )

    def __lt__(self, other: "RootedTree") -> bool:
        return (self.order, self.levels) < (other.order, other.levels)

    def __repr__(self) -> str:
        return f"RootedTree({self.to_bracket()!r})"

    def to_bracket(self, leaf: str = "[]") -> str:
        kids = self.children()
        if not kids:
            return leaf
        return "[" + ",".join(c.to_bracket(leaf) for c in kids) + "]"

    @classmethod
    def from_bracket(cls, text: str) -> "RootedTree":
        return parse_bracket(text)


def parse_bracket(text: str) -> RootedTree:
    """Parse bracket notation: a tree is "[" children "]"; "[]" and the bullet
    character both denote a leaf."""
    s = text.strip()
    pos = 0

    def skip_ws(i: int) -> int:
        while i < len(s) and s[i].isspace():
            i += 1
        return i

    def parse_tree(i: int) -> tuple[RootedTree, int]:
        i = skip_ws(i)
        if i < len(s) and s[i] == "•":
            return RootedTree.single(), i + 1
        if i >= len(s) or s[i] != "[":
            raise ValueError(f"expected '[' at position {i} in {text!r}")
        i = skip_ws(i + 1)
        kids = []
        if i < len(s) and s[i] == "]":
            return RootedTree.single(), i + 1
        while True:
            child, i = parse_tree(i)
            kids.append(child)
            i = skip_ws(i)
            if i < len(s) and s[i] == ",":
                i = skip_ws(i + 1)
                continue
            if i < len(s) and s[i] == "]":
                return RootedTree.from_children(kids), i + 1
            raise ValueError(f"expected ',' or ']' at position {i} in {text!r}")

    tree, end = parse_tree(0)
    if skip_ws(end) != len(s):
        raise ValueError(f"trailing characters after tree in {text!r}")
    return tree


@dataclass(frozen=True)
class Forest:
    """Unordered multiset of rooted trees; the empty forest is allowed."""

    trees: tuple[RootedTree, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "trees", tuple(sorted(self.trees)))

    def __len__(self) -> int:
        return len(self.trees)

    def total_order(self) -> int:
        return sum(t.order for t in self.trees)


@dataclass(frozen=True)
class LeafRef:
    """A childless node of ``tree``; ``depth`` is its distance from the root
    (the root itself has depth 0)."""

    tree: RootedTree
    node_index: int
    depth: int = field(init=False)

    def __post_init__(self) -> None:
        levels = self.tree.levels
        i = self.node_index
        if not (0 <= i < len(levels)):
            raise NotALeafError(f"node index {i} out of range")
        if i + 1 < len(levels) and levels[i + 1] > levels[i]:
            raise NotALeafError(f"node {i} of {self.tree!r} has children")
        object.__setattr__(self, "depth", levels[i] - 1)


@lru_cache(maxsize=None)
def trees_of_order(order: int) -> tuple[RootedTree, ...]:
    """All rooted trees with exactly ``order`` nodes, sorted."""
    if not (1 <= order <= MAX_ORDER):
        raise OrderCapExceeded(f"order must be in 1..{MAX_ORDER}, got {order}")
    if order == 1:
        return (RootedTree.single(),)
    pool: list[RootedTree] = []
    for k in range(order - 1, 0, -1):
        pool.extend(sorted(trees_of_order(k), reverse=True))

    results: list[RootedTree] = []

    def pick(start: int, remaining: int, chosen: list[RootedTree]) -> None:
        if remaining == 0:
            results.append(RootedTree.from_children(chosen))
            return
        for idx in range(start, len(pool)):
            t = pool[idx]
            if t.order > remaining:
                continue
            chosen.append(t)
            pick(idx, remaining - t.order, chosen)
            chosen.pop()

    pick(0, order - 1, [])
    return tuple(sorted(results))


def generate_trees(max_order: int) -> list[RootedTree]:
    """Every rooted tree of order <= max_order, canonical, sorted by
    (order, level sequence)."""
    if not (1 <= max_order <= MAX_ORDER):
        raise OrderCapExceeded(f"max_order must be in 1..{MAX_ORDER}, got {max_order}")
    out: list[RootedTree] = []
    for n in range(1, max_order + 1):
        out.extend(trees_of_order(n))
    return out


@lru_cache(maxsize=None)
def symmetry(tree: RootedTree) -> int:
    """Order of the automorphism group: product over nodes of k! for every
    group of k identical child subtrees."""
    sigma = 1
    kids = tree.children()
    i = 0
    while i < len(kids):
        j = i
        while j < len(kids) and kids[j] == kids[i]:
            j += 1
        count = j - i
        sigma *= math.factorial(count) * symmetry(kids[i]) ** count
        i = j
    return sigma


@lru_cache(maxsize=None)
def density(tree: RootedTree) -> int:
    """Product over all nodes of their subtree sizes."""
    return tree.order * math.prod(density(c) for c in tree.children())


def leaves(tree: RootedTree) -> list[LeafRef]:
    """All childless nodes in level-sequence order.  The single-node tree
    reports its root as a leaf of depth 0."""
    levels = tree.levels
    n = len(levels)
    return [
        LeafRef(tree, i)
        for i in range(n)
        if i + 1 == n or levels[i + 1] <= levels[i]
    ]


def _parent_indices(levels: Sequence[int]) -> list[int]:
    parent = [-1] * len(levels)
    stack: list[int] = []
    for i, lv in enumerate(levels):
        while stack and levels[stack[-1]] != lv - 1:
            stack.pop()
        if i > 0:
            parent[i] = stack[-1]
        stack.append(i)
    return parent


def _trunk_path(tree: RootedTree, leaf: LeafRef) -> list[int]:
    if leaf.tree != tree:
        raise NotALeafError("leaf does not belong to this tree")
    parent = _parent_indices(tree.levels)
    path = [leaf.node_index]
    while parent[path[-1]] >= 0:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def trunk_remainder(tree: RootedTree, leaf: LeafRef) -> tuple[Forest, ...]:
    """The sequence of forests left over when the root-to-leaf trunk is
    removed; entry j was attached to the trunk node at depth j."""
    path = _trunk_path(tree, leaf)
    levels = tree.levels
    out = []
    for d in range(len(path) - 1):
        node = path[d]
        nxt = path[d + 1]
        shift = levels[node]
        members = [
            RootedTree(tuple(lv - shift for lv in levels[i:j]))
            for i, j in _child_slices(levels, node)
            if i != nxt
        ]
        out.append(Forest(tuple(members)))
    return tuple(out)


def ep_conjugate(tree: RootedTree, leaf: LeafRef) -> tuple[RootedTree, int]:
    """Energy-preserving conjugate of ``tree`` at ``leaf``.

    The trunk is kept and the remainder forests are reattached in reverse
    order: the forest that hung off the leaf's parent moves to the root, and
    so on.  Returns the conjugate together with the parity (-1)**depth.
    """
    if tree.order < 2:
        raise ValueError("conjugates are defined for trees with at least 2 nodes")
    forests = trunk_remainder(tree, leaf)
    m = leaf.depth
    # node at depth d carries forests[m - 1 - d] after reversal; the leaf
    # (depth m) carries nothing.
    subtree = RootedTree.single()
    for d in range(m - 1, -1, -1):
        kids = list(forests[m - 1 - d].trees)
        kids.append(subtree)
        subtree = RootedTree.from_children(kids)
    parity = 1 if m % 2 == 0 else -1
    return subtree, parity


def ep_conjugate_by_rerooting(tree: RootedTree, leaf: LeafRef) -> tuple[RootedTree, int]:
    """Alternative construction: re-root at the leaf's parent, then move the
    leaf so it becomes a child of the old root.  Must agree with
    ep_conjugate for every tree and leaf."""
    if tree.order < 2:
        raise ValueError("conjugates are defined for trees with at least 2 nodes")
    if leaf.tree != tree:
        raise NotALeafError("leaf does not belong to this tree")
    levels = tree.levels
    n = len(levels)
    parent = _parent_indices(levels)
    adj: dict[int, set[int]] = {i: set() for i in range(n)}
    for i in range(1, n):
        adj[i].add(parent[i])
        adj[parent[i]].add(i)
    ell = leaf.node_index
    p = parent[ell]
    adj[ell].discard(p)
    adj[p].discard(ell)
    adj[ell].add(0)
    adj[0].add(ell)

    def build(node: int, avoid: int) -> RootedTree:
        kids = [build(c, node) for c in adj[node] if c != avoid]
        return RootedTree.from_children(kids) if kids else RootedTree.single()

    parity = 1 if leaf.depth % 2 == 0 else -1
    return build(p, -1), parity


def conjugacy_classes(max_order: int) -> dict[int, list[tuple[RootedTree, ...]]]:
    """For each order up to max_order, the finest partition of trees such
    that every tree shares a class with all of its conjugates."""
    if not (1 <= max_order <= MAX_ORDER):
        raise OrderCapExceeded(f"max_order must be in 1..{MAX_ORDER}, got {max_order}")
    out: dict[int, list[tuple[RootedTree, ...]]] = {}
    for n in range(1, max_order + 1):
        ts = trees_of_order(n)
        index = {t: i for i, t in enumerate(ts)}
        rank = list(range(len(ts)))

        def find(i: int) -> int:
            while rank[i] != i:
                rank[i] = rank[rank[i]]
                i = rank[i]
            return i

        def union(i: int, j: int) -> None:
            ri, rj = find(i), find(j)
            if ri != rj:
                rank[max(ri, rj)] = min(ri, rj)

        if n >= 2:
            for t in ts:
                for lf in leaves(t):
                    conj, _ = ep_conjugate(t, lf)
                    union(index[t], index[conj])
        groups: dict[int, list[RootedTree]] = {}
        for t, i in index.items():
            groups.setdefault(find(i), []).append(t)
        out[n] = [tuple(sorted(g)) for g in sorted(groups.values(), key=lambda g: min(g))]
    return out
