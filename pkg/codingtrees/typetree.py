"""Coding trees of 1-types over the prefixes of an enumerated limit.

A node over ``K_n`` has length ``n + 1``; the roots have length one. In mode ``"U"`` nodes carry no
unary formulas and each coding node's unary colour is kept on the side.
"""

from itertools import combinations
from typing import Dict, Iterable, List, Literal, Mapping, Optional, Sequence, Set, Tuple

import logfire
import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr

from codingtrees.catalogue import EnumeratedLimit
from codingtrees.errors import DepthError, PreconditionError
from codingtrees.structures import X, Block, FinStructure, Formula, Language, TypeNode

Mode = Literal["S", "U"]
PassingType = Tuple[Formula, ...]


class CodingTree(BaseModel):
    """Levels ``0..depth`` of the coding tree with the coding map ``n -> c_n`` for ``n < depth``."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    spec_label: str = Field(..., description="Class the tree was built from")
    lang: Language
    mode: Mode = Field(default="S", description="S keeps unary formulas in every node, U only colours coding nodes")
    depth: int = Field(..., ge=1, description="Deepest built level")
    levels: List[List[TypeNode]] = Field(..., description="Tree-ordered nodes per level")
    coding: List[TypeNode] = Field(..., description="Coding node c_n for each n < depth")
    colours: List[Optional[int]] = Field(..., description="Unary colour index of each coding vertex")
    structure: FinStructure = Field(..., exclude=True, description="The prefix K_depth")

    _index: Dict[int, Dict[str, int]] = PrivateAttr(default_factory=dict)

    def level(self, n: int) -> List[TypeNode]:
        if not 0 <= n <= self.depth:
            raise DepthError(f"Level {n} outside 0..{self.depth}")
        return self.levels[n]

    def index(self, node: TypeNode) -> int:
        """Position of ``node`` within its level in tree order."""
        if node.level not in self._index:
            self._index[node.level] = {t.digest: i for i, t in enumerate(self.level(node.level))}
        try:
            return self._index[node.level][node.digest]
        except KeyError as e:
            raise PreconditionError(f"Node over K_{node.level} is not in the tree") from e

    def contains(self, node: TypeNode) -> bool:
        try:
            self.index(node)
        except (PreconditionError, DepthError):
            return False
        return True

    def successors(self, node: TypeNode) -> List[TypeNode]:
        if node.level >= self.depth:
            return []
        return [t for t in self.levels[node.level + 1] if t.extends(node)]

    def node_by_formulas(self, n: int, positives: Iterable[str]) -> Optional[TypeNode]:
        """The node over ``K_n`` whose positive formulas print as ``positives`` (e.g. ``["v0<x"]``)."""
        wanted = set(positives)
        for node in self.level(n):
            if set(node.positives(self.lang)) == wanted:
                return node
        return None

    def coding_node(self, n: int) -> TypeNode:
        if not 0 <= n < self.depth:
            raise DepthError(f"Coding node c_{n} outside 0..{self.depth - 1}")
        return self.coding[n]

    def is_coding(self, node: TypeNode) -> bool:
        return node.level < self.depth and self.coding[node.level] == node

    def node_count(self) -> int:
        return sum(len(level) for level in self.levels)


def build(limit: EnumeratedLimit, depth: int, mode: Optional[Mode] = None) -> CodingTree:
    """Materialize levels ``0..depth`` through the realizability oracle."""
    if depth < 1:
        raise DepthError("Coding trees are built to depth >= 1")
    mode = mode or limit.spec.preferred_mode
    unary = mode == "S"
    with logfire.span("build coding tree {label}", label=limit.spec.label, depth=depth, mode=mode):
        K = limit.ensure(depth)
        levels = [limit.roots(unary)]
        for _ in range(depth):
            levels.append([child for node in levels[-1] for child in limit.successors(node, unary)])
        coding = [limit.vertex_type(n, unary) for n in range(depth)]
        colours = [limit.colour(n) for n in range(depth)]
        for n, c in enumerate(coding):
            if c not in levels[n]:
                raise PreconditionError(f"Generator/oracle mismatch: c_{n} is not realizable over K_{n}")
        logfire.debug("coding tree levels", sizes=[len(level) for level in levels])
    return CodingTree(
        spec_label=limit.spec.label,
        lang=limit.lang,
        mode=mode,
        depth=depth,
        levels=levels,
        coding=coding,
        colours=colours,
        structure=K.prefix(depth),
    )


def passing_type(t: TypeNode, at_len: int) -> Block:
    """The block of ``t`` whose newest parameter is ``v_{at_len-1}`` (parameter-free block for 0)."""
    if not 0 <= at_len <= t.level:
        raise DepthError(f"Passing type at {at_len} is undefined for a type over K_{t.level}")
    return t.blocks[at_len]


def relative_passing_type(t: TypeNode, n: int, vertices: Sequence[int]) -> PassingType:
    """Passing type of ``t`` at ``c_n`` over the vertex set ``vertices``.

    Keeps the formulas of block ``n + 1`` whose parameters are ``v_n`` or vertices below ``n`` in
    ``vertices``, renamed by the increasing bijection onto ``0..k``.
    """
    if t.level < n + 1:
        raise DepthError(f"A type over K_{t.level} does not pass c_{n}")
    params = sorted(v for v in set(vertices) if v < n) + [n]
    index = {v: i for i, v in enumerate(params)}
    kept = []
    for rank, args, value in t.blocks[n + 1]:
        if all(a == X or a in index for a in args):
            kept.append((rank, tuple(X if a == X else index[a] for a in args), value))
    return tuple(kept)


def passing_sim(s: TypeNode, a: Sequence[int], t: TypeNode, b: Sequence[int], n: int) -> bool:
    """Is the passing type of ``s`` at the n-th coding node of ``a`` similar to that of ``t`` over ``b``?"""
    a, b = sorted(a), sorted(b)
    if len(a) <= n or len(b) <= n:
        raise PreconditionError(f"Both vertex sets need at least {n + 1} coding nodes")
    if s.level <= a[n] or t.level <= b[n]:
        raise PreconditionError("Types must be longer than the coding nodes they pass")
    return relative_passing_type(s, a[n], a[:n]) == relative_passing_type(t, b[n], b[:n])


def codings_similar(tree: CodingTree, a: Sequence[int], b: Sequence[int]) -> bool:
    """Parameter-free agreement plus pairwise passing similarity of the coding nodes of ``a`` and ``b``."""
    a, b = sorted(a), sorted(b)
    if len(a) != len(b):
        return False
    for i in range(len(a)):
        ca, cb = tree.coding_node(a[i]), tree.coding_node(b[i])
        if ca.blocks[0] != cb.blocks[0] or tree.colours[a[i]] != tree.colours[b[i]]:
            return False
    for i, j in combinations(range(len(a)), 2):
        if not passing_sim(tree.coding_node(a[j]), a, tree.coding_node(b[j]), b, i):
            return False
    return True


def prec(s: TypeNode, t: TypeNode) -> int:
    """-1, 0 or 1 as ``s`` precedes, equals or follows ``t`` in the tree order."""
    if s == t:
        return 0
    return -1 if s.blocks < t.blocks else 1


def meet(s: TypeNode, t: TypeNode) -> Optional[TypeNode]:
    """Longest common restriction, or None for nodes above different roots."""
    if s.chain[0] != t.chain[0]:
        return None
    lo, hi = 0, min(s.level, t.level)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if s.chain[mid] == t.chain[mid]:
            lo = mid
        else:
            hi = mid - 1
    return s.restrict(lo)


class SubtreeSel(BaseModel):
    """A finite set of tree nodes with designated coding nodes.

    ``coding`` lists the coding nodes by increasing length; a coding node over ``K_m`` represents the
    vertex ``v_m``. ``colours`` runs parallel to ``coding``.
    """

    model_config = ConfigDict(frozen=True)

    nodes: Tuple[TypeNode, ...] = Field(default=(), description="Nodes in tree order")
    coding: Tuple[TypeNode, ...] = Field(default=(), description="Coding nodes by increasing length")
    colours: Tuple[Optional[int], ...] = Field(default=(), description="Unary colour per coding node")

    @classmethod
    def of(
        cls,
        nodes: Sequence[TypeNode],
        coding: Sequence[TypeNode] = (),
        colours: Sequence[Optional[int]] | None = None,
    ) -> "SubtreeSel":
        coding = sorted(set(coding), key=lambda c: c.level)
        all_nodes = sorted(set(nodes) | set(coding), key=lambda t: t.blocks)
        if colours is None:
            colours = [None] * len(coding)
        return cls(nodes=tuple(all_nodes), coding=tuple(coding), colours=tuple(colours))

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def length(self) -> int:
        """The largest node length (zero when empty)."""
        return max((t.length for t in self.nodes), default=0)

    def represented_vertices(self) -> Tuple[int, ...]:
        """Vertices represented by the coding nodes."""
        return tuple(c.level for c in self.coding)

    def max_level(self) -> List[TypeNode]:
        return [t for t in self.nodes if t.length == self.length]

    def restrict(self, length: int) -> List[TypeNode]:
        """The level set of truncations to ``length``."""
        found = {t.restrict(length - 1) for t in self.nodes if t.length >= length}
        return sorted(found, key=lambda t: t.blocks)

    def below(self, length: int) -> "SubtreeSel":
        """Nodes shorter than ``length`` together with the truncations to ``length``."""
        kept = [t for t in self.nodes if t.length < length] + self.restrict(length)
        pairs = [(c, g) for c, g in zip(self.coding, self.colours) if c.length <= length]
        return SubtreeSel.of(kept, [c for c, _ in pairs], [g for _, g in pairs])

    def successor(self, s: TypeNode) -> Optional[TypeNode]:
        """The immediate successor of ``s`` among truncations of longer nodes, if unique."""
        found = {t.restrict(s.level + 1) for t in self.nodes if t.level > s.level and t.extends(s)}
        return found.pop() if len(found) == 1 else None

    def is_splitting(self, s: TypeNode) -> bool:
        found = {t.restrict(s.level + 1) for t in self.nodes if t.level > s.level and t.extends(s)}
        return len(found) >= 2

    def is_coding(self, s: TypeNode) -> bool:
        return s in self.coding

    def critical_nodes(self) -> List[TypeNode]:
        return [t for t in self.nodes if self.is_coding(t) or self.is_splitting(t)]

    def is_meet_closed(self) -> bool:
        members = set(self.nodes)
        for s, t in combinations(self.nodes, 2):
            m = meet(s, t)
            if m is not None and m not in members:
                return False
        return True


def induced_subtree(coding_nodes: Sequence[TypeNode], colours: Sequence[Optional[int]] | None = None) -> SubtreeSel:
    """Meet-closure of coding nodes, closed under initial segments at coding and meet lengths."""
    coding = sorted(set(coding_nodes), key=lambda c: c.level)
    if colours is not None:
        by_level = {c.level: g for c, g in zip(coding_nodes, colours)}
        colours = [by_level[c.level] for c in coding]
    nodes: Set[TypeNode] = set(coding)
    while True:
        grown = set(nodes)
        for s, t in combinations(list(nodes), 2):
            m = meet(s, t)
            if m is not None:
                grown.add(m)
        lengths = {t.length for t in grown}
        for t in list(grown):
            for length in lengths:
                if length < t.length:
                    grown.add(t.restrict(length - 1))
        if grown == nodes:
            break
        nodes = grown
    return SubtreeSel.of(nodes, coding, colours)


def canonical_map(S: SubtreeSel, T: SubtreeSel) -> Optional[Dict[TypeNode, TypeNode]]:
    """The tree-order-preserving bijection, when the sizes agree."""
    if len(S) != len(T):
        return None
    return dict(zip(S.nodes, T.nodes))


def is_similarity(f: Mapping[TypeNode, TypeNode], S: SubtreeSel, T: SubtreeSel) -> bool:
    """Check every similarity clause for the node map ``f`` from ``S`` onto ``T``."""
    if set(f) != set(S.nodes) or [f[s] for s in S.nodes] != list(T.nodes):
        return False
    for s, t in combinations(S.nodes, 2):
        ms = meet(s, t)
        mt = meet(f[s], f[t])
        if (ms is None) != (mt is None):
            return False
        if ms is not None and (ms not in f or f[ms] != mt):
            return False
        if (s.length < t.length) != (f[s].length < f[t].length):
            return False
        if (t.length < s.length) != (f[t].length < f[s].length):
            return False
        if t.extends(s) != f[t].extends(f[s]) or s.extends(t) != f[s].extends(f[t]):
            return False
    if len(S.coding) != len(T.coding):
        return False
    for i, c in enumerate(S.coding):
        if f.get(c) != T.coding[i]:
            return False
        if c.blocks[0] != T.coding[i].blocks[0] or S.colours[i] != T.colours[i]:
            return False
    a, b = S.represented_vertices(), T.represented_vertices()
    for s in S.nodes:
        for n, c in enumerate(S.coding):
            if c.length < s.length and not passing_sim(s, a, f[s], b, n):
                return False
    return True


def shape(tree: CodingTree, root: TypeNode, with_coding: bool = False) -> tuple:
    """Ordered shape of the subtree above ``root`` as nested tuples."""
    children = tuple(shape(tree, child, with_coding) for child in tree.successors(root))
    return (tree.is_coding(root), children) if with_coding else children


def to_networkx(tree: CodingTree) -> nx.DiGraph:
    graph = nx.DiGraph()
    for level in tree.levels:
        for node in level:
            graph.add_node((node.level, node.digest), coding=tree.is_coding(node), level=node.level)
            if node.level > 0:
                parent = node.restrict(node.level - 1)
                graph.add_edge((parent.level, parent.digest), (node.level, node.digest))
    return graph


def tree_isomorphic(tree: CodingTree, a: TypeNode, b: TypeNode) -> bool:
    """Unordered isomorphism of the subtrees above two nodes (levels preserved)."""
    graph = to_networkx(tree)
    left = graph.subgraph(nx.descendants(graph, (a.level, a.digest)) | {(a.level, a.digest)})
    right = graph.subgraph(nx.descendants(graph, (b.level, b.digest)) | {(b.level, b.digest)})
    return nx.is_isomorphic(left, right, node_match=lambda x, y: x["level"] == y["level"])
