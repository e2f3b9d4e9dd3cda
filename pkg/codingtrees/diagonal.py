"""Diagonal coding subtrees: construction, checkers, approximations and extension sets.

A diagonal tree is built stage by stage inside one enumerated limit. Stage ``n`` reads the relative
types of its frontier over the vertices represented so far, splits branches one level at a time until
each frontier node carries one branch per successor its type allows, then places the coding node of
the n-th represented vertex. Every vertex realizing a splitting or coding level is demanded from the
generator, so the tree and the structure it codes grow together.
"""

import itertools
import random
from typing import Callable, Dict, List, Literal, NamedTuple, Optional, Sequence, Tuple

import logfire
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr

from codingtrees.catalogue import (
    AnyClassSpec,
    ClassSpec,
    ConvexEquivOrder,
    EnumeratedLimit,
    admits_node,
    candidate_blocks,
    class_members,
    constrained_blocks,
    least_completion,
)
from codingtrees.config import config
from codingtrees.errors import BudgetExhausted, DepthError, PreconditionError, ScopeError
from codingtrees.history import RunStatus
from codingtrees.structures import (
    X,
    FinStructure,
    Language,
    Slot,
    TypeNode,
    Violation,
    block_options,
    block_slots,
    enumerate_embeddings,
    type_of,
)
from codingtrees.typetree import (
    Mode,
    PassingType,
    SubtreeSel,
    canonical_map,
    induced_subtree,
    is_similarity,
    meet,
    passing_sim,
    relative_passing_type,
)
from codingtrees.utils import emit_status

LevelKind = Literal["plain", "split", "coding"]


class Level(BaseModel):
    """One level of a diagonal tree."""

    model_config = ConfigDict(frozen=True)

    level: int = Field(..., ge=0, description="Nodes are types over K_level")
    kind: LevelKind = Field(default="plain", description="plain, split or coding")
    nodes: Tuple[TypeNode, ...] = Field(..., description="Nodes in tree order")
    critical: Optional[TypeNode] = Field(default=None, description="The splitting or coding node of the level")
    colour: Optional[int] = Field(default=None, description="Unary colour of the coded vertex")


class DiagonalTree(BaseModel):
    """A finite diagonal coding subtree together with the structure whose vertices it codes.

    ``levels[i].level == i`` for every built level; the last level is the frontier left by the final
    stage. ``coding_levels[n]`` is the level of the n-th coding node, which represents the vertex with
    that index in ``structure``.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    spec_label: str = Field(..., description="Class the tree was built for")
    lang: Language
    mode: Mode = Field(default="S", description="S keeps unary formulas in every node, U only colours coding nodes")
    depth: int = Field(..., ge=0, description="Number of critical levels")
    levels: List[Level]
    coding_levels: List[int] = Field(default_factory=list, description="Level of each coding node")
    colours: List[Optional[int]] = Field(default_factory=list, description="Unary colour of each coded vertex")
    stage_starts: List[int] = Field(default_factory=list, description="Frontier level at the start of each stage")
    spec: AnyClassSpec = Field(..., exclude=True)
    structure: FinStructure = Field(
        ..., exclude=True, description="The built prefix of the enumerated limit, one vertex past the frontier level"
    )

    _succ: Dict[TypeNode, List[TypeNode]] = PrivateAttr(default_factory=dict)

    @property
    def top(self) -> int:
        return len(self.levels) - 1

    def level(self, n: int) -> List[TypeNode]:
        if not 0 <= n <= self.top:
            raise DepthError(f"Level {n} outside 0..{self.top}")
        return list(self.levels[n].nodes)

    def nodes(self) -> List[TypeNode]:
        return [t for lvl in self.levels for t in lvl.nodes]

    def node_count(self) -> int:
        return sum(len(lvl.nodes) for lvl in self.levels)

    def contains(self, node: TypeNode) -> bool:
        return node.level <= self.top and node in self.levels[node.level].nodes

    def successors(self, node: TypeNode) -> List[TypeNode]:
        if node.level >= self.top:
            return []
        if node not in self._succ:
            self._succ[node] = [t for t in self.levels[node.level + 1].nodes if t.extends(node)]
        return self._succ[node]

    def successor(self, node: TypeNode) -> Optional[TypeNode]:
        """``node⁺``: the unique immediate successor, None at the top or at a splitting node."""
        found = self.successors(node)
        return found[0] if len(found) == 1 else None

    def is_splitting(self, node: TypeNode) -> bool:
        return len(self.successors(node)) >= 2

    def coding_node(self, n: int) -> TypeNode:
        if not 0 <= n < len(self.coding_levels):
            raise DepthError(f"Coding node c_{n} outside 0..{len(self.coding_levels) - 1}")
        return self.levels[self.coding_levels[n]].critical

    def coding_nodes(self) -> List[TypeNode]:
        return [self.levels[r].critical for r in self.coding_levels]

    def is_coding(self, node: TypeNode) -> bool:
        lvl = self.levels[node.level] if node.level <= self.top else None
        return lvl is not None and lvl.kind == "coding" and lvl.critical == node

    def critical(self) -> List[Level]:
        """Critical levels by increasing length."""
        return [lvl for lvl in self.levels if lvl.kind != "plain"]

    def critical_levels(self) -> List[int]:
        return [lvl.level for lvl in self.levels if lvl.kind != "plain"]

    def splitting_nodes(self) -> List[TypeNode]:
        return [lvl.critical for lvl in self.levels if lvl.kind == "split"]

    def represented_vertices(self) -> Tuple[int, ...]:
        return tuple(self.coding_levels)

    def as_subtree(self) -> SubtreeSel:
        return SubtreeSel.of(self.nodes(), self.coding_nodes(), self.colours)


class LabeledDiagonalTree(BaseModel):
    """A diagonal tree whose splitting nodes carry labels ``0..q-1``.

    ``pair_table[m] = (sigma, tau)`` lists the partial passing types (over one parameter, index 0) that
    a pair of coding nodes meeting at a splitting node labelled ``m`` must show.
    """

    tree: DiagonalTree
    q: int = Field(default=2, ge=2)
    labels: Dict[int, int] = Field(default_factory=dict, description="Label of the splitting node at each level")
    pair_table: Dict[int, Tuple[PassingType, PassingType]] = Field(default_factory=dict)

    def label(self, node: TypeNode) -> Optional[int]:
        if not self.tree.is_splitting(node):
            return None
        return self.labels.get(node.level)


def relative_type(t: TypeNode, represented: Sequence[int]) -> TypeNode:
    """The type ``t`` induces over the represented vertices, re-indexed onto ``0..k-1``."""
    represented = sorted(represented)
    blocks = [t.blocks[0]]
    for i, r in enumerate(represented):
        blocks.append(relative_passing_type(t, r, represented[:i]))
    return TypeNode.from_blocks(blocks)


def _children(spec: ClassSpec, K: FinStructure, node: TypeNode, unary: bool) -> List[TypeNode]:
    return [
        child
        for child in (node.extend(b) for b in candidate_blocks(K.lang, node.level + 1, unary))
        if admits_node(spec, K, child, unary)
    ]


def _least_child(
    spec: ClassSpec, K: FinStructure, node: TypeNode, unary: bool, fixed: Optional[Dict[Slot, bool]] = None
) -> Optional[TypeNode]:
    for block in constrained_blocks(K.lang, node.level + 1, fixed or {}, unary):
        child = node.extend(block)
        if admits_node(spec, K, child, unary):
            return child
    return None


def _realizable_types(spec: ClassSpec, K: FinStructure, n: int, unary: bool) -> List[TypeNode]:
    """Every realizable type over ``K_n`` in tree order."""
    level = [TypeNode.from_blocks((b,)) for b in candidate_blocks(K.lang, 0, unary)]
    level = [t for t in level if admits_node(spec, K, t, unary)]
    for _ in range(n):
        level = [child for t in level for child in _children(spec, K, t, unary)]
    return level


def _with_colour(lang: Language, node: TypeNode, colour: Optional[int]) -> TypeNode:
    """``node`` as a full type with unary colour ``colour``; nodes that already carry a colour are kept."""
    slots = block_slots(lang, 0, True)
    if not slots or node.blocks[0]:
        return node
    name = lang.unary[colour] if colour is not None else None
    gamma = tuple((rank, args, lang.ranked[rank].name == name) for rank, args in slots)
    return TypeNode.from_blocks((gamma,) + node.blocks[1:])


def _split_vertices(spec: ClassSpec, K: FinStructure, node: TypeNode) -> List[TypeNode]:
    """Full types over ``K`` that may serve as the vertex splitting ``node``, most promising first."""
    lang = K.lang
    found: List[TypeNode] = []

    def offer(t: Optional[TypeNode]) -> None:
        if t is not None and t not in found and admits_node(spec, K, t, True):
            found.append(t)

    if node.blocks[0] or not block_slots(lang, 0, True):
        offer(node)
    for gamma in block_options(lang, 0, True):
        offer(TypeNode.from_blocks((gamma,) + node.blocks[1:]))
    for gamma in block_options(lang, 0, True):
        root = TypeNode.from_blocks((gamma,))
        if admits_node(spec, K, root, True):
            offer(least_completion(spec, K, root, K.size, True))
    return found


def _split_counts(count: int) -> List[int]:
    """Branch counts for the lesser child, balanced first."""
    half = count // 2
    return [half] + [a for a in range(1, count) if a != half]


def _holds_e_last(lang: Language, u: TypeNode) -> bool:
    """Does ``u`` put ``x`` in the E-class of the newest vertex?"""
    if not lang.has("E"):
        return False
    e = lang.rank("E")
    newest = u.level - 1
    return any(f[0] == e and f[2] and f[1] == (X, newest) for f in u.blocks[-1])


class _Branch(NamedTuple):
    node: TypeNode
    owner: int
    count: int


class _StagePlan(NamedTuple):
    structure: FinStructure
    vertices: Tuple[TypeNode, ...]
    levels: Tuple[Level, ...]
    coding_node: TypeNode
    coding_successor: TypeNode
    frontier: Tuple[TypeNode, ...]
    splits: int


class _StagePlanner:
    """Depth-first search for one stage on a private copy of the structure.

    ``targets[i]`` are the successors (types over ``K_{n+1}``) that the branches above frontier node ``i``
    must realize, one each. The coding branch grows from frontier node ``coding_owner``.
    """

    max_plain = 2

    def __init__(
        self,
        spec: ClassSpec,
        unary: bool,
        represented: Sequence[int],
        targets: Sequence[Sequence[TypeNode]],
        coding_owner: int,
        colour: Optional[int],
        nested: Sequence[Tuple[TypeNode, PassingType]],
    ):
        self.spec = spec
        self.lang = spec.language()
        self.unary = unary
        self.represented = list(represented)
        self.n = len(self.represented)
        self.targets = [list(t) for t in targets]
        self.coding_owner = coding_owner
        self.colour = colour
        self.nested = list(nested)
        self.budget = config.plan_budget
        self.ticks = 0

    def _tick(self) -> None:
        self.ticks += 1
        if self.ticks > self.budget:
            raise BudgetExhausted(f"No plan for stage {self.n} within {self.budget} search steps", self.ticks)

    def plan(self, K: FinStructure, frontier: Sequence[TypeNode]) -> Optional[_StagePlan]:
        branches = tuple(_Branch(w, i, len(self.targets[i])) for i, w in enumerate(frontier))
        if any(b.count == 0 for b in branches):
            raise PreconditionError(f"A frontier node has no successor type at stage {self.n}")
        return self._grow(K, branches, (), (), 0, 0)

    def _grow(self, K, branches, levels, vertices, splits, plain) -> Optional[_StagePlan]:
        self._tick()
        pending = [b for b in branches if b.count > 1]
        if not pending:
            return self._finish(K, branches, levels, vertices, splits)
        target = min(pending, key=lambda b: b.node.blocks)
        nodes = tuple(sorted(b.node for b in branches))
        split_found = False
        for vertex in _split_vertices(self.spec, K, target.node):
            K2 = K.extend(vertex)
            kids = _children(self.spec, K2, target.node, self.unary)
            if len(kids) < 2:
                continue
            rest = []
            for b in branches:
                if b is target:
                    continue
                nxt = _least_child(self.spec, K2, b.node, self.unary)
                if nxt is None:
                    break
                rest.append(b._replace(node=nxt))
            else:
                split_found = True
                record = Level(level=K.size, kind="split", nodes=nodes, critical=target.node)
                for c1, c2 in itertools.combinations(kids, 2):
                    for a in _split_counts(target.count):
                        grown = tuple(rest) + (
                            _Branch(c1, target.owner, a),
                            _Branch(c2, target.owner, target.count - a),
                        )
                        found = self._grow(K2, grown, levels + (record,), vertices + (vertex,), splits + 1, 0)
                        if found is not None:
                            return found
        if split_found or plain >= self.max_plain:
            return None
        # nothing splits the pending branch over this prefix: pass one level
        for vertex in _split_vertices(self.spec, K, target.node):
            K2 = K.extend(vertex)
            moved = [_least_child(self.spec, K2, b.node, self.unary) for b in branches]
            if any(m is None for m in moved):
                continue
            grown = tuple(b._replace(node=m) for b, m in zip(branches, moved))
            record = Level(level=K.size, kind="plain", nodes=nodes)
            return self._grow(K2, grown, levels + (record,), vertices + (vertex,), splits, plain + 1)
        return None

    def _fixed(self, u: TypeNode, m: int) -> Dict[Slot, bool]:
        """Slot values at level ``m + 1`` that make a branch realize the target ``u``."""
        names = self.represented + [m]
        return {(rank, tuple(X if a == X else names[a] for a in args)): value for rank, args, value in u.blocks[-1]}

    def _coding_targets(self) -> List[TypeNode]:
        found = list(self.targets[self.coding_owner])
        if self.spec.fresh_class_policy:
            found.sort(key=lambda u: 0 if _holds_e_last(self.lang, u) else 1)
        return found

    def _finish(self, K, branches, levels, vertices, splits) -> Optional[_StagePlan]:
        m = K.size
        by_owner: Dict[int, List[TypeNode]] = {}
        for b in branches:
            by_owner.setdefault(b.owner, []).append(b.node)
        for owner in by_owner:
            by_owner[owner].sort()
        nodes = tuple(sorted(b.node for b in branches))
        for x in by_owner[self.coding_owner]:
            self._tick()
            vertex = _with_colour(self.lang, x, self.colour)
            if not admits_node(self.spec, K, vertex, True):
                continue
            K2 = K.extend(vertex)
            memo: Dict[Tuple[TypeNode, TypeNode], Optional[TypeNode]] = {}

            def reach(b: TypeNode, u: TypeNode) -> Optional[TypeNode]:
                if (b, u) not in memo:
                    memo[(b, u)] = _least_child(self.spec, K2, b, self.unary, self._fixed(u, m))
                return memo[(b, u)]

            for u in self._coding_targets():
                z = reach(x, u)
                if z is None or not self._nested_ok(x, z, m):
                    continue
                assignment = {x: z}
                for owner, owned in by_owner.items():
                    if owner == self.coding_owner:
                        rest = [t for t in self.targets[owner] if t != u]
                        matched = self._match(reach, [b for b in owned if b != x], rest)
                    else:
                        matched = self._match(reach, owned, self.targets[owner])
                    if matched is None:
                        break
                    assignment.update(matched)
                else:
                    record = Level(level=m, kind="coding", nodes=nodes, critical=x, colour=self.colour)
                    return _StagePlan(
                        structure=K2,
                        vertices=vertices + (vertex,),
                        levels=levels + (record,),
                        coding_node=x,
                        coding_successor=z,
                        frontier=tuple(sorted(assignment.values())),
                        splits=splits,
                    )
        return None

    def _nested_ok(self, x: TypeNode, z: TypeNode, m: int) -> bool:
        for i, (c, passing) in enumerate(self.nested):
            if x.extends(c) and relative_passing_type(z, m, self.represented[:i]) != passing:
                return False
        return True

    @staticmethod
    def _match(reach, nodes: List[TypeNode], targets: List[TypeNode]) -> Optional[Dict[TypeNode, TypeNode]]:
        """Assign each branch its own target; tree order is tried before a general matching."""
        if len(nodes) != len(targets):
            return None
        straight = [reach(b, u) for b, u in zip(nodes, targets)]
        if all(z is not None for z in straight):
            return dict(zip(nodes, straight))
        owner_of: Dict[int, int] = {}

        def augment(i: int, seen: set) -> bool:
            for j, u in enumerate(targets):
                if j in seen or reach(nodes[i], u) is None:
                    continue
                seen.add(j)
                if j not in owner_of or augment(owner_of[j], seen):
                    owner_of[j] = i
                    return True
            return False

        for i in range(len(nodes)):
            if not augment(i, set()):
                return None
        return {nodes[i]: reach(nodes[i], targets[j]) for j, i in owner_of.items()}


def construct_diagonal(
    limit: EnumeratedLimit,
    depth: int,
    mode: Optional[Mode] = None,
    callback: Optional[Callable[[RunStatus], None]] = None,
) -> DiagonalTree:
    """Build whole stages until the tree has at least ``depth`` critical levels.

    Raises:
        ScopeError: the class has no construction recipe
        DepthError: a stage has no plan, or the generator cap is reached
        BudgetExhausted: a stage plan ran past ``config.plan_budget`` search steps
    """
    spec = limit.spec
    if not spec.has_diagonal_recipe:
        raise ScopeError(f"No diagonal construction for '{spec.label}'")
    if depth < 1:
        raise DepthError("Diagonal trees are built to depth >= 1")
    mode = mode or spec.preferred_mode
    unary = mode == "S"
    lang = limit.lang
    with logfire.span("construct diagonal tree {label}", label=spec.label, depth=depth, mode=mode):
        limit.ensure(depth)
        frontier = sorted(limit.roots(unary))
        levels: List[Level] = []
        while frontier[0].level < limit.size:
            levels.append(Level(level=frontier[0].level, nodes=tuple(frontier)))
            moved = [limit.least_successor(t, unary) for t in frontier]
            if any(t is None for t in moved):
                raise DepthError(f"A root branch dies below level {limit.size}")
            frontier = sorted(moved)

        represented: List[int] = []
        colours: List[Optional[int]] = []
        nested: List[Tuple[TypeNode, PassingType]] = []
        stage_starts: List[int] = []
        critical = 0
        n = 0
        while critical < depth:
            stage_starts.append(frontier[0].level)
            c_n = limit.vertex_type(n, unary)
            phi = [relative_type(w, represented) for w in frontier]
            if len(set(phi)) != len(phi) or c_n not in phi:
                raise PreconditionError(f"Frontier of stage {n} is not in bijection with the types over K_{n}")
            targets = [limit.successors(p, unary) for p in phi]
            planner = _StagePlanner(
                spec,
                unary,
                represented,
                targets,
                coding_owner=phi.index(c_n),
                colour=limit.colour(n),
                nested=nested,
            )
            plan = planner.plan(limit.K, frontier)
            if plan is None:
                raise DepthError(f"No splitting cascade places c_{n} (searched {planner.ticks} steps)")
            for vertex in plan.vertices:
                if limit.demand(vertex) != vertex.level:
                    raise PreconditionError("Generator placed a demanded vertex out of order")
            if limit.K != plan.structure:
                raise PreconditionError(f"Generator disagrees with the plan for stage {n}")
            m = plan.coding_node.level
            nested.append((plan.coding_node, relative_passing_type(plan.coding_successor, m, represented)))
            represented.append(m)
            colours.append(limit.colour(m))
            levels.extend(plan.levels)
            frontier = list(plan.frontier)
            critical += plan.splits + 1
            logfire.debug(
                "diagonal stage",
                stage=n,
                splits=plan.splits,
                coding_level=m,
                frontier=len(frontier),
                steps=planner.ticks,
            )
            progress = min(100.0, 100 * critical / depth)
            emit_status(callback, "diag build", f"stage {n} coded at level {m}", progress=progress)
            n += 1
        levels.append(Level(level=frontier[0].level, nodes=tuple(frontier)))
        # every level, the frontier included, sits at a built vertex
        limit.ensure(frontier[0].level + 1)
    return DiagonalTree(
        spec_label=spec.label,
        lang=lang,
        mode=mode,
        depth=critical,
        levels=levels,
        coding_levels=represented,
        colours=colours,
        stage_starts=stage_starts,
        spec=spec,
        structure=limit.K,
    )


def check_diagonal(T: DiagonalTree) -> List[Violation]:
    """Every broken diagonal-tree invariant; an empty list means the tree passes."""
    violations: List[Violation] = []
    coding = set(T.coding_levels)
    unary = T.mode == "S"
    for lvl in T.levels[:-1]:
        splitting = []
        for node in lvl.nodes:
            succ = T.successors(node)
            if not succ:
                violations.append(
                    Violation(
                        rule="terminal", message=f"node at level {lvl.level} has no successor", witness=(lvl.level,)
                    )
                )
            elif len(succ) > 1:
                splitting.append(node)
                if len(succ) != 2:
                    violations.append(
                        Violation(
                            rule="degree",
                            message=f"splitting node at level {lvl.level} has {len(succ)} successors",
                            witness=(lvl.level,),
                        )
                    )
        if len(splitting) > 1:
            violations.append(
                Violation(
                    rule="diagonal",
                    message=f"level {lvl.level} has {len(splitting)} splitting nodes",
                    witness=(lvl.level,),
                )
            )
        if splitting and lvl.level in coding:
            violations.append(
                Violation(rule="coding-split", message=f"coding level {lvl.level} splits", witness=(lvl.level,))
            )

    for n, r in enumerate(T.coding_levels):
        c = T.coding_node(n)
        if c is None or c not in T.levels[r].nodes:
            violations.append(Violation(rule="coding", message=f"c_{n} is not a node of level {r}", witness=(n, r)))
        elif c != type_of(r, T.structure, r, unary):
            violations.append(
                Violation(rule="coding-type", message=f"c_{n} is not the type of vertex {r}", witness=(n, r))
            )
        if not unary and T.lang.unary:
            found = T.structure.unary_of(r)
            if not found or T.lang.unary.index(found[0]) != T.colours[n]:
                violations.append(Violation(rule="colour", message=f"colour of c_{n} disagrees", witness=(n, r)))

    for n, r in enumerate(T.coding_levels):
        if r + 1 > T.top:
            break
        rel = [relative_type(t, T.coding_levels[: n + 1]) for t in T.levels[r + 1].nodes]
        if len(set(rel)) != len(rel):
            violations.append(
                Violation(rule="bijection", message=f"two nodes at level {r + 1} share a relative type", witness=(n,))
            )
        expected = _realizable_types(T.spec, T.structure, n + 1, unary)
        if set(rel) != set(expected):
            violations.append(
                Violation(
                    rule="bijection",
                    message=f"level {r + 1} codes {len(set(rel))} of {len(expected)} types over K_{n + 1}",
                    witness=(n,),
                )
            )

    R = T.coding_levels
    for j, k in itertools.combinations(range(len(R)), 2):
        cj, ck = T.coding_node(j), T.coding_node(k)
        if not ck.extends(cj):
            continue
        sj, sk = T.successor(cj), T.successor(ck)
        if sj is None or sk is None:
            continue
        if relative_passing_type(sk, R[k], R[:j]) != relative_passing_type(sj, R[j], R[:j]):
            violations.append(
                Violation(
                    rule="passing", message=f"successors of c_{j} and c_{k} pass differently", witness=(j, k)
                )
            )
    return violations


def check_perfect(T: DiagonalTree, window: int = 1) -> List[Violation]:
    """Nodes up to the start of the last ``window`` stages must lie below some splitting node."""
    if window < 1 or len(T.stage_starts) < window:
        return []
    bound = T.stage_starts[-window]
    splits = T.splitting_nodes()
    violations = []
    for lvl in T.levels[: bound + 1]:
        for node in lvl.nodes:
            if not any(s.extends(node) for s in splits):
                violations.append(
                    Violation(
                        rule="perfect", message=f"node at level {lvl.level} never splits above", witness=(lvl.level,)
                    )
                )
    return violations


def label_qq(T: DiagonalTree) -> LabeledDiagonalTree:
    """Label splits 0 when both branches stay in the E-class of the splitting vertex, else 1."""
    if not isinstance(T.spec, ConvexEquivOrder):
        raise ScopeError(f"Labels are defined for qq, not '{T.spec_label}'")
    e = T.lang.rank("E")
    labels = {}
    for lvl in T.levels:
        if lvl.kind != "split":
            continue
        kids = T.successors(lvl.critical)
        within = all((e, (X, lvl.level), True) in kid.blocks[lvl.level + 1] for kid in kids)
        labels[lvl.level] = 0 if within else 1
    same = ((e, (X, 0), True),)
    apart = ((e, (X, 0), False),)
    return LabeledDiagonalTree(tree=T, q=2, labels=labels, pair_table={0: (same, same), 1: (apart, apart)})


def _agrees(passing: PassingType, partial: PassingType) -> bool:
    return set(partial) <= set(passing)


def check_labels(LT: LabeledDiagonalTree, window: Optional[int] = None) -> List[Violation]:
    """Monotonicity, pair-table coherence and the zero label below coding nodes.

    Label persistence is only checked when ``window`` (in stages) is given.
    """
    T = LT.tree
    violations: List[Violation] = []
    splits = T.splitting_nodes()
    for s in splits:
        if s.level not in LT.labels or not 0 <= LT.labels[s.level] < LT.q:
            violations.append(
                Violation(rule="label", message=f"split at level {s.level} has no valid label", witness=(s.level,))
            )
    labels = {s.level: LT.labels.get(s.level, 0) for s in splits}

    for s, t in itertools.combinations(splits, 2):
        if t.extends(s) and labels[s.level] < labels[t.level]:
            violations.append(
                Violation(
                    rule="label-monotone",
                    message=f"label rises from {labels[s.level]} to {labels[t.level]} along a chain",
                    witness=(s.level, t.level),
                )
            )

    if window is not None and 1 <= window <= len(T.stage_starts):
        bound = T.stage_starts[-window]
        for s in splits:
            if s.level >= bound:
                continue
            for t in T.levels[bound].nodes:
                if t.extends(s) and not any(u.extends(t) and labels[u.level] == labels[s.level] for u in splits):
                    violations.append(
                        Violation(
                            rule="label-persistence",
                            message=f"label of the split at level {s.level} does not recur above level {bound}",
                            witness=(s.level, bound),
                        )
                    )

    coding = T.coding_nodes()
    R = T.coding_levels
    split_set = set(splits)
    for j, k in itertools.combinations(range(len(coding)), 2):
        s = meet(coding[j], coding[k])
        if s is None or s not in split_set:
            continue
        sigma, tau = LT.pair_table.get(labels[s.level], ((), ()))
        p, q = (j, k) if coding[j] < coding[k] else (k, j)
        if p < q:
            ok = _agrees(relative_passing_type(coding[q], R[p], ()), tau)
        else:
            ok = _agrees(relative_passing_type(coding[p], R[q], ()), sigma)
        if not ok:
            violations.append(
                Violation(
                    rule="label-pair",
                    message=f"c_{j} and c_{k} meet at a split labelled {labels[s.level]} but disagree with its pair",
                    witness=(j, k),
                )
            )

    for n, c in enumerate(coding):
        below = [s for s in splits if s.level < c.level and c.extends(s)]
        if below and labels[max(below, key=lambda s: s.level).level] != 0:
            violations.append(
                Violation(rule="label-coding", message=f"last split below c_{n} is not labelled 0", witness=(n,))
            )
    return violations


def select_nodes(T: DiagonalTree, nodes: Sequence[TypeNode]) -> SubtreeSel:
    chosen = set(nodes)
    pairs = [(c, g) for c, g in zip(T.coding_nodes(), T.colours) if c in chosen]
    return SubtreeSel.of(list(chosen), [c for c, _ in pairs], [g for _, g in pairs])


def approx(T: DiagonalTree, k: int) -> SubtreeSel:
    """``r_k(T)``: the union of the levels of the first ``k`` critical nodes."""
    crit = T.critical_levels()
    if not 0 <= k <= len(crit):
        raise DepthError(f"r_{k} needs {k} critical levels, the tree has {len(crit)}")
    return select_nodes(T, [t for L in crit[:k] for t in T.levels[L].nodes])


def approx_of(A: SubtreeSel, k: int) -> SubtreeSel:
    """The first ``k`` levels of a subtree, as ``approx`` gives them for T."""
    lengths = sorted({t.length for t in A.nodes})
    if k > len(lengths):
        raise DepthError(f"r_{k} needs {k} levels, the subtree has {len(lengths)}")
    kept = set(lengths[:k])
    pairs = [(c, g) for c, g in zip(A.coding, A.colours) if c.length in kept]
    return SubtreeSel.of([t for t in A.nodes if t.length in kept], [c for c, _ in pairs], [g for _, g in pairs])


def plus_similar(A: SubtreeSel, B: SubtreeSel, tree: DiagonalTree, tree_b: Optional[DiagonalTree] = None) -> bool:
    """Similarity plus agreement at the top level: splitting nodes correspond, or successors pass alike."""
    tree_b = tree_b or tree
    f = canonical_map(A, B)
    if f is None or not is_similarity(f, A, B):
        return False
    top_a, top_b = A.max_level(), B.max_level()
    split_a = {f[s] for s in top_a if tree.is_splitting(s)}
    split_b = {t for t in top_b if tree_b.is_splitting(t)}
    if split_a or split_b:
        return split_a == split_b
    top_coding = [i for i, c in enumerate(A.coding) if c.length == A.length]
    if top_coding:
        n = top_coding[0]
        for s in top_a:
            sp, tp = tree.successor(s), tree_b.successor(f[s])
            if sp is None or tp is None:
                return False
            if not passing_sim(sp, A.represented_vertices(), tp, B.represented_vertices(), n):
                return False
    return True


def extensions(
    D: SubtreeSel, T: DiagonalTree, n: int, limit: Optional[int] = None, seed: Optional[int] = None
) -> List[SubtreeSel]:
    """Members of ``r_n[D, T]``: the ``r_n`` of subtrees of T similar to T whose ``r_k`` is ``D``.

    With ``seed`` the candidates are visited in shuffled order, so a ``limit`` gives a sample.
    """
    crit = T.critical_levels()
    if n > len(crit):
        raise DepthError(f"r_{n} needs {n} critical levels, the tree has {len(crit)}")
    k = len({t.length for t in D.nodes})
    if k > n:
        raise PreconditionError(f"D has {k} levels, more than n = {n}")
    reference = [approx(T, j) for j in range(n + 1)]
    if not plus_similar(D, reference[k], T):
        return []
    rng = random.Random(seed) if seed is not None else None
    found: List[SubtreeSel] = []
    explored = 0

    def grow(current: SubtreeSel, j: int) -> None:
        nonlocal explored
        if limit is not None and len(found) >= limit:
            return
        if j == n:
            found.append(current)
            return
        if j == 0:
            starts = T.level(0)
        else:
            starts = sorted(u for s in current.max_level() for u in T.successors(s))
        if not starts:
            return
        choices = itertools.chain.from_iterable(
            itertools.product(*[[t for t in T.levels[L].nodes if t.extends(s)] for s in starts])
            for L in range(starts[0].level, T.top + 1)
        )
        if rng is not None:
            choices = list(choices)
            rng.shuffle(choices)
        for choice in choices:
            explored += 1
            if explored > config.search_budget:
                raise BudgetExhausted(f"r_{n}[D, T] enumeration ran out of budget", explored)
            grown = select_nodes(T, list(current.nodes) + list(choice))
            if plus_similar(grown, reference[j + 1], T):
                grow(grown, j + 1)

    grow(D, k)
    return found


def extend_to_copy(
    T: DiagonalTree,
    start: SubtreeSel,
    C: SubtreeSel,
    lookahead: Optional[int] = None,
    tree_c: Optional[DiagonalTree] = None,
) -> Optional[SubtreeSel]:
    """Grow ``start`` inside T, one level of ``C`` at a time, into a +-similar copy of ``C``.

    ``start`` must be +-similar to the first levels of ``C`` (None otherwise). Each further level of ``C`` is
    looked for on the next ``lookahead`` critical levels of T; when that window runs past the built tree and no
    copy was found, ``BudgetExhausted`` is raised instead of returning None. ``tree_c`` is the tree ``C`` lives in.
    """
    tree_c = tree_c or T
    lookahead = config.ext_lookahead if lookahead is None else lookahead
    if lookahead < 1:
        raise PreconditionError("The look-ahead must cover at least one critical level")
    lengths = sorted({t.length for t in C.nodes})
    k = len({t.length for t in start.nodes})
    if k > len(lengths) or not plus_similar(start, approx_of(C, k), T, tree_c):
        return None
    crit = T.critical_levels()
    undecided = False
    explored = 0

    def continued(ends: Sequence[TypeNode], images: Sequence[TypeNode]) -> Optional[List[TypeNode]]:
        # successors pair up by position, C keeps only the directions it continues in
        if len(ends) != len(images):
            return None
        return [u for e, u in zip(ends, images) if any(t.extends(e) for t in C.nodes)]

    def grow(current: SubtreeSel, j: int) -> Optional[SubtreeSel]:
        nonlocal undecided, explored
        if j == len(lengths):
            return current
        if j == 0:
            starts = continued(tree_c.level(0), T.level(0)) or []
        else:
            f = canonical_map(approx_of(C, j), current)
            starts = []
            for c in approx_of(C, j).max_level():
                found = continued(tree_c.successors(c), T.successors(f[c]))
                if found is None:
                    return None
                starts.extend(found)
            starts.sort()
        if not starts:
            return None
        window = [L for L in crit if L >= starts[0].level]
        if len(window) < lookahead:
            undecided = True
        reference = approx_of(C, j + 1)
        for L in window[:lookahead]:
            options = [[t for t in T.levels[L].nodes if t.extends(s)] for s in starts]
            for choice in itertools.product(*options):
                explored += 1
                if explored > config.search_budget:
                    raise BudgetExhausted("Configuration look-ahead ran out of budget", explored)
                grown = select_nodes(T, list(current.nodes) + list(choice))
                if plus_similar(grown, reference, T, tree_c):
                    copy = grow(grown, j + 1)
                    if copy is not None:
                        return copy
        return None

    copy = grow(start, k)
    if copy is None and undecided:
        raise BudgetExhausted(f"Look-ahead of {lookahead} critical levels runs past the built tree", explored)
    return copy


def ext_set(
    T: DiagonalTree,
    B: Sequence[TypeNode],
    X_star: Sequence[TypeNode],
    lookahead: Optional[int] = None,
    A: Optional[SubtreeSel] = None,
    C: Optional[SubtreeSel] = None,
) -> List[List[TypeNode]]:
    """Level sets ``X`` end-extending ``B`` with ``U* ∪ X`` +-similar to ``U* ∪ X*``.

    ``U*`` is the part of T on critical levels below ``B``. With a configuration, ``A`` the copy of its initial
    segment below ``B`` and ``C`` the meet-closed target, each ``X`` must also grow ``A ∪ X`` into a copy of
    ``C`` within ``lookahead`` critical levels per level of ``C`` (``config.ext_lookahead`` by default). That
    clause is skipped when ``X*`` holds a coding node and every relation is at most binary, where it follows
    from similarity. Candidates whose window runs past the built tree are dropped; if that leaves nothing,
    ``BudgetExhausted`` is raised.
    """
    B, X_star = sorted(B), sorted(X_star)
    if not B or len({b.level for b in B}) != 1 or len({x.level for x in X_star}) != 1:
        raise PreconditionError("B and X* must be non-empty level sets")
    if len(B) != len(X_star) or any(not x.extends(b) for x, b in zip(X_star, B)):
        raise PreconditionError("X* must end-extend B node by node")
    if (A is None) != (C is None):
        raise PreconditionError("A configuration needs both A and C")
    lookahead = config.ext_lookahead if lookahead is None else lookahead
    base = B[0].level
    U = [t for L in T.critical_levels() if L < base for t in T.levels[L].nodes]
    reference = select_nodes(T, U + X_star)
    completes = C is not None and not (T.lang.max_arity <= 2 and any(T.is_coding(x) for x in X_star))
    if completes:
        k = len({t.length for t in A.nodes}) + 1
        if k > len({t.length for t in C.nodes}) or not plus_similar(
            select_nodes(T, list(A.nodes) + X_star), approx_of(C, k), T
        ):
            raise PreconditionError("A ∪ X* is not a copy of an initial segment of C")
    found: List[List[TypeNode]] = []
    undecided = 0
    explored = 0
    with logfire.span("ext set", level=base, size=len(B), lookahead=lookahead, configured=completes):
        for L in range(base, T.top + 1):
            options = [[t for t in T.levels[L].nodes if t.extends(b)] for b in B]
            for choice in itertools.product(*options):
                explored += 1
                if explored > config.search_budget:
                    raise BudgetExhausted("Ext enumeration ran out of budget", explored)
                if not plus_similar(select_nodes(T, U + list(choice)), reference, T):
                    continue
                if completes:
                    try:
                        copy = extend_to_copy(T, select_nodes(T, list(A.nodes) + list(choice)), C, lookahead)
                    except BudgetExhausted:
                        undecided += 1
                        continue
                    if copy is None:
                        continue
                found.append(sorted(choice))
        if undecided:
            logfire.debug("ext candidates past the built tree", undecided=undecided, found=len(found))
    if undecided and not found:
        raise BudgetExhausted(f"Look-ahead of {lookahead} critical levels runs past the built tree", explored)
    return found


def extension_level_set(
    T: DiagonalTree, A: SubtreeSel, k: int, s_star: TypeNode, B: Optional[SubtreeSel] = None
) -> Optional[List[TypeNode]]:
    """Extend ``max(B)⁺`` to the length of ``s_star`` so that it completes a +-similar copy of ``r_{k+1}(A)``.

    ``B`` defaults to ``r_k(A)``. Returns the completing level set, or None when none exists in the built
    tree (which does not refute the property).
    """
    upper, lower = approx_of(A, k + 1), approx_of(A, k)
    B = B if B is not None else lower
    top = upper.max_level()
    split = [u for u in top if T.is_splitting(u)]
    if not split:
        raise PreconditionError(f"max(r_{k + 1}(A)) has no splitting node")
    if not plus_similar(B, lower, T):
        raise PreconditionError(f"B is not +-similar to r_{k}(A)")
    if k == 0:
        plus_a, plus_b = T.level(0), T.level(0)
    else:
        plus_a = sorted(u for s in lower.max_level() for u in T.successors(s))
        plus_b = sorted(u for s in B.max_level() for u in T.successors(s))
    if len(plus_a) != len(plus_b):
        raise PreconditionError("max(B)⁺ and max(r_k(A))⁺ differ in size")
    position = {t: i for i, t in enumerate(plus_a)}
    wanted = sorted({position[u.restrict(plus_a[0].level)] for u in top})
    designated = position[split[0].restrict(plus_a[0].level)]
    s = plus_b[designated]
    if not s_star.extends(s) or not T.is_splitting(s_star):
        raise PreconditionError("s* must be a splitting node above the designated node")
    options = []
    for i in wanted:
        if i == designated:
            options.append([s_star])
        else:
            options.append([t for t in T.levels[s_star.level].nodes if t.extends(plus_b[i])])
    explored = 0
    for choice in itertools.product(*options):
        explored += 1
        if explored > config.search_budget:
            raise BudgetExhausted("Extension level search ran out of budget", explored)
        if plus_similar(select_nodes(T, list(B.nodes) + list(choice)), upper, T):
            return sorted(choice)
    return None


def represented_structure(T: DiagonalTree) -> FinStructure:
    """The substructure on the vertices coded by T."""
    return T.structure.induced(T.coding_levels)


def age_covers(T: DiagonalTree, spec: ClassSpec, n: int) -> bool:
    """Does every class member of size at most ``n`` embed into the represented structure?"""
    target = represented_structure(T)
    for size in range(1, n + 1):
        for member in class_members(spec, size, iso=True):
            if not enumerate_embeddings(member, target):
                logfire.debug("age gap", size=size, member=member.digest())
                return False
    return True


def sub_similar(T: DiagonalTree, coding_indices: Sequence[int]) -> SubtreeSel:
    """The subtree induced by the chosen coding nodes."""
    chosen = sorted(set(coding_indices))
    return induced_subtree([T.coding_node(i) for i in chosen], [T.colours[i] for i in chosen])


def check_subtree(S: SubtreeSel, T: DiagonalTree) -> List[Violation]:
    """Diagonality and the coding-successor clause for a finite subtree of T."""
    violations: List[Violation] = []
    coding_lengths = {c.length for c in S.coding}
    per_length: Dict[int, int] = {}
    for s in S.nodes:
        if not S.is_splitting(s):
            continue
        per_length[s.length] = per_length.get(s.length, 0) + 1
        degree = len({t.restrict(s.level + 1) for t in S.nodes if t.level > s.level and t.extends(s)})
        if degree != 2:
            violations.append(
                Violation(
                    rule="degree", message=f"node of length {s.length} has {degree} successors", witness=(s.level,)
                )
            )
        if s.length in coding_lengths:
            violations.append(
                Violation(rule="coding-split", message=f"coding length {s.length} splits", witness=(s.level,))
            )
    for length, count in per_length.items():
        if count > 1:
            violations.append(
                Violation(
                    rule="diagonal", message=f"length {length} has {count} splitting nodes", witness=(length - 1,)
                )
            )
    vertices = S.represented_vertices()
    for i, j in itertools.combinations(range(len(S.coding)), 2):
        ci, cj = S.coding[i], S.coding[j]
        if not cj.extends(ci):
            continue
        si, sj = T.successor(ci), T.successor(cj)
        if si is None or sj is None:
            continue
        if relative_passing_type(sj, vertices[j], vertices[:i]) != relative_passing_type(si, vertices[i], vertices[:i]):
            violations.append(
                Violation(rule="passing", message=f"coding nodes {i} and {j} pass differently", witness=(i, j))
            )
    return violations
