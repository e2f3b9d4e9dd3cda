"""Finite searches for monochromatic copies: homogeneous level-set chains and copies of enumerated prefixes."""

import itertools
import json
import random
from collections import Counter
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Literal, Optional, Sequence, Tuple

import logfire
from pydantic import BaseModel, Field, model_validator

from codingtrees.catalogue import ClassSpec, EnumeratedLimit
from codingtrees.config import config
from codingtrees.diagonal import (
    DiagonalTree,
    approx,
    approx_of,
    check_subtree,
    construct_diagonal,
    ext_set,
    plus_similar,
    select_nodes,
)
from codingtrees.errors import BudgetExhausted, CodingTreesError, DepthError, PreconditionError, SpecParseError
from codingtrees.history import RunStatus
from codingtrees.structures import X, FinStructure, TypeNode, ordered_iso, type_of
from codingtrees.typetree import SubtreeSel
from codingtrees.utils import emit_status

LevelSetColouring = Callable[[Sequence[TypeNode]], int]


class ColoringSpec(BaseModel):
    """A colouring of vertices (equivalently of coding nodes) with ``colors`` colours."""

    colors: int = Field(default=2, ge=1, description="Number of colours")
    source: Literal["random", "parity", "interval", "file"] = Field(default="random")
    seed: int = Field(default=0, description="Seed of the random source")
    interval_width: int = Field(default=4, ge=1, description="Order-rank width of each interval")
    values: Optional[List[int]] = Field(default=None, description="Explicit colours for the file source")

    @model_validator(mode="after")
    def _check_values(self) -> "ColoringSpec":
        if self.source == "file":
            if self.values is None:
                raise ValueError("A file colouring needs values")
            bad = [c for c in self.values if not 0 <= c < self.colors]
            if bad:
                raise ValueError(f"Colours {sorted(set(bad))} outside 0..{self.colors - 1}")
        return self

    @classmethod
    def from_file(cls, path: Path | str, colors: Optional[int] = None) -> "ColoringSpec":
        try:
            values = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise SpecParseError(f"Cannot read colouring file {path}: {e}") from e
        if not isinstance(values, list) or not all(isinstance(c, int) for c in values):
            raise SpecParseError(f"Colouring file {path} must hold a JSON list of integers")
        return cls(source="file", values=values, colors=colors or max(values, default=0) + 1)

    def colours(self, K: FinStructure, n: Optional[int] = None) -> List[int]:
        """Colours of the vertices ``0..n-1`` of ``K``."""
        n = K.size if n is None else n
        if self.source == "random":
            rng = random.Random(self.seed)
            return [rng.randrange(self.colors) for _ in range(n)]
        if self.source == "parity":
            return [v % self.colors for v in range(n)]
        if self.source == "interval":
            if not K.lang.has("<"):
                raise PreconditionError("Interval colourings need an order")
            ranks = K.prefix(n).order_ranks("<")
            return [(ranks[v] // self.interval_width) % self.colors for v in range(n)]
        if len(self.values) < n:
            raise PreconditionError(f"Colouring file covers {len(self.values)} vertices, {n} needed")
        return list(self.values[:n])

    def level_sets(self, T: DiagonalTree) -> LevelSetColouring:
        """Colour a level set by the colour of the vertex at its level, the frontier level included."""
        if T.structure.size <= T.top:
            raise PreconditionError(f"The tree reaches level {T.top} but codes only {T.structure.size} vertices")
        colours = self.colours(T.structure, T.top + 1)
        return lambda X_set: colours[X_set[0].level]


class HomogenizeReport(BaseModel):
    colour: int = Field(..., description="The colour shared by every captured Ext member")
    levels: List[int] = Field(default_factory=list, description="Level of each captured member")
    chosen: List[List[TypeNode]] = Field(default_factory=list)
    subtree: SubtreeSel
    base: int = Field(default=0, description="Critical levels below B, kept as they are in T")
    case: Literal["split", "coding"] = Field(..., description="Kind of the critical node of X*")
    path: List[int] = Field(default_factory=list, description="Level of T used for each grown level")
    votes: List[int] = Field(default_factory=list, description="Colour counts at the first member level")
    backtracks: int = 0
    explored: int = 0


def _members_within(by_level: Dict[int, List[Tuple[List[TypeNode], int]]], level: int, nodes: set) -> list:
    return [(X_set, c) for X_set, c in by_level.get(level, []) if nodes.issuperset(X_set)]


def homogenize(
    T: DiagonalTree,
    B: Sequence[TypeNode],
    X_star: Sequence[TypeNode],
    h: LevelSetColouring,
    depth: int = 1,
    callback: Optional[Callable[[RunStatus], None]] = None,
    *,
    A: Optional[SubtreeSel] = None,
    C: Optional[SubtreeSel] = None,
    family: Optional[Sequence[Sequence[TypeNode]]] = None,
    budget: Optional[int] = None,
) -> HomogenizeReport:
    """Thin T above ``r_n(T)`` to a subtree whose ``depth`` captured members of Ext share one colour.

    ``n`` counts the critical levels below ``B``, which must sit right above the n-th one. The subtree keeps
    ``r_n(T)`` and grows one critical level at a time, each grown level a +-similar copy of the next level of
    T. At levels of the same kind as the critical node of ``X*`` the grown level is placed where it captures
    members of the current colour; a grown level capturing a member of another colour is rejected. ``family``
    replaces ``Ext_T(B; X*)`` (computed against the configuration ``A``/``C`` when given) as the sets to be
    coloured. Colours are tried in decreasing vote order at the first level holding a member.

    Raises:
        DepthError: ``depth`` below one
        PreconditionError: B or X* out of place, or an output check failed
        BudgetExhausted: no homogeneous subtree within the built tree or ``budget`` steps
    """
    if depth < 1:
        raise DepthError("Homogenization needs depth >= 1")
    B, X_star = sorted(B), sorted(X_star)
    if not B or not X_star:
        raise PreconditionError("B and X* must be non-empty level sets")
    crit = T.critical_levels()
    base = B[0].level
    n = sum(1 for L in crit if L < base)
    if base != (crit[n - 1] + 1 if n else 0):
        raise PreconditionError(f"B must sit right above the critical level {crit[n - 1] if n else 'root'}")
    top_star = T.levels[X_star[0].level]
    if top_star.critical not in X_star:
        raise PreconditionError("X* holds no critical node")
    case = top_star.kind
    budget = config.homogenize_budget if budget is None else budget
    members = [sorted(X_set) for X_set in family] if family is not None else ext_set(T, B, X_star, A=A, C=C)
    if not members:
        raise BudgetExhausted("Ext is empty within the built tree")
    by_level: Dict[int, List[Tuple[List[TypeNode], int]]] = {}
    for X_set in members:
        by_level.setdefault(X_set[0].level, []).append((X_set, h(X_set)))
    votes = Counter(c for _, c in by_level[min(by_level)])
    order = [c for c, _ in sorted(votes.items(), key=lambda kv: (-kv[1], kv[0]))]
    order += sorted({c for row in by_level.values() for _, c in row} - set(order))
    D = approx(T, n)
    backtracks = explored = 0

    def grow(colour: int) -> Optional[Tuple[SubtreeSel, List[int], List[Tuple[List[TypeNode], int]]]]:
        coloured = sorted(L for L, row in by_level.items() if any(c == colour for _, c in row))
        dead: set = set()
        path: List[int] = []
        captured: List[Tuple[List[TypeNode], int]] = []

        def step(S: SubtreeSel, c: int) -> Optional[SubtreeSel]:
            nonlocal backtracks, explored
            if len(captured) == depth:
                return S
            if c >= len(crit):
                return None
            frontier = tuple(S.max_level()) if c else ()
            key = (c, frontier, S.represented_vertices(), len(captured))
            if key in dead:
                return None
            top = frontier[0].level if frontier else -1
            if sum(1 for L in coloured if L > top) < depth - len(captured):
                dead.add(key)
                return None
            starts = sorted(u for s in frontier for u in T.successors(s)) if c else T.level(0)
            if not starts:
                return None
            kind = T.levels[crit[c]].kind
            candidates = [L for L in crit if L >= starts[0].level and T.levels[L].kind == kind]
            if kind == case:
                candidates.sort(key=lambda L: (L not in coloured, L))
            reference = approx(T, c + 1)
            for L in candidates:
                options = [[t for t in T.levels[L].nodes if t.extends(s)] for s in starts]
                for choice in itertools.product(*options):
                    explored += 1
                    if explored > budget:
                        raise BudgetExhausted("Homogenization ran out of budget", explored)
                    new = _members_within(by_level, L, set(choice))
                    if any(col != colour for _, col in new):
                        continue
                    grown = select_nodes(T, list(S.nodes) + list(choice))
                    if not plus_similar(grown, reference, T):
                        continue
                    path.append(L)
                    captured.extend(new)
                    found = step(grown, c + 1)
                    if found is not None:
                        return found
                    del captured[len(captured) - len(new) :]
                    path.pop()
                    backtracks += 1
            dead.add(key)
            return None

        S = step(D, n)
        return None if S is None else (S, list(path), list(captured))

    with logfire.span("homogenize", level=base, base=n, case=case, depth=depth, members=len(members)):
        for colour in order:
            emit_status(callback, "homogenize", f"colour {colour}")
            result = grow(colour)
            if result is None:
                backtracks += 1
                continue
            S, path, captured = result
            _check_homogeneous(S, T, D, n, by_level, colour)
            logfire.info("homogenized", colour=colour, backtracks=backtracks, explored=explored)
            return HomogenizeReport(
                colour=colour,
                levels=[X_set[0].level for X_set, _ in captured],
                chosen=[X_set for X_set, _ in captured],
                subtree=S,
                base=n,
                case=case,
                path=path,
                votes=[votes.get(c, 0) for c in range(max(order) + 1)],
                backtracks=backtracks,
                explored=explored,
            )
    raise BudgetExhausted(f"No homogeneous subtree capturing {depth} Ext members within the built tree", explored)


def _check_homogeneous(
    S: SubtreeSel, T: DiagonalTree, D: SubtreeSel, n: int, by_level: Dict[int, list], colour: int
) -> None:
    violations = check_subtree(S, T)
    if violations:
        raise PreconditionError(f"Homogenized subtree breaks {violations[0].rule}: {violations[0].message}")
    if n and not plus_similar(approx_of(S, n), D, T):
        raise PreconditionError(f"Homogenized subtree does not keep r_{n}(T)")
    nodes = set(S.nodes)
    stray = [X_set for L in by_level for X_set, c in _members_within(by_level, L, nodes) if c != colour]
    if stray:
        raise PreconditionError(f"Homogenized subtree holds a member of another colour at level {stray[0][0].level}")



def _target_types(target: FinStructure) -> List[TypeNode]:
    return [type_of(j, target, j) for j in range(target.size)]


def _matches(K: FinStructure, chosen: Sequence[int], u: int, t: TypeNode) -> bool:
    """Does ``u`` relate to ``chosen`` as the j-th prefix vertex relates to the earlier ones?"""
    ranked = K.lang.ranked
    for rank, args, value in t.formulas:
        mapped = tuple(u if a == X else chosen[a] for a in args)
        if K.holds(ranked[rank].name, mapped) != value:
            return False
    return True


def verify_mono_copy(K: FinStructure, U: Sequence[int], m: int, colouring: Sequence[int]) -> bool:
    """Independent check: ``U`` is monochromatic and ``K`` restricted to it is ordered-isomorphic to ``K_m``."""
    if len(U) != m or len(set(U)) != m or list(U) != sorted(U):
        return False
    if any(not 0 <= v < min(K.size, len(colouring)) for v in U):
        return False
    if len({colouring[v] for v in U}) > 1:
        return False
    return ordered_iso(K.induced(U), K.prefix(m))


def _tree_copy(tree: DiagonalTree, m: int, N: int, colours: Sequence[int]) -> Optional[HomogenizeReport]:
    """Homogenize the coding singletons of ``tree`` below ``N`` into a subtree coding ``m`` vertices."""
    family = [[c] for c in tree.coding_nodes() if c.level < N]
    if len(family) < m:
        return None
    c_0 = tree.coding_node(0)
    try:
        return homogenize(
            tree,
            [c_0.restrict(0)],
            [c_0],
            lambda X_set: colours[X_set[0].level],
            depth=m,
            family=family,
        )
    except (BudgetExhausted, PreconditionError, DepthError) as e:
        logfire.debug("tree copy search gave up", reason=str(e))
        return None


def find_mono_copy(
    limit: EnumeratedLimit,
    m: int,
    N: int,
    colouring: ColoringSpec,
    tree: Optional[DiagonalTree] = None,
) -> SearchReport:
    """Search the first ``N`` vertices for a monochromatic copy of ``K_m`` placed in increasing order.

    With ``tree`` its coding nodes are homogenized first and the vertices of the resulting subtree are the
    witness; when that fails the whole prefix is searched directly.
    """
    if m < 1 or N < m:
        raise DepthError(f"Need 1 <= m <= N, got m = {m}, N = {N}")
    K = limit.ensure(N).prefix(N)
    colours = colouring.colours(K, N)
    report = SearchReport(seed=colouring.seed)

    with logfire.span("find mono copy", m=m, N=N, colors=colouring.colors, source=colouring.source):
        if tree is not None:
            homogenized = _tree_copy(tree, m, N, colours)
            if homogenized is not None:
                witness = list(homogenized.subtree.represented_vertices())
                report.nodes += homogenized.explored
                report.backtracks += homogenized.backtracks
                if verify_mono_copy(K, witness, m, colours):
                    report.found = True
                    report.witness = witness
                    report.colour = homogenized.colour
                    report.levels = witness[-1] + 1
                    report.strategy = "tree"
                    logfire.debug("mono copy", witness=witness, colour=homogenized.colour, strategy="tree")
                    return report
                logfire.info("homogenized subtree is not a copy", witness=witness)

        targets = _target_types(K.prefix(m))
        counts = Counter(colours)
        for colour in sorted(counts, key=lambda c: (-counts[c], c)):
            candidates = [v for v in range(N) if colours[v] == colour]
            chosen: List[int] = []

            def search(start: int) -> bool:
                j = len(chosen)
                if j == m:
                    return True
                for p in range(start, len(candidates) - (m - j - 1)):
                    report.nodes += 1
                    if report.nodes > config.search_budget:
                        raise BudgetExhausted("Monochromatic copy search ran out of budget", report.nodes)
                    u = candidates[p]
                    if _matches(K, chosen, u, targets[j]):
                        chosen.append(u)
                        if search(p + 1):
                            return True
                        chosen.pop()
                        report.backtracks += 1
                return False

            try:
                hit = search(0)
            except BudgetExhausted:
                logfire.info("mono copy budget exhausted", nodes=report.nodes)
                return report
            if hit:
                report.found = True
                report.witness = list(chosen)
                report.colour = colour
                report.levels = chosen[-1] + 1
                logfire.debug("mono copy", witness=report.witness, colour=colour, strategy="direct")
                return report
    return report


def run_seeds(
    spec: ClassSpec,
    m: int,
    N: int,
    seeds: Iterable[int],
    colors: int = 2,
    source: Literal["random", "parity", "interval"] = "random",
    callback: Optional[Callable[[RunStatus], None]] = None,
) -> Iterator[SearchReport]:
    """One search per seed over the same built prefix and, where the class has one, the same diagonal tree."""
    limit = EnumeratedLimit(spec)
    tree: Optional[DiagonalTree] = None
    if spec.has_diagonal_recipe:
        try:
            tree = construct_diagonal(limit, config.indiv_tree_depth)
        except CodingTreesError as e:
            logfire.info("searching without a diagonal tree", label=spec.label, reason=str(e))
    seeds = list(seeds)
    for done, seed in enumerate(seeds, start=1):
        report = find_mono_copy(limit, m, N, ColoringSpec(colors=colors, source=source, seed=seed), tree=tree)
        outcome = "found" if report.found else "not found"
        emit_status(callback, "indiv", f"seed {seed}: {outcome}", progress=100 * done / len(seeds))
        yield report


def to_jsonl(reports: Iterable[SearchReport]) -> str:
    return "".join(r.model_dump_json() + "\n" for r in reports)
