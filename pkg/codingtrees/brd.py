"""Big Ramsey degrees through diagonal trees coding ordered copies of a finite structure.

A shape is the event sequence of a finite binary tree: one event per level, either splitting a live
branch or terminating it. Branch ids are paths of ``0`` (left) and ``1`` (right) from the root ``""``.
The i-th terminated branch is the terminal node ``d_i``.
"""

import itertools
from functools import lru_cache
from math import comb
from typing import Callable, Dict, Iterator, List, Literal, Optional, Sequence, Tuple

import logfire
from pydantic import BaseModel, ConfigDict, Field

from codingtrees.catalogue import ClassSpec
from codingtrees.errors import LanguageMismatchError, PreconditionError, ScopeError
from codingtrees.history import RunStatus
from codingtrees.structures import FinStructure, Language, isomorphic
from codingtrees.utils import emit_status

Event = Tuple[Literal["split", "term"], str]


class DiagTreeShape(BaseModel):
    """A diagonal tree with ``n`` terminal nodes, as its ``2n - 1`` level events.

    ``labeling`` lists, for each terminal ``d_i`` and each other branch alive at its level, the relations
    that every terminal above that branch has with ``d_i``. ``coded`` is the structure on the terminals.
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1)
    events: Tuple[Event, ...]
    leaf_order: Tuple[str, ...] = Field(..., description="Terminal branch ids by increasing length")
    labeling: Tuple[Tuple[int, str, Tuple[str, ...]], ...] = Field(default=())
    coded: FinStructure = Field(..., description="Structure induced on d_0..d_{n-1}")

    @property
    def key(self) -> Tuple[Tuple[Event, ...], Tuple]:
        return self.events, self.coded.canonical_key()


class CopyCount(BaseModel):
    enumeration: Tuple[int, ...] = Field(..., description="Original vertex listed at each position")
    structure: FinStructure
    count: int


class BrdReport(BaseModel):
    """Total big Ramsey degree with the contribution of each ordered copy."""

    spec_label: str
    structure: FinStructure
    total: int = 0
    copies: List[CopyCount] = Field(default_factory=list)


def _check_scope(lang: Language) -> None:
    if lang.unary:
        raise ScopeError("Degree counting covers languages without unary symbols")
    if lang.max_arity > 2:
        raise ScopeError(f"Degree counting covers arity at most two, got {lang.max_arity}")


def ordered_copies(A: FinStructure) -> List[Tuple[Tuple[int, ...], FinStructure]]:
    """One enumeration per isomorphism class of ordered copies, relabelled so the enumeration is ``0..n-1``.

    When the language has ``<`` only enumerations listing the vertices in that order count.
    """
    _check_scope(A.lang)
    ordered = A.lang.has("<")
    seen = set()
    copies = []
    for perm in itertools.permutations(range(A.size)):
        new_index = [0] * A.size
        for i, v in enumerate(perm):
            new_index[v] = i
        B = A.relabel(new_index)
        if ordered and any(p > q for p, q in B.tuples["<"]):
            continue
        key = B.canonical_key()
        if key in seen:
            continue
        seen.add(key)
        copies.append((perm, B))
    return copies


def _event_sequences(n: int) -> Iterator[Tuple[Event, ...]]:
    """Every event sequence with ``n`` terminals, generated event by event."""
    events: List[Event] = []

    def search(live: Tuple[str, ...], splits: int, terms: int) -> Iterator[Tuple[Event, ...]]:
        if terms == n:
            yield tuple(events)
            return
        for b in live:
            rest = tuple(x for x in live if x != b)
            if splits < n - 1:
                events.append(("split", b))
                yield from search(tuple(sorted(rest + (b + "0", b + "1"))), splits + 1, terms)
                events.pop()
            if rest or splits == n - 1:
                events.append(("term", b))
                yield from search(rest, splits, terms + 1)
                events.pop()

    yield from search(("",), 0, 0)


def _prefixed(events: Sequence[Event], prefix: str) -> Tuple[Event, ...]:
    return tuple((kind, prefix + b) for kind, b in events)


@lru_cache(maxsize=None)
def _merged_sequences(k: int) -> Tuple[Tuple[Event, ...], ...]:
    """Event sequences built from (left, right) subtrees merged by every shuffle of their levels."""
    if k == 1:
        return ((("term", ""),),)
    found = []
    for k1 in range(1, k):
        for left in _merged_sequences(k1):
            for right in _merged_sequences(k - k1):
                left_ev, right_ev = _prefixed(left, "0"), _prefixed(right, "1")
                size = len(left_ev) + len(right_ev)
                for slots in itertools.combinations(range(size), len(left_ev)):
                    chosen = set(slots)
                    li, ri = iter(left_ev), iter(right_ev)
                    merged = tuple(next(li) if p in chosen else next(ri) for p in range(size))
                    found.append((("split", ""),) + merged)
    return tuple(found)


@lru_cache(maxsize=None)
def q_chain_count(n: int) -> int:
    """Number of shapes with ``n`` terminals: 1, 2, 16, 272, ..."""
    if n < 1:
        raise PreconditionError("Chains have at least one element")
    if n == 1:
        return 1
    return sum(q_chain_count(k) * q_chain_count(n - k) * comb(2 * n - 2, 2 * k - 1) for k in range(1, n))


def _relations_to(D: FinStructure, j: int, i: int) -> Tuple[str, ...]:
    found = []
    for rel in D.lang.relations:
        if rel.symmetric:
            if D.holds(rel.name, (i, j)):
                found.append(f"{rel.name}(x,d{i})")
            continue
        if D.holds(rel.name, (j, i)):
            found.append(f"{rel.name}(x,d{i})")
        if D.holds(rel.name, (i, j)):
            found.append(f"{rel.name}(d{i},x)")
    return tuple(found)


def _coded_structure(leaves: Sequence[str], A_ord: FinStructure) -> FinStructure:
    """The structure on the terminals (``d_i`` is vertex ``i``) that a tree coding ``A_ord`` must carry.

    Without ``<`` the terminal ``d_i`` codes ``a_i``. With ``<`` the order between terminals is their left to
    right position, so ``d_i`` codes the vertex of ``A_ord`` holding that position in its own order.
    """
    if not A_ord.lang.has("<"):
        return A_ord
    index = {b: i for i, b in enumerate(leaves)}
    by_position = sorted(leaves)
    ranks = A_ord.order_ranks("<")
    at = [index[by_position[ranks[v]]] for v in range(A_ord.size)]
    return A_ord.relabel(at)


def _shape_of(events: Tuple[Event, ...], A_ord: FinStructure, spec: ClassSpec) -> Optional[DiagTreeShape]:
    """The shape with its passing-type labeling, or None when it does not code ``A_ord`` in the class."""
    leaves = [b for kind, b in events if kind == "term"]
    index = {b: i for i, b in enumerate(leaves)}
    D = _coded_structure(leaves, A_ord)

    labeling = []
    live = {""}
    for kind, b in events:
        live.discard(b)
        if kind == "split":
            live |= {b + "0", b + "1"}
            continue
        i = index[b]
        for branch in sorted(live):
            above = [index[leaf] for leaf in leaves if leaf.startswith(branch)]
            passing = {_relations_to(D, j, i) for j in above}
            if len(passing) > 1:
                return None
            labeling.append((i, branch, passing.pop()))
    if not spec.contains(D):
        return None
    return DiagTreeShape(
        n=len(leaves), events=events, leaf_order=tuple(leaves), labeling=tuple(labeling), coded=D
    )


def _prepare(A_ord: FinStructure, spec: ClassSpec) -> None:
    _check_scope(A_ord.lang)
    if A_ord.lang != spec.language():
        raise LanguageMismatchError(f"Structure language differs from the language of '{spec.label}'")
    if not spec.contains(A_ord):
        raise PreconditionError(f"Structure is not a member of '{spec.label}'")


def enumerate_shapes(A_ord: FinStructure, spec: ClassSpec) -> Iterator[DiagTreeShape]:
    """Every diagonal tree coding the ordered copy ``A_ord`` (vertex ``i`` is ``a_i``)."""
    _prepare(A_ord, spec)
    if A_ord.size == 0:
        return
    for events in _event_sequences(A_ord.size):
        shape = _shape_of(events, A_ord, spec)
        if shape is not None:
            yield shape


def count_diag_trees(A_ord: FinStructure, spec: ClassSpec) -> int:
    return sum(1 for _ in enumerate_shapes(A_ord, spec))


def _free_slots(lang: Language, n: int) -> List[Tuple[str, Tuple[int, int]]]:
    slots = []
    for rel in lang.relations:
        if rel.name == "<":
            continue
        pairs = itertools.combinations(range(n), 2) if rel.symmetric else itertools.permutations(range(n), 2)
        slots.extend((rel.name, pair) for pair in pairs)
    return slots


def _labelings(lang: Language, leaves: Sequence[str]) -> Iterator[FinStructure]:
    """Every assignment of the non-order relations to the terminals, ``<`` read off the tree."""
    n = len(leaves)
    fixed: Dict[str, List[Tuple[int, int]]] = {}
    if lang.has("<"):
        fixed["<"] = [(i, j) for i in range(n) for j in range(n) if leaves[i] < leaves[j]]
    slots = _free_slots(lang, n)
    for bits in itertools.product((False, True), repeat=len(slots)):
        tuples = {name: list(fixed.get(name, ())) for name in lang.names}
        for on, (name, pair) in zip(bits, slots):
            if on:
                tuples[name].append(pair)
        yield FinStructure.build(lang, n, tuples)


def _passing_agrees(events: Sequence[Event], D: FinStructure) -> bool:
    """Terminals above one branch alive when ``d_i`` terminates relate to ``d_i`` in the same way."""
    split_at = {b: t for t, (kind, b) in enumerate(events) if kind == "split"}
    ends = [(t, b) for t, (kind, b) in enumerate(events) if kind == "term"]
    for i, (t_i, _) in enumerate(ends):
        groups: Dict[str, set] = {}
        for j in range(i + 1, len(ends)):
            leaf = ends[j][1]
            depth = sum(1 for m in range(len(leaf)) if split_at[leaf[:m]] < t_i)
            relation = tuple((D.holds(name, (j, i)), D.holds(name, (i, j))) for name in D.lang.names)
            groups.setdefault(leaf[:depth], set()).add(relation)
        if any(len(seen) > 1 for seen in groups.values()):
            return False
    return True


def _codes(D: FinStructure, A_ord: FinStructure) -> bool:
    if A_ord.lang.has("<"):
        return isomorphic(D, A_ord)
    return D == A_ord


def labeled_records(A_ord: FinStructure, spec: ClassSpec) -> List[Tuple[Tuple[Event, ...], Tuple]]:
    """Labeling-first enumeration: every (tree, labeling) pair, kept when the labeling codes ``A_ord``.

    Trees come from merged subtree pairs and labelings from every assignment of the relations; nothing is
    shared with ``enumerate_shapes`` beyond class membership.
    """
    _prepare(A_ord, spec)
    if A_ord.size == 0:
        return []
    records = []
    for events in _merged_sequences(A_ord.size):
        leaves = [b for kind, b in events if kind == "term"]
        for D in _labelings(A_ord.lang, leaves):
            if _codes(D, A_ord) and _passing_agrees(events, D) and spec.contains(D):
                records.append((events, D.canonical_key()))
    return sorted(records)


def count_diag_trees_recursive(A_ord: FinStructure, spec: ClassSpec) -> int:
    """Same count as ``count_diag_trees``, from the labeling-first enumeration."""
    return len(labeled_records(A_ord, spec))


def shape_records(
    A_ord: FinStructure, spec: ClassSpec, recursive: bool = False
) -> List[Tuple[Tuple[Event, ...], Tuple]]:
    """Sorted (events, labelled structure) records of the counted shapes, for comparing the two enumerators."""
    if recursive:
        return labeled_records(A_ord, spec)
    return sorted(shape.key for shape in enumerate_shapes(A_ord, spec))


def big_ramsey_degree(
    A: FinStructure, spec: ClassSpec, callback: Optional[Callable[[RunStatus], None]] = None
) -> BrdReport:
    """Sum of the diagonal-tree counts over the ordered copies of ``A``."""
    copies = ordered_copies(A)
    report = BrdReport(spec_label=spec.label, structure=A)
    with logfire.span("big ramsey degree {label}", label=spec.label, size=A.size, copies=len(copies)):
        for done, (perm, B) in enumerate(copies, start=1):
            count = count_diag_trees(B, spec)
            report.copies.append(CopyCount(enumeration=tuple(perm), structure=B, count=count))
            report.total += count
            emit_status(callback, "brd", f"ordered copy {done}/{len(copies)}", progress=100 * done / len(copies))
        logfire.info("big ramsey degree", label=spec.label, total=report.total)
    return report


def counts_by_copy(report: BrdReport) -> Dict[Tuple[int, ...], int]:
    return {c.enumeration: c.count for c in report.copies}
