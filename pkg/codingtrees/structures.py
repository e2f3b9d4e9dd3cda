"""Finite relational languages, finite structures and quantifier-free 1-types.

Vertices are the integers ``0..n-1``. Inside argument tuples the free variable ``x`` is encoded as
``X = -1`` so that it sorts before every vertex.
"""

import hashlib
import itertools
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PrivateAttr,
    ValidationInfo,
    field_serializer,
    field_validator,
    model_validator,
)

from codingtrees.errors import DepthError, LanguageMismatchError

X = -1

Args = Tuple[int, ...]
Formula = Tuple[int, Args, bool]  # (relation rank, arguments, holds)
Block = Tuple[Formula, ...]
Slot = Tuple[int, Args]


class Relation(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1, description="Relation symbol")
    arity: int = Field(..., ge=1, description="Number of arguments")
    symmetric: bool = Field(default=False, description="Argument order is irrelevant; tuples are stored sorted")


class Language(BaseModel):
    """A finite relational language.

    ``symbol_order`` lists the positive symbols; every negated symbol precedes every positive one, so a
    formula that fails sorts before the same formula holding. An empty ``symbol_order`` means
    declaration order.
    """

    model_config = ConfigDict(frozen=True)

    relations: Tuple[Relation, ...] = Field(..., description="Relation symbols in declaration order")
    unary_partition: bool = Field(default=False, description="Every vertex satisfies exactly one unary symbol")
    symbol_order: Tuple[str, ...] = Field(default=(), description="Order of positive symbols, seed of the tree order")

    _ranked: Tuple[Relation, ...] = PrivateAttr(default=())
    _rank: Dict[str, int] = PrivateAttr(default_factory=dict)
    _hash: int = PrivateAttr(default=0)

    @model_validator(mode="after")
    def _check(self) -> "Language":
        names = [r.name for r in self.relations]
        if len(set(names)) != len(names):
            raise ValueError(f"Duplicate relation names in {names}")
        if not any(r.arity >= 2 for r in self.relations):
            raise ValueError("Language needs at least one relation of arity >= 2")
        if self.unary_partition and sum(r.arity == 1 for r in self.relations) < 2:
            raise ValueError("A unary partition needs at least two unary symbols")
        if self.symbol_order and sorted(self.symbol_order) != sorted(names):
            raise ValueError(f"symbol_order {self.symbol_order} is not a permutation of {names}")
        for rel in self.relations:
            if rel.symmetric and rel.arity < 2:
                raise ValueError(f"Unary relation '{rel.name}' cannot be symmetric")
        return self

    def model_post_init(self, __context) -> None:
        order = self.symbol_order or tuple(r.name for r in self.relations)
        by_name = {r.name: r for r in self.relations}
        self._ranked = tuple(by_name[name] for name in order)
        self._rank = {name: i for i, name in enumerate(order)}
        self._hash = hash((self.relations, self.unary_partition, order))

    def __hash__(self) -> int:
        return self._hash

    @property
    def ranked(self) -> Tuple[Relation, ...]:
        return self._ranked

    def rank(self, name: str) -> int:
        return self._rank[name]

    def relation(self, name: str) -> Relation:
        return self._ranked[self._rank[name]]

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(r.name for r in self.relations)

    @property
    def unary(self) -> Tuple[str, ...]:
        return tuple(r.name for r in self._ranked if r.arity == 1)

    @property
    def max_arity(self) -> int:
        return max(r.arity for r in self.relations)

    def has(self, name: str) -> bool:
        return name in self._rank


class FinStructure(BaseModel):
    """A finite structure on ``{0..size-1}``. The empty structure is allowed."""

    model_config = ConfigDict(frozen=True)

    lang: Language
    size: int = Field(default=0, ge=0, description="Number of vertices")
    tuples: Dict[str, FrozenSet[Args]] = Field(default_factory=dict, description="Tuples per relation name")

    _order_ranks: Dict[str, List[int]] = PrivateAttr(default_factory=dict)

    @field_validator("tuples", mode="after")
    @classmethod
    def _normalize(cls, value: Dict[str, FrozenSet[Args]], info: ValidationInfo) -> Dict[str, FrozenSet[Args]]:
        lang = info.data.get("lang")
        if lang is None:
            return value
        unknown = set(value) - set(lang.names)
        if unknown:
            raise ValueError(f"Unknown relation(s) {sorted(unknown)}")
        normalized = {}
        for rel in lang.relations:
            found = value.get(rel.name, frozenset())
            if rel.symmetric:
                found = frozenset(tuple(sorted(t)) for t in found)
            normalized[rel.name] = frozenset(found)
        return normalized

    @field_serializer("tuples")
    def _serialize_tuples(self, value: Dict[str, FrozenSet[Args]]) -> Dict[str, List[List[int]]]:
        return {name: sorted(list(t) for t in value.get(name, ())) for name in self.lang.names}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FinStructure)
            and self.lang == other.lang
            and self.size == other.size
            and self.tuples == other.tuples
        )

    def __hash__(self) -> int:
        return hash((self.lang, self.size, self.canonical_key()))

    @classmethod
    def build(cls, lang: Language, size: int, tuples: Mapping[str, Iterable[Sequence[int]]] | None = None):
        """Validated constructor taking any iterables of tuples."""
        tuples = tuples or {}
        return cls(lang=lang, size=size, tuples={k: frozenset(tuple(t) for t in v) for k, v in tuples.items()})

    @classmethod
    def empty(cls, lang: Language) -> "FinStructure":
        return cls.model_construct(lang=lang, size=0, tuples={name: frozenset() for name in lang.names})

    def holds(self, name: str, args: Sequence[int]) -> bool:
        if self.lang.relation(name).symmetric:
            args = tuple(sorted(args))
        return tuple(args) in self.tuples[name]

    def unary_of(self, v: int) -> Tuple[str, ...]:
        return tuple(name for name in self.lang.unary if (v,) in self.tuples[name])

    def canonical_key(self) -> Tuple[Tuple[Args, ...], ...]:
        """Labelled identity: sorted tuples per relation in declaration order."""
        return tuple(tuple(sorted(self.tuples[name])) for name in self.lang.names)

    def digest(self) -> str:
        return hashlib.md5(repr((self.size, self.canonical_key())).encode()).hexdigest()

    def relabel(self, new_index: Sequence[int]) -> "FinStructure":
        """Structure obtained by sending vertex ``v`` to ``new_index[v]`` (a permutation)."""
        tuples = {}
        for rel in self.lang.relations:
            mapped = (tuple(new_index[v] for v in t) for t in self.tuples[rel.name])
            if rel.symmetric:
                mapped = (tuple(sorted(t)) for t in mapped)
            tuples[rel.name] = frozenset(mapped)
        return FinStructure.model_construct(lang=self.lang, size=self.size, tuples=tuples)

    def induced(self, vertices: Iterable[int]) -> "FinStructure":
        """Induced substructure, relabelled by the increasing bijection onto ``0..k-1``."""
        chosen = sorted(set(vertices))
        for v in chosen:
            if not 0 <= v < self.size:
                raise DepthError(f"Vertex {v} outside structure of size {self.size}")
        position = {v: i for i, v in enumerate(chosen)}
        tuples = {}
        for rel in self.lang.relations:
            kept = (t for t in self.tuples[rel.name] if all(v in position for v in t))
            mapped = (tuple(position[v] for v in t) for t in kept)
            tuples[rel.name] = frozenset(tuple(sorted(t)) for t in mapped) if rel.symmetric else frozenset(mapped)
        return FinStructure.model_construct(lang=self.lang, size=len(chosen), tuples=tuples)

    def prefix(self, n: int) -> "FinStructure":
        """The initial segment on ``{0..n-1}``."""
        if not 0 <= n <= self.size:
            raise DepthError(f"Prefix length {n} outside 0..{self.size}")
        if n == self.size:
            return self
        tuples = {name: frozenset(t for t in ts if max(t) < n) for name, ts in self.tuples.items()}
        return FinStructure.model_construct(lang=self.lang, size=n, tuples=tuples)

    def extend(self, t: "TypeNode") -> "FinStructure":
        """One-point extension whose new vertex realizes ``t``."""
        if t.level != self.size:
            raise DepthError(f"Type over K_{t.level} cannot extend a structure of size {self.size}")
        v = self.size
        added: Dict[str, set] = {name: set() for name in self.lang.names}
        ranked = self.lang.ranked
        for block in t.blocks:
            for rank, args, value in block:
                if value:
                    rel = ranked[rank]
                    new = tuple(v if a == X else a for a in args)
                    added[rel.name].add(tuple(sorted(new)) if rel.symmetric else new)
        tuples = {name: self.tuples[name] | added[name] if added[name] else self.tuples[name] for name in added}
        child = FinStructure.model_construct(lang=self.lang, size=v + 1, tuples=tuples)
        for name, ranks in self._order_ranks.items():
            below = sum(1 for t in added[name] if t[1] == v)
            child._order_ranks[name] = [r + 1 if r >= below else r for r in ranks] + [below]
        return child

    def reduct(self, lang: Language) -> "FinStructure":
        """Forget every relation not in ``lang``."""
        tuples = {name: self.tuples.get(name, frozenset()) for name in lang.names}
        return FinStructure.model_construct(lang=lang, size=self.size, tuples=tuples)

    def order_ranks(self, name: str = "<") -> List[int]:
        """Position of each vertex in the linear order ``name`` (number of smaller vertices)."""
        if name not in self._order_ranks:
            ranks = [0] * self.size
            for _, hi in self.tuples[name]:
                ranks[hi] += 1
            self._order_ranks[name] = ranks
        return self._order_ranks[name]

    def canonical_form(self) -> Tuple:
        """Isomorphism invariant: the least relabelled key over vertex orders that respect invariants."""
        n = self.size
        if n == 0:
            return (0, self.canonical_key())
        profile = {v: [] for v in range(n)}
        for rel in self.lang.ranked:
            counts = [[0] * rel.arity for _ in range(n)]
            for t in self.tuples[rel.name]:
                for pos, v in enumerate(t):
                    counts[v][0 if rel.symmetric else pos] += 1
            for v in range(n):
                profile[v].append(tuple(counts[v]))
        cells: Dict[tuple, List[int]] = {}
        for v in range(n):
            cells.setdefault(tuple(profile[v]), []).append(v)
        ordered_cells = [cells[key] for key in sorted(cells)]
        best = None
        for choice in itertools.product(*(itertools.permutations(cell) for cell in ordered_cells)):
            order = [v for perm in choice for v in perm]
            new_index = [0] * n
            for i, v in enumerate(order):
                new_index[v] = i
            key = self.relabel(new_index).canonical_key()
            if best is None or key < best:
                best = key
        return (n, best)


class TypeNode(BaseModel):
    """A complete quantifier-free 1-type over the prefix ``K_level``.

    ``blocks[i]`` holds the formulas whose newest parameter is ``v_{i-1}``; ``blocks[0]`` holds the
    parameter-free (unary) formulas. Each block lists every slot exactly once with its polarity, sorted
    by (relation rank, arguments). Comparing ``blocks`` lexicographically is the tree order.
    """

    model_config = ConfigDict(frozen=True)

    level: int = Field(..., ge=0, description="The type is over K_level")
    blocks: Tuple[Block, ...] = Field(..., description="Formula blocks")
    chain: Tuple[str, ...] = Field(default=(), exclude=True, repr=False, description="Digest of each initial segment")

    @model_validator(mode="after")
    def _check_shape(self) -> "TypeNode":
        if len(self.blocks) != self.level + 1:
            raise ValueError(f"A type over K_{self.level} has {self.level + 1} blocks, got {len(self.blocks)}")
        if len(self.chain) != len(self.blocks):
            object.__setattr__(self, "chain", _chain_digests(self.blocks))
        return self

    @classmethod
    def from_blocks(cls, blocks: Sequence[Block]) -> "TypeNode":
        blocks = tuple(blocks)
        return cls.model_construct(level=len(blocks) - 1, blocks=blocks, chain=_chain_digests(blocks))

    def __eq__(self, other) -> bool:
        return isinstance(other, TypeNode) and self.level == other.level and self.chain[-1] == other.chain[-1]

    def __hash__(self) -> int:
        return hash((self.level, self.chain[-1]))

    def __lt__(self, other: "TypeNode") -> bool:
        return self.blocks < other.blocks

    @property
    def digest(self) -> str:
        return self.chain[-1]

    @property
    def length(self) -> int:
        return self.level + 1

    @property
    def formulas(self) -> Tuple[Formula, ...]:
        return tuple(f for block in self.blocks for f in block)

    def block(self, i: int) -> Block:
        return self.blocks[i]

    def extend(self, block: Block) -> "TypeNode":
        chain = self.chain + (_chain_step(self.chain[-1], block),)
        return TypeNode.model_construct(level=self.level + 1, blocks=self.blocks + (block,), chain=chain)

    def restrict(self, level: int) -> "TypeNode":
        """The restriction to ``K_level``."""
        if not 0 <= level <= self.level:
            raise DepthError(f"Cannot restrict a type over K_{self.level} to K_{level}")
        if level == self.level:
            return self
        return TypeNode.model_construct(level=level, blocks=self.blocks[: level + 1], chain=self.chain[: level + 1])

    def extends(self, other: "TypeNode") -> bool:
        return other.level <= self.level and self.chain[other.level] == other.chain[-1]

    def positives(self, lang: Language) -> List[str]:
        return [format_formula(lang, f) for f in self.formulas if f[2]]

    def describe(self, lang: Language) -> str:
        return "{" + ", ".join(self.positives(lang)) + "}"


def _chain_step(previous: str, block: Block) -> str:
    return hashlib.md5((previous + repr(block)).encode()).hexdigest()


def _chain_digests(blocks: Sequence[Block]) -> Tuple[str, ...]:
    chain = []
    previous = ""
    for block in blocks:
        previous = _chain_step(previous, tuple(block))
        chain.append(previous)
    return tuple(chain)


def format_formula(lang: Language, formula: Formula) -> str:
    rank, args, value = formula
    rel = lang.ranked[rank]
    names = ["x" if a == X else f"v{a}" for a in args]
    if rel.arity == 2 and not rel.name.isalnum():
        text = f"{names[0]}{rel.name}{names[1]}"
    else:
        text = f"{rel.name}({','.join(names)})"
    return text if value else f"¬{text}"


@lru_cache(maxsize=None)
def block_slots(lang: Language, i: int, unary: bool = True) -> Tuple[Slot, ...]:
    """Slots of block ``i``: (rank, args) over ``{x, v_0..v_{i-1}}`` containing ``x`` and ``v_{i-1}``."""
    slots = []
    for rank, rel in enumerate(lang.ranked):
        if i == 0:
            if rel.arity == 1 and unary:
                slots.append((rank, (X,)))
            continue
        if rel.arity < 2:
            continue
        newest = i - 1
        for rest in itertools.combinations(range(newest), rel.arity - 2):
            members = (X, newest) + rest
            if rel.symmetric:
                slots.append((rank, tuple(sorted(members))))
            else:
                slots.extend((rank, perm) for perm in itertools.permutations(members))
    return tuple(sorted(slots))


@lru_cache(maxsize=4096)
def block_options(lang: Language, i: int, unary: bool = True) -> Tuple[Block, ...]:
    """Every polarity assignment of block ``i`` in tree order (respecting the unary partition)."""
    slots = block_slots(lang, i, unary)
    options = []
    for values in itertools.product((False, True), repeat=len(slots)):
        if i == 0 and lang.unary_partition and unary and sum(values) != 1:
            continue
        options.append(tuple((rank, args, value) for (rank, args), value in zip(slots, values)))
    return tuple(options)


def iter_types(lang: Language, n: int, unary: bool = True) -> Iterator[TypeNode]:
    """All complete types over an n-element prefix, realizable or not, in tree order."""
    for blocks in itertools.product(*(block_options(lang, i, unary) for i in range(n + 1))):
        yield TypeNode.from_blocks(blocks)


def substitute(args: Args, v: int) -> Args:
    return tuple(v if a == X else a for a in args)


def _check_language(a: FinStructure, b: FinStructure) -> None:
    if a.lang != b.lang:
        raise LanguageMismatchError("Structures are over different languages")


class Violation(BaseModel):
    """One broken structure invariant, with the offending tuple or vertex."""

    rule: str = Field(..., description="loop, unary-partition, arity, range or language")
    message: str
    witness: Tuple[int, ...] = Field(default=())


def validate_structure(lang: Language, s: FinStructure) -> List[Violation]:
    """Every violated structure invariant; an empty list means the structure is valid."""
    violations = []
    if s.lang != lang:
        violations.append(Violation(rule="language", message="structure is over a different language"))
    for rel in s.lang.relations:
        for t in sorted(s.tuples.get(rel.name, ())):
            label = f"({','.join(map(str, t))})"
            if len(t) != rel.arity:
                violations.append(
                    Violation(rule="arity", message=f"{rel.name}{label} has arity {len(t)}", witness=t)
                )
            if any(not 0 <= v < s.size for v in t):
                violations.append(Violation(rule="range", message=f"{rel.name}{label} out of range", witness=t))
            if len(set(t)) != len(t):
                violations.append(Violation(rule="loop", message=f"loop at {label}", witness=t))
    if s.lang.unary_partition:
        for v in range(s.size):
            count = len(s.unary_of(v))
            if count != 1:
                violations.append(
                    Violation(
                        rule="unary-partition",
                        message=f"unary partition: vertex {v} satisfies {count} unary symbols",
                        witness=(v,),
                    )
                )
    return violations


@lru_cache(maxsize=None)
def _tuples_touching(lang: Language, i: int) -> Tuple[Tuple[str, Args], ...]:
    """All (name, tuple) over ``{0..i}`` that contain ``i``."""
    found = []
    for rel in lang.relations:
        for rest in itertools.combinations(range(i), rel.arity - 1):
            members = rest + (i,)
            if rel.symmetric:
                found.append((rel.name, members))
            else:
                found.extend((rel.name, perm) for perm in itertools.permutations(members))
    return tuple(found)


def enumerate_embeddings(a: FinStructure, b: FinStructure) -> List[Tuple[int, ...]]:
    """All embeddings of ``a`` into ``b`` as image tuples, in lexicographic order."""
    _check_language(a, b)
    found: List[Tuple[int, ...]] = []
    image: List[int] = []
    used = set()

    def consistent(i: int) -> bool:
        for name, t in _tuples_touching(a.lang, i):
            if a.holds(name, t) != b.holds(name, tuple(image[v] for v in t)):
                return False
        return True

    def extend(i: int) -> None:
        if i == a.size:
            found.append(tuple(image))
            return
        for w in range(b.size):
            if w in used:
                continue
            image.append(w)
            used.add(w)
            if consistent(i):
                extend(i + 1)
            image.pop()
            used.discard(w)

    extend(0)
    return found


def ordered_iso(a: FinStructure, b: FinStructure) -> bool:
    """True iff the increasing bijection of universes is an isomorphism."""
    if a.lang != b.lang or a.size != b.size:
        return False
    return a.canonical_key() == b.canonical_key()


def isomorphic(a: FinStructure, b: FinStructure) -> bool:
    return a.lang == b.lang and a.canonical_form() == b.canonical_form()


def type_of(prefix: FinStructure | int, ambient: FinStructure, v: int, unary: bool = True) -> TypeNode:
    """The complete quantifier-free 1-type of vertex ``v`` over the first ``|prefix|`` vertices."""
    if isinstance(prefix, FinStructure):
        if prefix.lang != ambient.lang:
            raise LanguageMismatchError("Prefix and ambient structure are over different languages")
        n = prefix.size
    else:
        n = prefix
    if v < n:
        raise DepthError(f"Vertex {v} lies inside the prefix K_{n}")
    if v >= ambient.size:
        raise DepthError(f"Vertex {v} outside structure of size {ambient.size}")
    lang = ambient.lang
    ranked = lang.ranked
    blocks = []
    for i in range(n + 1):
        blocks.append(
            tuple(
                (rank, args, ambient.holds(ranked[rank].name, substitute(args, v)))
                for rank, args in block_slots(lang, i, unary)
            )
        )
    return TypeNode.from_blocks(blocks)


def realizes(ambient: FinStructure, v: int, t: TypeNode) -> bool:
    """True iff vertex ``v`` satisfies every formula of ``t``."""
    if v < t.level or v >= ambient.size:
        return False
    ranked = ambient.lang.ranked
    return all(ambient.holds(ranked[rank].name, substitute(args, v)) == value for rank, args, value in t.formulas)


def all_structures(lang: Language, n: int, iso: bool = False) -> List[FinStructure]:
    """Every structure on ``n`` vertices (no loops, unary partition respected), optionally one per iso class."""
    level = [FinStructure.empty(lang)]
    for size in range(n):
        nxt = []
        seen = set()
        for s in level:
            for t in iter_types(lang, size):
                ext = s.extend(t)
                if iso:
                    key = ext.canonical_form()
                    if key in seen:
                        continue
                    seen.add(key)
                nxt.append(ext)
        level = nxt
    return level


def is_irreducible(s: FinStructure) -> bool:
    """Every two distinct vertices lie in a common tuple."""
    covered = set()
    for ts in s.tuples.values():
        for t in ts:
            covered.update(itertools.combinations(sorted(set(t)), 2))
    return all(pair in covered for pair in itertools.combinations(range(s.size), 2))


def is_3_irreducible(s: FinStructure) -> bool:
    """Every three distinct vertices lie in a common tuple."""
    covered = set()
    for ts in s.tuples.values():
        for t in ts:
            covered.update(itertools.combinations(sorted(set(t)), 3))
    return all(triple in covered for triple in itertools.combinations(range(s.size), 3))
