"""Catalogue of Fraisse classes and deterministic generators of their enumerated limits.

Each class decides membership of one-point extensions (``admits``); everything else, including the
realizable-type oracle behind the coding trees, is built on that single predicate.
"""

import hashlib
import itertools
from typing import Annotated, Dict, Iterator, List, Literal, Optional, Sequence, Tuple, Union

import logfire
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from codingtrees.cache import OracleCache
from codingtrees.config import config
from codingtrees.errors import DepthError, PreconditionError, SpecParseError
from codingtrees.structures import (
    X,
    Args,
    Block,
    FinStructure,
    Language,
    Relation,
    Slot,
    TypeNode,
    _tuples_touching,
    block_options,
    block_slots,
    is_3_irreducible,
    is_irreducible,
    iter_types,
    type_of,
)

Mode = Literal["S", "U"]


class _Extension:
    """The prefix ``K_n`` together with a new vertex ``x`` realizing a type."""

    __slots__ = ("K", "n", "positive")

    def __init__(self, K: FinStructure, n: int, t: TypeNode):
        self.K = K
        self.n = n
        ranked = K.lang.ranked
        positive: Dict[str, set] = {}
        for block in t.blocks:
            for rank, args, value in block:
                if value:
                    positive.setdefault(ranked[rank].name, set()).add(args)
        self.positive = positive

    def x_holds(self, name: str, args: Args) -> bool:
        if self.K.lang.relation(name).symmetric:
            args = tuple(sorted(args))
        return args in self.positive.get(name, ())

    def holds(self, name: str, args: Args) -> bool:
        if X in args:
            return self.x_holds(name, args)
        return self.K.holds(name, args)

    def neighbours(self) -> set:
        return {a for found in self.positive.values() for args in found for a in args if a != X}

    def colour(self) -> List[str]:
        return [name for name, found in self.positive.items() if (X,) in found]


def _order_cut(ext: _Extension, name: str = "<") -> Optional[Tuple[Optional[int], Optional[int]]]:
    """Predecessor and successor of ``x`` in the order, or None if the order formulas are inconsistent."""
    ranks = ext.K.order_ranks(name)
    pred = succ = None
    for u in range(ext.n):
        below = ext.x_holds(name, (u, X))
        above = ext.x_holds(name, (X, u))
        if below == above:
            return None
        if below:
            if pred is None or ranks[u] > ranks[pred]:
                pred = u
        elif succ is None or ranks[u] < ranks[succ]:
            succ = u
    if pred is not None and succ is not None and ranks[pred] > ranks[succ]:
        return None
    return pred, succ


def _exactly_one_colour(ext: _Extension) -> Optional[str]:
    colours = ext.colour()
    return colours[0] if len(colours) == 1 else None


class ClassSpec(BaseModel):
    """Base of every catalogue entry."""

    model_config = ConfigDict(frozen=True)

    def language(self) -> Language:
        raise NotImplementedError

    def admits(self, K: FinStructure, n: int, t: TypeNode) -> bool:
        """True iff ``K_n`` plus a vertex realizing ``t`` lies in the class (``K_n`` assumed in the class)."""
        raise NotImplementedError

    @property
    def label(self) -> str:
        raise NotImplementedError

    @property
    def has_sfap(self) -> bool:
        return False

    @property
    def free_amalgamation(self) -> bool:
        """Defined by forbidding irreducible structures, so closed under free amalgams."""
        return False

    @property
    def preferred_mode(self) -> Mode:
        return "S"

    @property
    def fresh_class_policy(self) -> bool:
        return False

    @property
    def has_diagonal_recipe(self) -> bool:
        return self.has_sfap

    def contains(self, s: FinStructure) -> bool:
        """Full membership test, one vertex at a time."""
        if s.lang != self.language():
            return False
        for v in range(s.size):
            if not self.admits(s, v, type_of(v, s, v)):
                return False
        return True


class LinearOrder(ClassSpec):
    kind: Literal["q"] = "q"

    def language(self) -> Language:
        return Language(relations=(Relation(name="<", arity=2),))

    def admits(self, K: FinStructure, n: int, t: TypeNode) -> bool:
        return _order_cut(_Extension(K, n, t)) is not None

    @property
    def label(self) -> str:
        return "q"

    @property
    def has_diagonal_recipe(self) -> bool:
        return True


class ColoredOrder(ClassSpec):
    kind: Literal["qn"] = "qn"
    colors: int = Field(default=2, ge=2, description="Number of dense colour classes")

    def language(self) -> Language:
        unary = tuple(Relation(name=f"U{i}", arity=1) for i in range(self.colors))
        return Language(relations=unary + (Relation(name="<", arity=2),), unary_partition=True)

    def admits(self, K: FinStructure, n: int, t: TypeNode) -> bool:
        ext = _Extension(K, n, t)
        return _exactly_one_colour(ext) is not None and _order_cut(ext) is not None

    @property
    def label(self) -> str:
        return f"qn:{self.colors}"

    @property
    def preferred_mode(self) -> Mode:
        return "U"

    @property
    def has_diagonal_recipe(self) -> bool:
        return True


class ConvexEquivOrder(ClassSpec):
    """Linear order with an equivalence relation whose classes are convex."""

    kind: Literal["qq"] = "qq"

    def language(self) -> Language:
        return Language(relations=(Relation(name="<", arity=2), Relation(name="E", arity=2, symmetric=True)))

    def admits(self, K: FinStructure, n: int, t: TypeNode) -> bool:
        ext = _Extension(K, n, t)
        cut = _order_cut(ext)
        if cut is None:
            return False
        pred, succ = cut
        mates = sorted(args[1] for args in ext.positive.get("E", ()))
        if not mates:
            return not (pred is not None and succ is not None and K.holds("E", (pred, succ)))
        anchor = mates[0]
        cls = {anchor} | {w for w in range(n) if w != anchor and K.holds("E", (anchor, w))}
        if set(mates) != cls:
            return False
        return pred in cls or succ in cls

    @property
    def label(self) -> str:
        return "qq"

    @property
    def fresh_class_policy(self) -> bool:
        return True

    @property
    def has_diagonal_recipe(self) -> bool:
        return True


class Unrestricted(ClassSpec):
    kind: Literal["unrestricted"] = "unrestricted"
    relations: Tuple[Relation, ...] = Field(default=(Relation(name="E", arity=2, symmetric=True),))

    @field_validator("relations")
    @classmethod
    def _non_unary(cls, value: Tuple[Relation, ...]) -> Tuple[Relation, ...]:
        if not value or any(r.arity < 2 for r in value):
            raise ValueError("Unrestricted classes need relations of arity >= 2")
        return value

    def language(self) -> Language:
        return Language(relations=self.relations)

    def admits(self, K: FinStructure, n: int, t: TypeNode) -> bool:
        return True

    @property
    def label(self) -> str:
        if self.relations == (Relation(name="E", arity=2, symmetric=True),):
            return "rado"
        if self.relations == (Relation(name="A", arity=2),):
            return "digraph"
        return "unrestricted:" + ",".join(f"{r.name}/s" if r.symmetric else r.name for r in self.relations)

    @property
    def has_sfap(self) -> bool:
        return True

    @property
    def free_amalgamation(self) -> bool:
        return True


class NPartite(ClassSpec):
    """Graphs with a unary partition and no edges inside a part."""

    kind: Literal["npartite"] = "npartite"
    parts: int = Field(default=2, ge=2)

    def language(self) -> Language:
        unary = tuple(Relation(name=f"U{i}", arity=1) for i in range(self.parts))
        return Language(relations=unary + (Relation(name="E", arity=2, symmetric=True),), unary_partition=True)

    def admits(self, K: FinStructure, n: int, t: TypeNode) -> bool:
        ext = _Extension(K, n, t)
        colour = _exactly_one_colour(ext)
        if colour is None:
            return False
        return all(not K.holds(colour, (args[1],)) for args in ext.positive.get("E", ()))

    @property
    def label(self) -> str:
        return "bipartite" if self.parts == 2 else f"npartite:{self.parts}"

    @property
    def has_sfap(self) -> bool:
        return True

    @property
    def free_amalgamation(self) -> bool:
        return True


class KUniformHypergraph(ClassSpec):
    kind: Literal["hypergraph"] = "hypergraph"
    k: int = Field(default=3, ge=2)

    def language(self) -> Language:
        return Language(relations=(Relation(name="R", arity=self.k, symmetric=True),))

    def admits(self, K: FinStructure, n: int, t: TypeNode) -> bool:
        return True

    @property
    def label(self) -> str:
        return f"hypergraph:{self.k}"

    @property
    def has_sfap(self) -> bool:
        return True

    @property
    def free_amalgamation(self) -> bool:
        return True


class ForbiddenFree(ClassSpec):
    """Structures omitting every listed (irreducible) structure."""

    kind: Literal["forbidden"] = "forbidden"
    forbidden: Tuple[FinStructure, ...] = Field(..., min_length=1)
    name: str = Field(default="forbidden", description="Spec string used in reports")

    @model_validator(mode="after")
    def _check_forbidden(self) -> "ForbiddenFree":
        lang = self.forbidden[0].lang
        for f in self.forbidden:
            if f.lang != lang:
                raise ValueError("Forbidden structures must share one language")
            if not (is_irreducible(f) or is_3_irreducible(f)):
                raise ValueError(f"Forbidden structure of size {f.size} is neither irreducible nor 3-irreducible")
        return self

    def language(self) -> Language:
        return self.forbidden[0].lang

    def admits(self, K: FinStructure, n: int, t: TypeNode) -> bool:
        ext = _Extension(K, n, t)
        return not any(_embeds_through_x(f, ext) for f in self.forbidden)

    @property
    def label(self) -> str:
        return self.name

    @property
    def has_sfap(self) -> bool:
        return all(is_3_irreducible(f) for f in self.forbidden)

    @property
    def free_amalgamation(self) -> bool:
        return True


def _embeds_through_x(f: FinStructure, ext: _Extension) -> bool:
    """Does ``f`` embed into the extension with some vertex sent to ``x``?"""
    nbrs = ext.neighbours()
    for a in range(f.size):
        order = [a] + [v for v in range(f.size) if v != a]
        g = f.relabel([order.index(v) for v in range(f.size)])
        linked = [False] + [
            any(0 in t and i in t for ts in g.tuples.values() for t in ts) for i in range(1, g.size)
        ]
        image: List[int] = [X]

        def consistent(i: int) -> bool:
            for name, t in _tuples_touching(g.lang, i):
                if g.holds(name, t) != ext.holds(name, tuple(image[v] for v in t)):
                    return False
            return True

        def search(i: int) -> bool:
            if i == g.size:
                return True
            pool = sorted(nbrs) if linked[i] else range(ext.n)
            for w in pool:
                if w in image:
                    continue
                image.append(w)
                if consistent(i) and search(i + 1):
                    return True
                image.pop()
            return False

        if consistent(0) and search(1):
            return True
    return False


class OrderedExpansion(ClassSpec):
    """Free superposition of a class with linear orders; ``<`` comes first in the symbol order."""

    kind: Literal["ordered"] = "ordered"
    base: "AnyClassSpec"

    @field_validator("base")
    @classmethod
    def _unordered_base(cls, value: ClassSpec) -> ClassSpec:
        if value.language().has("<"):
            raise ValueError("The base class of an ordered expansion must not mention '<'")
        return value

    def language(self) -> Language:
        base = self.base.language()
        return Language(relations=(Relation(name="<", arity=2),) + base.relations, unary_partition=base.unary_partition)

    def admits(self, K: FinStructure, n: int, t: TypeNode) -> bool:
        return _order_cut(_Extension(K, n, t)) is not None and self.base.admits(K, n, t)

    @property
    def label(self) -> str:
        return f"ordered:{self.base.label}"

    @property
    def preferred_mode(self) -> Mode:
        return self.base.preferred_mode

    @property
    def has_diagonal_recipe(self) -> bool:
        return self.base.has_sfap


AnyClassSpec = Annotated[
    Union[
        LinearOrder,
        ColoredOrder,
        ConvexEquivOrder,
        Unrestricted,
        NPartite,
        KUniformHypergraph,
        ForbiddenFree,
        OrderedExpansion,
    ],
    Field(discriminator="kind"),
]
OrderedExpansion.model_rebuild()


def _complete(lang: Language, size: int) -> FinStructure:
    rel = lang.relations[0]
    tuples = [tuple(c) for c in itertools.combinations(range(size), rel.arity)]
    return FinStructure.build(lang, size, {rel.name: tuples})


def parse_class(text: str) -> ClassSpec:
    """Parse a spec string such as ``rado``, ``qn:3``, ``hypergraph:3`` or ``ordered:bipartite``."""
    raw = text.strip()
    lowered = raw.lower()
    head, _, arg = lowered.partition(":")
    try:
        if lowered == "q":
            return LinearOrder()
        if head == "qn":
            return ColoredOrder(colors=int(arg or 2))
        if lowered == "qq":
            return ConvexEquivOrder()
        if lowered == "rado":
            return Unrestricted()
        if lowered == "digraph":
            return Unrestricted(relations=(Relation(name="A", arity=2),))
        if head == "unrestricted":
            relations = []
            for item in raw.partition(":")[2].split(","):
                name, _, flag = item.strip().partition("/")
                relations.append(Relation(name=name, arity=2, symmetric=flag == "s"))
            return Unrestricted(relations=tuple(relations))
        if lowered == "bipartite":
            return NPartite(parts=2)
        if head == "npartite":
            return NPartite(parts=int(arg))
        if head == "hypergraph":
            return KUniformHypergraph(k=int(arg or 3))
        if lowered == "triangle-free":
            lang = Language(relations=(Relation(name="E", arity=2, symmetric=True),))
            return ForbiddenFree(forbidden=(_complete(lang, 3),), name="triangle-free")
        if head == "tetrahedron-free":
            k = int(arg or 3)
            lang = Language(relations=(Relation(name="R", arity=k, symmetric=True),))
            return ForbiddenFree(forbidden=(_complete(lang, k + 1),), name=f"tetrahedron-free:{k}")
        if head == "ordered":
            return OrderedExpansion(base=parse_class(raw.partition(":")[2]))
    except SpecParseError:
        raise
    except ValueError as e:
        raise SpecParseError(f"Invalid class spec '{text}': {e}") from e
    raise SpecParseError(f"Unknown class spec '{text}'")


def admits_node(spec: ClassSpec, K: FinStructure, t: TypeNode, unary: bool = True) -> bool:
    """Realizability of ``t`` over ``K_{t.level}``; with ``unary=False`` some unary colour must work."""
    lang = K.lang
    if unary or not lang.unary:
        return spec.admits(K, t.level, t)
    return any(
        spec.admits(K, t.level, TypeNode.from_blocks((gamma,) + t.blocks[1:])) for gamma in block_options(lang, 0)
    )


def realizable(spec: ClassSpec, prefix: FinStructure, t: TypeNode) -> bool:
    """True iff ``prefix`` extended by one vertex realizing ``t`` lies in the class."""
    if t.level != prefix.size:
        raise PreconditionError(f"Type over K_{t.level} given for a prefix of size {prefix.size}")
    unary = len(t.blocks[0]) == len(block_slots(prefix.lang, 0, True))
    return admits_node(spec, prefix, t, unary)


def _block_from_bits(slots: Sequence[Slot], bits: int) -> Block:
    s = len(slots)
    return tuple((rank, args, bool((bits >> (s - 1 - i)) & 1)) for i, (rank, args) in enumerate(slots))


def candidate_blocks(lang: Language, i: int, unary: bool = True, after: Optional[Block] = None) -> Iterator[Block]:
    """Blocks for position ``i`` in tree order, optionally only those strictly after ``after``."""
    if i == 0:
        options = block_options(lang, 0, unary)
        start = options.index(after) + 1 if after is not None else 0
        yield from options[start:]
        return
    slots = block_slots(lang, i, unary)
    start = 0
    if after is not None:
        start = sum(1 << (len(slots) - 1 - j) for j, f in enumerate(after) if f[2]) + 1
    for bits in range(start, 1 << len(slots)):
        yield _block_from_bits(slots, bits)


def constrained_blocks(lang: Language, i: int, fixed: Dict[Slot, bool], unary: bool = True) -> Iterator[Block]:
    """Blocks for position ``i`` agreeing with ``fixed``, in tree order."""
    slots = block_slots(lang, i, unary)
    free = [j for j, slot in enumerate(slots) if slot not in fixed]
    for bits in range(1 << len(free)):
        values = {j: bool((bits >> (len(free) - 1 - p)) & 1) for p, j in enumerate(free)}
        yield tuple(
            (rank, args, values[j] if j in values else fixed[(rank, args)]) for j, (rank, args) in enumerate(slots)
        )


def least_completion(
    spec: ClassSpec, K: FinStructure, t: TypeNode, level: int, unary: bool = True
) -> Optional[TypeNode]:
    """The tree-least realizable extension of ``t`` to ``level`` (None on a dead end)."""
    node = t
    while node.level < level:
        for block in candidate_blocks(K.lang, node.level + 1, unary):
            child = node.extend(block)
            if admits_node(spec, K, child, unary):
                node = child
                break
        else:
            return None
    return node


def next_type(spec: ClassSpec, K: FinStructure, m: int, after: Optional[TypeNode]) -> Optional[TypeNode]:
    """The realizable type over ``K_m`` following ``after`` in tree order (the least one if ``after`` is None)."""
    if after is None:
        root = None
        for block in candidate_blocks(K.lang, 0):
            candidate = TypeNode.from_blocks((block,))
            if admits_node(spec, K, candidate):
                root = candidate
                if (done := least_completion(spec, K, root, m)) is not None:
                    return done
        return None
    for j in range(m, -1, -1):
        base = after.restrict(j - 1) if j > 0 else None
        for block in candidate_blocks(K.lang, j, after=after.blocks[j]):
            candidate = base.extend(block) if base is not None else TypeNode.from_blocks((block,))
            if not admits_node(spec, K, candidate):
                continue
            if (done := least_completion(spec, K, candidate, m)) is not None:
                return done
    return None


def _hash_bits(key: str) -> int:
    return int(hashlib.md5(key.encode()).hexdigest(), 16)


class GeneratorState(BaseModel):
    """An enumerated prefix of the limit with its obligation schedule.

    ``schedule`` holds cursors ``(m, t)``: the next obligation at level ``m`` is the realizable type
    after ``t`` in tree order (the least one when ``t`` is None). ``demands`` are served first.
    ``horizon[m]`` is the prefix size at which every realizable type over ``K_m`` had been realized.
    """

    model_config = ConfigDict(frozen=True)

    spec: AnyClassSpec
    built: FinStructure
    schedule: Tuple[Tuple[int, Optional[TypeNode]], ...] = ((0, None),)
    demands: Tuple[TypeNode, ...] = ()
    horizon: Dict[int, int] = Field(default_factory=dict)
    policy: Literal["fifo", "round-robin"] = "fifo"
    salt: int = 0


def start(spec: ClassSpec, policy: str = "fifo", salt: int = 0) -> GeneratorState:
    return GeneratorState(spec=spec, built=FinStructure.empty(spec.language()), policy=policy, salt=salt)


def _complete_obligation(g: GeneratorState, t: TypeNode) -> TypeNode:
    """Extend an obligation to a type over the whole prefix, pseudo-randomly but deterministically."""
    spec, K = g.spec, g.built
    N = K.size
    fresh = spec.fresh_class_policy and not any(
        f[2] and K.lang.ranked[f[0]].name == "E" for f in t.formulas
    )
    node = t
    while node.level < N:
        i = node.level + 1
        slots = block_slots(K.lang, i)
        key = f"{g.salt}:{N}:{i}:{t.digest}"
        chosen = None
        if len(slots) <= 6:
            options = [b for b in candidate_blocks(K.lang, i) if spec.admits(K, i, node.extend(b))]
            if fresh:
                fresh_options = [b for b in options if not any(f[2] and K.lang.ranked[f[0]].name == "E" for f in b)]
                options = fresh_options or options
            if options:
                chosen = options[_hash_bits(key) % len(options)]
        else:
            for attempt in range(4):
                block = _block_from_bits(slots, _hash_bits(f"{key}:{attempt}") % (1 << len(slots)))
                if spec.admits(K, i, node.extend(block)):
                    chosen = block
                    break
        if chosen is None:
            nxt = least_completion(spec, K, node, i)
            if nxt is None:
                raise DepthError(f"No realizable extension of an obligation at level {i}")
            node = nxt
        else:
            node = node.extend(chosen)
    return node


def step(g: GeneratorState) -> GeneratorState:
    """Add one vertex: serve a demand if any, else the front obligation of the schedule."""
    K = g.built
    N = K.size
    if g.demands:
        t = g.demands[0]
        target = least_completion(g.spec, K, t, N)
        if target is None:
            raise DepthError(f"Demanded type over K_{t.level} has no realizable completion")
        return g.model_copy(
            update={
                "built": K.extend(target),
                "demands": g.demands[1:],
                "schedule": g.schedule + ((N + 1, None),),
            }
        )
    schedule = list(g.schedule)
    horizon = dict(g.horizon)
    for _ in range(len(schedule) + 1):
        m, after = schedule.pop(0)
        t = next_type(g.spec, K, m, after)
        if t is None:
            horizon.setdefault(m, N)
            schedule.append((m, None))
            continue
        target = _complete_obligation(g, t)
        if g.policy == "fifo":
            schedule.insert(0, (m, t))
        else:
            schedule.append((m, t))
        schedule.append((N + 1, None))
        return g.model_copy(update={"built": K.extend(target), "schedule": tuple(schedule), "horizon": horizon})
    raise DepthError("Generator schedule has no realizable obligation")


def demand(g: GeneratorState, t: TypeNode) -> GeneratorState:
    """Queue a priority obligation; the next vertex realizes the least completion of ``t``."""
    if t.level > g.built.size:
        raise PreconditionError(f"Cannot demand a type over K_{t.level} from a prefix of size {g.built.size}")
    return g.model_copy(update={"demands": g.demands + (t,)})


def run(spec: ClassSpec, steps: int, policy: str = "fifo", salt: int = 0) -> GeneratorState:
    g = start(spec, policy=policy, salt=salt)
    with logfire.span("generate {label}", label=spec.label, steps=steps):
        for _ in range(steps):
            g = step(g)
    return g


class EnumeratedLimit:
    """Mutable handle on a growing generator, with memoised realizability answers.

    Prefixes never change once built, so answers keyed by class label, prefix digest and type digest
    stay valid as the structure grows, and one cache may serve several limits.
    """

    def __init__(self, spec: ClassSpec, policy: str = "fifo", salt: int = 0, cache: Optional[OracleCache] = None):
        self.spec = spec
        self.lang = spec.language()
        self.state = start(spec, policy=policy, salt=salt)
        self.cache = cache if cache is not None else OracleCache()
        self._digests: Dict[int, str] = {}

    @classmethod
    def from_state(cls, state: GeneratorState) -> "EnumeratedLimit":
        limit = cls(state.spec, policy=state.policy, salt=state.salt)
        limit.state = state
        return limit

    @property
    def K(self) -> FinStructure:
        return self.state.built

    @property
    def size(self) -> int:
        return self.state.built.size

    def step(self) -> int:
        if self.size >= config.max_vertices:
            raise DepthError(f"Vertex cap {config.max_vertices} reached")
        self.state = step(self.state)
        return self.size - 1

    def ensure(self, n: int) -> FinStructure:
        while self.size < n:
            self.step()
        return self.K

    def demand(self, t: TypeNode) -> int:
        """Append a vertex realizing the least completion of ``t``; returns its index."""
        self.state = demand(self.state, t)
        return self.step()

    def _prefix_digest(self, n: int) -> str:
        if n not in self._digests:
            self._digests[n] = self.K.prefix(n).digest()
        return self._digests[n]

    def admits(self, t: TypeNode, unary: bool = True) -> bool:
        self.ensure(t.level)
        args = (self.spec.label, self._prefix_digest(t.level), t.level, t.digest, unary)
        cached = self.cache.get("admits", args)
        if cached is not None:
            return cached
        answer = admits_node(self.spec, self.K, t, unary)
        self.cache.set("admits", args, answer)
        return answer

    def roots(self, unary: bool = True) -> List[TypeNode]:
        return [
            node
            for node in (TypeNode.from_blocks((b,)) for b in candidate_blocks(self.lang, 0, unary))
            if self.admits(node, unary)
        ]

    def successors(self, node: TypeNode, unary: bool = True) -> List[TypeNode]:
        """Every realizable immediate successor of ``node``, in tree order."""
        self.ensure(node.level + 1)
        return [
            child
            for child in (node.extend(b) for b in candidate_blocks(self.lang, node.level + 1, unary))
            if self.admits(child, unary)
        ]

    def least_successor(
        self, node: TypeNode, unary: bool = True, fixed: Optional[Dict[Slot, bool]] = None
    ) -> Optional[TypeNode]:
        """The tree-least realizable successor agreeing with ``fixed`` on the listed slots."""
        self.ensure(node.level + 1)
        for block in constrained_blocks(self.lang, node.level + 1, fixed or {}, unary):
            child = node.extend(block)
            if self.admits(child, unary):
                return child
        return None

    def two_least_successors(self, node: TypeNode, unary: bool = True) -> Optional[Tuple[TypeNode, TypeNode]]:
        self.ensure(node.level + 1)
        found = []
        for block in candidate_blocks(self.lang, node.level + 1, unary):
            child = node.extend(block)
            if self.admits(child, unary):
                found.append(child)
                if len(found) == 2:
                    return found[0], found[1]
        return None

    def vertex_type(self, v: int, unary: bool = True) -> TypeNode:
        self.ensure(v + 1)
        return type_of(v, self.K, v, unary)

    def colour(self, v: int) -> Optional[int]:
        """Index of the unary symbol vertex ``v`` satisfies (None without unary symbols)."""
        self.ensure(v + 1)
        for i, name in enumerate(self.lang.unary):
            if self.K.holds(name, (v,)):
                return i
        return None


def class_members(spec: ClassSpec, n: int, iso: bool = True) -> List[FinStructure]:
    """Every member of the class on ``n`` vertices (one per isomorphism class when ``iso``)."""
    lang = spec.language()
    level = [FinStructure.empty(lang)]
    for size in range(n):
        nxt = []
        seen = set()
        for s in level:
            for t in iter_types(lang, size):
                if not spec.admits(s, size, t):
                    continue
                ext = s.extend(t)
                if iso:
                    key = ext.canonical_form()
                    if key in seen:
                        continue
                    seen.add(key)
                nxt.append(ext)
        level = nxt
    return level
