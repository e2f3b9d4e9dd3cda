"""Bounded audits of free, disjoint, substructure-free and substructure-disjoint amalgamation.

Every structure is kept with its distinguished substructure as a prefix: ``A`` is ``C.prefix(|A|)`` and the two
new vertices of ``C`` are ``v = |A|`` and ``w = |A| + 1``. One-point types over ``B`` stand for the vertices
``v'`` and ``w'`` that realize them.
"""

import itertools
from typing import Callable, Dict, Iterator, List, Literal, Optional, Tuple

import logfire
from pydantic import BaseModel, Field

from codingtrees.catalogue import ClassSpec, class_members, constrained_blocks, parse_class
from codingtrees.config import config
from codingtrees.errors import BudgetExhausted, PreconditionError
from codingtrees.history import RunStatus
from codingtrees.structures import X, FinStructure, Slot, TypeNode, block_options, block_slots, iter_types, type_of
from codingtrees.utils import emit_status

AuditProperty = Literal["FAP", "DAP", "SFAP", "SDAP"]
Outcome = Literal["holds", "fails", "inconclusive"]
Clause = Literal["free-amalgam", "disjoint-amalgam", "forced-extension", "no-extension"]


class AuditWitness(BaseModel):
    """The quantifier assignment violating a clause.

    For amalgams ``B`` and ``C`` are one-point extensions of ``A``. For the substructure properties ``D`` is
    ``B`` extended by ``sigma`` and ``C_prime`` is the certificate over ``A_prime`` that ``D`` refutes.
    """

    clause: Clause
    A: FinStructure
    B: FinStructure
    C: FinStructure
    D: Optional[FinStructure] = None
    A_prime: Optional[FinStructure] = None
    C_prime: Optional[FinStructure] = None
    sigma: Optional[TypeNode] = None
    tau: Optional[TypeNode] = None


class AuditVerdict(BaseModel):
    property: AuditProperty
    spec_label: str
    bound1: Optional[int] = Field(default=None, description="Existential bound on A' and C'")
    bound2: int = Field(..., description="Universal bound on B, D and E")
    outcome: Outcome
    witness: Optional[AuditWitness] = None
    cases: int = Field(default=0, description="Hypothesis instances examined")
    certificates: int = Field(default=0, description="Candidate (A', C') pairs examined")
    explored: int = Field(default=0, description="Search nodes visited")


class _Budget:
    __slots__ = ("limit", "used")

    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0

    def tick(self) -> None:
        self.used += 1
        if self.used > self.limit:
            raise BudgetExhausted(f"Audit exceeded {self.limit} search nodes", explored=self.used)


def _grow(spec: ClassSpec, S: FinStructure, size: int, budget: _Budget) -> Iterator[FinStructure]:
    """Every member of the class on ``size`` vertices having ``S`` as its prefix."""
    if S.size == size:
        yield S
        return
    for t in iter_types(S.lang, S.size):
        budget.tick()
        if spec.admits(S, S.size, t):
            yield from _grow(spec, S.extend(t), size, budget)


def _up_to(spec: ClassSpec, S: FinStructure, size: int, budget: _Budget) -> Iterator[FinStructure]:
    for n in range(S.size, size + 1):
        yield from _grow(spec, S, n, budget)


def _types_over(spec: ClassSpec, B: FinStructure, base: TypeNode, budget: _Budget) -> Iterator[TypeNode]:
    """Realizable types over ``B`` whose restriction to the prefix ``K_{base.level}`` is ``base``."""
    tails = itertools.product(*(block_options(B.lang, i) for i in range(base.level + 1, B.size + 1)))
    for tail in tails:
        budget.tick()
        t = TypeNode.from_blocks(base.blocks + tail)
        if spec.admits(B, B.size, t):
            yield t


def _members(spec: ClassSpec, n: int) -> List[FinStructure]:
    return class_members(spec, n, iso=True)


def _free_type(B: FinStructure, C: FinStructure, a: int) -> TypeNode:
    """Type over ``B`` of ``C``'s new vertex in the free amalgam of ``B`` and ``C`` over ``A``."""
    base = type_of(a, C, a)
    tail = tuple(block_options(B.lang, i)[0] for i in range(a + 1, B.size + 1))
    return TypeNode.from_blocks(base.blocks + tail)


def _bridge(C: FinStructure, a: int, d: int, forced: bool) -> Dict[Slot, bool]:
    """Values of the slots joining ``w''`` to ``v'' = d`` in a one-point extension of ``D``.

    Slots whose other parameters lie in ``A`` copy the relations of ``v`` and ``w`` in ``C``. The rest are
    fixed to false when ``forced`` and left open otherwise.
    """
    lang = C.lang
    ranked = lang.ranked
    fixed: Dict[Slot, bool] = {}
    for rank, args in block_slots(lang, d + 1):
        others = [u for u in args if u not in (X, d)]
        if all(u < a for u in others):
            mapped = tuple(a + 1 if u == X else a if u == d else u for u in args)
            fixed[(rank, args)] = C.holds(ranked[rank].name, mapped)
        elif forced:
            fixed[(rank, args)] = False
    return fixed


def _completions(
    spec: ClassSpec, D: FinStructure, tau: TypeNode, C: FinStructure, a: int, forced: bool
) -> Iterator[TypeNode]:
    """Types over ``D`` extending ``tau`` whose realization ``w''`` makes ``A + v'' + w''`` a copy of ``C``."""
    d = D.size - 1
    for block in constrained_blocks(D.lang, d + 1, _bridge(C, a, d, forced)):
        t = TypeNode.from_blocks(tau.blocks + (block,))
        if spec.admits(D, D.size, t):
            yield t


def _amalgam_fails(spec: ClassSpec, A: FinStructure, B: FinStructure, C: FinStructure, free: bool) -> bool:
    a = A.size
    if free:
        return not spec.admits(B, B.size, _free_type(B, C, a))
    base = type_of(a, C, a)
    return not any(
        spec.admits(B, B.size, TypeNode.from_blocks(base.blocks + (block,))) for block in block_options(B.lang, a + 1)
    )


def _audit_amalgams(
    prop: Literal["FAP", "DAP"], spec: ClassSpec, s: int, callback: Optional[Callable[[RunStatus], None]]
) -> AuditVerdict:
    budget = _Budget(config.search_budget)
    verdict = AuditVerdict(property=prop, spec_label=spec.label, bound2=s, outcome="holds")
    clause: Clause = "free-amalgam" if prop == "FAP" else "disjoint-amalgam"
    try:
        for a in range(max(s - 1, 0)):
            emit_status(callback, prop.lower(), f"|A| = {a}", progress=100 * a / max(s - 1, 1))
            for A in _members(spec, a):
                extensions = list(_grow(spec, A, a + 1, budget))
                for B, C in itertools.product(extensions, repeat=2):
                    verdict.cases += 1
                    if _amalgam_fails(spec, A, B, C, free=prop == "FAP"):
                        verdict.outcome = "fails"
                        verdict.witness = AuditWitness(clause=clause, A=A, B=B, C=C)
                        return verdict
    except BudgetExhausted:
        verdict.outcome = "inconclusive"
    finally:
        verdict.explored = budget.used
    return verdict


def audit_fap(
    spec: ClassSpec, s: Optional[int] = None, callback: Optional[Callable[[RunStatus], None]] = None
) -> AuditVerdict:
    """Free amalgamation of one-point extensions of every ``A`` with ``|A| + 2 <= s``."""
    s = config.sdap_bound2 if s is None else s
    with logfire.span("audit fap {label}", label=spec.label, bound=s):
        return _audit_amalgams("FAP", spec, s, callback)


def audit_dap(
    spec: ClassSpec, s: Optional[int] = None, callback: Optional[Callable[[RunStatus], None]] = None
) -> AuditVerdict:
    """Disjoint amalgamation of one-point extensions of every ``A`` with ``|A| + 2 <= s``."""
    s = config.sdap_bound2 if s is None else s
    with logfire.span("audit dap {label}", label=spec.label, bound=s):
        return _audit_amalgams("DAP", spec, s, callback)


def _escalate(verdict: AuditVerdict, pre: AuditVerdict) -> AuditVerdict:
    verdict.outcome = pre.outcome
    verdict.witness = pre.witness
    verdict.cases = pre.cases
    verdict.explored = pre.explored
    return verdict


def audit_sfap(
    spec: ClassSpec, s2: Optional[int] = None, callback: Optional[Callable[[RunStatus], None]] = None
) -> AuditVerdict:
    """Substructure free amalgamation with ``|D| <= s2``, after the free amalgamation precheck."""
    s2 = config.sdap_bound2 if s2 is None else s2
    if s2 < 2:
        raise PreconditionError("The universal bound must leave room for two new vertices")
    verdict = AuditVerdict(property="SFAP", spec_label=spec.label, bound2=s2, outcome="holds")
    with logfire.span("audit sfap {label}", label=spec.label, bound=s2):
        pre = _audit_amalgams("FAP", spec, s2, callback)
        if pre.outcome != "holds":
            return _escalate(verdict, pre)
        budget = _Budget(config.search_budget)
        try:
            for a in range(s2 - 1):
                emit_status(callback, "sfap", f"|A| = {a}", progress=100 * a / (s2 - 1))
                for A in _members(spec, a):
                    for C in _grow(spec, A, a + 2, budget):
                        tv, tw = type_of(a, C, a), type_of(a, C, a + 1)
                        for B in _up_to(spec, A, s2 - 1, budget):
                            for sigma in _types_over(spec, B, tv, budget):
                                D = B.extend(sigma)
                                for tau in _types_over(spec, B, tw, budget):
                                    verdict.cases += 1
                                    if next(_completions(spec, D, tau, C, a, forced=True), None) is None:
                                        verdict.outcome = "fails"
                                        verdict.witness = AuditWitness(
                                            clause="forced-extension", A=A, B=B, C=C, D=D, sigma=sigma, tau=tau
                                        )
                                        return verdict
        except BudgetExhausted:
            verdict.outcome = "inconclusive"
        finally:
            verdict.explored += budget.used
        logfire.info("sfap audit", label=spec.label, outcome=verdict.outcome, cases=verdict.cases)
    return verdict


def _certificates(
    spec: ClassSpec, A: FinStructure, C: FinStructure, cap: int, budget: _Budget
) -> Iterator[Tuple[FinStructure, FinStructure]]:
    """Pairs ``(A', C')`` with ``A`` a prefix of ``A'``, smallest first; ``(A, C)`` itself comes first."""
    a = A.size
    tv, tw = type_of(a, C, a), type_of(a, C, a + 1)
    for size in range(a, cap + 1):
        for A_prime in _grow(spec, A, size, budget):
            for sigma in _types_over(spec, A_prime, tv, budget):
                C1 = A_prime.extend(sigma)
                fixed = _bridge(C, a, size, forced=False)
                inner = [block_options(C.lang, i) for i in range(a + 1, size + 1)]
                for tail in itertools.product(*inner):
                    base = TypeNode.from_blocks(tw.blocks + tail)
                    for block in constrained_blocks(C.lang, size + 1, fixed):
                        budget.tick()
                        t = base.extend(block)
                        if spec.admits(C1, C1.size, t):
                            yield A_prime, C1.extend(t)


def _refute_certificate(
    spec: ClassSpec, A: FinStructure, C: FinStructure, A_prime: FinStructure, C_prime: FinStructure, s2: int,
    budget: _Budget,
) -> Optional[AuditWitness]:
    """A concrete ``B, sigma, tau, D`` admitting no ``E``, or None when the certificate survives up to ``s2``."""
    ap = A_prime.size
    tv, tw = type_of(ap, C_prime, ap), type_of(ap, C_prime, ap + 1)
    for B in _up_to(spec, A_prime, s2 - 1, budget):
        for sigma in _types_over(spec, B, tv, budget):
            D = B.extend(sigma)
            for tau in _types_over(spec, B, tw, budget):
                if next(_completions(spec, D, tau, C, A.size, forced=False), None) is None:
                    return AuditWitness(
                        clause="no-extension", A=A, B=B, C=C, D=D, A_prime=A_prime, C_prime=C_prime, sigma=sigma,
                        tau=tau,
                    )
    return None


def _transfer(spec: ClassSpec, refutation: AuditWitness) -> Optional[AuditWitness]:
    """The refutation with ``A' \\ A`` dropped from ``B``, if it still admits no ``E``.

    In a class given by forbidden irreducible structures such a reduced ``B`` can be freely amalgamated
    with any larger ``A'`` over ``A``, so the same refutation defeats every certificate.
    """
    if not spec.free_amalgamation:
        return None
    a, ap = refutation.A.size, refutation.A_prime.size
    B, D = refutation.B, refutation.D
    keep = list(range(a)) + list(range(ap, B.size))
    k = len(keep)
    D0 = D.induced(keep + [B.size])
    tau0 = type_of(k, B.extend(refutation.tau).induced(keep + [B.size]), k)
    if next(_completions(spec, D0, tau0, refutation.C, a, forced=False), None) is not None:
        return None
    return AuditWitness(
        clause="no-extension",
        A=refutation.A,
        B=B.induced(keep),
        C=refutation.C,
        D=D0,
        A_prime=refutation.A,
        C_prime=refutation.C,
        sigma=type_of(k, D0, k),
        tau=tau0,
    )


def audit_sdap(
    spec: ClassSpec,
    s1: Optional[int] = None,
    s2: Optional[int] = None,
    callback: Optional[Callable[[RunStatus], None]] = None,
) -> AuditVerdict:
    """Substructure disjoint amalgamation for every ``|C| <= s1``.

    Certificates ``A'`` range over sizes up to ``min(s1, s2 - 2)`` so that ``B`` can always add a vertex
    beyond ``A'``. When no certificate survives, the audit fails only if some refutation still holds with
    ``A' \\ A`` removed from ``B`` in a free amalgamation class; otherwise a larger certificate might
    survive and the case is inconclusive.
    """
    s1 = config.sdap_bound1 if s1 is None else s1
    s2 = config.sdap_bound2 if s2 is None else s2
    if s1 < 2 or s2 < 3:
        raise PreconditionError("Bounds must allow |C| >= 2 and one vertex of B beyond A'")
    verdict = AuditVerdict(property="SDAP", spec_label=spec.label, bound1=s1, bound2=s2, outcome="holds")
    cap = min(s1, s2 - 2)
    with logfire.span("audit sdap {label}", label=spec.label, bound1=s1, bound2=s2):
        pre = _audit_amalgams("DAP", spec, s2, callback)
        if pre.outcome != "holds":
            return _escalate(verdict, pre)
        budget = _Budget(config.search_budget)
        undecided = 0
        try:
            for a in range(min(s1 - 1, cap + 1)):
                emit_status(callback, "sdap", f"|A| = {a}", progress=100 * a / max(s1 - 1, 1))
                for A in _members(spec, a):
                    for C in _grow(spec, A, a + 2, budget):
                        verdict.cases += 1
                        refutations: List[AuditWitness] = []
                        certified = False
                        for A_prime, C_prime in _certificates(spec, A, C, cap, budget):
                            verdict.certificates += 1
                            refutation = _refute_certificate(spec, A, C, A_prime, C_prime, s2, budget)
                            if refutation is None:
                                certified = True
                                break
                            refutations.append(refutation)
                        if certified:
                            continue
                        for refutation in refutations:
                            witness = _transfer(spec, refutation)
                            if witness is not None:
                                verdict.outcome = "fails"
                                verdict.witness = witness
                                return verdict
                        undecided += 1
                        logfire.debug("sdap refutation bounded by certificate size", A=A.digest(), C=C.digest())
            if undecided:
                verdict.outcome = "inconclusive"
        except BudgetExhausted:
            verdict.outcome = "inconclusive"
        finally:
            verdict.explored += budget.used
        logfire.info("sdap audit", label=spec.label, outcome=verdict.outcome, certificates=verdict.certificates)
    return verdict


def replay(verdict: AuditVerdict, spec: Optional[ClassSpec] = None) -> bool:
    """Re-run the violated clause on the witness; True iff the failure reproduces."""
    if verdict.outcome != "fails" or verdict.witness is None:
        return False
    spec = spec or parse_class(verdict.spec_label)
    w = verdict.witness
    a = w.A.size
    for S in (w.A, w.B, w.C):
        if not spec.contains(S):
            return False
    if w.clause in ("free-amalgam", "disjoint-amalgam"):
        if w.B.prefix(a) != w.A or w.C.prefix(a) != w.A:
            return False
        return _amalgam_fails(spec, w.A, w.B, w.C, free=w.clause == "free-amalgam")
    if w.D is None or w.sigma is None or w.tau is None or w.C.prefix(a) != w.A:
        return False
    if w.D != w.B.extend(w.sigma) or not spec.admits(w.B, w.B.size, w.sigma):
        return False
    if not spec.admits(w.B, w.B.size, w.tau):
        return False
    if w.clause == "forced-extension":
        if w.sigma.restrict(a) != type_of(a, w.C, a) or w.tau.restrict(a) != type_of(a, w.C, a + 1):
            return False
        return next(_completions(spec, w.D, w.tau, w.C, a, forced=True), None) is None
    if w.A_prime is None or w.C_prime is None:
        return False
    ap = w.A_prime.size
    if w.sigma.restrict(ap) != type_of(ap, w.C_prime, ap) or w.tau.restrict(ap) != type_of(ap, w.C_prime, ap + 1):
        return False
    return next(_completions(spec, w.D, w.tau, w.C, a, forced=False), None) is None
