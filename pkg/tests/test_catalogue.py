import pytest

from codingtrees.cache import OracleCache
from codingtrees.catalogue import (
    EnumeratedLimit,
    GeneratorState,
    admits_node,
    class_members,
    demand,
    parse_class,
    realizable,
    run,
    start,
    step,
)
from codingtrees.config import config
from codingtrees.errors import DepthError, PreconditionError, SpecParseError
from codingtrees.structures import FinStructure, iter_types, realizes, type_of


@pytest.fixture
def q():
    return parse_class("q")


@pytest.fixture
def rado():
    return parse_class("rado")


class TestParseClass:
    """Test the spec string parser"""

    @pytest.mark.parametrize(
        "label",
        [
            "q",
            "qn:3",
            "qq",
            "rado",
            "digraph",
            "bipartite",
            "npartite:3",
            "hypergraph:3",
            "triangle-free",
            "tetrahedron-free:3",
            "ordered:rado",
            "ordered:triangle-free",
        ],
    )
    def test_labels_round_trip(self, label):
        assert parse_class(label).label == label

    def test_unrestricted_relations(self):
        spec = parse_class("unrestricted:E/s,A")
        names = [(r.name, r.symmetric) for r in spec.language().relations]
        assert names == [("E", True), ("A", False)]

    @pytest.mark.parametrize("text", ["nonsense", "qn:x", "qn:1", "ordered:q", "hypergraph:1"])
    def test_rejected(self, text):
        with pytest.raises(SpecParseError):
            parse_class(text)

    def test_ordered_expansion_puts_order_first(self):
        lang = parse_class("ordered:rado").language()
        assert lang.names == ("<", "E")

    def test_sfap_flags(self):
        assert parse_class("rado").has_sfap
        assert parse_class("hypergraph:3").has_sfap
        assert not parse_class("triangle-free").has_sfap
        assert parse_class("tetrahedron-free:3").has_sfap
        assert parse_class("q").has_diagonal_recipe
        assert not parse_class("triangle-free").has_diagonal_recipe


class TestMembership:
    """Test one-point admission and full membership"""

    def test_linear_orders(self, q):
        assert len(class_members(q, 3)) == 1
        assert len(class_members(q, 3, iso=False)) == 6

    def test_graphs(self, rado):
        assert len(class_members(rado, 3)) == 4

    def test_triangle_free(self):
        spec = parse_class("triangle-free")
        assert len(class_members(spec, 3)) == 3
        triangle = FinStructure.build(spec.language(), 3, {"E": [(0, 1), (0, 2), (1, 2)]})
        assert not spec.contains(triangle)

    def test_hypergraphs(self):
        assert len(class_members(parse_class("hypergraph:3"), 3)) == 2

    def test_coloured_orders(self):
        assert len(class_members(parse_class("qn:2"), 1)) == 2

    def test_bipartite_forbids_edges_inside_a_part(self):
        spec = parse_class("bipartite")
        lang = spec.language()
        inside = FinStructure.build(lang, 2, {"U0": [(0,), (1,)], "E": [(0, 1)]})
        across = FinStructure.build(lang, 2, {"U0": [(0,)], "U1": [(1,)], "E": [(0, 1)]})
        assert not spec.contains(inside)
        assert spec.contains(across)

    def test_convex_classes(self):
        spec = parse_class("qq")
        lang = spec.language()
        # 0 < 1 < 2 with 0 E 2 but not 0 E 1: the class of 0 is not convex
        broken = FinStructure.build(lang, 3, {"<": [(0, 1), (0, 2), (1, 2)], "E": [(0, 2)]})
        convex = FinStructure.build(lang, 3, {"<": [(0, 1), (0, 2), (1, 2)], "E": [(0, 1)]})
        assert not spec.contains(broken)
        assert spec.contains(convex)

    def test_realizable_checks_the_level(self, q):
        K = FinStructure.empty(q.language())
        t = next(iter_types(q.language(), 1))
        with pytest.raises(PreconditionError):
            realizable(q, K, t)


class TestGenerator:
    """Test the deterministic generator of the enumerated limit"""

    def test_prefix_stays_in_the_class(self):
        spec = parse_class("triangle-free")
        g = run(spec, 12)
        assert g.built.size == 12
        assert spec.contains(g.built)

    def test_deterministic(self, rado):
        assert run(rado, 15, salt=3).built == run(rado, 15, salt=3).built

    def test_state_round_trips_through_json(self, rado):
        g = run(rado, 6)
        again = GeneratorState.model_validate_json(g.model_dump_json())
        assert step(again).built == step(g).built

    def test_horizon_records_realized_levels(self, rado):
        g = run(rado, 20)
        assert 0 in g.horizon
        K = g.built
        for m, N in g.horizon.items():
            for t in iter_types(rado.language(), m):
                assert any(realizes(K, v, t) for v in range(m, N))

    def test_round_robin_schedule(self, rado):
        """Test the alternative schedule is fair and stays in the class"""
        spec = parse_class("triangle-free")
        g = run(spec, 12, policy="round-robin")
        assert spec.contains(g.built)
        g = run(rado, 20, policy="round-robin")
        assert 0 in g.horizon
        for m, N in g.horizon.items():
            for t in iter_types(rado.language(), m):
                assert any(realizes(g.built, v, t) for v in range(m, N))

    def test_demand_is_served_next(self, rado):
        g = run(rado, 3)
        t = type_of(3, run(rado, 5).built, 4)
        g = step(demand(g, t))
        assert realizes(g.built, 3, t)

    def test_demand_above_the_prefix(self, rado):
        g = start(rado)
        t = next(iter_types(rado.language(), 2))
        with pytest.raises(PreconditionError):
            demand(g, t)


class TestEnumeratedLimit:
    """Test the memoised handle on a growing generator"""

    def test_successors_of_a_cut(self, q):
        limit = EnumeratedLimit(q)
        (root,) = limit.roots()
        assert len(limit.successors(root)) == 2

    def test_rado_successors(self, rado):
        limit = EnumeratedLimit(rado)
        level = limit.roots()
        for _ in range(3):
            level = [child for node in level for child in limit.successors(node)]
        assert len(level) == 8

    def test_cache_hits(self, rado):
        cache = OracleCache()
        limit = EnumeratedLimit(rado, cache=cache)
        limit.roots()
        limit.roots()
        assert cache.hits > 0

    def test_shared_cache_keeps_limits_apart(self, rado):
        cache = OracleCache()
        limits = [
            EnumeratedLimit(rado, cache=cache),
            EnumeratedLimit(parse_class("triangle-free"), cache=cache),
            EnumeratedLimit(rado, salt=1, cache=cache),
        ]
        for limit in limits:
            limit.ensure(4)
            for n in range(4):
                for t in iter_types(limit.lang, n):
                    assert limit.admits(t) == admits_node(limit.spec, limit.K, t, True)
        assert cache.hits > 0

    def test_demand_returns_the_new_vertex(self, rado):
        limit = EnumeratedLimit(rado)
        limit.ensure(2)
        t = list(iter_types(rado.language(), 2))[-1]
        v = limit.demand(t)
        assert v == 2
        assert realizes(limit.K, v, t)

    def test_colours(self):
        limit = EnumeratedLimit(parse_class("qn:2"))
        assert {limit.colour(v) for v in range(6)} <= {0, 1}
        assert EnumeratedLimit(parse_class("q")).colour(0) is None

    def test_vertex_cap(self, q, monkeypatch):
        monkeypatch.setattr(config, "max_vertices", 3)
        limit = EnumeratedLimit(q)
        with pytest.raises(DepthError):
            limit.ensure(5)
