import json

import pytest

from codingtrees.catalogue import EnumeratedLimit, parse_class
from codingtrees.config import config
from codingtrees.diagonal import approx, check_subtree, construct_diagonal
from codingtrees.errors import BudgetExhausted, DepthError, PreconditionError, SpecParseError
from codingtrees.indivisibility import (
    ColoringSpec,
    SearchReport,
    find_mono_copy,
    homogenize,
    run_seeds,
    to_jsonl,
    verify_mono_copy,
)


@pytest.fixture(scope="module")
def rado_limit():
    limit = EnumeratedLimit(parse_class("rado"))
    limit.ensure(40)
    return limit


@pytest.fixture(scope="module")
def rado_tree():
    return construct_diagonal(EnumeratedLimit(parse_class("rado")), 5)


class TestColoringSpec:
    """Test vertex colourings"""

    def test_parity(self, rado_limit):
        assert ColoringSpec(source="parity").colours(rado_limit.K, 5) == [0, 1, 0, 1, 0]

    def test_random_is_seeded(self, rado_limit):
        spec = ColoringSpec(colors=3, seed=7)
        assert spec.colours(rado_limit.K, 20) == spec.colours(rado_limit.K, 20)
        assert set(spec.colours(rado_limit.K, 20)) <= {0, 1, 2}

    def test_interval_needs_an_order(self, rado_limit):
        with pytest.raises(PreconditionError):
            ColoringSpec(source="interval").colours(rado_limit.K, 5)

    def test_interval_follows_the_order(self):
        limit = EnumeratedLimit(parse_class("q"))
        K = limit.ensure(8)
        colours = ColoringSpec(source="interval", interval_width=4).colours(K)
        ranks = K.order_ranks()
        assert colours == [(r // 4) % 2 for r in ranks]

    def test_file_values_must_be_in_range(self):
        with pytest.raises(ValueError):
            ColoringSpec(source="file", colors=2, values=[0, 1, 2])
        with pytest.raises(ValueError):
            ColoringSpec(source="file")

    def test_from_file(self, tmp_path):
        path = tmp_path / "colours.json"
        path.write_text(json.dumps([0, 1, 1, 0]))
        spec = ColoringSpec.from_file(path)
        assert spec.colors == 2
        assert spec.values == [0, 1, 1, 0]

    def test_from_bad_file(self, tmp_path):
        path = tmp_path / "colours.json"
        path.write_text("{not json")
        with pytest.raises(SpecParseError):
            ColoringSpec.from_file(path)
        path.write_text(json.dumps({"values": [0]}))
        with pytest.raises(SpecParseError):
            ColoringSpec.from_file(path)

    def test_short_file(self, rado_limit):
        spec = ColoringSpec(source="file", colors=2, values=[0, 1])
        with pytest.raises(PreconditionError):
            spec.colours(rado_limit.K, 5)


class TestMonochromaticCopies:
    """Test the search for monochromatic copies of prefixes"""

    def test_one_colour_returns_the_prefix(self, rado_limit):
        report = find_mono_copy(rado_limit, 4, 10, ColoringSpec(colors=1))
        assert report.found
        assert report.witness == [0, 1, 2, 3]
        assert report.levels == 4
        assert report.strategy == "direct"

    def test_single_vertex(self, rado_limit):
        report = find_mono_copy(rado_limit, 1, 3, ColoringSpec(source="parity"))
        assert report.witness == [0]
        assert report.colour == 0

    def test_witnesses_verify(self, rado_limit):
        colourings = [ColoringSpec(source="parity")] + [ColoringSpec(seed=s) for s in range(4)]
        reports = [find_mono_copy(rado_limit, 2, 30, c) for c in colourings]
        assert any(r.found for r in reports)
        for colouring, report in zip(colourings, reports):
            if report.found:
                assert verify_mono_copy(rado_limit.K, report.witness, 2, colouring.colours(rado_limit.K, 30))

    def test_tree_is_homogenized_first(self):
        limit = EnumeratedLimit(parse_class("q"))
        tree = construct_diagonal(limit, 8)
        N = tree.structure.size
        report = find_mono_copy(limit, 2, N, ColoringSpec(colors=1), tree=tree)
        assert report.found
        assert report.strategy == "tree"
        assert report.witness == tree.coding_levels[:2]
        assert verify_mono_copy(limit.K, report.witness, 2, [0] * N)

    def test_short_tree_falls_back_to_the_prefix(self):
        limit = EnumeratedLimit(parse_class("q"))
        tree = construct_diagonal(limit, 3)
        m = len(tree.coding_levels) + 1
        report = find_mono_copy(limit, m, max(m, tree.structure.size), ColoringSpec(colors=1), tree=tree)
        assert report.strategy == "direct"
        assert report.witness == list(range(m))

    def test_verify_rejects(self, rado_limit):
        colours = [0, 1, 0, 1]
        assert not verify_mono_copy(rado_limit.K, [0, 1], 2, colours)
        assert not verify_mono_copy(rado_limit.K, [1, 0], 2, [0, 0, 0, 0])
        assert not verify_mono_copy(rado_limit.K, [0], 2, colours)

    def test_bounds(self, rado_limit):
        with pytest.raises(DepthError):
            find_mono_copy(rado_limit, 5, 3, ColoringSpec())
        with pytest.raises(DepthError):
            find_mono_copy(rado_limit, 0, 3, ColoringSpec())

    def test_budget_gives_a_negative_report(self, rado_limit, monkeypatch):
        monkeypatch.setattr(config, "search_budget", 2)
        report = find_mono_copy(rado_limit, 4, 20, ColoringSpec(source="parity"))
        assert not report.found
        assert report.nodes > 0


class TestRunSeeds:
    """Test the per-seed result stream"""

    def test_one_report_per_seed(self):
        reports = list(run_seeds(parse_class("rado"), 2, 20, range(3, 6)))
        assert [r.seed for r in reports] == [3, 4, 5]

    def test_seeds_share_one_tree(self, monkeypatch):
        monkeypatch.setattr(config, "indiv_tree_depth", 8)
        reports = list(run_seeds(parse_class("q"), 2, 80, [0, 1], colors=1))
        assert all(r.found and r.strategy == "tree" for r in reports)
        assert reports[0].witness == reports[1].witness

    def test_classes_without_a_tree_search_directly(self):
        reports = list(run_seeds(parse_class("triangle-free"), 2, 10, [0], colors=1))
        assert reports[0].strategy == "direct"

    def test_jsonl(self):
        reports = [SearchReport(seed=1, found=True, witness=[0, 2], colour=0), SearchReport(seed=2)]
        lines = to_jsonl(reports).splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["witness"] == [0, 2]
        assert SearchReport.model_validate_json(lines[1]) == reports[1]


@pytest.fixture(scope="module")
def q_tree():
    return construct_diagonal(EnumeratedLimit(parse_class("q")), 8)


def _split_case(T):
    """A splitting node above the first critical level, with its restriction right above the one before."""
    crit = T.critical_levels()
    n = next(i for i in range(1, len(crit)) if T.levels[crit[i]].kind == "split")
    X_star = [T.levels[crit[n]].critical]
    return n, [X_star[0].restrict(crit[n - 1] + 1)], X_star


class TestHomogenize:
    """Test colour capture on level sets of a diagonal tree"""

    def test_splitting_case_keeps_the_base(self, rado_tree):
        n, B, X_star = _split_case(rado_tree)
        crit = rado_tree.critical_levels()
        h = ColoringSpec(source="parity").level_sets(rado_tree)
        report = homogenize(rado_tree, B, X_star, h)
        assert report.case == "split"
        assert report.base == n
        assert report.colour == h(X_star)
        assert report.levels == [crit[n]]
        assert report.path == [crit[n]]
        assert set(approx(rado_tree, n).nodes) <= set(report.subtree.nodes)
        assert check_subtree(report.subtree, rado_tree) == []

    def test_coding_case_captures_coding_singletons(self, q_tree):
        c_0 = q_tree.coding_node(0)
        family = [[c] for c in q_tree.coding_nodes()]
        report = homogenize(q_tree, [c_0.restrict(0)], [c_0], lambda X_set: 0, depth=2, family=family)
        assert report.case == "coding"
        assert report.levels == q_tree.coding_levels[:2]
        assert report.backtracks == 0
        assert report.subtree.represented_vertices() == tuple(q_tree.coding_levels[:2])
        assert check_subtree(report.subtree, q_tree) == []

    def test_no_colour_with_enough_members(self, q_tree):
        c_0 = q_tree.coding_node(0)
        coding = q_tree.coding_nodes()
        family = [[c] for c in coding]
        h = lambda X_set: coding.index(X_set[0])  # noqa: E731
        with pytest.raises(BudgetExhausted):
            homogenize(q_tree, [c_0.restrict(0)], [c_0], h, depth=2, family=family)

    def test_depth_must_be_positive(self, rado_tree):
        _, B, X_star = _split_case(rado_tree)
        with pytest.raises(DepthError):
            homogenize(rado_tree, B, X_star, lambda X_set: 0, depth=0)

    def test_b_must_sit_above_a_critical_level(self, rado_tree):
        crit = rado_tree.critical_levels()
        n, _, X_star = _split_case(rado_tree)
        if crit[n] - crit[n - 1] < 3:
            pytest.skip("no plain level between the critical levels")
        with pytest.raises(PreconditionError):
            homogenize(rado_tree, [X_star[0].restrict(crit[n] - 1)], X_star, lambda X_set: 0, depth=1)

    def test_x_star_needs_a_critical_node(self, rado_tree):
        _, B, _ = _split_case(rado_tree)
        if rado_tree.levels[B[0].level].kind != "plain":
            pytest.skip("B already sits on a critical level")
        with pytest.raises(PreconditionError):
            homogenize(rado_tree, B, B, lambda X_set: 0)

    def test_budget(self, q_tree):
        c_0 = q_tree.coding_node(0)
        family = [[c] for c in q_tree.coding_nodes()]
        with pytest.raises(BudgetExhausted):
            homogenize(q_tree, [c_0.restrict(0)], [c_0], lambda X_set: 0, depth=3, family=family, budget=1)


class TestLevelSets:
    """Test level-set colourings up to the frontier"""

    def test_frontier_level_is_coloured(self, q_tree):
        frontier = q_tree.level(q_tree.top)
        assert ColoringSpec(source="parity").level_sets(q_tree)(frontier) == q_tree.top % 2
        assert ColoringSpec(source="interval").level_sets(q_tree)(frontier) in {0, 1}

    def test_every_level_is_coloured(self, rado_tree):
        h = ColoringSpec(seed=3).level_sets(rado_tree)
        assert all(h(rado_tree.level(L)) in {0, 1} for L in range(rado_tree.top + 1))
