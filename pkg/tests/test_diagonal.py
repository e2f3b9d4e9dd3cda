import pytest

from codingtrees.catalogue import EnumeratedLimit, parse_class
from codingtrees.diagonal import (
    age_covers,
    approx,
    check_diagonal,
    check_labels,
    check_perfect,
    check_subtree,
    construct_diagonal,
    ext_set,
    extend_to_copy,
    extension_level_set,
    extensions,
    label_qq,
    plus_similar,
    relative_type,
    represented_structure,
    select_nodes,
    sub_similar,
)
from codingtrees.errors import BudgetExhausted, DepthError, PreconditionError, ScopeError
from codingtrees.structures import type_of


@pytest.fixture(scope="module")
def q_tree():
    return construct_diagonal(EnumeratedLimit(parse_class("q")), 6)


@pytest.fixture(scope="module")
def rado_tree():
    return construct_diagonal(EnumeratedLimit(parse_class("rado")), 5)


@pytest.fixture(scope="module")
def qq_tree():
    return construct_diagonal(EnumeratedLimit(parse_class("qq")), 4)


class TestConstruction:
    """Test the stage-by-stage diagonal construction"""

    def test_reaches_the_requested_depth(self, q_tree, rado_tree):
        assert q_tree.depth >= 6
        assert len(q_tree.critical()) == q_tree.depth
        assert rado_tree.depth >= 5

    def test_invariants_hold(self, q_tree, rado_tree, qq_tree):
        assert check_diagonal(q_tree) == []
        assert check_diagonal(rado_tree) == []
        assert check_diagonal(qq_tree) == []

    def test_one_split_per_stage_for_linear_orders(self, q_tree):
        assert len(q_tree.splitting_nodes()) == len(q_tree.coding_levels)

    def test_levels_are_consecutive(self, rado_tree):
        assert [lvl.level for lvl in rado_tree.levels] == list(range(len(rado_tree.levels)))

    def test_coding_nodes_are_vertex_types(self, rado_tree):
        for n, r in enumerate(rado_tree.coding_levels):
            assert rado_tree.coding_node(n) == type_of(r, rado_tree.structure, r)

    def test_splitting_nodes_split_in_two(self, rado_tree):
        for s in rado_tree.splitting_nodes():
            assert len(rado_tree.successors(s)) == 2
            assert not rado_tree.is_coding(s)

    def test_rado_tree_is_perfect(self, rado_tree):
        assert check_perfect(rado_tree) == []

    @pytest.mark.slow
    def test_hypergraph_tree(self):
        T = construct_diagonal(EnumeratedLimit(parse_class("hypergraph:3")), 3)
        assert check_diagonal(T) == []
        assert check_perfect(T) == []

    def test_no_recipe(self):
        with pytest.raises(ScopeError):
            construct_diagonal(EnumeratedLimit(parse_class("triangle-free")), 3)

    def test_depth_must_be_positive(self):
        with pytest.raises(DepthError):
            construct_diagonal(EnumeratedLimit(parse_class("q")), 0)

    def test_progress_callback(self):
        seen = []
        construct_diagonal(EnumeratedLimit(parse_class("q")), 2, callback=seen.append)
        assert seen and seen[-1].progress == 100.0


class TestRepresented:
    """Test the structure coded by a diagonal tree"""

    def test_represented_structure(self, q_tree):
        K = represented_structure(q_tree)
        assert K.size == len(q_tree.coding_levels)
        assert parse_class("q").contains(K)

    def test_age_covers_small_orders(self, q_tree):
        assert age_covers(q_tree, parse_class("q"), 2)

    def test_relative_type_over_no_vertices(self, rado_tree):
        node = rado_tree.levels[-1].nodes[0]
        assert relative_type(node, []).level == 0


class TestApproximations:
    """Test r_k approximations and their extensions"""

    def test_empty_approximation(self, q_tree):
        assert len(approx(q_tree, 0)) == 0
        with pytest.raises(DepthError):
            approx(q_tree, q_tree.depth + 1)

    def test_approximations_grow(self, q_tree):
        sizes = [len(approx(q_tree, k)) for k in range(q_tree.depth + 1)]
        assert sizes == sorted(sizes)

    def test_plus_similarity_is_reflexive(self, rado_tree):
        A = approx(rado_tree, 3)
        assert plus_similar(A, A, rado_tree)

    def test_extensions_contain_the_next_approximation(self, q_tree):
        found = extensions(approx(q_tree, 1), q_tree, 2)
        assert any(e.nodes == approx(q_tree, 2).nodes for e in found)

    def test_extensions_reject_a_deeper_base(self, q_tree):
        with pytest.raises(PreconditionError):
            extensions(approx(q_tree, 3), q_tree, 2)

    def test_split_completes_the_approximation(self, q_tree):
        crit = q_tree.critical()
        k = next(i for i in range(1, len(crit)) if crit[i].kind == "split")
        A = approx(q_tree, len(crit))
        found = extension_level_set(q_tree, A, k, crit[k].critical)
        assert found == sorted(crit[k].nodes)

    def test_completion_needs_a_split(self, q_tree):
        crit = q_tree.critical()
        k = next(i for i in range(1, len(crit)) if crit[i].kind == "coding")
        A = approx(q_tree, len(crit))
        with pytest.raises(PreconditionError):
            extension_level_set(q_tree, A, k, crit[k].critical)


class TestExt:
    """Test the Ext sets used by homogenization"""

    def test_reflexive(self, rado_tree):
        B = rado_tree.level(0)
        assert sorted(B) in ext_set(rado_tree, B, B)

    def test_members_are_level_sets(self, rado_tree):
        B = rado_tree.level(0)
        for X_set in ext_set(rado_tree, B, B):
            assert len({t.level for t in X_set}) == 1
            assert all(x.extends(b) for x, b in zip(X_set, B))

    def test_configuration_members_complete_to_c(self, q_tree):
        crit = q_tree.critical_levels()
        i = next(j for j in range(1, len(crit) - 2) if q_tree.levels[crit[j]].kind == "split")
        A, C = approx(q_tree, i), approx(q_tree, i + 2)
        B, X_star = q_tree.level(crit[i - 1] + 1), q_tree.level(crit[i])
        members = ext_set(q_tree, B, X_star, A=A, C=C)
        assert sorted(X_star) in members
        for X_set in members:
            assert extend_to_copy(q_tree, select_nodes(q_tree, list(A.nodes) + X_set), C) is not None

    def test_configuration_needs_both_halves(self, q_tree):
        B = q_tree.level(0)
        with pytest.raises(PreconditionError):
            ext_set(q_tree, B, B, A=approx(q_tree, 0))

    def test_copy_grows_along_the_tree(self, q_tree):
        copy = extend_to_copy(q_tree, approx(q_tree, 2), approx(q_tree, 4))
        assert copy.nodes == approx(q_tree, 4).nodes

    def test_copy_past_the_built_tree_is_undecided(self, q_tree):
        crit = q_tree.critical_levels()
        short = q_tree.model_copy(update={"levels": q_tree.levels[: crit[-1]]})
        with pytest.raises(BudgetExhausted):
            extend_to_copy(short, approx(q_tree, len(crit) - 2), approx(q_tree, len(crit)), tree_c=q_tree)

    def test_x_star_must_extend_b(self, rado_tree):
        B = rado_tree.level(1)
        with pytest.raises(PreconditionError):
            ext_set(rado_tree, B[:1], B[1:])


class TestSubtrees:
    """Test induced subtrees of diagonal trees"""

    def test_sub_similar_is_diagonal(self, rado_tree):
        S = sub_similar(rado_tree, [0, 1])
        assert check_subtree(S, rado_tree) == []
        assert S.represented_vertices() == tuple(rado_tree.coding_levels[:2])

    def test_whole_tree_is_diagonal(self, q_tree):
        S = sub_similar(q_tree, range(len(q_tree.coding_levels)))
        assert check_subtree(S, q_tree) == []


class TestLabels:
    """Test splitting-node labels for convex equivalence relations"""

    def test_every_split_is_labelled(self, qq_tree):
        LT = label_qq(qq_tree)
        assert set(LT.labels) == {s.level for s in qq_tree.splitting_nodes()}
        assert set(LT.labels.values()) <= {0, 1}

    def test_labels_are_coherent(self, qq_tree):
        assert check_labels(label_qq(qq_tree)) == []

    def test_only_for_convex_classes(self, q_tree):
        with pytest.raises(ScopeError):
            label_qq(q_tree)
