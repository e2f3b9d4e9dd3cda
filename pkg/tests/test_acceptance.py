import random

import pytest

from codingtrees.brd import ordered_copies, shape_records
from codingtrees.catalogue import EnumeratedLimit, class_members, parse_class
from codingtrees.diagonal import age_covers, check_diagonal, construct_diagonal
from codingtrees.export import to_dot
from codingtrees.indivisibility import run_seeds
from codingtrees.main import main
from codingtrees.structures import ordered_iso
from codingtrees.typetree import build, codings_similar

pytestmark = pytest.mark.slow


def rank_sizes(text: str):
    """Nodes declared in each ``rank = same`` block of a DOT tree."""
    sizes = []
    for block in text.split("\t\trank = same;\n")[1:]:
        body = block.split("\t}")[0]
        sizes.append(sum(1 for line in body.splitlines() if line.startswith('\t\t"')))
    return sizes


class TestTreeShapes:
    """Test branching per level in the exported coding trees"""

    def test_cuts_of_the_rationals(self):
        tree = build(EnumeratedLimit(parse_class("q")), 6)
        assert rank_sizes(to_dot(tree)) == [1, 2, 3, 4, 5, 6, 7]

    def test_coloured_rationals(self):
        limit = EnumeratedLimit(parse_class("qn:2"))
        assert rank_sizes(to_dot(build(limit, 6, "U"))) == [1, 2, 3, 4, 5, 6, 7]
        assert rank_sizes(to_dot(build(limit, 6, "S"))) == [2, 4, 6, 8, 10, 12, 14]

    def test_bipartite_graphs(self):
        tree = build(EnumeratedLimit(parse_class("bipartite")), 6)
        K = tree.structure
        expected = []
        for n in range(7):
            first = sum(1 for v in range(n) if K.holds("U0", (v,)))
            expected.append(2 ** (n - first) + 2**first)
        assert rank_sizes(to_dot(tree)) == expected

    def test_three_uniform_hypergraphs(self):
        tree = build(EnumeratedLimit(parse_class("hypergraph:3")), 6)
        assert rank_sizes(to_dot(tree)) == [1, 1, 2, 8, 64, 1024, 32768]
        for n in range(6):
            assert len(tree.successors(tree.coding_node(n))) == 2**n


class TestOrderedSimilarity:
    """Test that similar codings are exactly the ordered-isomorphic vertex sets"""

    @pytest.mark.parametrize(
        "label, depth",
        [("q", 10), ("rado", 10), ("triangle-free", 10), ("qq", 10), ("hypergraph:3", 6)],
    )
    def test_random_pairs(self, label, depth):
        tree = build(EnumeratedLimit(parse_class(label)), depth)
        K = tree.structure
        rng = random.Random(label)
        for _ in range(1000):
            size = rng.randint(1, 5)
            a = sorted(rng.sample(range(depth), size))
            b = sorted(rng.sample(range(depth), size))
            assert ordered_iso(K.induced(a), K.induced(b)) == codings_similar(tree, a, b), (a, b)


class TestDiagonalTrees:
    """Test deep diagonal trees for every class with a construction"""

    @pytest.mark.parametrize(
        "label",
        [
            "rado",
            "digraph",
            "bipartite",
            "npartite:3",
            "hypergraph:3",
            "tetrahedron-free:3",
            "ordered:rado",
            "ordered:digraph",
        ],
    )
    def test_depth_twelve(self, label):
        spec = parse_class(label)
        T = construct_diagonal(EnumeratedLimit(spec), 12)
        assert check_diagonal(T) == []
        assert age_covers(T, spec, 3)


class TestIndivisibility:
    """Test monochromatic copies over many colourings"""

    def test_rado(self):
        reports = list(run_seeds(parse_class("rado"), 5, 200, range(100)))
        assert all(r.found for r in reports)

    def test_rationals_under_interval_colourings(self):
        reports = list(run_seeds(parse_class("q"), 6, 200, range(3), source="interval"))
        assert all(r.found for r in reports)


class TestEnumerators:
    """Test the two diagonal-tree enumerators on every small structure"""

    @pytest.mark.parametrize("label", ["q", "rado", "digraph", "triangle-free", "qq"])
    def test_agree_up_to_three_vertices(self, label):
        spec = parse_class(label)
        for n in range(1, 4):
            for A in class_members(spec, n):
                for _, B in ordered_copies(A):
                    assert shape_records(B, spec) == shape_records(B, spec, recursive=True)


class TestDeterminism:
    """Test CLI output is byte-identical across runs"""

    @pytest.mark.parametrize(
        "argv",
        [
            ["tree", "build", "--class", "q", "--depth", "6", "--format", "dot"],
            ["diag", "build", "--class", "rado", "--depth", "6"],
            ["prefix", "--class", "hypergraph:3", "--size", "8"],
            ["indiv", "--class", "rado", "--depth", "40", "--target", "3", "--seeds", "3"],
        ],
    )
    def test_three_runs(self, argv, capsys):
        outputs, codes = [], []
        for _ in range(3):
            codes.append(main(argv))
            outputs.append(capsys.readouterr().out)
        assert codes[0] == codes[1] == codes[2]
        assert outputs[0] == outputs[1] == outputs[2]
