import json

import pytest

from codingtrees.brd import big_ramsey_degree, enumerate_shapes
from codingtrees.catalogue import EnumeratedLimit, parse_class
from codingtrees.config import config
from codingtrees.diagonal import construct_diagonal, label_qq
from codingtrees.export import brd_payload, dumps, shape_to_dot, structure_payload, to_dot, to_json, tree_payload
from codingtrees.structures import FinStructure
from codingtrees.typetree import build


@pytest.fixture(scope="module")
def q_tree():
    return build(EnumeratedLimit(parse_class("q")), 2)


@pytest.fixture(scope="module")
def q_diag():
    return construct_diagonal(EnumeratedLimit(parse_class("q")), 4)


@pytest.fixture
def pair():
    return FinStructure.build(parse_class("q").language(), 2, {"<": [(0, 1)]})


class TestDot:
    def test_one_rank_per_level(self, q_tree):
        """Test each level becomes a rank = same block"""
        text = to_dot(q_tree)
        assert text.startswith("digraph tree {")
        assert text.count("rank = same;") == len(q_tree.levels)
        assert text.endswith("}\n")

    def test_edges_join_consecutive_levels(self, q_tree):
        """Test one edge per non-root node"""
        text = to_dot(q_tree)
        assert text.count(" -> ") == q_tree.node_count() - 1
        assert '"0:0" -> "1:0";' in text

    def test_labels_show_the_newest_formulas(self, q_tree):
        """Test node labels print positive formulas of the last block"""
        text = to_dot(q_tree)
        assert 'label="v0<x"' in text
        assert 'label="x<v0"' in text

    def test_diagonal_tree_marks_splits(self, q_diag):
        """Test splitting nodes are diamonds and coding nodes are filled"""
        text = to_dot(q_diag)
        assert text.count("shape=diamond") == len(q_diag.splitting_nodes())
        assert text.count("style=filled") == len(q_diag.coding_levels)

    def test_labeled_tree_shows_psi(self):
        """Test labelled splits carry an xlabel"""
        T = construct_diagonal(EnumeratedLimit(parse_class("qq")), 2)
        text = to_dot(label_qq(T))
        assert text.count("xlabel=") == len(T.splitting_nodes())

    def test_shape(self, pair):
        """Test shapes render terminals as d_i"""
        shape = next(enumerate_shapes(pair, parse_class("q")))
        text = shape_to_dot(shape)
        assert 'label="d0"' in text
        assert 'label="d1"' in text
        assert "shape=diamond" in text


class TestJson:
    def test_tree_payload(self, q_tree):
        """Test coding tree payloads list levels and coding nodes"""
        payload = tree_payload(q_tree)
        assert payload["kind"] == "coding_tree"
        assert payload["schema_version"] == config.schema_version
        assert [len(level) for level in payload["levels"]] == [1, 2, 3]
        assert payload["coding"] == ["0:0", f"1:{q_tree.index(q_tree.coding[1])}"]

    def test_diagonal_payload(self, q_diag):
        """Test diagonal payloads record critical levels"""
        payload = tree_payload(q_diag)
        assert payload["kind"] == "diagonal_tree"
        assert len(payload["critical"]) == q_diag.depth
        assert payload["coding_levels"] == q_diag.coding_levels

    def test_stable_output(self, q_tree):
        """Test serialisation is byte-stable"""
        again = build(EnumeratedLimit(parse_class("q")), 2)
        assert to_json(q_tree) == to_json(again)
        assert to_json(q_tree).endswith("}\n")

    def test_dumps_sorts_keys(self):
        """Test keys are sorted"""
        assert dumps({"b": 1, "a": 2}) == '{\n  "a": 2,\n  "b": 1\n}\n'

    def test_structure_payload_loads_back(self, pair):
        """Test structure payloads validate back into the same structure"""
        payload = structure_payload(pair)
        payload.pop("schema_version")
        assert FinStructure.model_validate(json.loads(json.dumps(payload))) == pair

    def test_brd_payload(self, pair):
        """Test degree payloads carry the total and each copy"""
        payload = brd_payload(big_ramsey_degree(pair, parse_class("q")))
        assert payload["total"] == 2
        assert payload["copies"][0]["count"] == 2
