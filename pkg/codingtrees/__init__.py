from .brd import BrdReport, DiagTreeShape, big_ramsey_degree, count_diag_trees, ordered_copies
from .catalogue import ClassSpec, EnumeratedLimit, parse_class
from .diagonal import DiagonalTree, check_diagonal, construct_diagonal
from .structures import FinStructure, Language, Relation, TypeNode
from .typetree import CodingTree, build

__all__ = [
    "BrdReport",
    "ClassSpec",
    "CodingTree",
    "DiagTreeShape",
    "DiagonalTree",
    "EnumeratedLimit",
    "FinStructure",
    "Language",
    "Relation",
    "TypeNode",
    "big_ramsey_degree",
    "build",
    "check_diagonal",
    "construct_diagonal",
    "count_diag_trees",
    "ordered_copies",
    "parse_class",
]
