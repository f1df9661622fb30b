"""Toolkit for question-labeled dependency structures over documents.

A document's sentences form a dependency tree whose edges are free-form
questions: each sentence (except the first, the root) answers a question
raised by an earlier "anchor" sentence.  This package derives such trees
by orchestrating anchor-prediction and question-generation backends,
and measures them (tree statistics, constituency-tree comparison,
human-judgment aggregation, agreement coefficients).
"""

from qudparse.core import DepTree, Document, QudEntry, QudTree, Sentence

__version__ = "0.1.0"

__all__ = [
    "DepTree",
    "Document",
    "QudEntry",
    "QudTree",
    "Sentence",
    "__version__",
]
