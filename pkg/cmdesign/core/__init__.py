"""
Core design-graph layer: the graph model, its text format, d-separation
and the transforms into missingness graphs and selection diagrams.
"""

from cmdesign.core.dsl import build_graph, load_graph, serialize
from cmdesign.core.graph import (
    DesignGraph,
    InfoAttr,
    Node,
    NodeKind,
    ValidationReport,
    Violation,
    causal_projection,
    surgery_remove_incoming,
    surgery_remove_outgoing,
    validate,
)
from cmdesign.core.separation import CIQuery, d_separated, exact_ci
from cmdesign.core.transforms import (
    MissingnessClass,
    classify_missingness,
    collapse_missingness,
    collapse_selection_diagram,
    ignorable_selection_terms,
    missingness_witness,
)

__all__ = [
    "build_graph",
    "load_graph",
    "serialize",
    "DesignGraph",
    "InfoAttr",
    "Node",
    "NodeKind",
    "ValidationReport",
    "Violation",
    "causal_projection",
    "surgery_remove_incoming",
    "surgery_remove_outgoing",
    "validate",
    "CIQuery",
    "d_separated",
    "exact_ci",
    "MissingnessClass",
    "classify_missingness",
    "collapse_missingness",
    "collapse_selection_diagram",
    "ignorable_selection_terms",
    "missingness_witness",
]
