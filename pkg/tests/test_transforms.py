"""
Unit tests for the graph transforms and the missingness reading.

Tests for:
- Collapsing to missingness graphs and selection diagrams
- Missingness classification with witness paths
- Ignorable selection factors
"""

import networkx as nx
import numpy as np
import pytest

from cmdesign.core.dsl import build_graph
from cmdesign.core.graph import NodeKind
from cmdesign.core.separation import CIQuery, d_separated, exact_ci
from cmdesign.core.transforms import (
    MissingnessClass,
    classify_missingness,
    collapse_missingness,
    collapse_selection_diagram,
    ignorable_selection_terms,
    missingness_witness,
)
from cmdesign.errors import NoDataNode, SNotInGraph
from cmdesign.stats.model import tabular_model


class TestCollapseMissingness:
    """Test cases for the missingness-graph collapse."""

    def test_retained_nodes(self, morgam):
        """
        Test that only selections recording a data node survive.

        Verifies the three node classes of the collapsed graph.
        """
        m = collapse_missingness(morgam)

        assert set(m.selection_nodes) == {"M1", "M2"}
        assert set(m.causal_nodes) == set(morgam.causal_nodes)
        assert set(m.data_nodes) == set(morgam.data_nodes)

    def test_added_edges_follow_directed_paths(self, morgam):
        """
        Test that X -> M is added exactly when X reaches M in the design.

        Verifies the collapse against a path search on the full graph.
        """
        m = collapse_missingness(morgam)
        dag = morgam.digraph

        for x in morgam.causal_nodes:
            for s in ("M1", "M2"):
                assert ((x, s) in m.edges) == nx.has_path(dag, x, s), (x, s)
        assert ("X", "M1") in m.edges
        assert ("Y", "M2") in m.edges
        assert ("Y", "M1") not in m.edges

    def test_kept_edges_between_kept_nodes(self, morgam):
        """
        Test that original edges between kept nodes remain.

        Verifies the measurement edges and the causal structure.
        """
        m = collapse_missingness(morgam)

        assert ("M1", "X*") in m.edges
        assert ("X", "X*") in m.edges
        assert ("Z", "Y") in m.edges
        assert m.population is None


class TestCollapseSelectionDiagram:
    """Test cases for the selection-diagram collapse."""

    def test_edges_into_s_dropped(self, fig1a):
        """
        Test that the diagram keeps causal nodes and drops edges into S.

        Verifies the transportability view.
        """
        d = collapse_selection_diagram(fig1a, ["X"])

        assert set(d.node_ids) == {"U", "X", "Y", "Z"}
        assert ("U", "X") not in d.edges
        assert ("U", "Y") in d.edges
        assert all(d.node(v).kind is NodeKind.CAUSAL for v in d.node_ids)

    def test_non_causal_s(self, fig1c):
        """
        Test that S must name causal nodes.

        Verifies SNotInGraph for selection and unknown ids.
        """
        with pytest.raises(SNotInGraph):
            collapse_selection_diagram(fig1c, ["m1"])
        with pytest.raises(SNotInGraph):
            collapse_selection_diagram(fig1c, ["W"])


class TestClassifyMissingness:
    """Test cases for per-variable missingness classes."""

    def test_random_sample_is_mcar(self, fig1b):
        """
        Test that a simple random sample gives everywhere-MCAR data.

        Verifies the class and the empty witness.
        """
        assert missingness_witness(fig1b, "Y") == (MissingnessClass.EVERYWHERE_MCAR, [])

    def test_participation_on_risk_factor_is_mnar(self, morgam):
        """
        Test that participation depending on X makes X MNAR.

        Verifies the direct witness X -> M1.
        """
        cls, path = missingness_witness(morgam, "X")

        assert cls is MissingnessClass.MNAR
        assert path == ["X", "M1"]

    def test_case_control_exposure_is_other(self, fig1c):
        """
        Test that case-control selection of X through Y is neither MCAR nor
        MNAR.

        Verifies the witness is an open path from X to m2.
        """
        cls, path = missingness_witness(fig1c, "X")

        assert cls is MissingnessClass.OTHER
        assert path[0] == "X" and path[-1] == "m2"
        assert not d_separated(fig1c, CIQuery(["X"], ["m2"]))

    def test_mnar_through_selection_chain(self):
        """
        Test that a path through selection nodes only makes a variable MNAR.

        Verifies selection-only interiors are accepted.
        """
        g = build_graph(
            "graph chain\npopulation p\n"
            "node X kind=causal info=observed\n"
            "node m1 kind=selection info=det-known\n"
            "node m2 kind=selection info=det-known\n"
            "measure X* : X by m2\n"
            "edge X -> m1\nedge m1 -> m2\n")

        assert missingness_witness(g, "X") == (MissingnessClass.MNAR, ["X", "m1", "m2"])

    def test_baseline_health_is_mnar(self, morgam):
        """
        Test that baseline health, which drives participation, is MNAR.

        Verifies the second cohort measurement.
        """
        assert classify_missingness(morgam, "Y0") is MissingnessClass.MNAR

    @pytest.mark.parametrize("name, var, independent", [
        ("fig1b", "Y", True),
        ("fig1b", "X", True),
        ("morgam", "X", False),
        ("morgam", "Y0", False),
    ])
    def test_class_holds_numerically(self, request, name, var, independent):
        """
        Test that everywhere-MCAR variables are independent of their response
        indicator and MNAR ones are not, under random tabular parameters.

        Verifies classify_missingness against exact_ci.
        """
        g = request.getfixturevalue(name)
        model = tabular_model(g)
        indicator = g.measurement(g.data_node_of(var))[1]
        expected = (MissingnessClass.EVERYWHERE_MCAR if independent
                    else MissingnessClass.MNAR)
        rng = np.random.default_rng(31)

        assert classify_missingness(g, var) is expected
        for _ in range(3):
            params = model.random_params(rng)
            assert exact_ci(model, params, CIQuery([var], [indicator]), tol=1e-12) \
                is independent

    def test_unmeasured_variable(self, fig1c):
        """
        Test that a variable without a data node cannot be classified.

        Verifies NoDataNode.
        """
        with pytest.raises(NoDataNode):
            classify_missingness(fig1c, "U")


class TestIgnorableSelection:
    """Test cases for ignorable selection factors."""

    def test_case_control(self, fig1c):
        """
        Test that the first-stage sample is ignorable and the case-control
        selection is not.

        Verifies the flags of the case-control design.
        """
        flags = ignorable_selection_terms(fig1c)

        assert flags == {"mOmega": True, "m1": True, "m2": False}

    def test_participation_not_ignorable(self, morgam):
        """
        Test that participation depending on unrecorded values is not
        ignorable.

        Verifies M0 and M1 in the case-cohort design.
        """
        flags = ignorable_selection_terms(morgam)

        assert not flags["M1"]
        assert not flags["M0"]
        assert flags["m1"]

    def test_random_sample(self, fig1b):
        """
        Test that a single random sample is ignorable.

        Verifies the trivial design.
        """
        assert ignorable_selection_terms(fig1b)["m1"]
