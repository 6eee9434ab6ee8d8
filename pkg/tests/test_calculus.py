"""
Unit tests for the causal calculus.

Tests for:
- Probability expressions (simplification, text, JSON, evaluation)
- Latent projection
- Do-calculus rules and adjustment criteria
- Effect identification, symbolic and against brute-force interventions
"""

import itertools

import networkx as nx
import numpy as np
import pytest

from cmdesign.calculus.expr import (
    P,
    Product,
    Sum,
    evaluate_expr,
    expr_from_json,
    simplify,
    to_text,
)
from cmdesign.calculus.identify import identify, identify_effect
from cmdesign.calculus.latent import LatentGraph, latent_project
from cmdesign.calculus.rules import (
    backdoor_admissible,
    backdoor_expression,
    frontdoor_admissible,
    frontdoor_expression,
    rule_applicable,
)
from cmdesign.core.dsl import build_graph
from cmdesign.core.graph import causal_projection
from cmdesign.errors import (
    CmdesignError,
    ExpressionError,
    NotIdentifiableError,
    OverlappingSets,
    UnboundVariable,
    UnknownNode,
    ZeroConditioningEvent,
)
from cmdesign.stats.model import tabular_model
from cmdesign.stats.simulate import causal_joint, interventional_distribution
from cmdesign.stats.tables import ProbTable

FRONT_DOOR = "sum_z P(z|X=x) * sum_x' P(y|X=x',Z=z) * P(X=x')"


class TestExpressions:
    """Test cases for expression construction, rewriting and rendering."""

    def test_repeated_variable_rejected(self):
        """
        Test that a term may not mention a variable twice.

        Verifies ExpressionError on construction.
        """
        with pytest.raises(ExpressionError):
            P("X", "X")

    def test_chain_rule_merge(self):
        """
        Test that P(a|c) P(b|a,c) simplifies to P(a,b|c).

        Verifies the chain-rule rewrite.
        """
        expr = simplify(Product((P("A", "C"), P("B", ["A", "C"]))))

        assert expr == P(["A", "B"], "C") or expr == P(["B", "A"], "C")

    def test_sum_of_lone_outcome_disappears(self):
        """
        Test that summing a variable out of its only factor removes it.

        Verifies the marginalization rewrite.
        """
        expr = simplify(Sum(("A",), Product((P("A", "B"), P("B")))))

        assert expr == P("B")

    def test_text_uses_primes_for_rebound_variables(self):
        """
        Test that a bound variable shadowing a free one gets a prime.

        Verifies the front-door rendering.
        """
        inner = Sum(("X",), Product((P("Y", ["X", "Z"]), P("X"))))
        expr = Sum(("Z",), Product((P("Z", "X"), inner)))

        assert to_text(expr) == FRONT_DOOR

    def test_fixed_values_rendered(self):
        """
        Test that fixed values print as assignments.

        Verifies Term values in text.
        """
        assert to_text(P({"Y": 1}, {"X": 0})) == "P(Y=1|X=0)"

    def test_json_round_trip(self):
        """
        Test that the JSON tree decodes to the same expression.

        Verifies to_json/expr_from_json.
        """
        expr = frontdoor_expression(["X"], ["Y"], ["Z"], ["X", "Z", "Y"])

        assert expr_from_json(expr.to_json()) == expr

    def test_malformed_json(self):
        """
        Test that unknown node types are rejected.

        Verifies ExpressionError on decoding.
        """
        with pytest.raises(ExpressionError):
            expr_from_json({"type": "integral"})

    def test_evaluate_conditional(self):
        """
        Test that a conditional is computed from the joint.

        Verifies evaluate_expr on a two-variable table.
        """
        joint = ProbTable(("X", "Y"), [(0, 1), (0, 1)], np.array([[0.1, 0.3], [0.2, 0.4]]))

        result = evaluate_expr(P("Y", "X"), joint)

        assert result.value({"X": 0, "Y": 1}) == pytest.approx(0.75)
        assert result.value({"X": 1, "Y": 0}) == pytest.approx(1 / 3)

    def test_evaluate_zero_event(self):
        """
        Test that conditioning on an impossible event is reported.

        Verifies ZeroConditioningEvent.
        """
        joint = ProbTable(("X", "Y"), [(0, 1), (0, 1)], np.array([[0.5, 0.5], [0.0, 0.0]]))

        with pytest.raises(ZeroConditioningEvent):
            evaluate_expr(P("Y", "X"), joint)

    def test_evaluate_unbound(self):
        """
        Test that variables outside the joint are reported.

        Verifies UnboundVariable.
        """
        joint = ProbTable(("X",), [(0, 1)], np.array([0.5, 0.5]))

        with pytest.raises(UnboundVariable):
            evaluate_expr(P("Y"), joint)


class TestLatentProjection:
    """Test cases for projecting out unobserved causes."""

    def test_confounder_becomes_bidirected(self, fig1a):
        """
        Test that U becomes an X <-> Y arc.

        Verifies the front-door projection.
        """
        lg = latent_project(fig1a)

        assert lg.nodes == {"X", "Y", "Z"}
        assert lg.directed == {("X", "Z"), ("Z", "Y")}
        assert lg.bidirected == {frozenset({"X", "Y"})}
        assert lg.districts() == [frozenset({"X", "Y"}), frozenset({"Z"})]

    def test_design_graph_projected_through_causal_part(self, fig1c):
        """
        Test that design graphs are reduced to their causal nodes first.

        Verifies the case-control design projects like the plain model.
        """
        assert latent_project(fig1c) == latent_project(causal_projection(fig1c))

    def test_fully_observed(self, morgam):
        """
        Test that a design with every variable recorded has no arcs.

        Verifies the case-cohort projection.
        """
        lg = latent_project(morgam)

        assert lg.bidirected == frozenset()
        assert ("Z", "Y0") in lg.directed

    def test_remove_incoming_drops_arcs(self, fig1a):
        """
        Test that cutting incoming edges removes confounding arcs too.

        Verifies remove_incoming.
        """
        lg = latent_project(fig1a).remove_incoming(["X"])

        assert lg.bidirected == frozenset()


class TestRules:
    """Test cases for the do-calculus rules and adjustment criteria."""

    def test_rule2_exchange_given_treatment(self, fig1a):
        """
        Test that do(Z) may be exchanged for Z given X in the front-door graph.

        Verifies rule 2 with w = {X}.
        """
        assert rule_applicable(2, fig1a, [], ["Y"], ["Z"], ["X"])

    def test_rule2_blocked_by_confounding(self, fig1a):
        """
        Test that do(X) is not the observation X for the outcome.

        Verifies rule 2 fails on the confounded pair.
        """
        assert not rule_applicable(2, fig1a, [], ["Y"], ["X"])
        assert rule_applicable(2, fig1a, [], ["Z"], ["X"])

    def test_rule3_removes_action_without_effect(self, fig1a):
        """
        Test that an action on X does not change the distribution of U.

        Verifies rule 3.
        """
        assert rule_applicable(3, fig1a, [], ["U"], ["X"])
        assert not rule_applicable(3, fig1a, [], ["Y"], ["X"])

    def test_rule1_observation_deletion(self, fig1a):
        """
        Test that under do(X) the observation U is irrelevant for Z.

        Verifies rule 1 after surgery.
        """
        assert rule_applicable(1, fig1a, ["X"], ["Z"], ["U"])
        assert not rule_applicable(1, fig1a, [], ["Z"], ["U"])

    def test_empty_sets_trivially_true(self, fig1a):
        """
        Test that an empty z or y licenses the rewrite.

        Verifies the vacuous case.
        """
        assert rule_applicable(1, fig1a, ["X"], ["Y"], [])

    def test_invalid_arguments(self, fig1a):
        """
        Test that overlapping sets and unknown rules are rejected.

        Verifies argument checking.
        """
        with pytest.raises(OverlappingSets):
            rule_applicable(1, fig1a, ["X"], ["X"], ["Z"])
        with pytest.raises(CmdesignError):
            rule_applicable(4, fig1a, ["X"], ["Y"], ["Z"])
        with pytest.raises(UnknownNode):
            rule_applicable(1, fig1a, ["X"], ["Y"], ["W"])

    def test_backdoor(self, morgam):
        """
        Test that genes and baseline health block every back-door path.

        Verifies the case-cohort adjustment set and a too small one.
        """
        g = causal_projection(morgam)

        assert backdoor_admissible(g, ["X"], ["Y"], ["Z", "Y0"])
        assert not backdoor_admissible(g, ["X"], ["Y"], ["Z"])
        assert not backdoor_admissible(g, ["Z"], ["Y"], ["X"])

    def test_frontdoor(self, fig1a):
        """
        Test that Z satisfies the front-door criterion and Y does not.

        Verifies frontdoor_admissible.
        """
        assert frontdoor_admissible(fig1a, ["X"], ["Y"], ["Z"])
        assert not frontdoor_admissible(fig1a, ["X"], ["Y"], [])
        assert not frontdoor_admissible(fig1a, ["X"], ["Z"], ["U"])

    def test_expressions(self):
        """
        Test that the adjustment formulas render canonically.

        Verifies backdoor_expression and frontdoor_expression.
        """
        order = ["Z", "Y0", "X", "Y"]

        assert to_text(backdoor_expression(["X"], ["Y"], ["Z", "Y0"], order)) == \
            "sum_{z,y0} P(y|Z=z,Y0=y0,X=x) * P(z,y0)"
        assert to_text(frontdoor_expression(["X"], ["Y"], ["Z"], ["X", "Z", "Y"])) == FRONT_DOOR


class TestIdentify:
    """Test cases for effect identification."""

    def test_front_door(self, fig1a):
        """
        Test that the confounded effect is identified through the mediator.

        Verifies the canonical front-door estimand.
        """
        result = identify(latent_project(fig1a), ["X"], ["Y"])

        assert result.identifiable
        assert result.expression.to_text() == FRONT_DOOR

    def test_genes_effect_is_observational(self, morgam):
        """
        Test that the effect of genes equals the observed conditional.

        Verifies identification without adjustment.
        """
        result = identify(latent_project(morgam), ["Z"], ["Y"])

        assert result.expression.to_text() == "P(y|Z=z)"

    def test_risk_factor_adjustment(self, morgam):
        """
        Test that the risk-factor effect adjusts for genes and baseline health.

        Verifies the back-door estimand.
        """
        result = identify(latent_project(morgam), ["X"], ["Y"])

        assert result.expression.to_text() == "sum_{z,y0} P(y|Z=z,Y0=y0,X=x) * P(z,y0)"

    @pytest.mark.parametrize("name, treat, outcome", [
        ("fig1a", "X", "Y"),
        ("morgam", "X", "Y"),
    ])
    def test_invariant_under_relabeling(self, request, name, treat, outcome):
        """
        Test that renaming the nodes, so their sorted order is reversed, gives
        an estimand with the same value.

        Verifies identification does not depend on node names.
        """
        g = causal_projection(request.getfixturevalue(name))
        ordered = sorted(g.causal_nodes, reverse=True)
        rename = {v: f"V{i}" for i, v in enumerate(ordered)}
        text = "graph renamed\npopulation p\n" + "".join(
            f"node {rename[v]} kind=causal "
            f"info={'unobserved' if g.is_latent(v) else 'observed'}\n"
            for v in g.causal_nodes) + "".join(
            f"edge {rename[a]} -> {rename[b]}\n" for a, b in g.edges
            if a in rename and b in rename)
        renamed = build_graph(text)
        model = tabular_model(g)
        rng = np.random.default_rng(8)

        original = identify_effect(g, [treat], [outcome])
        relabeled = identify_effect(renamed, [rename[treat]], [rename[outcome]])
        for _ in range(5):
            joint = causal_joint(model, model.random_params(rng))
            moved = ProbTable([rename[v] for v in joint.variables], joint.domains, joint.values)
            a = evaluate_expr(original, joint)
            b = evaluate_expr(relabeled, moved)
            for x in (0, 1):
                for y in (0, 1):
                    assert a.value({treat: x, outcome: y}) == pytest.approx(
                        b.value({rename[treat]: x, rename[outcome]: y}), abs=1e-12)

    def test_bow_not_identifiable(self):
        """
        Test that a confounded direct edge yields a hedge.

        Verifies the failure witness.
        """
        bow = LatentGraph.from_edges(["X", "Y"], [("X", "Y")], [("X", "Y")])

        result = identify(bow, ["X"], ["Y"])

        assert not result.identifiable
        assert result.hedge == {"X", "Y"}
        assert result.to_dict()["identifiable"] is False

    def test_identify_effect_raises(self):
        """
        Test that identify_effect raises when there is no estimand.

        Verifies NotIdentifiableError and its exit code.
        """
        g = build_graph("graph bow\npopulation p\n"
                        "node U kind=causal info=unobserved\n"
                        "node X kind=causal info=observed\n"
                        "node Y kind=causal info=observed\n"
                        "edge U -> X\nedge U -> Y\nedge X -> Y\n")

        with pytest.raises(NotIdentifiableError) as e:
            identify_effect(g, ["X"], ["Y"])
        assert e.value.exit_code == 2

    def test_input_checks(self, fig1a):
        """
        Test that empty, overlapping and unknown sets are rejected.

        Verifies argument validation.
        """
        lg = latent_project(fig1a)
        with pytest.raises(CmdesignError):
            identify(lg, [], ["Y"])
        with pytest.raises(OverlappingSets):
            identify(lg, ["X"], ["X"])
        with pytest.raises(UnknownNode):
            identify(lg, ["U"], ["Y"])

    @pytest.mark.parametrize("name, treat, outcome", [
        ("fig1a", "X", "Y"),
        ("morgam", "X", "Y"),
        ("morgam", "Z", "Y"),
        ("trial", "T", "Y"),
    ])
    def test_estimand_matches_intervention(self, request, name, treat, outcome):
        """
        Test that the estimand evaluated on the observational joint equals the
        truncated-factorization interventional distribution.

        Verifies soundness on random parameter draws.
        """
        g = request.getfixturevalue(name)
        expr = identify_effect(g, [treat], [outcome])
        model = tabular_model(causal_projection(g))
        rng = np.random.default_rng(2024)

        for _ in range(25):
            params = model.random_params(rng)
            estimate = evaluate_expr(expr, causal_joint(model, params))
            for x in (0, 1):
                truth = interventional_distribution(model, params, {treat: x}).marginal([outcome])
                for y in (0, 1):
                    assert estimate.value({treat: x, outcome: y}) == \
                        pytest.approx(truth.value({outcome: y}), abs=1e-9)


def _nx_separated(dag, y, z, given):
    check = getattr(nx, "is_d_separator", None) or nx.d_separated
    return check(dag, set(y), set(z), set(given))


def _manual_rule(rule, dag, x, y, z, w):
    """The rule's mutilated graph built by hand, then a networkx d-separation."""
    if not z or not y:
        return True
    g = dag.copy()
    g.remove_edges_from([e for e in dag.edges if e[1] in x])
    if rule == 2:
        g.remove_edges_from([e for e in list(g.edges) if e[0] in z])
    elif rule == 3:
        an_w = set().union(*(nx.ancestors(g, v) | {v} for v in w)) if w else set()
        g.remove_edges_from([e for e in list(g.edges) if e[1] in set(z) - an_w])
    return _nx_separated(g, y, z, set(x) | set(w))


def _upper_triangular_dags(k):
    """Every DAG on k nodes up to relabeling: each edge subset respecting A < B < ..."""
    names = "ABCDE"[:k]
    pairs = [(a, b) for i, a in enumerate(names) for b in names[i + 1:]]
    for mask in range(2 ** len(pairs)):
        yield names, [p for bit, p in enumerate(pairs) if mask >> bit & 1]


def _role_assignments(k, rng):
    """All ways to split k nodes into X, Y, Z, W or unused for k <= 3; a seeded sample above."""
    if k <= 3:
        return list(itertools.product(range(5), repeat=k))
    draws = 20 if k == 4 else 4
    return [tuple(rng.integers(0, 5, size=k)) for _ in range(draws)]


class TestRuleProperties:
    """Test cases comparing the rules with hand-built surgery on every small DAG."""

    @pytest.mark.parametrize("k", [2, 3, 4, 5])
    def test_all_dags(self, k):
        """
        Test that all three rules agree with manual surgery plus networkx
        d-separation on every DAG of k nodes.

        Verifies rule_applicable over disjoint sets: every split for up to
        three nodes, a seeded sample per graph for four and five.
        """
        rng = np.random.default_rng(99 + k)

        for names, edges in _upper_triangular_dags(k):
            text = "graph r\npopulation p\n" + "".join(
                f"node {v} kind=causal info=observed\n" for v in names) + "".join(
                f"edge {a} -> {b}\n" for a, b in edges)
            g = build_graph(text)
            dag = nx.DiGraph(edges)
            dag.add_nodes_from(names)

            for roles in _role_assignments(k, rng):
                x, y, z, w = ([v for v, r in zip(names, roles) if r == i] for i in range(4))
                for rule in (1, 2, 3):
                    assert rule_applicable(rule, g, x, y, z, w) == \
                        _manual_rule(rule, dag, x, y, z, w), (rule, edges, x, y, z, w)
