"""
Graphical checks of the do-calculus: the three rules and the back-door and
front-door criteria, each reduced to surgery plus d-separation.
"""

from typing import Iterable

import networkx as nx

from cmdesign.calculus.expr import P, ProbExpr, Sum, canonicalize, simplify
from cmdesign.calculus.expr import Product as ExprProduct
from cmdesign.core.graph import (
    DesignGraph,
    surgery_remove_incoming,
    surgery_remove_outgoing,
)
from cmdesign.core.separation import CIQuery, d_separated
from cmdesign.errors import CmdesignError, OverlappingSets


def _disjoint(**sets: frozenset[str]) -> None:
    names = list(sets)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            shared = sets[a] & sets[b]
            if shared:
                raise OverlappingSets(
                    f"sets {a} and {b} share {', '.join(sorted(shared))}", shared)


def rule_applicable(
        rule: int,
        g: DesignGraph,
        x: Iterable[str],
        y: Iterable[str],
        z: Iterable[str],
        w: Iterable[str] = (),
) -> bool:
    """
    Tests whether a do-calculus rule licenses a rewrite of P(y | do(x), z, w).

    Rule 1 deletes the observation z, rule 2 exchanges the action do(z) for
    the observation z, rule 3 deletes the action do(z).

    Args:
        rule: 1, 2 or 3.
        g: Causal DAG (latents explicit).
        x, y, z, w: Disjoint node sets.

    Returns:
        bool: True iff the rule's independence holds in the mutilated graph.
    """
    x, y, z, w = (frozenset(s) for s in (x, y, z, w))
    g.check_known(x | y | z | w)
    _disjoint(x=x, y=y, z=z, w=w)
    if rule not in (1, 2, 3):
        raise CmdesignError(f"unknown do-calculus rule {rule}")
    if not z or not y:
        return True

    g_x = surgery_remove_incoming(g, x)
    if rule == 1:
        mutilated = g_x
    elif rule == 2:
        mutilated = surgery_remove_outgoing(g_x, z)
    else:
        z_w = z - g_x.ancestors(w) if w else z
        mutilated = surgery_remove_incoming(g_x, z_w)
    return d_separated(mutilated, CIQuery(y, z, x | w))


def backdoor_admissible(g: DesignGraph, x: Iterable[str], y: Iterable[str],
                        z: Iterable[str]) -> bool:
    """True iff ``z`` contains no descendant of ``x`` and blocks every back-door path."""
    x, y, z = frozenset(x), frozenset(y), frozenset(z)
    g.check_known(x | y | z)
    _disjoint(x=x, y=y, z=z)
    if z & g.descendants(x):
        return False
    return d_separated(surgery_remove_outgoing(g, x), CIQuery(x, y, z))


def frontdoor_admissible(g: DesignGraph, x: Iterable[str], y: Iterable[str],
                         z: Iterable[str]) -> bool:
    """
    Front-door criterion.

    ``z`` must intercept every directed path from ``x`` to ``y``, have no open
    back-door path from ``x``, and have its back-door paths to ``y`` blocked
    by ``x``.
    """
    x, y, z = frozenset(x), frozenset(y), frozenset(z)
    g.check_known(x | y | z)
    _disjoint(x=x, y=y, z=z)
    if not z:
        return False

    cut = g.digraph.copy()
    cut.remove_nodes_from(z)
    if any(nx.has_path(cut, a, b) for a in x for b in y):
        return False
    if not d_separated(surgery_remove_outgoing(g, x), CIQuery(x, z)):
        return False
    return d_separated(surgery_remove_outgoing(g, z), CIQuery(z, y, x))


def backdoor_expression(x: Iterable[str], y: Iterable[str], z: Iterable[str],
                        order: Iterable[str] = ()) -> ProbExpr:
    """The adjustment formula sum_z P(y|x,z) P(z)."""
    x, y, z = sorted(x), sorted(y), sorted(z)
    if not z:
        expr = P(y, x)
    else:
        expr = Sum(tuple(z), ExprProduct((P(y, x + z), P(z))))
    return canonicalize(simplify(expr), list(order) or sorted(x + y + z))


def frontdoor_expression(x: Iterable[str], y: Iterable[str], z: Iterable[str],
                         order: Iterable[str] = ()) -> ProbExpr:
    """The formula sum_z P(z|x) sum_x' P(y|x',z) P(x')."""
    x, y, z = sorted(x), sorted(y), sorted(z)
    inner = Sum(tuple(x), ExprProduct((P(y, x + z), P(x))))
    expr = Sum(tuple(z), ExprProduct((P(z, x), inner)))
    return canonicalize(simplify(expr), list(order) or sorted(x + y + z))
