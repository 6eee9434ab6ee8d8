"""
Identification of interventional distributions.

``identify`` is the complete recursive identification procedure on an
acyclic directed mixed graph: it either returns an expression over the
observed joint distribution or fails on a hedge, a pair of confounded
components that witnesses non-identifiability.
"""

import logging
from dataclasses import dataclass
from typing import Iterable

from cmdesign.calculus.expr import (
    CondProb,
    Fraction,
    ProbExpr,
    Product,
    Sum,
    Term,
    canonicalize,
    simplify,
)
from cmdesign.calculus.latent import LatentGraph, latent_project
from cmdesign.core.graph import DesignGraph
from cmdesign.errors import CmdesignError, NotIdentifiableError, OverlappingSets

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Identifiable:
    expression: ProbExpr

    identifiable = True

    def to_dict(self) -> dict:
        return {
            "identifiable": True,
            "expression": self.expression.to_text(),
            "tree": self.expression.to_json(),
        }


@dataclass(frozen=True)
class NotIdentifiable:
    """Failure witness: ``hedge`` is the C-forest, ``component`` the district inside it."""

    hedge: frozenset[str]
    component: frozenset[str]

    identifiable = False

    def to_dict(self) -> dict:
        return {
            "identifiable": False,
            "hedge": sorted(self.hedge),
            "component": sorted(self.component),
        }


IdentifyResult = Identifiable | NotIdentifiable


class _Hedge(Exception):
    def __init__(self, hedge: frozenset[str], component: frozenset[str]):
        super().__init__()
        self.hedge = hedge
        self.component = component


@dataclass(frozen=True)
class _Dist:
    """A distribution over ``variables`` as an expression in observed terms."""

    expr: ProbExpr
    variables: frozenset[str]

    def marginal(self, keep: Iterable[str]) -> "_Dist":
        keep = frozenset(keep)
        drop = tuple(sorted(self.variables - keep))
        if not drop:
            return self
        return _Dist(simplify(Sum(drop, self.expr)), keep)

    def conditional(self, v: str, given: Iterable[str]) -> ProbExpr:
        given = list(given)
        e = self.expr
        if isinstance(e, CondProb) and not e.do:
            outcome = {t.var for t in e.outcome}
            if {v, *given} <= outcome:
                return CondProb((Term(v),), tuple(Term(u) for u in given) + e.given)
        num = self.marginal([v, *given]).expr
        if not given:
            return num
        return simplify(Fraction(num, self.marginal(given).expr))


def _id(y: frozenset[str], x: frozenset[str], p: _Dist, g: LatentGraph) -> ProbExpr:
    v = g.nodes

    # no intervention left
    if not x:
        return p.marginal(y).expr

    # drop non-ancestors of the outcome
    an_y = g.ancestors(y)
    if v - an_y:
        return _id(y, x & an_y, p.marginal(an_y), g.subgraph(an_y))

    # intervene on nodes that cannot affect the outcome anyway
    w = (v - x) - g.remove_incoming(x).ancestors(y)
    if w:
        return _id(y, x | w, p, g)

    rest = g.subgraph(v - x)
    components = rest.districts()
    if len(components) > 1:
        factors = [_id(s, v - s, p, g) for s in components]
        return simplify(Sum(tuple(sorted(v - (y | x))), Product(tuple(factors))))

    s = components[0]
    districts = g.districts()
    if districts == [v]:
        raise _Hedge(v, s)

    order = g.topological_order()

    def factor(vi: str) -> ProbExpr:
        return p.conditional(vi, order[:order.index(vi)])

    if s in districts:
        factors = tuple(factor(vi) for vi in order if vi in s)
        return simplify(Sum(tuple(sorted(s - y)), Product(factors)))

    bigger = next(d for d in districts if s < d)
    factors = tuple(factor(vi) for vi in order if vi in bigger)
    return _id(y, x & bigger, _Dist(simplify(Product(factors)), bigger),
               g.subgraph(bigger))


def identify(g: LatentGraph, treat: Iterable[str], outcome: Iterable[str]) -> IdentifyResult:
    """
    Identifies P(outcome | do(treat)) from the observed joint of ``g``.

    Args:
        g: Latent projection of the causal model.
        treat: Treatment node ids.
        outcome: Outcome node ids.

    Returns:
        IdentifyResult: ``Identifiable`` with a canonical do-free expression,
        or ``NotIdentifiable`` carrying the hedge.
    """
    x, y = frozenset(treat), frozenset(outcome)
    g.check_known(x | y)
    if not x or not y:
        raise CmdesignError("treatment and outcome sets must be non-empty")
    if x & y:
        raise OverlappingSets(
            f"treatment and outcome share {', '.join(sorted(x & y))}", x & y)

    joint = _Dist(CondProb(tuple(Term(v) for v in sorted(g.nodes))), g.nodes)
    try:
        expr = _id(y, x, joint, g)
    except _Hedge as h:
        logger.info("P(%s|do(%s)) not identifiable, hedge %s",
                    ",".join(sorted(y)), ",".join(sorted(x)), sorted(h.hedge))
        return NotIdentifiable(h.hedge, h.component)
    return Identifiable(canonicalize(simplify(expr), g.topological_order()))


def identify_effect(g: DesignGraph, treat: Iterable[str],
                    outcome: Iterable[str]) -> ProbExpr:
    """Identifies an effect on a design graph's causal projection or raises."""
    result = identify(latent_project(g), treat, outcome)
    if not result.identifiable:
        raise NotIdentifiableError(sorted(result.component), sorted(result.hedge))
    return result.expression
