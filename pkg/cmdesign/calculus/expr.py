"""
Symbolic probability expressions.

Expressions are immutable trees of conditional probabilities, sums over
variable domains, products, fractions and constants. A variable inside a
``CondProb`` is either fixed to a constant value or symbolic; a symbolic
variable refers to the innermost enclosing ``Sum`` that binds it, or is free.
A ``Sum`` may re-bind a variable that is free outside it (the inner ``x'`` of
the front-door formula); the text form marks such re-bindings with primes.

Text form, as produced by ``to_text``::

    expr    := product
    product := factor (" * " factor)*
    factor  := "P(" terms ["|" terms] ")" | "sum_" bound " " product
             | "(" expr ") / (" expr ")" | number | "(" expr ")"
    bound   := symbol | "{" symbol ("," symbol)* "}"

A sum extends to the end of the product it starts in.
"""

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from cmdesign.errors import ExpressionError, UnboundVariable, ZeroConditioningEvent
from cmdesign.stats.tables import ProbTable, product


@dataclass(frozen=True)
class Term:
    """A variable inside a probability; ``value`` None means symbolic."""

    var: str
    value: object = None

    @property
    def symbolic(self) -> bool:
        return self.value is None


class ProbExpr:
    """Base class of expression nodes."""

    def free_variables(self) -> frozenset[str]:
        raise NotImplementedError

    def variables(self) -> frozenset[str]:
        """Every variable mentioned anywhere in the tree."""
        raise NotImplementedError

    def to_text(self) -> str:
        return to_text(self)

    def to_json(self) -> dict:
        return to_json(self)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class CondProb(ProbExpr):
    outcome: tuple[Term, ...]
    given: tuple[Term, ...] = ()
    do: tuple[Term, ...] = ()

    def __post_init__(self) -> None:
        names = [t.var for t in self.outcome + self.given + self.do]
        if len(set(names)) != len(names):
            raise ExpressionError(f"variable repeated in probability term: {names}")
        if not self.outcome:
            raise ExpressionError("probability term needs an outcome")

    def free_variables(self) -> frozenset[str]:
        return frozenset(t.var for t in self.outcome + self.given + self.do
                         if t.symbolic)

    def variables(self) -> frozenset[str]:
        return frozenset(t.var for t in self.outcome + self.given + self.do)


@dataclass(frozen=True)
class Sum(ProbExpr):
    bound: tuple[str, ...]
    body: ProbExpr

    def free_variables(self) -> frozenset[str]:
        return self.body.free_variables() - set(self.bound)

    def variables(self) -> frozenset[str]:
        return self.body.variables() | set(self.bound)


@dataclass(frozen=True)
class Product(ProbExpr):
    factors: tuple[ProbExpr, ...]

    def free_variables(self) -> frozenset[str]:
        return frozenset().union(*(f.free_variables() for f in self.factors))

    def variables(self) -> frozenset[str]:
        return frozenset().union(*(f.variables() for f in self.factors))


@dataclass(frozen=True)
class Fraction(ProbExpr):
    numerator: ProbExpr
    denominator: ProbExpr

    def free_variables(self) -> frozenset[str]:
        return self.numerator.free_variables() | self.denominator.free_variables()

    def variables(self) -> frozenset[str]:
        return self.numerator.variables() | self.denominator.variables()


@dataclass(frozen=True)
class Const(ProbExpr):
    value: float

    def free_variables(self) -> frozenset[str]:
        return frozenset()

    def variables(self) -> frozenset[str]:
        return frozenset()


ONE = Const(1.0)


def _terms(spec) -> tuple[Term, ...]:
    if spec is None:
        return ()
    if isinstance(spec, str):
        return (Term(spec),)
    if isinstance(spec, Mapping):
        return tuple(Term(k, v) for k, v in spec.items())
    return tuple(s if isinstance(s, Term) else Term(s) for s in spec)


def P(outcome, given=None, do=None) -> CondProb:
    """
    Shorthand constructor.

    Each argument is a variable name, an iterable of names (symbolic) or a
    mapping from names to fixed values.
    """
    return CondProb(_terms(outcome), _terms(given), _terms(do))


# Simplification


def simplify(expr: ProbExpr) -> ProbExpr:
    """
    Applies value-preserving rewrites until none applies.

    Rewrites: product flattening and constant folding, chain-rule merging
    P(A|C) * P(B|A,C) -> P(A,B|C), summing a variable that is a symbolic
    outcome of exactly one factor and appears nowhere else, and
    P(A,B|C) / P(B|C) -> P(A|B,C).
    """
    if isinstance(expr, Product):
        return _simplify_product([simplify(f) for f in expr.factors])
    if isinstance(expr, Sum):
        return _simplify_sum(expr.bound, simplify(expr.body))
    if isinstance(expr, Fraction):
        return _simplify_fraction(simplify(expr.numerator), simplify(expr.denominator))
    return expr


def _simplify_product(factors: list[ProbExpr]) -> ProbExpr:
    flat: list[ProbExpr] = []
    scale = 1.0
    for f in factors:
        parts = f.factors if isinstance(f, Product) else (f,)
        for part in parts:
            if isinstance(part, Const):
                scale *= part.value
            else:
                flat.append(part)
    if scale == 0.0:
        return Const(0.0)

    merged = True
    while merged:
        merged = False
        for i, first in enumerate(flat):
            for j, second in enumerate(flat):
                joined = _chain(first, second) if i != j else None
                if joined is not None:
                    flat = [f for k, f in enumerate(flat) if k not in (i, j)]
                    flat.insert(min(i, j), joined)
                    merged = True
                    break
            if merged:
                break

    if scale != 1.0:
        flat.insert(0, Const(scale))
    if not flat:
        return Const(scale)
    if len(flat) == 1:
        return flat[0]
    return Product(tuple(flat))


def _chain(first: ProbExpr, second: ProbExpr) -> CondProb | None:
    if not (isinstance(first, CondProb) and isinstance(second, CondProb)):
        return None
    if first.do or second.do:
        return None
    if set(second.given) == set(first.given) | set(first.outcome):
        return CondProb(first.outcome + second.outcome, first.given)
    return None


def _simplify_sum(bound: Sequence[str], body: ProbExpr) -> ProbExpr:
    remaining = list(dict.fromkeys(bound))
    changed = True
    while changed and remaining:
        changed = False
        for v in list(remaining):
            reduced = _sum_out(v, body)
            if reduced is not None:
                body = reduced
                remaining.remove(v)
                changed = True
    if not remaining:
        return body
    if isinstance(body, Sum) and not set(remaining) & set(body.bound):
        return Sum(tuple(remaining) + body.bound, body.body)
    return Sum(tuple(remaining), body)


def _sum_out(v: str, body: ProbExpr) -> ProbExpr | None:
    factors = list(body.factors) if isinstance(body, Product) else [body]
    mentioning = [i for i, f in enumerate(factors) if v in f.free_variables()]
    if len(mentioning) != 1:
        return None
    i = mentioning[0]
    target = factors[i]
    if not isinstance(target, CondProb) or target.do:
        return None
    if Term(v) not in target.outcome:
        return None
    outcome = tuple(t for t in target.outcome if t.var != v)
    if outcome:
        factors[i] = CondProb(outcome, target.given)
    else:
        factors.pop(i)
    return _simplify_product(factors)


def _simplify_fraction(num: ProbExpr, den: ProbExpr) -> ProbExpr:
    if num == den:
        return ONE
    if isinstance(den, Const) and den.value == 1.0:
        return num
    if (isinstance(num, CondProb) and isinstance(den, CondProb)
            and not num.do and not den.do
            and set(num.given) == set(den.given)
            and set(den.outcome) < set(num.outcome)):
        outcome = tuple(t for t in num.outcome if t not in den.outcome)
        return CondProb(outcome, num.given + den.outcome)
    return Fraction(num, den)


# Canonical form


def canonicalize(expr: ProbExpr, order: Sequence[str]) -> ProbExpr:
    """
    Orders terms, bound variables and factors deterministically.

    Terms and bound variables follow ``order`` (topological, then by name);
    plain factors of a product are sorted by outcome variable, latest first,
    and nested sums are placed after them.
    """
    rank = {v: i for i, v in enumerate(order)}

    def key(v: str):
        return (rank.get(v, len(rank)), v)

    def sort_terms(terms):
        return tuple(sorted(terms, key=lambda t: key(t.var)))

    def outcome_rank(f: ProbExpr) -> int:
        if isinstance(f, CondProb):
            return max(key(t.var)[0] for t in f.outcome)
        if isinstance(f, Fraction):
            return outcome_rank(f.numerator)
        return -1

    def walk(e: ProbExpr) -> ProbExpr:
        if isinstance(e, CondProb):
            return CondProb(sort_terms(e.outcome), sort_terms(e.given), sort_terms(e.do))
        if isinstance(e, Sum):
            return Sum(tuple(sorted(e.bound, key=key)), walk(e.body))
        if isinstance(e, Fraction):
            return Fraction(walk(e.numerator), walk(e.denominator))
        if isinstance(e, Product):
            parts = [walk(f) for f in e.factors]
            consts = [f for f in parts if isinstance(f, Const)]
            sums = [f for f in parts if isinstance(f, Sum)]
            plain = [f for f in parts if not isinstance(f, (Const, Sum))]
            plain.sort(key=lambda f: (-outcome_rank(f), to_text(f)))
            sums.sort(key=to_text)
            return Product(tuple(consts + plain + sums))
        return e

    return walk(expr)


# Text and JSON


def _base_symbols(expr: ProbExpr) -> dict[str, str]:
    names = sorted(expr.variables())
    lowered = [n.lower() for n in names]
    return {n: (n.lower() if lowered.count(n.lower()) == 1 else n) for n in names}


def to_text(expr: ProbExpr) -> str:
    base = _base_symbols(expr)
    scope = {v: base[v] for v in expr.free_variables()}
    return _render(expr, scope, base)


def _render_term(t: Term, scope: dict[str, str], base: dict[str, str],
                 outcome: bool) -> str:
    if not t.symbolic:
        return f"{t.var}={t.value}"
    sym = scope.get(t.var, base[t.var])
    if outcome and sym == base[t.var]:
        return sym
    return f"{t.var}={sym}"


def _render(e: ProbExpr, scope: dict[str, str], base: dict[str, str]) -> str:
    if isinstance(e, Const):
        return f"{e.value:g}"
    if isinstance(e, CondProb):
        out = ",".join(_render_term(t, scope, base, True) for t in e.outcome)
        cond = [_render_term(t, scope, base, False) for t in e.given]
        if e.do:
            cond.append("do(" + ",".join(_render_term(t, scope, base, False)
                                         for t in e.do) + ")")
        return f"P({out}|{','.join(cond)})" if cond else f"P({out})"
    if isinstance(e, Sum):
        inner = dict(scope)
        symbols = []
        for v in e.bound:
            sym = scope[v] + "'" if v in scope else base[v]
            inner[v] = sym
            symbols.append(sym)
        head = symbols[0] if len(symbols) == 1 else "{" + ",".join(symbols) + "}"
        return f"sum_{head} {_render(e.body, inner, base)}"
    if isinstance(e, Product):
        parts = []
        for i, f in enumerate(e.factors):
            text = _render(f, scope, base)
            if isinstance(f, Sum) and i < len(e.factors) - 1:
                text = f"({text})"
            parts.append(text)
        return " * ".join(parts)
    if isinstance(e, Fraction):
        return (f"({_render(e.numerator, scope, base)}) / "
                f"({_render(e.denominator, scope, base)})")
    raise ExpressionError(f"unknown expression node {type(e).__name__}")


def _term_json(t: Term) -> dict:
    return {"var": t.var, "value": t.value}


def to_json(expr: ProbExpr) -> dict:
    if isinstance(expr, Const):
        return {"type": "const", "value": expr.value}
    if isinstance(expr, CondProb):
        return {
            "type": "prob",
            "outcome": [_term_json(t) for t in expr.outcome],
            "given": [_term_json(t) for t in expr.given],
            "do": [_term_json(t) for t in expr.do],
        }
    if isinstance(expr, Sum):
        return {"type": "sum", "bound": list(expr.bound), "body": to_json(expr.body)}
    if isinstance(expr, Product):
        return {"type": "product", "factors": [to_json(f) for f in expr.factors]}
    if isinstance(expr, Fraction):
        return {"type": "fraction", "numerator": to_json(expr.numerator),
                "denominator": to_json(expr.denominator)}
    raise ExpressionError(f"unknown expression node {type(expr).__name__}")


def expr_from_json(data: Mapping) -> ProbExpr:
    """Inverse of ``to_json``."""
    try:
        kind = data["type"]
        if kind == "const":
            return Const(float(data["value"]))
        if kind == "prob":
            def terms(key):
                return tuple(Term(t["var"], t.get("value")) for t in data.get(key, []))
            return CondProb(terms("outcome"), terms("given"), terms("do"))
        if kind == "sum":
            return Sum(tuple(data["bound"]), expr_from_json(data["body"]))
        if kind == "product":
            return Product(tuple(expr_from_json(f) for f in data["factors"]))
        if kind == "fraction":
            return Fraction(expr_from_json(data["numerator"]),
                            expr_from_json(data["denominator"]))
    except (KeyError, TypeError) as e:
        raise ExpressionError(f"malformed expression JSON: {e}") from None
    raise ExpressionError(f"unknown expression type {kind!r}")


# Numeric evaluation


def evaluate_expr(expr: ProbExpr, joint: ProbTable) -> ProbTable:
    """
    Evaluates an expression against a joint distribution.

    Args:
        expr: Expression without do-terms.
        joint: Probability table over (at least) every variable in ``expr``.

    Returns:
        ProbTable: Values indexed by the free variables, in the joint's
        variable order.

    Raises:
        ZeroConditioningEvent: A conditioning event has probability zero.
        UnboundVariable: A variable is missing from the joint.
    """
    for v in expr.variables():
        if v not in joint.variables:
            raise UnboundVariable(v)
    result = _evaluate(expr, joint)
    order = [v for v in joint.variables if v in result.variables]
    return result.reorder(order)


def _fixed(terms: Iterable[Term]) -> dict:
    return {t.var: t.value for t in terms if not t.symbolic}


def _divide(num: ProbTable, den: ProbTable) -> ProbTable:
    variables, domains = num._union(den)
    n = np.broadcast_to(num.aligned(variables), tuple(len(d) for d in domains))
    d = np.broadcast_to(den.aligned(variables), tuple(len(d) for d in domains))
    zero = d == 0
    if zero.any():
        index = tuple(int(i) for i in np.argwhere(zero)[0])
        assignment = {v: domains[k][index[k]] for k, v in enumerate(variables)
                      if v in den.variables}
        raise ZeroConditioningEvent(assignment)
    return ProbTable(variables, domains, n / d)


def _evaluate(e: ProbExpr, joint: ProbTable) -> ProbTable:
    if isinstance(e, Const):
        return ProbTable.scalar(e.value)
    if isinstance(e, CondProb):
        if e.do:
            raise ExpressionError("do-terms cannot be evaluated from an observational joint")
        all_terms = e.outcome + e.given
        num = joint.marginal([t.var for t in all_terms]).reduce(_fixed(all_terms))
        den = joint.marginal([t.var for t in e.given]).reduce(_fixed(e.given))
        if not e.given:
            return num
        return _divide(num, den)
    if isinstance(e, Product):
        return product(_evaluate(f, joint) for f in e.factors)
    if isinstance(e, Sum):
        table = _evaluate(e.body, joint)
        for v in e.bound:
            if v in table.variables:
                table = table.sum_out([v])
            else:
                table = ProbTable(table.variables, table.domains,
                                  table.values * len(joint.domain(v)))
        return table
    if isinstance(e, Fraction):
        return _divide(_evaluate(e.numerator, joint), _evaluate(e.denominator, joint))
    raise ExpressionError(f"unknown expression node {type(e).__name__}")
