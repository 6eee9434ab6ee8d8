"""
Maximum-likelihood fitting of discrete design models.

The likelihood is maximized with the Nelder-Mead simplex, restarted from its
own optimum until a restart no longer improves the log-likelihood. The first
restarts add a log-barrier on the table entries with a shrinking weight, so
the simplex approaches the boundary of the valid region gradually; points
outside the region score +inf.
Several starts, each drawn from its own spawned seed, run concurrently; the
result is the best start, ties broken by start index.
"""

import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.optimize import minimize

from cmdesign.calculus.expr import evaluate_expr
from cmdesign.calculus.identify import identify_effect
from cmdesign.config import (
    BARRIER_DECAY,
    BARRIER_FLOOR,
    BARRIER_START,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_MULTISTART,
    DEFAULT_SEED,
    DEFAULT_TOLERANCE,
    EVALUATIONS_PER_PARAMETER,
    MAX_INTERIOR_DRAWS,
    SIMPLEX_XATOL,
)
from cmdesign.core.graph import DesignGraph, NodeKind
from cmdesign.errors import (
    CmdesignError,
    NoInteriorPoint,
    WrongModelFamily,
)
from cmdesign.stats.frequency import FrequencyTable
from cmdesign.stats.likelihood import CompiledLoglik, Factorization, Family, marginalize
from cmdesign.stats.model import DiscreteModel, random_params
from cmdesign.stats.simulate import causal_joint

logger = logging.getLogger(__name__)

FRONTDOOR_PARAMETERS = (
    "theta_X", "theta_Z", "theta_ZX", "theta_Y", "theta_YX", "theta_YZ", "theta_YZX",
)

_EFFECT = re.compile(r"^\s*P\((?P<outcome>[^|]+)\|\s*do\((?P<do>[^)]*)\)\s*\)\s*$")


@dataclass(frozen=True)
class FitOptions:
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    tolerance: float = DEFAULT_TOLERANCE
    multistart: int = DEFAULT_MULTISTART
    seed: int = DEFAULT_SEED
    workers: int | None = None

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise CmdesignError("tolerance must be positive")
        if self.multistart < 1:
            raise CmdesignError("multistart must be at least 1")
        if self.max_iterations < 1:
            raise CmdesignError("max_iterations must be at least 1")


@dataclass
class FitResult:
    params: dict[str, float]
    loglik: float
    converged: bool
    iterations: int
    derived: dict[str, float] = field(default_factory=dict)
    effects: dict[str, float] = field(default_factory=dict)
    start: int = 0

    def to_dict(self) -> dict:
        from cmdesign import __version__

        return {
            "params": dict(self.params),
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
            "derived": dict(self.derived),
            "effects": dict(self.effects),
            "version": __version__,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=4)


@dataclass(frozen=True)
class StartOutcome:
    index: int
    x: np.ndarray | None
    value: float
    iterations: int
    converged: bool


class MultistartWorker:
    """
    Runs one optimization per start.

    Each start draws its initial point from its own seed, so the outcome of
    a start does not depend on which thread runs it or when. The data are
    compiled once and shared read-only by every start.
    """

    def __init__(
            self,
            model: DiscreteModel,
            factorization: Factorization,
            data: FrequencyTable,
            options: FitOptions,
    ) -> None:
        self.model = model
        self.factorization = factorization
        self.data = data
        self.options = options
        self.compiled = CompiledLoglik(model, factorization, data)
        self._stop_requested = False

    def request_stop(self) -> None:
        """Stops pending starts from running."""
        self._stop_requested = True

    def objective(self, x: np.ndarray, barrier: float = 0.0) -> float:
        """
        Negated log-likelihood, plus ``-barrier * sum(log(slack))`` when a
        barrier weight is given. +inf outside the valid region.
        """
        value = self.compiled(x)
        if not math.isfinite(value):
            return math.inf
        if barrier > 0.0:
            slack = self.compiled.slack(x)
            if slack.size and slack.min() <= 0.0:
                return math.inf
            return -value - barrier * float(np.log(slack).sum())
        return -value

    def _initial_point(self, rng: np.random.Generator) -> np.ndarray | None:
        for _ in range(MAX_INTERIOR_DRAWS):
            x = self.model.vector(random_params(self.model, rng))
            if math.isfinite(self.objective(x)):
                return x
        return None

    def _simplex(self, x: np.ndarray, barrier: float, budget: int):
        return minimize(
            self.objective, x, args=(barrier,), method="Nelder-Mead",
            options={
                "maxiter": budget,
                "maxfev": EVALUATIONS_PER_PARAMETER * max(1, x.size),
                "xatol": SIMPLEX_XATOL,
                "fatol": self.options.tolerance,
                "adaptive": True,
            },
        )

    def run(self, index: int, seed: np.random.SeedSequence) -> StartOutcome:
        """
        Optimizes from one start.

        Restarts the simplex from its own optimum. The first restarts carry a
        log-barrier whose weight shrinks each time until it is dropped; after
        that the loop stops once a restart improves the log-likelihood by less
        than the tolerance.
        """
        if self._stop_requested:
            return StartOutcome(index, None, math.inf, 0, False)
        rng = np.random.Generator(np.random.Philox(seed))
        x = self._initial_point(rng)
        if x is None:
            logger.warning("Start %d found no valid initial point", index)
            return StartOutcome(index, None, math.inf, 0, False)

        opts = self.options
        barrier = BARRIER_START
        iterations = 0
        while barrier > 0.0 and iterations < opts.max_iterations:
            res = self._simplex(x, barrier, opts.max_iterations - iterations)
            iterations += int(res.nit)
            if math.isfinite(float(res.fun)):
                x = np.asarray(res.x)
            logger.debug("Start %d: barrier %.0e, loglik %.10g", index, barrier,
                         -self.objective(x))
            barrier *= BARRIER_DECAY
            if barrier < BARRIER_FLOOR:
                barrier = 0.0

        value = self.objective(x)
        converged = False
        while iterations < opts.max_iterations:
            res = self._simplex(x, 0.0, opts.max_iterations - iterations)
            iterations += int(res.nit)
            improvement = value - float(res.fun)
            if float(res.fun) <= value:
                x, value = np.asarray(res.x), float(res.fun)
            if improvement < opts.tolerance:
                converged = bool(res.success)
                break

        logger.info("Start %d: loglik %.10g after %d iterations%s", index, -value,
                    iterations, "" if converged else " (not converged)")
        return StartOutcome(index, x, value, iterations, converged)


def fit_mle(
        model: DiscreteModel,
        factorization: Factorization,
        data: FrequencyTable,
        options: FitOptions | None = None,
        effects: Iterable[str] = (),
        design: DesignGraph | None = None,
) -> FitResult:
    """
    Fits a model to observed data by maximum likelihood.

    Args:
        model: Discrete model (``model.graph`` is the factorized design).
        factorization: Factorization of ``model.graph``.
        data: Observed frequency table.
        options: Iteration, tolerance, multistart and seed settings.
        effects: Effect labels such as ``P(Y=1|do(X=1))`` to evaluate at the
            optimum.
        design: Graph to identify effects on; defaults to ``model.graph``.

    Returns:
        FitResult: Best start's parameters and log-likelihood, with derived
        marginals and requested effects.

    Raises:
        SharedSelectionUnsupported: If a selection depends on other individuals.
        NoInteriorPoint: If no start finds a valid parameter point.
    """
    options = options or FitOptions()
    model.graph.require_unshared_selection()
    factorization = marginalize(factorization)
    data.require_columns(factorization.data_columns, factorization.selection_columns)

    worker = MultistartWorker(model, factorization, data, options)
    seeds = np.random.SeedSequence(options.seed).spawn(options.multistart)
    with ThreadPoolExecutor(max_workers=options.workers) as pool:
        outcomes = list(pool.map(worker.run, range(options.multistart), seeds))

    found = [o for o in outcomes if o.x is not None]
    if not found:
        raise NoInteriorPoint(MAX_INTERIOR_DRAWS * options.multistart)
    best = min(found, key=lambda o: (o.value, o.index))
    params = model.params_from(best.x)

    result = FitResult(
        params=params,
        loglik=-best.value,
        converged=best.converged,
        iterations=best.iterations,
        derived=derived_quantities(model, params),
        start=best.index,
    )
    for label in effects:
        outcome, do = parse_effect(label)
        result.effects[label] = effect_value(model, params, design or model.graph, outcome, do)
    if not result.converged:
        logger.warning("Fit did not converge within %d iterations", options.max_iterations)
    return result


def derived_quantities(model: DiscreteModel, params: Mapping[str, float]) -> dict[str, float]:
    """Marginal P(V=1) of each binary theta-family causal variable."""
    g = model.graph
    theta = [v for v, cpd in model.cpds.items()
             if cpd.family is Family.THETA and g.node(v).kind is NodeKind.CAUSAL
             and tuple(g.node(v).values) == (0, 1)]
    if not theta:
        return {}
    joint = causal_joint(model, params)
    return {f"theta_{v}_prime": joint.marginal([v]).value({v: 1}) for v in theta}


def _assignments(text: str) -> dict[str, object]:
    result = {}
    for part in text.split(","):
        name, sep, value = part.partition("=")
        if not sep or not name.strip() or not value.strip():
            raise CmdesignError(f"expected Var=value, got {part.strip()!r}")
        value = value.strip()
        result[name.strip()] = int(value) if value.lstrip("-").isdigit() else value
    return result


def parse_effect(label: str) -> tuple[dict[str, object], dict[str, object]]:
    """Splits ``P(Y=1|do(X=1))`` into outcome and intervention assignments."""
    m = _EFFECT.match(label)
    if m is None:
        raise CmdesignError(f"cannot read effect {label!r}; expected P(Y=y|do(X=x))")
    return _assignments(m.group("outcome")), _assignments(m.group("do"))


def effect_value(model: DiscreteModel, params: Mapping[str, float], design: DesignGraph,
                 outcome: Mapping[str, object], do: Mapping[str, object]) -> float:
    """
    P(outcome | do) under fitted parameters, through its identified expression.

    Raises:
        NotIdentifiableError: If the effect is not identifiable on ``design``.
    """
    expr = identify_effect(design, do.keys(), outcome.keys())
    table = evaluate_expr(expr, causal_joint(model, params))
    return table.value({**outcome, **do})


def causal_effect_plugin(params: Mapping[str, float], which: Mapping[str, int] | int) -> float:
    """
    Closed-form P(Y=1 | do(X=x)) of the binary front-door family.

    With P(Z=1|x) = theta_Z + x theta_ZX, P(Y=1|x,z) = theta_Y + x theta_YX
    + z theta_YZ + xz theta_YZX and P(X=1) = theta_X, the effect is
    sum_z P(z|x) sum_x' P(Y=1|x',z) P(x').

    Raises:
        WrongModelFamily: If a front-door coefficient is missing.
    """
    missing = [k for k in FRONTDOOR_PARAMETERS if k not in params]
    if missing:
        raise WrongModelFamily(missing)
    x = int(which["X"]) if isinstance(which, Mapping) else int(which)
    p = params

    def p_y(xp: int, z: int) -> float:
        return p["theta_Y"] + xp * p["theta_YX"] + z * p["theta_YZ"] + xp * z * p["theta_YZX"]

    p_z1 = p["theta_Z"] + x * p["theta_ZX"]
    total = 0.0
    for z, pz in ((0, 1.0 - p_z1), (1, p_z1)):
        total += pz * ((1.0 - p["theta_X"]) * p_y(0, z) + p["theta_X"] * p_y(1, z))
    return total
