"""
Discrete parametric models over design graphs.

A model holds one conditional probability table per factor of a design: a
causal node's distribution given its parents, or a selection node's
probability of selecting given its non-selection parents. Two families:

- ``LinearBinaryCPD``: P(V=1 | pa) is a sum of one coefficient per subset of
  parents that are 1 (risk-difference form, saturated for binary parents).
- ``TableCPD``: one free probability per parent assignment and value.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from itertools import product as cartesian
from typing import Mapping, Sequence

import numpy as np

from cmdesign.calculus.latent import latent_project
from cmdesign.core.graph import BINARY_DOMAIN, DesignGraph, NodeKind
from cmdesign.core.transforms import ignorable_selection_terms
from cmdesign.errors import ModelError, NonBinaryVariable
from cmdesign.stats.likelihood import Family
from cmdesign.stats.tables import ProbTable

logger = logging.getLogger(__name__)

LINEAR_BINARY = "linear-binary"
TABULAR = "tabular"

# probabilities drawn for random valid tables stay this far inside [0, 1]
RANDOM_MARGIN = 0.05


@dataclass(frozen=True)
class LinearBinaryCPD:
    """P(target=1 | parents) as a sum of subset coefficients."""

    target: str
    parents: tuple[str, ...]
    subsets: tuple[tuple[frozenset[str], str], ...]
    family: Family = Family.THETA

    @property
    def parameter_names(self) -> tuple[str, ...]:
        return tuple(name for _, name in self.subsets)

    def success_probabilities(self, params: Mapping[str, float]) -> np.ndarray:
        """P(target=1) per parent assignment, parents as binary axes."""
        shape = (2,) * len(self.parents)
        p = np.zeros(shape)
        for index in np.ndindex(*shape):
            ones = {v for v, x in zip(self.parents, index) if x == 1}
            p[index] = sum(params[name] for subset, name in self.subsets
                           if subset <= ones)
        return p

    def table(self, params: Mapping[str, float]) -> ProbTable:
        p1 = self.success_probabilities(params)
        values = np.stack([1.0 - p1, p1])
        return ProbTable((self.target, *self.parents),
                         [BINARY_DOMAIN] * (1 + len(self.parents)), values)

    def is_valid(self, params: Mapping[str, float], tol: float = 0.0) -> bool:
        p1 = self.success_probabilities(params)
        return bool(np.all(p1 >= -tol) and np.all(p1 <= 1.0 + tol))

    def coefficients_for(self, p1: np.ndarray) -> dict[str, float]:
        """Mobius inversion of success probabilities into subset coefficients."""
        coefs = {}
        for subset, name in self.subsets:
            total = 0.0
            for k in range(len(subset) + 1):
                for inner in combinations(sorted(subset), k):
                    index = tuple(1 if v in inner else 0 for v in self.parents)
                    total += (-1) ** (len(subset) - k) * p1[index]
            coefs[name] = float(total)
        return coefs

    def random(self, rng: np.random.Generator) -> dict[str, float]:
        p1 = rng.uniform(RANDOM_MARGIN, 1.0 - RANDOM_MARGIN,
                         size=(2,) * len(self.parents))
        return self.coefficients_for(p1)


@dataclass(frozen=True)
class TableCPD:
    """Free conditional table; the first target value takes the remainder."""

    target: str
    parents: tuple[str, ...]
    domains: tuple[tuple, ...]
    family: Family = Family.THETA

    @property
    def _target_domain(self) -> tuple:
        return self.domains[0]

    def _parent_assignments(self):
        return list(cartesian(*self.domains[1:]))

    def _name(self, value, assignment: tuple) -> str:
        given = ",".join(f"{p}={x}" for p, x in zip(self.parents, assignment))
        return f"p_{self.target}={value}|{given}" if given else f"p_{self.target}={value}"

    @property
    def parameter_names(self) -> tuple[str, ...]:
        return tuple(self._name(value, a) for a in self._parent_assignments()
                     for value in self._target_domain[1:])

    def table(self, params: Mapping[str, float]) -> ProbTable:
        shape = tuple(len(d) for d in self.domains)
        values = np.zeros(shape)
        for index in np.ndindex(*shape[1:]):
            a = tuple(d[i] for d, i in zip(self.domains[1:], index))
            rest = [params[self._name(value, a)] for value in self._target_domain[1:]]
            values[(0, *index)] = 1.0 - sum(rest)
            for k, p in enumerate(rest, start=1):
                values[(k, *index)] = p
        return ProbTable((self.target, *self.parents), self.domains, values)

    def is_valid(self, params: Mapping[str, float], tol: float = 0.0) -> bool:
        values = self.table(params).values
        return bool(np.all(values >= -tol) and np.all(values <= 1.0 + tol))

    def random(self, rng: np.random.Generator) -> dict[str, float]:
        k = len(self._target_domain)
        params = {}
        for a in self._parent_assignments():
            row = rng.dirichlet(np.ones(k))
            for value, p in zip(self._target_domain[1:], row[1:]):
                params[self._name(value, a)] = float(p)
        return params


CPD = LinearBinaryCPD | TableCPD


class DiscreteModel:
    """
    A parametrized distribution over a design graph.

    ``graph`` is the design the model factorizes over (latent variables
    projected away for the saturated family). Selection factors may be
    absent when they are ignorable for estimation. ``projected_from`` is the
    design with its latent variables, when they were projected away.
    """

    def __init__(self, graph: DesignGraph, cpds: Mapping[str, CPD], family: str,
                 projected_from: DesignGraph | None = None) -> None:
        self.graph = graph
        self.family = family
        self.projected_from = projected_from
        order = graph.topological_order()
        self.cpds = {v: cpds[v] for v in order if v in cpds}
        self._check_data_parents()

    def __repr__(self) -> str:
        return (f"DiscreteModel(graph={self.graph.name!r}, family={self.family!r}, "
                f"parameters={len(self.parameter_names)})")

    def _check_data_parents(self) -> None:
        g = self.graph
        for v in self.cpds:
            gates = set(g.selection_ancestors(v))
            for p in g.non_selection_parents(v):
                if g.node(p).kind is not NodeKind.DATA:
                    continue
                selection = g.measurement(p)[1]
                if selection not in gates:
                    raise ModelError(
                        f"{v} depends on {p}, which is not recorded whenever {v} "
                        f"is drawn (selection {selection} does not gate {v})")

    @property
    def parameter_names(self) -> tuple[str, ...]:
        return tuple(n for cpd in self.cpds.values() for n in cpd.parameter_names)

    def domain(self, v: str) -> tuple:
        return self.graph.node(v).values

    def check_params(self, params: Mapping[str, float]) -> None:
        missing = [n for n in self.parameter_names if n not in params]
        if missing:
            raise ModelError(f"missing parameter(s) {', '.join(missing)}",
                             missing=missing)

    def tables(self, params: Mapping[str, float]) -> dict[str, ProbTable]:
        """Conditional tables keyed by target; gates are implicitly 1."""
        self.check_params(params)
        return {v: cpd.table(params) for v, cpd in self.cpds.items()}

    def is_valid(self, params: Mapping[str, float], tol: float = 0.0) -> bool:
        self.check_params(params)
        return all(cpd.is_valid(params, tol) for cpd in self.cpds.values())

    def vector(self, params: Mapping[str, float]) -> np.ndarray:
        return np.array([params[n] for n in self.parameter_names], dtype=float)

    def params_from(self, x: Sequence[float]) -> dict[str, float]:
        return dict(zip(self.parameter_names, (float(v) for v in x)))

    def random_params(self, rng: np.random.Generator) -> dict[str, float]:
        return random_params(self, rng)


def random_params(model: DiscreteModel, rng: np.random.Generator) -> dict[str, float]:
    """Draws a valid parameter point: random tables, converted to the family."""
    params: dict[str, float] = {}
    for cpd in model.cpds.values():
        params.update(cpd.random(rng))
    return params


def _resolved_parents(g: DesignGraph, v: str) -> tuple[str, ...]:
    return tuple(g.value_source(p) for p in g.non_selection_parents(v))


def _subset_coefficients(prefix: str, parents: Sequence[str],
                         rank: Mapping[str, int]) -> tuple[tuple[frozenset[str], str], ...]:
    """All parent subsets, each named by its members in reverse causal order."""
    subsets = []
    for k in range(len(parents) + 1):
        for combo in combinations(sorted(parents, key=rank.get), k):
            label = "".join(sorted(combo, key=rank.get, reverse=True))
            subsets.append((frozenset(combo), prefix + label))
    return tuple(subsets)


def _check_binary(g: DesignGraph, v: str) -> None:
    values = g.node(v).values
    if tuple(values) != BINARY_DOMAIN:
        raise NonBinaryVariable(v, values)


def saturated_binary_parametrization(g: DesignGraph, drop_ignorable: bool = True) -> DiscreteModel:
    """
    The saturated linear parametrization of binary designs.

    Every observed causal variable is conditioned on its district and the
    district's parents among its predecessors in the latent projection, so
    unobserved confounders are absorbed. Selection factors (and determined
    causal nodes drawn by a selection) get psi coefficients.

    Args:
        g: Design graph (a pure causal graph is a design with no selections).
        drop_ignorable: Leave out selection factors that do not affect theta
            estimation.

    Returns:
        DiscreteModel: Model over ``g`` with latents projected away.

    Raises:
        NonBinaryVariable: If a modelled variable is not binary.
        ModelError: If a selection factor depends on an unobserved variable.
    """
    latent = {v for v in g.causal_nodes if g.is_latent(v)}
    projection = latent_project(g)
    order = projection.topological_order()
    rank = {v: i for i, v in enumerate(order)}

    conditioning: dict[str, tuple[str, ...]] = {}
    for i, v in enumerate(order):
        sub = projection.subgraph(order[:i + 1])
        district = next(d for d in sub.districts() if v in d)
        parents = set(district)
        for u in district:
            parents |= sub.parents(u)
        conditioning[v] = tuple(sorted(parents - {v}, key=rank.get))

    edges = {(a, b) for a, b in g.edges
             if a not in latent and b not in latent
             and not (g.node(b).kind is NodeKind.CAUSAL and g.node(a).kind is NodeKind.CAUSAL)}
    edges |= {(c, v) for v, cond in conditioning.items() for c in cond}
    nodes = [n for i, n in g.nodes.items() if i not in latent]
    graph = DesignGraph(nodes, edges, g.population, g.name)

    flags = ignorable_selection_terms(g) if drop_ignorable else {}
    cpds: dict[str, CPD] = {}
    psi_factors = []
    for v in graph.topological_order():
        node = graph.node(v)
        if node.kind is NodeKind.DATA or v == graph.population:
            continue
        parents = _resolved_parents(graph, v)
        hidden = [p for p in parents if p in latent]
        if hidden:
            raise ModelError(f"{v} depends on unobserved {', '.join(hidden)}")
        _check_binary(graph, v)
        for p in parents:
            _check_binary(graph, p)
        is_psi = node.kind is NodeKind.SELECTION or (
            node.info.is_determined and graph.selection_parents(v))
        if is_psi:
            if node.kind is NodeKind.SELECTION and flags.get(v, False):
                logger.info("Dropping ignorable selection factor %s", v)
                continue
            psi_factors.append((v, parents))
        else:
            cpds[v] = LinearBinaryCPD(
                v, parents, _subset_coefficients(f"theta_{v}", parents, rank))

    rank_all = {v: i for i, v in enumerate(graph.topological_order())}
    with_parents = [v for v, parents in psi_factors if parents]
    for v, parents in psi_factors:
        if not parents:
            subsets = ((frozenset(), f"psi_{v}"),)
        else:
            names = _subset_coefficients("psi_", parents, rank_all)
            suffix = f"[{v}]" if len(with_parents) > 1 else ""
            subsets = tuple(
                (subset, ("psi" if not subset else name) + suffix)
                for subset, name in names)
        cpds[v] = LinearBinaryCPD(v, parents, subsets, Family.PSI)

    model = DiscreteModel(graph, cpds, LINEAR_BINARY, g if latent else None)
    logger.debug("Saturated model for %s: %s", g.name, ", ".join(model.parameter_names))
    return model


def tabular_model(g: DesignGraph) -> DiscreteModel:
    """One free table per causal and selection factor of ``g``, latents kept."""
    cpds: dict[str, CPD] = {}
    for v in g.topological_order():
        node = g.node(v)
        if node.kind is NodeKind.DATA or v == g.population:
            continue
        parents = _resolved_parents(g, v)
        domains = (node.values, *(g.node(p).values for p in parents))
        family = (Family.PSI if node.kind is NodeKind.SELECTION
                  or (node.info.is_determined and g.selection_parents(v))
                  else Family.THETA)
        cpds[v] = TableCPD(v, parents, domains, family)
    return DiscreteModel(g, cpds, TABULAR)
