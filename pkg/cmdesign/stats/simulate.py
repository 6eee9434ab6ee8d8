"""
Population simulation and exact enumeration.

``joint_table`` enumerates the full joint distribution of a model (causal
and selection nodes, optionally data nodes); everything exact in this module
derives from it. ``simulate_dataset`` draws a finite population by ancestral
sampling, chunk by chunk, each chunk with its own generator spawned from the
seed so results do not depend on how chunks are scheduled.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from math import prod
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from cmdesign.calculus.expr import evaluate_expr
from cmdesign.calculus.identify import identify_effect
from cmdesign.config import DEFAULT_SEED, ENUMERATION_CAP, RNG_ALGORITHM, SIMULATION_CHUNK_SIZE
from cmdesign.core.dsl import serialize
from cmdesign.core.graph import DesignGraph, NodeKind
from cmdesign.errors import ModelError, StateSpaceTooLarge
from cmdesign.stats.frequency import COUNT, FrequencyTable
from cmdesign.stats.likelihood import observed_columns
from cmdesign.stats.model import DiscreteModel
from cmdesign.stats.tables import ProbTable, product

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimSpec:
    model: DiscreteModel
    params: Mapping[str, float]
    n: int
    seed: int = DEFAULT_SEED
    chunk_size: int = field(default=SIMULATION_CHUNK_SIZE)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ModelError("population size must be at least 1")
        if self.chunk_size < 1:
            raise ModelError("chunk size must be at least 1")
        if not self.model.is_valid(self.params):
            raise ModelError("parameters are outside the valid region")


def _gates(g: DesignGraph, v: str) -> tuple[str, ...]:
    return tuple(s for s in g.selection_parents(v) if s != g.population)


def _point_mass(v: str, domain: tuple, value) -> ProbTable:
    values = np.array([1.0 if (x == value or str(x) == str(value)) else 0.0 for x in domain])
    if values.sum() != 1.0:
        raise ModelError(f"value {value!r} not in domain of {v}: {list(domain)}")
    return ProbTable((v,), (domain,), values)


def _gated(table: ProbTable, gates: tuple[str, ...]) -> ProbTable:
    """Extends a table with gate axes: any gate 0 forces the first target value."""
    if not gates:
        return table
    values = np.zeros(table.values.shape + (2,) * len(gates))
    values[(Ellipsis,) + (1,) * len(gates)] = table.values
    for index in np.ndindex(*(2,) * len(gates)):
        if all(i == 1 for i in index):
            continue
        values[(0, Ellipsis) + index] = 1.0
    return ProbTable((*table.variables, *gates),
                     (*table.domains, *((0, 1),) * len(gates)), values)


def _data_table(g: DesignGraph, d: str) -> ProbTable:
    """A data node copies its causal parent when selected and is None otherwise."""
    causal, selection = g.measurement(d)
    domain = tuple(g.node(causal).values)
    k = len(domain)
    if selection == g.population:
        values = np.vstack([np.eye(k), np.zeros((1, k))])
        return ProbTable((d, causal), (domain + (None,), domain), values)
    values = np.zeros((k + 1, k, 2))
    values[:k, :, 1] = np.eye(k)
    values[k, :, 0] = 1.0
    return ProbTable((d, causal, selection), (domain + (None,), domain, (0, 1)), values)


def joint_table(
        model: DiscreteModel,
        params: Mapping[str, float],
        do: Mapping[str, object] | None = None,
        include_data: bool = False,
        selections: bool = True,
        cap: int = ENUMERATION_CAP,
) -> ProbTable:
    """
    Enumerates the model's joint distribution.

    Args:
        model: The model.
        params: Valid parameters.
        do: Interventions; each replaces a node's factor by a point mass.
        include_data: Add data nodes (missing cells are None).
        selections: Include selection nodes; without them causal factors are
            taken with every gate open (the population's causal model).
        cap: Largest number of joint states.

    Raises:
        StateSpaceTooLarge: If the joint exceeds ``cap`` states.
        ModelError: If a needed selection factor is missing from the model.
    """
    g = model.graph
    do = dict(do or {})
    g.check_known(do)
    tables = model.tables(params)

    variables = []
    for v in g.topological_order():
        kind = g.node(v).kind
        if v == g.population or (kind is NodeKind.SELECTION and not selections):
            continue
        if kind is NodeKind.DATA and not (include_data and selections):
            continue
        variables.append(v)

    states = prod(len(g.node(v).values) + (1 if g.node(v).kind is NodeKind.DATA else 0)
                  for v in variables)
    if states > cap:
        raise StateSpaceTooLarge(states, cap)

    factors = []
    for v in variables:
        node = g.node(v)
        if node.kind is NodeKind.DATA:
            factors.append(_data_table(g, v))
            continue
        if v in do:
            factors.append(_point_mass(v, node.values, do[v]))
            continue
        if v not in tables:
            raise ModelError(
                f"model has no factor for {v}; build it without dropping ignorable factors")
        gates = _gates(g, v) if selections else ()
        factors.append(_gated(tables[v], gates))

    joint = product(factors).reorder(variables)
    logger.debug("Enumerated %d joint states of %s", joint.values.size, g.name)
    return joint


def interventional_distribution(model: DiscreteModel, params: Mapping[str, float],
                                do: Mapping[str, object],
                                cap: int = ENUMERATION_CAP) -> ProbTable:
    """
    P(causal nodes | do) in the population.

    A model that kept its latent variables gives the truncated factorization.
    A model whose latent variables were projected away holds observational
    conditionals, so the intervention is evaluated through its identified
    expression on the design the model came from.

    Raises:
        NotIdentifiableError: If the projected design does not identify the
            effect of ``do`` on the remaining causal nodes.
    """
    do = dict(do)
    source = model.projected_from
    if source is None or not do:
        return joint_table(model, params, do=do, selections=False, cap=cap)

    model.graph.check_known(do)
    joint = causal_joint(model, params, cap)
    masses = [_point_mass(v, joint.domain(v), value) for v, value in do.items()]
    outcome = [v for v in joint.variables if v not in do]
    if not outcome:
        return product(masses).reorder(joint.variables)
    expr = identify_effect(source, do.keys(), outcome)
    effect = evaluate_expr(expr, joint).reduce(do)
    return product([effect, *masses]).reorder(joint.variables)


def causal_joint(model: DiscreteModel, params: Mapping[str, float],
                 cap: int = ENUMERATION_CAP) -> ProbTable:
    """Joint of the causal nodes in the population, before any selection."""
    return joint_table(model, params, selections=False, cap=cap)


def _observed_key(g: DesignGraph, columns: tuple[str, ...],
                  assignment: Mapping[str, object]) -> tuple:
    values = dict(assignment)
    if g.population is not None:
        values[g.population] = 1
    key = []
    for c in columns:
        node = g.node(c)
        if node.kind is NodeKind.DATA:
            causal, selection = g.measurement(c)
            key.append(values[causal] if values[selection] == 1 else None)
        elif all(values.get(s, 1) == 1 for s in g.selection_ancestors(c)):
            key.append(values[c])
        else:
            key.append(None)
    return tuple(key)


def _observed_distribution(model: DiscreteModel, params: Mapping[str, float],
                           cap: int) -> dict[tuple, float]:
    g = model.graph
    columns = observed_columns(g)
    joint = joint_table(model, params, cap=cap)
    dist: dict[tuple, float] = {}
    for assignment, p in joint.items():
        if p == 0.0:
            continue
        key = _observed_key(g, columns, assignment)
        dist[key] = dist.get(key, 0.0) + p
    return dist


def expected_frequencies(model: DiscreteModel, params: Mapping[str, float], n: float,
                         cap: int = ENUMERATION_CAP) -> FrequencyTable:
    """Exact expected counts of every observable row in a population of size ``n``."""
    dist = _observed_distribution(model, params, cap)
    columns = observed_columns(model.graph)
    return FrequencyTable.from_records(columns, ((k, n * p) for k, p in dist.items()))


def observed_row_probability(model: DiscreteModel, params: Mapping[str, float],
                             row: Mapping[str, object], cap: int = ENUMERATION_CAP) -> float:
    """Probability of an observed row by brute-force enumeration."""
    columns = observed_columns(model.graph)
    target = tuple(None if row.get(c) is None else str(row[c]) for c in columns)
    total = 0.0
    for key, p in _observed_distribution(model, params, cap).items():
        if tuple(None if v is None else str(v) for v in key) == target:
            total += p
    return total


def _sample_chunk(model: DiscreteModel, tables: Mapping[str, ProbTable], m: int,
                  rng: np.random.Generator) -> pd.DataFrame:
    g = model.graph
    index: dict[str, np.ndarray] = {}
    if g.population is not None:
        index[g.population] = np.ones(m, dtype=int)

    for v in g.topological_order():
        node = g.node(v)
        if node.kind is NodeKind.DATA or v == g.population:
            continue
        if v not in tables:
            raise ModelError(
                f"model has no factor for {v}; build it without dropping ignorable factors")
        table = tables[v]
        lookup = (slice(None),) + tuple(index[p] for p in table.variables[1:])
        probs = table.values[lookup]
        if probs.ndim == 1:
            probs = np.repeat(probs[:, None], m, axis=1)
        cumulative = np.cumsum(probs, axis=0)
        u = rng.random(m)
        drawn = np.minimum((u[None, :] >= cumulative).sum(axis=0), len(node.values) - 1)
        gates = _gates(g, v)
        if gates:
            open_ = np.all([index[s] == 1 for s in gates], axis=0)
            drawn = np.where(open_, drawn, 0)
        index[v] = drawn

    records = {}
    for c in observed_columns(g):
        node = g.node(c)
        if node.kind is NodeKind.DATA:
            causal, selection = g.measurement(c)
            domain = g.node(causal).values
            seen = index[selection] == 1
            values = np.array([domain[i] for i in index[causal]], dtype=object)
        else:
            domain = node.values
            seen = np.all([index[s] == 1 for s in g.selection_ancestors(c)], axis=0) \
                if g.selection_ancestors(c) else np.ones(m, dtype=bool)
            values = np.array([domain[i] for i in index[c]], dtype=object)
        values[~seen] = None
        records[c] = values
    return pd.DataFrame(records)


def simulate_dataset(spec: SimSpec) -> FrequencyTable:
    """
    Draws a population and returns its observed rows with counts.

    Raises:
        SharedSelectionUnsupported: If a selection depends on other individuals.
    """
    g = spec.model.graph
    g.require_unshared_selection()
    tables = spec.model.tables(spec.params)
    columns = list(observed_columns(g))

    n_chunks = -(-spec.n // spec.chunk_size)
    children = np.random.SeedSequence(spec.seed).spawn(n_chunks)
    frames = []
    for k, child in enumerate(children):
        m = min(spec.chunk_size, spec.n - k * spec.chunk_size)
        rng = np.random.Generator(np.random.Philox(child))
        frames.append(_sample_chunk(spec.model, tables, m, rng))
        logger.debug("Simulated chunk %d/%d (%d individuals)", k + 1, n_chunks, m)

    population = pd.concat(frames, ignore_index=True)
    if not columns:
        return FrequencyTable(pd.DataFrame({COUNT: [spec.n]}))
    counts = population.groupby(columns, dropna=False, sort=False).size()
    frame = counts.rename(COUNT).reset_index()
    logger.info("Simulated %d individuals into %d distinct rows", spec.n, len(frame))
    return FrequencyTable(frame)


def spec_hash(spec: SimSpec) -> str:
    payload = json.dumps({
        "graph": serialize(spec.model.graph),
        "family": spec.model.family,
        "params": {k: spec.params[k] for k in sorted(spec.params)},
        "n": spec.n,
        "chunk_size": spec.chunk_size,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def metadata(spec: SimSpec) -> dict:
    """Reproducibility record written next to simulated data."""
    return {
        "seed": spec.seed,
        "generator": RNG_ALGORITHM,
        "numpy_version": np.__version__,
        "n": spec.n,
        "chunk_size": spec.chunk_size,
        "spec_hash": spec_hash(spec),
    }


def write_metadata(path: str | Path, spec: SimSpec) -> None:
    Path(path).write_text(json.dumps(metadata(spec), indent=4) + "\n", encoding="utf-8")
