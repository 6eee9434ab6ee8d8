"""
Stratified observed-data likelihood of a design.

The population likelihood factorizes over the design graph: one factor per
causal node (theta family) and per selection node (psi family). Selection
patterns split the population into strata; within a stratum the causal
variables recorded by a data node are observed (written with the data node's
name, ``X*``), the rest are summed out. A selection node whose selection
parents are not all 1 is 0 with certainty, and a causal node gated off that
way takes the first value of its domain.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import product as cartesian
from typing import Iterable, Mapping

import networkx as nx
import numpy as np

from cmdesign.core.graph import DesignGraph, NodeKind
from cmdesign.errors import NonfiniteLogLik, RowMatchesNoStratum
from cmdesign.stats.frequency import FrequencyTable
from cmdesign.stats.tables import ProbTable, product

logger = logging.getLogger(__name__)


class Family(str, Enum):
    THETA = "theta"
    PSI = "psi"


@dataclass(frozen=True)
class Factor:
    """
    One conditional distribution of the factorization.

    ``given`` holds the non-selection parents, data-node parents resolved to
    the causal node they copy; ``gates`` the selection parents, all 1 where
    the factor appears. ``value`` fixes the target (selection factors).
    """

    target: str
    given: tuple[str, ...]
    family: Family
    gates: tuple[str, ...] = ()
    value: object = None
    substitutions: tuple[tuple[str, str], ...] = ()

    @property
    def variables(self) -> frozenset[str]:
        return frozenset((self.target, *self.given))

    def to_text(self, fixed: Mapping[str, object] = ()) -> str:
        subs = dict(self.substitutions)
        fixed = dict(fixed)

        def name(v: str) -> str:
            if v in fixed:
                return f"{v}={fixed[v]}"
            return subs.get(v, v)

        cond = ", ".join([*self.gates, *(name(v) for v in self.given)])
        cond = f" | {cond}" if cond else ""
        if self.value is not None:
            return f"p({self.target}={self.value}{cond}; {self.family.value})"
        return f"p_{self.target}({name(self.target)}{cond}; {self.family.value})"

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "given": list(self.given),
            "gates": list(self.gates),
            "family": self.family.value,
            "value": self.value,
            "substitutions": dict(self.substitutions),
        }


@dataclass(frozen=True)
class SumBlock:
    """Factors summed jointly over unobserved variables."""

    variables: tuple[str, ...]
    factors: tuple[Factor, ...]


@dataclass(frozen=True)
class Stratum:
    """
    Individuals sharing one selection assignment.

    ``assignment`` covers every selection node but the population node;
    ``pattern`` is the part that names the stratum (last 1 and first 0 of
    each selection chain). ``columns`` maps each observed causal variable to
    the data column that records it.
    """

    assignment: tuple[tuple[str, int], ...]
    pattern: tuple[tuple[str, int], ...]
    factors: tuple[Factor, ...]
    marginalized: frozenset[str]
    columns: tuple[tuple[str, str], ...]
    fixed: tuple[tuple[str, object], ...] = ()
    blocks: tuple[SumBlock, ...] = ()

    @property
    def selection_values(self) -> dict[str, int]:
        return dict(self.assignment)

    @property
    def all_factors(self) -> tuple[Factor, ...]:
        return self.factors + tuple(f for b in self.blocks for f in b.factors)

    def label(self) -> str:
        return "{" + ", ".join(f"{s}={v}" for s, v in self.pattern) + "}"

    def to_text(self) -> str:
        fixed = dict(self.fixed)
        parts = [f.to_text(fixed) for f in self.factors]
        for block in self.blocks:
            inner = " ".join(f.to_text(fixed) for f in block.factors)
            parts.append(f"sum_{{{','.join(block.variables)}}}[{inner}]")
        return f"{self.label()}: " + (" ".join(parts) if parts else "1")

    def to_dict(self) -> dict:
        return {
            "pattern": dict(self.pattern),
            "assignment": dict(self.assignment),
            "factors": [f.to_dict() for f in self.factors],
            "blocks": [
                {"variables": list(b.variables), "factors": [f.to_dict() for f in b.factors]}
                for b in self.blocks
            ],
            "marginalized": sorted(self.marginalized),
            "columns": dict(self.columns),
            "fixed": dict(self.fixed),
        }


@dataclass(frozen=True)
class Factorization:
    """Strata of a design, ordered deepest selection first."""

    graph: DesignGraph
    strata: tuple[Stratum, ...]
    marginalized: bool = False
    data_columns: tuple[str, ...] = field(default=())

    @property
    def selection_columns(self) -> tuple[str, ...]:
        return tuple(s for s in self.graph.selection_nodes)

    def to_text(self) -> str:
        return "\n".join(s.to_text() for s in self.strata)

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.name,
            "marginalized": self.marginalized,
            "columns": list(self.data_columns),
            "strata": [s.to_dict() for s in self.strata],
        }


def _selection_assignments(g: DesignGraph) -> list[dict[str, int]]:
    order = [s for s in g.topological_order()
             if g.node(s).kind is NodeKind.SELECTION and s != g.population]
    assignments = [{}]
    for s in order:
        extended = []
        for a in assignments:
            parents = g.selection_parents(s)
            if all(a.get(p, 1) == 1 for p in parents):
                extended.extend([{**a, s: 1}, {**a, s: 0}])
            else:
                extended.append({**a, s: 0})
        assignments = extended

    deepest_first = list(reversed(order))
    assignments.sort(key=lambda a: tuple(a[s] for s in deepest_first), reverse=True)
    return assignments


def _pattern(g: DesignGraph, a: dict[str, int]) -> tuple[tuple[str, int], ...]:
    shown = []
    for s in reversed([v for v in g.topological_order() if v in a]):
        if a[s] == 1:
            children = [c for c in g.children(s) if c in a]
            if not any(a[c] == 1 for c in children):
                shown.append((s, 1))
        elif all(a.get(p, 1) == 1 for p in g.selection_parents(s)):
            shown.append((s, 0))
    return tuple(shown)


def observed_columns(g: DesignGraph) -> tuple[str, ...]:
    """Data nodes plus causal nodes known without a measurement, in causal order."""
    columns = []
    for v in g.topological_order():
        node = g.node(v)
        if node.kind is NodeKind.DATA:
            columns.append(v)
        elif (node.kind is NodeKind.CAUSAL and node.info.is_known
              and g.data_node_of(v) is None):
            columns.append(v)
    return tuple(columns)


def factorize(g: DesignGraph) -> Factorization:
    """
    Enumerates the selection strata of a design and their factors.

    Args:
        g: Valid design graph.

    Returns:
        Factorization: One stratum per gating-consistent selection assignment,
        with every active factor and the unobserved causal variables.
    """
    strata = []
    order = g.topological_order()
    for a in _selection_assignments(g):
        values = {**a, g.population: 1} if g.population else dict(a)

        def active(v: str) -> bool:
            return all(values.get(p, 1) == 1 for p in g.selection_parents(v))

        columns: dict[str, str] = {}
        fixed: dict[str, object] = {}
        for v in g.causal_nodes:
            if not active(v):
                fixed[v] = g.node(v).values[0]
                continue
            d = g.data_node_of(v)
            if d is not None:
                if values[g.measurement(d)[1]] == 1:
                    columns[v] = d
            elif g.node(v).info.is_known:
                if all(values.get(s, 1) == 1 for s in g.selection_ancestors(v)):
                    columns[v] = v

        factors = []
        marginalized = set()
        for v in order:
            node = g.node(v)
            if node.kind is NodeKind.DATA or v == g.population or not active(v):
                continue
            given = tuple(g.value_source(p) for p in g.non_selection_parents(v))
            subs = tuple((u, columns[u]) for u in (v, *given)
                         if u in columns and columns[u] != u)
            if node.kind is NodeKind.SELECTION:
                factors.append(Factor(v, given, Family.PSI, g.selection_parents(v),
                                      values[v], subs))
                continue
            family = (Family.PSI if node.info.is_determined and g.selection_parents(v)
                      else Family.THETA)
            factors.append(Factor(v, given, family, g.selection_parents(v), None, subs))
            if v not in columns:
                marginalized.add(v)

        strata.append(Stratum(
            assignment=tuple(sorted(a.items())),
            pattern=_pattern(g, a),
            factors=tuple(factors),
            marginalized=frozenset(marginalized),
            columns=tuple(sorted(columns.items())),
            fixed=tuple(sorted(fixed.items())),
        ))

    logger.info("Factorized %s into %d strata", g.name, len(strata))
    return Factorization(g, tuple(strata), False, observed_columns(g))


def marginalize(f: Factorization) -> Factorization:
    """
    Moves each stratum's unobserved variables into explicit sum blocks.

    Factors of unobserved variables that nothing else conditions on sum to
    one and are dropped, repeatedly; the remaining factors that touch an
    unobserved variable are grouped into blocks connected by shared
    unobserved variables.
    """
    if f.marginalized:
        return f
    order = {v: i for i, v in enumerate(f.graph.topological_order())}
    strata = []
    for st in f.strata:
        factors = list(st.all_factors)
        hidden = set(st.marginalized)
        pruned = True
        while pruned:
            pruned = False
            for fac in factors:
                if fac.target in hidden and not any(
                        fac.target in o.given for o in factors if o is not fac):
                    factors.remove(fac)
                    hidden.discard(fac.target)
                    pruned = True
                    break

        links = nx.Graph()
        links.add_nodes_from(range(len(factors)))
        for i, fac in enumerate(factors):
            for v in fac.variables & hidden:
                links.add_edge(i, ("var", v))

        outside = []
        blocks = []
        for comp in sorted(nx.connected_components(links),
                           key=lambda c: min(i for i in c if isinstance(i, int))):
            members = sorted(i for i in comp if isinstance(i, int))
            variables = sorted((n[1] for n in comp if isinstance(n, tuple)),
                               key=lambda v: order[v])
            if variables:
                blocks.append(SumBlock(tuple(variables),
                                       tuple(factors[i] for i in members)))
            else:
                outside.extend(members)

        strata.append(Stratum(
            assignment=st.assignment,
            pattern=st.pattern,
            factors=tuple(factors[i] for i in sorted(outside)),
            marginalized=frozenset(hidden),
            columns=st.columns,
            fixed=st.fixed,
            blocks=tuple(blocks),
        ))
    return Factorization(f.graph, tuple(strata), True, f.data_columns)


def matches(st: Stratum, row: Mapping[str, object], data_columns: Iterable[str]) -> bool:
    """Whether an observed row is consistent with a stratum's recording pattern."""
    recorded = set(dict(st.columns).values())
    for c in data_columns:
        if (row.get(c) is not None) != (c in recorded):
            return False
    values = st.selection_values
    for s, v in row.items():
        if s in values and v is not None and int(v) != values[s]:
            return False
    return True


def matching_strata(f: Factorization, row: Mapping[str, object]) -> list[Stratum]:
    return [st for st in f.strata if matches(st, row, f.data_columns)]


def _evidence(st: Stratum, row: Mapping[str, object]) -> dict[str, object]:
    evidence: dict[str, object] = dict(st.assignment)
    evidence.update(dict(st.fixed))
    for v, column in st.columns:
        evidence[v] = row[column]
    return evidence


def _reduced(fac: Factor, tables: Mapping[str, ProbTable],
             evidence: Mapping[str, object]) -> ProbTable | None:
    table = tables.get(fac.target)
    if table is None:
        return None
    return table.reduce({v: evidence[v] for v in table.variables if v in evidence})


def stratum_probability(st: Stratum, tables: Mapping[str, ProbTable],
                        row: Mapping[str, object]) -> float:
    """P(stratum, observed row values), summing out unobserved variables."""
    evidence = _evidence(st, row)
    outside = [t for fac in st.factors
               if (t := _reduced(fac, tables, evidence)) is not None]
    prob = product(outside).total()
    for block in st.blocks:
        inner = [t for fac in block.factors
                 if (t := _reduced(fac, tables, evidence)) is not None]
        prob *= product(inner).total()
    return prob


def row_probability(model, f: Factorization, params: Mapping[str, float],
                    row: Mapping[str, object],
                    tables: Mapping[str, ProbTable] | None = None) -> float:
    """Probability of one observed row, summed over the strata it matches."""
    tables = model.tables(params) if tables is None else tables
    found = matching_strata(f, row)
    if not found:
        raise RowMatchesNoStratum(dict(row))
    return sum(stratum_probability(st, tables, row) for st in found)


def loglik(model, f: Factorization, data: FrequencyTable,
           params: Mapping[str, float], strict: bool = False) -> float:
    """
    Log-likelihood of a frequency table.

    Args:
        model: DiscreteModel whose tables cover the factorization's factors;
            factors the model leaves out (ignorable ones) contribute 1.
        f: Factorization of ``model.graph``, marginalized or not.
        data: Observed rows with counts.
        params: Parameter values.
        strict: Raise on a zero-probability row instead of returning -inf.

    Returns:
        float: Sum of count * log P(row); -inf outside the valid region.

    Raises:
        RowMatchesNoStratum: A row fits no selection pattern.
        NonfiniteLogLik: In strict mode, an observed row has probability 0.
    """
    data.require_columns(f.data_columns, f.selection_columns)
    if not model.is_valid(params):
        return -math.inf
    tables = model.tables(params)

    total = 0.0
    for row, count in data.rows():
        if count == 0:
            continue
        p = row_probability(model, f, params, row, tables)
        if p <= 0.0:
            if strict:
                raise NonfiniteLogLik(dict(row))
            return -math.inf
        total += count * math.log(p)
    return total


def enumerate_rows(f: Factorization, domains: Mapping[str, tuple]) -> Iterable[dict]:
    """All observable rows of a factorization (used by oracle checks)."""
    seen = set()
    for st in f.strata:
        by_column = {c: v for v, c in st.columns}
        free = tuple(c for c in f.data_columns if c in by_column)
        if free in seen:
            continue
        seen.add(free)
        for values in cartesian(*(domains[by_column[c]] for c in free)):
            row = {c: None for c in f.data_columns}
            row.update(zip(free, values))
            yield row


class CompiledLoglik:
    """
    Log-likelihood of one frequency table as a function of the parameter vector.

    Every table entry of both model families is affine in the parameters, so
    the entries are ``A @ x + b`` for a fixed matrix. The observed rows are
    resolved once into flat indices of the entries each summand multiplies;
    an evaluation is then one matrix product, a gather and three segmented
    reductions (summands into sum groups, groups into strata, strata into rows).
    """

    def __init__(self, model, f: Factorization, data: FrequencyTable) -> None:
        data.require_columns(f.data_columns, f.selection_columns)
        names = model.parameter_names
        base = model.tables({n: 0.0 for n in names})
        self.offsets: dict[str, int] = {}
        self.layout: dict[str, ProbTable] = {}
        size = 0
        for v, table in base.items():
            self.offsets[v] = size
            self.layout[v] = table
            size += table.values.size

        self.b = self._flatten(base, size)
        self.A = np.zeros((size, len(names)))
        for j, name in enumerate(names):
            unit = {n: 0.0 for n in names}
            unit[name] = 1.0
            self.A[:, j] = self._flatten(model.tables(unit), size) - self.b
        self.free = np.any(self.A != 0.0, axis=1)

        summands: list[list[int]] = []
        group_starts: list[int] = []
        stratum_starts: list[int] = []
        row_starts: list[int] = []
        counts: list[float] = []
        for row, count in data.rows():
            if count == 0:
                continue
            found = matching_strata(f, row)
            if not found:
                raise RowMatchesNoStratum(dict(row))
            row_starts.append(len(stratum_starts))
            counts.append(count)
            for st in found:
                stratum_starts.append(len(group_starts))
                evidence = _evidence(st, row)
                for factors in (st.factors, *(b.factors for b in st.blocks)):
                    group_starts.append(len(summands))
                    summands.extend(self._group_summands(factors, evidence))

        # padding points at an extra entry fixed to 1
        width = max((len(s) for s in summands), default=0) or 1
        self.index = np.full((len(summands), width), size, dtype=np.intp)
        for i, s in enumerate(summands):
            self.index[i, :len(s)] = s
        self.group_starts = np.asarray(group_starts, dtype=np.intp)
        self.stratum_starts = np.asarray(stratum_starts, dtype=np.intp)
        self.row_starts = np.asarray(row_starts, dtype=np.intp)
        self.counts = np.asarray(counts, dtype=float)
        logger.debug("Compiled %d rows into %d summands over %d table entries",
                     len(counts), len(summands), size)

    def _flatten(self, tables: Mapping[str, ProbTable], size: int) -> np.ndarray:
        flat = np.empty(size)
        for v, offset in self.offsets.items():
            values = tables[v].reorder(self.layout[v].variables).values
            flat[offset:offset + values.size] = values.ravel()
        return flat

    def _group_summands(self, factors: Iterable[Factor],
                        evidence: Mapping[str, object]) -> list[list[int]]:
        """Flat entry indices of each summand of one product, unobserved variables free."""
        targets = [fac.target for fac in factors if fac.target in self.layout]
        used = [self.layout[t] for t in targets]
        free: dict[str, int] = {}
        for table in used:
            for v, dom in zip(table.variables, table.domains):
                if v not in evidence:
                    free.setdefault(v, len(dom))
        known = [{v: table.index_of(v, evidence[v]) for v in table.variables if v in evidence}
                 for table in used]

        summands = []
        for choice in cartesian(*(range(n) for n in free.values())):
            chosen = dict(zip(free, choice))
            entries = []
            for t, table, fixed in zip(targets, used, known):
                position = tuple(fixed.get(v, chosen.get(v)) for v in table.variables)
                flat = np.ravel_multi_index(position, table.values.shape)
                entries.append(self.offsets[t] + int(flat))
            summands.append(entries)
        return summands

    def entries(self, x: np.ndarray) -> np.ndarray:
        """Every table entry at parameter vector ``x``."""
        return self.A @ np.asarray(x, dtype=float) + self.b

    def slack(self, x: np.ndarray) -> np.ndarray:
        """Entries that depend on the parameters; the region is where all are >= 0."""
        return self.entries(x)[self.free]

    def __call__(self, x: np.ndarray) -> float:
        values = self.entries(x)
        if values.size and values.min() < 0.0:
            return -math.inf
        if not self.counts.size:
            return 0.0
        extended = np.append(values, 1.0)
        summands = extended[self.index].prod(axis=1)
        groups = np.add.reduceat(summands, self.group_starts)
        strata = np.multiply.reduceat(groups, self.stratum_starts)
        rows = np.add.reduceat(strata, self.row_starts)
        if rows.min() <= 0.0:
            return -math.inf
        return float(self.counts @ np.log(rows))
