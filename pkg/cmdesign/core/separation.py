"""
d-separation on design graphs and plain DAGs.

Separation is decided on the moral graph of the ancestral set of the query
(Lauritzen's criterion). ``exact_ci`` is the numeric counterpart, checking
conditional independence in a discrete model by enumeration.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import networkx as nx
import numpy as np

from cmdesign.config import ENUMERATION_CAP
from cmdesign.core.graph import DesignGraph
from cmdesign.errors import CmdesignError, OverlappingSets, UnknownNode


@dataclass(frozen=True)
class CIQuery:
    """The statement (A independent of B given C)."""

    a: frozenset[str]
    b: frozenset[str]
    c: frozenset[str] = frozenset()

    def __init__(self, a: Iterable[str], b: Iterable[str],
                 c: Iterable[str] = ()) -> None:
        object.__setattr__(self, "a", frozenset(a))
        object.__setattr__(self, "b", frozenset(b))
        object.__setattr__(self, "c", frozenset(c))
        if not self.a or not self.b:
            raise CmdesignError("independence query needs non-empty A and B")
        overlap = (self.a & self.b) | (self.a & self.c) | (self.b & self.c)
        if overlap:
            raise OverlappingSets(
                f"query sets must be disjoint, shared: {', '.join(sorted(overlap))}",
                overlap)

    @property
    def variables(self) -> frozenset[str]:
        return self.a | self.b | self.c

    def swapped(self) -> "CIQuery":
        return CIQuery(self.b, self.a, self.c)

    def __str__(self) -> str:
        def fmt(s):
            return ",".join(sorted(s))
        return f"({fmt(self.a)} _||_ {fmt(self.b)} | {fmt(self.c)})"


def as_digraph(g: DesignGraph | nx.DiGraph) -> nx.DiGraph:
    return g.digraph if isinstance(g, DesignGraph) else g


def moral_ancestral_graph(dag: nx.DiGraph, nodes: Iterable[str]) -> nx.Graph:
    """Moralized subgraph induced by the ancestors of ``nodes``."""
    keep = set(nodes)
    for v in list(keep):
        keep |= nx.ancestors(dag, v)
    sub = dag.subgraph(keep)

    moral = nx.Graph()
    moral.add_nodes_from(sorted(keep))
    moral.add_edges_from(sub.edges())
    for v in sorted(keep):
        moral.add_edges_from(combinations(sorted(sub.predecessors(v)), 2))
    return moral


def d_separated(g: DesignGraph | nx.DiGraph, q: CIQuery) -> bool:
    """
    Decides whether every path between A and B is blocked given C.

    Args:
        g: Design graph or networkx DAG.
        q: The independence query.

    Returns:
        bool: True iff A and B are d-separated by C.
    """
    dag = as_digraph(g)
    unknown = {v for v in q.variables if v not in dag}
    if unknown:
        raise UnknownNode(unknown)

    moral = moral_ancestral_graph(dag, q.variables)
    moral.remove_nodes_from(q.c)
    reachable = set()
    for a in sorted(q.a):
        reachable |= nx.node_connected_component(moral, a)
    return not (reachable & q.b)


def exact_ci(model, params: dict, q: CIQuery, tol: float = 1e-9,
             cap: int = ENUMERATION_CAP) -> bool:
    """
    Checks conditional independence numerically by full enumeration.

    Args:
        model: DiscreteModel whose graph contains the query variables.
        params: Parameter values for the model.
        q: The independence query.
        tol: Largest admitted |P(a,b|c) - P(a|c)P(b|c)|.
        cap: Largest joint state space to enumerate.

    Returns:
        bool: True iff the independence holds within ``tol`` at every
        assignment with P(c) > 0.
    """
    from cmdesign.stats.simulate import joint_table

    include_data = any(v in model.graph.data_nodes for v in q.variables)
    joint = joint_table(model, params, include_data=include_data, cap=cap)

    a, b, c = sorted(q.a), sorted(q.b), sorted(q.c)
    table = joint.marginal(a + b + c).values
    n_a, n_b = len(a), len(b)
    axes_a = tuple(range(n_a))
    axes_b = tuple(range(n_a, n_a + n_b))

    p_c = table.sum(axis=axes_a + axes_b, keepdims=True)
    p_ac = table.sum(axis=axes_b, keepdims=True)
    p_bc = table.sum(axis=axes_a, keepdims=True)
    positive = np.broadcast_to(p_c > 0, table.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = table / p_c - (p_ac / p_c) * (p_bc / p_c)
    return bool(np.all(np.abs(gap[positive]) <= tol))
