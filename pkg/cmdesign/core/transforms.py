"""
Transforms of design graphs into the graphs other methods expect.

``collapse_missingness`` yields a missingness graph (one response indicator
per recorded variable), ``collapse_selection_diagram`` a selection diagram
for transportability. ``classify_missingness`` and
``ignorable_selection_terms`` read the missingness mechanism and the
estimation consequences directly off the design.
"""

import logging
from enum import Enum
from typing import Iterable

import networkx as nx

from cmdesign.core.graph import DesignGraph, NodeKind, causal_projection
from cmdesign.core.separation import CIQuery, d_separated
from cmdesign.errors import NoDataNode, SNotInGraph

logger = logging.getLogger(__name__)


class MissingnessClass(str, Enum):
    EVERYWHERE_MCAR = "EverywhereMCAR"
    MNAR = "MNAR"
    OTHER = "Other"


def collapse_missingness(g: DesignGraph) -> DesignGraph:
    """
    Collapses a design graph to a missingness graph.

    Kept nodes: causal nodes, data nodes and the selection nodes that parent
    a data node. Kept edges: those of ``g`` between kept nodes, plus X -> M
    for each causal X with a directed path to a kept selection node M.
    """
    retained = {s for s in g.selection_nodes if g.measured_by(s)}
    keep = set(g.causal_nodes) | set(g.data_nodes) | retained

    edges = {(a, b) for a, b in g.edges if a in keep and b in keep}
    for m in retained:
        for x in g.causal_nodes:
            if x in g.ancestors([m]):
                edges.add((x, m))

    nodes = [n for i, n in g.nodes.items() if i in keep]
    population = g.population if g.population in keep else None
    logger.debug("Collapsed %s to a missingness graph over %d nodes", g.name, len(nodes))
    return DesignGraph(nodes, edges, population, g.name)


def collapse_selection_diagram(g: DesignGraph, s: Iterable[str]) -> DesignGraph:
    """
    Collapses a design graph to a selection diagram.

    Args:
        g: Design graph.
        s: Causal nodes standing for the conceptual-population variables.

    Returns:
        DesignGraph: The causal nodes, without the edges into ``s``.

    Raises:
        SNotInGraph: If an id of ``s`` is not a causal node of ``g``.
    """
    s = set(s)
    outside = {v for v in s if v not in g or g.node(v).kind is not NodeKind.CAUSAL}
    if outside:
        raise SNotInGraph(outside)
    projected = causal_projection(g)
    return projected.with_edges((a, b) for a, b in projected.edges if b not in s)


def _response_indicator(g: DesignGraph, v: str) -> tuple[str, str]:
    g.check_known([v])
    d = g.data_node_of(v)
    if d is None:
        raise NoDataNode(v)
    return d, g.measurement(d)[1]


def _selection_only_path(g: DesignGraph, v: str, m: str) -> list[str] | None:
    """A directed path v -> ... -> m whose interior nodes are all selection nodes."""
    allowed = {u for u in g.selection_nodes} | {v, m}
    sub = g.digraph.subgraph(allowed)
    try:
        return nx.shortest_path(sub, v, m)
    except nx.NetworkXNoPath:
        return None


def _open_path(g: DesignGraph, v: str, m: str) -> list[str] | None:
    """A path between v and m without colliders, through a common ancestor."""
    dag = g.digraph
    common = sorted(g.ancestors([v]) & g.ancestors([m]),
                    key=g.topological_order().index, reverse=True)
    for a in common:
        to_v = nx.shortest_path(dag, a, v)
        to_m = nx.shortest_path(dag, a, m)
        if set(to_v[1:]) & set(to_m[1:]):
            continue
        return list(reversed(to_v)) + to_m[1:]
    return None


def classify_missingness(g: DesignGraph, v: str) -> MissingnessClass:
    """
    Classifies the missingness of a recorded causal variable.

    MNAR when ``v`` points into its response indicator M, directly or
    through selection nodes only; everywhere MCAR when ``v`` and M are
    d-separated by the empty set; Other otherwise.

    Raises:
        NoDataNode: If ``v`` has no data node.
    """
    return missingness_witness(g, v)[0]


def missingness_witness(g: DesignGraph, v: str) -> tuple[MissingnessClass, list[str]]:
    """The class of ``classify_missingness`` with the path that decides it."""
    _, m = _response_indicator(g, v)
    path = _selection_only_path(g, v, m)
    if path is not None:
        return MissingnessClass.MNAR, path
    if d_separated(g, CIQuery({v}, {m})):
        return MissingnessClass.EVERYWHERE_MCAR, []
    return MissingnessClass.OTHER, _open_path(g, v, m) or []


def ignorable_selection_terms(g: DesignGraph) -> dict[str, bool]:
    """
    Flags the selection factors that can be left out of theta estimation.

    A factor is ignorable when no parent is an unobserved causal node and no
    non-selection parent enters a summed-out block in a stratum where the
    factor appears. The population node is always ignorable.
    """
    from cmdesign.stats.likelihood import factorize, marginalize

    f = marginalize(factorize(g))
    flags = {s: True for s in g.selection_nodes}
    for s in g.selection_nodes:
        if s == g.population:
            continue
        parents = [g.value_source(p) for p in g.non_selection_parents(s)]
        if any(g.is_latent(p) for p in parents):
            flags[s] = False
            continue
        for st in f.strata:
            for block in st.blocks:
                tied = set(block.variables)
                for fac in block.factors:
                    tied |= fac.variables
                if any(fac.target == s for fac in block.factors) or (
                        any(fac.target == s for fac in st.all_factors)
                        and tied & set(parents)):
                    flags[s] = False
    return flags
