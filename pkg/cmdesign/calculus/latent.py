"""
Latent projection of causal graphs.

Unobserved causal nodes are removed; a directed path through latents only
becomes a directed edge, and two observed nodes sharing a latent ancestor
(reached through latents only) get a bidirected confounding arc.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import networkx as nx

from cmdesign.core.graph import DesignGraph, NodeKind, causal_projection
from cmdesign.errors import UnknownNode


@dataclass(frozen=True)
class LatentGraph:
    """Acyclic directed mixed graph over observed causal nodes."""

    nodes: frozenset[str]
    directed: frozenset[tuple[str, str]]
    bidirected: frozenset[frozenset[str]]

    @classmethod
    def from_edges(
            cls,
            nodes: Iterable[str],
            directed: Iterable[tuple[str, str]] = (),
            bidirected: Iterable[tuple[str, str]] = (),
    ) -> "LatentGraph":
        arcs = frozenset(frozenset(p) for p in bidirected)
        if any(len(a) != 2 for a in arcs):
            raise ValueError("bidirected arcs must join two distinct nodes")
        return cls(frozenset(nodes), frozenset(tuple(e) for e in directed), arcs)

    def _dag(self) -> nx.DiGraph:
        dag = nx.DiGraph()
        dag.add_nodes_from(sorted(self.nodes))
        dag.add_edges_from(sorted(self.directed))
        return dag

    def check_known(self, node_ids: Iterable[str]) -> None:
        unknown = set(node_ids) - self.nodes
        if unknown:
            raise UnknownNode(unknown)

    def parents(self, node_id: str) -> frozenset[str]:
        return frozenset(a for a, b in self.directed if b == node_id)

    def ancestors(self, node_ids: Iterable[str]) -> frozenset[str]:
        dag = self._dag()
        result = set(node_ids)
        for v in list(result):
            result |= nx.ancestors(dag, v)
        return frozenset(result)

    def topological_order(self) -> list[str]:
        return list(nx.lexicographical_topological_sort(self._dag()))

    def subgraph(self, node_ids: Iterable[str]) -> "LatentGraph":
        keep = frozenset(node_ids)
        return LatentGraph(
            keep,
            frozenset((a, b) for a, b in self.directed if a in keep and b in keep),
            frozenset(arc for arc in self.bidirected if arc <= keep),
        )

    def remove_incoming(self, node_ids: Iterable[str]) -> "LatentGraph":
        """Cuts directed edges into the nodes and their confounding arcs."""
        cut = set(node_ids)
        return LatentGraph(
            self.nodes,
            frozenset((a, b) for a, b in self.directed if b not in cut),
            frozenset(arc for arc in self.bidirected if not arc & cut),
        )

    def districts(self) -> list[frozenset[str]]:
        """Confounded components, sorted by their smallest node id."""
        skeleton = nx.Graph()
        skeleton.add_nodes_from(self.nodes)
        skeleton.add_edges_from(tuple(arc) for arc in self.bidirected)
        comps = [frozenset(c) for c in nx.connected_components(skeleton)]
        return sorted(comps, key=lambda c: min(c))

    def relabel(self, mapping: dict[str, str]) -> "LatentGraph":
        return LatentGraph(
            frozenset(mapping[v] for v in self.nodes),
            frozenset((mapping[a], mapping[b]) for a, b in self.directed),
            frozenset(frozenset(mapping[v] for v in arc) for arc in self.bidirected),
        )


def latent_project(g: DesignGraph) -> LatentGraph:
    """
    Projects out the unobserved causal nodes of a causal graph.

    Design graphs are reduced to their causal projection first. Latents
    with a single observed descendant through latent-only paths leave no
    trace (they act as exogenous noise).
    """
    if any(g.node(v).kind is not NodeKind.CAUSAL for v in g.node_ids):
        g = causal_projection(g)

    latent = {v for v in g.node_ids if not g.node(v).info.is_known}
    observed = set(g.node_ids) - latent
    dag = g.digraph

    def observed_reach(start: str) -> set[str]:
        # observed nodes reachable from start through latent-only interiors
        found, stack, seen = set(), list(dag.successors(start)), set()
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            if v in observed:
                found.add(v)
            else:
                stack.extend(dag.successors(v))
        return found

    directed = {(a, b) for a in observed for b in observed_reach(a)}
    bidirected = set()
    for u in latent:
        reach = sorted(observed_reach(u))
        bidirected |= {frozenset(p) for p in combinations(reach, 2)}

    return LatentGraph(frozenset(observed), frozenset(directed), frozenset(bidirected))
