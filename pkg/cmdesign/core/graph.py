"""
Causal models with design: typed DAGs of causal, selection and data nodes.

A design graph extends a causal DAG with selection nodes (who is sampled,
at which stage) and data nodes (what is recorded). Each data node has one
causal parent, whose value it copies, and one selection parent, which
decides whether the value is recorded or missing.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable

import networkx as nx

from cmdesign.errors import SharedSelectionUnsupported, UnknownNode, ValidationError

BINARY_DOMAIN = (0, 1)


class NodeKind(str, Enum):
    CAUSAL = "causal"
    SELECTION = "selection"
    DATA = "data"


class InfoAttr(str, Enum):
    """What the observer knows about a node's value."""

    OBSERVED = "observed"
    NOT_OBSERVED = "unobserved"
    DETERMINED_KNOWN = "det-known"
    DETERMINED_UNKNOWN = "det-unknown"

    @property
    def is_known(self) -> bool:
        return self in (InfoAttr.OBSERVED, InfoAttr.DETERMINED_KNOWN)

    @property
    def is_determined(self) -> bool:
        return self in (InfoAttr.DETERMINED_KNOWN, InfoAttr.DETERMINED_UNKNOWN)


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    info: InfoAttr = InfoAttr.OBSERVED
    domain: tuple | None = None
    stage: int | None = None
    shared_selection: bool = False

    @property
    def values(self) -> tuple:
        """The node's domain, binary when undeclared."""
        if self.kind is NodeKind.SELECTION:
            return self.domain or BINARY_DOMAIN
        return self.domain if self.domain is not None else BINARY_DOMAIN


@dataclass(frozen=True, order=True)
class Violation:
    rule: str
    ids: tuple[str, ...]
    message: str = field(compare=False)

    def to_dict(self) -> dict:
        return {"rule": self.rule, "ids": list(self.ids), "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def is_valid(self) -> bool:
        return not self.violations

    @property
    def rules(self) -> list[str]:
        return [v.rule for v in self.violations]

    def to_dict(self) -> dict:
        return {"valid": self.is_valid,
                "violations": [v.to_dict() for v in self.violations]}


class DesignGraph:
    """
    Immutable design graph.

    Instances may be invalid candidates (see ``validate``); the graph
    primitives work on any candidate whose edges reference known nodes.
    """

    def __init__(
            self,
            nodes: Iterable[Node],
            edges: Iterable[tuple[str, str]],
            population: str | None = None,
            name: str = "design",
    ) -> None:
        self.name = name
        self.population = population
        self._nodes = {n.id: n for n in sorted(nodes, key=lambda n: n.id)}
        self._edges = frozenset((str(a), str(b)) for a, b in edges)

        graph = nx.DiGraph()
        graph.add_nodes_from(self._nodes)
        graph.add_edges_from(
            (a, b) for a, b in sorted(self._edges)
            if a in self._nodes and b in self._nodes
        )
        self._digraph = nx.freeze(graph)

    def __repr__(self) -> str:
        return (f"DesignGraph(name={self.name!r}, nodes={len(self._nodes)}, "
                f"edges={len(self._edges)}, population={self.population!r})")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DesignGraph):
            return NotImplemented
        return (self.name == other.name
                and self.population == other.population
                and self._nodes == other._nodes
                and self._edges == other._edges)

    def __hash__(self) -> int:
        return hash((self.name, self.population, self._edges,
                     tuple(self._nodes.values())))

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._nodes

    @property
    def digraph(self) -> nx.DiGraph:
        """Read-only networkx view of the graph."""
        return self._digraph

    @property
    def nodes(self) -> dict[str, Node]:
        return dict(self._nodes)

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        return self._edges

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(self._nodes)

    def node(self, node_id: str) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode([node_id]) from None

    def ids_of_kind(self, kind: NodeKind) -> tuple[str, ...]:
        return tuple(i for i, n in self._nodes.items() if n.kind is kind)

    @property
    def causal_nodes(self) -> tuple[str, ...]:
        return self.ids_of_kind(NodeKind.CAUSAL)

    @property
    def selection_nodes(self) -> tuple[str, ...]:
        return self.ids_of_kind(NodeKind.SELECTION)

    @property
    def data_nodes(self) -> tuple[str, ...]:
        return self.ids_of_kind(NodeKind.DATA)

    def require_unshared_selection(self) -> None:
        """Raises SharedSelectionUnsupported if any selection depends on other individuals."""
        shared = [s for s in self.selection_nodes if self.node(s).shared_selection]
        if shared:
            raise SharedSelectionUnsupported(shared)

    def is_kind(self, node_id: str, kind: NodeKind) -> bool:
        return self.node(node_id).kind is kind

    def check_known(self, node_ids: Iterable[str]) -> None:
        unknown = {v for v in node_ids if v not in self._nodes}
        if unknown:
            raise UnknownNode(unknown)

    def parents(self, node_id: str) -> tuple[str, ...]:
        self.check_known([node_id])
        return tuple(sorted(self._digraph.predecessors(node_id)))

    def children(self, node_id: str) -> tuple[str, ...]:
        self.check_known([node_id])
        return tuple(sorted(self._digraph.successors(node_id)))

    def ancestors(self, node_ids: Iterable[str]) -> frozenset[str]:
        """Reflexive-transitive closure over the parent relation."""
        node_ids = set(node_ids)
        self.check_known(node_ids)
        result = set(node_ids)
        for v in node_ids:
            result |= nx.ancestors(self._digraph, v)
        return frozenset(result)

    def descendants(self, node_ids: Iterable[str]) -> frozenset[str]:
        """Reflexive-transitive closure over the child relation."""
        node_ids = set(node_ids)
        self.check_known(node_ids)
        result = set(node_ids)
        for v in node_ids:
            result |= nx.descendants(self._digraph, v)
        return frozenset(result)

    def topological_order(self) -> list[str]:
        """Deterministic topological order (ties broken by node id)."""
        return list(nx.lexicographical_topological_sort(self._digraph))

    def is_acyclic(self) -> bool:
        return nx.is_directed_acyclic_graph(self._digraph)

    # Design structure

    def measurement(self, data_id: str) -> tuple[str, str]:
        """Returns the (causal parent, selection parent) of a data node."""
        parents = self.parents(data_id)
        causal = [p for p in parents if self._nodes[p].kind is NodeKind.CAUSAL]
        selection = [p for p in parents if self._nodes[p].kind is NodeKind.SELECTION]
        if len(causal) != 1 or len(selection) != 1:
            raise ValidationError(validate(self))
        return causal[0], selection[0]

    def data_node_of(self, causal_id: str) -> str | None:
        """Returns the data node measuring a causal node, if any."""
        for child in self.children(causal_id):
            if self._nodes[child].kind is NodeKind.DATA:
                return child
        return None

    def measured_by(self, selection_id: str) -> tuple[str, ...]:
        """Data nodes whose selection parent is the given selection node."""
        return tuple(
            c for c in self.children(selection_id)
            if self._nodes[c].kind is NodeKind.DATA
        )

    def value_source(self, node_id: str) -> str:
        """The causal node a data node copies; the node itself otherwise."""
        if self._nodes[node_id].kind is NodeKind.DATA:
            return self.measurement(node_id)[0]
        return node_id

    def selection_parents(self, node_id: str) -> tuple[str, ...]:
        return tuple(p for p in self.parents(node_id)
                     if self._nodes[p].kind is NodeKind.SELECTION)

    def non_selection_parents(self, node_id: str) -> tuple[str, ...]:
        return tuple(p for p in self.parents(node_id)
                     if self._nodes[p].kind is not NodeKind.SELECTION)

    def selection_ancestors(self, node_id: str) -> frozenset[str]:
        """Selection nodes among the proper ancestors of a node."""
        return frozenset(
            a for a in self.ancestors([node_id]) - {node_id}
            if self._nodes[a].kind is NodeKind.SELECTION
        )

    def is_latent(self, node_id: str) -> bool:
        """Causal node whose value is never seen by the observer."""
        node = self.node(node_id)
        return (node.kind is NodeKind.CAUSAL
                and not node.info.is_known
                and self.data_node_of(node_id) is None)

    # Derived graphs

    def with_edges(self, edges: Iterable[tuple[str, str]]) -> "DesignGraph":
        return DesignGraph(self._nodes.values(), edges, self.population, self.name)

    def induced(self, node_ids: Iterable[str], *,
                population: str | None = None) -> "DesignGraph":
        keep = set(node_ids)
        self.check_known(keep)
        return DesignGraph(
            [n for i, n in self._nodes.items() if i in keep],
            [(a, b) for a, b in self._edges if a in keep and b in keep],
            population if population in keep else None,
            self.name,
        )


def validate(g: DesignGraph) -> ValidationReport:
    """
    Checks a graph candidate against the design-graph rules.

    Args:
        g: The candidate graph.

    Returns:
        ValidationReport: Every violated rule, ordered by rule id then ids.
    """
    nodes = g.nodes
    found: list[Violation] = []

    for a, b in sorted(g.edges):
        missing = tuple(sorted({a, b} - set(nodes)))
        if missing:
            found.append(Violation(
                "unknown-endpoint", (a, b),
                f"edge {a} -> {b} references unknown node(s) {', '.join(missing)}"))

    dag = g.digraph
    if not nx.is_directed_acyclic_graph(dag):
        cycle = nx.find_cycle(dag)
        ids = tuple(sorted({u for u, _ in cycle}))
        found.append(Violation("acyclicity", ids,
                               f"graph has a cycle through {', '.join(ids)}"))

    found.extend(_population_violations(g))

    for node_id, node in nodes.items():
        parents = sorted(dag.predecessors(node_id))
        if node.kind is NodeKind.DATA:
            kinds = sorted(nodes[p].kind.value for p in parents)
            if kinds != ["causal", "selection"]:
                found.append(Violation(
                    "data-node-parents", (node_id,),
                    f"data node {node_id} must have exactly one causal and one "
                    f"selection parent, has [{', '.join(parents)}]"))
            if node.info is not InfoAttr.OBSERVED:
                found.append(Violation(
                    "data-node-info", (node_id,),
                    f"data node {node_id} must be observed"))
        if node.kind is NodeKind.CAUSAL:
            measured = [c for c in dag.successors(node_id)
                        if nodes[c].kind is NodeKind.DATA]
            if len(measured) > 1:
                found.append(Violation(
                    "single-measurement", (node_id, *sorted(measured)),
                    f"causal node {node_id} is measured by several data nodes "
                    f"{', '.join(sorted(measured))}"))
        if node.shared_selection and node.kind is not NodeKind.SELECTION:
            found.append(Violation(
                "shared-selection", (node_id,),
                f"only selection nodes may be shared, {node_id} is {node.kind.value}"))
        if node.kind is NodeKind.SELECTION and node.values != BINARY_DOMAIN:
            found.append(Violation(
                "selection-domain", (node_id,),
                f"selection node {node_id} must have domain 0,1"))

    return ValidationReport(tuple(sorted(found)))


def _population_violations(g: DesignGraph) -> list[Violation]:
    nodes = g.nodes
    pop = g.population
    if pop is None or pop not in nodes:
        return [Violation("population-node", (pop,) if pop else (),
                          "no unique population node")]
    if nodes[pop].kind is not NodeKind.SELECTION:
        return [Violation("population-node", (pop,),
                          f"population node {pop} must be a selection node")]

    found = []
    dag = g.digraph
    sel_ancestors = sorted(a for a in nx.ancestors(dag, pop)
                           if nodes[a].kind is NodeKind.SELECTION)
    if sel_ancestors:
        found.append(Violation(
            "population-node", (pop, *sel_ancestors),
            f"population node {pop} has selection ancestors "
            f"{', '.join(sel_ancestors)}"))
    reached = nx.descendants(dag, pop)
    orphans = sorted(s for s in g.selection_nodes
                     if s != pop and s not in reached)
    if orphans:
        found.append(Violation(
            "population-node", (pop, *orphans),
            f"population node {pop} is not an ancestor of {', '.join(orphans)}"))
    return found


def assemble_graph(
        nodes: Iterable[Node],
        edges: Iterable[tuple[str, str]],
        population: str | None,
        name: str = "design",
) -> DesignGraph:
    """
    Builds and validates a design graph from declared parts.

    Selection nodes without a selection parent are attached to the
    population node, and missing stages are filled in (population 0,
    otherwise the largest parent stage).

    Raises:
        ValidationError: If the completed graph violates a rule.
    """
    nodes = list(nodes)
    edges = set(edges)
    by_id = {n.id: n for n in nodes}

    if population in by_id:
        for n in nodes:
            if n.kind is not NodeKind.SELECTION or n.id == population:
                continue
            has_sel_parent = any(
                b == n.id and a in by_id and by_id[a].kind is NodeKind.SELECTION
                for a, b in edges
            )
            if not has_sel_parent:
                edges.add((population, n.id))

    g = DesignGraph(nodes, edges, population, name)
    report = validate(g)
    if not report.is_valid:
        raise ValidationError(report)
    return _with_default_stages(g)


def _with_default_stages(g: DesignGraph) -> DesignGraph:
    stages: dict[str, int] = {}
    for v in g.topological_order():
        node = g.node(v)
        if node.stage is not None:
            stages[v] = node.stage
        elif v == g.population:
            stages[v] = 0
        else:
            stages[v] = max((stages[p] for p in g.parents(v)), default=0)
    nodes = [replace(n, stage=stages[i]) for i, n in g.nodes.items()]
    return DesignGraph(nodes, g.edges, g.population, g.name)


def ancestors(g: DesignGraph, node_ids: Iterable[str]) -> frozenset[str]:
    return g.ancestors(node_ids)


def descendants(g: DesignGraph, node_ids: Iterable[str]) -> frozenset[str]:
    return g.descendants(node_ids)


def surgery_remove_incoming(g: DesignGraph, node_ids: Iterable[str]) -> DesignGraph:
    """Returns a copy without the edges into ``node_ids`` (G with X overlined)."""
    cut = set(node_ids)
    g.check_known(cut)
    return g.with_edges((a, b) for a, b in g.edges if b not in cut)


def surgery_remove_outgoing(g: DesignGraph, node_ids: Iterable[str]) -> DesignGraph:
    """Returns a copy without the edges out of ``node_ids`` (G with Z underlined)."""
    cut = set(node_ids)
    g.check_known(cut)
    return g.with_edges((a, b) for a, b in g.edges if a not in cut)


def causal_projection(g: DesignGraph) -> DesignGraph:
    """
    Returns the subgraph induced by the causal nodes.

    Causal nodes measured by a data node become observed in the projection,
    since their data node records them.
    """
    nodes = []
    for node_id in g.causal_nodes:
        node = g.node(node_id)
        if g.data_node_of(node_id) is not None and not node.info.is_known:
            upgraded = (InfoAttr.DETERMINED_KNOWN if node.info.is_determined
                        else InfoAttr.OBSERVED)
            node = replace(node, info=upgraded)
        nodes.append(node)
    keep = set(g.causal_nodes)
    return DesignGraph(
        nodes,
        [(a, b) for a, b in g.edges if a in keep and b in keep],
        None,
        g.name,
    )
