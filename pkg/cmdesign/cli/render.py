"""
DOT rendering of design graphs.

Causal time runs along the x axis and observational time (the stage) along
the y axis. Node glyphs encode the information attribute: circles for
random nodes and diamonds for determined ones, filled when the value is
known to the observer.
"""

from dataclasses import dataclass

import networkx as nx

from cmdesign.config import RENDER_X_SPACING, RENDER_Y_SPACING
from cmdesign.core.graph import DesignGraph, InfoAttr, NodeKind, causal_projection

GLYPHS = {
    InfoAttr.OBSERVED: ("circle", True),
    InfoAttr.NOT_OBSERVED: ("circle", False),
    InfoAttr.DETERMINED_KNOWN: ("diamond", True),
    InfoAttr.DETERMINED_UNKNOWN: ("diamond", False),
}


@dataclass(frozen=True)
class Placement:
    x: int
    y: int
    shape: str
    filled: bool


class RenderLayout:
    """Two-axis placement of every node of a design graph."""

    def __init__(self, g: DesignGraph) -> None:
        self.graph = g
        self.placements: dict[str, Placement] = {}
        layers = self._causal_layers(g)
        for v in g.topological_order():
            node = g.node(v)
            if node.kind is NodeKind.CAUSAL:
                x = layers[v]
            elif node.kind is NodeKind.DATA:
                x = layers[g.measurement(v)[0]]
            else:
                x = max((layers[g.value_source(p)] for p in g.non_selection_parents(v)),
                        default=0)
            shape, filled = GLYPHS[node.info]
            self.placements[v] = Placement(x, node.stage or 0, shape, filled)

    @staticmethod
    def _causal_layers(g: DesignGraph) -> dict[str, int]:
        """Longest-path layer of each causal node in the causal projection."""
        dag = causal_projection(g).digraph
        layers: dict[str, int] = {}
        for v in nx.topological_sort(dag):
            layers[v] = max((layers[p] + 1 for p in dag.predecessors(v)), default=0)
        return layers

    def __getitem__(self, node_id: str) -> Placement:
        return self.placements[node_id]


POINTS_PER_INCH = 72


def _quote(s: str) -> str:
    return '"%s"' % s.replace('"', r'\"')


def to_dot(
        g: DesignGraph,
        layout: RenderLayout | None = None,
        x_spacing: float = RENDER_X_SPACING,
        y_spacing: float = RENDER_Y_SPACING,
) -> str:
    """
    Writes the graph as DOT with pinned positions (lay out with ``neato -n``).

    Args:
        g: Design graph.
        layout: Precomputed layout; computed from ``g`` when omitted.
        x_spacing: Inches between causal layers.
        y_spacing: Inches between stages.
    """
    layout = layout or RenderLayout(g)
    lines = [f"digraph {_quote(g.name)} {{", "  node [fixedsize=true, width=0.6];"]
    for v in g.node_ids:
        p = layout[v]
        style = "filled" if p.filled else "solid"
        fill = ', fillcolor="gray80"' if p.filled else ""
        x = p.x * x_spacing * POINTS_PER_INCH
        # later stages below earlier ones
        y = -p.y * y_spacing * POINTS_PER_INCH
        pos = f"{x:g},{y:g}!"
        lines.append(f"  {_quote(v)} [shape={p.shape}, style={style}{fill}, "
                     f"pos={_quote(pos)}];")
    for a, b in sorted(g.edges):
        lines.append(f"  {_quote(a)} -> {_quote(b)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
