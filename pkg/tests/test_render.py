"""
Unit tests for the two-axis DOT rendering.
"""

from cmdesign.cli.render import RenderLayout, to_dot


class TestRenderLayout:
    """Test cases for node placement and glyphs."""

    def test_causal_layers(self, fig1c):
        """
        Test that causal nodes sit on their longest-path layer.

        Verifies the x axis of the front-door variables.
        """
        layout = RenderLayout(fig1c)

        assert [layout[v].x for v in ("U", "X", "Z", "Y")] == [0, 1, 2, 3]
        assert all(layout[v].y == 0 for v in ("U", "X", "Z", "Y"))

    def test_data_and_selection_nodes(self, fig1c):
        """
        Test that data nodes follow their variable and selections their
        latest input, both at their stage.

        Verifies placements off the causal axis.
        """
        layout = RenderLayout(fig1c)

        assert (layout["Y*"].x, layout["Y*"].y) == (3, 1)
        assert (layout["X*"].x, layout["X*"].y) == (1, 2)
        assert (layout["m2"].x, layout["m2"].y) == (3, 2)
        assert (layout["m1"].x, layout["m1"].y) == (0, 1)

    def test_glyphs(self, fig1c, morgam):
        """
        Test that shapes and fill encode the information attribute.

        Verifies latent, observed and determined nodes.
        """
        layout = RenderLayout(fig1c)

        assert (layout["U"].shape, layout["U"].filled) == ("circle", False)
        assert (layout["X"].shape, layout["X"].filled) == ("circle", True)
        assert (layout["m1"].shape, layout["m1"].filled) == ("diamond", True)
        assert RenderLayout(morgam)["M0"].filled is False


class TestToDot:
    """Test cases for the DOT text."""

    def test_positions_in_points(self, fig1c):
        """
        Test that positions are pinned in points, later stages lower.

        Verifies the spacing conversion.
        """
        dot = to_dot(fig1c, x_spacing=1.5, y_spacing=1.0)

        assert '"U" [shape=circle, style=solid, pos="0,0!"];' in dot
        assert '"m2" [shape=diamond, style=filled, fillcolor="gray80", pos="324,-144!"];' in dot

    def test_edges_listed(self, fig1a):
        """
        Test that every edge appears once.

        Verifies the edge statements.
        """
        dot = to_dot(fig1a)

        assert dot.count(" -> ") == len(fig1a.edges)
        assert '"X" -> "Z";' in dot
        assert dot.endswith("}\n")
