"""
Unit tests for settings persistence.

The autouse ``isolated_settings`` fixture points the settings file at a
temporary directory for every test.
"""

import json

from cmdesign import config
from cmdesign.main import run


class TestConfigManagement:
    """Test cases for configuration loading and persistence."""

    def test_save_and_load_settings(self):
        """
        Test that settings can be saved and loaded correctly.

        Verifies round-trip persistence and merging with defaults.
        """
        config.save_settings({"seed": 7, "multistart": 2})

        loaded = config.load_settings()

        assert loaded["seed"] == 7
        assert loaded["multistart"] == 2
        assert loaded["tolerance"] == config.DEFAULT_TOLERANCE

    def test_load_settings_returns_defaults_on_missing_file(self):
        """
        Test that default settings are returned when the settings file is
        missing.

        Verifies graceful fallback to defaults.
        """
        assert not config.SETTINGS_FILE.exists()
        assert config.load_settings() == config.get_default_settings()

    def test_load_settings_handles_invalid_json(self):
        """
        Test that invalid JSON is handled gracefully.

        Verifies recovery from a corrupted settings file.
        """
        config.CONFIG_DIR.mkdir(parents=True)
        config.SETTINGS_FILE.write_text("{invalid", encoding="utf-8")

        assert config.load_settings() == config.get_default_settings()

    def test_load_settings_rejects_non_object(self):
        """
        Test that a JSON list is not taken as settings.

        Verifies the object check.
        """
        config.CONFIG_DIR.mkdir(parents=True)
        config.SETTINGS_FILE.write_text("[1, 2]", encoding="utf-8")

        assert config.load_settings() == config.get_default_settings()

    def test_get_default_settings_returns_required_keys(self):
        """
        Test that default settings contain every key the commands read.

        Verifies that essential settings are always present.
        """
        defaults = config.get_default_settings()

        for key in ("max_iterations", "tolerance", "multistart", "seed",
                    "simulation_chunk_size", "render_x_spacing", "render_y_spacing"):
            assert key in defaults

    def test_render_spacing_from_settings(self, capsys, model_path):
        """
        Test that the render command reads its spacing from the settings.

        Verifies user overrides reach the command line.
        """
        run(["render", model_path("fig1a")])
        default_dot = capsys.readouterr().out
        config.save_settings({"render_x_spacing": 3.0})

        run(["render", model_path("fig1a")])
        wide_dot = capsys.readouterr().out

        assert default_dot != wide_dot
        assert json.loads(config.SETTINGS_FILE.read_text(encoding="utf-8")) == \
            {"render_x_spacing": 3.0}
