"""
Configuration constants, default settings, and settings persistence for cmdesign.

This module defines the numerical defaults used by enumeration, fitting,
simulation and rendering, and handles loading/saving user overrides to a
JSON file read by the command-line front end.
"""

import json
import logging
from pathlib import Path

logger = logging.getLogger(__name__)

# Enumeration
ENUMERATION_CAP = 2 ** 20

# Maximum likelihood
DEFAULT_MAX_ITERATIONS = 20000
DEFAULT_TOLERANCE = 1e-9
DEFAULT_MULTISTART = 4
DEFAULT_SEED = 20240101
MAX_INTERIOR_DRAWS = 1000
# Nelder-Mead: simplex size at convergence and evaluations per parameter
SIMPLEX_XATOL = 1e-8
EVALUATIONS_PER_PARAMETER = 1000
# log-barrier weight of the first restart, shrunk by BARRIER_DECAY per restart
# and dropped once below BARRIER_FLOOR
BARRIER_START = 1.0
BARRIER_DECAY = 1e-2
BARRIER_FLOOR = 1e-7

# Simulation
SIMULATION_CHUNK_SIZE = 65536
RNG_ALGORITHM = "numpy.random.Philox"

# Rendering (inches per causal layer / stage)
RENDER_X_SPACING = 1.5
RENDER_Y_SPACING = 1.0

CONFIG_DIR = Path.home() / ".config" / "cmdesign"
SETTINGS_FILE = CONFIG_DIR / "settings.json"


def get_default_settings() -> dict:
    """Returns a dictionary of the default application settings."""
    return {
        "enumeration_cap": ENUMERATION_CAP,
        "max_iterations": DEFAULT_MAX_ITERATIONS,
        "tolerance": DEFAULT_TOLERANCE,
        "multistart": DEFAULT_MULTISTART,
        "seed": DEFAULT_SEED,
        "simulation_chunk_size": SIMULATION_CHUNK_SIZE,
        "render_x_spacing": RENDER_X_SPACING,
        "render_y_spacing": RENDER_Y_SPACING,
    }


def load_settings() -> dict:
    """
    Loads user settings from the JSON file.

    If the file doesn't exist or is invalid, returns default settings.
    Merges loaded settings with defaults to handle missing keys.
    """
    defaults = get_default_settings()
    if not SETTINGS_FILE.is_file():
        return defaults

    try:
        with open(SETTINGS_FILE, "r", encoding="utf-8") as f:
            user_settings = json.load(f)
        if not isinstance(user_settings, dict):
            raise ValueError("settings file must contain a JSON object")

        defaults.update(user_settings)
        return defaults
    except (json.JSONDecodeError, ValueError, OSError) as e:
        logger.warning("Error loading settings: %s. Using defaults.", e)
        return get_default_settings()


def save_settings(settings: dict) -> None:
    """
    Saves the provided settings dictionary to the JSON file.

    Args:
        settings: The dictionary of settings to save.
    """
    try:
        CONFIG_DIR.mkdir(parents=True, exist_ok=True)
        with open(SETTINGS_FILE, "w", encoding="utf-8") as f:
            json.dump(settings, f, indent=4)
    except OSError as e:
        logger.error("Error saving settings: %s", e)
