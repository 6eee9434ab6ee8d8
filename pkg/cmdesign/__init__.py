"""
cmdesign - Causal models with design.

Describes a study's causal assumptions, sampling design and missing-data
mechanism in one graph, and answers identification, d-separation,
missingness and likelihood questions directly from it.
"""

__version__ = "0.1.0"
__author__ = "Rainer Vana"

from cmdesign.config import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_MULTISTART,
    DEFAULT_SEED,
    DEFAULT_TOLERANCE,
    ENUMERATION_CAP,
)

__all__ = [
    "DEFAULT_MAX_ITERATIONS",
    "DEFAULT_MULTISTART",
    "DEFAULT_SEED",
    "DEFAULT_TOLERANCE",
    "ENUMERATION_CAP",
]
