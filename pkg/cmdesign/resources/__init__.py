"""
Bundled design graphs and data.

Models live in ``models/<name>.dsl``, data sets in ``data/<name>.csv``.
"""

from importlib.resources import as_file, files
from pathlib import Path

from cmdesign.core.dsl import build_graph
from cmdesign.core.graph import DesignGraph
from cmdesign.errors import CmdesignError
from cmdesign.stats.frequency import FrequencyTable

MODELS = ("fig1a", "fig1b", "fig1c", "morgam", "trial", "nestedcc")
DATASETS = ("table1",)


def fixture_path(name: str) -> Path:
    """
    Locates a bundled fixture by name, with or without its extension.

    Raises:
        CmdesignError: If no fixture has that name.
    """
    stem = name.rsplit(".", 1)[0] if name.endswith((".dsl", ".csv")) else name
    if stem in MODELS:
        resource = files(__name__) / "models" / f"{stem}.dsl"
    elif stem in DATASETS:
        resource = files(__name__) / "data" / f"{stem}.csv"
    else:
        raise CmdesignError(f"no bundled fixture named {name!r}",
                            available=[*MODELS, *DATASETS])
    with as_file(resource) as path:
        return Path(path)


def load_fixture(name: str) -> DesignGraph | FrequencyTable:
    """Loads a bundled model as a DesignGraph or a data set as a FrequencyTable."""
    path = fixture_path(name)
    if path.suffix == ".csv":
        return FrequencyTable.read_csv(path)
    return build_graph(path.read_text(encoding="utf-8"))
