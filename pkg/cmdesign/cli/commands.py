"""
Subcommands of the ``cmdesign`` command line.

Each command is a thin adapter: it loads its inputs, calls the library and
writes the result to stdout (or ``--out``). Commands return the process exit
code; library errors propagate to ``cmdesign.main`` which maps them to exit
codes and, with ``--json``, to machine-readable error records on stderr.
"""

import argparse
import json
import logging
import re
import sys
from pathlib import Path
from typing import Any, Callable, TextIO

from cmdesign import __version__
from cmdesign.calculus.identify import identify
from cmdesign.calculus.latent import latent_project
from cmdesign.cli.render import to_dot
from cmdesign.config import load_settings
from cmdesign.core.dsl import build_graph, load_graph, serialize
from cmdesign.core.graph import DesignGraph, validate
from cmdesign.core.separation import CIQuery, d_separated
from cmdesign.core.transforms import (
    collapse_missingness,
    collapse_selection_diagram,
    missingness_witness,
)
from cmdesign.errors import (
    EXIT_INVALID,
    EXIT_NOT_IDENTIFIABLE,
    EXIT_OK,
    CmdesignError,
    ModelError,
    UsageError,
    ValidationError,
)
from cmdesign.stats.estimation import FitOptions, fit_mle
from cmdesign.stats.frequency import FrequencyTable
from cmdesign.stats.likelihood import factorize, marginalize
from cmdesign.stats.model import (
    LINEAR_BINARY,
    TABULAR,
    DiscreteModel,
    saturated_binary_parametrization,
    tabular_model,
)
from cmdesign.stats.simulate import SimSpec, expected_frequencies, simulate_dataset, write_metadata

logger = logging.getLogger(__name__)

_BARE_EFFECT = re.compile(r"^\s*do\(.*\)\s*$")


def _emit(text: str, out: str | None = None, stream: TextIO | None = None) -> None:
    """Writes text to ``out`` when given, else to stdout."""
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info("Wrote %s", out)
    else:
        (stream or sys.stdout).write(text)


def _emit_json(payload: Any, out: str | None = None) -> None:
    _emit(json.dumps(payload, indent=4) + "\n", out)


def _split(values: list[str]) -> list[str]:
    """Accepts both ``--a X Y`` and ``--a X,Y``."""
    return [v for item in values for v in item.split(",") if v]


def _build_model(g: DesignGraph, family: str, drop_ignorable: bool) -> DiscreteModel:
    if family == TABULAR:
        return tabular_model(g)
    return saturated_binary_parametrization(g, drop_ignorable=drop_ignorable)


def cmd_validate(args: argparse.Namespace) -> int:
    """Reports whether a graph file is a valid design graph."""
    text = Path(args.graph).read_text(encoding="utf-8")
    try:
        g = build_graph(text)
    except ValidationError as e:
        report = e.report
    else:
        report = validate(g)

    if args.json:
        _emit_json({**report.to_dict(), "version": __version__})
    elif report.is_valid:
        _emit("valid\n")
    else:
        _emit("".join(f"{v.rule}: {v.message}\n" for v in report.violations))
    return EXIT_OK if report.is_valid else EXIT_INVALID


def cmd_render(args: argparse.Namespace) -> int:
    """Writes the graph as DOT with the two-axis layout."""
    settings = load_settings()
    g = load_graph(args.graph)
    _emit(to_dot(g, x_spacing=settings["render_x_spacing"],
                 y_spacing=settings["render_y_spacing"]), args.out)
    return EXIT_OK


def cmd_identify(args: argparse.Namespace) -> int:
    """Identifies P(outcome | do(treat)) on the graph's causal part."""
    g = load_graph(args.graph)
    result = identify(latent_project(g), _split(args.treat), _split(args.outcome))
    if args.json:
        _emit_json({**result.to_dict(), "version": __version__})
    elif result.identifiable:
        _emit(result.expression.to_text() + "\n")
    else:
        _emit(f"not identifiable: hedge {{{', '.join(sorted(result.hedge))}}}, "
              f"component {{{', '.join(sorted(result.component))}}}\n")
    return EXIT_OK if result.identifiable else EXIT_NOT_IDENTIFIABLE


def cmd_ci(args: argparse.Namespace) -> int:
    """Answers a d-separation query."""
    g = load_graph(args.graph)
    query = CIQuery(_split(args.a), _split(args.b), _split(args.given or []))
    g.check_known(query.variables)
    separated = d_separated(g, query)
    if args.json:
        _emit_json({"query": str(query), "separated": separated, "version": __version__})
    else:
        _emit(("true" if separated else "false") + "\n")
    return EXIT_OK


def cmd_classify(args: argparse.Namespace) -> int:
    """Classifies the missingness of a recorded variable."""
    g = load_graph(args.graph)
    cls, path = missingness_witness(g, args.var)
    if args.json:
        _emit_json({"variable": args.var, "class": cls.value, "witness": path,
                    "version": __version__})
    else:
        witness = " - ".join(path) if path else "no open path"
        _emit(f"{cls.value}: {witness}\n")
    return EXIT_OK


def cmd_collapse(args: argparse.Namespace) -> int:
    """Collapses the graph to a missingness graph or a selection diagram."""
    g = load_graph(args.graph)
    if args.missingness:
        collapsed = collapse_missingness(g)
    else:
        name, sep, ids = args.selection_diagram.partition("=")
        if not sep or name.strip() != "S":
            raise CmdesignError(
                f"expected S=<id>,..., got {args.selection_diagram!r}")
        collapsed = collapse_selection_diagram(g, _split([ids]))
    _emit(serialize(collapsed), args.out)
    return EXIT_OK


def cmd_factorize(args: argparse.Namespace) -> int:
    """Prints the stratified likelihood factorization."""
    g = load_graph(args.graph)
    f = factorize(g)
    if args.marginalize:
        f = marginalize(f)
    if args.json:
        _emit_json({**f.to_dict(), "version": __version__})
    else:
        _emit(f.to_text() + "\n")
    return EXIT_OK


def _effect_labels(effects: list[str], outcome: str) -> list[str]:
    """Expands the shorthand ``do(X=1)`` to ``P(<outcome>|do(X=1))``."""
    return [f"P({outcome}|{e.strip()})" if _BARE_EFFECT.match(e) else e for e in effects]


def _given(value, default):
    """A command-line value when one was passed, zero included; the setting otherwise."""
    return default if value is None else value


def cmd_fit(args: argparse.Namespace) -> int:
    """Fits the model by maximum likelihood and prints the FitResult JSON."""
    settings = load_settings()
    g = load_graph(args.graph)
    g.require_unshared_selection()
    model = _build_model(g, args.family, drop_ignorable=not args.keep_ignorable)
    data = FrequencyTable.read_csv(args.data)
    options = FitOptions(
        max_iterations=_given(args.max_iterations, settings["max_iterations"]),
        tolerance=_given(args.tolerance, settings["tolerance"]),
        multistart=_given(args.multistart, settings["multistart"]),
        seed=_given(args.seed, settings["seed"]),
    )
    result = fit_mle(model, factorize(model.graph), data, options,
                     effects=_effect_labels(args.effects or [], args.outcome), design=g)
    _emit(result.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    """Simulates a population (or its exact expectation) and writes the CSV."""
    settings = load_settings()
    g = load_graph(args.graph)
    g.require_unshared_selection()
    model = _build_model(g, args.family, drop_ignorable=False)
    params = json.loads(Path(args.params).read_text(encoding="utf-8"))
    if not isinstance(params, dict):
        raise CmdesignError("parameter file must contain a JSON object")
    if not model.is_valid(params):
        raise ModelError("parameters are outside the valid region")

    if args.expected:
        table = expected_frequencies(model, params, args.n, cap=settings["enumeration_cap"])
        _emit(table.to_csv(), args.out)
        return EXIT_OK

    spec = SimSpec(
        model, params, args.n,
        seed=_given(args.seed, settings["seed"]),
        chunk_size=settings["simulation_chunk_size"],
    )
    _emit(simulate_dataset(spec).to_csv(), args.out)
    if args.out:
        write_metadata(Path(args.out).with_suffix(".meta.json"), spec)
    return EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "validate": cmd_validate,
    "render": cmd_render,
    "identify": cmd_identify,
    "ci": cmd_ci,
    "classify": cmd_classify,
    "collapse": cmd_collapse,
    "factorize": cmd_factorize,
    "fit": cmd_fit,
    "simulate": cmd_simulate,
}


def execute_command(command: str, args: argparse.Namespace) -> int:
    """
    Execute a subcommand by name.

    Args:
        command (str): Name of the subcommand.
        args (argparse.Namespace): Parsed command-line arguments.

    Returns:
        int: Process exit code.

    Raises:
        CmdesignError: If the command is unknown or the library fails.
    """
    handler = COMMANDS.get(command)
    if handler is None:
        raise CmdesignError(f"unknown command: {command}")
    logger.debug("Running %s on %s", command, getattr(args, "graph", None))
    return handler(args)


class CommandParser(argparse.ArgumentParser):
    """Parser whose errors raise UsageError instead of exiting."""

    def error(self, message: str):
        raise UsageError(message, self.format_usage())


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per command; subparsers inherit its class."""
    parser = CommandParser(
        prog="cmdesign",
        description="Causal models with design: identification, missingness "
                    "and likelihood analysis of study designs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress (-v) or debugging detail (-vv)")
    parser.add_argument("--json", action="store_true",
                        help="machine-readable output; errors go to stderr as JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("graph", help="design graph file (.dsl)")
        p.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                       help="machine-readable output")
        return p

    command("validate", "check a design graph")

    p = command("render", "write the graph as DOT")
    p.add_argument("--out", help="output file (default: stdout)")

    p = command("identify", "identify a causal effect")
    p.add_argument("--treat", nargs="+", required=True)
    p.add_argument("--outcome", nargs="+", required=True)

    p = command("ci", "d-separation query")
    p.add_argument("--a", nargs="+", required=True)
    p.add_argument("--b", nargs="+", required=True)
    p.add_argument("--given", nargs="*", default=[])

    p = command("classify", "classify the missingness of a variable")
    p.add_argument("--var", required=True)

    p = command("collapse", "collapse to a missingness graph or selection diagram")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--missingness", action="store_true")
    group.add_argument("--selection-diagram", metavar="S=ID,...")
    p.add_argument("--out", help="output file (default: stdout)")

    p = command("factorize", "print the stratified likelihood")
    p.add_argument("--marginalize", action="store_true",
                   help="eliminate barren variables and group summed blocks")

    p = command("fit", "maximum-likelihood fit to frequency data")
    p.add_argument("--data", required=True, help="frequency table (.csv)")
    p.add_argument("--effects", nargs="*",
                   help="effects such as 'P(Y=1|do(X=1))' or 'do(X=1)'")
    p.add_argument("--outcome", default="Y=1",
                   help="outcome for the do(...) shorthand (default: Y=1)")
    p.add_argument("--family", choices=(LINEAR_BINARY, TABULAR), default=LINEAR_BINARY)
    p.add_argument("--keep-ignorable", action="store_true",
                   help="keep ignorable selection factors in the model")
    p.add_argument("--seed", type=int)
    p.add_argument("--multistart", type=int)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--out", help="output file (default: stdout)")

    p = command("simulate", "simulate observed data from a parametrized model")
    p.add_argument("--params", required=True, help="parameter values (.json)")
    p.add_argument("--n", type=int, required=True, help="population size")
    p.add_argument("--seed", type=int)
    p.add_argument("--expected", action="store_true",
                   help="write exact expected counts instead of a sample")
    p.add_argument("--family", choices=(LINEAR_BINARY, TABULAR), default=LINEAR_BINARY)
    p.add_argument("--out", help="output CSV (metadata is written next to it)")

    return parser
