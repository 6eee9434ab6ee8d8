"""
Line-oriented text format for design graphs.

    graph <name>
    population <id>
    node <id> kind=(causal|selection) info=(observed|unobserved|det-known|det-unknown)
         [domain=v1,v2,...] [stage=<int>] [shared]
    measure <id> : <causal-id> by <selection-id> [stage=<int>]
    edge <id> -> <id>

``#`` starts a comment. The canonical form written by ``serialize`` lists
statements in that order with ids sorted, and parses back to an equal graph.
"""

import logging
from pathlib import Path
from typing import Callable, NamedTuple, Sequence, TypeVar

from funcparserlib.lexer import LexerError, Token, TokenSpec, make_tokenizer
from funcparserlib.parser import (
    NoParseError,
    Parser,
    finished,
    many,
    maybe,
    oneplus,
    some,
    tok,
)

from cmdesign.core.graph import DesignGraph, InfoAttr, Node, NodeKind, assemble_graph
from cmdesign.errors import ParseError

logger = logging.getLogger(__name__)

T = TypeVar("T")

ENCODING = "UTF-8"
DEFAULT_NAME = "design"


class Attr(NamedTuple):
    name: Token
    values: list[Token] | None


class GraphStmt(NamedTuple):
    name: Token


class PopulationStmt(NamedTuple):
    id: Token


class NodeStmt(NamedTuple):
    id: Token
    attrs: list[Attr]


class MeasureStmt(NamedTuple):
    id: Token
    causal: Token
    selection: Token
    attrs: list[Attr]


class EdgeStmt(NamedTuple):
    source: Token
    target: Token


Statement = GraphStmt | PopulationStmt | NodeStmt | MeasureStmt | EdgeStmt


def tokenize(s: str) -> list[Token]:
    specs = [
        TokenSpec("Comment", r"#.*"),
        TokenSpec("NL", r"[\r\n]+"),
        TokenSpec("Space", r"[ \t]+"),
        TokenSpec("Op", r"->|[:=,]"),
        TokenSpec("Number", r"-?[0-9]+(\.[0-9]+)?"),
        TokenSpec("Name", r"[A-Za-z_\u0080-\uffff](?:[A-Za-z0-9_\u0080-\uffff*']|-(?!>))*"),
    ]
    useless = ["Comment", "Space"]
    t = make_tokenizer(specs)
    return [x for x in t(s) if x.type not in useless]


def parse(tokens: Sequence[Token]) -> list[Statement]:
    def un_arg(f: Callable[..., T]) -> Callable[[tuple], T]:
        return lambda args: f(*args)

    def kw(s: str) -> Parser[Token, str]:
        return tok("Name", s)

    def op(s: str) -> Parser[Token, str]:
        return tok("Op", s)

    ident = some(lambda t: t.type == "Name").named("identifier")
    value = some(lambda t: t.type in ("Name", "Number")).named("value")
    nl = tok("NL")

    value_list = value + many(-op(",") + value) >> (lambda a: [a[0], *a[1]])
    attr = ident + maybe(-op("=") + value_list) >> un_arg(Attr)

    graph_stmt = -kw("graph") + ident >> GraphStmt
    population_stmt = -kw("population") + ident >> PopulationStmt
    node_stmt = -kw("node") + ident + many(attr) >> un_arg(NodeStmt)
    measure_stmt = (
        -kw("measure") + ident + -op(":") + ident + -kw("by") + ident + many(attr)
        >> un_arg(MeasureStmt)
    )
    edge_stmt = -kw("edge") + ident + -op("->") + ident >> un_arg(EdgeStmt)

    stmt = graph_stmt | population_stmt | node_stmt | measure_stmt | edge_stmt
    stmt_list = maybe(stmt + many(-oneplus(nl) + stmt)) >> (
        lambda a: [] if a is None else [a[0], *a[1]]
    )
    document = -many(nl) + stmt_list + -many(nl) + -finished

    return document.parse(list(tokens))


def build_graph(text: str) -> DesignGraph:
    """
    Parses DSL text into a validated design graph.

    Raises:
        ParseError: On lexical, syntactic or declaration errors.
        ValidationError: If the declared graph violates a design-graph rule.
    """
    try:
        tokens = tokenize(text)
    except LexerError as e:
        line, column = e.place
        raise ParseError(f"unexpected character: {e.msg!r}", line, column) from None

    try:
        statements = parse(tokens)
    except NoParseError as e:
        line = column = None
        state = getattr(e, "state", None)
        pos = getattr(state, "max", None)
        if pos is not None and 0 <= pos < len(tokens) and tokens[pos].start:
            line, column = tokens[pos].start
        raise ParseError(str(e), line, column) from None

    return _assemble(statements)


def load_graph(path: str | Path) -> DesignGraph:
    """Reads and builds a graph from a ``.dsl`` file."""
    text = Path(path).read_text(encoding=ENCODING)
    return build_graph(text)


def _fail(message: str, token: Token) -> ParseError:
    line, column = token.start if token.start else (None, None)
    return ParseError(message, line, column)


def _convert(token: Token) -> int | float | str:
    if token.type == "Number":
        return float(token.value) if "." in token.value else int(token.value)
    return token.value


def _single(attr: Attr) -> Token:
    if not attr.values or len(attr.values) != 1:
        raise _fail(f"attribute {attr.name.value!r} takes one value", attr.name)
    return attr.values[0]


def _stage(attr: Attr) -> int:
    token = _single(attr)
    value = _convert(token)
    if not isinstance(value, int) or value < 0:
        raise _fail("stage must be a non-negative integer", token)
    return value


def _node_from_stmt(stmt: NodeStmt) -> Node:
    kind = info = domain = stage = None
    shared = False
    for attr in stmt.attrs:
        name = attr.name.value
        if name == "kind":
            token = _single(attr)
            if token.value not in ("causal", "selection"):
                raise _fail(f"kind must be causal or selection, got {token.value!r}",
                            token)
            kind = NodeKind(token.value)
        elif name == "info":
            token = _single(attr)
            try:
                info = InfoAttr(token.value)
            except ValueError:
                raise _fail(f"unknown info attribute {token.value!r}", token) from None
        elif name == "domain":
            if not attr.values:
                raise _fail("domain needs at least one value", attr.name)
            domain = tuple(_convert(v) for v in attr.values)
            if len(set(domain)) != len(domain):
                raise _fail("domain values must be distinct", attr.name)
        elif name == "stage":
            stage = _stage(attr)
        elif name == "shared":
            if attr.values is not None:
                raise _fail("shared is a flag and takes no value", attr.name)
            shared = True
        else:
            raise _fail(f"unknown attribute {name!r}", attr.name)

    if kind is None:
        raise _fail(f"node {stmt.id.value} needs kind=", stmt.id)
    if info is None:
        raise _fail(f"node {stmt.id.value} needs info=", stmt.id)
    return Node(stmt.id.value, kind, info, domain, stage, shared)


def _assemble(statements: list[Statement]) -> DesignGraph:
    name = DEFAULT_NAME
    population: Token | None = None
    nodes: dict[str, Node] = {}
    edges: set[tuple[str, str]] = set()

    def declare(node: Node, token: Token) -> None:
        if node.id in nodes:
            raise _fail(f"node {node.id} declared twice", token)
        nodes[node.id] = node

    for stmt in statements:
        if isinstance(stmt, GraphStmt):
            name = stmt.name.value
        elif isinstance(stmt, PopulationStmt):
            if population is not None:
                raise _fail("population declared twice", stmt.id)
            population = stmt.id
        elif isinstance(stmt, NodeStmt):
            declare(_node_from_stmt(stmt), stmt.id)
        elif isinstance(stmt, MeasureStmt):
            stage = None
            for attr in stmt.attrs:
                if attr.name.value != "stage":
                    raise _fail(f"measure takes only stage=, got {attr.name.value!r}",
                                attr.name)
                stage = _stage(attr)
            declare(Node(stmt.id.value, NodeKind.DATA, InfoAttr.OBSERVED, stage=stage),
                    stmt.id)
            edges.add((stmt.causal.value, stmt.id.value))
            edges.add((stmt.selection.value, stmt.id.value))
        elif isinstance(stmt, EdgeStmt):
            edges.add((stmt.source.value, stmt.target.value))

    pop_id = None
    if population is not None:
        pop_id = population.value
        if pop_id not in nodes:
            nodes[pop_id] = Node(pop_id, NodeKind.SELECTION, InfoAttr.DETERMINED_KNOWN)

    logger.debug("Assembling graph %s: %d nodes, %d edges", name, len(nodes), len(edges))
    return assemble_graph(nodes.values(), edges, pop_id, name)


def _format_values(values: tuple) -> str:
    return ",".join(str(v) for v in values)


def serialize(g: DesignGraph) -> str:
    """Writes the canonical DSL form of a graph."""
    lines = [f"graph {g.name}"]
    if g.population is not None:
        lines.append(f"population {g.population}")

    measurement_edges = set()
    for node_id, node in g.nodes.items():
        if node.kind is NodeKind.DATA:
            continue
        parts = [f"node {node_id}", f"kind={node.kind.value}", f"info={node.info.value}"]
        if node.domain is not None:
            parts.append(f"domain={_format_values(node.domain)}")
        if node.stage is not None:
            parts.append(f"stage={node.stage}")
        if node.shared_selection:
            parts.append("shared")
        lines.append(" ".join(parts))

    for node_id in g.data_nodes:
        causal, selection = g.measurement(node_id)
        measurement_edges |= {(causal, node_id), (selection, node_id)}
        stage = g.node(node_id).stage
        suffix = f" stage={stage}" if stage is not None else ""
        lines.append(f"measure {node_id} : {causal} by {selection}{suffix}")

    for a, b in sorted(g.edges - measurement_edges):
        lines.append(f"edge {a} -> {b}")
    return "\n".join(lines) + "\n"
