# flow/instance_io.py
"""
Line-oriented instance and solution files (UTF-8).

Instance grammar::

    file      := header arc_line{M} commodity_line{K} [witness_block]
    header    := "nodes" N "arcs" M "commodities" K ["undirected"]
    arc_line  := tail head capacity
    commodity_line := origin destination demand
    witness_block  := "witness" NEWLINE path_line{K}
    path_line := arc_index (" " arc_index)*

Blank lines and lines starting with ``#`` are ignored. With the
``undirected`` flag each arc line is an edge and is expanded into two arcs,
``2i`` (tail→head) and ``2i+1`` (head→tail), each carrying the full
capacity; witness paths then refer to the expanded arc indices.

Solution grammar: K path lines, then ``# key value`` footer lines holding
the metrics.
"""

import math
from pathlib import Path as FsPath
from typing import Dict, Iterator, List, Optional, Tuple, Union

from flow.core import Commodity, Graph, Instance, Metrics, PathAssignment
from flow.errors import InstanceError

PathLike = Union[str, FsPath]


def format_number(value: float) -> str:
    """Integral values print without a decimal point; others use repr."""
    value = float(value)
    if value.is_integer():
        return str(int(value))
    return repr(value)


def _content_lines(text: str) -> Iterator[Tuple[int, str]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def _parse_number(token: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise InstanceError(f"line {lineno}: expected a number, got {token!r}") from None


def _parse_int(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise InstanceError(f"line {lineno}: expected an integer, got {token!r}") from None


def _parse_node(token: str, node_count: int, lineno: int) -> int:
    node = _parse_int(token, lineno)
    if not 0 <= node < node_count:
        raise InstanceError(f"line {lineno}: node {node} outside [0, {node_count})")
    return node


def parse_instance(text: str) -> Instance:
    lines = list(_content_lines(text))
    if not lines:
        raise InstanceError("empty instance file")

    lineno, header = lines[0]
    tokens = header.split()
    if len(tokens) not in (6, 7) or tokens[0:5:2] != ["nodes", "arcs", "commodities"]:
        raise InstanceError(f"line {lineno}: bad header {header!r}")
    undirected = len(tokens) == 7
    if undirected and tokens[6] != "undirected":
        raise InstanceError(f"line {lineno}: unknown header flag {tokens[6]!r}")
    n = _parse_int(tokens[1], lineno)
    m = _parse_int(tokens[3], lineno)
    k = _parse_int(tokens[5], lineno)

    body = lines[1:]
    if len(body) < m + k:
        raise InstanceError(f"expected {m} arc lines and {k} commodity lines, file is too short")

    arcs: List[Tuple[int, int]] = []
    caps: List[float] = []
    for lineno, line in body[:m]:
        parts = line.split()
        if len(parts) != 3:
            raise InstanceError(f"line {lineno}: arc line needs 'tail head capacity'")
        tail, head = _parse_node(parts[0], n, lineno), _parse_node(parts[1], n, lineno)
        cap = _parse_number(parts[2], lineno)
        if not 0 < cap < math.inf:
            raise InstanceError(f"line {lineno}: capacity must be positive and finite, got {parts[2]!r}")
        arcs.append((tail, head))
        caps.append(cap)
        if undirected:
            arcs.append((head, tail))
            caps.append(cap)

    commodities: List[Commodity] = []
    for lineno, line in body[m:m + k]:
        parts = line.split()
        if len(parts) != 3:
            raise InstanceError(f"line {lineno}: commodity line needs 'origin destination demand'")
        commodities.append(Commodity(
            origin=_parse_node(parts[0], n, lineno),
            destination=_parse_node(parts[1], n, lineno),
            demand=_parse_number(parts[2], lineno),
        ))

    rest = body[m + k:]
    witness: Optional[Tuple[Tuple[int, ...], ...]] = None
    if rest:
        lineno, marker = rest[0]
        if marker != "witness":
            raise InstanceError(f"line {lineno}: unexpected content {marker!r}")
        if len(rest) - 1 != k:
            raise InstanceError(f"witness block has {len(rest) - 1} paths for {k} commodities")
        witness = tuple(
            tuple(_parse_int(tok, ln) for tok in path_line.split())
            for ln, path_line in rest[1:]
        )

    graph = Graph(node_count=n, arcs=tuple(arcs), capacity=tuple(caps))
    return Instance(graph=graph, commodities=tuple(commodities), witness=witness)


def format_instance(instance: Instance) -> str:
    graph = instance.graph
    out = [f"nodes {graph.node_count} arcs {graph.arc_count} commodities {instance.commodity_count}"]
    for (tail, head), cap in zip(graph.arcs, graph.capacity):
        out.append(f"{tail} {head} {format_number(cap)}")
    for c in instance.commodities:
        out.append(f"{c.origin} {c.destination} {format_number(c.demand)}")
    if instance.witness is not None:
        out.append("witness")
        out.extend(" ".join(str(a) for a in path) for path in instance.witness)
    return "\n".join(out) + "\n"


def load_instance(path: PathLike) -> Instance:
    return parse_instance(FsPath(path).read_text(encoding="utf-8"))


def save_instance(instance: Instance, path: PathLike) -> None:
    FsPath(path).write_text(format_instance(instance), encoding="utf-8")


def format_solution(assignment: PathAssignment, metrics: Metrics,
                    extra: Optional[Dict[str, object]] = None) -> str:
    out = [" ".join(str(a) for a in path) for path in assignment.paths]
    footer: Dict[str, object] = {
        "overflow_sum": format_number(metrics.overflow_sum),
        "congestion": repr(float(metrics.congestion)),
        "overflow_ratio": repr(float(metrics.overflow_ratio)),
    }
    footer.update(extra or {})
    out.extend(f"# {key} {value}" for key, value in footer.items())
    return "\n".join(out) + "\n"


def save_solution(assignment: PathAssignment, metrics: Metrics, path: PathLike,
                  extra: Optional[Dict[str, object]] = None) -> None:
    FsPath(path).write_text(format_solution(assignment, metrics, extra), encoding="utf-8")


def load_solution(path: PathLike) -> Tuple[PathAssignment, Dict[str, str]]:
    paths: List[Tuple[int, ...]] = []
    footer: Dict[str, str] = {}
    text = FsPath(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(" ")
            footer[key] = value.strip()
            continue
        paths.append(tuple(_parse_int(tok, lineno) for tok in line.split()))
    return PathAssignment(paths=tuple(paths)), footer
