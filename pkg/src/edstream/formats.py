"""Line-oriented text formats for graphs, streams, partitions and reports."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .graph import Graph, GraphError, MultiGraph, Partition, WeightedGraph
from .sketch import StreamError, StreamUpdate


class FormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")


def _lines(text: str) -> Iterable[tuple[int, list[str]]]:
    for no, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if body:
            yield no, body.split()


def _num(tok: str, weighted: bool, no: int) -> float | int:
    try:
        if weighted:
            x = float(tok)
            if not math.isfinite(x):
                raise ValueError
            return x
        return int(tok)
    except ValueError:
        raise FormatError(f"bad number {tok!r}", no) from None


def _fmt_num(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def parse_graph(text: str, weighted: bool = False) -> Graph:
    n = None
    edges: dict[tuple[int, int], float] = {}
    loops: dict[int, float] = {}
    for no, tok in _lines(text):
        head = tok[0]
        if head == "n":
            if n is not None or len(tok) != 2:
                raise FormatError("duplicate or malformed header", no)
            n = _num(tok[1], False, no)
        elif n is None:
            raise FormatError("graph must start with `n <count>`", no)
        elif head == "e":
            if len(tok) not in (3, 4):
                raise FormatError("expected `e u v [mult]`", no)
            u, v = _num(tok[1], False, no), _num(tok[2], False, no)
            x = _num(tok[3], weighted, no) if len(tok) == 4 else (1.0 if weighted else 1)
            if u == v:
                raise FormatError("use `loop v` for self-loops", no)
            key = (min(u, v), max(u, v))
            edges[key] = edges.get(key, 0) + x
        elif head == "loop":
            if len(tok) not in (2, 3):
                raise FormatError("expected `loop v [count]`", no)
            v = _num(tok[1], False, no)
            x = _num(tok[2], weighted, no) if len(tok) == 3 else (1.0 if weighted else 1)
            loops[v] = loops.get(v, 0) + x
        else:
            raise FormatError(f"unknown record {head!r}", no)
    if n is None:
        raise FormatError("missing `n <count>` header")
    try:
        if weighted:
            return WeightedGraph(n, edges, loops)
        return MultiGraph(n, edges, loops)
    except GraphError as exc:
        raise FormatError(str(exc)) from exc


def format_graph(g: Graph) -> str:
    out = [f"n {g.n}"]
    for (u, v), x in g.edges.items():
        out.append(f"e {u} {v}" if x == 1 and isinstance(g, MultiGraph) else f"e {u} {v} {_fmt_num(x)}")
    for v, x in g.loops.items():
        out.append(f"loop {v}" if x == 1 and isinstance(g, MultiGraph) else f"loop {v} {_fmt_num(x)}")
    return "\n".join(out) + "\n"


def parse_stream(text: str) -> tuple[int | None, list[StreamUpdate]]:
    """Updates plus the optional ``n <count>`` header value."""
    n = None
    ups: list[StreamUpdate] = []
    for no, tok in _lines(text):
        if tok[0] == "n" and len(tok) == 2 and not ups and n is None:
            n = _num(tok[1], False, no)
            continue
        if len(tok) != 3 or tok[0] not in "+-":
            raise FormatError("expected `+ u v` or `- u v`", no)
        try:
            ups.append(StreamUpdate(tok[0], _num(tok[1], False, no), _num(tok[2], False, no)))
        except StreamError as exc:
            raise FormatError(str(exc), no) from exc
    return n, ups


def format_stream(updates: Sequence[StreamUpdate], n: int | None = None) -> str:
    out = [] if n is None else [f"n {n}"]
    out.extend(f"{x.op} {x.u} {x.v}" for x in updates)
    return "\n".join(out) + "\n"


def stream_vertex_count(n: int | None, updates: Sequence[StreamUpdate]) -> int:
    top = max((max(x.u, x.v) for x in updates), default=-1) + 1
    if n is None:
        return top
    if top > n:
        raise FormatError(f"stream mentions vertex {top - 1} but declares n = {n}")
    return n


def format_partition(p: Partition, summary: Mapping[str, object] | None = None) -> str:
    out = [f"n {p.n}"]
    out.extend(f"cluster {i}: {' '.join(map(str, c))}" for i, c in enumerate(p.clusters))
    if summary:
        out.append(format_report(summary).rstrip("\n"))
    return "\n".join(out) + "\n"


def parse_partition(text: str, n: int | None = None) -> Partition:
    clusters = []
    declared = None
    for no, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if not body or "=" in body.split(":", 1)[0]:
            continue
        if body.startswith("n "):
            declared = _num(body.split()[1], False, no)
        elif body.startswith("cluster"):
            if ":" not in body:
                raise FormatError("expected `cluster <id>: v ...`", no)
            clusters.append(tuple(_num(t, False, no) for t in body.split(":", 1)[1].split()))
        else:
            raise FormatError(f"unknown record {body!r}", no)
    size = declared if declared is not None else n
    if size is None:
        size = max((max(c) for c in clusters if c), default=-1) + 1
    if n is not None and size != n:
        raise FormatError(f"partition is over {size} vertices, graph has {n}")
    try:
        return Partition(size, tuple(clusters))
    except GraphError as exc:
        raise FormatError(str(exc)) from exc


def format_partitions(parts: Sequence[Partition]) -> str:
    out = []
    for i, p in enumerate(parts, 1):
        out.append(f"level {i}")
        out.append(format_partition(p).rstrip("\n"))
    return "\n".join(out) + "\n"


def parse_partitions(text: str, n: int | None = None) -> list[Partition]:
    chunks: list[list[str]] = []
    for raw in text.splitlines():
        if raw.strip().startswith("level"):
            chunks.append([])
        elif chunks:
            chunks[-1].append(raw)
        elif raw.split("#", 1)[0].strip():
            raise FormatError("expected `level <i>` before partition data")
    return [parse_partition("\n".join(c), n) for c in chunks]


def _fmt_value(x: object) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    if isinstance(x, (list, tuple)):
        return ",".join(_fmt_value(y) for y in x)
    return str(x)


def format_report(fields: Mapping[str, object]) -> str:
    out = []
    for k, v in fields.items():
        if " " in k or "=" in k:
            raise FormatError(f"bad report key {k!r}")
        out.append(f"{k}={_fmt_value(v)}")
    return "\n".join(out) + "\n"


def parse_report(text: str) -> dict[str, str]:
    out = {}
    for raw in text.splitlines():
        if "=" in raw:
            k, v = raw.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def read_text(path: str | Path) -> str:
    return Path(path).read_text()


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text)
