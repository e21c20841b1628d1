from __future__ import annotations

import itertools
import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from edstream.graph import MultiGraph  # noqa: E402

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def clique_edges(vertices) -> list[tuple[int, int]]:
    return list(itertools.combinations(list(vertices), 2))


def cliques(*sizes: int, bridges: tuple[tuple[int, int], ...] = ()) -> MultiGraph:
    edges, start = [], 0
    for s in sizes:
        edges += clique_edges(range(start, start + s))
        start += s
    return MultiGraph(start, edges + list(bridges))


def barbell(a: int, b: int, path: int = 0) -> MultiGraph:
    """Cliques on ``a`` and ``b`` vertices joined by a path with ``path`` inner vertices."""
    edges = clique_edges(range(a)) + clique_edges(range(a, a + b))
    chain = [a - 1] + list(range(a + b, a + b + path)) + [a]
    edges += list(zip(chain, chain[1:]))
    return MultiGraph(a + b + path, edges)


def pendant(core: int, blob: int) -> MultiGraph:
    """A clique with a small clique hanging off it by one edge."""
    edges = clique_edges(range(core)) + clique_edges(range(core, core + blob)) + [(0, core)]
    return MultiGraph(core + blob, edges)


def cycle(n: int) -> MultiGraph:
    return MultiGraph(n, [(i, (i + 1) % n) for i in range(n)])


def path(n: int) -> MultiGraph:
    return MultiGraph(n, [(i, i + 1) for i in range(n - 1)])


def star(leaves: int) -> MultiGraph:
    return MultiGraph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def grid(rows: int, cols: int) -> MultiGraph:
    edges = []
    for i in range(rows):
        for j in range(cols):
            v = i * cols + j
            if j + 1 < cols:
                edges.append((v, v + 1))
            if i + 1 < rows:
                edges.append((v, v + cols))
    return MultiGraph(rows * cols, edges)


def ring_of_cliques(k: int, size: int) -> MultiGraph:
    g = cliques(*([size] * k))
    links = [(i * size + size - 1, ((i + 1) % k) * size) for i in range(k)]
    return MultiGraph(k * size, list(g.edges) + links)


def heavy_pendant(core: int, mult: int, blob_mult: int) -> MultiGraph:
    """A clique with every edge ``mult`` times, and a two-vertex blob (inner multiplicity ``blob_mult``) on one edge."""
    edges = {e: mult for e in clique_edges(range(core))}
    edges[(core, core + 1)] = blob_mult
    edges[(0, core)] = 1
    return MultiGraph(core + 2, edges)


def structured_battery() -> list[tuple[str, MultiGraph]]:
    """Twenty structured graphs on at most 48 vertices."""
    double_bridge = {e: 1 for e in clique_edges(range(5)) + clique_edges(range(5, 10))}
    double_bridge[(4, 5)] = 2
    return [
        ("K5+K5", cliques(5, 5)),
        ("K8-K8", cliques(8, 8, bridges=((7, 8),))),
        ("3xK4", cliques(4, 4, 4)),
        ("barbell6", barbell(6, 6)),
        ("barbell5p2", barbell(5, 5, 2)),
        ("barbell8p3", barbell(8, 8, 3)),
        ("pendant8-3", pendant(8, 3)),
        ("pendant10-4", pendant(10, 4)),
        ("chain3xK6", cliques(6, 6, 6, bridges=((5, 6), (11, 12)))),
        ("K12-K12", cliques(12, 12, bridges=((0, 12),))),
        ("3xK16", cliques(16, 16, 16)),
        ("ring4xK6", ring_of_cliques(4, 6)),
        ("K20", cliques(20)),
        ("chain4xK10", cliques(10, 10, 10, 10, bridges=((9, 10), (19, 20), (29, 30)))),
        ("barbell12p4", barbell(12, 12, 4)),
        ("path12", path(12)),
        ("cycle16", cycle(16)),
        ("grid4x4", grid(4, 4)),
        ("K5=K5", MultiGraph(10, double_bridge)),
        ("heavy-pendant", heavy_pendant(8, 13, 8)),
    ]
