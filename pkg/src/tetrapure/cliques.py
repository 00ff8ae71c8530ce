"""Maximal clique enumeration for small undirected graphs.

Bron-Kerbosch with pivoting. Inputs are label sets and undirected edges;
output is canonically ordered so callers get deterministic results.
"""

from __future__ import annotations

from typing import Collection, Iterable


def _neighbor_map(vertices: Collection[str], edges: Iterable[Collection[str]]) -> dict[str, set[str]]:
    nbrs: dict[str, set[str]] = {v: set() for v in vertices}
    for edge in edges:
        a, b = tuple(edge)
        if a == b:
            continue
        nbrs[a].add(b)
        nbrs[b].add(a)
    return nbrs


def maximal_cliques(
    vertices: Collection[str], edges: Iterable[Collection[str]]
) -> list[tuple[str, ...]]:
    """All maximal cliques, each once, as sorted tuples in sorted order.

    Isolated vertices are returned as singleton cliques.
    """
    nbrs = _neighbor_map(vertices, edges)
    out: list[tuple[str, ...]] = []

    def expand(r: set[str], p: set[str], x: set[str]) -> None:
        if not p and not x:
            out.append(tuple(sorted(r)))
            return
        pivot = max(p | x, key=lambda v: (len(nbrs[v] & p), v))
        for v in sorted(p - nbrs[pivot]):
            expand(r | {v}, p & nbrs[v], x & nbrs[v])
            p.remove(v)
            x.add(v)

    expand(set(), set(nbrs), set())
    return sorted(out)


def maximal_independent_sets(
    vertices: Collection[str], edges: Iterable[Collection[str]]
) -> list[tuple[str, ...]]:
    """Maximal independent sets, via cliques of the complement graph."""
    verts = sorted(vertices)
    nbrs = _neighbor_map(verts, edges)
    complement = [
        (a, b)
        for i, a in enumerate(verts)
        for b in verts[i + 1 :]
        if b not in nbrs[a]
    ]
    return maximal_cliques(verts, complement)
