"""Measurement-pattern discovery over observed covariance constraints.

The procedure works on a compatibility graph whose vertices are the observed
variables. Starting complete, it (1) deletes edges between uncorrelated
pairs, (2) turns solid edges dotted when the pair cannot take part in any
one-factor quad, (3) deletes solid edges certified to cross clusters, then
(4) reads clusters off the maximal cliques of each solid component, restores
dotted pairs as impurity edges, and links pattern latents whose indicator
triples are certified to measure different factors.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .cliques import maximal_cliques
from .errors import ValidationError
from .oracle import ConstraintOracle, one_factor_quad, separation_combo, unclustered

__all__ = [
    "CompatibilityGraph",
    "MeasurementPattern",
    "build_compatibility_graph",
    "find_measurement_pattern",
    "maximal_cliques",
]


@dataclass(frozen=True)
class CompatibilityGraph:
    """Solid and dotted pair structure after the edge-pruning steps."""

    vertices: tuple[str, ...]
    solid_edges: frozenset[frozenset[str]]
    dotted_edges: frozenset[frozenset[str]]

    def __post_init__(self) -> None:
        if self.solid_edges & self.dotted_edges:
            raise ValidationError("an edge cannot be both solid and dotted")


@dataclass(frozen=True)
class MeasurementPattern:
    """Equivalence-class output of discovery.

    clusters map pattern latents to observed members (maximal cliques, so two
    clusters may overlap); impurity_edges are pairs that cannot survive
    together in any pure model; latent_links join pattern latents whose
    clusters are certified to measure distinct factors.
    """

    latents: tuple[str, ...]
    clusters: tuple[tuple[str, frozenset[str]], ...]
    impurity_edges: frozenset[frozenset[str]]
    latent_links: frozenset[frozenset[str]]
    retained: frozenset[str]
    dropped: frozenset[str]

    def cluster_map(self) -> dict[str, frozenset[str]]:
        return dict(self.clusters)

    def to_json_dict(self) -> dict:
        return {
            "latents": list(self.latents),
            "clusters": {latent: sorted(members) for latent, members in self.clusters},
            "impurity_edges": sorted(sorted(e) for e in self.impurity_edges),
            "latent_links": sorted(sorted(e) for e in self.latent_links),
            "retained": sorted(self.retained),
            "dropped": sorted(self.dropped),
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "MeasurementPattern":
        try:
            clusters = tuple(
                (latent, frozenset(members))
                for latent, members in sorted(doc["clusters"].items())
            )
            return cls(
                latents=tuple(doc["latents"]),
                clusters=clusters,
                impurity_edges=frozenset(frozenset(e) for e in doc.get("impurity_edges", [])),
                latent_links=frozenset(frozenset(e) for e in doc.get("latent_links", [])),
                retained=frozenset(doc.get("retained", itertools.chain.from_iterable(
                    doc["clusters"].values()))),
                dropped=frozenset(doc.get("dropped", [])),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed pattern document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "MeasurementPattern":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def build_compatibility_graph(
    labels: Sequence[str], oracle: ConstraintOracle
) -> CompatibilityGraph:
    """Run the three edge-pruning steps and return the resulting graph."""
    labels = list(labels)
    if len(labels) < 4:
        raise ValidationError(f"need at least 4 variables, got {len(labels)}")
    if len(set(labels)) != len(labels):
        raise ValidationError("duplicate variable labels")

    solid: set[frozenset[str]] = set()
    dotted: set[frozenset[str]] = set()
    correlated: dict[str, set[str]] = {v: set() for v in labels}

    # step 1: drop edges between uncorrelated pairs
    for x, y in itertools.combinations(labels, 2):
        if not oracle.vanishing_correlation(x, y):
            solid.add(frozenset((x, y)))
            correlated[x].add(y)
            correlated[y].add(x)

    # step 2: a solid pair that cannot join any one-factor quad becomes dotted
    for x, y in itertools.combinations(labels, 2):
        pair = frozenset((x, y))
        if pair not in solid:
            continue
        rest = [v for v in labels if v not in pair]
        witnessed = any(
            one_factor_quad((x, y, a, b), oracle)
            for a, b in itertools.combinations(rest, 2)
        )
        if not witnessed:
            solid.remove(pair)
            dotted.add(pair)

    # step 3: drop solid edges certified to cross clusters
    for x, y in itertools.combinations(labels, 2):
        pair = frozenset((x, y))
        if pair not in solid:
            continue
        if _crosses_clusters(x, y, labels, correlated, oracle):
            solid.remove(pair)

    return CompatibilityGraph(tuple(labels), frozenset(solid), frozenset(dotted))


def _crosses_clusters(
    x: str,
    y: str,
    labels: Sequence[str],
    correlated: Mapping[str, set[str]],
    oracle: ConstraintOracle,
) -> bool:
    """Search for disjoint witnesses {x,a,b}, {y,c,d} certified unclustered.

    Candidates are pruned to the correlated neighborhoods of x and y (any
    witness passing the correlated branch of the predicate needs all six
    variables mutually correlated, and x, y are correlated here since step 1
    ran, so the uncorrelated branch can never apply) and then by the
    pairwise cross comparison: a on x's side and c on y's side can appear in
    one witness only if the {x,a} vs {y,c} comparison passes. Pruning skips
    only witness sets the full predicate would reject at that comparison.
    """
    pool = sorted((correlated[x] & correlated[y]) - {x, y})
    partners: dict[str, set[str]] = {}
    for a in pool:
        good = {
            c for c in pool if c != a and separation_combo(x, a, y, c, oracle)
        }
        if good:
            partners[a] = good
    side_a = sorted(partners)
    for a, b in itertools.combinations(side_a, 2):
        if b not in correlated[a]:
            continue
        shared = sorted((partners[a] & partners[b]) - {a, b})
        for c, d in itertools.combinations(shared, 2):
            if d not in correlated[c]:
                continue
            if unclustered((x, a, b), (y, c, d), oracle):
                return True
    return False


def find_measurement_pattern(
    labels: Sequence[str],
    oracle: ConstraintOracle,
    link_on_uncorrelated: bool = True,
) -> MeasurementPattern:
    """Discover the measurement pattern of the given variables.

    link_on_uncorrelated controls whether two pattern latents whose indicator
    triples are mutually uncorrelated get linked (they are certified distinct
    factors); disabling it links only on the correlated branch of the
    certification predicate.
    """
    compat = build_compatibility_graph(labels, oracle)

    components = _solid_components(compat)
    clusters: list[frozenset[str]] = []
    for component in components:
        edges = [e for e in compat.solid_edges if e <= component]
        for clique in maximal_cliques(sorted(component), edges):
            if len(clique) >= 2:
                clusters.append(frozenset(clique))
    clusters.sort(key=lambda c: tuple(sorted(c)))

    latent_names = tuple(f"T{i + 1}" for i in range(len(clusters)))
    cluster_items = tuple(zip(latent_names, clusters))
    retained = frozenset(itertools.chain.from_iterable(clusters))
    dropped = frozenset(compat.vertices) - retained

    impurity_edges = frozenset(e for e in compat.dotted_edges if e <= retained)

    links: set[frozenset[str]] = set()
    for (name_a, members_a), (name_b, members_b) in itertools.combinations(cluster_items, 2):
        if _latents_linked(members_a, members_b, oracle, link_on_uncorrelated):
            links.add(frozenset((name_a, name_b)))

    return MeasurementPattern(
        latents=latent_names,
        clusters=cluster_items,
        impurity_edges=impurity_edges,
        latent_links=frozenset(links),
        retained=retained,
        dropped=dropped,
    )


def _solid_components(compat: CompatibilityGraph) -> list[set[str]]:
    nbrs: dict[str, set[str]] = {v: set() for v in compat.vertices}
    for e in compat.solid_edges:
        a, b = tuple(e)
        nbrs[a].add(b)
        nbrs[b].add(a)
    seen: set[str] = set()
    components: list[set[str]] = []
    for v in compat.vertices:
        if v in seen or not nbrs[v]:
            continue
        comp: set[str] = set()
        stack = [v]
        while stack:
            node = stack.pop()
            if node in comp:
                continue
            comp.add(node)
            stack.extend(nbrs[node] - comp)
        seen |= comp
        components.append(comp)
    return components


def _latents_linked(
    members_a: frozenset[str],
    members_b: frozenset[str],
    oracle: ConstraintOracle,
    link_on_uncorrelated: bool,
) -> bool:
    """First indicator-triple witness deciding whether two latents are linked."""
    for triple_a in itertools.combinations(sorted(members_a), 3):
        pool_b = sorted(members_b - set(triple_a))
        for triple_b in itertools.combinations(pool_b, 3):
            if not link_on_uncorrelated and _triples_uncorrelated(triple_a, triple_b, oracle):
                continue
            if unclustered(triple_a, triple_b, oracle):
                return True
    return False


def _triples_uncorrelated(
    t1: Iterable[str], t2: Iterable[str], oracle: ConstraintOracle
) -> bool:
    return all(oracle.vanishing_correlation(a, b) for a in t1 for b in t2)
