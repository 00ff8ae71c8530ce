"""Purification of measurement patterns and measurement-model equivalence.

Purifying a pattern keeps a maximum clique of linked pattern latents, then
enumerates the maximal ways to delete observed variables so that no impurity
pair survives, every surviving variable sits in exactly one surviving
cluster, and every surviving cluster keeps enough children.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable

from .cliques import maximal_cliques, maximal_independent_sets
from .errors import GuardExceededError, ValidationError
from .graphs import PureMeasurementModel
from .pattern import MeasurementPattern

#: Refuse to enumerate when more variables than this are entangled in conflicts.
CONFLICT_VERTEX_GUARD = 25


@dataclass(frozen=True)
class ImpurityConflictGraph:
    """Pairs of retained variables that cannot co-exist in one pure solution."""

    vertices: tuple[str, ...]
    conflict_edges: frozenset[frozenset[str]]


def _maximum_latent_cliques(pattern: MeasurementPattern) -> list[tuple[str, ...]]:
    if not pattern.latents:
        return []
    cliques = maximal_cliques(pattern.latents, pattern.latent_links)
    top = max(len(c) for c in cliques)
    return [c for c in cliques if len(c) == top]


def conflict_graph_for_clique(
    pattern: MeasurementPattern, clique: Iterable[str]
) -> tuple[ImpurityConflictGraph, dict[str, str]]:
    """Conflict structure for one latent clique.

    Returns the conflict graph over this clique's usable variables plus the
    variable -> cluster assignment. Variables claimed by two clusters of the
    clique are excluded up front: they cannot belong to exactly one cluster.
    """
    chosen = set(clique)
    cluster_map = {name: members for name, members in pattern.clusters if name in chosen}
    claims: dict[str, list[str]] = {}
    for name, members in sorted(cluster_map.items()):
        for obs in members:
            claims.setdefault(obs, []).append(name)
    assignment = {obs: names[0] for obs, names in claims.items() if len(names) == 1}
    vertices = tuple(sorted(assignment))
    conflicts = frozenset(
        e for e in pattern.impurity_edges if e <= set(vertices)
    )
    return ImpurityConflictGraph(vertices, conflicts), assignment


def purify_pattern(
    pattern: MeasurementPattern,
    min_children: int = 3,
    max_conflict_vertices: int = CONFLICT_VERTEX_GUARD,
) -> set[PureMeasurementModel]:
    """All maximal pure measurement models represented by the pattern.

    Every maximum clique of linked latents is processed and the solutions are
    merged. Within one clique, maximal conflict-free variable sets are
    enumerated; clusters falling below min_children are then dropped whole,
    since a cluster kept with fewer children is never allowed. An empty
    result is a diagnostic (nothing satisfiable), not an error.
    """
    if min_children < 2:
        raise ValidationError("min_children must be at least 2")
    solutions: dict[frozenset[frozenset[str]], PureMeasurementModel] = {}
    for clique in _maximum_latent_cliques(pattern):
        graph, assignment = conflict_graph_for_clique(pattern, clique)
        entangled = {v for e in graph.conflict_edges for v in e}
        if len(entangled) > max_conflict_vertices:
            raise GuardExceededError(
                f"{len(entangled)} variables are entangled in impurity conflicts "
                f"(guard: {max_conflict_vertices})"
            )
        for members in maximal_independent_sets(graph.vertices, graph.conflict_edges):
            grouped: dict[str, set[str]] = {}
            for obs in members:
                grouped.setdefault(assignment[obs], set()).add(obs)
            kept = {
                name: frozenset(group)
                for name, group in grouped.items()
                if len(group) >= min_children
            }
            if not kept:
                continue
            model = PureMeasurementModel.from_mapping(kept)
            solutions.setdefault(model.partition(), model)

    return set(_drop_submodels(solutions.values()))


def _drop_submodels(models: Iterable[PureMeasurementModel]) -> list[PureMeasurementModel]:
    ordered = sorted(models, key=lambda m: len(m.observed_set), reverse=True)
    kept: list[PureMeasurementModel] = []
    for model in ordered:
        if not any(_is_submodel(model, other) for other in kept):
            kept.append(model)
    return kept


def _is_submodel(a: PureMeasurementModel, b: PureMeasurementModel) -> bool:
    """Whether a's clusters all sit inside clusters of b, with fewer variables."""
    if not a.observed_set < b.observed_set:
        return False
    return all(
        any(members <= other for other in b.partition()) for members in a.partition()
    )


def mm_equal(a: PureMeasurementModel, b: PureMeasurementModel) -> bool:
    """Measurement-model equivalence: same observed set, matched child sets.

    Latent labels are immaterial; two models are equal when a unique
    relabeling of latents makes the child sets identical.
    """
    return a.partition() == b.partition()


def mm_set_equal(
    first: Iterable[PureMeasurementModel], second: Iterable[PureMeasurementModel]
) -> bool:
    """Set-level equivalence: a perfect unique matching under mm_equal."""
    a = list(first)
    b = list(second)
    if len(a) != len(b):
        return False
    parts_a = [m.partition() for m in a]
    parts_b = [m.partition() for m in b]
    if len(set(parts_a)) != len(parts_a) or len(set(parts_b)) != len(parts_b):
        return False
    return set(parts_a) == set(parts_b)
