"""Scoring an estimated pure measurement model against ground truth.

Four proportions: missing latents, missing indicators (relative to the
maximal purified true graph), misplaced indicators (relative to the
estimate), and recovered impurity units (relative to the unpurified true
graph). Estimated latents are matched to true latents by plurality of their
indicators' true parents.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

from .graphs import LatentVariableGraph, PureMeasurementModel
from .simulate import GroundTruth

ImpurityUnit = tuple[str, frozenset[str]]


@dataclass(frozen=True)
class EvaluationReport:
    missing_latents: float
    missing_indicators: float
    misplaced_indicators: float
    impurities: float
    latent_map: tuple[tuple[str, str], ...]
    ties: int
    flags: tuple[str, ...]

    def proportions(self) -> dict[str, float]:
        return {
            "missing_latents": self.missing_latents,
            "missing_indicators": self.missing_indicators,
            "misplaced_indicators": self.misplaced_indicators,
            "impurities": self.impurities,
        }

    def to_json_dict(self) -> dict:
        doc: dict = dict(self.proportions())
        doc["latent_map"] = {est: true for est, true in self.latent_map}
        doc["ties"] = self.ties
        doc["flags"] = list(self.flags)
        return doc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")


def impurity_units(graph: LatentVariableGraph) -> list[ImpurityUnit]:
    """Countable impurity units of a graph.

    A localized pair (correlated errors, or a direct edge between two
    indicators of one latent) is one unit: deleting either member removes it.
    An indicator with more than one immediate latent ancestor is one unit on
    its own: it must leave every purification.
    """
    units: list[ImpurityUnit] = []
    cross = {
        obs
        for obs in graph.observed
        if len(graph.immediate_latent_ancestors(obs)) >= 2
    }
    for obs in sorted(cross):
        units.append(("multi_ancestor", frozenset((obs,))))
    for err in sorted(graph.errors):
        children = sorted(graph.observed_children(err))
        for a, b in itertools.combinations(children, 2):
            units.append(("localized_pair", frozenset((a, b))))
    for a, b in sorted(graph.measurement_edges):
        if a in graph.observed and b not in cross:
            units.append(("localized_pair", frozenset((a, b))))
    return units


def match_latents(
    est: PureMeasurementModel, truth: GroundTruth
) -> tuple[dict[str, str], int]:
    """Map each estimated latent to the true latent owning most of its members.

    An indicator votes for every true latent parent it has. Ties break on
    canonical true-latent order and are counted.
    """
    graph = truth.graph
    mapping: dict[str, str] = {}
    ties = 0
    for est_latent, members in est.clusters:
        votes: dict[str, int] = {}
        for obs in members:
            for parent in graph.latent_parents(obs):
                votes[parent] = votes.get(parent, 0) + 1
        if not votes:
            continue
        best = max(votes.values())
        winners = sorted(lat for lat, v in votes.items() if v == best)
        if len(winners) > 1:
            ties += 1
        mapping[est_latent] = winners[0]
    return mapping, ties


def choose_reference_purification(
    truth: GroundTruth, est: PureMeasurementModel
) -> tuple[Optional[PureMeasurementModel], list[str]]:
    """The true purified model scored against: unique, or maximal overlap with est."""
    models = sorted(
        truth.true_pure_models,
        key=lambda m: tuple(sorted(tuple(sorted(c)) for c in m.partition())),
    )
    if not models:
        return None, ["no-true-purification"]
    if len(models) == 1:
        return models[0], []
    retained = est.observed_set
    best = max(models, key=lambda m: (len(m.observed_set & retained),))
    return best, ["multiple-references"]


def score_output(est: PureMeasurementModel, truth: GroundTruth) -> EvaluationReport:
    """Compute the four evaluation proportions for one estimate."""
    graph = truth.graph
    flags: list[str] = []
    mapping, ties = match_latents(est, truth)

    true_latents = graph.latents
    matched = set(mapping.values())
    missing_latents = len(true_latents - matched) / len(true_latents)

    reference, ref_flags = choose_reference_purification(truth, est)
    flags.extend(ref_flags)
    est_indicators = est.observed_set
    if reference is None:
        missing_indicators = 0.0
        flags.append("missing-indicators-denominator-zero")
    else:
        ref_indicators = reference.observed_set
        missing_indicators = len(ref_indicators - est_indicators) / len(ref_indicators)

    if not est_indicators:
        misplaced = 0.0
        flags.append("empty-estimate")
    else:
        wrong = 0
        for est_latent, members in est.clusters:
            target = mapping.get(est_latent)
            for obs in members:
                if target is None or target not in graph.latent_parents(obs):
                    wrong += 1
        misplaced = wrong / len(est_indicators)

    units = impurity_units(graph)
    if not units:
        impurities = 0.0
        flags.append("no-true-impurities")
    else:
        present = sum(1 for _, labels in units if labels <= est_indicators)
        impurities = present / len(units)

    return EvaluationReport(
        missing_latents=missing_latents,
        missing_indicators=missing_indicators,
        misplaced_indicators=misplaced,
        impurities=impurities,
        latent_map=tuple(sorted(mapping.items())),
        ties=ties,
        flags=tuple(flags),
    )
