"""Ground-truth generation and synthetic data for the three study designs.

Study 1: random latent DAG, linear-Gaussian relations, pure indicators.
Study 2: study 1 plus injected impurities (correlated-error pairs, direct
indicator-indicator edges within a cluster, cross-loading indicators).
Study 3: a fixed diamond of four latents with nonlinear relations and
beta-mixture disturbances, measured through a linear impure model with
exactly two maximal purifications.

Everything is deterministic under the configured seed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError
from .graphs import (
    LatentVariableGraph,
    LinearParameters,
    PureMeasurementModel,
    enumerate_purifications,
    require_valid,
)

#: Rows of study-3 data are redrawn when a denominator latent falls below this.
STUDY3_DENOMINATOR_GUARD = 1e-6


@dataclass(frozen=True)
class ImpuritySpec:
    """How many impurities of each kind to inject, all on extra indicators."""

    correlated_error_pairs: int = 0
    observed_edges: int = 0
    cross_loadings: int = 0

    def __post_init__(self) -> None:
        if min(self.correlated_error_pairs, self.observed_edges, self.cross_loadings) < 0:
            raise ValidationError("impurity counts must be non-negative")

    @property
    def total_extra_indicators(self) -> int:
        return 2 * self.correlated_error_pairs + 2 * self.observed_edges + self.cross_loadings

    @property
    def any(self) -> bool:
        return self.total_extra_indicators > 0


@dataclass(frozen=True)
class StudyConfig:
    """Configuration of one synthetic study."""

    n_latents: int = 5
    indicators_per_latent: int = 4
    sample_size: int = 1000
    avg_latent_degree: float = 2.0
    impurities: ImpuritySpec = field(default_factory=ImpuritySpec)
    nonlinear: bool = False
    trials: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_latents < 1:
            raise ValidationError("need at least one latent")
        if self.indicators_per_latent < 3:
            raise ValidationError("need at least three indicators per latent")
        if self.sample_size < 10:
            raise ValidationError("sample size must be at least 10")
        if self.trials < 1:
            raise ValidationError("need at least one trial")
        if self.avg_latent_degree < 0:
            raise ValidationError("average latent degree must be non-negative")


@dataclass(frozen=True)
class GroundTruth:
    """A generated graph, its parameterization, and its true pure models."""

    graph: LatentVariableGraph
    params: Optional[LinearParameters]
    true_pure_models: frozenset[PureMeasurementModel]


def observed_labels(graph: LatentVariableGraph) -> list[str]:
    """Canonical column order shared by samplers, covariances, and CSV files."""
    return sorted(graph.observed)


def draw_coefficient(rng: np.random.Generator, size: int | None = None):
    """Uniform on [-1.5,-0.5] union [0.5,1.5]."""
    magnitude = rng.uniform(0.5, 1.5, size=size)
    sign = rng.choice((-1.0, 1.0), size=size)
    return magnitude * sign


def _random_latent_edges(
    m: int, avg_degree: float, rng: np.random.Generator
) -> list[tuple[str, str]]:
    """Random DAG over m latents near the target average degree.

    Orientation follows a random topological permutation. Every latent ends
    up with degree >= 1 (for m >= 2): a latent sharing no edge would be
    marginally independent of every other, leaving its indicators without the
    cross-cluster witnesses the discovery procedure relies on.
    """
    labels = [f"L{i + 1}" for i in range(m)]
    if m < 2:
        return []
    order = list(rng.permutation(m))
    rank = {labels[v]: i for i, v in enumerate(order)}
    all_pairs = list(itertools.combinations(labels, 2))
    target = min(len(all_pairs), max(1, round(m * avg_degree / 2)))
    chosen_idx = rng.choice(len(all_pairs), size=target, replace=False)
    chosen = {all_pairs[i] for i in np.asarray(chosen_idx).ravel()}
    degree = {lab: 0 for lab in labels}
    for a, b in chosen:
        degree[a] += 1
        degree[b] += 1
    for lab in labels:
        if degree[lab] == 0:
            partner = labels[rng.integers(m - 1)]
            if partner == lab:
                partner = labels[-1]
            pair = tuple(sorted((lab, partner)))
            chosen.add(pair)
            degree[lab] += 1
            degree[partner] += 1
    edges = []
    for a, b in sorted(chosen):
        edges.append((a, b) if rank[a] < rank[b] else (b, a))
    return edges


def random_purifiable_graph(cfg: StudyConfig) -> GroundTruth:
    """Generate one ground-truth graph with parameters under cfg.seed.

    Base indicators are pure; impurities arrive only on extra indicators, so
    every latent keeps its full complement of pure children and at least one
    purification with three children per latent always exists.
    """
    spec = cfg.impurities
    if spec.cross_loadings > 0 and cfg.n_latents < 2:
        raise ValidationError("cross-loading indicators need at least two latents")
    rng = np.random.default_rng(cfg.seed)
    m, n = cfg.n_latents, cfg.indicators_per_latent
    latents = [f"L{i + 1}" for i in range(m)]
    latent_edges = _random_latent_edges(m, cfg.avg_latent_degree, rng)

    total_obs = m * n + spec.total_extra_indicators
    width = max(2, len(str(total_obs)))
    names = iter(f"O{i + 1:0{width}d}" for i in range(total_obs))

    measurement_edges: list[tuple[str, str]] = []
    error_edges: list[tuple[str, str]] = []
    errors: list[str] = []
    observed: list[str] = []

    for latent in latents:
        for _ in range(n):
            obs = next(names)
            observed.append(obs)
            measurement_edges.append((latent, obs))

    def random_latent() -> str:
        return latents[rng.integers(m)]

    for k in range(spec.correlated_error_pairs):
        first, second = next(names), next(names)
        observed += [first, second]
        measurement_edges += [(random_latent(), first), (random_latent(), second)]
        err = f"E{k + 1}"
        errors.append(err)
        error_edges += [(err, first), (err, second)]

    for _ in range(spec.observed_edges):
        home = random_latent()
        cause, effect = next(names), next(names)
        observed += [cause, effect]
        measurement_edges += [(home, cause), (home, effect), (cause, effect)]

    for _ in range(spec.cross_loadings):
        pair = rng.choice(m, size=2, replace=False)
        obs = next(names)
        observed.append(obs)
        measurement_edges += [(latents[pair[0]], obs), (latents[pair[1]], obs)]

    graph = LatentVariableGraph.from_parts(
        latents=latents,
        observed=observed,
        errors=errors,
        latent_edges=latent_edges,
        measurement_edges=measurement_edges,
        error_edges=error_edges,
    )
    require_valid(graph)

    coefficients = {
        edge: float(draw_coefficient(rng)) for edge in sorted(graph.edges)
    }
    variances = {node: float(rng.uniform(1.0, 3.0)) for node in sorted(graph.nodes)}
    params = LinearParameters.from_mappings(coefficients, variances)
    return GroundTruth(
        graph=graph,
        params=params,
        true_pure_models=frozenset(enumerate_purifications(graph, 3)),
    )


def _structural_matrices(
    graph: LatentVariableGraph, params: LinearParameters
) -> tuple[list[str], np.ndarray, np.ndarray]:
    order = graph.topological_order()
    pos = {node: i for i, node in enumerate(order)}
    coef = params.coefficient_map()
    missing = [e for e in graph.edges if e not in coef]
    if missing:
        raise ValidationError(f"parameters missing for edges: {sorted(missing)[:5]}")
    b = np.zeros((len(order), len(order)))
    for (a, c), w in coef.items():
        if (a, c) in graph.edges:
            b[pos[c], pos[a]] = w
    variances = params.variance_map()
    missing_var = [node for node in order if node not in variances]
    if missing_var:
        raise ValidationError(f"variances missing for nodes: {missing_var[:5]}")
    omega = np.diag([variances[node] for node in order])
    return order, b, omega


def population_covariance(
    graph: LatentVariableGraph, params: LinearParameters
) -> tuple[list[str], np.ndarray]:
    """Exact covariance of the observed variables implied by the parameters."""
    order, b, omega = _structural_matrices(graph, params)
    eye = np.eye(len(order))
    total = np.linalg.solve(eye - b, np.linalg.solve(eye - b, omega).T)
    labels = observed_labels(graph)
    pos = {node: i for i, node in enumerate(order)}
    idx = [pos[v] for v in labels]
    return labels, total[np.ix_(idx, idx)]


def sample_linear(gt: GroundTruth, n_samples: int, seed: int) -> np.ndarray:
    """Ancestral sampling with independent Gaussian disturbances.

    Columns follow observed_labels(gt.graph).
    """
    if gt.params is None:
        raise ValidationError("ground truth has no linear parameterization")
    order, b, omega = _structural_matrices(gt.graph, gt.params)
    rng = np.random.default_rng(seed)
    scale = np.sqrt(np.diag(omega))
    values = np.empty((n_samples, len(order)))
    pos = {node: i for i, node in enumerate(order)}
    for i, node in enumerate(order):
        disturbance = rng.normal(0.0, scale[i], size=n_samples)
        values[:, i] = disturbance + values[:, : i] @ b[i, :i]
    idx = [pos[v] for v in observed_labels(gt.graph)]
    return values[:, idx]


# ---------------------------------------------------------------------------
# Study 3: nonlinear diamond
# ---------------------------------------------------------------------------


def study3_graph() -> LatentVariableGraph:
    """Diamond of four latents, four indicators each, two impurities.

    Indicator O06 loads on two latents and must leave every purification;
    O13 and O15 share a correlated error, so the graph purifies in exactly
    two maximal ways (drop O06 and O13, or O06 and O15). The exact indicator
    numbering is a reconstruction, chosen for that structural property.
    """
    latents = ["L1", "L2", "L3", "L4"]
    latent_edges = [("L1", "L2"), ("L1", "L3"), ("L2", "L4"), ("L3", "L4")]
    measurement_edges = []
    for i, latent in enumerate(latents):
        for j in range(4):
            measurement_edges.append((latent, f"O{4 * i + j + 1:02d}"))
    measurement_edges.append(("L3", "O06"))
    return LatentVariableGraph.from_parts(
        latents=latents,
        observed=[f"O{k:02d}" for k in range(1, 17)],
        errors=["E1"],
        latent_edges=latent_edges,
        measurement_edges=measurement_edges,
        error_edges=[("E1", "O13"), ("E1", "O15")],
    )


def study3_ground_truth() -> GroundTruth:
    graph = study3_graph()
    return GroundTruth(
        graph=graph,
        params=None,
        true_pure_models=frozenset(enumerate_purifications(graph, 3)),
    )


def _beta_mixture(
    rng: np.random.Generator, size: int, a1: float, b1: float, a2: float, b2: float,
    weight_first: float, negate_second: bool = False,
) -> np.ndarray:
    pick = rng.random(size) < weight_first
    first = rng.beta(a1, b1, size)
    second = rng.beta(a2, b2, size)
    if negate_second:
        second = -second
    return np.where(pick, first, second)


def sample_study3(n_samples: int, seed: int) -> tuple[np.ndarray, GroundTruth]:
    """Draw one study-3 dataset; columns follow observed_labels of the fixture.

    The root latent is an even mixture of Beta(2,4) and Beta(4,2); downstream
    latents are square, square root, and a sine of a ratio, each plus a
    disturbance mixing Beta(4,2) with a negated Beta(2,4) at a weight drawn
    once per latent. Indicator errors mix Beta(2,4) and Beta(4,2) at weights
    drawn once per indicator. Rows with a near-zero ratio denominator are
    redrawn.
    """
    if n_samples < 10:
        raise ValidationError("sample size must be at least 10")
    gt = study3_ground_truth()
    graph = gt.graph
    rng = np.random.default_rng(seed)

    latent_error_weight = {lab: rng.uniform() for lab in ("L2", "L3", "L4")}
    obs_order = observed_labels(graph)
    indicator_error_weight = {obs: rng.uniform() for obs in obs_order}
    shared_error_weight = rng.uniform()
    loadings = {
        edge: float(draw_coefficient(rng))
        for edge in sorted(graph.measurement_edges | graph.error_edges)
    }

    def draw_latents(size: int) -> dict[str, np.ndarray]:
        l1 = _beta_mixture(rng, size, 2, 4, 4, 2, 0.5)
        eps = {
            lab: _beta_mixture(rng, size, 4, 2, 2, 4, latent_error_weight[lab], negate_second=True)
            for lab in ("L2", "L3", "L4")
        }
        l2 = l1**2 + eps["L2"]
        l3 = np.sqrt(l1) + eps["L3"]
        return {"L1": l1, "L2": l2, "L3": l3, "_eps4": eps["L4"]}

    latents = draw_latents(n_samples)
    bad = np.abs(latents["L3"]) < STUDY3_DENOMINATOR_GUARD
    while bad.any():
        redraw = draw_latents(int(bad.sum()))
        for key in latents:
            latents[key][bad] = redraw[key]
        bad = np.abs(latents["L3"]) < STUDY3_DENOMINATOR_GUARD
    latents["L4"] = np.sin(latents["L2"] / latents["L3"]) + latents.pop("_eps4")

    shared = _beta_mixture(rng, n_samples, 2, 4, 4, 2, shared_error_weight)
    columns = {}
    for obs in obs_order:
        value = _beta_mixture(rng, n_samples, 2, 4, 4, 2, indicator_error_weight[obs])
        for parent in sorted(graph.parents_of(obs)):
            if parent in graph.latents:
                value = value + loadings[(parent, obs)] * latents[parent]
            elif parent in graph.errors:
                value = value + loadings[(parent, obs)] * shared
        columns[obs] = value
    data = np.column_stack([columns[obs] for obs in obs_order])
    return data, gt
