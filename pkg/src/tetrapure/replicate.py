"""End-to-end study harness: simulate, discover, purify, evaluate, tabulate.

Per-trial randomness derives from the study seed and the trial index, so a
table is byte-identical across runs (and across worker counts). No
algorithmic logic lives here: each stage is the library call a user could
make directly.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import TetrapureError, ValidationError
from .evaluate import EvaluationReport, score_output
from .graphs import PureMeasurementModel
from .moments import MomentCache, SignificanceConfig, build_moments
from .oracle import CovarianceOracle
from .pattern import find_measurement_pattern
from .purify import purify_pattern
from .simulate import (
    GroundTruth,
    ImpuritySpec,
    StudyConfig,
    observed_labels,
    random_purifiable_graph,
    sample_linear,
    sample_study3,
)

METRICS = ("missing_latents", "missing_indicators", "misplaced_indicators", "impurities")

#: A run aborts when more than this share of its trials fail.
MAX_ABORTED_FRACTION = 0.2


@dataclass(frozen=True)
class RunConfig:
    """Decision policy plus pattern/purification switches for a run."""

    alpha: float = 0.05
    test_kind: str = "wishart"
    population_mode: bool = False
    link_on_uncorrelated: bool = True
    min_children: int = 3
    workers: int = 1
    partial_alpha: Optional[float] = None
    tetrad_alpha: Optional[float] = None

    def significance(self) -> SignificanceConfig:
        overrides = {}
        if self.partial_alpha is not None:
            overrides["partial_alpha"] = self.partial_alpha
        if self.tetrad_alpha is not None:
            overrides["tetrad_alpha"] = self.tetrad_alpha
        return SignificanceConfig(
            alpha=self.alpha,
            test_kind=self.test_kind,
            population_mode=self.population_mode,
            **overrides,
        )


@dataclass(frozen=True)
class TrialResult:
    index: int
    report: Optional[EvaluationReport]
    error: Optional[str]
    n_solutions: int = 0


@dataclass(frozen=True)
class StudyTable:
    study: str
    config: dict
    metrics: dict
    trials: tuple[TrialResult, ...]
    aborted: int

    def to_json_dict(self) -> dict:
        return {
            "study": self.study,
            "config": self.config,
            "metrics": self.metrics,
            "aborted": self.aborted,
            "trials": [
                {
                    "index": t.index,
                    "error": t.error,
                    "n_solutions": t.n_solutions,
                    "report": None if t.report is None else t.report.to_json_dict(),
                }
                for t in self.trials
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    def render_text(self) -> str:
        lines = [f"study {self.study}  ({self.config_summary()})"]
        width = max(len(m) for m in METRICS)
        for name in METRICS:
            cell = self.metrics[name]
            lines.append(f"  {name:<{width}}  {cell['mean']:.2f} +/- {cell['sd']:.2f}")
        if self.aborted:
            lines.append(f"  aborted trials: {self.aborted}")
        return "\n".join(lines)

    def config_summary(self) -> str:
        c = self.config
        return (
            f"{c['n_latents']} latents, {c['indicators_per_latent']} indicators, "
            f"N={c['sample_size']}, {c['trials']} trials, {c['test_kind']} test"
        )


def trial_seeds(master_seed: int, trial_index: int) -> tuple[int, int]:
    """Two independent 32-bit seeds (graph, data) for one trial."""
    ss = np.random.SeedSequence([master_seed, trial_index])
    graph_seed, data_seed = ss.generate_state(2)
    return int(graph_seed), int(data_seed)


def select_estimate(solutions) -> PureMeasurementModel:
    """Deterministically pick the purification retaining the most indicators."""
    if not solutions:
        return PureMeasurementModel(())
    return min(
        solutions,
        key=lambda m: (
            -len(m.observed_set),
            tuple(sorted(tuple(sorted(c)) for c in m.partition())),
        ),
    )


def run_single_trial(
    study_cfg: StudyConfig, run_cfg: RunConfig, trial_index: int
) -> TrialResult:
    try:
        graph_seed, data_seed = trial_seeds(study_cfg.seed, trial_index)
        if study_cfg.nonlinear:
            data, truth = sample_study3(study_cfg.sample_size, data_seed)
        else:
            trial_cfg = StudyConfig(
                n_latents=study_cfg.n_latents,
                indicators_per_latent=study_cfg.indicators_per_latent,
                sample_size=study_cfg.sample_size,
                avg_latent_degree=study_cfg.avg_latent_degree,
                impurities=study_cfg.impurities,
                nonlinear=False,
                trials=1,
                seed=graph_seed,
            )
            truth = random_purifiable_graph(trial_cfg)
            data = sample_linear(truth, study_cfg.sample_size, data_seed)
        labels = observed_labels(truth.graph)
        cache = build_moments(data, labels, with_fourth=run_cfg.test_kind == "bollen")
        oracle = CovarianceOracle(cache, run_cfg.significance())
        pattern = find_measurement_pattern(
            labels, oracle, link_on_uncorrelated=run_cfg.link_on_uncorrelated
        )
        solutions = purify_pattern(pattern, min_children=run_cfg.min_children)
        estimate = select_estimate(solutions)
        report = score_output(estimate, truth)
        return TrialResult(trial_index, report, None, n_solutions=len(solutions))
    except (TetrapureError, np.linalg.LinAlgError) as exc:
        return TrialResult(trial_index, None, f"{type(exc).__name__}: {exc}")


def run_replication(
    study_cfg: StudyConfig, run_cfg: RunConfig, study_name: str = "custom"
) -> StudyTable:
    """Run all trials of one study configuration and tabulate mean +/- sd."""
    indices = range(study_cfg.trials)
    if run_cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=run_cfg.workers) as pool:
            results = list(
                pool.map(run_single_trial, *zip(*((study_cfg, run_cfg, i) for i in indices)))
            )
    else:
        results = [run_single_trial(study_cfg, run_cfg, i) for i in indices]
    results.sort(key=lambda t: t.index)

    aborted = sum(1 for t in results if t.report is None)
    if aborted > MAX_ABORTED_FRACTION * study_cfg.trials:
        failures = "; ".join(t.error or "?" for t in results if t.report is None)
        raise TetrapureError(
            f"{aborted}/{study_cfg.trials} trials aborted: {failures}"
        )

    metrics: dict[str, dict[str, float]] = {}
    for name in METRICS:
        values = [t.report.proportions()[name] for t in results if t.report is not None]
        arr = np.asarray(values)
        sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        metrics[name] = {"mean": float(arr.mean()), "sd": sd}

    config = {
        "n_latents": study_cfg.n_latents,
        "indicators_per_latent": study_cfg.indicators_per_latent,
        "sample_size": study_cfg.sample_size,
        "avg_latent_degree": study_cfg.avg_latent_degree,
        "impurities": {
            "correlated_error_pairs": study_cfg.impurities.correlated_error_pairs,
            "observed_edges": study_cfg.impurities.observed_edges,
            "cross_loadings": study_cfg.impurities.cross_loadings,
        },
        "nonlinear": study_cfg.nonlinear,
        "trials": study_cfg.trials,
        "seed": study_cfg.seed,
        "alpha": run_cfg.alpha,
        "test_kind": run_cfg.test_kind,
        "min_children": run_cfg.min_children,
        "link_on_uncorrelated": run_cfg.link_on_uncorrelated,
    }
    return StudyTable(
        study=study_name,
        config=config,
        metrics=metrics,
        trials=tuple(results),
        aborted=aborted,
    )


def study_preset(study: int, **overrides) -> StudyConfig:
    """Named study configurations; keyword overrides win."""
    if study == 1:
        base = dict(n_latents=5, indicators_per_latent=4, sample_size=1000)
    elif study == 2:
        base = dict(
            n_latents=5,
            indicators_per_latent=4,
            sample_size=1000,
            impurities=ImpuritySpec(
                correlated_error_pairs=1, observed_edges=1, cross_loadings=1
            ),
        )
    elif study == 3:
        base = dict(sample_size=5000, nonlinear=True)
    else:
        raise ValidationError(f"unknown study preset {study}; choose 1, 2, or 3")
    base.update(overrides)
    return StudyConfig(**base)
