"""Command-line front end. Thin adapters only; all logic lives in the library.

Exit codes: 0 success, 1 validation error (bad inputs or configuration),
2 runtime failure.
"""

from __future__ import annotations

import csv
import functools
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from .errors import DegenerateDataError, GuardExceededError, TetrapureError, ValidationError
from .evaluate import score_output
from .graphs import LatentVariableGraph, PureMeasurementModel, enumerate_purifications
from .moments import MomentCache, SignificanceConfig, build_moments
from .oracle import CovarianceOracle
from .pattern import MeasurementPattern, find_measurement_pattern
from .purify import purify_pattern
from .replicate import RunConfig, run_replication, select_estimate, study_preset
from .simulate import (
    GroundTruth,
    ImpuritySpec,
    StudyConfig,
    observed_labels,
    random_purifiable_graph,
    sample_linear,
    sample_study3,
)
from .tetrads import all_tetrads, tetrad_difference

log = logging.getLogger("tetrapure")


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValidationError, DegenerateDataError, GuardExceededError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except TetrapureError as exc:
            click.echo(f"failure: {exc}", err=True)
            sys.exit(2)

    return wrapper


def read_dataset(path: str) -> tuple[np.ndarray, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            labels = next(reader)
        except StopIteration:
            raise ValidationError(f"{path} is empty") from None
        try:
            data = np.array([[float(v) for v in row] for row in reader if row])
        except ValueError as exc:
            raise ValidationError(f"{path}: non-numeric cell ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(labels):
        raise ValidationError(f"{path}: rows do not match the header width")
    return data, [lab.strip() for lab in labels]


def read_covariance(path: str) -> tuple[np.ndarray, list[str]]:
    matrix, labels = read_dataset(path)
    if matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(f"{path}: covariance matrix must be square")
    return matrix, labels


def write_dataset(path: Path, data: np.ndarray, labels: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(labels)
        writer.writerows(data.tolist())


def _load_cache(
    data_path: str | None,
    cov_path: str | None,
    n: int | None,
    with_fourth: bool,
) -> MomentCache:
    if (data_path is None) == (cov_path is None):
        raise ValidationError("provide exactly one of --data or --cov")
    if data_path is not None:
        data, labels = read_dataset(data_path)
        return build_moments(data, labels, with_fourth=with_fourth)
    if n is None:
        raise ValidationError("--cov input needs --n (the sample size)")
    if with_fourth:
        raise ValidationError(
            "the distribution-free test needs raw data (--data), not a covariance file"
        )
    matrix, labels = read_covariance(cov_path)
    return MomentCache.from_covariance(matrix, labels, n)


def _dump_json(path: str | None, doc: dict | list) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None:
        click.echo(text, nl=False)
    else:
        Path(path).write_text(text)


@click.group()
@click.option("--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Discover pure measurement models for latent variables from covariance data."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


test_option = click.option(
    "--test",
    "test_kind",
    type=click.Choice(["wishart", "bollen"]),
    default="wishart",
    show_default=True,
    help="Tetrad significance test.",
)
alpha_option = click.option(
    "--alpha", type=float, default=0.05, show_default=True, help="Significance level."
)


@main.command()
@click.option("--data", "data_path", type=click.Path(exists=True), help="Dataset CSV (headered).")
@click.option("--cov", "cov_path", type=click.Path(exists=True), help="Covariance CSV (headered).")
@click.option("--n", "n_samples", type=int, help="Sample size when reading a covariance file.")
@alpha_option
@test_option
@click.option("--population", is_flag=True, help="Exact thresholding for analytic covariances.")
@click.option(
    "--link-on-uncorrelated/--no-link-on-uncorrelated",
    default=True,
    show_default=True,
    help="Also link latents whose indicator triples are mutually uncorrelated.",
)
@click.option("--out", "out_path", type=click.Path(), help="Pattern JSON output (default stdout).")
@click.option("--report", is_flag=True, help="Print a human-readable summary to stderr.")
@_handle_errors
def discover(
    data_path, cov_path, n_samples, alpha, test_kind, population, link_on_uncorrelated,
    out_path, report,
):
    """Find the measurement pattern of a dataset or covariance matrix."""
    cache = _load_cache(data_path, cov_path, n_samples, with_fourth=test_kind == "bollen")
    cfg = SignificanceConfig(alpha=alpha, test_kind=test_kind, population_mode=population)
    oracle = CovarianceOracle(cache, cfg)
    pattern = find_measurement_pattern(
        list(cache.labels), oracle, link_on_uncorrelated=link_on_uncorrelated
    )
    _dump_json(out_path, pattern.to_json_dict())
    if report:
        clusters = ", ".join(
            f"{name}={{{','.join(sorted(members))}}}" for name, members in pattern.clusters
        )
        click.echo(
            f"{len(pattern.clusters)} cluster(s): {clusters}; "
            f"{len(pattern.impurity_edges)} impurity edge(s); "
            f"{len(pattern.latent_links)} latent link(s); "
            f"dropped: {sorted(pattern.dropped) or 'none'}",
            err=True,
        )


@main.command()
@click.option("--pattern", "pattern_path", type=click.Path(exists=True), required=True)
@click.option("--min-children", type=int, default=3, show_default=True)
@click.option("--out", "out_path", type=click.Path(), help="Models JSON output (default stdout).")
@_handle_errors
def purify(pattern_path, min_children, out_path):
    """List all maximal purifications of a measurement pattern."""
    pattern = MeasurementPattern.load(pattern_path)
    solutions = purify_pattern(pattern, min_children=min_children)
    ordered = sorted(
        solutions, key=lambda m: tuple(sorted(tuple(sorted(c)) for c in m.partition()))
    )
    _dump_json(out_path, [m.to_json_dict() for m in ordered])
    if not solutions:
        click.echo("no purification satisfies the child-count requirement", err=True)


@main.command()
@click.option("--study", type=click.Choice(["1", "2", "3"]), required=True)
@click.option("--m", "n_latents", type=int, help="Number of latents (studies 1-2).")
@click.option("--n", "indicators", type=int, help="Indicators per latent (studies 1-2).")
@click.option("--samples", type=int, help="Sample size override.")
@click.option("--error-pairs", type=int, help="Correlated-error pairs (study 2).")
@click.option("--observed-edges", type=int, help="Direct indicator-indicator edges (study 2).")
@click.option("--cross-loadings", type=int, help="Cross-loading indicators (study 2).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-prefix", required=True, help="Writes <prefix>_data.csv, _graph.json, _params.json.")
@_handle_errors
def simulate(
    study, n_latents, indicators, samples, error_pairs, observed_edges, cross_loadings,
    seed, out_prefix,
):
    """Generate one ground-truth graph and dataset for a study design."""
    overrides: dict = {"seed": seed}
    if n_latents is not None:
        overrides["n_latents"] = n_latents
    if indicators is not None:
        overrides["indicators_per_latent"] = indicators
    if samples is not None:
        overrides["sample_size"] = samples
    study_num = int(study)
    if study_num == 2 and any(
        v is not None for v in (error_pairs, observed_edges, cross_loadings)
    ):
        overrides["impurities"] = ImpuritySpec(
            correlated_error_pairs=error_pairs or 0,
            observed_edges=observed_edges or 0,
            cross_loadings=cross_loadings or 0,
        )
    cfg = study_preset(study_num, **overrides)

    if cfg.nonlinear:
        data, truth = sample_study3(cfg.sample_size, cfg.seed)
    else:
        truth = random_purifiable_graph(cfg)
        data = sample_linear(truth, cfg.sample_size, cfg.seed)

    prefix = Path(out_prefix)
    write_dataset(prefix.with_name(prefix.name + "_data.csv"), data, observed_labels(truth.graph))
    truth.graph.save(prefix.with_name(prefix.name + "_graph.json"))
    params_doc = None if truth.params is None else truth.params.to_json_dict()
    _dump_json(str(prefix.with_name(prefix.name + "_params.json")), params_doc or {})
    log.info("wrote %s_{data.csv,graph.json,params.json}", out_prefix)


@main.command()
@click.option("--est", "est_path", type=click.Path(exists=True), required=True,
              help="Estimated model JSON (one model, or an array from purify).")
@click.option("--truth", "truth_path", type=click.Path(exists=True), required=True,
              help="Ground-truth graph JSON.")
@click.option("--out", "out_path", type=click.Path(), help="Report JSON output (default stdout).")
@_handle_errors
def evaluate(est_path, truth_path, out_path):
    """Score an estimated pure model against a ground-truth graph."""
    doc = json.loads(Path(est_path).read_text())
    if isinstance(doc, list):
        models = [PureMeasurementModel.from_json_dict(d) for d in doc]
        est = select_estimate(models)
    else:
        est = PureMeasurementModel.from_json_dict(doc)
    graph = LatentVariableGraph.load(truth_path)
    truth = GroundTruth(
        graph=graph,
        params=None,
        true_pure_models=frozenset(enumerate_purifications(graph, 3)),
    )
    report = score_output(est, truth)
    _dump_json(out_path, report.to_json_dict())


@main.command()
@click.option("--study", type=click.Choice(["1", "2", "3"]), required=True)
@click.option("--trials", type=int, help="Trial count override.")
@click.option("--m", "n_latents", type=int)
@click.option("--n", "indicators", type=int)
@click.option("--samples", type=int)
@click.option("--seed", type=int, default=0, show_default=True)
@alpha_option
@test_option
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(), help="Table JSON output.")
@_handle_errors
def replicate(
    study, trials, n_latents, indicators, samples, seed, alpha, test_kind, workers, out_path
):
    """Run simulate-discover-purify-evaluate over all trials of a study."""
    overrides: dict = {"seed": seed}
    if trials is not None:
        overrides["trials"] = trials
    if n_latents is not None:
        overrides["n_latents"] = n_latents
    if indicators is not None:
        overrides["indicators_per_latent"] = indicators
    if samples is not None:
        overrides["sample_size"] = samples
    study_cfg = study_preset(int(study), **overrides)
    run_cfg = RunConfig(alpha=alpha, test_kind=test_kind, workers=workers)
    table = run_replication(study_cfg, run_cfg, study_name=study)
    if out_path is not None:
        table.save(out_path)
    click.echo(table.render_text())


@main.command("test-tetrad")
@click.option("--data", "data_path", type=click.Path(exists=True))
@click.option("--cov", "cov_path", type=click.Path(exists=True))
@click.option("--n", "n_samples", type=int)
@click.option("--vars", "variables", required=True, help="Four labels, comma-separated.")
@alpha_option
@test_option
@_handle_errors
def test_tetrad(data_path, cov_path, n_samples, variables, alpha, test_kind):
    """Test the three tetrad constraints of one quad of variables."""
    quad = tuple(v.strip() for v in variables.split(","))
    if len(quad) != 4:
        raise ValidationError(f"--vars needs exactly four labels, got {len(quad)}")
    cache = _load_cache(data_path, cov_path, n_samples, with_fourth=test_kind == "bollen")
    cfg = SignificanceConfig(alpha=alpha, test_kind=test_kind)
    oracle = CovarianceOracle(cache, cfg)
    for t in all_tetrads(quad):
        (a1, b1), (c1, d1) = t.left_pairs
        (a2, b2), (c2, d2) = t.right_pairs
        diff = tetrad_difference(cache, t)
        verdict = "holds" if oracle.tetrad_holds(t) else "fails"
        click.echo(
            f"cov({a1},{b1})cov({c1},{d1}) = cov({a2},{b2})cov({c2},{d2}):"
            f"  difference {diff:+.6f}  ->  {verdict}"
        )


if __name__ == "__main__":
    main()
