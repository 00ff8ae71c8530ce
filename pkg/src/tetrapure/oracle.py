"""Constraint decisions and the two composite predicates built on them.

A ConstraintOracle answers three kinds of yes/no questions about observed
variables: does a correlation vanish, does a partial correlation vanish, and
does a tetrad constraint hold. CovarianceOracle answers them from a
MomentCache (statistically, or exactly in population mode) and memoizes every
decision, so a hypothesis is never tested twice within a run and sequential
testing stays reproducible. Memoized entries are deterministic values, so
concurrent lookups are safe: a rare duplicate evaluation writes the same
answer.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Protocol, runtime_checkable

from .errors import ValidationError
from .moments import MomentCache, SignificanceConfig, test_vanishing_partial_correlation
from .tetrads import TetradConstraint, TetradIndex, all_tetrads, bollen_test, wishart_test


@runtime_checkable
class ConstraintOracle(Protocol):
    """Decision source for the clustering predicates."""

    def vanishing_correlation(self, x: str, y: str) -> bool: ...

    def vanishing_partial_correlation(self, x: str, y: str, z: str) -> bool: ...

    def tetrad_holds(self, t: TetradIndex) -> bool: ...


class CovarianceOracle:
    """Memoizing oracle over a MomentCache under one significance policy.

    Marginal correlations are tested at cfg.alpha, partial-correlation
    guards at cfg.partial_alpha, tetrad constraints at cfg.tetrad_alpha
    (see SignificanceConfig for why the levels differ). Population mode
    ignores all three and thresholds exactly.
    """

    def __init__(self, cache: MomentCache, cfg: SignificanceConfig):
        self.cache = cache
        self.cfg = cfg
        self._partial_cfg = cfg.at_alpha(cfg.partial_alpha)
        self._tetrad_cfg = cfg.at_alpha(cfg.tetrad_alpha)
        self._corr: dict[tuple[str, str], bool] = {}
        self._partial: dict[tuple[str, str, str], bool] = {}
        self._tetrad: dict[tuple, bool] = {}
        self.compound_memo: dict = {}

    @property
    def labels(self) -> tuple[str, ...]:
        return self.cache.labels

    def vanishing_correlation(self, x: str, y: str) -> bool:
        key = (x, y) if x < y else (y, x)
        hit = self._corr.get(key)
        if hit is None:
            hit = self._corr[key] = test_vanishing_partial_correlation(
                self.cache, x, y, (), self.cfg
            )
        return hit

    def vanishing_partial_correlation(self, x: str, y: str, z: str) -> bool:
        key = (x, y, z) if x < y else (y, x, z)
        hit = self._partial.get(key)
        if hit is None:
            hit = self._partial[key] = test_vanishing_partial_correlation(
                self.cache, x, y, (z,), self._partial_cfg
            )
        return hit

    def tetrad_holds(self, t: TetradIndex) -> bool:
        key = t.canonical_key()
        hit = self._tetrad.get(key)
        if hit is None:
            test = bollen_test if self.cfg.test_kind == "bollen" else wishart_test
            hit = self._tetrad[key] = test(self.cache, t, self._tetrad_cfg)
        return hit


def population_oracle(covariance, labels: Iterable[str]) -> CovarianceOracle:
    """Exact-thresholding oracle over an analytic population covariance."""
    cache = MomentCache.from_covariance(covariance, tuple(labels), n_samples=1_000_000)
    return CovarianceOracle(cache, SignificanceConfig(population_mode=True))


def _compound_cache(oracle: ConstraintOracle) -> dict | None:
    return getattr(oracle, "compound_memo", None)


def tetrad_score(variables: Iterable[str], oracle: ConstraintOracle) -> int:
    """Number of tetrad constraints holding among four variables, guarded.

    The score is zero outright when any triple inside the quad has a
    vanishing partial correlation; otherwise it counts how many of the three
    constraints hold (0, 1, or 3 for faithful covariances).
    """
    quad = tuple(sorted(set(variables)))
    if len(quad) != 4:
        raise ValidationError(f"tetrad score needs exactly 4 distinct variables, got {variables}")
    memo = _compound_cache(oracle)
    key = ("score", quad)
    if memo is not None and key in memo:
        return memo[key]
    score = 0 if _guard_vanishes(quad, oracle) else _count_tetrads(quad, oracle)
    if memo is not None:
        memo[key] = score
    return score


def _guard_vanishes(quad: tuple[str, ...], oracle: ConstraintOracle) -> bool:
    for x, y, z in itertools.permutations(quad, 3):
        if x < y and oracle.vanishing_partial_correlation(x, y, z):
            return True
    return False


def _count_tetrads(quad: tuple[str, ...], oracle: ConstraintOracle) -> int:
    return sum(oracle.tetrad_holds(t) for t in all_tetrads(quad))


def one_factor_quad(variables: Iterable[str], oracle: ConstraintOracle) -> bool:
    """Whether four variables behave as indicators of a single common factor.

    Requires every pair in the quad to be correlated, all three tetrad
    constraints to hold, and the partial-correlation guard to stay silent.
    For a faithful population the correlatedness requirement is implied (a
    quad with an uncorrelated pair either fails a tetrad or trips the
    guard), so this agrees with tetrad_score == 3 there; on samples it
    rejects quads whose tetrad comparisons have no power because the
    products involved are indistinguishable from zero.
    """
    quad = tuple(sorted(set(variables)))
    if len(quad) != 4:
        raise ValidationError(f"need exactly 4 distinct variables, got {variables}")
    memo = _compound_cache(oracle)
    key = ("onefactor", quad)
    hit = None if memo is None else memo.get(key)
    if hit is None:
        hit = (
            not any(
                oracle.vanishing_correlation(a, b)
                for a, b in itertools.combinations(quad, 2)
            )
            and _all_three_hold(quad, oracle)
            and not _guard_vanishes(quad, oracle)
        )
        if memo is not None:
            memo[key] = hit
    return hit


def separation_combo(x: str, a: str, y: str, c: str, oracle: ConstraintOracle) -> bool:
    """One cross comparison of the separation predicate, for pair pruning.

    For {x,a} against {y,c}: the cross pairing must hold while differing from
    the within pairing. Every witness set for separating x from y must pass
    this for each of its cross pairs, so it prunes witness candidates without
    changing any decision. Symmetric within each pair and across the sides.
    """
    memo = _compound_cache(oracle)
    pair1 = (x, a) if x < a else (a, x)
    pair2 = (y, c) if y < c else (c, y)
    key = ("combo", pair1, pair2) if pair1 < pair2 else ("combo", pair2, pair1)
    hit = None if memo is None else memo.get(key)
    if hit is None:
        cross = TetradIndex((x, a, y, c), TetradConstraint.AC_BD_EQ_AD_BC)
        within = TetradIndex((x, a, y, c), TetradConstraint.AB_CD_EQ_AC_BD)
        hit = oracle.tetrad_holds(cross) and not oracle.tetrad_holds(within)
        if memo is not None:
            memo[key] = hit
    return hit


def _all_three_hold(quad: tuple[str, ...], oracle: ConstraintOracle) -> bool:
    memo = _compound_cache(oracle)
    key = ("threehold", tuple(sorted(quad)))
    hit = None if memo is None else memo.get(key)
    if hit is None:
        hit = all(oracle.tetrad_holds(t) for t in all_tetrads(quad))
        if memo is not None:
            memo[key] = hit
    return hit


def unclustered(
    o1: Iterable[str], o2: Iterable[str], oracle: ConstraintOracle
) -> bool:
    """True only if no variable in o1 shares a latent parent with one in o2.

    Two disjoint triples pass either because all nine cross pairs are
    uncorrelated, or because every pair in the union is correlated, every
    partial correlation in the union is nonvanishing, all tetrads pairing one
    side against the other's triples hold, and every 2x2 cross comparison
    holds while differing from the within-side pairing.
    """
    t1 = tuple(sorted(set(o1)))
    t2 = tuple(sorted(set(o2)))
    if len(t1) != 3 or len(t2) != 3:
        raise ValidationError("unclustered requires two triples of variables")
    if set(t1) & set(t2):
        raise ValidationError(f"triples overlap: {sorted(set(t1) & set(t2))}")
    memo = _compound_cache(oracle)
    key = ("unclustered", (t1, t2) if t1 < t2 else (t2, t1))
    hit = None if memo is None else memo.get(key)
    if hit is None:
        hit = _unclustered_uncached(t1, t2, oracle)
        if memo is not None:
            memo[key] = hit
    return hit


def _unclustered_uncached(
    t1: tuple[str, ...], t2: tuple[str, ...], oracle: ConstraintOracle
) -> bool:
    if all(
        oracle.vanishing_correlation(a, b) for a in t1 for b in t2
    ):
        return True

    union = t1 + t2

    # cross comparisons first: they discriminate fastest when the triples
    # actually share a parent
    for i, j in itertools.combinations(t1, 2):
        for p, q in itertools.combinations(t2, 2):
            if not separation_combo(i, j, p, q, oracle):
                return False

    for v in t1:
        if not _all_three_hold((v, *t2), oracle):
            return False
    for v in t2:
        if not _all_three_hold((v, *t1), oracle):
            return False

    for a, b in itertools.combinations(union, 2):
        if oracle.vanishing_correlation(a, b):
            return False
    for x, y, z in itertools.permutations(union, 3):
        if x < y and oracle.vanishing_partial_correlation(x, y, z):
            return False
    return True
