"""Tetrad differences over four variables and their significance tests.

For a quad (A,B,C,D) there are exactly three distinct constraints, one per
way of splitting the quad into two pairs:

    cov(A,B)cov(C,D) = cov(A,C)cov(B,D)
    cov(A,C)cov(B,D) = cov(A,D)cov(B,C)
    cov(A,B)cov(C,D) = cov(A,D)cov(B,C)

Two tests are provided: a normal-theory test whose variance estimate is built
from 2x2 sub-determinants of the covariance matrix, and an asymptotically
distribution-free test built from fourth moments by the delta method.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, ValidationError
from .moments import POPULATION_TOLERANCE, MomentCache, SignificanceConfig

Pair = tuple[int, int]

# pairings indexed by position in the quad: (0,1)(2,3), (0,2)(1,3), (0,3)(1,2)
_PAIRINGS: tuple[tuple[Pair, Pair], ...] = (
    ((0, 1), (2, 3)),
    ((0, 2), (1, 3)),
    ((0, 3), (1, 2)),
)


class TetradConstraint(enum.IntEnum):
    """Which equality of pairings the constraint asserts."""

    AB_CD_EQ_AC_BD = 0
    AC_BD_EQ_AD_BC = 1
    AB_CD_EQ_AD_BC = 2

    @property
    def left(self) -> tuple[Pair, Pair]:
        return _PAIRINGS[(0, 1, 0)[self]]

    @property
    def right(self) -> tuple[Pair, Pair]:
        return _PAIRINGS[(1, 2, 2)[self]]

    @property
    def unused(self) -> tuple[Pair, Pair]:
        return _PAIRINGS[(2, 0, 1)[self]]


@dataclass(frozen=True)
class TetradIndex:
    """One tetrad constraint over an ordered quad of variable labels."""

    quad: tuple[str, str, str, str]
    which: TetradConstraint

    def __post_init__(self) -> None:
        if len(set(self.quad)) != 4:
            raise ValidationError(f"quad labels must be distinct: {self.quad}")

    def _pairing(self, pairing: tuple[Pair, Pair]) -> tuple[tuple[str, str], tuple[str, str]]:
        (i, j), (k, l) = pairing
        return (self.quad[i], self.quad[j]), (self.quad[k], self.quad[l])

    @property
    def left_pairs(self) -> tuple[tuple[str, str], tuple[str, str]]:
        return self._pairing(self.which.left)

    @property
    def right_pairs(self) -> tuple[tuple[str, str], tuple[str, str]]:
        return self._pairing(self.which.right)

    @property
    def unused_pairs(self) -> tuple[tuple[str, str], tuple[str, str]]:
        return self._pairing(self.which.unused)

    def canonical_key(self) -> tuple:
        """Label-permutation-invariant identity of the asserted equality."""
        def pairing_key(pairing):
            (a, b), (c, d) = pairing
            first = (a, b) if a < b else (b, a)
            second = (c, d) if c < d else (d, c)
            return (first, second) if first < second else (second, first)

        left = pairing_key(self.left_pairs)
        right = pairing_key(self.right_pairs)
        return (left, right) if left < right else (right, left)


def all_tetrads(quad: tuple[str, str, str, str] | list[str]) -> tuple[TetradIndex, ...]:
    """The three constraints of one quad, in enum order."""
    q = tuple(quad)
    return tuple(TetradIndex(q, w) for w in TetradConstraint)


def tetrad_difference(cache: MomentCache, t: TetradIndex) -> float:
    """Left product minus right product of the chosen constraint."""
    (a1, b1), (c1, d1) = t.left_pairs
    (a2, b2), (c2, d2) = t.right_pairs
    return cache.cov(a1, b1) * cache.cov(c1, d1) - cache.cov(a2, b2) * cache.cov(c2, d2)


def _pair_determinant(cache: MomentCache, pair: tuple[str, str]) -> float:
    x, y = pair
    return cache.cov(x, x) * cache.cov(y, y) - cache.cov(x, y) ** 2


def wishart_test(cache: MomentCache, t: TetradIndex, cfg: SignificanceConfig) -> bool:
    """Normal-theory decision: True iff the tetrad constraint is judged to hold.

    The sampling variance of the tetrad difference is the classical result
    for multivariate normal data: with D_p the determinant of the 2x2
    covariance submatrix of pair p, and (p, q) the pairing appearing in
    neither product of the difference,

        var = (N+1)/((N-1)(N-2)) * D_p * D_q - det4 / (N-2)

    where det4 is the determinant of the quad's covariance submatrix.
    """
    diff = tetrad_difference(cache, t)
    if cfg.population_mode:
        return abs(diff) <= POPULATION_TOLERANCE
    n = cache.n_samples
    if n <= 4:
        raise ValidationError(f"sample size {n} too small for the tetrad test")
    p, q = t.unused_pairs
    idx = [cache.index(v) for v in t.quad]
    det4 = float(np.linalg.det(cache.covariance[np.ix_(idx, idx)]))
    var = (n + 1) / ((n - 1) * (n - 2)) * _pair_determinant(cache, p) * _pair_determinant(
        cache, q
    ) - det4 / (n - 2)
    if var <= 0.0:
        raise DegenerateDataError(
            f"non-positive variance estimate for tetrad over {t.quad}: "
            "covariance submatrix is near-singular"
        )
    z = diff / float(np.sqrt(var))
    return bool(abs(z) <= cfg.critical_value)


def bollen_test(cache: MomentCache, t: TetradIndex, cfg: SignificanceConfig) -> bool:
    """Distribution-free decision using fourth moments, by the delta method.

    The gradient of the tetrad difference with respect to the six covariances
    of the quad is contracted against the asymptotic covariance of sample
    covariances, cov(s_ij, s_kl) = (m4[i,j,k,l] - s_ij s_kl) / N, built from
    the cached central fourth moments.
    """
    diff = tetrad_difference(cache, t)
    if cfg.population_mode:
        return abs(diff) <= POPULATION_TOLERANCE
    if cache.fourth_moments is None:
        raise ValidationError("the distribution-free test requires fourth moments")
    n = cache.n_samples
    if n <= 4:
        raise ValidationError(f"sample size {n} too small for the tetrad test")

    pairs = list(itertools.combinations(t.quad, 2))
    grad = dict.fromkeys(pairs, 0.0)

    def bump(x: str, y: str, amount: float) -> None:
        key = (x, y) if (x, y) in grad else (y, x)
        grad[key] += amount

    (a1, b1), (c1, d1) = t.left_pairs
    (a2, b2), (c2, d2) = t.right_pairs
    bump(a1, b1, cache.cov(c1, d1))
    bump(c1, d1, cache.cov(a1, b1))
    bump(a2, b2, -cache.cov(c2, d2))
    bump(c2, d2, -cache.cov(a2, b2))

    g = np.array([grad[p] for p in pairs])
    w = np.empty((len(pairs), len(pairs)))
    for r, (i, j) in enumerate(pairs):
        for s, (k, l) in enumerate(pairs):
            w[r, s] = cache.fourth(i, j, k, l) - cache.cov(i, j) * cache.cov(k, l)
    var = float(g @ w @ g) / n
    if var <= 0.0:
        raise DegenerateDataError(
            f"non-positive variance estimate for tetrad over {t.quad} "
            "(distribution-free test)"
        )
    z = diff / float(np.sqrt(var))
    return bool(abs(z) <= cfg.critical_value)
