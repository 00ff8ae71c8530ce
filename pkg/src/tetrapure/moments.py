"""Sample moments and vanishing-correlation hypothesis tests.

MomentCache bundles the sample size, covariance matrix, and (optionally) the
table of central fourth moments needed by the distribution-free tetrad test.
All caches are immutable after construction; the tests below are pure
functions over them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from .errors import DegenerateDataError, UnknownLabelError, ValidationError

#: |value| at or below this is treated as exactly zero in population mode.
POPULATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SignificanceConfig:
    """Decision policy for all vanishing-correlation and tetrad tests.

    alpha governs any test invoked directly. The decision oracle runs its
    three decision families at distinct levels: marginal correlations at
    alpha, partial-correlation nondegeneracy guards at partial_alpha, and
    tetrad constraints at tetrad_alpha. The guards want high power against
    near-zero alternatives (declaring "vanishes" on an attenuated but nonzero
    partial discards a valid certificate), while a single certificate needs
    up to 27 tetrad decisions to come out right simultaneously, so its
    per-test level is scaled down, in the spirit of a multiple-comparison
    correction.

    population_mode switches every decision to exact-arithmetic thresholding
    at POPULATION_TOLERANCE, for oracle tests on analytic covariances.
    """

    alpha: float = 0.05
    test_kind: str = "wishart"
    population_mode: bool = False
    partial_alpha: float = 0.9
    tetrad_alpha: float = 0.005

    def __post_init__(self) -> None:
        for name in ("alpha", "partial_alpha", "tetrad_alpha"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValidationError(f"{name} must lie in (0,1), got {value}")
        if self.test_kind not in ("wishart", "bollen"):
            raise ValidationError(f"test_kind must be 'wishart' or 'bollen', got {self.test_kind!r}")

    @property
    def critical_value(self) -> float:
        return float(norm.ppf(1.0 - self.alpha / 2.0))

    def at_alpha(self, alpha: float) -> "SignificanceConfig":
        return SignificanceConfig(
            alpha=alpha,
            test_kind=self.test_kind,
            population_mode=self.population_mode,
            partial_alpha=self.partial_alpha,
            tetrad_alpha=self.tetrad_alpha,
        )


@dataclass(frozen=True)
class MomentCache:
    """Sample size, labelled covariance matrix, optional fourth moments."""

    n_samples: int
    labels: tuple[str, ...]
    covariance: np.ndarray
    fourth_moments: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        cov = np.asarray(self.covariance, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] != len(self.labels):
            raise ValidationError("covariance must be square and match the label list")
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise ValidationError("covariance matrix must be symmetric")
        if np.any(np.diag(cov) <= 0):
            bad = [self.labels[i] for i in np.flatnonzero(np.diag(cov) <= 0)]
            raise DegenerateDataError(f"non-positive variance for: {', '.join(bad)}")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("duplicate variable labels")
        cov.flags.writeable = False
        object.__setattr__(self, "covariance", cov)
        if self.fourth_moments is not None:
            m4 = np.asarray(self.fourth_moments, dtype=float)
            if m4.shape != (len(self.labels),) * 4:
                raise ValidationError("fourth-moment table has the wrong shape")
            m4.flags.writeable = False
            object.__setattr__(self, "fourth_moments", m4)

    @classmethod
    def from_covariance(
        cls, covariance: np.ndarray, labels: Sequence[str], n_samples: int
    ) -> "MomentCache":
        return cls(int(n_samples), tuple(labels), np.array(covariance, dtype=float))

    @cached_property
    def _index_map(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.labels)}

    def index(self, label: str) -> int:
        try:
            return self._index_map[label]
        except KeyError:
            raise UnknownLabelError(label) from None

    def cov(self, x: str, y: str) -> float:
        return float(self.covariance[self.index(x), self.index(y)])

    def correlation(self, x: str, y: str) -> float:
        i, j = self.index(x), self.index(y)
        c = self.covariance
        return float(c[i, j] / np.sqrt(c[i, i] * c[j, j]))

    def fourth(self, a: str, b: str, c: str, d: str) -> float:
        if self.fourth_moments is None:
            raise ValidationError("fourth moments were not built for this cache")
        idx = tuple(self.index(v) for v in (a, b, c, d))
        return float(self.fourth_moments[idx])


def build_moments(
    data: np.ndarray,
    labels: Sequence[str],
    with_fourth: bool = False,
) -> MomentCache:
    """Build a MomentCache from an N x n data table.

    Covariance uses denominator N-1; the fourth-moment table, when requested,
    stores plain means of centered four-way products. One pass for the
    covariance, one more for the fourth moments.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValidationError("data must be a 2-d table (rows = observations)")
    n_rows, n_cols = data.shape
    if n_cols != len(labels):
        raise ValidationError("label count does not match column count")
    if n_rows < 2:
        raise ValidationError(f"need at least 2 observations, got {n_rows}")
    if np.isnan(data).any():
        raise ValidationError("data contains missing values")
    centered = data - data.mean(axis=0)
    variances = (centered**2).sum(axis=0) / (n_rows - 1)
    if np.any(variances <= 0):
        bad = [labels[i] for i in np.flatnonzero(variances <= 0)]
        raise DegenerateDataError(f"constant column(s): {', '.join(bad)}")
    cov = centered.T @ centered / (n_rows - 1)
    fourth = None
    if with_fourth:
        fourth = np.einsum("ta,tb,tc,td->abcd", centered, centered, centered, centered)
        fourth /= n_rows
    return MomentCache(n_rows, tuple(labels), cov, fourth)


def partial_correlation(
    cache: MomentCache, x: str, y: str, cond: Sequence[str] = ()
) -> float:
    """Correlation of x and y, optionally given a single conditioning variable."""
    cond = list(cond)
    if len(cond) > 1:
        raise ValidationError("at most one conditioning variable is supported")
    names = [x, y, *cond]
    if len(set(names)) != len(names):
        raise ValidationError("variables in a partial correlation must be distinct")
    r_xy = cache.correlation(x, y)
    if not cond:
        return r_xy
    (z,) = cond
    r_xz = cache.correlation(x, z)
    r_yz = cache.correlation(y, z)
    denom_sq = (1.0 - r_xz**2) * (1.0 - r_yz**2)
    if denom_sq <= 0.0:
        raise DegenerateDataError(
            f"partial correlation of ({x},{y}) given {z} is undefined: "
            "a conditioning correlation has magnitude 1"
        )
    return (r_xy - r_xz * r_yz) / float(np.sqrt(denom_sq))


def test_vanishing_partial_correlation(
    cache: MomentCache,
    x: str,
    y: str,
    cond: Sequence[str],
    cfg: SignificanceConfig,
) -> bool:
    """True iff the (partial) correlation of x and y is judged to vanish.

    Uses the Fisher z transform with degrees-of-freedom correction
    N - 3 - |cond|; in population mode the decision is |r| <= tolerance.
    """
    r = partial_correlation(cache, x, y, cond)
    if cfg.population_mode:
        return abs(r) <= POPULATION_TOLERANCE
    dof = cache.n_samples - 3 - len(cond)
    if dof <= 0:
        raise ValidationError(
            f"sample size {cache.n_samples} too small to test with {len(cond)} conditioners"
        )
    if abs(r) >= 1.0:
        return False
    z = abs(np.arctanh(r)) * np.sqrt(dof)
    return bool(z <= cfg.critical_value)
