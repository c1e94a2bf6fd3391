"""Estimators and hypothesis tests used by the verification harness."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from scipy.special import kolmogorov

from .errors import DomainError, InsufficientDataError

__all__ = [
    "MomentEstimate", "mc_moment", "ks_two_sample", "normality_check",
    "tail_slope", "corr",
]


@dataclass(frozen=True)
class MomentEstimate:
    value: complex
    stderr: float
    count: int

    def within(self, target, k=4.0, atol=0.0) -> bool:
        return abs(self.value - target) <= k * self.stderr + atol


def mc_moment(xs, n=None) -> MomentEstimate:
    """Sample mean with standard error ``std / sqrt(N)``.

    For complex data the standard error is that of the modulus of the
    deviation, ``sqrt(Var Re + Var Im) / sqrt(N)``.
    """
    xs = np.asarray(xs)
    if n is not None:
        xs = xs[:n]
    count = xs.size
    if count < 2:
        raise DomainError("need at least two samples for a standard error")
    mean = xs.mean()
    if np.iscomplexobj(xs):
        var = xs.real.var(ddof=1) + xs.imag.var(ddof=1)
    else:
        var = xs.var(ddof=1)
        mean = float(mean)
    return MomentEstimate(mean, float(np.sqrt(var / count)), count)


def ks_two_sample(xs, ys):
    """Two-sample Kolmogorov-Smirnov test; returns ``(D, p_value)``.

    The p-value uses the asymptotic Kolmogorov distribution at
    ``sqrt(nx ny / (nx + ny)) D``.
    """
    xs = np.sort(np.asarray(xs, dtype=float).ravel())
    ys = np.sort(np.asarray(ys, dtype=float).ravel())
    nx, ny = len(xs), len(ys)
    if nx < 50 or ny < 50:
        raise DomainError("KS test needs at least 50 points per sample")
    grid = np.concatenate([xs, ys])
    cdf_x = np.searchsorted(xs, grid, side="right") / nx
    cdf_y = np.searchsorted(ys, grid, side="right") / ny
    d = float(np.max(np.abs(cdf_x - cdf_y)))
    en = np.sqrt(nx * ny / (nx + ny))
    return d, float(kolmogorov(en * d))


def normality_check(xs):
    """Mean, variance, skewness, excess kurtosis (with stderrs) and a KS p-value.

    The KS test compares the standardized sample with N(0, 1), so it judges
    shape only; location and scale are reported separately.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    n = len(xs)
    if n < 1000:
        raise DomainError("normality check needs at least 1000 points")
    mean = xs.mean()
    var = xs.var(ddof=1)
    c = xs - mean
    m4 = np.mean(c**4)
    skew = float(sps.skew(xs))
    kurt = float(sps.kurtosis(xs))
    z = c / np.sqrt(var)
    ks_p = float(sps.kstest(z, "norm").pvalue)
    return {
        "mean": float(mean), "mean_se": float(np.sqrt(var / n)),
        "variance": float(var), "variance_se": float(np.sqrt(max(m4 - var**2, 0) / n)),
        "skewness": skew, "skewness_se": float(np.sqrt(6.0 / n)),
        "excess_kurtosis": kurt, "excess_kurtosis_se": float(np.sqrt(24.0 / n)),
        "ks_p": ks_p, "count": n,
    }


def tail_slope(samples, fit_window=None, bins=20, max_empty=0.2):
    """Power-law exponent of the density near zero; returns ``(slope, stderr)``.

    The density is histogrammed on ``bins`` logarithmic bins and
    ``log(density)`` is regressed on ``log(eps)`` with count weights.
    ``fit_window`` is ``(eps_lo, eps_hi)``; by default it spans the two
    decades of cumulative probability ending at the 5th percentile, i.e.
    from the 0.05% quantile to the 5% quantile.
    """
    x = np.asarray(samples, dtype=float).ravel()
    x = x[x > 0]
    if len(x) < 100_000:
        raise InsufficientDataError("tail fit needs at least 1e5 positive samples")
    if fit_window is None:
        lo, hi = np.quantile(x, [0.0005, 0.05])
    else:
        lo, hi = fit_window
    if not 0 < lo < hi:
        raise DomainError(f"invalid fit window ({lo}, {hi})")
    edges = np.geomspace(lo, hi, bins + 1)
    counts, _ = np.histogram(x, edges)
    if np.mean(counts == 0) > max_empty:
        raise InsufficientDataError(
            f"{int(np.sum(counts == 0))} of {bins} bins are empty in the fit window")
    keep = counts > 0
    dens = counts[keep] / (len(x) * np.diff(edges)[keep])
    logx = np.log(np.sqrt(edges[:-1] * edges[1:]))[keep]
    logy = np.log(dens)
    w = counts[keep].astype(float)
    # Weighted least squares; Var(log count) ~ 1 / count.
    xbar = np.sum(w * logx) / w.sum()
    sxx = np.sum(w * (logx - xbar) ** 2)
    slope = np.sum(w * (logx - xbar) * logy) / sxx
    return float(slope), float(np.sqrt(1.0 / sxx))


def corr(xs, ys):
    """Pearson correlation with asymptotic standard error ``1 / sqrt(N)``."""
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if len(xs) != len(ys):
        raise DomainError("correlation needs equal-length samples")
    if len(xs) < 1000:
        raise DomainError("correlation needs at least 1000 pairs")
    r = float(np.corrcoef(xs, ys)[0, 1])
    return r, 1.0 / np.sqrt(len(xs))
