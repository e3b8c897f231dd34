"""Sampling and moments of univariate Gaussians truncated to arbitrary intervals.

Every latent-data update in the sampler reduces to draws from N(m, 1)
restricted to an interval, so this kernel has to stay accurate far into the
tails: a naive inverse-CDF draw underflows once the interval sits a few
standard deviations out and would silently return the bound itself.  The
sampler here switches between inverse-CDF (well-conditioned intervals) and
Robert-style rejection with exponential or uniform proposals (tail
intervals).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

__all__ = [
    "TruncInterval",
    "log_interval_mass",
    "sample_truncnorm",
    "sample_truncnorm_scaled",
    "truncnorm_moments",
]

# Standardized bound beyond which inverse-CDF sampling hands over to
# rejection proposals.
_TAIL_CUT = 4.0
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class TruncInterval:
    """Open interval (lower, upper); either bound may be infinite."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(
                f"degenerate truncation interval ({self.lower}, {self.upper})"
            )


def _sample_upper_tail(a, b, rng):
    """Draw standardized truncated normals on (a, b) with a >= _TAIL_CUT.

    Exponential proposal (Robert 1995) for wide or one-sided intervals,
    uniform proposal with ratio exp((a^2 - z^2)/2) for narrow two-sided ones.
    """
    alpha = 0.5 * (a + np.sqrt(a * a + 4.0))
    narrow = (b - a) * alpha < 1.0
    out = np.empty(a.shape)
    idx = np.arange(a.size)
    while idx.size:
        u = rng.random(idx.size)
        z = np.empty(idx.size)
        log_acc = np.empty(idx.size)
        nn = narrow[idx]
        if np.any(nn):
            sub = idx[nn]
            z[nn] = a[sub] + (b[sub] - a[sub]) * u[nn]
            log_acc[nn] = 0.5 * (a[sub] ** 2 - z[nn] ** 2)
        en = ~nn
        if np.any(en):
            sub = idx[en]
            z[en] = a[sub] - np.log1p(-u[en]) / alpha[sub]
            log_acc[en] = -0.5 * (z[en] - alpha[sub]) ** 2
        ok = (rng.random(idx.size) < np.exp(log_acc)) & (z < b[idx])
        out[idx[ok]] = z[ok]
        idx = idx[~ok]
    return out


def sample_truncnorm(mean, lower, upper, rng):
    """Draw from N(mean, 1) restricted to the open interval (lower, upper).

    All three arguments broadcast; a scalar is returned for scalar input.
    Bounds may be -inf/+inf.  Numerically stable for intervals at least
    8 standard deviations into either tail.

    Parameters
    ----------
    mean : array_like
        Mean of the untruncated Gaussian (unit variance is baked in).
    lower, upper : array_like
        Truncation bounds, lower < upper elementwise.
    rng : numpy.random.Generator
        Source of randomness; the caller owns stream partitioning.
    """
    mean = np.asarray(mean, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    scalar = mean.ndim == 0 and lower.ndim == 0 and upper.ndim == 0
    mean, lower, upper = np.broadcast_arrays(mean, lower, upper)
    if np.any(lower >= upper):
        raise ValueError("degenerate truncation interval: lower >= upper")

    a = (lower - mean).ravel()
    b = (upper - mean).ravel()
    x = np.empty(a.shape)

    right = a >= _TAIL_CUT
    left = b <= -_TAIL_CUT
    mid = ~(right | left)
    if np.any(mid):
        pa = ndtr(a[mid])
        pb = ndtr(b[mid])
        u = pa + (pb - pa) * rng.random(int(mid.sum()))
        x[mid] = ndtri(u)
    if np.any(right):
        x[right] = _sample_upper_tail(a[right], b[right], rng)
    if np.any(left):
        x[left] = -_sample_upper_tail(-b[left], -a[left], rng)

    # Floating-point rounding at the ndtri extremes can land exactly on a
    # bound; nudge back inside so samples are strictly interior.
    x = np.minimum(np.maximum(x, np.nextafter(a, np.inf)), np.nextafter(b, -np.inf))
    out = (mean.ravel() + x).reshape(mean.shape)
    return float(out) if scalar else out


def sample_truncnorm_scaled(mean, sigma, lower, upper, rng):
    """Draw from N(mean, sigma^2) on (lower, upper); proposal-side entry point."""
    mean = np.asarray(mean, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    a = (np.asarray(lower, dtype=float) - mean) / sigma
    b = (np.asarray(upper, dtype=float) - mean) / sigma
    return mean + sigma * sample_truncnorm(0.0, a, b, rng)


def _log_mass(a, b):
    """log(Phi(b) - Phi(a)) for a <= b with the mass on the left half line."""
    lb = log_ndtr(b)
    la = log_ndtr(a)
    with np.errstate(invalid="ignore"):
        out = lb + np.log1p(-np.exp(la - lb))
    # a = -inf contributes zero mass below, so the answer is just log Phi(b).
    return np.where(np.isneginf(a), lb, out)


def log_interval_mass(a, b):
    """log(Phi(b) - Phi(a)) for standardized bounds a < b, stable in both tails.

    Intervals leaning into the right tail are reflected onto the left one,
    where log_ndtr keeps full relative precision, so the result stays finite
    and accurate however far out the interval sits.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        flip = (a + b) > 0
    flip = np.where(np.isinf(a) & np.isinf(b), False, flip)
    aa = np.where(flip, -b, a)
    bb = np.where(flip, -a, b)
    return _log_mass(aa, bb)


def _x_phi_term(x, log_z):
    """x * phi(x) / Z with the x = 0 and |x| = inf limits handled."""
    finite = np.isfinite(x) & (x != 0.0)
    xs = np.where(finite, x, 1.0)
    term = np.sign(xs) * np.exp(np.log(np.abs(xs)) - 0.5 * xs * xs - _LOG_SQRT_2PI - log_z)
    return np.where(finite, term, 0.0)


def truncnorm_moments(mean, lower, upper):
    """Mean and variance of N(mean, 1) truncated to (lower, upper).

    Closed-form Mills-ratio expressions evaluated in log space, reflected
    onto whichever tail keeps the normalizing mass well conditioned.
    Broadcasts; returns a pair of arrays (or floats for scalar input).
    """
    mean = np.asarray(mean, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    scalar = mean.ndim == 0 and lower.ndim == 0 and upper.ndim == 0
    mean, lower, upper = np.broadcast_arrays(mean, lower, upper)
    if np.any(lower >= upper):
        raise ValueError("degenerate truncation interval: lower >= upper")

    a = lower - mean
    b = upper - mean
    # Reflect right-leaning intervals so the mass calculation happens on the
    # left tail, where log_ndtr keeps full relative precision.
    with np.errstate(invalid="ignore"):
        reflect = (a + b) > 0
    reflect = np.where(np.isinf(a) & np.isinf(b), False, reflect)
    ar = np.where(reflect, -b, a)
    br = np.where(reflect, -a, b)

    log_z = _log_mass(ar, br)
    log_phi_a = np.where(np.isinf(ar), -np.inf, -0.5 * ar * ar - _LOG_SQRT_2PI)
    log_phi_b = np.where(np.isinf(br), -np.inf, -0.5 * br * br - _LOG_SQRT_2PI)
    delta = np.exp(log_phi_a - log_z) - np.exp(log_phi_b - log_z)
    t = _x_phi_term(ar, log_z) - _x_phi_term(br, log_z)
    var = np.maximum(1.0 + t - delta * delta, 0.0)
    m = np.where(reflect, -delta, delta) + mean
    if scalar:
        return float(m), float(var)
    return m, var
