"""Gaussian-KDE onset climatology and its weekly bin probabilities."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateSample, ValidationError, ZeroSurvival
from .seasons import N_BINS, WEEK_DAYS, month_day_doy, season_doy

DEFAULT_SUPPORT = (month_day_doy(4, 1), month_day_doy(10, 31))

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Bandwidth:
    """Selected bandwidth; ``fallback`` is True when Silverman's rule was used."""

    sigma: float
    fallback: bool = False

    def __float__(self):
        return self.sigma


def _robust_scale(x):
    q75, q25 = np.percentile(x, [75, 25])
    sd = np.std(x, ddof=1)
    iqr = (q75 - q25) / 1.349
    return min(sd, iqr) if iqr > 0 else sd


def silverman_bandwidth(x):
    x = np.asarray(x, dtype=float)
    return 0.9 * _robust_scale(x) * len(x) ** -0.2


def _phi4(diffs_sq, n, h):
    # pairwise sum of the 4th derivative of the standard normal density,
    # diagonal (zero differences) included
    u = diffs_sq / (h * h)
    s = np.sum(np.exp(-u / 2.0) * (u * u - 6.0 * u + 3.0))
    return s / (n * (n - 1) * h**5 * _SQRT_2PI)


def _phi6(diffs_sq, n, h):
    u = diffs_sq / (h * h)
    s = np.sum(np.exp(-u / 2.0) * (u**3 - 15.0 * u * u + 45.0 * u - 15.0))
    return s / (n * (n - 1) * h**7 * _SQRT_2PI)


def _bisect(f, lo, hi, tol, max_iter):
    flo = f(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if hi - lo < tol:
            return mid, True
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi), False


def sheather_jones_bandwidth(doys, tol=1e-4, max_iter=200):
    """Sheather-Jones solve-the-equation plug-in bandwidth.

    Roots are found by bisection on data rescaled to unit robust scale, so
    the result is exactly scale-equivariant.  If the equation cannot be
    bracketed or bisection does not converge, Silverman's rule is returned
    with ``fallback=True``.
    """
    x = np.asarray(doys, dtype=float)
    n = len(x)
    if n < 2:
        raise DegenerateSample("need at least two onset dates")
    if np.ptp(x) == 0:
        raise DegenerateSample("all onset dates identical; supply a floor bandwidth")
    scale = _robust_scale(x)
    z = (x - x.mean()) / scale
    d2 = (z[:, None] - z[None, :]) ** 2

    # pilot bandwidths on the unit-scale data
    a = 1.24 * n ** (-1.0 / 7.0)
    b = 1.23 * n ** (-1.0 / 9.0)
    sd_a = _phi4(d2, n, a)
    td_b = -_phi6(d2, n, b)
    if not (sd_a > 0 and td_b > 0):
        return Bandwidth(silverman_bandwidth(x), True)
    alpha2 = 1.357 * (sd_a / td_b) ** (1.0 / 7.0)
    c1 = 1.0 / (2.0 * math.sqrt(math.pi) * n)

    def equation(h):
        sd = _phi4(d2, n, alpha2 * h ** (5.0 / 7.0))
        if sd <= 0:
            return -h
        return (c1 / sd) ** 0.2 - h

    hmax = 1.144 * n ** -0.2
    lo, hi = 0.1 * hmax, hmax
    for _ in range(20):
        if equation(lo) * equation(hi) < 0:
            break
        hi *= 1.2
    else:
        return Bandwidth(silverman_bandwidth(x), True)
    root, ok = _bisect(equation, lo, hi, tol / scale, max_iter)
    if not ok:
        return Bandwidth(silverman_bandwidth(x), True)
    return Bandwidth(root * scale, False)


@dataclass(frozen=True)
class ClimatologyKde:
    """Gaussian mixture over past onset days, truncated to ``support``."""

    grid_id: str
    onset_doys: tuple
    bandwidth_days: float
    support: tuple = DEFAULT_SUPPORT
    bandwidth_fallback: bool = False

    def __post_init__(self):
        if len(self.onset_doys) < 1:
            raise ValidationError("KDE needs onset dates")
        if not self.bandwidth_days > 0:
            raise ValidationError("bandwidth must be positive")
        if not self.support[0] < self.support[1]:
            raise ValidationError("empty KDE support")
        object.__setattr__(self, "onset_doys", tuple(float(d) for d in self.onset_doys))
        if self._raw_cdf(self.support[1]) - self._raw_cdf(self.support[0]) <= 0:
            raise ValidationError("KDE has no mass on its support")

    @property
    def _centers(self):
        return np.asarray(self.onset_doys)

    def _raw_cdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self._centers) / self.bandwidth_days
        return ndtr(z).mean(axis=-1)

    @property
    def mass(self):
        lo, hi = self.support
        return float(self._raw_cdf(hi) - self._raw_cdf(lo))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self._centers) / self.bandwidth_days
        dens = np.exp(-0.5 * z * z).mean(axis=-1) / (self.bandwidth_days * _SQRT_2PI)
        inside = (x >= self.support[0]) & (x <= self.support[1])
        return np.where(inside, dens / self.mass, 0.0)

    def cdf(self, x):
        lo, hi = self.support
        x = np.clip(np.asarray(x, dtype=float), lo, hi)
        return (self._raw_cdf(x) - self._raw_cdf(lo)) / self.mass


def fit_kde(doys, sigma=None, support=DEFAULT_SUPPORT, grid_id="", floor=None):
    """Fit the climatology; ``sigma`` defaults to the Sheather-Jones choice.

    ``floor`` is used when the sample is degenerate (identical dates) and, if
    given, also bounds the selected bandwidth from below.
    """
    fallback = False
    if sigma is None:
        try:
            bw = sheather_jones_bandwidth(doys)
            sigma, fallback = bw.sigma, bw.fallback
        except DegenerateSample:
            if floor is None:
                raise
            sigma, fallback = floor, True
        if floor is not None:
            sigma = max(sigma, floor)
    return ClimatologyKde(grid_id, tuple(doys), float(sigma), tuple(support), fallback)


def _bin_edges(init_doy):
    return init_doy + WEEK_DAYS * np.arange(N_BINS)


def _doy(init):
    return init if isinstance(init, (int, float, np.integer, np.floating)) else season_doy(init)


def static_bin_probs(dist, init):
    """Unconditional probability of onset in weeks 1-4 after ``init``.

    Bin j is ``(t0 + 7(j-1), t0 + 7j]`` for init day ``t0``.  Bin 5 collects
    everything else, including mass before the initialization date.
    ``dist`` is anything with a vectorised ``cdf``; ``init`` a date or doy.
    """
    cdf = np.asarray(dist.cdf(_bin_edges(_doy(init))), dtype=float)
    p = np.empty(N_BINS)
    p[:4] = np.diff(cdf)
    p[4] = 1.0 - p[:4].sum()
    return np.clip(p, 0.0, 1.0)


def survival(dist, init):
    return 1.0 - float(dist.cdf(_doy(init)))


def evolving_bin_probs(dist, init):
    """Climatology conditioned on no onset by the initialization date."""
    t0 = _doy(init)
    surv = survival(dist, t0)
    if surv <= 0:
        raise ZeroSurvival(f"no climatological onset mass after day {t0}")
    cdf = np.asarray(dist.cdf(_bin_edges(t0)), dtype=float)
    p = np.empty(N_BINS)
    p[:4] = np.diff(cdf) / surv
    p[4] = (1.0 - cdf[4]) / surv
    return p
