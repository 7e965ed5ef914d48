"""Multinomial-logit blend of evolving climatology with two rainfall models.

For each lead-week bin ``j`` the predictors are::

    x0 = 1, x1 = pi, x2 = alpha, x3 = nu, x4 = pi*alpha, x5 = pi*nu,
    x6 = alpha*nu, x7 = pi*alpha*nu, x8 = beta, x9 = mu

and the log-odds of outcome bin ``j'`` against bin 5 is
``sum_j sum_l t[l, j, j'] * x[l, j]``.

Fitting happens on standardized base features (pi, alpha, nu, beta, mu per
bin) with interactions formed from the standardized values; the solution is
expanded back to raw-feature coefficients ``t``.  The four per-bin
intercepts of an outcome are only identified through their sum, which is
split evenly.
"""

import datetime as dt
import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import logsumexp, softmax

from .errors import LeadWindowExceedsHorizon, NonConvergence, SingleClass, ValidationError
from .seasons import N_BINS, WEEK_DAYS

P_LOW, P_HIGH = 1e-4, 0.99
N_TERMS = 10
N_LEAD = 4
N_OUT = 4
BASE = ("pi", "alpha", "nu", "beta", "mu")
# monomial of base features for each term l >= 1
TERMS = (
    ("pi",),
    ("alpha",),
    ("nu",),
    ("pi", "alpha"),
    ("pi", "nu"),
    ("alpha", "nu"),
    ("pi", "alpha", "nu"),
    ("beta",),
    ("mu",),
)
_TERM_INDEX = {frozenset(m): l + 1 for l, m in enumerate(TERMS)}
_TERM_INDEX[frozenset()] = 0


def winsorize_logit(p, low=P_LOW, high=P_HIGH):
    """Logit of ``p`` after clamping it into ``[low, high]``."""
    q = np.clip(np.asarray(p, dtype=float), low, high)
    out = np.log(q / (1.0 - q))
    return float(out) if out.ndim == 0 else out


@dataclass
class FeatureRow:
    grid_id: str
    init_date: dt.date
    pi: np.ndarray
    alpha: np.ndarray
    nu: np.ndarray
    beta: np.ndarray
    mu: np.ndarray
    outcome: int | None = None

    def __post_init__(self):
        for name in BASE:
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (N_LEAD,) or not np.all(np.isfinite(v)):
                raise ValidationError(f"{name} must be four finite values")
            setattr(self, name, v)
        if self.outcome is not None and self.outcome not in range(1, N_BINS + 1):
            raise ValidationError(f"outcome bin must be 1..5, got {self.outcome}")

    @property
    def forecast_id(self):
        return (self.grid_id, self.init_date)


def _window_extremes(rain, width, reducer):
    """Per-bin extreme of ``width``-day sums over windows starting in the bin."""
    L = len(rain)
    c = np.concatenate(([0.0], np.cumsum(rain)))
    sums = c[width:] - c[:-width]  # sums[s] covers lead days s+1 .. s+width
    out = np.empty(N_LEAD)
    for j in range(N_LEAD):
        first = WEEK_DAYS * j
        last = min(WEEK_DAYS * (j + 1) - 1, L - width)
        if last < first:
            raise LeadWindowExceedsHorizon(
                f"no {width}-day window starting in week {j + 1} fits {L} lead days"
            )
        out[j] = reducer(sums[first : last + 1])
    return out


def rainfall_features(ensemble, threshold_mm, dry_threshold_mm=0.0):
    """``(max 5-day sum - threshold, min 10-day sum - dry_threshold)`` per bin.

    Multi-member ensembles are collapsed to their daily member mean first.
    """
    rain = ensemble.mean_rain() if hasattr(ensemble, "mean_rain") else np.asarray(ensemble, float)
    wet = _window_extremes(rain, 5, np.max) - threshold_mm
    dry = _window_extremes(rain, 10, np.min) - dry_threshold_mm
    return wet, dry


def build_features(evolving, ens_a, ens_b, threshold_mm, outcome=None, dry_threshold_mm=0.0):
    """Assemble one :class:`FeatureRow` from evolving probabilities and two models."""
    if ens_a.init_date != ens_b.init_date or ens_a.grid_id != ens_b.grid_id:
        raise ValidationError("model ensembles must share grid cell and init date")
    alpha, beta = rainfall_features(ens_a, threshold_mm, dry_threshold_mm)
    nu, mu = rainfall_features(ens_b, threshold_mm, dry_threshold_mm)
    pi = winsorize_logit(np.asarray(evolving, dtype=float)[:N_LEAD])
    return FeatureRow(ens_a.grid_id, ens_a.init_date, pi, alpha, nu, beta, mu, outcome)


def stack_rows(rows):
    """Base features as an ``(n, 5, 4)`` array ordered like :data:`BASE`."""
    return np.stack([np.stack([getattr(r, b) for b in BASE]) for r in rows])


def raw_design(base):
    """Raw predictors ``(n, 10, 4)`` (term l, lead bin j) from base features."""
    named = {b: base[:, i, :] for i, b in enumerate(BASE)}
    x = np.empty((base.shape[0], N_TERMS, N_LEAD))
    x[:, 0, :] = 1.0
    for l, mono in enumerate(TERMS, start=1):
        x[:, l, :] = np.prod([named[b] for b in mono], axis=0)
    return x


@dataclass
class BlendModel:
    """Fitted blend.

    ``coef`` is ``t[l, j, j']`` with shape ``(10, 4, 4)`` on raw features;
    ``mean`` / ``scale`` (shape ``(5, 4)``, base feature x bin) are the
    standardization constants used while fitting.
    """

    coef: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    ridge: float = 0.0
    std_coef: np.ndarray | None = None
    active: np.ndarray | None = None
    nll_history: list = field(default_factory=list)
    grad_norm: float = float("nan")
    n_iter: int = 0

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=float)
        if self.coef.shape != (N_TERMS, N_LEAD, N_OUT) or not np.all(np.isfinite(self.coef)):
            raise ValidationError("blend coefficients must be a finite 10x4x4 array")
        if np.any(np.asarray(self.scale) <= 0):
            raise ValidationError("standardization scales must be positive")


# -- standardized design ----------------------------------------------------


def _standardize(base, mean, scale):
    return (base - mean[None]) / scale[None]


def standardized_design(base, mean, scale):
    """Columns: shared intercept then, per bin, the nine standardized terms."""
    z = _standardize(base, mean, scale)
    named = {b: z[:, i, :] for i, b in enumerate(BASE)}
    n = base.shape[0]
    cols = [np.ones((n, 1))]
    for j in range(N_LEAD):
        block = np.empty((n, len(TERMS)))
        for l, mono in enumerate(TERMS):
            block[:, l] = np.prod([named[b][:, j] for b in mono], axis=0)
        cols.append(block)
    return np.hstack(cols)


def _fit_standardization(base):
    mean = base.mean(axis=0)
    scale = base.std(axis=0)
    const = scale <= 1e-12 * np.maximum(1.0, np.abs(mean))
    # constant features centre exactly to zero so their columns drop out
    mean = np.where(const, base[0], mean)
    scale = np.where(const, 1.0, scale)
    return mean, scale


def destandardize(std_coef, mean, scale):
    """Expand standardized-basis coefficients ``(37, 4)`` into raw ``t``.

    A standardized monomial prod_v (a_v x_v + c_v) with a = 1/scale and
    c = -mean/scale expands into raw monomials over subsets of its factors;
    the term set is closed under this expansion.
    """
    a = 1.0 / scale
    c = -mean / scale
    t = np.zeros((N_TERMS, N_LEAD, N_OUT))
    intercept = std_coef[0].copy()
    for j in range(N_LEAD):
        for l, mono in enumerate(TERMS):
            w = std_coef[1 + j * len(TERMS) + l]
            for r in range(len(mono) + 1):
                for kept in itertools.combinations(mono, r):
                    factor = 1.0
                    for v in mono:
                        i = BASE.index(v)
                        factor *= a[i, j] if v in kept else c[i, j]
                    target = _TERM_INDEX[frozenset(kept)]
                    if target == 0:
                        intercept = intercept + factor * w
                    else:
                        t[target, j] += factor * w
    t[0] = intercept[None, :] / N_LEAD
    return t


# -- objective ----------------------------------------------------------------


def _penalty_mask(n_cols):
    mask = np.ones((n_cols, N_OUT))
    mask[0] = 0.0  # intercept unpenalized
    return mask


def objective(w, Z, y, ridge):
    """Mean negative log-likelihood plus ridge, and its gradient.

    ``w`` is flattened ``(d, 4)``; ``y`` holds outcome bins 1..5.
    """
    n, d = Z.shape
    W = w.reshape(d, N_OUT)
    S = np.hstack([Z @ W, np.zeros((n, 1))])
    lse = logsumexp(S, axis=1)
    nll = np.mean(lse - S[np.arange(n), y - 1])
    P = np.exp(S - lse[:, None])
    Y = np.zeros_like(P)
    Y[np.arange(n), y - 1] = 1.0
    mask = _penalty_mask(d)
    value = nll + ridge * np.sum(mask * W * W)
    grad = Z.T @ (P - Y)[:, :N_OUT] / n + 2.0 * ridge * mask * W
    return value, grad.ravel()


def _hessian(w, Z, ridge):
    n, d = Z.shape
    W = w.reshape(d, N_OUT)
    P = softmax(np.hstack([Z @ W, np.zeros((n, 1))]), axis=1)[:, :N_OUT]
    H = np.empty((d, N_OUT, d, N_OUT))
    for a in range(N_OUT):
        for b in range(a, N_OUT):
            weight = P[:, a] * ((a == b) - P[:, b]) / n
            block = Z.T @ (weight[:, None] * Z)
            H[:, a, :, b] = block
            H[:, b, :, a] = block
    H = H.reshape(d * N_OUT, d * N_OUT)
    H += np.diag(2.0 * ridge * _penalty_mask(d).ravel())
    return H


def _newton(Z, y, ridge, tol, max_iter):
    d = Z.shape[1]
    w = np.zeros(d * N_OUT)
    value, grad = objective(w, Z, y, ridge)
    history = [value]
    for it in range(max_iter):
        gnorm = np.max(np.abs(grad))
        if gnorm < tol:
            return w, history, gnorm, it
        H = _hessian(w, Z, ridge)
        try:
            step = -scipy.linalg.solve(H, grad, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            step = -np.linalg.lstsq(H, grad, rcond=None)[0]
        slope = grad @ step
        if slope >= 0:  # not a descent direction; fall back to gradient
            step, slope = -grad, -(grad @ grad)
        lr = 1.0
        while True:
            new_w = w + lr * step
            new_value, new_grad = objective(new_w, Z, y, ridge)
            if new_value <= value + 1e-4 * lr * slope or lr < 1e-12:
                break
            lr *= 0.5
        if new_value > value:  # line search failed; stop at current iterate
            return w, history, gnorm, it
        w, value, grad = new_w, new_value, new_grad
        history.append(value)
    gnorm = np.max(np.abs(grad))
    if gnorm < tol:
        return w, history, gnorm, max_iter
    raise NonConvergence(f"blend fit did not converge in {max_iter} iterations", gnorm)


def fit_blend(rows, ridge=1e-6, tol=1e-8, max_iter=500):
    """Fit the blend by Newton's method on the convex ridge-penalized NLL.

    Convergence means gradient max-norm below ``tol`` on the mean NLL.
    Zero-variance feature columns are dropped (coefficient zero).
    """
    if len(rows) == 0:
        raise SingleClass("no training rows")
    if any(r.outcome is None for r in rows):
        raise ValidationError("training rows need outcomes")
    y = np.array([r.outcome for r in rows], dtype=int)
    return fit_blend_arrays(stack_rows(rows), y, ridge, tol, max_iter)


def fit_blend_arrays(base, y, ridge=1e-6, tol=1e-8, max_iter=500):
    """:func:`fit_blend` on an ``(n, 5, 4)`` base-feature array."""
    base = np.asarray(base, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(y) == 0 or len(np.unique(y)) < 2:
        raise SingleClass("training outcomes contain a single class")
    if not np.all(np.isfinite(base)):
        raise ValidationError("non-finite blend features")
    mean, scale = _fit_standardization(base)
    Z_full = standardized_design(base, mean, scale)
    active = np.any(np.abs(Z_full) > 0, axis=0)
    active[0] = True
    Z = Z_full[:, active]
    w, history, gnorm, n_iter = _newton(Z, y, ridge, tol, max_iter)
    if not np.isfinite(gnorm) or gnorm >= tol:
        raise NonConvergence("blend line search stalled before convergence", gnorm)
    std_coef = np.zeros((Z_full.shape[1], N_OUT))
    std_coef[active] = w.reshape(-1, N_OUT)
    coef = destandardize(std_coef, mean, scale)
    return BlendModel(
        coef, mean, scale, ridge, std_coef, active, history, float(gnorm), n_iter
    )


def _as_base(rows):
    if isinstance(rows, FeatureRow):
        rows = [rows]
    if isinstance(rows, np.ndarray):
        return rows
    return stack_rows(rows)


def blend_scores(coef, rows):
    """Linear scores ``(n, 4)`` against the reference bin from raw features."""
    x = raw_design(_as_base(rows))
    return np.einsum("nlj,ljk->nk", x, coef)


def predict_blend(model, rows):
    """Bin probabilities; a single row gives a 5-vector, else ``(n, 5)``."""
    single = isinstance(rows, FeatureRow)
    scores = blend_scores(model.coef, rows)
    p = softmax(np.hstack([scores, np.zeros((scores.shape[0], 1))]), axis=1)
    return p[0] if single else p


def predict_blend_standardized(model, rows):
    """Same prediction computed in the standardized basis (round-trip check)."""
    Z = standardized_design(_as_base(rows), model.mean, model.scale)
    scores = Z @ model.std_coef
    return softmax(np.hstack([scores, np.zeros((scores.shape[0], 1))]), axis=1)
