"""Comparison models: raw ensemble frequencies, Platt calibration, fixed-weight MME."""

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, softmax

from .blend import winsorize_logit
from .errors import ValidationError
from .evaluate import one_hot, rps
from .onset import forecast_onset_bins
from .seasons import N_BINS


def raw_model_bin_probs(ensemble, config):
    """Fraction of members whose forecast onset falls in each bin."""
    bins = forecast_onset_bins(ensemble, config)
    return np.bincount(bins - 1, minlength=N_BINS) / len(bins)


# -- Platt scaling -----------------------------------------------------------


@dataclass
class PlattParams:
    """Per-bin ``(a_j, b_j)``; ``degenerate[j]`` marks identity passthrough."""

    a: np.ndarray
    b: np.ndarray
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(N_BINS, bool))

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.degenerate = np.asarray(self.degenerate, dtype=bool)
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValidationError("Platt parameters must be finite")
        if np.any(self.a[~self.degenerate] <= 0):
            warnings.warn("non-monotone Platt calibration (a <= 0)", RuntimeWarning)


def _logistic_fit(s, y, ridge=1e-9, tol=1e-10, max_iter=100):
    """Two-parameter logistic regression of ``y`` on ``s`` by Newton's method."""
    X = np.column_stack([s, np.ones_like(s)])
    w = np.zeros(2)
    for _ in range(max_iter):
        p = expit(X @ w)
        g = X.T @ (p - y) / len(y) + 2 * ridge * w
        if np.max(np.abs(g)) < tol:
            break
        H = (X * (p * (1 - p))[:, None]).T @ X / len(y) + 2 * ridge * np.eye(2)
        w = w - np.linalg.solve(H, g)
    return w


def platt_fit(raw_probs, outcomes):
    """Fit one logistic map per bin on the winsorized logit of the raw probability."""
    P = np.asarray(raw_probs, dtype=float)
    y = np.asarray(outcomes, dtype=int)
    a, b = np.ones(N_BINS), np.zeros(N_BINS)
    degenerate = np.zeros(N_BINS, bool)
    s = winsorize_logit(P)
    for j in range(N_BINS):
        hit = (y == j + 1).astype(float)
        if hit.min() == hit.max():
            degenerate[j] = True
            continue
        a[j], b[j] = _logistic_fit(s[:, j], hit)
    if degenerate.any():
        warnings.warn(
            f"Platt bins {list(np.flatnonzero(degenerate) + 1)} never/always occur; passed through",
            RuntimeWarning,
        )
    return PlattParams(a, b, degenerate)


def platt_apply(params, raw):
    """Calibrate each bin then renormalize; degenerate bins pass through."""
    P = np.atleast_2d(np.asarray(raw, dtype=float))
    s = winsorize_logit(P)
    q = expit(params.a * s + params.b)
    q = np.where(params.degenerate, P, q)
    q = q / q.sum(axis=1, keepdims=True)
    return q[0] if np.ndim(raw) == 1 else q


# -- multimodel ensemble --------------------------------------------------------


def mme_predict(weights, component_probs):
    """Convex combination of component probability arrays ``(K, n, 5)``."""
    w = np.asarray(weights, dtype=float)
    comps = np.asarray(component_probs, dtype=float)
    return np.tensordot(w, comps, axes=1)


def simplex_grid(k, steps=10):
    """All weight vectors with ``k`` parts in multiples of ``1/steps``, lexicographic."""
    for parts in itertools.product(range(steps + 1), repeat=k):
        if sum(parts) == steps:
            yield np.array(parts, dtype=float) / steps


@dataclass
class MmeFit:
    weights: np.ndarray
    rps: float
    grid_weights: np.ndarray
    grid_rps: float
    converged: bool
    grad_norm: float

    def rpss(self, reference_rps):
        return 1.0 - self.rps / reference_rps


def optimize_mme_weights(component_probs, outcomes, steps=10, gtol=1e-8):
    """Post-hoc weights minimizing RPS (equivalently maximizing RPSS).

    Grid search over the simplex at ``1/steps`` resolution, ties to the
    lexicographically first optimum, then BFGS from the best grid point on
    softmax-parameterized weights.  The returned weights are never worse than
    the grid optimum; ``converged`` reports whether BFGS met ``gtol``.
    """
    comps = np.asarray(component_probs, dtype=float)
    k = comps.shape[0]
    if k < 2:
        raise ValidationError("an ensemble needs at least two components")
    y = np.asarray(outcomes, dtype=int)
    obs_cum = np.cumsum(one_hot(y), axis=1)
    comp_cum = np.cumsum(comps, axis=2)

    def score(w):
        return rps(mme_predict(w, comps), y)

    best_w, best = None, np.inf
    for w in simplex_grid(k, steps):
        s = score(w)
        if s < best - 1e-15:
            best_w, best = w, s

    def fun(z):
        w = softmax(z)
        diff = np.tensordot(w, comp_cum, axes=1) - obs_cum
        value = np.mean(np.sum(diff * diff, axis=1))
        dw = 2.0 * np.einsum("nm,knm->k", diff, comp_cum) / len(y)
        # chain rule through softmax
        dz = w * (dw - w @ dw)
        return value, dz

    z0 = np.log(np.maximum(best_w, 1e-6))
    res = minimize(fun, z0, jac=True, method="BFGS", options={"gtol": gtol, "maxiter": 1000})
    w_opt = softmax(res.x)
    grad_norm = float(np.linalg.norm(res.jac))
    converged = bool(res.success and grad_norm < gtol) or grad_norm < gtol
    s_opt = score(w_opt)
    if s_opt < best:
        weights, final = w_opt, s_opt
    else:
        weights, final = best_w, best
    if not converged:
        warnings.warn(f"MME BFGS stopped at gradient norm {grad_norm:.2e}", RuntimeWarning)
    return MmeFit(weights, final, best_w, best, converged, grad_norm)
