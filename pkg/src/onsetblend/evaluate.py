"""Verification metrics, reliability tables and the leave-one-year-out harness."""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySet, NoNegatives, NoPositives, ValidationError, ZeroClimatologyScore
from .seasons import N_BINS


def one_hot(outcomes, m=N_BINS):
    y = np.asarray(outcomes, dtype=int)
    out = np.zeros((len(y), m))
    out[np.arange(len(y)), y - 1] = 1.0
    return out


def _check(probs, outcomes):
    P = np.atleast_2d(np.asarray(probs, dtype=float))
    y = np.atleast_1d(np.asarray(outcomes, dtype=int))
    if len(y) == 0:
        raise EmptySet("no forecasts to score")
    if P.shape[0] != len(y):
        raise ValidationError("probabilities and outcomes differ in length")
    if np.any(y < 1) or np.any(y > P.shape[1]):
        raise ValidationError("outcome bins out of range")
    return P, y


def brier(probs, outcomes):
    """Multi-category Brier score: mean over forecasts of the summed squared error."""
    P, y = _check(probs, outcomes)
    return float(np.mean(np.sum((one_hot(y, P.shape[1]) - P) ** 2, axis=1)))


def rps(probs, outcomes):
    """Ranked probability score on cumulative bin probabilities."""
    P, y = _check(probs, outcomes)
    diff = np.cumsum(one_hot(y, P.shape[1]) - P, axis=1)
    return float(np.mean(np.sum(diff**2, axis=1)))


def skill(metric_value, climatology_value):
    if climatology_value <= 0:
        raise ZeroClimatologyScore("reference score must be positive")
    return 1.0 - metric_value / climatology_value


def auc_binary(scores, labels, tie_policy="half"):
    """Probability a positive outscores a negative.

    ``strict`` counts only ``p_pos > p_neg``; ``half`` adds 1/2 per tie.
    Computed by sorted search, exact in the pair counts.
    """
    if tie_policy not in ("strict", "half"):
        raise ValueError(f"unknown tie policy {tie_policy!r}")
    s = np.asarray(scores, dtype=float).ravel()
    lab = np.asarray(labels).ravel().astype(bool)
    pos, neg = s[lab], np.sort(s[~lab])
    if len(pos) == 0:
        raise NoPositives("no positive forecast-bin pairs")
    if len(neg) == 0:
        raise NoNegatives("no negative forecast-bin pairs")
    below = np.searchsorted(neg, pos, side="left")
    # integer count of doubled wins keeps the half policy exact
    wins2 = 2 * int(below.sum())
    if tie_policy == "half":
        wins2 += int((np.searchsorted(neg, pos, side="right") - below).sum())
    return wins2 / (2.0 * len(pos) * len(neg))


def auc(probs, outcomes, tie_policy="half"):
    """AUC pooling every forecast-bin pair as a separate binary forecast."""
    P, y = _check(probs, outcomes)
    return auc_binary(P, one_hot(y, P.shape[1]), tie_policy)


def reliability(probs, outcomes, n_groups=10, n_hist=10):
    """Decile reliability table plus a normalized probability histogram.

    Forecast-bin pairs are stably sorted by probability and cut into
    ``n_groups`` equal-count groups.  Returns a dict with ``mean_p``,
    ``observed`` and ``count`` per group, and ``hist`` with bins
    [0, .1), ..., [.9, 1.0] scaled so the first bin has height one.
    """
    P, y = _check(probs, outcomes)
    p = P.ravel()
    obs = one_hot(y, P.shape[1]).ravel()
    order = np.argsort(p, kind="stable")
    groups = np.array_split(order, n_groups)
    mean_p = np.array([p[g].mean() if len(g) else np.nan for g in groups])
    observed = np.array([obs[g].mean() if len(g) else np.nan for g in groups])
    count = np.array([len(g) for g in groups])
    idx = np.minimum((p * n_hist).astype(int), n_hist - 1)
    hist = np.bincount(idx, minlength=n_hist).astype(float)
    norm = hist[0] if hist[0] > 0 else hist.max()
    return {"mean_p": mean_p, "observed": observed, "count": count, "hist": hist / norm}


@dataclass
class ScoredSet:
    """Forecast probabilities with outcomes and their metadata."""

    probs: np.ndarray
    outcomes: np.ndarray
    grid_ids: list = field(default_factory=list)
    init_dates: list = field(default_factory=list)
    years: np.ndarray | None = None

    def __post_init__(self):
        self.probs = np.atleast_2d(np.asarray(self.probs, dtype=float))
        self.outcomes = np.asarray(self.outcomes, dtype=int)
        _check(self.probs, self.outcomes)
        if not np.allclose(self.probs.sum(axis=1), 1.0, atol=1e-6) or np.any(self.probs < 0):
            raise ValidationError("forecast probabilities must lie on the simplex")
        if self.years is None and self.init_dates:
            self.years = np.array([d.year for d in self.init_dates])

    def __len__(self):
        return len(self.outcomes)

    def subset(self, mask):
        mask = np.asarray(mask)
        pick = lambda seq: [v for v, m in zip(seq, mask) if m] if len(seq) else []
        return ScoredSet(
            self.probs[mask],
            self.outcomes[mask],
            pick(self.grid_ids),
            pick(self.init_dates),
            None if self.years is None else self.years[mask],
        )


@dataclass
class EvalReport:
    n: int
    brier: float
    rps: float
    auc: float
    bss: float
    rpss: float
    per_lead: list
    per_year: list
    reliability: dict
    scored: ScoredSet | None = None


def _bin_brier(P, y, j):
    return float(np.mean((P[:, j] - (y == j + 1)) ** 2))


def evaluate(scored, reference=None, tie_policy="half"):
    """Full report; ``reference`` (static climatology, same rows) gives skills."""
    P, y = scored.probs, scored.outcomes
    bs, rp = brier(P, y), rps(P, y)
    bss = rpss = float("nan")
    if reference is not None:
        R = np.asarray(reference.probs if isinstance(reference, ScoredSet) else reference)
        bss, rpss = skill(bs, brier(R, y)), skill(rp, rps(R, y))
    else:
        R = None

    def safe_auc(probs, labels):
        try:
            return auc_binary(probs, labels, tie_policy)
        except (NoPositives, NoNegatives):
            return float("nan")

    per_lead = []
    Y = one_hot(y, P.shape[1])
    for j in range(P.shape[1]):
        b = _bin_brier(P, y, j)
        row = {"bin": j + 1, "brier": b, "auc": safe_auc(P[:, j], Y[:, j]), "bss": float("nan")}
        if R is not None:
            ref = _bin_brier(R, y, j)
            row["bss"] = skill(b, ref) if ref > 0 else float("nan")
        per_lead.append(row)

    per_year = []
    if scored.years is not None:
        for year in np.unique(scored.years):
            m = scored.years == year
            row = {"year": int(year), "n": int(m.sum()), "auc": safe_auc(P[m], Y[m]), "bss": float("nan")}
            if R is not None:
                ref = brier(R[m], y[m])
                row["bss"] = skill(brier(P[m], y[m]), ref) if ref > 0 else float("nan")
            per_year.append(row)

    return EvalReport(
        n=len(y),
        brier=bs,
        rps=rp,
        auc=safe_auc(P, Y),
        bss=bss,
        rpss=rpss,
        per_lead=per_lead,
        per_year=per_year,
        reliability=reliability(P, y),
    )


def concat_scored(sets):
    sets = list(sets)
    if not sets:
        raise EmptySet("nothing to concatenate")
    years = None
    if all(s.years is not None for s in sets):
        years = np.concatenate([s.years for s in sets])
    return ScoredSet(
        np.vstack([s.probs for s in sets]),
        np.concatenate([s.outcomes for s in sets]),
        [g for s in sets for g in s.grid_ids],
        [d for s in sets for d in s.init_dates],
        years,
    )


def loocv_predictions(years, trainer, data):
    """Concatenated held-out predictions, one fold per year.

    ``data.split(year)`` gives ``(train, test)``; ``trainer(train, year)``
    returns a predictor and ``predictor(test)`` a :class:`ScoredSet`.
    """
    years = sorted(set(years))
    if len(years) < 2:
        raise ValidationError("leave-one-year-out needs at least two years")
    folds = []
    for year in years:
        train, test = data.split(year)
        predictor = trainer(train, year)
        folds.append(predictor(test))
    return concat_scored(folds)


def loocv_run(years, trainer, data, reference_trainer=None, tie_policy="half"):
    """Leave-one-year-out evaluation.

    ``reference_trainer`` (usually static climatology) is cross-validated the
    same way and supplies the skill-score denominators.  The concatenated
    held-out predictions are kept on ``report.scored``.
    """
    scored = loocv_predictions(years, trainer, data)
    reference = None
    if reference_trainer is not None:
        reference = loocv_predictions(years, reference_trainer, data)
    report = evaluate(scored, reference, tie_policy)
    report.scored = scored
    return report
