"""Modified Moron-Robertson onset detection.

A day ``d`` is the onset when, on or after the season's effective start:

* ``d`` is a wet day (``>= wet_day_mm``),
* the spell ``[d, d + spell_len - 1]`` totals at least ``spell_total_mm``,
* no ``dry_len``-day window lying entirely inside the ``followup_days`` after
  the spell totals less than ``dry_total_mm``.
"""

import datetime as dt
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptyHistory, SeriesTooShort, ValidationError
from .seasons import MAX_LEAD_BINNED, N_BINS, MokPolicy, lead_bin

# window totals are cumulative-sum differences; compare with slack so that
# decimal inputs summing exactly to a threshold are treated as equal
SUM_TOL = 1e-9


@dataclass(frozen=True, kw_only=True)
class OnsetConfig:
    spell_total_mm: float
    wet_day_mm: float = 1.0
    spell_len_days: int = 5
    dry_len_days: int = 10
    dry_total_mm: float = 5.0
    followup_days: int = 30
    season_start: tuple = (4, 1)
    season_end: tuple = (10, 31)
    mok_policy: MokPolicy = field(default_factory=MokPolicy)

    def __post_init__(self):
        if self.spell_len_days < 1:
            raise ValidationError("spell_len_days must be >= 1")
        if self.followup_days < self.dry_len_days or self.dry_len_days < 1:
            raise ValidationError("followup_days must be >= dry_len_days >= 1")
        if min(self.wet_day_mm, self.spell_total_mm, self.dry_total_mm) <= 0:
            raise ValidationError("onset thresholds must be positive")

    @classmethod
    def for_variant(cls, variant, **kwargs):
        """Config for ``true-mok``, ``clim-mok=MM-DD`` or ``none``.

        Removing the MOK filter also moves the season start to May 1.
        """
        policy = variant if isinstance(variant, MokPolicy) else MokPolicy.parse(variant)
        if policy.kind == "none":
            kwargs.setdefault("season_start", (5, 1))
        return cls(mok_policy=policy, **kwargs)

    def with_threshold(self, spell_total_mm):
        return replace(self, spell_total_mm=spell_total_mm)


@dataclass(frozen=True)
class OnsetRecord:
    grid_id: str
    year: int
    onset_date: dt.date | None


def effective_start(config, year, mok_date=None):
    start = dt.date(year, *config.season_start)
    kind = config.mok_policy.kind
    if kind == "true":
        if mok_date is None:
            raise ValidationError(f"true-MOK policy needs the {year} MOK date")
        return max(start, mok_date)
    if kind == "clim":
        return max(start, dt.date(year, *config.mok_policy.month_day))
    return start


def _window_sums(values, width):
    c = np.concatenate(([0.0], np.cumsum(values)))
    return c[width:] - c[:-width]


def _qualifying(values, config, first, last, horizon=None):
    """Boolean mask of qualifying candidate indices in ``[first, last]``.

    Candidates whose spell or full follow-up runs past ``len(values)`` are
    not qualifying, unless ``horizon`` is given: then follow-up windows are
    only checked up to ``horizon`` (censoring) and the spell must fit.
    Returns ``(mask, evaluable)``; ``evaluable`` marks candidates that
    could be fully judged.
    """
    n = len(values)
    S, D, F = config.spell_len_days, config.dry_len_days, config.followup_days
    cand = np.arange(first, last + 1)
    if len(cand) == 0:
        return np.zeros(0, bool), np.zeros(0, bool)
    spell = _window_sums(values, S) if n >= S else np.zeros(0)
    dry = _window_sums(values, D) if n >= D else np.zeros(0)
    limit = n if horizon is None else horizon

    # dry-window starts for candidate d: d+S .. d+S+F-D
    n_starts = F - D + 1
    mask = np.zeros(len(cand), bool)
    evaluable = np.zeros(len(cand), bool)
    for k, d in enumerate(cand):
        if d + S > n:
            continue
        if horizon is None and d + S + F > n:
            continue
        evaluable[k] = True
        if values[d] < config.wet_day_mm or spell[d] < config.spell_total_mm - SUM_TOL:
            continue
        s_lo = d + S
        s_hi = min(d + S + n_starts - 1, limit - D)
        if s_hi >= s_lo and np.min(dry[s_lo : s_hi + 1]) < config.dry_total_mm - SUM_TOL:
            continue
        mask[k] = True
    return mask, evaluable


def detect_onset(series, config, mok_date=None, year=None):
    """Onset date for one season of ``series``, or ``None``.

    ``year`` defaults to the series' first year.  The search runs from the
    effective start (season start, raised to the MOK date under a MOK
    policy) through ``season_end``.
    """
    year = series.start_date.year if year is None else year
    start = effective_start(config, year, mok_date)
    end = dt.date(year, *config.season_end)
    first = max(series.index_of(start), 0)
    last = min(series.index_of(end), len(series) - 1)
    if last < first:
        raise SeriesTooShort(f"{series.grid_id}: series does not cover the {year} season")
    mask, evaluable = _qualifying(series.values, config, first, last)
    if not evaluable.any():
        raise SeriesTooShort(
            f"{series.grid_id}: cannot evaluate the {config.followup_days}-day follow-up "
            f"for any {year} candidate"
        )
    hits = np.flatnonzero(mask)
    if len(hits) == 0:
        return None
    return series.date_at(first + hits[0])


def detect_onsets(series, config, mok_dates=None, years=None):
    """Per-year :class:`OnsetRecord` list for a multi-year series."""
    years = series.years() if years is None else years
    out = []
    for year in years:
        mok = None if mok_dates is None else mok_dates.get(year)
        out.append(OnsetRecord(series.grid_id, year, detect_onset(series, config, mok, year)))
    return out


def compute_five_day_threshold(histories, window=((6, 1), (9, 30)), override=None, spell_len_days=5):
    """Climatological five-day wet-spell amount for one grid cell.

    Defaults to ``spell_len_days`` times the mean, over years, of each
    year's mean daily rainfall inside ``window``.  ``override`` wins.
    """
    if override is not None:
        return float(override)
    yearly = []
    for series in histories:
        for year in series.years():
            first = max(series.index_of(dt.date(year, *window[0])), 0)
            last = min(series.index_of(dt.date(year, *window[1])), len(series) - 1)
            if last >= first:
                yearly.append(series.values[first : last + 1].mean())
    if not yearly:
        raise EmptyHistory("no rainfall inside the threshold window")
    return spell_len_days * float(np.mean(yearly))


def _forecast_bins(matrix, init_date, config, pre_init=None):
    """Vectorised core of :func:`detect_forecast_onset` over ensemble rows."""
    matrix = np.atleast_2d(matrix)
    L = matrix.shape[1]
    year = init_date.year
    start = effective_start(config, year, None)
    end = dt.date(year, *config.season_end)
    first_lead = max((start - init_date).days, 1)
    last_lead = min((end - init_date).days, MAX_LEAD_BINNED)
    if config.spell_len_days > L:
        raise SeriesTooShort("forecast shorter than the wet-spell length")
    bins = np.full(matrix.shape[0], N_BINS, dtype=int)
    if last_lead < first_lead:
        return bins
    # index 0 of each row is lead day 1
    for m in range(matrix.shape[0]):
        mask, _ = _qualifying(matrix[m], config, first_lead - 1, last_lead - 1, horizon=L)
        hits = np.flatnonzero(mask)
        if len(hits):
            bins[m] = lead_bin(first_lead + int(hits[0]))
    return bins


def detect_forecast_onset(pre_init_truth, member, config):
    """Lead-week bin (1..5) of the onset implied by one forecast member.

    ``pre_init_truth`` is observed rain ending on the initialization date;
    ``member`` holds rain for lead days 1..L.  Only candidates after the
    initialization date count.  When a candidate's follow-up runs past day
    L it still counts unless a dry window is forecast before day L.
    Climatological or no MOK filtering only: members cannot see true MOK.
    """
    if config.mok_policy.kind == "true":
        raise ValidationError("forecast members cannot observe the true MOK date")
    member = np.asarray(member, dtype=float)
    if member.ndim != 1 or len(member) < config.spell_len_days:
        raise SeriesTooShort("forecast member too short")
    return int(_forecast_bins(member, pre_init_truth.end_date, config)[0])


def forecast_onset_bins(ensemble, config):
    """Bins for every member of a :class:`ForecastEnsemble`."""
    if config.mok_policy.kind == "true":
        raise ValidationError("forecast members cannot observe the true MOK date")
    return _forecast_bins(ensemble.members, ensemble.init_date, config)
