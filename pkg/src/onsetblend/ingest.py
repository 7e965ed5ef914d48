"""Rainfall / forecast CSV I/O and the seeded synthetic world generator."""

import csv
import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from ._io import atomic_open
from .errors import (
    LeadWindowExceedsTruth,
    MalformedRow,
    MissingDay,
    NegativeRain,
    RaggedEnsemble,
    ValidationError,
)
from .seasons import MokPolicy, doy_to_date, month_day_doy, season_doy

RAIN_HEADER = ["grid_id", "date", "rain_mm"]
FORECAST_HEADER = ["model", "grid_id", "init_date", "member", "lead_day", "rain_mm"]


@dataclass(frozen=True)
class GridCell:
    id: str
    lat: float
    lon: float
    five_day_threshold_mm: float
    mok_policy: MokPolicy = MokPolicy("none")

    def __post_init__(self):
        if not self.five_day_threshold_mm > 0:
            raise ValidationError(f"{self.id}: five-day threshold must be positive")
        if not -90 <= self.lat <= 90 or not -180 <= self.lon <= 180:
            raise ValidationError(f"{self.id}: coordinates out of range")


@dataclass(eq=False)
class DailyRainSeries:
    """Contiguous daily rainfall (mm/day) for one grid cell."""

    grid_id: str
    start_date: dt.date
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValidationError("rainfall values must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError(f"{self.grid_id}: non-finite rainfall")
        if np.any(self.values < 0):
            raise NegativeRain(f"{self.grid_id}: negative rainfall")

    def __len__(self):
        return len(self.values)

    @property
    def end_date(self):
        return self.start_date + dt.timedelta(days=len(self.values) - 1)

    def index_of(self, date):
        return (date - self.start_date).days

    def date_at(self, index):
        return self.start_date + dt.timedelta(days=int(index))

    def slice_dates(self, first, last):
        """Sub-series covering ``first..last`` inclusive (clipped to the data)."""
        i0 = max(self.index_of(first), 0)
        i1 = min(self.index_of(last), len(self.values) - 1)
        return DailyRainSeries(self.grid_id, self.date_at(i0), self.values[i0 : i1 + 1])

    def years(self):
        return list(range(self.start_date.year, self.end_date.year + 1))


@dataclass(eq=False)
class ForecastEnsemble:
    """Members x lead-days rainfall matrix; column 0 is lead day 1."""

    model_id: str
    grid_id: str
    init_date: dt.date
    members: np.ndarray

    def __post_init__(self):
        self.members = np.atleast_2d(np.asarray(self.members, dtype=float))
        if self.members.shape[0] < 1 or self.members.ndim != 2:
            raise ValidationError("ensemble needs at least one member")
        if not np.all(np.isfinite(self.members)) or np.any(self.members < 0):
            raise ValidationError(
                f"{self.model_id}/{self.grid_id}/{self.init_date}: invalid rainfall"
            )

    @property
    def n_members(self):
        return self.members.shape[0]

    @property
    def lead_days(self):
        return self.members.shape[1]

    def mean_rain(self):
        return self.members.mean(axis=0)


def _open_rows(path, header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise MalformedRow(1, "empty file") from None
        if [h.strip() for h in first] != header:
            raise MalformedRow(1, f"expected header {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise MalformedRow(lineno, f"expected {len(header)} fields, got {len(row)}")
            yield lineno, [c.strip() for c in row]


def _parse_date(text, lineno):
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise MalformedRow(lineno, f"bad date {text!r}") from None


def _parse_rain(text, lineno):
    try:
        value = float(text)
    except ValueError:
        raise MalformedRow(lineno, f"bad rainfall value {text!r}") from None
    if not math.isfinite(value):
        raise MalformedRow(lineno, f"non-finite rainfall {text!r}")
    if value < 0:
        raise NegativeRain(f"line {lineno}: negative rainfall {value}")
    return value


def parse_rainfall_csv(path):
    """Read ``grid_id,date,rain_mm`` rows into one series per grid cell.

    Rows may be interleaved across grids and unsorted; each grid's days must
    form a gap-free, duplicate-free run.
    """
    by_grid = {}
    for lineno, (grid_id, date_s, rain_s) in _open_rows(path, RAIN_HEADER):
        date = _parse_date(date_s, lineno)
        by_grid.setdefault(grid_id, []).append((date, _parse_rain(rain_s, lineno), lineno))

    out = []
    for grid_id, rows in by_grid.items():
        rows.sort(key=lambda r: r[0])
        for (d0, _, _), (d1, _, line1) in zip(rows, rows[1:]):
            gap = (d1 - d0).days
            if gap == 0:
                raise MalformedRow(line1, f"duplicate date {d1} for {grid_id}")
            if gap != 1:
                raise MissingDay(f"{grid_id}: no rainfall between {d0} and {d1}")
        out.append(DailyRainSeries(grid_id, rows[0][0], np.array([r[1] for r in rows])))
    return out


def parse_forecast_csv(path):
    """Read long-format forecast rows into dense ensembles."""
    cells = {}
    for lineno, (model, grid_id, init_s, member_s, lead_s, rain_s) in _open_rows(
        path, FORECAST_HEADER
    ):
        init = _parse_date(init_s, lineno)
        try:
            member, lead = int(member_s), int(lead_s)
        except ValueError:
            raise MalformedRow(lineno, "member and lead_day must be integers") from None
        if member < 1 or lead < 1:
            raise MalformedRow(lineno, "member and lead_day start at 1")
        entries = cells.setdefault((model, grid_id, init), {})
        if (member, lead) in entries:
            raise MalformedRow(lineno, f"duplicate member {member} lead {lead}")
        entries[(member, lead)] = _parse_rain(rain_s, lineno)

    out = []
    for (model, grid_id, init), entries in cells.items():
        n_members = max(m for m, _ in entries)
        n_leads = max(lead for _, lead in entries)
        if len(entries) != n_members * n_leads:
            missing = [
                (m, lead)
                for m in range(1, n_members + 1)
                for lead in range(1, n_leads + 1)
                if (m, lead) not in entries
            ]
            raise RaggedEnsemble(
                f"{model}/{grid_id}/{init}: missing member/lead cells {missing[:5]}"
            )
        matrix = np.empty((n_members, n_leads))
        for (m, lead), v in entries.items():
            matrix[m - 1, lead - 1] = v
        out.append(ForecastEnsemble(model, grid_id, init, matrix))
    return out


def write_rainfall_csv(series_list, path):
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAIN_HEADER)
        for s in series_list:
            for i, v in enumerate(s.values):
                w.writerow([s.grid_id, s.date_at(i).isoformat(), f"{v:.3f}"])


def write_forecast_csv(ensembles, path):
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FORECAST_HEADER)
        for e in ensembles:
            init = e.init_date.isoformat()
            for m in range(e.n_members):
                for lead in range(e.lead_days):
                    w.writerow(
                        [e.model_id, e.grid_id, init, m + 1, lead + 1, f"{e.members[m, lead]:.3f}"]
                    )


# ---------------------------------------------------------------------------
# Synthetic world
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters of the seeded synthetic rainfall/forecast world.

    Truth is a two-regime daily rain process: a sparse, capped pre-monsoon
    regime and a wet monsoon regime that starts with an injected five-day wet
    spell at a Gaussian-drawn onset day.  Optional false onsets (a wet spell
    followed by a 15-day dry break) are injected before the true onset.
    Forecast members mix truth and climatological rain with weight
    ``forecast_skill[w]`` for lead week ``w`` (days 22..31 use week 4).
    """

    seed: int = 1
    n_years: int = 30
    n_cells: int = 4
    season_peak_doy: float = 166.0
    onset_spread_days: float = 12.0
    forecast_skill: tuple = (0.9, 0.6, 0.3, 0.1)
    start_year: int = 2000
    cell_offset_days: float = 8.0
    five_day_threshold_mm: float = 20.0
    pre_wet_prob: float = 0.15
    pre_wet_mean_mm: float = 2.5
    monsoon_wet_prob: float = 0.65
    monsoon_wet_mean_mm: float = 9.0
    gamma_shape: float = 0.8
    false_onset_prob: float = 0.4
    model_a: str = "A"
    model_b: str = "B"
    members_a: int = 1
    members_b: int = 10
    lead_days: int = 31
    init_weekdays: tuple = (0, 3)
    init_start: tuple = (5, 1)
    init_end: tuple = (8, 31)

    def __post_init__(self):
        rho = tuple(float(r) for r in self.forecast_skill)
        if len(rho) != 4 or not all(0.0 <= r <= 1.0 for r in rho):
            raise ValidationError("forecast_skill needs four values in [0, 1]")
        if any(b > a for a, b in zip(rho, rho[1:])):
            raise ValidationError("forecast_skill must be non-increasing in lead week")
        if self.n_years < 1 or self.n_cells < 1 or self.onset_spread_days < 0:
            raise ValidationError("bad synthetic world size")
        if self.lead_days < 28:
            raise ValidationError("lead_days must be at least 28")
        object.__setattr__(self, "forecast_skill", rho)

    @property
    def years(self):
        return list(range(self.start_year, self.start_year + self.n_years))

    def cells(self):
        """Grid cells; later mean onset further north."""
        out = []
        for c in range(self.n_cells):
            off = self.cell_offset(c)
            out.append(
                GridCell(
                    id=f"cell{c:02d}",
                    lat=round(18.0 + off / 2.0, 3),
                    lon=round(74.0 + 2.0 * c % 12, 3),
                    five_day_threshold_mm=self.five_day_threshold_mm,
                )
            )
        return out

    def cell_offset(self, c):
        if self.n_cells == 1:
            return 0.0
        return self.cell_offset_days * (2.0 * c / (self.n_cells - 1) - 1.0)

    def cell_mean_onset(self, c):
        return self.season_peak_doy + self.cell_offset(c)

    def onset_cdf(self, c, doy):
        """Probability that the cell's monsoon regime has begun by ``doy``."""
        mean = self.cell_mean_onset(c)
        if self.onset_spread_days == 0:
            return (np.asarray(doy, dtype=float) >= mean).astype(float)
        return ndtr((np.asarray(doy, dtype=float) - mean) / self.onset_spread_days)


_ONSET_DOY_RANGE = (130, 260)
_SPREAD_DRY_GAP = 4
_FALSE_DRY_LEN = 15
_FOLLOWUP_FLOOR_MM = 1.2


def _regime_rain(rng, n, wet_prob, mean_mm, shape):
    wet = rng.random(n) < wet_prob
    amounts = rng.gamma(shape, mean_mm / shape, size=n)
    return np.where(wet, amounts, 0.0)


def _synthetic_year(rng, config, c, year):
    """One calendar year of truth; returns (values, onset_doy)."""
    n_days = (dt.date(year + 1, 1, 1) - dt.date(year, 1, 1)).days
    thr = config.five_day_threshold_mm
    cap = 0.9 * thr / 5.0
    k = config.gamma_shape

    rain = np.minimum(
        _regime_rain(rng, n_days, config.pre_wet_prob, config.pre_wet_mean_mm, k), cap
    )
    z = rng.standard_normal()
    onset_doy = int(
        np.clip(
            round(config.cell_mean_onset(c) + config.onset_spread_days * z), *_ONSET_DOY_RANGE
        )
    )
    o = doy_to_date(year, onset_doy).timetuple().tm_yday - 1  # index in year
    end_monsoon = doy_to_date(year, month_day_doy(9, 30)).timetuple().tm_yday - 1

    monsoon = _regime_rain(
        rng, end_monsoon - o + 1, config.monsoon_wet_prob, config.monsoon_wet_mean_mm, k
    )
    rain[o : end_monsoon + 1] = monsoon
    floor_idx = np.arange(o + 5, o + 35, 2)
    rain[floor_idx] = np.maximum(rain[floor_idx], _FOLLOWUP_FLOOR_MM)
    rain[o - _SPREAD_DRY_GAP : o] = 0.0
    rain[o : o + 5] = thr / 5.0 * rng.uniform(1.1, 1.6, size=5)

    if rng.random() < config.false_onset_prob:
        lo = month_day_doy(5, 1)
        hi = onset_doy - 25
        if hi >= lo:
            fs = doy_to_date(year, int(rng.integers(lo, hi + 1))).timetuple().tm_yday - 1
            rain[fs : fs + 5] = thr / 5.0 * rng.uniform(1.1, 1.6, size=5)
            rain[fs + 5 : fs + 5 + _FALSE_DRY_LEN] = 0.0
    return np.round(rain, 3), onset_doy


def generate_synthetic_truth(config):
    """Daily truth for every cell, one contiguous multi-year series each.

    Deterministic in ``config``: cell ``c`` / year ``y`` draws from its own
    PCG64 stream seeded by ``SeedSequence([seed, 0, c, y])``.
    """
    out = []
    for c, cell in enumerate(config.cells()):
        chunks = []
        for year in config.years:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, 0, c, year])))
            values, _ = _synthetic_year(rng, config, c, year)
            chunks.append(values)
        out.append(DailyRainSeries(cell.id, dt.date(config.start_year, 1, 1), np.concatenate(chunks)))
    return out


def synthetic_onset_doys(config):
    """The injected onset day-of-year per (grid_id, year), for diagnostics."""
    out = {}
    for c, cell in enumerate(config.cells()):
        for year in config.years:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, 0, c, year])))
            out[(cell.id, year)] = _synthetic_year(rng, config, c, year)[1]
    return out


def init_dates(year, config, last=None):
    """Forecast initialization dates for a season (configured weekdays)."""
    d = dt.date(year, *config.init_start)
    end = dt.date(year, *config.init_end)
    if last is not None:
        end = min(end, last)
    dates = []
    while d <= end:
        if d.weekday() in config.init_weekdays:
            dates.append(d)
        d += dt.timedelta(days=1)
    return dates


def _lead_weights(config):
    lead = np.arange(1, config.lead_days + 1)
    week = np.minimum((lead - 1) // 7, 3)
    return np.asarray(config.forecast_skill)[week]


def _climatological_draw(rng, config, c, doys, n_members):
    """Independent climatological rain: regime chosen by the onset cdf."""
    shape = (n_members, len(doys))
    p_monsoon = config.onset_cdf(c, doys)
    monsoon = rng.random(shape) < p_monsoon
    k = config.gamma_shape
    wet_prob = np.where(monsoon, config.monsoon_wet_prob, config.pre_wet_prob)
    mean = np.where(monsoon, config.monsoon_wet_mean_mm, config.pre_wet_mean_mm)
    wet = rng.random(shape) < wet_prob
    return np.where(wet, rng.gamma(k, 1.0, size=shape) * mean / k, 0.0)


def generate_synthetic_forecasts(truth, config, stop_dates=None):
    """Ensembles for both synthetic models at every initialization.

    ``stop_dates`` optionally maps ``(grid_id, year)`` to the last date on
    which forecasts are issued (e.g. the day before observed onset).
    Member rain for lead week ``w`` is ``rho_w * truth + (1 - rho_w) * noise``
    with independent climatological noise per member and day.
    """
    weights = _lead_weights(config)
    L = config.lead_days
    cells = {cell.id: i for i, cell in enumerate(config.cells())}
    out = []
    for series in truth:
        c = cells[series.grid_id]
        for year in config.years:
            last = None if stop_dates is None else stop_dates.get((series.grid_id, year))
            for init in init_dates(year, config, last):
                i0 = series.index_of(init) + 1
                if i0 < 1 or i0 + L > len(series.values):
                    raise LeadWindowExceedsTruth(
                        f"{series.grid_id}: truth does not cover {L} days after {init}"
                    )
                obs = series.values[i0 : i0 + L]
                doys = np.array([season_doy(init + dt.timedelta(days=d)) for d in range(1, L + 1)])
                ss = np.random.SeedSequence([config.seed, 1, c, init.toordinal()])
                rng = np.random.Generator(np.random.PCG64(ss))
                for model, n_members in ((config.model_a, config.members_a), (config.model_b, config.members_b)):
                    noise = _climatological_draw(rng, config, c, doys, n_members)
                    members = np.round(weights * obs + (1.0 - weights) * noise, 3)
                    out.append(ForecastEnsemble(model, series.grid_id, init, members))
    return out
