"""Calendar helpers shared by every module.

Day-of-year values use a fixed 365-day calendar: in leap years every date after
February 28 is shifted back by one so that, e.g., June 26 always maps to 177.
Feb 29 shares Feb 28's number.
"""

import datetime as dt
from dataclasses import dataclass

from .errors import ValidationError

N_BINS = 5
WEEK_DAYS = 7
MAX_LEAD_BINNED = (N_BINS - 1) * WEEK_DAYS  # 28


def _is_leap(year):
    return year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)


def season_doy(date):
    """Day of year on the 365-day calendar (Jan 1 = 1, Dec 31 = 365)."""
    doy = date.timetuple().tm_yday
    if _is_leap(date.year) and doy >= 60:
        doy -= 1
    return doy


def doy_to_date(year, doy):
    """Inverse of :func:`season_doy` for integer ``doy`` in 1..365."""
    doy = int(doy)
    if not 1 <= doy <= 365:
        raise ValidationError(f"day of year out of range: {doy}")
    if _is_leap(year) and doy >= 60:
        doy += 1
    return dt.date(year, 1, 1) + dt.timedelta(days=doy - 1)


def month_day_doy(month, day):
    return season_doy(dt.date(2001, month, day))


def parse_month_day(text):
    """Parse ``MM-DD`` into a ``(month, day)`` tuple."""
    try:
        month, day = (int(part) for part in text.strip().split("-"))
        dt.date(2001, month, day)
    except ValueError as exc:
        raise ValidationError(f"expected MM-DD, got {text!r}") from exc
    return month, day


def lead_bin(lead_days):
    """Map a lead (days after initialization, >= 1) to bins 1..5.

    Bin j covers lead days 7(j-1)+1 .. 7j; anything past day 28 is bin 5.
    """
    if lead_days < 1:
        raise ValidationError("lead must be at least one day after initialization")
    if lead_days > MAX_LEAD_BINNED:
        return N_BINS
    return (lead_days - 1) // WEEK_DAYS + 1


def outcome_bin(onset_date, init_date):
    """Observed outcome bin of a forecast; absent onsets count as "later"."""
    if onset_date is None:
        return N_BINS
    return lead_bin((onset_date - init_date).days)


@dataclass(frozen=True)
class MokPolicy:
    """Which Monsoon-Onset-over-Kerala filter applies to onset candidates.

    ``kind`` is ``"true"`` (observed MOK date per year, supplied by the
    caller), ``"clim"`` (a fixed calendar date every year) or ``"none"``.
    """

    kind: str = "none"
    month_day: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("true", "clim", "none"):
            raise ValidationError(f"unknown MOK policy {self.kind!r}")
        if self.kind == "clim" and self.month_day is None:
            raise ValidationError("climatological MOK policy needs a month-day")

    @classmethod
    def parse(cls, text):
        """Parse ``true-mok``, ``clim-mok=MM-DD`` or ``none``."""
        text = text.strip().lower()
        if text in ("true-mok", "true"):
            return cls("true")
        if text in ("none", "nofilter", "no-filter"):
            return cls("none")
        if text.startswith("clim-mok"):
            _, _, md = text.partition("=")
            return cls("clim", parse_month_day(md or "06-02"))
        raise ValidationError(f"unknown onset variant {text!r}")

    def __str__(self):
        if self.kind == "clim":
            return "clim-mok=%02d-%02d" % self.month_day
        return "true-mok" if self.kind == "true" else "none"
