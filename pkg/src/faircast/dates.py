"""Day arithmetic.

All series index days as integers (days since 1970-01-01) so that lag and
window arithmetic is plain integer math. Calendar concepts (ISO weeks,
calendar months) only appear when labelling aggregates.
"""

from __future__ import annotations

import datetime as dt

_EPOCH = dt.date(1970, 1, 1).toordinal()


def day_from_date(d: dt.date) -> int:
    return d.toordinal() - _EPOCH


def date_from_day(day: int) -> dt.date:
    return dt.date.fromordinal(day + _EPOCH)


def day_from_iso(s: str) -> int:
    """Parse an ISO-8601 calendar date (YYYY-MM-DD) to an epoch day."""
    return day_from_date(dt.date.fromisoformat(s))


def iso_from_day(day: int) -> str:
    return date_from_day(day).isoformat()


def iso_week_label(day: int) -> str:
    """ISO-8601 week label, e.g. '2020-W15'."""
    y, w, _ = date_from_day(day).isocalendar()
    return f"{y}-W{w:02d}"


def month_label(day: int) -> str:
    """Calendar month label, e.g. '2020-04'."""
    d = date_from_day(day)
    return f"{d.year}-{d.month:02d}"


def month_range(year: int, month: int) -> tuple[int, int]:
    """First and last epoch day of a calendar month (inclusive)."""
    first = dt.date(year, month, 1)
    if month == 12:
        nxt = dt.date(year + 1, 1, 1)
    else:
        nxt = dt.date(year, month + 1, 1)
    return day_from_date(first), day_from_date(nxt) - 1
