"""Weekly complaint counts and a linear-trend + Fourier-seasonality forecaster.

The model is ordinary least squares on the design matrix

    [1, t, sin(2*pi*k*t/P), cos(2*pi*k*t/P) for k = 1..K]

with ``t`` counted in weeks from the first training week and ``P = 52``.
Intervals are ``point +/- z * sigma`` where ``sigma`` is the sample standard
deviation of the training residuals, so their width does not grow with the
horizon.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import FitError, StructuralError
from .triage import Complaint

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
WEEK = timedelta(days=7)
DEFAULT_HARMONICS = 3
DEFAULT_PERIOD = 52.0
DEFAULT_Z = 1.282
STALE_AFTER = timedelta(days=35)
SPARSE_ZERO_FRACTION = 0.6
RISK_LEVELS = ("low", "medium", "high")


def week_start(t: datetime | date) -> date:
    d = t.date() if isinstance(t, datetime) else t
    return d - timedelta(days=d.weekday())


@dataclass(frozen=True)
class WeeklySeries:
    category: str
    block: str | None
    week_starts: tuple[date, ...]
    counts: tuple[int, ...]
    filled: tuple[bool, ...] = ()

    def __post_init__(self) -> None:
        if len(self.week_starts) != len(self.counts):
            raise StructuralError("week_starts and counts differ in length")
        if not self.filled:
            object.__setattr__(self, "filled", (False,) * len(self.counts))
        for a, b in zip(self.week_starts, self.week_starts[1:]):
            if b - a != WEEK:
                raise StructuralError(f"weeks {a} and {b} are not 7 days apart")
        if any(c < 0 for c in self.counts):
            raise StructuralError("negative weekly count")

    def __len__(self) -> int:
        return len(self.counts)

    @property
    def zero_fraction(self) -> float:
        return sum(1 for c in self.counts if c == 0) / len(self.counts) if self.counts else 1.0


def aggregate_weekly(complaints: Iterable[Complaint], category: str, block: str | None = None) -> WeeklySeries:
    """Count complaints per Monday-starting week; interior gaps become explicit zeros."""
    tally: dict[date, int] = {}
    for c in complaints:
        if c.category == category and (block is None or c.block == block):
            wk = week_start(c.created_at)
            tally[wk] = tally.get(wk, 0) + 1
    if not tally:
        return WeeklySeries(category, block, (), ())
    first, last = min(tally), max(tally)
    weeks = []
    wk = first
    while wk <= last:
        weeks.append(wk)
        wk += WEEK
    return WeeklySeries(
        category,
        block,
        tuple(weeks),
        tuple(tally.get(w, 0) for w in weeks),
        tuple(w not in tally for w in weeks),
    )


def design_matrix(t: np.ndarray, harmonics: int, period: float = DEFAULT_PERIOD) -> np.ndarray:
    cols = [np.ones_like(t, dtype=float), t.astype(float)]
    for k in range(1, harmonics + 1):
        angle = 2.0 * np.pi * k * t / period
        cols += [np.sin(angle), np.cos(angle)]
    return np.column_stack(cols)


@dataclass(frozen=True)
class ForecastModel:
    category: str
    block: str | None
    intercept: float
    slope: float
    seasonal: tuple[tuple[float, float], ...]  # (sin, cos) coefficient per harmonic
    residual_sigma: float
    train_start: date
    train_end: date
    period: float = DEFAULT_PERIOD
    low_confidence: bool = False
    fitted_on: date | None = None

    @property
    def harmonics(self) -> int:
        return len(self.seasonal)

    @property
    def coefficients(self) -> np.ndarray:
        flat = [c for pair in self.seasonal for c in pair]
        return np.array([self.intercept, self.slope, *flat])

    def mean(self, t: np.ndarray) -> np.ndarray:
        return design_matrix(np.asarray(t, dtype=float), self.harmonics, self.period) @ self.coefficients

    def is_stale(self, today: date) -> bool:
        ref = self.fitted_on or self.train_end
        return today - ref > STALE_AFTER


def fit_model(series: WeeklySeries, harmonics: int = DEFAULT_HARMONICS, period: float = DEFAULT_PERIOD,
              fitted_on: date | None = None) -> ForecastModel:
    if harmonics < 0:
        raise FitError("number of harmonics must be >= 0")
    need = max(8, 2 * harmonics + 2)
    if len(series) < need:
        raise FitError(f"series has {len(series)} weeks; at least {need} required for K={harmonics}")
    y = np.asarray(series.counts, dtype=float)
    t = np.arange(len(y), dtype=float)
    X = design_matrix(t, harmonics, period)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    sigma = float(np.std(resid, ddof=1)) if len(y) > 1 else 0.0
    low_conf = series.zero_fraction > SPARSE_ZERO_FRACTION
    if low_conf:
        logger.warning("series %s/%s is sparse (%.0f%% zero weeks); forecast is low-confidence",
                       series.category, series.block, 100 * series.zero_fraction)
    return ForecastModel(
        category=series.category,
        block=series.block,
        intercept=float(coef[0]),
        slope=float(coef[1]),
        seasonal=tuple((float(coef[2 + 2 * k]), float(coef[3 + 2 * k])) for k in range(harmonics)),
        residual_sigma=sigma,
        train_start=series.week_starts[0],
        train_end=series.week_starts[-1],
        period=period,
        low_confidence=low_conf,
        fitted_on=fitted_on,
    )


@dataclass(frozen=True)
class ForecastPoint:
    week_start: date
    point: float
    lower: float
    upper: float


@dataclass(frozen=True)
class Forecast:
    category: str
    block: str | None
    horizon: tuple[ForecastPoint, ...]
    low_confidence: bool = False


def predict(model: ForecastModel, steps: int = 8, z: float = DEFAULT_Z) -> Forecast:
    """Extrapolate ``steps`` weeks past the training range.

    Point and both bounds are floored at zero; the floor is applied after the
    interval is formed, so ``lower <= point <= upper`` always holds.
    """
    if steps < 1:
        raise StructuralError("steps must be >= 1")
    n = (model.train_end - model.train_start).days // 7 + 1
    t = np.arange(n, n + steps, dtype=float)
    raw = model.mean(t)
    half = z * model.residual_sigma
    horizon = tuple(
        ForecastPoint(
            week_start=model.train_end + WEEK * (i + 1),
            point=max(float(m), 0.0),
            lower=max(float(m) - half, 0.0),
            upper=max(float(m) + half, 0.0),
        )
        for i, m in enumerate(raw)
    )
    return Forecast(model.category, model.block, horizon, model.low_confidence)


def risk_level(value: float, medium: float, high: float) -> str:
    if value > high:
        return "high"
    if value > medium:
        return "medium"
    return "low"


def risk_heatmap(
    forecasts: Iterable[Forecast], medium: float = 2.0, high: float = 4.0
) -> dict[tuple[str | None, str], str]:
    """Bucket each (block, category) cell by its peak forecast point."""
    if high < medium:
        raise StructuralError("high threshold below medium threshold")
    grid = {}
    for f in forecasts:
        peak = max((p.point for p in f.horizon), default=0.0)
        grid[(f.block, f.category)] = risk_level(peak, medium, high)
    return grid


# --- file formats ---------------------------------------------------------------

def model_to_dict(m: ForecastModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "category": m.category,
        "block": m.block,
        "intercept": m.intercept,
        "slope": m.slope,
        "seasonal": [list(pair) for pair in m.seasonal],
        "residual_sigma": m.residual_sigma,
        "train_start": m.train_start.isoformat(),
        "train_end": m.train_end.isoformat(),
        "period": m.period,
        "low_confidence": m.low_confidence,
        "fitted_on": m.fitted_on.isoformat() if m.fitted_on else None,
    }


def model_from_dict(d: Mapping) -> ForecastModel:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise StructuralError(f"unsupported forecast model schema_version {d.get('schema_version')!r}")
    try:
        return ForecastModel(
            category=d["category"],
            block=d.get("block"),
            intercept=float(d["intercept"]),
            slope=float(d["slope"]),
            seasonal=tuple((float(a), float(b)) for a, b in d["seasonal"]),
            residual_sigma=float(d["residual_sigma"]),
            train_start=date.fromisoformat(d["train_start"]),
            train_end=date.fromisoformat(d["train_end"]),
            period=float(d.get("period", DEFAULT_PERIOD)),
            low_confidence=bool(d.get("low_confidence", False)),
            fitted_on=date.fromisoformat(d["fitted_on"]) if d.get("fitted_on") else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StructuralError(f"malformed forecast model: {exc}") from exc


def forecast_csv(forecasts: Sequence[Forecast]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block", "category", "week_start", "point", "lower", "upper", "low_confidence"])
    for f in forecasts:
        for p in f.horizon:
            w.writerow([f.block or "", f.category, p.week_start.isoformat(),
                        f"{p.point:.6f}", f"{p.lower:.6f}", f"{p.upper:.6f}", int(f.low_confidence)])
    return buf.getvalue()


def heatmap_csv(grid: Mapping[tuple[str | None, str], str]) -> str:
    blocks = sorted({b or "" for b, _ in grid})
    cats = sorted({c for _, c in grid})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block", *cats])
    for b in blocks:
        w.writerow([b, *(grid.get((b or None, c), "") for c in cats)])
    return buf.getvalue()
