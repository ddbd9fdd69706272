"""Evaluation metrics: RMSE, Pearson correlation, concordance correlation.

All statistics are population (divide-by-n) moments. Zero-variance series
make PCC/CCC undefined; that is surfaced as an explicit flag (or
UndefinedMetricError from the bare functions), never silently as 0 or NaN,
because constant predictions are a real failure mode that must stay visible.

Pure functions throughout; freely parallel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NumericError, ShapeError, UndefinedMetricError


class PairedSeries(NamedTuple):
    """Ground truth and predictions, index-aligned."""
    truth: np.ndarray
    pred: np.ndarray


def paired(truth, pred) -> PairedSeries:
    """Validate and coerce a truth/prediction pair."""
    t = np.asarray(truth, dtype=np.float64)
    p = np.asarray(pred, dtype=np.float64)
    if t.ndim != 1 or p.ndim != 1 or t.shape != p.shape:
        raise ShapeError(f"series shapes differ: truth {t.shape} vs pred {p.shape}")
    if t.size == 0:
        raise ShapeError("series are empty")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
        raise NumericError("series contain non-finite values")
    return PairedSeries(t, p)


def _effectively_constant(x: np.ndarray) -> bool:
    # Guards against float-rounding "variance" of truly constant series.
    return float(np.std(x)) <= 1e-12 * max(1.0, float(np.max(np.abs(x))))


def rmse(truth, pred) -> float:
    """Root mean squared error."""
    t, p = paired(truth, pred)
    d = t - p
    return float(np.sqrt(np.mean(d * d)))


def pcc(truth, pred) -> float:
    """Pearson correlation, population moments: cov / (std_t * std_p)."""
    t, p = paired(truth, pred)
    if t.size < 2:
        raise UndefinedMetricError("correlation needs at least 2 samples")
    if _effectively_constant(t) or _effectively_constant(p):
        raise UndefinedMetricError("correlation undefined for a zero-variance series")
    mt, mp = np.mean(t), np.mean(p)
    cov = np.mean((t - mt) * (p - mp))
    return float(cov / (np.std(t) * np.std(p)))


def ccc(truth, pred) -> float:
    """Concordance correlation: correlation penalized by mean/scale mismatch.

    2*std_t*std_p*PCC / (var_t + var_p + (mean_t - mean_p)^2)
    """
    t, p = paired(truth, pred)
    r = pcc(t, p)
    st, sp = np.std(t), np.std(p)
    mt, mp = np.mean(t), np.mean(p)
    return float(2.0 * st * sp * r / (st * st + sp * sp + (mt - mp) ** 2))


@dataclass(frozen=True)
class TargetMetrics:
    """Metrics for one regression target; None marks an undefined entry.

    rmse is always defined for a scored series; it can be None only in
    aggregation rows (std of a single report).
    """
    ccc: float | None
    pcc: float | None
    rmse: float | None

    def values(self) -> tuple[float | None, float | None, float | None]:
        return (self.ccc, self.pcc, self.rmse)


@dataclass(frozen=True)
class MetricsReport:
    valence: TargetMetrics
    arousal: TargetMetrics


def score_target(truth, pred) -> TargetMetrics:
    """All three metrics for one target, flagging undefined correlations."""
    t, p = paired(truth, pred)
    try:
        c = ccc(t, p)
        r = pcc(t, p)
    except UndefinedMetricError:
        c = None
        r = None
    return TargetMetrics(ccc=c, pcc=r, rmse=rmse(t, p))


def report(valence, arousal) -> MetricsReport:
    """Assemble a per-target report from two (truth, pred) pairs."""
    return MetricsReport(valence=score_target(*valence), arousal=score_target(*arousal))


def _column(reports: Sequence[MetricsReport], target: str, metric: str):
    return [getattr(getattr(rep, target), metric) for rep in reports]


def aggregate_reports(reports: Sequence[MetricsReport]) -> tuple[MetricsReport, MetricsReport]:
    """Mean and sample-std (ddof=1) rows over a collection of reports.

    Undefined entries are excluded column-wise; a column with no defined
    entries (or a single one, for std) stays undefined.
    """
    if not reports:
        raise ShapeError("cannot aggregate an empty report collection")
    mean_cells, std_cells = {}, {}
    for target in ("valence", "arousal"):
        mean_vals, std_vals = {}, {}
        for metric in ("ccc", "pcc", "rmse"):
            defined = [v for v in _column(reports, target, metric) if v is not None]
            mean_vals[metric] = float(np.mean(defined)) if defined else None
            std_vals[metric] = float(np.std(defined, ddof=1)) if len(defined) >= 2 else None
        mean_cells[target] = mean_vals
        std_cells[target] = std_vals

    def build(cells):
        return MetricsReport(
            valence=TargetMetrics(**cells["valence"]),
            arousal=TargetMetrics(**cells["arousal"]))

    return build(mean_cells), build(std_cells)
