"""Result containers, standard errors and log-log exponent fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ..errors import EstimatorError

# replicas are processed in chunks of this many; results never depend on it
CHUNK = 1 << 16


def _jsonable(x: Any) -> Any:
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


@dataclass(frozen=True, eq=False)
class EstimateWithError:
    value: Any
    std_error: Any
    replicas: int
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.replicas < 2:
            raise EstimatorError("an estimate needs at least two replicas")
        if np.any(np.asarray(self.std_error, dtype=float) < 0):
            raise EstimatorError("standard errors must be nonnegative")

    def to_dict(self) -> dict:
        out = {"value": _jsonable(self.value), "se": _jsonable(self.std_error), "replicas": self.replicas}
        out.update({k: _jsonable(v) for k, v in self.extra.items()})
        return out


@dataclass(frozen=True, eq=False)
class ScanResult:
    """Scan points ``(n, value, se)`` with a fitted slope.

    ``flag`` marks fits that are not meaningful: ``"degenerate"`` when every
    value is zero, ``"insufficient"`` when fewer than three positive points
    remain.
    """

    points: list
    fitted_exponent: float | None
    exponent_se: float | None
    replicas: int = 0
    flag: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        ns = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise EstimatorError("scan points must have strictly increasing n")

    def to_dict(self) -> dict:
        out = {
            "points": [{"n": int(n), "value": float(v), "se": float(s)} for n, v, s in self.points],
            "fitted_exponent": _jsonable(self.fitted_exponent),
            "exponent_se": _jsonable(self.exponent_se),
            "replicas": self.replicas,
            "flag": self.flag,
        }
        out.update({k: _jsonable(v) for k, v in self.extra.items()})
        return out

    def rows(self) -> list[tuple]:
        return [(int(n), float(v), float(s)) for n, v, s in self.points]


def weighted_line(x: np.ndarray, y: np.ndarray, w: np.ndarray | None = None) -> tuple[float, float, float]:
    """Weighted least-squares line; returns ``(slope, slope_se, intercept)``.

    The slope SE uses the residual scatter (``k - 2`` degrees of freedom), so
    an exact fit has zero SE.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    k = x.size
    if k < 3:
        raise EstimatorError("a line fit needs at least three points")
    sw = w.sum()
    xb = (w @ x) / sw
    yb = (w @ y) / sw
    sxx = w @ (x - xb) ** 2
    if sxx <= 0:
        raise EstimatorError("a line fit needs at least two distinct abscissae")
    slope = (w @ ((x - xb) * (y - yb))) / sxx
    intercept = yb - slope * xb
    resid = y - intercept - slope * x
    s2 = (w @ resid**2) / (k - 2)
    return float(slope), float(math.sqrt(s2 / sxx)), float(intercept)


def fit_exponent(points: Sequence[tuple]) -> tuple[float, float]:
    """Slope of ``log value`` against ``log n``, weighted by ``(value / se)**2``.

    Weights fall back to uniform when any ``se`` is zero.
    """
    if len(points) < 3:
        raise EstimatorError("fit_exponent needs at least three points")
    n = np.array([p[0] for p in points], dtype=float)
    v = np.array([p[1] for p in points], dtype=float)
    se = np.array([p[2] for p in points], dtype=float)
    if np.any(np.diff(n) <= 0):
        raise EstimatorError("n must be strictly increasing")
    if np.any(v <= 0):
        raise EstimatorError("fit_exponent needs positive values")
    w = None if np.any(se <= 0) else (v / se) ** 2
    slope, slope_se, _ = weighted_line(np.log(n), np.log(v), w)
    return slope, slope_se


def scan_from_points(points: list, replicas: int, **extra) -> ScanResult:
    """Fit a scan, flagging all-zero or too-short scans instead of failing."""
    values = [p[1] for p in points]
    if all(v == 0 for v in values):
        return ScanResult(points, None, None, replicas, "degenerate", extra)
    pos = [p for p in points if p[1] > 0]
    if len(pos) < 3:
        return ScanResult(points, None, None, replicas, "insufficient", extra)
    e, s = fit_exponent(pos)
    return ScanResult(points, e, s, replicas, None, extra)


def mean_se(samples: np.ndarray, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and its standard error along ``axis``."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[axis]
    if n < 2:
        raise EstimatorError("need at least two samples for a standard error")
    return samples.mean(axis=axis), samples.std(axis=axis, ddof=1) / math.sqrt(n)


def ratio_se(num: np.ndarray, den: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ratio of means ``sum(num) / sum(den)`` with a delta-method SE.

    ``num`` has shape ``(N, ...)`` and ``den`` shape ``(N,)``.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = den.shape[0]
    if n < 2:
        raise EstimatorError("need at least two samples for a standard error")
    r = num.sum(axis=0) / den.sum()
    shape = (n,) + (1,) * (num.ndim - 1)
    resid = num - r * den.reshape(shape)
    se = resid.std(axis=0, ddof=1) / (math.sqrt(n) * den.mean())
    return r, se


def batch_groups(n: int, groups: int = 50) -> list[slice]:
    """Contiguous index blocks used for batch-means standard errors."""
    g = max(2, min(groups, n))
    edges = [(i * n) // g for i in range(g + 1)]
    return [slice(a, b) for a, b in zip(edges, edges[1:])]
