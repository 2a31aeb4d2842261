"""Content complexity (SI/TI), hull classification metrics and corpus summaries."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import AlignmentError, EmptyInputError, LadderError, UndefinedMetricError

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T


@dataclass(frozen=True)
class SitiResult:
    si: float
    ti: float

    def to_dict(self) -> dict:
        return asdict(self)


def _sobel_std(frame: np.ndarray) -> float:
    win = sliding_window_view(frame, (3, 3))  # interior pixels only
    gx = np.einsum("ijkl,kl->ij", win, SOBEL_X)
    gy = np.einsum("ijkl,kl->ij", win, SOBEL_Y)
    return float(np.hypot(gx, gy).std())


def siti(video) -> SitiResult:
    """Spatial and temporal information of a luma clip shaped ``(n, h, w)``.

    SI is the largest per-frame std of the Sobel magnitude (border excluded);
    TI is the largest std of consecutive frame differences, 0 for one frame.
    """
    v = np.asarray(video, dtype=np.float64)
    if v.ndim == 2:
        v = v[None]
    if v.ndim != 3 or v.shape[0] < 1:
        raise LadderError(f"expected (frames, height, width) luma, got shape {v.shape}")
    if v.shape[1] < 3 or v.shape[2] < 3:
        raise LadderError("frames must be at least 3x3 for the Sobel operator")
    si = max(_sobel_std(f) for f in v)
    ti = float(np.diff(v, axis=0).std(axis=(1, 2)).max()) if len(v) > 1 else 0.0
    return SitiResult(si, ti)


@dataclass(frozen=True)
class MetricReport:
    precision: float
    recall: float
    f1: float
    ci95: dict
    n_bootstrap: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci95"] = {k: list(v) for k, v in self.ci95.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d) -> "MetricReport":
        ci = {k: tuple(v) for k, v in d["ci95"].items()}
        return cls(d["precision"], d["recall"], d["f1"], ci, d["n_bootstrap"])


def _prf(tp, fp, fn):
    """Percent precision, recall and F1 from (possibly vectorized) counts."""
    tp, fp, fn = (np.asarray(a, dtype=np.float64) for a in (tp, fp, fn))
    with np.errstate(divide="ignore", invalid="ignore"):
        p = tp / (tp + fp)
        r = tp / (tp + fn)
        f = 2 * p * r / (p + r)
        f = np.where(tp == 0, np.where((tp + fp > 0) & (tp + fn > 0), 0.0, np.nan), f)
    return p * 100, r * 100, f * 100


def _percentile_ci(samples, point, level=0.95):
    s = np.asarray(samples, dtype=np.float64)
    s = s[np.isfinite(s)]
    if not len(s):
        return (float(point), float(point))
    a = (1 - level) / 2 * 100
    lo, hi = np.percentile(s, [a, 100 - a])
    return (float(min(lo, point)), float(max(hi, point)))


def _confusion(preds, truths):
    if len(preds) != len(truths):
        raise AlignmentError(f"{len(preds)} predictions vs {len(truths)} ground truths")
    if not preds:
        raise EmptyInputError("no shots to score")
    tp, fp, fn = [], [], []
    for p, t in zip(preds, truths):
        if p.space != t.space:
            raise AlignmentError(f"shot {p.shot_id}: prediction and truth use different ladder spaces")
        pb, tb = p.bits.astype(bool), t.bits.astype(bool)
        tp.append(int((pb & tb).sum()))
        fp.append(int((pb & ~tb).sum()))
        fn.append(int((~pb & tb).sum()))
    return np.array(tp), np.array(fp), np.array(fn)


def classification_metrics(preds: Sequence, truths: Sequence, n_bootstrap: int = 1000,
                           seed: int = 0) -> MetricReport:
    """Micro-averaged precision/recall/F1 over every cell of every shot.

    Confidence intervals are percentile bootstrap over shots; resamples where
    a metric is undefined are left out of its interval.
    """
    tp, fp, fn = _confusion(preds, truths)
    TP, FP, FN = tp.sum(), fp.sum(), fn.sum()
    if TP + FP == 0:
        raise UndefinedMetricError("precision is undefined: no positive predictions")
    if TP + FN == 0:
        raise UndefinedMetricError("recall is undefined: ground truth has no positive cells")
    point = [float(v) for v in _prf(TP, FP, FN)]

    ci = {}
    if n_bootstrap > 0:
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, len(tp), size=(n_bootstrap, len(tp)))
        boot = _prf(tp[idx].sum(1), fp[idx].sum(1), fn[idx].sum(1))
        for name, b, pt in zip(("precision", "recall", "f1"), boot, point):
            ci[name] = _percentile_ci(b, pt)
    else:
        ci = {name: (pt, pt) for name, pt in zip(("precision", "recall", "f1"), point)}
    return MetricReport(point[0], point[1], point[2], ci, int(n_bootstrap))


@dataclass(frozen=True)
class CorpusSummary:
    n_shots: int
    bd_rate_mean: float
    bd_rate_mad: float
    bd_rate_sd: float
    time_savings_mean: Optional[float]
    encode_reduction_mean: float
    ci95: dict
    n_bootstrap: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci95"] = {k: list(v) for k, v in self.ci95.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def bootstrap_mean_ci(values, n_bootstrap: int = 1000, seed: int = 0, level: float = 0.95):
    """Percentile bootstrap interval for the mean of ``values``."""
    v = np.asarray(values, dtype=np.float64)
    if not len(v):
        raise EmptyInputError("no values to resample")
    point = float(v.mean())
    if n_bootstrap <= 0 or len(v) == 1:
        return (point, point)
    rng = np.random.default_rng(seed)
    means = v[rng.integers(0, len(v), size=(n_bootstrap, len(v)))].mean(axis=1)
    return _percentile_ci(means, point, level)


def corpus_report(reports: Sequence, n_bootstrap: int = 1000, seed: int = 0) -> CorpusSummary:
    """Aggregate per-shot SavingsReports; dispersion uses population statistics."""
    if not reports:
        raise EmptyInputError("corpus_report needs at least one report")
    bd = np.array([np.nan if r.bd_rate_vs_optimal is None else r.bd_rate_vs_optimal for r in reports])
    if np.isnan(bd).any():
        raise LadderError("every report needs bd_rate_vs_optimal for a corpus summary")
    ts = [r.time_savings for r in reports]
    red = np.array([r.encode_reduction for r in reports])
    mean = float(bd.mean())
    ci = {
        "bd_rate_mean": bootstrap_mean_ci(bd, n_bootstrap, seed),
        "encode_reduction_mean": bootstrap_mean_ci(red, n_bootstrap, seed),
    }
    ts_mean = None
    if all(t is not None for t in ts):
        ts_mean = float(np.mean(ts))
        ci["time_savings_mean"] = bootstrap_mean_ci(ts, n_bootstrap, seed)
    return CorpusSummary(
        n_shots=len(reports),
        bd_rate_mean=mean,
        bd_rate_mad=float(np.abs(bd - mean).mean()),
        bd_rate_sd=float(bd.std()),
        time_savings_mean=ts_mean,
        encode_reduction_mean=float(red.mean()),
        ci95=ci,
        n_bootstrap=int(n_bootstrap),
    )
