"""Shape-preserving cubic Hermite interpolation and Bjontegaard delta rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Ladder
from .errors import ExtrapolationError, OverlapError, ShapeError


@dataclass(frozen=True)
class MonotoneCurve:
    xs: tuple
    ys: tuple

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise ShapeError("xs and ys must be 1-D and of equal length")
        if len(xs) < 2:
            raise ShapeError(f"need at least 2 knots, got {len(xs)}")
        if np.any(np.diff(xs) <= 0):
            raise ShapeError("xs must be strictly increasing")
        object.__setattr__(self, "xs", tuple(xs.tolist()))
        object.__setattr__(self, "ys", tuple(ys.tolist()))


def _endpoint_slope(h0, h1, d0, d1):
    # non-centered three-point formula, clipped to keep the shape
    m = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
    if np.sign(m) != np.sign(d0):
        return 0.0
    if np.sign(d0) != np.sign(d1) and abs(m) > abs(3 * d0):
        return 3 * d0
    return m


def pchip_slopes(xs, ys) -> np.ndarray:
    """Knot derivatives of the Fritsch-Carlson monotone interpolant.

    Interior slopes are the weighted harmonic mean of the adjacent secants
    (zero at local extrema); end slopes use the shape-preserving
    three-point formula. Two knots give the straight line.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    h = np.diff(x)
    delta = np.diff(y) / h
    n = len(x)
    if n == 2:
        return np.array([delta[0], delta[0]])
    m = np.zeros(n)
    for k in range(1, n - 1):
        d0, d1 = delta[k - 1], delta[k]
        if d0 * d1 > 0:
            w1 = 2 * h[k] + h[k - 1]
            w2 = h[k] + 2 * h[k - 1]
            m[k] = (w1 + w2) / (w1 / d0 + w2 / d1)
    m[0] = _endpoint_slope(h[0], h[1], delta[0], delta[1])
    m[-1] = _endpoint_slope(h[-1], h[-2], delta[-1], delta[-2])
    return m


class Pchip:
    """Evaluator for a fitted curve; precomputes slopes once."""

    def __init__(self, curve: MonotoneCurve):
        self.x = np.asarray(curve.xs)
        self.y = np.asarray(curve.ys)
        self.m = pchip_slopes(self.x, self.y)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        if np.any(q < self.x[0]) or np.any(q > self.x[-1]):
            raise ExtrapolationError(f"query outside knot range [{self.x[0]}, {self.x[-1]}]")
        k = np.clip(np.searchsorted(self.x, q, side="right") - 1, 0, len(self.x) - 2)
        x0, x1 = self.x[k], self.x[k + 1]
        h = x1 - x0
        t = (q - x0) / h
        t2 = t * t
        t3 = t2 * t
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + t
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        out = h00 * self.y[k] + h10 * h * self.m[k] + h01 * self.y[k + 1] + h11 * h * self.m[k + 1]
        # hit knots exactly
        exact = q == x1
        if np.any(exact):
            out = np.where(exact, self.y[k + 1], out)
        exact = q == x0
        if np.any(exact):
            out = np.where(exact, self.y[k], out)
        return out if out.ndim else float(out)


def pchip_eval(curve: MonotoneCurve, x):
    """Evaluate the monotone cubic interpolant of ``curve`` at ``x`` (scalar or array)."""
    return Pchip(curve)(x)


def curve_from_ladder(ladder: Ladder) -> MonotoneCurve:
    """Quality -> bitrate knots; equal qualities keep the cheapest bitrate."""
    best = {}
    for e in ladder:
        q = float(e.quality)
        if q not in best or e.bitrate < best[q]:
            best[q] = float(e.bitrate)
    if len(best) < 2:
        raise ShapeError(f"need at least 2 distinct qualities, got {len(best)}")
    qs = sorted(best)
    return MonotoneCurve(tuple(qs), tuple(best[q] for q in qs))


def _as_rate_curve(c) -> MonotoneCurve:
    if isinstance(c, Ladder):
        return curve_from_ladder(c)
    if isinstance(c, MonotoneCurve):
        if any(y <= 0 for y in c.ys):
            raise ShapeError("bitrates must be positive")
        return c
    raise TypeError(f"expected MonotoneCurve or Ladder, got {type(c).__name__}")


def bd_rate(reference, test, nodes: int = 4) -> float:
    """Average bitrate difference of ``test`` against ``reference`` in percent.

    Both curves map quality to bitrate (a ``Ladder`` is converted first).
    ``log10(bitrate)`` is interpolated over quality with PCHIP and the
    difference is averaged over the shared quality range. The range is split
    at every knot of either curve, where both interpolants are single
    cubics, and each piece is integrated with ``nodes``-point Gauss-Legendre
    (exact for ``nodes >= 2``). Negative means the test curve is cheaper.
    """
    ref = _as_rate_curve(reference)
    tst = _as_rate_curve(test)
    lo = max(ref.xs[0], tst.xs[0])
    hi = min(ref.xs[-1], tst.xs[-1])
    if not hi > lo:
        raise OverlapError(f"quality ranges do not overlap ([{ref.xs[0]}, {ref.xs[-1]}] vs [{tst.xs[0]}, {tst.xs[-1]}])")

    f_ref = Pchip(MonotoneCurve(ref.xs, tuple(np.log10(ref.ys))))
    f_tst = Pchip(MonotoneCurve(tst.xs, tuple(np.log10(tst.ys))))

    cuts = np.unique(np.concatenate([[lo, hi], ref.xs, tst.xs]))
    cuts = cuts[(cuts >= lo) & (cuts <= hi)]
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    a, b = cuts[:-1, None], cuts[1:, None]
    q = (0.5 * (b - a) * gx + 0.5 * (a + b)).ravel()
    w = (0.5 * (b - a) * gw).ravel()
    diff = f_tst(q) - f_ref(q)
    mean_diff = float(np.dot(w, diff)) / (hi - lo)
    return (10.0 ** mean_diff - 1.0) * 100.0
