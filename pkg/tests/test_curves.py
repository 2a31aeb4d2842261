import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import PchipInterpolator

from ladderforge.core import EncodeConfig, Ladder, LadderEntry, Resolution
from ladderforge.curves import MonotoneCurve, bd_rate, curve_from_ladder, pchip_eval
from ladderforge.errors import ExtrapolationError, OverlapError, ShapeError

CFG = EncodeConfig(Resolution(1920, 1080), 16)


def test_linear_data_reproduced():
    xs = (16, 24, 32, 40, 48)
    c = MonotoneCurve(xs, tuple(2.0 * x for x in xs))
    assert pchip_eval(c, 20) == pytest.approx(40.0, rel=1e-12)
    assert pchip_eval(c, 32) == 64.0


def test_extrapolation_and_arity():
    c = MonotoneCurve((0, 1, 2), (0, 1, 4))
    with pytest.raises(ExtrapolationError):
        pchip_eval(c, 2.5)
    with pytest.raises(ShapeError):
        MonotoneCurve((1,), (1,))
    with pytest.raises(ShapeError):
        MonotoneCurve((0, 0, 1), (1, 2, 3))


def test_two_knots_is_linear():
    c = MonotoneCurve((0.0, 4.0), (1.0, 9.0))
    np.testing.assert_allclose(pchip_eval(c, np.array([1.0, 2.0, 3.0])), [3.0, 5.0, 7.0], rtol=1e-14)


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_matches_scipy_pchip(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 12))
    xs = np.cumsum(rng.uniform(0.1, 3.0, n))
    ys = rng.normal(size=n) * 10
    q = np.linspace(xs[0], xs[-1], 257)
    ours = pchip_eval(MonotoneCurve(tuple(xs), tuple(ys)), q)
    np.testing.assert_allclose(ours, PchipInterpolator(xs, ys)(q), rtol=1e-10, atol=1e-10)


def test_monotone_dense_scan():
    rng = np.random.default_rng(3)
    xs = np.cumsum(rng.uniform(0.5, 4.0, 9))
    ys = np.cumsum(rng.exponential(1.0, 9))
    v = pchip_eval(MonotoneCurve(tuple(xs), tuple(ys)), np.linspace(xs[0], xs[-1], 10_000))
    assert np.all(np.diff(v) >= -1e-12)


def ladder(pairs):
    return Ladder(tuple(LadderEntry(CFG, r, q) for r, q in pairs))


REF = ladder([(300, 40), (800, 60), (1800, 75), (4000, 86), (9000, 93)])


def test_bd_rate_identity():
    assert bd_rate(REF, REF) == 0.0


def test_bd_rate_doubled_and_halved():
    doubled = ladder([(2 * e.bitrate, e.quality) for e in REF])
    halved = ladder([(0.5 * e.bitrate, e.quality) for e in REF])
    # constant log offset: (10**log10(2) - 1) * 100 and (10**-log10(2) - 1) * 100
    assert bd_rate(REF, doubled) == pytest.approx((10 ** math.log10(2) - 1) * 100, rel=1e-9)
    assert bd_rate(doubled, REF) == pytest.approx(-50.0, rel=1e-9)
    assert bd_rate(REF, halved) == pytest.approx(-50.0, rel=1e-9)


@pytest.mark.parametrize("k", [0.25, 0.9, 1.1, 3.0])
def test_bd_rate_scale_law(k):
    scaled = ladder([(k * e.bitrate, e.quality) for e in REF])
    assert bd_rate(REF, scaled) == pytest.approx((k - 1) * 100, rel=1e-9)


def test_bd_rate_quadrature_refinement():
    test = ladder([(350, 42), (700, 58), (2100, 77), (3500, 85), (10000, 94)])
    coarse = bd_rate(REF, test, nodes=4)
    fine = bd_rate(REF, test, nodes=8)
    assert abs(coarse - fine) < 1e-6
    # independent check: 20k-point trapezoid on scipy's PCHIP
    lo, hi = 42, 93
    q = np.linspace(lo, hi, 20001)
    fr = PchipInterpolator(REF.qualities, np.log10(REF.bitrates))(q)
    ft = PchipInterpolator(test.qualities, np.log10(test.bitrates))(q)
    d = np.trapezoid(ft - fr, q) / (hi - lo)
    assert coarse == pytest.approx((10 ** d - 1) * 100, abs=1e-6)


def test_bd_rate_no_overlap():
    low = ladder([(100, 10), (200, 20)])
    high = ladder([(300, 30), (400, 35)])
    with pytest.raises(OverlapError):
        bd_rate(low, high)


def test_curve_from_ladder():
    c = curve_from_ladder(REF)
    assert len(c.xs) == 5
    assert c.xs[0] == 40 and c.ys[0] == 300
    with pytest.raises(ShapeError):
        curve_from_ladder(ladder([(100, 50)]))


def test_curve_from_entries_dedups_quality():
    # not a valid Ladder, so use the raw entry path through a duck-typed iterable
    class Entries(list):
        pass

    from ladderforge import curves

    entries = [LadderEntry(CFG, 120, 50), LadderEntry(CFG, 100, 50), LadderEntry(CFG, 300, 70)]
    c = curves.curve_from_ladder(Entries(entries))
    assert c.xs == (50.0, 70.0) and c.ys == (100.0, 300.0)
    with pytest.raises(ShapeError):
        curves.curve_from_ladder(Entries(entries[:2]))
