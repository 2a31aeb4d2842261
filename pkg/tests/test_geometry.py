import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ladderforge.core import EncodeConfig, RQGrid, RQPoint, ladder_space_default
from ladderforge.errors import CompletenessError, EmptyInputError
from ladderforge.geometry import RQSample, convexity_filter, ground_truth_hull, upper_convex_envelope
from ladderforge.simencoder import EncoderModel, ShotComplexity, simulate_grid

from oracles import hull_oracle


def grid_from_arrays(rates, quals, shot="g"):
    space = ladder_space_default()
    pts = [
        RQPoint(EncodeConfig(r, q), float(rates[i, j]), float(quals[i, j]))
        for i, r in enumerate(space.resolutions)
        for j, q in enumerate(space.qps)
    ]
    return RQGrid.from_points(shot, space, pts)


def test_envelope_drops_point_below_chord():
    pts = [(100, 50, "a"), (200, 70, "b"), (300, 72, "c"), (400, 80, "d")]
    # oracle check of the expected answer: chord b-d at 300 is 75 > 72
    assert [pts[i][2] for i in hull_oracle([p[0] for p in pts], [p[1] for p in pts])] == ["a", "b", "d"]
    assert upper_convex_envelope(pts) == ["a", "b", "d"]


def test_envelope_singleton_and_equal_quality():
    assert upper_convex_envelope([RQSample(500, 90, 0)]) == [0]
    assert upper_convex_envelope([(100, 60, "cheap"), (200, 60, "dear")]) == ["cheap"]


def test_envelope_ties():
    # equal bitrate keeps higher quality; identical duplicates keep the first tag
    assert upper_convex_envelope([(100, 40, 0), (100, 60, 1)]) == [1]
    assert upper_convex_envelope([(100, 60, 5), (100, 60, 2), (300, 80, 9)]) == [5, 9]


def test_envelope_empty():
    with pytest.raises(EmptyInputError):
        upper_convex_envelope([])
    with pytest.raises(EmptyInputError):
        convexity_filter([])


def test_ground_truth_matches_oracle_default_model():
    grid, _ = simulate_grid(EncoderModel(), ShotComplexity(1.0, 1.0))
    matrix, ladder = ground_truth_hull(grid)
    keep = hull_oracle(grid.bitrates(), grid.qualities())
    expected = np.zeros(63, dtype=np.uint8)
    expected[keep] = 1
    np.testing.assert_array_equal(matrix.bits.ravel(), expected)
    assert len(ladder) == len(keep)
    assert len({c.resolution for c in ladder.configs()}) >= 3


def test_dominating_resolution_confines_hull():
    # only 720p keeps a full-quality ceiling, every other row is capped low
    model = EncoderModel(upscale_penalty=(60, 0, 60, 60, 60, 60, 60))
    grid, _ = simulate_grid(model, ShotComplexity(1.0, 1.0))
    rates, quals = grid.bitrates(), grid.qualities()
    # shift row 1 to be cheaper than everything at equal qp so it dominates
    rates[1] = rates[-1] * 0.5
    grid = grid_from_arrays(rates, quals)
    matrix, _ = ground_truth_hull(grid)
    keep = hull_oracle(rates, quals)
    assert all(k // 9 == 1 for k in keep)
    assert matrix.bits.sum() == matrix.bits[1].sum() == len(keep)


def test_collinear_grid_selects_extremes():
    k = np.arange(63, dtype=float)
    rates = (100.0 + 10.0 * k).reshape(7, 9)
    quals = (10.0 + 1.0 * k).reshape(7, 9)
    matrix, ladder = ground_truth_hull(grid_from_arrays(rates, quals))
    assert matrix.bits.sum() == 2
    assert matrix.bits[0, 0] == 1 and matrix.bits[6, 8] == 1
    assert [e.bitrate for e in ladder] == [100.0, 720.0]


def test_incomplete_grid_rejected():
    space = ladder_space_default()
    grid = RQGrid.from_points("x", space, [RQPoint(space.configs()[0], 10.0, 10.0)])
    with pytest.raises(CompletenessError):
        ground_truth_hull(grid)


def test_filter_removes_interior_point():
    grid, _ = simulate_grid(EncoderModel(), ShotComplexity(1.3, 0.7))
    _, ladder = ground_truth_hull(grid)
    rates, quals = grid.bitrates().ravel(), grid.qualities().ravel()
    on_hull = set(hull_oracle(rates, quals))
    interior = next(i for i in range(63) if i not in on_hull and i % 9 not in (0, 8))
    cands = [RQSample(e.bitrate, e.quality, str(e.config)) for e in ladder]
    cands.append(RQSample(rates[interior], quals[interior], "interior"))
    # the oracle confirms it is interior relative to the candidate set too
    cand_keep = hull_oracle([c.bitrate for c in cands], [c.quality for c in cands])
    assert len(cands) - 1 not in cand_keep
    out = convexity_filter(cands)
    assert "interior" not in out
    assert out == [str(e.config) for e in ladder]
    assert convexity_filter(cands[:-1]) == out


points = st.lists(
    st.tuples(st.floats(1.0, 1e5), st.floats(0.0, 100.0)), min_size=1, max_size=40
)


@given(points)
@settings(max_examples=200, deadline=None)
def test_envelope_matches_oracle(pts):
    samples = [RQSample(r, q, i) for i, (r, q) in enumerate(pts)]
    assert upper_convex_envelope(samples) == hull_oracle([p[0] for p in pts], [p[1] for p in pts])


@given(points)
@settings(max_examples=100, deadline=None)
def test_filter_idempotent(pts):
    samples = [RQSample(r, q, i) for i, (r, q) in enumerate(pts)]
    once = convexity_filter(samples)
    kept = [s for s in samples if s.tag in set(once)]
    assert convexity_filter(kept) == once


@given(points, st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.data())
@settings(max_examples=100, deadline=None)
def test_adding_dominated_point_is_noop(pts, dr, dq, data):
    samples = [RQSample(r, q, i) for i, (r, q) in enumerate(pts)]
    hull = upper_convex_envelope(samples)
    anchor = samples[data.draw(st.sampled_from(hull))]
    extra = RQSample(anchor.bitrate * (1 + dr) + 1e-3, anchor.quality - dq * anchor.quality - 1e-9, "extra")
    if extra.quality < anchor.quality:
        assert upper_convex_envelope(samples + [extra]) == hull


@given(points)
@settings(max_examples=100, deadline=None)
def test_envelope_output_is_valid_ladder(pts):
    samples = [RQSample(r, q, i) for i, (r, q) in enumerate(pts)]
    hull = [samples[i] for i in upper_convex_envelope(samples)]
    for a, b in zip(hull, hull[1:]):
        assert b.bitrate > a.bitrate and b.quality > a.quality
    for a, b, c in zip(hull, hull[1:], hull[2:]):
        assert (b.quality - a.quality) / (b.bitrate - a.bitrate) > (c.quality - b.quality) / (c.bitrate - b.bitrate)
