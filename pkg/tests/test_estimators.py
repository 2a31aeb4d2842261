import numpy as np
import pytest

from ladderforge.core import EncodeConfig, HullMatrix, RQPoint, ladder_space_default
from ladderforge.curves import bd_rate
from ladderforge.errors import EmptyPlanError, EncodeError, LadderError
from ladderforge.estimators import (
    EncodePlan,
    IHullConfig,
    SavingsReport,
    execute_and_postprocess,
    exhaustive_plan,
    ihull_estimate,
    plan_from_prediction,
    savings_vs_exhaustive,
)
from ladderforge.geometry import ground_truth_hull
from ladderforge.simencoder import EncodeCost, EncoderModel, ShotComplexity, simulate_grid, simulated_encoder

from oracles import hull_oracle

SPACE = ladder_space_default()


def fixture(s=1.0, t=1.0, **kw):
    model = EncoderModel(**kw)
    c = ShotComplexity(s, t)
    grid, cost = simulate_grid(model, c)
    matrix, ladder = ground_truth_hull(grid)
    return simulated_encoder(model, c), grid, cost, matrix, ladder


@pytest.mark.parametrize("t", [0.4, 1.0, 2.5])
def test_ihull_on_simulated_fixture(t):
    enc, _, cost, _, truth = fixture(1.3, t)
    matrix, ladder, report = ihull_estimate(enc, reference=truth, exhaustive_time=cost.seconds)
    assert 35 <= report.encodes_used <= 63
    assert abs(report.bd_rate_vs_optimal) <= 0.5
    assert report.time_savings > 0
    assert matrix.bits.sum() == len(ladder)


def linear_rows(config):
    # every row is a straight line in qp, so interpolated points are collinear
    row = SPACE.resolutions.index(config.resolution)
    rate = (52 - config.qp) * 100.0 * (7 - row)
    quality = 90.0 - 10.0 * row - (config.qp - 16) * 0.5 * (1 + row)
    return RQPoint(config, rate, max(quality, 1.0)), EncodeCost(1.0)


def test_ihull_minimum_when_interpolation_never_wins():
    rates = np.array([[linear_rows(c)[0].bitrate for c in row] for row in np.array(SPACE.configs()).reshape(7, 9)])
    quals = np.array([[linear_rows(c)[0].quality for c in row] for row in np.array(SPACE.configs()).reshape(7, 9)])
    on_hull = hull_oracle(rates, quals)
    # the oracle says no skipped qp (odd column) is on the exhaustive hull
    assert all((i % 9) % 2 == 0 for i in on_hull)
    _, _, report = ihull_estimate(linear_rows)
    assert report.encodes_used == 35


def test_ihull_config_validation():
    with pytest.raises(LadderError):
        IHullConfig((16, 17, 48)).validate(SPACE)
    with pytest.raises(LadderError):
        IHullConfig((20, 48)).validate(SPACE)
    IHullConfig((16, 48)).validate(SPACE)


def test_plans_from_predictions():
    assert len(plan_from_prediction(HullMatrix("a", SPACE, np.ones((7, 9), dtype=int)))) == 63
    one = np.zeros((7, 9), dtype=int)
    one[2, 3] = 1
    plan = plan_from_prediction(HullMatrix("b", SPACE, one))
    assert plan.jobs == (EncodeConfig(SPACE.resolutions[2], 28),)
    assert plan.to_json() == "[[960, 540, 28]]"
    with pytest.raises(EmptyPlanError):
        plan_from_prediction(HullMatrix.zeros(SPACE))
    with pytest.raises(LadderError):
        EncodePlan((plan.jobs[0], plan.jobs[0]))
    assert len(exhaustive_plan()) == 63


def test_postprocess_identity_on_exact_hull():
    enc, _, cost, truth_m, truth = fixture(0.9, 1.4)
    ladder, report = execute_and_postprocess(plan_from_prediction(truth_m), enc, truth, cost.seconds)
    assert ladder == truth
    assert report.bd_rate_vs_optimal == 0.0
    assert report.encodes_used == truth_m.bits.sum()


def test_postprocess_drops_extra_interior_point():
    enc, grid, _, truth_m, truth = fixture(0.9, 1.4)
    bits = truth_m.bits.copy()
    interior = next(i for i in range(63) if bits.ravel()[i] == 0 and i % 9 not in (0, 8))
    bits.ravel()[interior] = 1
    ladder, report = execute_and_postprocess(plan_from_prediction(HullMatrix("x", SPACE, bits)), enc, truth)
    assert ladder == truth
    assert report.encodes_used == truth_m.bits.sum() + 1


def test_postprocess_missing_point_costs_quality():
    enc, _, _, truth_m, truth = fixture(0.9, 1.4)
    rows, cols = np.nonzero(truth_m.bits)
    bits = truth_m.bits.copy()
    k = len(rows) // 2
    bits[rows[k], cols[k]] = 0
    ladder, report = execute_and_postprocess(plan_from_prediction(HullMatrix("x", SPACE, bits)), enc, truth)
    assert len(ladder) == len(truth) - 1
    assert report.bd_rate_vs_optimal > 0
    assert report.bd_rate_vs_optimal == bd_rate(truth, ladder)


def test_savings_arithmetic():
    r = savings_vs_exhaustive(19)
    assert r.encode_reduction == pytest.approx((1 - 19 / 63) * 100)
    # fractional average usage, as in a corpus mean: 18.60 of 63 jobs
    assert (1 - 18.60 / 63) * 100 == pytest.approx(70.476, abs=1e-3)
    assert savings_vs_exhaustive(0).degenerate
    assert savings_vs_exhaustive(63).encode_reduction == 0.0
    with pytest.raises(LadderError):
        savings_vs_exhaustive(64)
    r = savings_vs_exhaustive(10, used_time=25.0, exhaustive_time=100.0)
    assert r.time_savings == pytest.approx(75.0)
    assert SavingsReport.from_dict(r.to_dict()) == r


def test_encoder_failure_propagates():
    def broken(config):
        if config.qp == 32:
            raise RuntimeError("disk full")
        return linear_rows(config)

    with pytest.raises(EncodeError) as exc:
        ihull_estimate(broken)
    assert exc.value.config.qp == 32
    with pytest.raises(EncodeError):
        execute_and_postprocess(exhaustive_plan(), broken, workers=4)


def test_parallel_matches_serial():
    enc, _, _, _, _ = fixture(1.1, 0.7)
    a = ihull_estimate(enc, workers=1)
    b = ihull_estimate(enc, workers=4)
    assert a[0] == b[0] and a[1] == b[1] and a[2].time_used == b[2].time_used
