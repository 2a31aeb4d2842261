"""Cheaper-than-exhaustive hull estimates and their cost accounting.

An encoder callback is any ``config -> (RQPoint, EncodeCost)`` function;
``simencoder.simulated_encoder`` builds one from the parametric model.
"""

from __future__ import annotations

import enum
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import EncodeConfig, HullMatrix, Ladder, LadderEntry, LadderSpace, ladder_space_default
from .curves import MonotoneCurve, bd_rate, pchip_eval
from .errors import EmptyPlanError, EncodeError, LadderError
from .geometry import RQSample, convexity_filter, ladder_from_points, upper_convex_envelope

EncoderCallback = Callable[[EncodeConfig], tuple]


@dataclass(frozen=True)
class IHullConfig:
    reduced_qps: tuple = (16, 24, 32, 40, 48)

    def validate(self, space: LadderSpace):
        qps = tuple(self.reduced_qps)
        if len(qps) < 2 or len(set(qps)) != len(qps):
            raise LadderError("reduced QP set needs at least 2 distinct values")
        if not set(qps) <= set(space.qps):
            raise LadderError(f"reduced QPs {qps} are not a subset of {space.qps}")
        if min(space.qps) not in qps or max(space.qps) not in qps:
            raise LadderError("reduced QP set must include the extreme QPs")


class PlanOrigin(str, enum.Enum):
    EXHAUSTIVE = "exhaustive"
    IHULL = "ihull"
    PREDICTED = "predicted"


@dataclass(frozen=True)
class EncodePlan:
    jobs: tuple
    origin: PlanOrigin = PlanOrigin.PREDICTED

    def __post_init__(self):
        jobs = tuple(self.jobs)
        if len(set(jobs)) != len(jobs):
            raise LadderError("encode plan contains duplicate jobs")
        object.__setattr__(self, "jobs", jobs)

    def __len__(self):
        return len(self.jobs)

    def to_json(self) -> str:
        return json.dumps([[c.resolution.width, c.resolution.height, c.qp] for c in self.jobs])


@dataclass(frozen=True)
class SavingsReport:
    encodes_used: int
    encodes_exhaustive: int
    encode_reduction: float
    time_used: Optional[float] = None
    time_exhaustive: Optional[float] = None
    time_savings: Optional[float] = None
    bd_rate_vs_optimal: Optional[float] = None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d) -> "SavingsReport":
        return cls(**d)


def savings_vs_exhaustive(used_jobs: int, used_time: Optional[float] = None,
                          space: Optional[LadderSpace] = None, exhaustive_time: Optional[float] = None,
                          bd_rate_vs_optimal: Optional[float] = None) -> SavingsReport:
    """Encode-count and time reductions relative to encoding the whole space."""
    space = space or ladder_space_default()
    total = space.size
    if not 0 <= used_jobs <= total:
        raise LadderError(f"used_jobs={used_jobs} outside [0, {total}]")
    time_savings = None
    if used_time is not None and exhaustive_time:
        time_savings = (1.0 - used_time / exhaustive_time) * 100.0
    return SavingsReport(
        encodes_used=int(used_jobs),
        encodes_exhaustive=total,
        encode_reduction=(1.0 - used_jobs / total) * 100.0,
        time_used=used_time,
        time_exhaustive=exhaustive_time,
        time_savings=time_savings,
        bd_rate_vs_optimal=bd_rate_vs_optimal,
        degenerate=used_jobs == 0,
    )


def _encode(encoder: EncoderCallback, config: EncodeConfig):
    try:
        return encoder(config)
    except Exception as exc:
        raise EncodeError(config, exc) from exc


def encode_all(encoder: EncoderCallback, configs: Sequence[EncodeConfig], workers: int = 1) -> list:
    """Run ``encoder`` over ``configs``; results come back in job order."""
    if workers > 1 and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda c: _encode(encoder, c), configs))
    return [_encode(encoder, c) for c in configs]


def plan_from_prediction(pred: HullMatrix) -> EncodePlan:
    jobs = pred.configs()
    if not jobs:
        raise EmptyPlanError("prediction has no positive cells, nothing to encode")
    return EncodePlan(tuple(jobs), PlanOrigin.PREDICTED)


def execute_and_postprocess(plan: EncodePlan, encoder: EncoderCallback, reference: Optional[Ladder] = None,
                            exhaustive_time: Optional[float] = None, space: Optional[LadderSpace] = None,
                            workers: int = 1):
    """Encode every planned config, then keep only the convex-envelope survivors.

    Filtered-out encodes still count toward ``encodes_used`` and time.
    """
    if not plan.jobs:
        raise EmptyPlanError("empty encode plan")
    results = encode_all(encoder, plan.jobs, workers)
    points = [p for p, _ in results]
    seconds = float(sum(c.seconds for _, c in results))
    keep = convexity_filter(RQSample(p.bitrate, p.quality, i) for i, p in enumerate(points))
    ladder = Ladder(tuple(LadderEntry(points[i].config, points[i].bitrate, points[i].quality) for i in keep))
    bd = _bd_vs(reference, ladder)
    report = savings_vs_exhaustive(len(plan.jobs), seconds, space, exhaustive_time, bd)
    return ladder, report


def _bd_vs(reference: Optional[Ladder], ladder: Ladder) -> Optional[float]:
    if reference is None:
        return None
    return bd_rate(reference, ladder)


def ihull_estimate(encoder: EncoderCallback, space: Optional[LadderSpace] = None,
                   cfg: Optional[IHullConfig] = None, reference: Optional[Ladder] = None,
                   exhaustive_time: Optional[float] = None, workers: int = 1):
    """Interpolation-based hull estimate.

    Encodes the reduced QP set at every resolution, fills the other QPs by
    PCHIP over QP (bitrate and quality separately), takes the envelope of
    actual plus interpolated points, encodes any interpolated point that
    landed on it, and recomputes the envelope over actual encodes only.
    Returns ``(HullMatrix, Ladder, SavingsReport)``.
    """
    space = space or ladder_space_default()
    cfg = cfg or IHullConfig()
    cfg.validate(space)
    reduced = sorted(cfg.reduced_qps)
    skipped = [q for q in space.qps if q not in reduced]

    first = [EncodeConfig(r, q) for r in space.resolutions for q in reduced]
    actual = {}
    seconds = 0.0
    for config, (p, cost) in zip(first, encode_all(encoder, first, workers)):
        actual[config] = p
        seconds += cost.seconds

    estimates = {}
    for r in space.resolutions:
        rates = MonotoneCurve(tuple(reduced), tuple(actual[EncodeConfig(r, q)].bitrate for q in reduced))
        quals = MonotoneCurve(tuple(reduced), tuple(actual[EncodeConfig(r, q)].quality for q in reduced))
        if skipped:
            est_r = np.atleast_1d(pchip_eval(rates, np.array(skipped, dtype=float)))
            est_q = np.atleast_1d(pchip_eval(quals, np.array(skipped, dtype=float)))
            for q, br, vq in zip(skipped, est_r, est_q):
                estimates[EncodeConfig(r, q)] = (float(br), float(vq))

    samples = [RQSample(p.bitrate, p.quality, c) for c, p in actual.items()]
    samples += [RQSample(br, vq, c) for c, (br, vq) in estimates.items() if br > 0]
    on_hull = [c for c in upper_convex_envelope(samples) if c in estimates]
    on_hull.sort(key=lambda c: space.index(c))
    for config, (p, cost) in zip(on_hull, encode_all(encoder, on_hull, workers)):
        actual[config] = p
        seconds += cost.seconds

    ladder = ladder_from_points(list(actual.values()))
    matrix = HullMatrix.from_configs(space, ladder.configs())
    report = savings_vs_exhaustive(len(actual), seconds, space, exhaustive_time, _bd_vs(reference, ladder))
    return matrix, ladder, report


def exhaustive_plan(space: Optional[LadderSpace] = None) -> EncodePlan:
    space = space or ladder_space_default()
    return EncodePlan(tuple(space.configs()), PlanOrigin.EXHAUSTIVE)
