"""Upper convex envelope of rate-quality points.

The envelope is taken in the linear (bitrate, quality) plane. It runs from
the cheapest non-dominated point to the highest-quality point, and every
retained point has a strictly smaller chord slope than its predecessor, so
collinear middle points are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

from .core import HullMatrix, Ladder, LadderEntry, RQGrid, concave_turn
from .errors import EmptyInputError, LadderError


@dataclass(frozen=True)
class RQSample:
    bitrate: float
    quality: float
    tag: Hashable

    def __post_init__(self):
        if not self.bitrate > 0:
            raise LadderError(f"sample bitrate must be positive, got {self.bitrate}")


def _as_samples(samples) -> list:
    out = []
    for s in samples:
        out.append(s if isinstance(s, RQSample) else RQSample(*s))
    return out


def pareto_front(samples: Sequence[RQSample]) -> list:
    """Non-dominated samples in increasing bitrate (and quality) order."""
    order = sorted(range(len(samples)), key=lambda i: (samples[i].bitrate, -samples[i].quality, i))
    front = []
    for i in order:
        s = samples[i]
        # sort order puts the best quality first within equal bitrates
        if not front or s.quality > front[-1].quality:
            front.append(s)
    return front


def upper_convex_envelope(samples: Iterable) -> list:
    """Tags of the upper-left convex hull vertices, ordered by bitrate.

    Accepts ``RQSample`` objects or ``(bitrate, quality, tag)`` tuples. Ties
    go to the higher quality at equal rate, the lower rate at equal quality
    and the first occurrence among exact duplicates.
    """
    samples = _as_samples(samples)
    if not samples:
        raise EmptyInputError("cannot build a convex envelope of zero points")
    chain = []
    for p in pareto_front(samples):
        while len(chain) >= 2:
            a, b = chain[-2], chain[-1]
            if concave_turn(a.bitrate, a.quality, b.bitrate, b.quality, p.bitrate, p.quality) > 0:
                break
            chain.pop()
        chain.append(p)
    return [s.tag for s in chain]


def convexity_filter(points: Iterable) -> list:
    """Drop candidate encodes that do not sit on their own convex envelope.

    Used after encoding a predicted set of configs: only the given points are
    considered, not the full grid.
    """
    return upper_convex_envelope(points)


def ladder_from_points(points: Sequence) -> Ladder:
    """Ladder of the envelope of a set of ``RQPoint``s."""
    points = list(points)
    tags = upper_convex_envelope(RQSample(p.bitrate, p.quality, i) for i, p in enumerate(points))
    return Ladder(tuple(LadderEntry(points[i].config, points[i].bitrate, points[i].quality) for i in tags))


def ground_truth_hull(grid: RQGrid):
    """Optimal hull of a complete grid as ``(HullMatrix, Ladder)``."""
    grid.require_complete()
    ladder = ladder_from_points(list(grid))
    matrix = HullMatrix.from_configs(grid.space, ladder.configs(), shot_id=grid.shot_id)
    return matrix, ladder
