"""Seeded synthetic corpora: clips from the frame synthesizer labelled with the
ground truth hull of the simulated encoder."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .geometry import ground_truth_hull
from .rcn import TrainingShot
from .simencoder import EncoderModel, ShotComplexity, default_encoder_model, simulate_grid, synth_shot_frames

BROAD = {"spatial": (0.5, 3.0), "temporal": (0.3, 3.0)}
NARROW = {"spatial": (0.8, 1.6), "temporal": (0.6, 1.6)}


def sample_complexity(rng: np.random.Generator, ranges=BROAD) -> ShotComplexity:
    """Log-uniform draw inside the given multiplier ranges."""
    lo_s, hi_s = ranges["spatial"]
    lo_t, hi_t = ranges["temporal"]
    return ShotComplexity(
        float(np.exp(rng.uniform(np.log(lo_s), np.log(hi_s)))),
        float(np.exp(rng.uniform(np.log(lo_t), np.log(hi_t)))),
    )


def make_shot(model: EncoderModel, complexity: ShotComplexity, shot_id: str, seed: int,
              size=(96, 54), frame_count: int = 60) -> TrainingShot:
    grid, _ = simulate_grid(model, complexity, shot_id=shot_id)
    matrix, _ = ground_truth_hull(grid)
    frames = synth_shot_frames(model, complexity, size[0], size[1], frame_count, seed)
    return TrainingShot(frames, matrix, shot_id, complexity)


def make_corpus(n: int, seed: int, ranges=BROAD, model: Optional[EncoderModel] = None,
                size=(96, 54), frame_count: int = 60, prefix: str = "shot") -> list:
    model = model or default_encoder_model()
    rng = np.random.default_rng(seed)
    shots = []
    for i in range(n):
        c = sample_complexity(rng, ranges)
        shots.append(make_shot(model, c, f"{prefix}{i:03d}", int(rng.integers(2**31)), size, frame_count))
    return shots
