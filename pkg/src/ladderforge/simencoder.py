"""Deterministic parametric encoder: a rate-quality oracle plus a cost model.

Stands in for a real codec and a full-reference quality metric so that whole
pipelines (ground truth hulls, interpolation estimates, predicted ladders)
can run on a desk. Nothing here tries to match real HEVC numbers.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass
from importlib import resources
from typing import Optional

import numpy as np

from .core import EncodeConfig, LadderSpace, RQGrid, RQPoint, ladder_space_default
from .errors import FormatError, LadderError

MODEL_VERSION = 1


@dataclass(frozen=True)
class EncoderModel:
    rate_coefficient: float = 20000.0  # kbps per megapixel at qp 16, unit complexity
    qp_halving: float = 6.0
    quality_slope: float = 1.5
    upscale_penalty: tuple = (0.0, 3.0, 6.0, 9.0, 13.0, 18.0, 24.0)
    noise_seed: int = 0
    noise_amplitude: float = 0.0
    half_quality_rate: float = 1400.0  # kbps per megapixel where quality = ceiling / 2
    seconds_per_megapixel: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "upscale_penalty", tuple(float(p) for p in self.upscale_penalty))
        if self.rate_coefficient <= 0 or self.half_quality_rate <= 0 or self.seconds_per_megapixel <= 0:
            raise LadderError("rate, half-quality and cost coefficients must be positive")
        if self.qp_halving <= 0 or self.quality_slope <= 0:
            raise LadderError("qp_halving and quality_slope must be positive")
        if any(not 0.0 <= p < 100.0 for p in self.upscale_penalty):
            raise LadderError("upscale penalties must lie in [0, 100)")
        if not 0.0 <= self.noise_amplitude <= 0.05:
            raise LadderError("noise_amplitude must lie in [0, 0.05]")
        if not 0 <= int(self.noise_seed) < 2**64:
            raise LadderError("noise_seed must be a 64-bit unsigned integer")

    def ceiling(self, row: int) -> float:
        return 100.0 - self.upscale_penalty[row]

    def to_json(self) -> str:
        d = asdict(self)
        d["upscale_penalty"] = list(self.upscale_penalty)
        d["version"] = MODEL_VERSION
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EncoderModel":
        try:
            d = json.loads(text)
            version = d.pop("version", MODEL_VERSION)
        except (json.JSONDecodeError, AttributeError) as exc:
            raise FormatError(f"invalid encoder model JSON: {exc}") from None
        if version != MODEL_VERSION:
            raise FormatError(f"unsupported encoder model version {version}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise FormatError(f"invalid encoder model JSON: {exc}") from None


def default_encoder_model() -> EncoderModel:
    """The frozen fixture model shipped in ``data/default_encoder.json``."""
    text = resources.files("ladderforge").joinpath("data/default_encoder.json").read_text()
    return EncoderModel.from_json(text)


@dataclass(frozen=True)
class ShotComplexity:
    spatial: float = 1.0
    temporal: float = 1.0

    def __post_init__(self):
        if not (self.spatial > 0 and self.temporal > 0):
            raise LadderError(f"complexity multipliers must be positive, got {self}")


@dataclass(frozen=True)
class EncodeCost:
    seconds: float

    def __post_init__(self):
        if not self.seconds > 0:
            raise LadderError("encode cost must be positive")

    def __add__(self, other):
        return EncodeCost(self.seconds + other.seconds)


def _jitter(seed: int, config: EncodeConfig) -> float:
    """Uniform value in [-1, 1) derived from (seed, config) only."""
    key = struct.pack("<QIIi", int(seed), config.resolution.width, config.resolution.height, config.qp)
    u = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
    return u / 2.0**63 - 1.0


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def simulate_encode(model: EncoderModel, complexity: ShotComplexity, config: EncodeConfig,
                    space: Optional[LadderSpace] = None):
    """Bitrate, quality and wall-clock cost of one encode.

    ``space`` maps the resolution to its upscale penalty; the default space is
    assumed when omitted.
    """
    space = space or ladder_space_default()
    row = space.resolutions.index(config.resolution)
    mp = config.resolution.megapixels
    qp_scale = 2.0 ** (-(config.qp - 16) / model.qp_halving)
    rate = model.rate_coefficient * mp * complexity.spatial * complexity.temporal * qp_scale
    half_rate = model.half_quality_rate * mp * complexity.spatial
    quality = model.ceiling(row) * _logistic(model.quality_slope * (math.log(rate) - math.log(half_rate)))
    if model.noise_amplitude:
        rate *= 1.0 + model.noise_amplitude * _jitter(model.noise_seed, config)
    seconds = model.seconds_per_megapixel * mp * 2.0 ** (-(config.qp - 16) / 24.0)
    return RQPoint(config, rate, quality), EncodeCost(seconds)


def simulate_grid(model: EncoderModel, complexity: ShotComplexity, space: Optional[LadderSpace] = None,
                  shot_id: str = "sim"):
    """Encode every config of ``space``; returns ``(RQGrid, total EncodeCost)``."""
    space = space or ladder_space_default()
    points, total = [], 0.0
    for config in space.configs():
        p, cost = simulate_encode(model, complexity, config, space)
        points.append(p)
        total += cost.seconds
    return RQGrid.from_points(shot_id, space, points), EncodeCost(total)


def simulated_encoder(model: EncoderModel, complexity: ShotComplexity, space: Optional[LadderSpace] = None):
    """Encoder callback ``config -> (RQPoint, EncodeCost)`` bound to one shot."""
    space = space or ladder_space_default()

    def encode(config):
        return simulate_encode(model, complexity, config, space)

    return encode


def _band_limited_texture(rng, height, width, lo=0.04, hi=0.22):
    white = rng.standard_normal((height, width))
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.fftfreq(width)[None, :]
    radius = np.hypot(fy, fx)
    spectrum = np.fft.fft2(white) * ((radius >= lo) & (radius <= hi))
    tex = np.real(np.fft.ifft2(spectrum))
    std = tex.std()
    return spectrum / std if std > 0 else spectrum, fy, fx


def synth_shot_frames(model: EncoderModel, complexity: ShotComplexity, width: int, height: int,
                      frame_count: int, seed: int, amplitude: float = 12.0, speed: float = 0.4) -> np.ndarray:
    """Synthetic 8-bit luma clip, shape ``(frame_count, height, width)``.

    A periodic band-limited noise texture with standard deviation
    ``amplitude * spatial`` grey levels drifts at ``speed * temporal`` pixels
    per frame in a seeded direction; a second, finer layer drifts the other
    way at half the speed. Sub-pixel motion uses the Fourier shift theorem.
    """
    if width < 16 or height < 16:
        raise LadderError("frames must be at least 16x16")
    if frame_count < 1:
        raise LadderError("frame_count must be >= 1")
    rng = np.random.default_rng([int(seed), int(model.noise_seed) & 0xFFFFFFFF])
    base, fy, fx = _band_limited_texture(rng, height, width)
    fine, _, _ = _band_limited_texture(rng, height, width, lo=0.15, hi=0.45)
    angle = rng.uniform(0, 2 * np.pi)
    v = speed * complexity.temporal * np.array([np.cos(angle), np.sin(angle)])
    amp = amplitude * complexity.spatial

    frames = np.empty((frame_count, height, width), dtype=np.uint8)
    for t in range(frame_count):
        shift_a = np.exp(-2j * np.pi * (fx * v[0] * t + fy * v[1] * t))
        shift_b = np.exp(2j * np.pi * (fx * v[1] * t - fy * v[0] * t) * 0.5)
        img = np.real(np.fft.ifft2(base * shift_a + 0.5 * fine * shift_b))
        frames[t] = np.clip(np.rint(128.0 + amp * img), 0, 255).astype(np.uint8)
    return frames
