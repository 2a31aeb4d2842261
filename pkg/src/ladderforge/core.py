"""Ladder space, rate-quality measurements, hull matrices and their file formats."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    CompletenessError,
    DuplicateCellError,
    FormatError,
    LadderError,
    ParseError,
    RangeError,
    ShapeError,
    UnknownConfigError,
)

CSV_HEADER = ("shot_id", "width", "height", "qp", "bitrate_kbps", "vmaf")


@dataclass(frozen=True, order=True)
class Resolution:
    width: int
    height: int

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height:
            raise LadderError(f"resolution must be integral, got {self.width}x{self.height}")
        if self.width < 16 or self.height < 16:
            raise LadderError(f"resolution {self.width}x{self.height} below 16 pixels")

    @property
    def pixels(self) -> int:
        return self.width * self.height

    @property
    def megapixels(self) -> float:
        return self.pixels / 1e6

    def __str__(self):
        return f"{self.width}x{self.height}"


@dataclass(frozen=True)
class LadderSpace:
    resolutions: tuple
    qps: tuple

    def __post_init__(self):
        object.__setattr__(self, "resolutions", tuple(self.resolutions))
        object.__setattr__(self, "qps", tuple(int(q) for q in self.qps))
        if not self.resolutions or not self.qps:
            raise LadderError("ladder space needs at least one resolution and one QP")
        px = [r.pixels for r in self.resolutions]
        if any(a <= b for a, b in zip(px, px[1:])):
            raise LadderError("resolutions must be strictly descending by pixel count")
        if any(a >= b for a, b in zip(self.qps, self.qps[1:])):
            raise LadderError("qps must be strictly ascending")
        if any(q < 0 or q > 51 for q in self.qps):
            raise LadderError("qps must lie in [0, 51]")

    @property
    def shape(self) -> tuple:
        return (len(self.resolutions), len(self.qps))

    @property
    def size(self) -> int:
        return len(self.resolutions) * len(self.qps)

    def configs(self) -> list:
        """All configs in matrix order (resolution descending, qp ascending)."""
        return [EncodeConfig(r, q) for r in self.resolutions for q in self.qps]

    def index(self, config: "EncodeConfig") -> tuple:
        try:
            return self.resolutions.index(config.resolution), self.qps.index(config.qp)
        except ValueError:
            raise UnknownConfigError(f"{config} is not in the ladder space") from None

    def __contains__(self, config) -> bool:
        return config.resolution in self.resolutions and config.qp in self.qps


def ladder_space_default() -> LadderSpace:
    """The 7 resolution x 9 QP space (63 encodes) used for HEVC ladders."""
    resolutions = [
        Resolution(1920, 1080),
        Resolution(1280, 720),
        Resolution(960, 540),
        Resolution(768, 432),
        Resolution(640, 360),
        Resolution(480, 270),
        Resolution(384, 216),
    ]
    return LadderSpace(tuple(resolutions), tuple(range(16, 49, 4)))


@dataclass(frozen=True, order=True)
class EncodeConfig:
    resolution: Resolution
    qp: int

    def __str__(self):
        return f"{self.resolution}@qp{self.qp}"


@dataclass(frozen=True)
class RQPoint:
    config: EncodeConfig
    bitrate: float
    quality: float

    def __post_init__(self):
        if not self.bitrate > 0:
            raise RangeError(f"bitrate must be positive, got {self.bitrate}")
        if not 0.0 <= self.quality <= 100.0:
            raise RangeError(f"quality must be in [0, 100], got {self.quality}")


@dataclass(frozen=True)
class RQGrid:
    """Dense resolution x qp table of optional measurements."""

    shot_id: str
    space: LadderSpace
    points: tuple

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.points)
        if len(rows) != len(self.space.resolutions) or any(len(r) != len(self.space.qps) for r in rows):
            raise ShapeError("grid dimensions do not match the ladder space")
        for i, row in enumerate(rows):
            for j, p in enumerate(row):
                if p is not None and p.config != EncodeConfig(self.space.resolutions[i], self.space.qps[j]):
                    raise ShapeError(f"point {p.config} stored at the wrong cell ({i}, {j})")
        object.__setattr__(self, "points", rows)

    @classmethod
    def from_points(cls, shot_id: str, space: LadderSpace, points: Iterable[RQPoint]) -> "RQGrid":
        cells = [[None] * len(space.qps) for _ in space.resolutions]
        for p in points:
            i, j = space.index(p.config)
            if cells[i][j] is not None:
                raise DuplicateCellError(f"duplicate measurement for {p.config}")
            cells[i][j] = p
        return cls(shot_id, space, cells)

    def __iter__(self):
        for row in self.points:
            for p in row:
                if p is not None:
                    yield p

    @property
    def complete(self) -> bool:
        return all(p is not None for row in self.points for p in row)

    def missing(self) -> list:
        return [
            EncodeConfig(self.space.resolutions[i], self.space.qps[j])
            for i, row in enumerate(self.points)
            for j, p in enumerate(row)
            if p is None
        ]

    def require_complete(self):
        gaps = self.missing()
        if gaps:
            raise CompletenessError(
                f"grid {self.shot_id!r} is missing {len(gaps)} cell(s), first {gaps[0]}"
            )

    def bitrates(self) -> np.ndarray:
        return np.array([[np.nan if p is None else p.bitrate for p in row] for row in self.points])

    def qualities(self) -> np.ndarray:
        return np.array([[np.nan if p is None else p.quality for p in row] for row in self.points])


def rq_grid_from_csv(text, space: Optional[LadderSpace] = None) -> RQGrid:
    """Parse an RQ CSV (one shot) into a grid; absent cells stay missing."""
    space = space or ladder_space_default()
    if isinstance(text, str):
        text = io.StringIO(text)
    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input, expected header", line=1) from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise ParseError(f"bad header {header!r}, expected {','.join(CSV_HEADER)}", line=1)

    shot_id = None
    cells = [[None] * len(space.qps) for _ in space.resolutions]
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise ParseError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", line=line)
        sid = row[0].strip()
        try:
            width, height, qp = int(row[1]), int(row[2]), int(row[3])
            bitrate, quality = float(row[4]), float(row[5])
        except ValueError as exc:
            raise ParseError(str(exc), line=line) from None
        if shot_id is None:
            shot_id = sid
        elif sid != shot_id:
            raise ParseError(f"mixed shot ids {shot_id!r} and {sid!r}", line=line)
        if not np.isfinite(bitrate) or bitrate <= 0:
            raise RangeError(f"bitrate must be positive, got {row[4]}", line=line)
        if not 0.0 <= quality <= 100.0:
            raise RangeError(f"vmaf must be in [0, 100], got {row[5]}", line=line)
        try:
            config = EncodeConfig(Resolution(width, height), qp)
        except LadderError as exc:
            raise UnknownConfigError(str(exc), line=line) from None
        if config not in space:
            raise UnknownConfigError(f"{config} is not in the ladder space", line=line)
        i, j = space.index(config)
        if cells[i][j] is not None:
            raise DuplicateCellError(f"duplicate row for {config}", line=line)
        cells[i][j] = RQPoint(config, bitrate, quality)
    return RQGrid(shot_id or "", space, cells)


def rq_grid_to_csv(grid: RQGrid) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for p in grid:
        r = p.config.resolution
        writer.writerow([grid.shot_id, r.width, r.height, p.config.qp, f"{p.bitrate:.6g}", f"{p.quality:.6g}"])
    return buf.getvalue()


def rq_grid_validate(grid: RQGrid) -> list:
    """Warnings for missing cells and bitrate increasing with qp within a row."""
    warnings = [f"missing cell {c}" for c in grid.missing()]
    for i, row in enumerate(grid.points):
        prev = None
        for p in row:
            if p is None:
                continue
            if prev is not None and p.bitrate > prev.bitrate:
                warnings.append(
                    f"bitrate increases from {prev.config} ({prev.bitrate:g}) to {p.config} ({p.bitrate:g})"
                )
            prev = p
    return warnings


class HullMatrix:
    """Binary |resolutions| x |qps| matrix marking configs on the convex hull."""

    __slots__ = ("shot_id", "space", "_bits")

    def __init__(self, shot_id: str, space: LadderSpace, bits):
        arr = np.array(bits)
        if arr.shape != space.shape:
            raise ShapeError(f"matrix shape {arr.shape} does not match space {space.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise LadderError("hull matrix entries must be 0 or 1")
        arr = arr.astype(np.uint8)
        arr.flags.writeable = False
        self.shot_id = shot_id
        self.space = space
        self._bits = arr

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @classmethod
    def zeros(cls, space: LadderSpace, shot_id: str = "") -> "HullMatrix":
        return cls(shot_id, space, np.zeros(space.shape, dtype=np.uint8))

    @classmethod
    def from_configs(cls, space: LadderSpace, configs: Iterable[EncodeConfig], shot_id: str = "") -> "HullMatrix":
        bits = np.zeros(space.shape, dtype=np.uint8)
        for c in configs:
            bits[space.index(c)] = 1
        return cls(shot_id, space, bits)

    def configs(self) -> list:
        """Configs with bit 1, ordered by (resolution desc, qp asc)."""
        return [
            EncodeConfig(self.space.resolutions[i], self.space.qps[j])
            for i, j in zip(*np.nonzero(self._bits))
        ]

    def __eq__(self, other):
        if not isinstance(other, HullMatrix):
            return NotImplemented
        return (
            self.shot_id == other.shot_id
            and self.space == other.space
            and np.array_equal(self._bits, other._bits)
        )

    def __repr__(self):
        return f"HullMatrix({self.shot_id!r}, ones={hull_count(self)})"

    def to_dict(self) -> dict:
        return {
            "shot_id": self.shot_id,
            "resolutions": [[r.width, r.height] for r in self.space.resolutions],
            "qps": list(self.space.qps),
            "matrix": self._bits.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj) -> "HullMatrix":
        if not isinstance(obj, dict):
            raise FormatError("hull matrix JSON must be an object")
        missing = {"shot_id", "resolutions", "qps", "matrix"} - set(obj)
        if missing:
            raise FormatError(f"hull matrix JSON missing keys {sorted(missing)}")
        try:
            if not isinstance(obj["shot_id"], str):
                raise FormatError("shot_id must be a string")
            space = LadderSpace(
                tuple(Resolution(int(w), int(h)) for w, h in obj["resolutions"]),
                tuple(obj["qps"]),
            )
            matrix = obj["matrix"]
            if (
                not isinstance(matrix, list)
                or len(matrix) != len(space.resolutions)
                or any(not isinstance(row, list) or len(row) != len(space.qps) for row in matrix)
                or any(type(v) is not int or v not in (0, 1) for row in matrix for v in row)
            ):
                raise FormatError("matrix must be a list of rows of 0/1 integers matching the space")
            return cls(obj["shot_id"], space, np.array(matrix, dtype=np.uint8))
        except FormatError:
            raise
        except (LadderError, TypeError, ValueError) as exc:
            raise FormatError(f"invalid hull matrix JSON: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "HullMatrix":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"corrupted hull matrix JSON: {exc}") from None
        return cls.from_dict(obj)


def hull_count(m: HullMatrix) -> int:
    """Number of encodes a prediction asks for."""
    return int(m.bits.sum())


def hull_matrix_roundtrip(m: HullMatrix) -> HullMatrix:
    return HullMatrix.from_json(m.to_json())


@dataclass(frozen=True)
class LadderEntry:
    config: EncodeConfig
    bitrate: float
    quality: float


@dataclass(frozen=True)
class Ladder:
    """Pareto-optimal operating points ordered by bitrate."""

    entries: tuple = field(default_factory=tuple)

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        problems = ladder_violations(entries)
        if problems:
            raise LadderError("; ".join(problems))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def bitrates(self) -> np.ndarray:
        return np.array([e.bitrate for e in self.entries], dtype=float)

    @property
    def qualities(self) -> np.ndarray:
        return np.array([e.quality for e in self.entries], dtype=float)

    def configs(self) -> list:
        return [e.config for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "entries": [
                {
                    "width": e.config.resolution.width,
                    "height": e.config.resolution.height,
                    "qp": e.config.qp,
                    "bitrate_kbps": e.bitrate,
                    "vmaf": e.quality,
                }
                for e in self.entries
            ]
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Ladder":
        try:
            obj = json.loads(text)
            entries = [
                LadderEntry(
                    EncodeConfig(Resolution(int(e["width"]), int(e["height"])), int(e["qp"])),
                    float(e["bitrate_kbps"]),
                    float(e["vmaf"]),
                )
                for e in obj["entries"]
            ]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"invalid ladder JSON: {exc}") from None
        return cls(tuple(entries))


def ladder_violations(entries: Sequence[LadderEntry]) -> list:
    """Single pass over a candidate ladder; empty list means it is valid."""
    problems = []
    for a, b in zip(entries, entries[1:]):
        if not b.bitrate > a.bitrate:
            problems.append(f"bitrate not increasing at {b.config}")
        if not b.quality > a.quality:
            problems.append(f"quality not increasing at {b.config}")
    for a, b, c in zip(entries, entries[1:], entries[2:]):
        if concave_turn(a.bitrate, a.quality, b.bitrate, b.quality, c.bitrate, c.quality) <= 0:
            problems.append(f"slope not decreasing at {b.config}")
    return problems


def concave_turn(ar, aq, br, bq, cr, cq) -> float:
    """Positive iff slope(a, b) > slope(b, c) for ar < br < cr."""
    return (bq - aq) * (cr - br) - (cq - bq) * (br - ar)
