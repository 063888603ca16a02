"""Constrained search space for sticker placement.

The space has two parameters: a discrete pasting position, addressed as an
index into the row-major enumeration of valid mask pixels, and a continuous
in-plane rotation angle in degrees. Position moves used by the regional
inbreeding operator happen in pixel space (so "east" means east even across
mask holes) and are mapped back through the valid-position index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EmptyMask(ValueError):
    """Mask contains no valid pixel."""


class NoValidNeighbor(LookupError):
    """Every retry of a neighborhood move landed on an invalid or visited pixel."""


# compass direction deltas (row, col), clockwise starting at N; row axis points down
DIRECTIONS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
DIRECTION_NAMES = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")

# on an invalid/visited target the step doubles and the move retries, this many times
MAX_STEP_DOUBLINGS = 6


class MaskMatrix:
    """Binary map of permissible pasting pixels (1 = valid)."""

    def __init__(self, cells):
        cells = np.asarray(cells)
        if cells.ndim != 2:
            raise ValueError("mask must be a 2-D array")
        if not np.isin(cells, (0, 1)).all():
            raise ValueError("mask cells must be exactly 0 or 1")
        self.cells = cells.astype(np.uint8)
        self.rows, self.cols = self.cells.shape

    @classmethod
    def from_text(cls, text: str) -> "MaskMatrix":
        """Parse rows of 0/1 characters, one mask row per line."""
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty mask text")
        if any(set(ln) - {"0", "1"} for ln in lines):
            raise ValueError("mask text may contain only 0 and 1")
        if len({len(ln) for ln in lines}) != 1:
            raise ValueError("mask text rows must have equal length")
        return cls([[int(ch) for ch in ln] for ln in lines])

    def to_text(self) -> str:
        return "".join("".join(str(c) for c in row) + "\n" for row in self.cells)


class ValidIndex:
    """Row-major enumeration of valid mask pixels with its exact inverse."""

    def __init__(self, positions):
        self._positions = [(int(r), int(c)) for r, c in positions]
        self._reverse = {rc: i for i, rc in enumerate(self._positions)}

    def __len__(self):
        return len(self._positions)

    def __getitem__(self, i) -> tuple[int, int]:
        return self._positions[i]

    def __iter__(self):
        return iter(self._positions)

    def index_of(self, rc) -> int | None:
        """Index of pixel (row, col), or None when it is off-mask or off-image."""
        return self._reverse.get((int(rc[0]), int(rc[1])))


def build_valid_index(mask: MaskMatrix) -> ValidIndex:
    rows, cols = np.nonzero(mask.cells)
    if rows.size == 0:
        raise EmptyMask("mask has no valid pixel")
    return ValidIndex(zip(rows.tolist(), cols.tolist()))


@dataclass(frozen=True)
class ParamBounds:
    """Box constraints: position index range, angle range in degrees."""

    position: tuple[int, int]
    angle: tuple[float, float] = (-90.0, 90.0)

    def __post_init__(self):
        if self.position[0] > self.position[1] or self.angle[0] > self.angle[1]:
            raise ValueError("lower bound exceeds upper bound")

    @classmethod
    def for_index(cls, index: ValidIndex, angle=(-90.0, 90.0)) -> "ParamBounds":
        return cls(position=(0, len(index) - 1), angle=(float(angle[0]), float(angle[1])))


@dataclass(frozen=True)
class ParamVector:
    """One point of the search space. position_index may hold a real value
    transiently (crossover arithmetic); clip() restores the integer invariant."""

    position_index: int
    angle: float


def clip(v: ParamVector, b: ParamBounds) -> ParamVector:
    """Round the position to the nearest integer (half-to-even), then clamp
    both parameters into their bounds. Idempotent."""
    pos = int(np.rint(v.position_index))
    pos = min(max(pos, b.position[0]), b.position[1])
    ang = min(max(float(v.angle), b.angle[0]), b.angle[1])
    return ParamVector(pos, ang)


def neighbor(v: ParamVector, direction: int, step: int, index: ValidIndex,
             visited: set) -> ParamVector:
    """Move the position `step` pixels along one of the 8 compass directions.

    Invalid or already-visited targets double the step and retry, up to
    MAX_STEP_DOUBLINGS times. The angle never changes here.
    """
    if not 1 <= direction <= len(DIRECTIONS):
        raise ValueError(f"direction must be 1..{len(DIRECTIONS)}")
    if step < 1:
        raise ValueError("step must be >= 1")
    dr, dc = DIRECTIONS[direction - 1]
    r, c = index[v.position_index]
    l = step
    for _ in range(MAX_STEP_DOUBLINGS + 1):
        target = (r + dr * l, c + dc * l)
        i = index.index_of(target)
        if i is not None and target not in visited:
            return ParamVector(i, v.angle)
        l *= 2
    raise NoValidNeighbor(
        f"no valid {DIRECTION_NAMES[direction - 1]} neighbor of {(r, c)} at any step")


def sample_uniform(rng, b: ParamBounds) -> ParamVector:
    """Draw one parameter vector uniformly inside the box."""
    pos = int(rng.integers(b.position[0], b.position[1] + 1))
    ang = float(rng.uniform(b.angle[0], b.angle[1]))
    return ParamVector(pos, ang)
