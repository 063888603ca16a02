"""Deterministic synthetic assets: face image, sticker, height-field, mask.

Everything derives from a seed so demos, CLI runs, and end-to-end tests can
reproduce their inputs without shipping binary fixtures.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import FaceSurface, Sticker
from .paramspace import MaskMatrix, ValidIndex, build_valid_index


def make_face(seed=0, size=64):
    """Face-like RGB test image: skin gradient, eye and mouth blotches."""
    rng = np.random.default_rng(seed)
    rows = np.linspace(0.0, 1.0, size)[:, None]
    cols = np.linspace(0.0, 1.0, size)[None, :]
    skin = np.array([0.80, 0.62, 0.50]) + rng.uniform(-0.08, 0.08, 3)
    vignette = 0.25 * ((rows - 0.5) ** 2 + (cols - 0.5) ** 2)
    face = skin[None, None, :] - vignette[..., None]

    def darken(cy, cx, ry, rx, amount):
        d = ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2
        face[d < 1.0] -= amount

    darken(0.42, 0.35, 0.05, 0.10, 0.30)  # eyes
    darken(0.42, 0.65, 0.05, 0.10, 0.30)
    darken(0.72, 0.50, 0.04, 0.16, 0.25)  # mouth
    face += rng.normal(0.0, 0.01, face.shape)
    return np.clip(face, 0.0, 1.0)


def make_sticker(seed=0, size=9):
    """Round sticker with a seeded two-color swirl; alpha marks the disc."""
    rng = np.random.default_rng(seed)
    yy = np.arange(size)[:, None] - (size - 1) / 2.0
    xx = np.arange(size)[None, :] - (size - 1) / 2.0
    radius = np.sqrt(yy ** 2 + xx ** 2) / ((size - 1) / 2.0)
    color_a = rng.uniform(0.1, 0.9, 3)
    color_b = rng.uniform(0.1, 0.9, 3)
    swirl = 0.5 * (1.0 + np.sin(3.0 * np.arctan2(yy, xx) + 6.0 * radius))
    rgba = np.empty((size, size, 4))
    rgba[..., :3] = color_a * swirl[..., None] + color_b * (1.0 - swirl[..., None])
    rgba[..., 3] = (radius <= 1.0).astype(float)
    return Sticker(np.clip(rgba, 0.0, 1.0))


def make_mask(rows=64, cols=64):
    """Forehead band plus two cheek patches; facial features stay uncovered."""
    cells = np.zeros((rows, cols), dtype=int)
    cells[int(0.12 * rows):int(0.30 * rows), int(0.20 * cols):int(0.80 * cols)] = 1
    cells[int(0.50 * rows):int(0.68 * rows), int(0.12 * cols):int(0.30 * cols)] = 1
    cells[int(0.50 * rows):int(0.68 * rows), int(0.70 * cols):int(0.88 * cols)] = 1
    return MaskMatrix(cells)


def make_surface(rows=64, cols=64, depth=8.0):
    return FaceSurface.dome(rows, cols, depth)


@dataclass(eq=False)
class AssetBundle:
    face: np.ndarray
    sticker: Sticker
    surface: FaceSurface
    mask: MaskMatrix
    index: ValidIndex


def make_bundle(seed=0, size=64):
    """Matched asset set for demos, served oracles, and end-to-end runs."""
    mask = make_mask(size, size)
    return AssetBundle(face=make_face(seed, size), sticker=make_sticker(seed),
                       surface=make_surface(size, size), mask=mask,
                       index=build_valid_index(mask))
