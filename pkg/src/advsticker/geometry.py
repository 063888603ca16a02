"""Sticker deformation and compositing onto a curved face.

A flat sticker pasted onto a face is modeled in three stages: an in-plane
rotation, a horizontal bend along a parabola fitted to the surface's x-z
profile through the pasting area's highest point, and a tilt of the bent
sticker about its horizontal mid-axis matching the y-z profile, projected
orthographically back to the image plane. Every resampling step is backward
mapping with bilinear interpolation; sample coordinates clamp at raster
edges, and alpha is zeroed outside the source footprint (the source cell
extent, half a pixel past the border pixel centers).

All rasters are float arrays with channel values in [0, 1]; position
coordinates are (row, col) with the row axis pointing down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DegenerateSurface(ValueError):
    """Height-field slice contains non-finite values."""


class Sticker:
    """RGBA raster; alpha marks the sticker silhouette."""

    def __init__(self, rgba):
        rgba = np.asarray(rgba, dtype=float)
        if rgba.ndim != 3 or rgba.shape[2] != 4:
            raise ValueError("sticker raster must be (h, w, 4)")
        if rgba.shape[0] < 1 or rgba.shape[1] < 1:
            raise ValueError("sticker must be at least 1x1")
        if not np.isfinite(rgba).all():
            raise ValueError("sticker raster must be finite")
        alpha = rgba[..., 3]
        if alpha.min() < 0.0 or alpha.max() > 1.0:
            raise ValueError("alpha channel must lie in [0, 1]")
        self.rgba = rgba

    @property
    def h(self) -> int:
        return self.rgba.shape[0]

    @property
    def w(self) -> int:
        return self.rgba.shape[1]

    @classmethod
    def from_rgb(cls, rgb, alpha=1.0) -> "Sticker":
        rgb = np.asarray(rgb, dtype=float)
        rgba = np.empty(rgb.shape[:2] + (4,))
        rgba[..., :3] = rgb
        rgba[..., 3] = alpha
        return cls(rgba)


@dataclass
class FaceSurface:
    """Per-pixel depth map aligned with the face image. Units: pixels of depth."""

    z: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if self.z.ndim != 2:
            raise ValueError("height field must be 2-D")

    def crop_clamped(self, top: int, left: int, h: int, w: int) -> "FaceSurface":
        """h x w window at (top, left); out-of-image samples replicate the edge."""
        rows = np.clip(np.arange(top, top + h), 0, self.z.shape[0] - 1)
        cols = np.clip(np.arange(left, left + w), 0, self.z.shape[1] - 1)
        return FaceSurface(self.z[np.ix_(rows, cols)])

    @classmethod
    def dome(cls, rows: int, cols: int, depth: float, center=None, radii=None) -> "FaceSurface":
        """Synthetic ellipsoid cap peaking at the grid center; cheek-like test surface."""
        if center is None:
            center = ((rows - 1) / 2.0, (cols - 1) / 2.0)
        if radii is None:
            radii = (0.9 * rows, 0.9 * cols)
        r = (np.arange(rows)[:, None] - center[0]) / radii[0]
        c = (np.arange(cols)[None, :] - center[1]) / radii[1]
        return cls(depth * np.sqrt(np.clip(1.0 - r * r - c * c, 0.0, None)))


@dataclass(frozen=True)
class BendParams:
    """Parabola z = a(x - c)^2 + b carrying the bent span width w_n.

    Coordinates are local to the bent span: x = 0 at its left edge, so the
    arc length of the parabola over [0, w_n] recovers the flat width.
    """

    a: float
    b: float
    c: float
    w_n: float

    def __post_init__(self):
        if self.a > 0.0:
            raise ValueError("curvature must be concave (a <= 0)")
        if self.w_n <= 0.0:
            raise ValueError("bent width must be positive")


@dataclass(frozen=True)
class CompositeParams:
    """Pasting placement: sticker center pixel on the face, in-plane angle."""

    position: tuple[int, int]
    angle: float = 0.0


def bilinear(image, i, j):
    """Sample `image` at real coordinates (i = row, j = col), 4-neighbor bilinear.

    Coordinates outside the raster clamp to the edge. Accepts scalars or
    broadcastable arrays; channel images return channel vectors.
    """
    image = np.asarray(image, dtype=float)
    rows, cols = image.shape[:2]
    i = np.clip(np.asarray(i, dtype=float), 0.0, float(rows - 1))
    j = np.clip(np.asarray(j, dtype=float), 0.0, float(cols - 1))
    i0 = np.floor(i).astype(np.intp)
    j0 = np.floor(j).astype(np.intp)
    i1 = np.minimum(i0 + 1, rows - 1)
    j1 = np.minimum(j0 + 1, cols - 1)
    di = i - i0
    dj = j - j0
    if image.ndim == 3:
        di = di[..., None]
        dj = dj[..., None]
    top = image[i0, j0] * (1.0 - dj) + image[i0, j1] * dj
    bot = image[i1, j0] * (1.0 - dj) + image[i1, j1] * dj
    out = top * (1.0 - di) + bot * di
    if out.ndim == 0:
        return float(out)
    return out


def _slope_integrand(a, c, x):
    return np.sqrt(1.0 + 4.0 * a * a * (x - c) ** 2)


def arc_length(a: float, c: float, x_end: float) -> float:
    """Arc length of the parabola over [0, x_end] by composite Simpson.

    Four subintervals per pixel keep the absolute error well under 1e-3 px
    for |a| <= 0.02. Exact for a = 0.
    """
    if x_end <= 0.0:
        return 0.0
    n = max(2, 2 * math.ceil(2.0 * x_end))
    x = np.linspace(0.0, x_end, n + 1)
    y = _slope_integrand(a, c, x)
    s = y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()
    return float((x_end / n) * s / 3.0)


def solve_bent_width(a: float, c: float, w: float) -> float:
    """Width w_n of the bent span whose arc length equals the flat width w.

    Bisection on [0, w]; the integrand is >= 1 so arc length grows at least
    linearly and the root is bracketed. Stops within 0.25 px of the target
    arc length, half the 0.5 px contract.
    """
    if a == 0.0:
        return float(w)
    lo, hi = 0.0, float(w)
    mid = hi
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        err = arc_length(a, c, mid) - w
        if abs(err) <= 0.25 or hi - lo < 1e-9:
            return mid
        if err > 0.0:
            hi = mid
        else:
            lo = mid
    return mid


def fit_parabola(surface: FaceSurface, center, delta_s: float, width: float) -> BendParams:
    """Fit the bending parabola to the x-z slice through `center` = (x0, y0, z0).

    Curvature a = -dh/ds^2 where dh is the depth change a distance delta_s
    from the apex along the slice; c = x0; w_n solved so the bent span's arc
    length recovers `width`; b anchors the right edge of the span at height 0.
    """
    x0, y0, z0 = center
    if delta_s <= 0.0:
        raise ValueError("delta_s must be positive")
    row = min(max(int(round(y0)), 0), surface.z.shape[0] - 1)
    profile = surface.z[row, :]
    if not np.isfinite(profile).all():
        raise DegenerateSurface(f"x-z slice at row {row} is not finite")
    cols = profile.shape[0]
    xq = min(max(float(x0) + float(delta_s), 0.0), float(cols - 1))
    z_off = float(np.interp(xq, np.arange(cols), profile))
    drop = abs(float(z0) - z_off)
    if drop == 0.0:
        return BendParams(a=0.0, b=0.0, c=float(x0), w_n=float(width))
    a = -drop / (float(delta_s) ** 2)
    w_n = solve_bent_width(a, float(x0), float(width))
    return BendParams(a=a, b=-a * (w_n - float(x0)) ** 2, c=float(x0), w_n=w_n)


def bend_sticker(sticker: Sticker, bp: BendParams) -> Sticker:
    """Bend horizontally: output column j reads the source at the arc length
    accumulated from the span's left edge to j. All four channels sample
    identically, so alpha bends with the pixels."""
    h = sticker.h
    n_cols = max(1, int(round(bp.w_n)))
    if bp.a == 0.0:
        src_cols = np.arange(n_cols, dtype=float)
    else:
        # per-column Simpson segments (4 subintervals each), accumulated
        seg_starts = np.arange(n_cols - 1, dtype=float)[:, None]
        x = seg_starts + np.array([0.0, 0.25, 0.5, 0.75, 1.0])[None, :]
        y = _slope_integrand(bp.a, bp.c, x)
        segs = (y @ np.array([1.0, 4.0, 2.0, 4.0, 1.0])) * 0.25 / 3.0
        src_cols = np.concatenate([[0.0], np.cumsum(segs)])
    ii = np.broadcast_to(np.arange(h, dtype=float)[:, None], (h, n_cols))
    jj = np.broadcast_to(src_cols[None, :], (h, n_cols))
    out = bilinear(sticker.rgba, ii, jj)
    out[..., 3] = np.clip(out[..., 3], 0.0, 1.0)
    return Sticker(out)


def rotation_angle(surface: FaceSurface, point, delta_y: float, height: int) -> float:
    """Tilt angle from the y-z slice through `point` = (x0, y0, z0), degrees.

    Magnitude arctan(dz/dy) with dz the depth change delta_y below the point;
    the sign follows which half of the sticker holds the point: positive for
    the top half (height - 2*y0 >= 0, sign of zero counts positive).
    """
    x0, y0, z0 = point
    if delta_y <= 0.0:
        raise ValueError("delta_y must be positive")
    col = min(max(int(round(x0)), 0), surface.z.shape[1] - 1)
    profile = surface.z[:, col]
    if not np.isfinite(profile).all():
        raise DegenerateSurface(f"y-z slice at column {col} is not finite")
    rows = profile.shape[0]
    yq = min(max(float(y0) + float(delta_y), 0.0), float(rows - 1))
    z_off = float(np.interp(yq, np.arange(rows), profile))
    dz = abs(z_off - float(z0))
    sign = 1.0 if (float(height) - 2.0 * float(y0)) >= 0.0 else -1.0
    return sign * math.degrees(math.atan(dz / float(delta_y)))


def rotate_and_project(bent: Sticker, theta3d: float) -> Sticker:
    """Rotate the sticker plane about its horizontal mid-axis and project back.

    Output height shrinks to round(h * cos(theta)); columns pass through.
    Backward mapping + bilinear; alpha is zeroed for output rows whose source
    row falls outside the sticker's cell extent.
    """
    if abs(theta3d) >= 90.0:
        raise ValueError("projection angle must satisfy |theta| < 90 degrees")
    h, w = bent.h, bent.w
    ct = math.cos(math.radians(theta3d))
    h2 = max(1, int(round(h * ct)))
    src_i = (np.arange(h2, dtype=float) - (h2 - 1) / 2.0) / ct + (h - 1) / 2.0
    ii = np.broadcast_to(src_i[:, None], (h2, w))
    jj = np.broadcast_to(np.arange(w, dtype=float)[None, :], (h2, w))
    out = bilinear(bent.rgba, ii, jj)
    outside = (src_i < -0.5) | (src_i > h - 0.5)
    out[outside, :, :] = 0.0
    out[..., 3] = np.clip(out[..., 3], 0.0, 1.0)
    return Sticker(out)


def _canvas_len(v: float) -> int:
    # ceil with a guard against one-ulp overshoot at exact integers
    return max(1, int(math.ceil(v - 1e-9)))


def rotate_in_plane(sticker: Sticker, angle: float) -> Sticker:
    """Rotate in the image plane by `angle` degrees on an expanded canvas.

    Positive angles turn the sticker clockwise on screen (row axis points
    down). Backward mapping + bilinear; alpha outside the footprint is 0.
    """
    h, w = sticker.h, sticker.w
    rad = math.radians(angle)
    ct, st = math.cos(rad), math.sin(rad)
    w2 = _canvas_len(w * abs(ct) + h * abs(st))
    h2 = _canvas_len(w * abs(st) + h * abs(ct))
    di = np.arange(h2, dtype=float)[:, None] - (h2 - 1) / 2.0
    dj = np.arange(w2, dtype=float)[None, :] - (w2 - 1) / 2.0
    src_i = -st * dj + ct * di + (h - 1) / 2.0
    src_j = ct * dj + st * di + (w - 1) / 2.0
    out = bilinear(sticker.rgba, src_i, src_j)
    outside = (src_i < -0.5) | (src_i > h - 0.5) | (src_j < -0.5) | (src_j > w - 0.5)
    out[outside, :] = 0.0
    out[..., 3] = np.clip(out[..., 3], 0.0, 1.0)
    return Sticker(out)


def composite(face, sticker: Sticker, surface: FaceSurface, cp: CompositeParams):
    """Paste the sticker onto the face at cp.position (sticker center anchor).

    Pipeline: in-plane rotate, fit + bend along the x-z slice, tilt + project
    along the y-z slice, then alpha-blend, clipping at image edges. The slices
    run through the highest surface point inside the pasting window. Output
    dimensions equal the face dimensions; never writes outside the raster.
    """
    face = np.asarray(face, dtype=float)
    if face.ndim != 3 or face.shape[2] != 3:
        raise ValueError("face raster must be (rows, cols, 3)")
    if surface.z.shape != face.shape[:2]:
        raise ValueError("surface dimensions must equal face dimensions")
    pr, pc = int(cp.position[0]), int(cp.position[1])

    s2 = rotate_in_plane(sticker, float(cp.angle))
    window = surface.crop_clamped(pr - s2.h // 2, pc - s2.w // 2, s2.h, s2.w)
    y0, x0 = np.unravel_index(int(np.argmax(window.z)), window.z.shape)
    z0 = float(window.z[y0, x0])

    bp = fit_parabola(window, (x0, y0, z0), delta_s=s2.w / 2.0, width=float(s2.w))
    s3 = bend_sticker(s2, bp)
    theta3d = rotation_angle(window, (x0, y0, z0), delta_y=s2.h / 2.0, height=s2.h)
    s4 = rotate_and_project(s3, theta3d)

    out = face.copy()
    top, left = pr - s4.h // 2, pc - s4.w // 2
    r0, r1 = max(top, 0), min(top + s4.h, face.shape[0])
    c0, c1 = max(left, 0), min(left + s4.w, face.shape[1])
    if r0 < r1 and c0 < c1:
        sub = s4.rgba[r0 - top:r1 - top, c0 - left:c1 - left]
        alpha = sub[..., 3:4]
        blended = alpha * sub[..., :3] + (1.0 - alpha) * out[r0:r1, c0:c1]
        out[r0:r1, c0:c1] = np.clip(blended, 0.0, 1.0)
    return out
