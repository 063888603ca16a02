"""File formats and wire encodings.

Faces are RGB PNGs and stickers RGBA PNGs, both held in memory as floats in
[0, 1].  Masks are 8-bit single-channel PNGs (nonzero = valid) or plain-text
grids of 0/1 characters.  Height-fields are 16-bit grayscale PNGs with a JSON
sidecar giving the depth scale (surface units per gray level), or CSVs of
reals.
"""

import base64
import io
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import FaceSurface, Sticker
from .paramspace import MaskMatrix

SURFACE_SIDECAR_SUFFIX = ".json"


def to_uint8(image):
    """Quantize a float image in [0, 1] to 8-bit, rounding to nearest."""
    arr = np.asarray(image, dtype=float)
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def image_to_png_bytes(image):
    buf = io.BytesIO()
    Image.fromarray(to_uint8(image)).save(buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_image(data):
    """Decode PNG bytes to a float RGB array in [0, 1]."""
    with Image.open(io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("RGB"), dtype=float)
    return arr / 255.0


def encode_image_b64(image):
    return base64.b64encode(image_to_png_bytes(image)).decode("ascii")


def decode_image_b64(text):
    return png_bytes_to_image(base64.b64decode(text))


def load_face_png(path):
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=float)
    return arr / 255.0


def save_face_png(path, image):
    arr = np.asarray(image, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"face image must be (H, W, 3), got {arr.shape}")
    Image.fromarray(to_uint8(arr)).save(path, format="PNG")


def load_sticker_png(path):
    """Load a sticker; RGB files get a fully opaque alpha channel."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGBA"), dtype=float) / 255.0
    return Sticker(arr)


def save_sticker_png(path, sticker):
    Image.fromarray(to_uint8(sticker.rgba), mode="RGBA").save(path, format="PNG")


def load_mask_png(path):
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return MaskMatrix((arr != 0).astype(int))


def save_mask_png(path, mask):
    arr = (np.asarray(mask.cells) != 0).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_mask_text(path):
    return MaskMatrix.from_text(Path(path).read_text())


def save_mask_text(path, mask):
    Path(path).write_text(mask.to_text())


def save_surface_png(path, surface, depth_scale=None):
    """Write a height-field as 16-bit grayscale plus a JSON sidecar.

    Gray levels are z / depth_scale rounded to nearest; the default scale
    spreads the full z range over the 16-bit gamut.
    """
    z = np.asarray(surface.z, dtype=float)
    if np.any(z < 0):
        raise ValueError("height-field values must be nonnegative")
    if depth_scale is None:
        peak = float(z.max())
        depth_scale = peak / 65535.0 if peak > 0 else 1.0
    gray = np.clip(np.rint(z / depth_scale), 0, 65535).astype(np.uint16)
    Image.fromarray(gray).save(path, format="PNG")
    sidecar = {"depth_scale": depth_scale}
    Path(str(path) + SURFACE_SIDECAR_SUFFIX).write_text(json.dumps(sidecar))
    return depth_scale


def load_surface_png(path):
    sidecar = json.loads(Path(str(path) + SURFACE_SIDECAR_SUFFIX).read_text())
    depth_scale = float(sidecar["depth_scale"])
    with Image.open(path) as im:
        gray = np.asarray(im, dtype=float)
    return FaceSurface(gray * depth_scale)


def save_surface_csv(path, surface):
    np.savetxt(path, np.asarray(surface.z, dtype=float), delimiter=",")


def load_surface_csv(path):
    z = np.loadtxt(path, delimiter=",", ndmin=2)
    return FaceSurface(z)


def load_surface(path):
    """Dispatch on extension: .csv for reals, anything else 16-bit PNG."""
    if str(path).lower().endswith(".csv"):
        return load_surface_csv(path)
    return load_surface_png(path)
