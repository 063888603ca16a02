"""Synthetic enrolment portraits for demos and tests.

Each toy identity owns a colour (hues spaced around the wheel) and an
oriented grating; per-variant phase and pixel noise give repeat enrolment
something real to average.  The patterns are deliberately far apart in
image space so even a randomly initialised backbone separates them — these
are stand-ins for face crops, not faces.
"""

import colorsys
import io
import math

import numpy as np
from PIL import Image


def identity_image(identity: int, variant: int = 0, size: int = 64) -> bytes:
    """PNG bytes for one enrolment shot of a toy identity."""
    rng = np.random.default_rng((identity, variant, 20260819))
    yy, xx = np.mgrid[0:size, 0:size].astype(float) / size
    # hues 0.1 apart keep any ten consecutive identities well separated;
    # the grating phase is anchored per identity (small per-variant jitter
    # only) so it survives averaging over enrolment variants.
    hue = (identity * 0.1) % 1.0
    base = np.array(colorsys.hsv_to_rgb(hue, 0.65, 0.80))
    freq = 2.0 + (identity % 5)
    theta = math.pi * identity / 7.0
    phase = 1.3 * identity + rng.uniform(-0.25, 0.25)
    wave = np.sin(2.0 * math.pi * freq
                  * (xx * math.cos(theta) + yy * math.sin(theta)) + phase)
    img = base[None, None, :] * (0.72 + 0.28 * wave[..., None])
    img = img + rng.normal(0.0, 0.02, img.shape)
    arr = (np.clip(img, 0.0, 1.0) * 255.0).round().astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def toy_gallery(n_identities: int = 10, images_per: int = 3,
                size: int = 64) -> dict:
    """label -> list of PNG blobs, ready to POST to the enrolment endpoint."""
    return {f"id_{k:02d}": [identity_image(k, j, size) for j in range(images_per)]
            for k in range(n_identities)}
