"""Walk the sticker deformation pipeline one stage at a time.

A flat round sticker is rotated in the image plane, bent along a parabola
fitted to a dome-shaped height field, tilted to follow the vertical slope,
and finally alpha-blended onto a synthetic face. Each intermediate raster is
written out as a PNG so the stages can be inspected side by side, and the
arc-length bookkeeping behind the bend is printed: the bent span is narrower
than the flat sticker, but carries the same length of printed material.
"""

import argparse
from pathlib import Path

from advsticker import CompositeParams, FaceSurface, composite
from advsticker.assets import make_bundle
from advsticker.geometry import (
    arc_length,
    bend_sticker,
    fit_parabola,
    rotate_and_project,
    rotate_in_plane,
    rotation_angle,
)
from advsticker.io import save_face_png, save_sticker_png


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="demo_out/geometry")
    parser.add_argument("--angle", type=float, default=25.0,
                        help="in-plane sticker rotation, degrees")
    args = parser.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    bundle = make_bundle(seed=3, size=96)
    face, sticker = bundle.face, bundle.sticker
    # a deeper dome than the stock bundle so the bend and tilt are visible
    surface = FaceSurface.dome(96, 96, depth=30.0)
    save_sticker_png(out / "0_flat.png", sticker)

    rotated = rotate_in_plane(sticker, args.angle)
    save_sticker_png(out / "1_rotated.png", rotated)
    print(f"rotated by {args.angle} deg: {sticker.w}x{sticker.h} -> "
          f"{rotated.w}x{rotated.h} canvas")

    # paste on the lower cheek; the curvature window follows the sticker size
    position = (70, 66)
    window = surface.crop_clamped(position[0] - rotated.h // 2,
                                  position[1] - rotated.w // 2,
                                  rotated.h, rotated.w)
    peak = divmod(int(window.z.argmax()), window.z.shape[1])
    bend = fit_parabola(window, (peak[1], peak[0], float(window.z[peak])),
                        delta_s=rotated.w / 2.0, width=float(rotated.w))
    bent = bend_sticker(rotated, bend)
    save_sticker_png(out / "2_bent.png", bent)
    print(f"bend: a={bend.a:.5f}, flat width {rotated.w} px -> bent span "
          f"{bend.w_n:.2f} px carrying {arc_length(bend.a, bend.c, bend.w_n):.2f} px of arc")

    tilt = rotation_angle(window, (peak[1], peak[0], float(window.z[peak])),
                          delta_y=rotated.h / 2.0, height=rotated.h)
    projected = rotate_and_project(bent, tilt)
    save_sticker_png(out / "3_tilted.png", projected)
    print(f"tilt: {tilt:+.2f} deg about the horizontal mid-axis, "
          f"{bent.h} -> {projected.h} rows after projection")

    pasted = composite(face, sticker, surface, CompositeParams(position, args.angle))
    save_face_png(out / "4_composite.png", pasted)
    print(f"composite written; changed pixels: "
          f"{int((abs(pasted - face).sum(axis=2) > 0).sum())}")
    print(f"stages saved under {out}/")


if __name__ == "__main__":
    main()
