"""Round-trip tests for the on-disk and wire formats."""

import json

import numpy as np
import pytest
from PIL import Image

from advsticker.geometry import FaceSurface, Sticker
from advsticker.io import (
    decode_image_b64,
    encode_image_b64,
    image_to_png_bytes,
    load_face_png,
    load_mask_png,
    load_mask_text,
    load_sticker_png,
    load_surface,
    load_surface_csv,
    load_surface_png,
    png_bytes_to_image,
    save_face_png,
    save_mask_png,
    save_mask_text,
    save_sticker_png,
    save_surface_csv,
    save_surface_png,
    to_uint8,
)
from advsticker.paramspace import MaskMatrix


def test_to_uint8_clips_and_rounds():
    arr = np.array([[-0.5, 0.0, 1.0, 2.0]])
    assert to_uint8(arr).tolist() == [[0, 0, 255, 255]]


def test_png_bytes_round_trip_quantizes_to_8bit():
    rng = np.random.default_rng(0)
    img = rng.random((12, 9, 3))
    back = png_bytes_to_image(image_to_png_bytes(img))
    assert back.shape == (12, 9, 3)
    assert np.max(np.abs(back - img)) <= 0.5 / 255 + 1e-12
    # a second trip is exact: the image is already on the 8-bit lattice
    again = png_bytes_to_image(image_to_png_bytes(back))
    assert np.array_equal(again, back)


def test_b64_round_trip():
    img = np.random.default_rng(1).random((5, 7, 3))
    text = encode_image_b64(img)
    assert isinstance(text, str)
    back = decode_image_b64(text)
    assert np.max(np.abs(back - img)) <= 0.5 / 255 + 1e-12


def test_face_png_round_trip(tmp_path):
    img = np.random.default_rng(2).random((20, 16, 3))
    path = tmp_path / "face.png"
    save_face_png(path, img)
    back = load_face_png(path)
    assert np.max(np.abs(back - img)) <= 0.5 / 255 + 1e-12


def test_face_png_rejects_wrong_shape(tmp_path):
    with pytest.raises(ValueError):
        save_face_png(tmp_path / "x.png", np.zeros((4, 4)))


def test_sticker_round_trip_preserves_alpha(tmp_path):
    rng = np.random.default_rng(3)
    pix = rng.random((10, 8, 4))
    pix = to_uint8(pix) / 255.0  # start on the 8-bit lattice for exactness
    path = tmp_path / "sticker.png"
    save_sticker_png(path, Sticker(pix))
    back = load_sticker_png(path)
    assert np.array_equal(back.rgba, pix)


def test_sticker_rgb_file_becomes_opaque(tmp_path):
    path = tmp_path / "rgb.png"
    Image.fromarray(np.full((6, 5, 3), 100, dtype=np.uint8)).save(path)
    st = load_sticker_png(path)
    assert st.rgba.shape == (6, 5, 4)
    assert np.all(st.rgba[:, :, 3] == 1.0)


def test_mask_png_nonzero_is_valid(tmp_path):
    arr = np.array([[0, 1, 255], [7, 0, 128]], dtype=np.uint8)
    path = tmp_path / "mask.png"
    Image.fromarray(arr, mode="L").save(path)
    mask = load_mask_png(path)
    assert mask.cells.tolist() == [[0, 1, 1], [1, 0, 1]]


def test_mask_png_round_trip(tmp_path):
    mask = MaskMatrix(np.array([[1, 0], [0, 1], [1, 1]]))
    path = tmp_path / "m.png"
    save_mask_png(path, mask)
    assert np.array_equal(load_mask_png(path).cells, mask.cells)


def test_mask_text_round_trip(tmp_path):
    mask = MaskMatrix(np.array([[1, 0, 1], [0, 1, 0]]))
    path = tmp_path / "m.txt"
    save_mask_text(path, mask)
    assert np.array_equal(load_mask_text(path).cells, mask.cells)


def test_surface_png_round_trip_with_sidecar(tmp_path):
    rng = np.random.default_rng(4)
    z = rng.random((15, 11)) * 9.0
    path = tmp_path / "surface.png"
    scale = save_surface_png(path, FaceSurface(z))
    sidecar = json.loads((tmp_path / "surface.png.json").read_text())
    assert sidecar["depth_scale"] == scale
    back = load_surface_png(path)
    assert back.z.shape == z.shape
    assert np.max(np.abs(back.z - z)) <= scale / 2 + 1e-12


def test_surface_png_explicit_scale(tmp_path):
    z = np.array([[0.0, 1.0], [2.0, 3.0]])
    path = tmp_path / "s.png"
    save_surface_png(path, FaceSurface(z), depth_scale=0.5)
    back = load_surface_png(path)
    assert np.array_equal(back.z, z)  # 0.5 scale represents these exactly


def test_surface_csv_round_trip(tmp_path):
    z = np.random.default_rng(5).random((7, 7)) * 3.0
    path = tmp_path / "s.csv"
    save_surface_csv(path, FaceSurface(z))
    back = load_surface_csv(path)
    assert np.allclose(back.z, z, atol=1e-12)


def test_load_surface_dispatches_on_extension(tmp_path):
    z = np.ones((3, 4)) * 2.0
    csv_path = tmp_path / "a.csv"
    png_path = tmp_path / "a.png"
    save_surface_csv(csv_path, FaceSurface(z))
    save_surface_png(png_path, FaceSurface(z), depth_scale=0.25)
    assert np.allclose(load_surface(csv_path).z, z)
    assert np.allclose(load_surface(png_path).z, z)
