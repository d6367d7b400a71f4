import io

import numpy as np
import pytest
from PIL import Image

from photolink.errors import UnreadableImageError, UnsupportedFormatError
from photolink.raster import (
    LUMA_WEIGHTS,
    decode_image,
    from_array,
    load_image,
    rgba_to_png_bytes,
)


def png_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def test_pgm_full_scale(tmp_path):
    path = tmp_path / "white.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([255] * 4))
    img = load_image(path)
    assert (img.width, img.height, img.channels) == (2, 2, 1)
    assert np.all(img.pixels == 1.0)


def test_png_single_black_pixel(tmp_path):
    path = tmp_path / "dot.png"
    path.write_bytes(png_bytes(np.zeros((1, 1), dtype=np.uint8)))
    img = load_image(path)
    assert (img.width, img.height, img.channels) == (1, 1, 1)
    assert img.pixels[0, 0, 0] == 0.0


def test_rgb_png_luma_matches_recomputed():
    rng = np.random.default_rng(99)
    rgb = rng.integers(0, 256, size=(512, 512, 3), dtype=np.uint8)
    img = decode_image(png_bytes(rgb))
    assert img.channels == 3
    r, g, b = LUMA_WEIGHTS
    expected = (r * rgb[:, :, 0] + g * rgb[:, :, 1] + b * rgb[:, :, 2]) / 255.0
    assert np.abs(img.gray - expected).max() < 1.0 / 255.0


def test_pgm_maxval_normalization():
    img = decode_image(b"P5\n1 1\n100\n" + bytes([50]))
    assert img.pixels[0, 0, 0] == pytest.approx(0.5)


def test_ppm_color():
    img = decode_image(b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 255, 0]))
    assert img.channels == 3
    assert np.allclose(img.pixels[0, 0], [1.0, 0.0, 0.0])
    assert np.allclose(img.pixels[0, 1], [0.0, 1.0, 0.0])


def test_pgm_comment_in_header():
    img = decode_image(b"P5\n# a comment\n1 1\n255\n" + bytes([128]))
    assert img.pixels[0, 0, 0] == pytest.approx(128 / 255)


def test_pgm_sixteen_bit():
    img = decode_image(b"P5\n1 1\n65535\n" + (30000).to_bytes(2, "big"))
    assert img.pixels[0, 0, 0] == pytest.approx(30000 / 65535)


def test_unsupported_format():
    with pytest.raises(UnsupportedFormatError):
        decode_image(b"GIF89a....")


def test_truncated_pgm():
    with pytest.raises(UnreadableImageError):
        decode_image(b"P5\n4 4\n255\n" + bytes([1, 2]))


def test_missing_file(tmp_path):
    with pytest.raises(UnreadableImageError):
        load_image(tmp_path / "absent.png")


def test_zero_dimension_pgm():
    with pytest.raises(UnreadableImageError):
        decode_image(b"P5\n0 4\n255\n")


def test_gray_plane_of_gray_image_is_channel():
    img = from_array(np.full((4, 4), 0.25, dtype=np.float32))
    assert np.all(img.gray == 0.25)


def test_pixels_are_read_only():
    img = from_array(np.zeros((2, 2), dtype=np.float32))
    with pytest.raises(ValueError):
        img.pixels[0, 0, 0] = 1.0


def test_rgba_png_round_trip():
    rng = np.random.default_rng(1)
    rgba = rng.integers(0, 256, size=(8, 6, 4), dtype=np.uint8)
    data = rgba_to_png_bytes(rgba)
    back = np.asarray(Image.open(io.BytesIO(data)))
    assert np.array_equal(back, rgba)
