import numpy as np
import pytest

from lpstain.errors import RangeError, UnreadableImage
from lpstain.imageio import (
    Image,
    atomic_write_bytes,
    encode_u8,
    load_image,
    save_image,
    to_symmetric,
    to_unit,
)


def test_image_validation():
    with pytest.raises(RangeError):
        Image(np.zeros((4, 4), dtype=np.float32))
    with pytest.raises(RangeError):
        Image(np.zeros((4, 4, 4), dtype=np.float32))
    with pytest.raises(RangeError):
        Image(np.zeros((4, 4, 3), dtype=np.float32), "percent")
    bad = np.zeros((4, 4, 3), dtype=np.float32)
    bad[0, 0, 0] = np.nan
    with pytest.raises(RangeError):
        Image(bad)


def test_check_range():
    Image(np.full((2, 2, 3), 0.5, np.float32)).check_range()
    Image(np.full((2, 2, 3), -0.5, np.float32), "symmetric").check_range()
    with pytest.raises(RangeError):
        Image(np.full((2, 2, 3), -0.5, np.float32)).check_range()
    with pytest.raises(RangeError):
        Image(np.full((2, 2, 3), 1.5, np.float32), "symmetric").check_range()


def test_range_conversions_roundtrip():
    data = np.linspace(0, 1, 48, dtype=np.float32).reshape(4, 4, 3)
    img = Image(data)
    sym = to_symmetric(img)
    assert sym.range_tag == "symmetric"
    np.testing.assert_allclose(sym.data, data * 2 - 1, atol=1e-7)
    back = to_unit(sym)
    np.testing.assert_allclose(back.data, data, atol=1e-7)
    # conversions are no-ops on matching tags
    assert to_unit(img) is img
    assert to_symmetric(sym) is sym


def test_to_unit_clamps():
    sym = Image(np.full((2, 2, 3), -1.0, np.float32) * 1.0, "symmetric")
    out = to_unit(Image(sym.data * np.float32(1.0), "symmetric"))
    assert out.data.min() >= 0.0


def test_encode_u8_rounding():
    # 0.5/255 rounds half-to-even
    vals = np.array([0.0, 1.0, 1.0 / 255.0, 0.5 / 255.0, 1.5 / 255.0, 2.0, -1.0])
    u8 = encode_u8(vals)
    np.testing.assert_array_equal(u8, [0, 255, 1, 0, 2, 255, 0])


def test_png_roundtrip_quantization(tmp_path):
    data = np.random.default_rng(0).random((16, 16, 3)).astype(np.float32)
    p = tmp_path / "t.png"
    save_image(Image(data), p)
    back = load_image(p)
    assert back.range_tag == "unit"
    assert np.abs(back.data - data).max() <= 0.5 / 255.0 + 1e-7


def test_load_errors(tmp_path):
    with pytest.raises(UnreadableImage):
        load_image(tmp_path / "missing.png")
    junk = tmp_path / "junk.png"
    junk.write_bytes(b"not a png at all")
    with pytest.raises(UnreadableImage):
        load_image(junk)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    p = tmp_path / "out.bin"
    atomic_write_bytes(p, b"payload")
    assert p.read_bytes() == b"payload"
    assert [f.name for f in tmp_path.iterdir()] == ["out.bin"]
