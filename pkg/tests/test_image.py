"""Frame container and PPM round trips."""

import numpy as np
import pytest

from aimcast.image import Frame, ppm_decode, ppm_encode, read_ppm, write_ppm


def test_filled_frame():
    f = Frame.filled(4, 3, (10, 20, 30))
    assert (f.width, f.height) == (4, 3)
    assert f.array.shape == (3, 4, 3)
    assert (f.array == (10, 20, 30)).all()


def test_from_bytes_round_trip():
    data = bytes(range(2 * 2 * 3))
    f = Frame.from_bytes(2, 2, data)
    assert f.pixels == data
    with pytest.raises(ValueError):
        Frame.from_bytes(2, 2, data[:-1])


def test_frame_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Frame(np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        Frame(np.zeros((4, 4, 3), dtype=np.float32))


def test_ppm_round_trip():
    rng = np.random.default_rng(3)
    f = Frame(rng.integers(0, 256, (5, 7, 3), dtype=np.uint8).copy())
    back = ppm_decode(ppm_encode(f))
    assert np.array_equal(back.array, f.array)


def test_ppm_header_with_comments():
    f = Frame.filled(2, 1, (1, 2, 3))
    raw = b"P6\n# a comment\n2 1\n# another\n255\n" + f.pixels
    assert np.array_equal(ppm_decode(raw).array, f.array)


def test_ppm_rejects_wrong_magic_and_depth():
    f = Frame.filled(2, 2, (0, 0, 0))
    data = ppm_encode(f)
    with pytest.raises(ValueError):
        ppm_decode(b"P5" + data[2:])
    with pytest.raises(ValueError):
        ppm_decode(data.replace(b"255", b"65535", 1))
    with pytest.raises(ValueError):
        ppm_decode(data[:-1])  # truncated pixel data


def test_ppm_file_io(tmp_path):
    f = Frame.filled(3, 2, (9, 8, 7))
    path = tmp_path / "frame.ppm"
    write_ppm(path, f)
    assert np.array_equal(read_ppm(path).array, f.array)
