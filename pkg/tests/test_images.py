import numpy as np
import pytest
import torch

from app.domain.errors import IngestionError
from app.utils.images import (
    color_laplacian,
    depth_to_uint16,
    encode_png,
    read_mask,
    read_rgb,
    to_uint8,
    write_mask,
    write_rgb,
)
from app.utils.pfm import read_pfm, write_pfm
from app.utils.ply import read_ply, write_ply

pytestmark = pytest.mark.unit


def test_laplacian_of_flat_image_is_zero():
    img = torch.full((6, 7, 3), 0.4)
    assert torch.count_nonzero(color_laplacian(img)) == 0


def test_laplacian_of_linear_ramp_vanishes_inside():
    x = torch.arange(8.0, dtype=torch.float64).expand(8, 8)
    img = torch.stack((x, 2 * x, -x), dim=-1)
    lap = color_laplacian(img)
    assert lap.shape == (8, 8)
    assert torch.allclose(lap[1:-1, 1:-1], torch.zeros(6, 6, dtype=torch.float64))


def test_laplacian_of_single_spike():
    img = torch.zeros(5, 5, 3, dtype=torch.float64)
    img[2, 2] = 1.0
    lap = color_laplacian(img)
    assert lap[2, 2] == 4.0
    assert lap[1, 2] == lap[2, 1] == 1.0
    assert lap[0, 0] == 0.0


def test_png_round_trip(tmp_path):
    img = torch.rand(5, 4, 3)
    write_rgb(tmp_path / 'a.png', img)
    back = read_rgb(tmp_path / 'a.png')
    assert back.shape == (5, 4, 3)
    assert torch.allclose(back, img, atol=0.5 / 255 + 1e-6)

    mask = (torch.rand(5, 4) > 0.5).float()
    write_mask(tmp_path / 'm.png', mask)
    assert torch.equal(read_mask(tmp_path / 'm.png'), mask)


def test_missing_image_names_its_path(tmp_path):
    with pytest.raises(IngestionError, match='missing.png'):
        read_rgb(tmp_path / 'missing.png')


def test_png_bytes_have_signature():
    assert encode_png(to_uint8(torch.rand(3, 3, 3))).startswith(b'\x89PNG')


def test_depth_quantization_spans_the_range():
    d = depth_to_uint16(torch.tensor([0.5, 1.0, 2.0, 3.0, 4.0]), 1.0, 3.0)
    assert d.tolist() == [0, 0, 32768, 65535, 65535]


def test_pfm_round_trip_keeps_row_order(tmp_path):
    arr = np.arange(12, dtype=np.float32).reshape(3, 4) / 7
    write_pfm(tmp_path / 'd.pfm', arr)
    assert np.array_equal(read_pfm(tmp_path / 'd.pfm'), arr)

    rgb = np.random.default_rng(0).random((2, 3, 3)).astype(np.float32)
    write_pfm(tmp_path / 'c.pfm', rgb)
    assert np.array_equal(read_pfm(tmp_path / 'c.pfm'), rgb)


def test_pfm_reads_big_endian(tmp_path):
    arr = np.array([[1.5, 2.5]], dtype='>f4')
    path = tmp_path / 'be.pfm'
    path.write_bytes(b'Pf\n2 1\n1.0\n' + arr.tobytes())
    assert read_pfm(path).tolist() == [[1.5, 2.5]]


@pytest.mark.parametrize(
    'payload',
    [b'P6\n1 1\n-1.0\n', b'Pf\n1 x\n-1.0\n', b'Pf\n2 2\n-1.0\n\x00\x00'],
)
def test_pfm_rejects_malformed_files(tmp_path, payload):
    path = tmp_path / 'bad.pfm'
    path.write_bytes(payload)
    with pytest.raises(IngestionError):
        read_pfm(path)


def test_ply_round_trip(tmp_path):
    pts = np.array([[0.1, -2.0, 3.25], [1e-3, 4.0, 5.5]])
    cols = np.array([[255, 0, 7], [1, 2, 3]], dtype=np.uint8)
    write_ply(tmp_path / 'p.ply', pts, cols)
    text = (tmp_path / 'p.ply').read_text()
    assert 'element vertex 2' in text
    assert 'property uchar red' in text
    back_pts, back_cols = read_ply(tmp_path / 'p.ply')
    assert np.allclose(back_pts, pts)
    assert np.array_equal(back_cols, cols)


def test_ply_without_colors(tmp_path):
    write_ply(tmp_path / 'p.ply', np.zeros((0, 3)))
    pts, cols = read_ply(tmp_path / 'p.ply')
    assert pts.shape == (0, 3) and cols is None
