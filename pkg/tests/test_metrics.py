import math

import pytest
import torch

from app.domain.errors import InvalidArgument
from app.utils.metrics import PSNR_CAP, gaussian_window, psnr, ssim

pytestmark = pytest.mark.unit


def test_psnr_of_identical_images_is_capped():
    img = torch.rand(8, 8, 3)
    assert psnr(img, img) == PSNR_CAP


def test_psnr_closed_form():
    a = torch.zeros(4, 4, 3)
    assert math.isclose(psnr(a, a + 0.1), 20.0, rel_tol=1e-6)


def test_psnr_shape_mismatch():
    with pytest.raises(InvalidArgument):
        psnr(torch.zeros(2, 2, 3), torch.zeros(2, 3, 3))


def test_gaussian_window_is_normalized():
    w = gaussian_window()
    assert w.shape == (11, 11)
    assert math.isclose(float(w.sum()), 1.0, rel_tol=1e-12)
    assert torch.equal(w, w.T)


def test_ssim_of_identical_images_is_one():
    img = torch.rand(16, 16, 3, generator=torch.Generator().manual_seed(0))
    assert math.isclose(ssim(img, img), 1.0, rel_tol=1e-9)


def test_ssim_drops_with_noise():
    gen = torch.Generator().manual_seed(1)
    img = torch.rand(24, 24, 3, generator=gen)
    noisy = (img + 0.3 * torch.randn(24, 24, 3, generator=gen)).clamp(0, 1)
    value = ssim(img, noisy)
    assert 0.0 < value < 0.9
    assert math.isclose(value, ssim(noisy, img), rel_tol=1e-12)


def test_ssim_matches_loop_reference_for_one_window():
    gen = torch.Generator().manual_seed(2)
    a = torch.rand(11, 11, 1, dtype=torch.float64, generator=gen)
    b = torch.rand(11, 11, 1, dtype=torch.float64, generator=gen)
    w = gaussian_window()
    x, y = a[..., 0], b[..., 0]
    mx, my = float((w * x).sum()), float((w * y).sum())
    vx = float((w * x * x).sum()) - mx**2
    vy = float((w * y * y).sum()) - my**2
    cxy = float((w * x * y).sum()) - mx * my
    c1, c2 = 0.01**2, 0.03**2
    ref = (2 * mx * my + c1) * (2 * cxy + c2) / ((mx**2 + my**2 + c1) * (vx + vy + c2))
    assert math.isclose(ssim(a, b), ref, rel_tol=1e-9)


def test_ssim_rejects_small_images():
    with pytest.raises(InvalidArgument, match='11x11'):
        ssim(torch.zeros(8, 8, 3), torch.zeros(8, 8, 3))


def test_psnr_matches_loop_mse():
    gen = torch.Generator().manual_seed(3)
    a, b = torch.rand(5, 6, 3, generator=gen), torch.rand(5, 6, 3, generator=gen)
    total = 0.0
    for i in range(5):
        for j in range(6):
            for c in range(3):
                total += (float(a[i, j, c]) - float(b[i, j, c])) ** 2
    mse = total / 90
    assert math.isclose(10 ** (-psnr(a, b) / 10), mse, rel_tol=1e-9)
    assert psnr(a, b) == psnr(b, a)


def test_psnr_falls_as_noise_grows():
    gen = torch.Generator().manual_seed(4)
    img = torch.rand(16, 16, 3, generator=gen)
    noise = torch.rand(16, 16, 3, generator=gen) - 0.5
    values = [psnr(img, img + amp * noise) for amp in (0.01, 0.02, 0.05, 0.1, 0.2)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_ssim_of_inverted_binary_image_is_negative():
    gen = torch.Generator().manual_seed(5)
    a = (torch.rand(16, 16, 1, generator=gen) > 0.5).double()
    assert ssim(a, 1.0 - a) < 0.0
