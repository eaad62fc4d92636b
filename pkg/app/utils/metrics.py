"""Image quality metrics on (H, W, C) tensors with values in [0, 1]."""
import math

import torch
import torch.nn.functional as F

from app.domain.errors import InvalidArgument

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(op: str, a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise InvalidArgument(
            f'{op}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}'
        )


def psnr(a: torch.Tensor, b: torch.Tensor) -> float:
    _check_pair('psnr', a, b)
    mse = float(((a.double() - b.double()) ** 2).mean())
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, -10.0 * math.log10(mse))


def gaussian_window(
    size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA, dtype=torch.float64
) -> torch.Tensor:
    x = torch.arange(size, dtype=dtype) - (size - 1) / 2
    g = torch.exp(-(x**2) / (2 * sigma**2))
    g = g / g.sum()
    return torch.outer(g, g)


def ssim(a: torch.Tensor, b: torch.Tensor) -> float:
    """Mean SSIM over all valid 11x11 windows, per channel then averaged."""
    _check_pair('ssim', a, b)
    if a.dim() == 2:
        a, b = a.unsqueeze(-1), b.unsqueeze(-1)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise InvalidArgument(
            f'ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}'
        )

    x = a.double().permute(2, 0, 1).unsqueeze(1)  # (C, 1, H, W)
    y = b.double().permute(2, 0, 1).unsqueeze(1)
    w = gaussian_window(dtype=x.dtype).to(x.device).view(1, 1, SSIM_WINDOW, SSIM_WINDOW)

    def blur(z: torch.Tensor) -> torch.Tensor:
        return F.conv2d(z, w)

    mu_x, mu_y = blur(x), blur(y)
    var_x = blur(x * x) - mu_x**2
    var_y = blur(y * y) - mu_y**2
    cov = blur(x * y) - mu_x * mu_y

    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    per_channel = (num / den).flatten(1).mean(dim=1)
    return float(per_channel.mean())
