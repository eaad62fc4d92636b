"""Ray generation and sample placement under the fixed-camera assumption.

Randomness always comes from an explicit CPU `torch.Generator` (or an int seed),
so batches are bit-reproducible regardless of the device they end up on.
"""
import logging
import math
from typing import Optional, Tuple, Union

import torch
import torch.nn.functional as F

from app.domain.errors import InvalidArgument, UnsatisfiableMask
from app.domain.models import PinholeCamera
from app.domain.types import Ray, RayBundle

logger = logging.getLogger(__name__)

Rng = Union[int, torch.Generator]


def _generator(rng: Rng) -> torch.Generator:
    if isinstance(rng, torch.Generator):
        return rng
    return torch.Generator().manual_seed(int(rng))


def gen_rays(
    camera: PinholeCamera,
    rows: torch.Tensor,
    cols: torch.Tensor,
    t: float,
    *,
    dtype: Optional[torch.dtype] = None,
    device=None,
) -> RayBundle:
    """Back-project pixel centers (half-integer offsets) into unit directions."""
    rows = torch.as_tensor(rows, dtype=torch.long, device=device).reshape(-1)
    cols = torch.as_tensor(cols, dtype=torch.long, device=device).reshape(-1)
    if rows.numel() and (
        bool(rows.min() < 0)
        or bool(rows.max() >= camera.height)
        or bool(cols.min() < 0)
        or bool(cols.max() >= camera.width)
    ):
        raise InvalidArgument('pixel outside the image')

    dtype = dtype or torch.get_default_dtype()
    x = (cols.to(dtype) + 0.5 - camera.cx) / camera.fx
    y = (rows.to(dtype) + 0.5 - camera.cy) / camera.fy
    d = torch.stack((x, y, torch.ones_like(x)), dim=-1)
    d = d / torch.linalg.vector_norm(d, dim=-1, keepdim=True)
    return RayBundle(
        origins=torch.zeros_like(d),
        directions=d,
        rows=rows,
        cols=cols,
        t=float(t),
    )


def gen_ray(
    camera: PinholeCamera,
    row: int,
    col: int,
    t: float,
    *,
    dtype: Optional[torch.dtype] = None,
) -> Ray:
    if not (0 <= row < camera.height and 0 <= col < camera.width):
        raise InvalidArgument(f'pixel ({row}, {col}) outside the image')
    bundle = gen_rays(
        camera, torch.tensor([row]), torch.tensor([col]), t, dtype=dtype
    )
    return bundle.ray(0)


def frame_pixels(
    camera: PinholeCamera, stride: int = 1, device=None
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Row-major pixel grid, optionally subsampled."""
    if stride < 1:
        raise InvalidArgument('stride must be >= 1')
    r = torch.arange(0, camera.height, stride, device=device)
    c = torch.arange(0, camera.width, stride, device=device)
    rows, cols = torch.meshgrid(r, c, indexing='ij')
    return rows.reshape(-1), cols.reshape(-1)


def patch_pixels(
    corners: torch.Tensor, patch: int
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Expand (P, 2) top-left corners into patch-major pixel indices (P*p*p,)."""
    off = torch.arange(patch, device=corners.device)
    rows = corners[:, 0, None, None] + off[None, :, None]
    cols = corners[:, 1, None, None] + off[None, None, :]
    rows, cols = torch.broadcast_tensors(rows, cols)
    return rows.reshape(-1), cols.reshape(-1)


def feasible_corners(mask: torch.Tensor, patch: int) -> torch.Tensor:
    """All (row, col) corners whose patch x patch block is fully unmasked."""
    h, w = mask.shape[-2:]
    if h < patch or w < patch:
        return torch.zeros((0, 2), dtype=torch.long)
    m = (mask > 0.5).to(torch.float32).reshape(1, 1, h, w)
    counts = F.avg_pool2d(m, patch, stride=1, divisor_override=1)[0, 0]
    return torch.nonzero(counts > patch * patch - 0.5).cpu()


def sample_patches(
    mask: torch.Tensor, patch: int, n_patches: int, rng: Rng
) -> torch.Tensor:
    """Uniformly draw `n_patches` fully-unmasked patch corners (with replacement)."""
    if patch < 3:
        raise InvalidArgument('patch must be at least 3 pixels wide')
    if n_patches < 1:
        raise InvalidArgument('n_patches must be positive')
    valid = feasible_corners(mask, patch)
    if valid.shape[0] == 0:
        raise UnsatisfiableMask(f'no fully unmasked {patch}x{patch} patch in the mask')
    idx = torch.randint(valid.shape[0], (n_patches,), generator=_generator(rng))
    return valid[idx]


def _make_strict(s: torch.Tensor, far: float) -> torch.Tensor:
    # forward pass breaks ties upward, backward pass pulls everything below far
    cols = list(s.unbind(-1))
    up = torch.tensor(math.inf, dtype=s.dtype, device=s.device)
    down = -up
    for k in range(1, len(cols)):
        cols[k] = torch.maximum(cols[k], torch.nextafter(cols[k - 1], up))
    cols[-1] = torch.clamp(cols[-1], max=far)
    for k in range(len(cols) - 2, -1, -1):
        cols[k] = torch.minimum(cols[k], torch.nextafter(cols[k + 1], down))
    return torch.stack(cols, dim=-1)


def sample_depth_guided(
    d_prior: Union[float, torch.Tensor],
    sigma: float,
    n_surface: int,
    n_uniform: int,
    near: float,
    far: float,
    rng: Rng,
    *,
    dtype: Optional[torch.dtype] = None,
) -> torch.Tensor:
    """Gaussian samples around the depth prior plus stratified uniform samples.

    Returns (N, n_surface + n_uniform) positions in [near, far], strictly
    increasing along the last axis.
    """
    if not near < far:
        raise InvalidArgument('sampling bounds must satisfy near < far')
    if not sigma > 0:
        raise InvalidArgument('sigma must be positive')
    if n_surface < 0 or n_uniform < 0 or n_surface + n_uniform < 2:
        raise InvalidArgument('need at least two samples per ray')

    prior = torch.as_tensor(d_prior, dtype=dtype)
    prior = prior.reshape(-1)
    dtype, device = prior.dtype, prior.device
    n_rays = prior.shape[0]
    gen = _generator(rng)

    parts = []
    if n_surface:
        noise = torch.randn((n_rays, n_surface), generator=gen, dtype=dtype)
        surface = prior[:, None] + sigma * noise.to(device)
        parts.append(surface.clamp(near, far))
    if n_uniform:
        u = torch.rand((n_rays, n_uniform), generator=gen, dtype=dtype).to(device)
        k = torch.arange(n_uniform, dtype=dtype, device=device)
        delta = (far - near) / n_uniform
        parts.append(near + (k + u) * delta)

    s, _ = torch.sort(torch.cat(parts, dim=-1), dim=-1)
    return _make_strict(s, far)


def uniform_samples(
    n_rays: int,
    n_samples: int,
    near: float,
    far: float,
    *,
    dtype: Optional[torch.dtype] = None,
    device=None,
) -> torch.Tensor:
    """Deterministic bin midpoints, used when no depth prior is available."""
    dtype = dtype or torch.get_default_dtype()
    k = torch.arange(n_samples, dtype=dtype, device=device)
    s = near + (k + 0.5) * (far - near) / n_samples
    return s.expand(n_rays, n_samples).contiguous()


def sigma_at(
    iteration: int,
    iterations: int,
    near: float,
    far: float,
    start: float = 0.05,
    end: float = 0.01,
) -> float:
    """Gaussian width decaying exponentially from `start` to `end`."""
    frac = 1.0 if iterations <= 0 else min(iteration / iterations, 1.0)
    return (far - near) * start * (end / start) ** frac
