"""Analytic deforming scenes with exact ground truth.

Each blob is an isotropic Gaussian density with a flat color. Its motion is a
rigid transform about the blob center, exp of the screw
(a, b) = (rotation_amplitude, translation_amplitude) * sin(2 pi f t),
so every blob is at rest at t = 0.
"""
import json
import logging
import math
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Tuple

import torch

from app.adapters.dataset.filesystem import FilesystemDatasetStore
from app.domain.errors import ConfigError
from app.domain.models import BlobSpec, SyntheticScene
from app.domain.ports.dataset_store import DatasetStorePort
from app.domain.types import RawVideo, RigidTransform, ScrewAxis
from app.geometry.se3 import screw_to_transform
from app.nerf.render import composite
from app.nerf.sampling import frame_pixels, gen_rays, uniform_samples

logger = logging.getLogger(__name__)

ORACLE_FILE = 'oracle.json'
ORACLE_CHUNK = 1024


def blob_motion(blob: BlobSpec, t: float, dtype=torch.float64) -> RigidTransform:
    phase = math.sin(2.0 * math.pi * blob.frequency * t)
    a = torch.tensor(blob.rotation_amplitude, dtype=dtype) * phase
    b = torch.tensor(blob.translation_amplitude, dtype=dtype) * phase
    return screw_to_transform(ScrewAxis(a=a, b=b, unnormalized=True))


class AnalyticScene:
    """Density and color of the blob union at a fixed time instant."""

    def __init__(self, blobs: List[BlobSpec], t: float, dtype=torch.float64):
        self.dtype = dtype
        self._blobs = []
        for blob in blobs:
            motion = blob_motion(blob, t, dtype)
            self._blobs.append(
                (
                    torch.tensor(blob.center, dtype=dtype),
                    blob.radius,
                    blob.density,
                    torch.tensor(blob.color, dtype=dtype),
                    motion,
                )
            )

    def __call__(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        x = x.to(self.dtype)
        tau = torch.zeros(x.shape[:-1], dtype=self.dtype)
        weighted = torch.zeros(*x.shape[:-1], 3, dtype=self.dtype)
        for center, radius, density, color, motion in self._blobs:
            # observation -> rest pose: y = c + R^T (x - c - p)
            y = center + motion.inverse().rotate(x - center - motion.p)
            sq = ((y - center) ** 2).sum(dim=-1)
            tau_b = density * torch.exp(-sq / (2.0 * radius**2))
            tau = tau + tau_b
            weighted = weighted + tau_b.unsqueeze(-1) * color
        color = weighted / tau.clamp_min(1e-30).unsqueeze(-1)
        return color, tau


def oracle_render(
    spec: SyntheticScene, t: float, stride: int = 1
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Fine-quadrature render of the analytic scene: (image, depth, acc)."""
    cam = spec.camera
    field = AnalyticScene(spec.blobs, t)
    rows, cols = frame_pixels(cam, stride)
    rays = gen_rays(cam, rows, cols, t, dtype=torch.float64)
    s_all = uniform_samples(
        len(rays), spec.quadrature_steps, cam.near, cam.far, dtype=torch.float64
    )
    colors, depths, accs = [], [], []
    for start in range(0, len(rays), ORACLE_CHUNK):
        sl = slice(start, start + ORACLE_CHUNK)
        s = s_all[sl]
        pts = rays.origins[sl, None, :] + s[..., None] * rays.directions[sl, None, :]
        c, tau = field(pts)
        out = composite(c, tau, s, far=cam.far)
        colors.append(out.color)
        depths.append(out.depth)
        accs.append(out.acc)
    h = len(range(0, cam.height, stride))
    w = len(range(0, cam.width, stride))
    return (
        torch.cat(colors).reshape(h, w, 3),
        torch.cat(depths).reshape(h, w),
        torch.cat(accs).reshape(h, w),
    )


def tool_mask(spec: SyntheticScene, t: float) -> torch.Tensor:
    cam = spec.camera
    mask = torch.ones(cam.height, cam.width)
    for tool in spec.tool_masks:
        r0 = round(tool.start[0] + (tool.end[0] - tool.start[0]) * t)
        c0 = round(tool.start[1] + (tool.end[1] - tool.start[1]) * t)
        h, w = tool.size
        mask[max(r0, 0) : max(r0 + h, 0), max(c0, 0) : max(c0 + w, 0)] = 0.0
    return mask


def synthesize(
    spec: SyntheticScene,
    progress: Optional[Callable[[Iterable[int]], Iterable[int]]] = None,
) -> RawVideo:
    """Render every frame and derive relative depth and tool masks."""
    cam = spec.camera
    span = cam.far - cam.near
    gen = torch.Generator().manual_seed(spec.seed)
    video = RawVideo(camera=cam)
    frames = range(spec.frame_count)
    for i in (progress or (lambda it: it))(frames):
        t = i / spec.frame_count
        image, depth, _ = oracle_render(spec, t)
        noise = torch.randn(depth.shape, generator=gen, dtype=torch.float64)
        relative = (
            spec.depth_scale * depth
            + spec.depth_offset * span
            + spec.depth_noise * span * noise
        )
        # quantize like the PNG the image ends up in
        video.images.append(torch.round(image.float().clamp(0, 1) * 255) / 255)
        video.masks.append(tool_mask(spec, t))
        video.depths.append(relative.float())
    logger.info('[synth] %d frames, %d blobs', spec.frame_count, len(spec.blobs))
    return video


def generate_synthetic(
    spec: SyntheticScene,
    out_dir: str,
    store: Optional[DatasetStorePort] = None,
    progress: Optional[Callable[[Iterable[int]], Iterable[int]]] = None,
) -> str:
    """Write a dataset for `spec`, plus the scene description as oracle.json."""
    video = synthesize(spec, progress)
    (store or FilesystemDatasetStore()).write(out_dir, video)
    if store is None:
        path = Path(out_dir) / ORACLE_FILE
        path.write_text(json.dumps(spec.model_dump(mode='json'), indent=2) + '\n')
    return out_dir


def load_oracle(dataset_dir: str) -> SyntheticScene:
    path = Path(dataset_dir) / ORACLE_FILE
    if not path.is_file():
        raise ConfigError(f'no {ORACLE_FILE} in {dataset_dir}, not a synthetic dataset')
    return SyntheticScene.model_validate_json(path.read_text())
