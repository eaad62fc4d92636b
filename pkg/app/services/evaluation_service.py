import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from app.domain.errors import InvalidArgument
from app.domain.models import PinholeCamera, SyntheticScene
from app.domain.ports.fields import DeformationPort, RadiancePort
from app.domain.types import MetricReport, RigidTransform
from app.nerf.render import render_chunked
from app.nerf.sampling import (
    frame_pixels,
    gen_rays,
    sample_depth_guided,
    sigma_at,
    uniform_samples,
)
from app.services.dataset_service import Dataset
from app.services.synthetic_service import oracle_render
from app.utils.images import to_uint8
from app.utils.metrics import psnr, ssim
from app.utils.ply import write_ply

logger = logging.getLogger(__name__)

# fixed stream for depth-guided samples at evaluation time
EVAL_SEED = 0


@dataclass(frozen=True)
class RenderedView:
    image: torch.Tensor  # (h, w, 3)
    depth: torch.Tensor  # (h, w)
    acc: torch.Tensor  # (h, w)
    rows: torch.Tensor
    cols: torch.Tensor


class Renderer:
    """Frozen fields plus the camera they were trained for."""

    def __init__(
        self,
        deformation: DeformationPort,
        canonical: RadiancePort,
        camera: PinholeCamera,
        *,
        chunk: int = 4096,
        samples: int = 128,
        sigma_end: float = 0.01,
        device=None,
    ):
        self.deformation = deformation
        self.canonical = canonical
        self.camera = camera
        self.chunk = chunk
        self.samples = samples
        self.sigma_end = sigma_end
        self.device = device

    @classmethod
    def from_scene(cls, scene, **kwargs) -> 'Renderer':
        return cls(scene.deformation, scene.canonical, scene.camera, **kwargs)

    def render_view(
        self,
        t: float,
        pose_override: Optional[RigidTransform] = None,
        stride: int = 1,
        depth_prior: Optional[torch.Tensor] = None,
    ) -> RenderedView:
        """Full-frame render at time t.

        With `depth_prior` (H, W) the samples are placed as in late training;
        otherwise uniform bin midpoints are used.
        """
        if not 0.0 <= float(t) <= 1.0:
            raise InvalidArgument(f'time must lie in [0, 1], got {t}')
        cam = self.camera
        dtype = torch.get_default_dtype()
        rows, cols = frame_pixels(cam, stride)
        rays = gen_rays(cam, rows, cols, t, dtype=dtype)
        if pose_override is not None:
            pose = RigidTransform(
                R=pose_override.R.to(dtype), p=pose_override.p.to(dtype)
            )
            rays = type(rays)(
                origins=pose.apply(rays.origins),
                directions=pose.rotate(rays.directions),
                rows=rays.rows,
                cols=rays.cols,
                t=rays.t,
            )

        if depth_prior is not None:
            sigma = sigma_at(1, 1, cam.near, cam.far, end=self.sigma_end)
            s = sample_depth_guided(
                depth_prior[rows, cols].to(dtype),
                sigma,
                self.samples - self.samples // 4,
                self.samples // 4,
                cam.near,
                cam.far,
                EVAL_SEED,
                dtype=dtype,
            )
        else:
            s = uniform_samples(len(rays), self.samples, cam.near, cam.far, dtype=dtype)

        if self.device is not None:
            rays = type(rays)(
                origins=rays.origins.to(self.device),
                directions=rays.directions.to(self.device),
                rows=rays.rows,
                cols=rays.cols,
                t=rays.t,
            )
            s = s.to(self.device)

        out = render_chunked(
            rays, s, self.deformation, self.canonical, far=cam.far, chunk=self.chunk
        )
        h = len(range(0, cam.height, stride))
        w = len(range(0, cam.width, stride))
        return RenderedView(
            image=out.color.reshape(h, w, 3).cpu(),
            depth=out.depth.reshape(h, w).cpu(),
            acc=out.acc.reshape(h, w).cpu(),
            rows=rows,
            cols=cols,
        )


def evaluate(
    renderer: Renderer, dataset: Dataset, holdout_every: Optional[int]
) -> MetricReport:
    """PSNR/SSIM on the held-out frames, or on every frame without a holdout."""
    indices = dataset.holdout_indices(holdout_every) or list(range(len(dataset)))
    report = MetricReport()
    for i in indices:
        frame = dataset.frames[i]
        view = renderer.render_view(frame.t, depth_prior=frame.depth)
        gt = frame.image.to(view.image.dtype)
        report.frames.append(i)
        report.psnr.append(psnr(view.image, gt))
        report.ssim.append(ssim(view.image, gt))
        logger.info(
            '[eval] frame=%d psnr=%.3f ssim=%.4f', i, report.psnr[-1], report.ssim[-1]
        )
    return report


def oracle_times(frame_count: int, indices: Sequence[int]) -> List[float]:
    """Each frame instant followed by the instant halfway to the next frame."""
    times = []
    for i in indices:
        times += [i / frame_count, (i + 0.5) / frame_count]
    return times


def evaluate_oracle(
    renderer: Renderer, oracle: SyntheticScene, times: Sequence[float]
) -> MetricReport:
    """PSNR/SSIM against noise-free analytic renders of the synthetic scene."""
    cam = renderer.camera
    if (oracle.camera.height, oracle.camera.width) != (cam.height, cam.width):
        raise InvalidArgument(
            f'oracle frames are {oracle.camera.height}x{oracle.camera.width}, '
            f'renders are {cam.height}x{cam.width}'
        )
    report = MetricReport()
    for t in times:
        view = renderer.render_view(t)
        gt = oracle_render(oracle, t)[0].to(view.image.dtype)
        report.times.append(float(t))
        report.psnr.append(psnr(view.image, gt))
        report.ssim.append(ssim(view.image, gt))
        logger.info(
            '[eval] oracle t=%.4f psnr=%.3f ssim=%.4f',
            t,
            report.psnr[-1],
            report.ssim[-1],
        )
    return report


def write_metrics(path: Path, report: MetricReport) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(report.as_dict(), indent=2) + '\n')


def backproject(
    camera: PinholeCamera, rows: torch.Tensor, cols: torch.Tensor, depth: torch.Tensor
) -> torch.Tensor:
    """Points at expected ray distance `depth` along each pixel ray (camera frame)."""
    rays = gen_rays(camera, rows, cols, 0.0, dtype=depth.dtype)
    return rays.origins + depth.reshape(-1, 1) * rays.directions


def project(camera: PinholeCamera, points: torch.Tensor) -> torch.Tensor:
    """Continuous (row, col) pixel coordinates; pixel centers sit at +0.5."""
    x, y, z = points.unbind(-1)
    col = camera.fx * x / z + camera.cx - 0.5
    row = camera.fy * y / z + camera.cy - 0.5
    return torch.stack((row, col), dim=-1)


def export_pointcloud(
    renderer: Renderer,
    t: float,
    out: Path,
    mask: Optional[torch.Tensor] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """One colored point per unmasked pixel, written as ASCII PLY."""
    view = renderer.render_view(t)
    cam = renderer.camera
    if mask is None:
        mask = torch.ones(cam.height, cam.width)
    keep = mask[view.rows, view.cols] > 0.5
    rows, cols = view.rows[keep], view.cols[keep]
    depth = view.depth.reshape(-1)[keep]
    colors = view.image.reshape(-1, 3)[keep]

    pts = backproject(cam, rows, cols, depth).cpu().numpy()
    cols_u8 = to_uint8(colors).reshape(-1, 3)
    write_ply(out, pts, cols_u8)
    logger.info('[export] %d points -> %s', pts.shape[0], out)
    return pts, cols_u8
