from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import torch

from app.domain.models import PinholeCamera

# Below this norm a rotation vector or translation generator is degenerate and
# the closed forms switch to their Taylor limits.
DEGENERACY_EPS = 1e-6


def _safe_unit(v: torch.Tensor) -> torch.Tensor:
    sq = (v * v).sum(dim=-1, keepdim=True)
    small = sq < DEGENERACY_EPS**2
    norm = torch.sqrt(torch.where(small, torch.ones_like(sq), sq))
    return torch.where(small, torch.zeros_like(v), v / norm)


@dataclass(frozen=True)
class ScrewAxis:
    """Output (a, b) of the deformation field, batched over leading dims."""

    a: torch.Tensor
    b: torch.Tensor
    unnormalized: bool = False

    @property
    def zeta(self) -> torch.Tensor:
        return torch.linalg.vector_norm(self.a, dim=-1)

    @property
    def b_hat(self) -> torch.Tensor:
        return _safe_unit(self.b)

    @classmethod
    def zeros(cls, shape, dtype=None, device=None) -> 'ScrewAxis':
        z = torch.zeros(*shape, 3, dtype=dtype, device=device)
        return cls(a=z, b=z.clone())


@dataclass(frozen=True)
class RigidTransform:
    R: torch.Tensor  # (..., 3, 3)
    p: torch.Tensor  # (..., 3)

    def apply(self, x: torch.Tensor) -> torch.Tensor:
        return (self.R @ x.unsqueeze(-1)).squeeze(-1) + self.p

    def rotate(self, v: torch.Tensor) -> torch.Tensor:
        return (self.R @ v.unsqueeze(-1)).squeeze(-1)

    def inverse(self) -> 'RigidTransform':
        Rt = self.R.transpose(-1, -2)
        return RigidTransform(R=Rt, p=-(Rt @ self.p.unsqueeze(-1)).squeeze(-1))

    def matrix(self) -> torch.Tensor:
        """Homogeneous 4x4 form Q."""
        batch = self.R.shape[:-2]
        Q = torch.zeros(*batch, 4, 4, dtype=self.R.dtype, device=self.R.device)
        Q[..., :3, :3] = self.R
        Q[..., :3, 3] = self.p
        Q[..., 3, 3] = 1.0
        return Q

    def is_valid(self, tol: float = 1e-9) -> bool:
        eye = torch.eye(3, dtype=self.R.dtype, device=self.R.device)
        orth = (self.R.transpose(-1, -2) @ self.R - eye).abs().max()
        det = (torch.linalg.det(self.R) - 1.0).abs().max()
        return bool(orth <= tol and det <= tol)

    @classmethod
    def identity(cls, dtype=None, device=None) -> 'RigidTransform':
        return cls(
            R=torch.eye(3, dtype=dtype, device=device),
            p=torch.zeros(3, dtype=dtype, device=device),
        )


@dataclass(frozen=True)
class Ray:
    origin: torch.Tensor  # (3,)
    direction: torch.Tensor  # (3,) unit
    pixel: Tuple[int, int]
    t: float


@dataclass(frozen=True)
class RayBundle:
    """Batched rays of one frame time, patch-major when built from patches."""

    origins: torch.Tensor  # (N, 3)
    directions: torch.Tensor  # (N, 3)
    rows: torch.Tensor  # (N,)
    cols: torch.Tensor  # (N,)
    t: float

    def __len__(self) -> int:
        return self.origins.shape[0]

    def ray(self, i: int) -> Ray:
        return Ray(
            origin=self.origins[i],
            direction=self.directions[i],
            pixel=(int(self.rows[i]), int(self.cols[i])),
            t=self.t,
        )


@dataclass(frozen=True)
class SampleBatch:
    rays: RayBundle
    s_values: torch.Tensor  # (N, S) strictly increasing per ray
    gt_color: torch.Tensor  # (N, 3)
    gt_depth: torch.Tensor  # (N,)
    mask_weight: torch.Tensor  # (N,) in {0, 1}
    laplacian: torch.Tensor  # (N,)
    patch_size: int
    frame_index: int

    @property
    def n_patches(self) -> int:
        return len(self.rays) // (self.patch_size**2)

    def as_patches(self, values: torch.Tensor) -> torch.Tensor:
        """Reshape a per-ray tensor (N, ...) into (P, p, p, ...)."""
        p = self.patch_size
        return values.reshape(self.n_patches, p, p, *values.shape[1:])


@dataclass(frozen=True)
class RadianceOutput:
    color: torch.Tensor  # (N, 3)
    depth: torch.Tensor  # (N,)
    weights: torch.Tensor  # (N, S)
    acc: torch.Tensor  # (N,)
    transmittance: torch.Tensor  # (N, S)


@dataclass(frozen=True)
class RenderResult:
    output: RadianceOutput
    points: torch.Tensor  # (N, S, 3) observation-space samples
    warped: torch.Tensor  # (N, S, 3) canonical-space samples


@dataclass(frozen=True)
class FrameRecord:
    index: int
    image: torch.Tensor  # (H, W, 3) in [0, 1]
    mask: torch.Tensor  # (H, W) 1 = tissue, 0 = tool
    depth: torch.Tensor  # (H, W)
    t: float
    laplacian: torch.Tensor  # (H, W) |laplacian of C|

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.image.shape[:2])


@dataclass(frozen=True)
class LossReport:
    l_color: torch.Tensor
    l_depth: torch.Tensor
    l_jac: torch.Tensor
    l_grad: torch.Tensor
    l_smooth: torch.Tensor
    l_tv: torch.Tensor
    total: torch.Tensor

    _ORDER = ('l_color', 'l_depth', 'l_jac', 'l_grad', 'l_smooth', 'l_tv', 'total')

    def as_dict(self) -> Dict[str, float]:
        return {k: float(getattr(self, k)) for k in self._ORDER}


@dataclass
class MetricReport:
    frames: List[int] = field(default_factory=list)
    # render instants of an oracle comparison, empty for held-out frames
    times: List[float] = field(default_factory=list)
    psnr: List[float] = field(default_factory=list)
    ssim: List[float] = field(default_factory=list)

    @property
    def mean_psnr(self) -> Optional[float]:
        return sum(self.psnr) / len(self.psnr) if self.psnr else None

    @property
    def mean_ssim(self) -> Optional[float]:
        return sum(self.ssim) / len(self.ssim) if self.ssim else None

    def as_dict(self) -> dict:
        out = {
            'frames': self.frames,
            'psnr': self.psnr,
            'ssim': self.ssim,
            'mean_psnr': self.mean_psnr,
            'mean_ssim': self.mean_ssim,
        }
        if self.times:
            out['times'] = self.times
        return out


@dataclass
class RawVideo:
    """A clip as stored on disk, before depth normalization."""

    camera: PinholeCamera
    images: List[torch.Tensor] = field(default_factory=list)  # (H, W, 3) in [0, 1]
    masks: List[torch.Tensor] = field(default_factory=list)  # (H, W) in {0, 1}
    depths: List[torch.Tensor] = field(default_factory=list)  # (H, W) relative

    def __len__(self) -> int:
        return len(self.images)
