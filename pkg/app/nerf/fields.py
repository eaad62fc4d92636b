import logging
from typing import Sequence, Tuple

import torch
import torch.nn.functional as F
from torch import nn

from app.domain.errors import InvalidArgument
from app.domain.models import FieldSpec, PinholeCamera, Vec3
from app.domain.ports.fields import Time
from app.domain.types import ScrewAxis
from app.nerf.encoding import PositionalEncoding

logger = logging.getLogger(__name__)


class SceneBox(nn.Module):
    """Affine map of the camera frustum box onto [-1, 1]^3."""

    def __init__(self, lo: Vec3, hi: Vec3):
        super().__init__()
        lo_t = torch.tensor(lo, dtype=torch.float32)
        hi_t = torch.tensor(hi, dtype=torch.float32)
        self.register_buffer('center', (lo_t + hi_t) / 2)
        self.register_buffer('half_extent', (hi_t - lo_t) / 2)

    @classmethod
    def from_camera(cls, camera: PinholeCamera) -> 'SceneBox':
        return cls(*camera.frustum_bounds())

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return (x - self.center) / self.half_extent

    def bounds(self) -> Tuple[Vec3, Vec3]:
        lo = (self.center - self.half_extent).tolist()
        hi = (self.center + self.half_extent).tolist()
        return tuple(lo), tuple(hi)


class _MLP(nn.Module):
    """ReLU trunk; layers listed in `skips` also receive the trunk input."""

    def __init__(self, in_dim: int, width: int, depth: int, skips: Sequence[int]):
        super().__init__()
        self.skips = tuple(skips)
        layers = []
        for i in range(depth):
            fan_in = in_dim if i == 0 else width
            if i in self.skips:
                fan_in = width + in_dim
            layers.append(nn.Linear(fan_in, width))
        self.layers = nn.ModuleList(layers)

    def forward(self, h0: torch.Tensor) -> torch.Tensor:
        h = h0
        for i, layer in enumerate(self.layers):
            if i in self.skips:
                h = torch.cat((h, h0), dim=-1)
            h = F.relu(layer(h))
        return h


def _time_tensor(t: Time, like: torch.Tensor) -> torch.Tensor:
    if isinstance(t, torch.Tensor):
        if t.numel() and (bool(t.min() < 0) or bool(t.max() > 1)):
            raise InvalidArgument('time must lie in [0, 1]')
        t = t.to(dtype=like.dtype, device=like.device)
        if t.dim() == 0 or t.shape[-1] != 1:
            t = t.unsqueeze(-1)
        return t.expand(*like.shape[:-1], 1)
    if not 0.0 <= float(t) <= 1.0:
        raise InvalidArgument(f'time must lie in [0, 1], got {t}')
    return torch.full(
        (*like.shape[:-1], 1), float(t), dtype=like.dtype, device=like.device
    )


class DeformationField(nn.Module):
    """G: (x, t) -> screw axis (a, b) mapping x at time t into the canonical space."""

    def __init__(self, spec: FieldSpec, box: SceneBox):
        super().__init__()
        self.spec = spec
        self.box = box
        self.pos_enc = PositionalEncoding(3, spec.position_freqs, spec.include_input)
        self.time_enc = PositionalEncoding(1, spec.time_freqs, spec.include_input)
        in_dim = self.pos_enc.output_dim + self.time_enc.output_dim
        self.trunk = _MLP(
            in_dim, spec.deform_width, spec.deform_depth, spec.deform_skips
        )
        self.head = nn.Linear(spec.deform_width, 6)
        # near-identity warp at initialization
        scale = spec.deform_init_scale
        nn.init.uniform_(self.head.weight, -scale, scale)
        nn.init.zeros_(self.head.bias)

    def forward(self, x: torch.Tensor, t: Time) -> ScrewAxis:
        tt = _time_tensor(t, x)
        h = torch.cat((self.pos_enc(self.box(x)), self.time_enc(tt)), dim=-1)
        out = self.head(self.trunk(h))
        return ScrewAxis(
            a=out[..., :3],
            b=out[..., 3:],
            unnormalized=self.spec.unnormalized_translation,
        )

    def deform(self, x: torch.Tensor, t: Time) -> ScrewAxis:
        return self(x, t)


class CanonicalField(nn.Module):
    """F: (x', d) -> (c, tau); density never sees the view direction."""

    def __init__(self, spec: FieldSpec, box: SceneBox):
        super().__init__()
        self.spec = spec
        self.box = box
        self.pos_enc = PositionalEncoding(3, spec.position_freqs, spec.include_input)
        self.dir_enc = PositionalEncoding(3, spec.direction_freqs, spec.include_input)
        width = spec.canonical_width
        self.trunk = _MLP(
            self.pos_enc.output_dim, width, spec.canonical_depth, spec.canonical_skips
        )
        self.density_head = nn.Linear(width, 1)
        self.feature = nn.Linear(width, width)
        self.color_branch = nn.Sequential(
            nn.Linear(width + self.dir_enc.output_dim, spec.color_width),
            nn.ReLU(),
            nn.Linear(spec.color_width, 3),
        )

    def forward(
        self, x: torch.Tensor, d: torch.Tensor
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        h = self.trunk(self.pos_enc(self.box(x)))
        tau = F.softplus(self.density_head(h)).squeeze(-1)
        feat = torch.cat((self.feature(h), self.dir_enc(d)), dim=-1)
        color = torch.sigmoid(self.color_branch(feat))
        return color, tau

    def radiance(
        self, x: torch.Tensor, d: torch.Tensor
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        return self(x, d)


class DynamicScene(nn.Module):
    """The deformation and canonical fields of one video, sharing a scene box."""

    def __init__(self, spec: FieldSpec, camera: PinholeCamera):
        super().__init__()
        self.spec = spec
        self.camera = camera
        box = SceneBox.from_camera(camera)
        self.deformation = DeformationField(spec, box)
        self.canonical = CanonicalField(spec, box)
        logger.debug(
            '[fields] deformation=%d canonical=%d parameters',
            sum(p.numel() for p in self.deformation.parameters()),
            sum(p.numel() for p in self.canonical.parameters()),
        )

    @property
    def box(self) -> SceneBox:
        return self.deformation.box
