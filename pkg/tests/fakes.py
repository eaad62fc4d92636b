"""Analytic stand-ins for the field ports, used as test oracles."""
from typing import Sequence, Tuple

import torch

from app.domain.types import ScrewAxis


def _t_like(t, x: torch.Tensor) -> torch.Tensor:
    t = torch.as_tensor(t, dtype=x.dtype, device=x.device)
    if t.dim() and t.shape[-1] == 1:
        t = t[..., 0]
    return t.expand(x.shape[:-1])


class StaticDeformation:
    """Identity warp at every time."""

    def __call__(self, x: torch.Tensor, t) -> ScrewAxis:
        return ScrewAxis.zeros(x.shape[:-1], dtype=x.dtype, device=x.device)


class DriftDeformation:
    """x' = x + (v t, 0, 0) via an unnormalized pure-translation screw."""

    def __init__(self, speed: float = 1.0):
        self.speed = speed

    def __call__(self, x: torch.Tensor, t) -> ScrewAxis:
        a = torch.zeros_like(x)
        b = torch.zeros_like(x)
        b[..., 0] = self.speed * _t_like(t, x)
        return ScrewAxis(a=a, b=b, unnormalized=True)


class ConstantScrew:
    """The same screw for every point and time."""

    def __init__(self, a: Sequence[float], b: Sequence[float], unnormalized=False):
        self.a = torch.tensor(a, dtype=torch.float64)
        self.b = torch.tensor(b, dtype=torch.float64)
        self.unnormalized = unnormalized

    def __call__(self, x: torch.Tensor, t) -> ScrewAxis:
        a = self.a.to(x.dtype).expand_as(x)
        b = self.b.to(x.dtype).expand_as(x)
        return ScrewAxis(a=a, b=b, unnormalized=self.unnormalized)


class BlobRadiance:
    """Single Gaussian blob of flat color."""

    def __init__(
        self,
        center: Sequence[float],
        radius: float,
        density: float,
        color: Sequence[float] = (0.8, 0.4, 0.2),
    ):
        self.center = torch.tensor(center, dtype=torch.float64)
        self.radius = radius
        self.density = density
        self.color = torch.tensor(color, dtype=torch.float64)

    def __call__(
        self, x: torch.Tensor, d: torch.Tensor
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        sq = ((x - self.center.to(x.dtype)) ** 2).sum(dim=-1)
        tau = self.density * torch.exp(-sq / (2 * self.radius**2))
        color = self.color.to(x.dtype).expand(*x.shape[:-1], 3)
        return color, tau


class PlaneRadiance:
    """Opaque half-space z >= z0 with a view-dependent tint."""

    def __init__(self, z0: float, density: float = 1e4):
        self.z0 = z0
        self.density = density

    def __call__(
        self, x: torch.Tensor, d: torch.Tensor
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        tau = torch.where(
            x[..., 2] >= self.z0,
            torch.full_like(x[..., 2], self.density),
            torch.zeros_like(x[..., 2]),
        )
        color = torch.stack(
            (torch.full_like(tau, 0.5), 0.5 + 0.5 * d[..., 0], 0.5 + 0.5 * d[..., 1]),
            dim=-1,
        )
        return color, tau
