import logging
from typing import Optional

import torch

from app.domain.errors import InvalidArgument
from app.domain.ports.fields import DeformationPort, RadiancePort
from app.domain.types import RadianceOutput, Ray, RayBundle, RenderResult
from app.geometry.se3 import warp_point

logger = logging.getLogger(__name__)

# floor of the accumulation when normalizing the expected depth
EPS_ACC = 1e-10


def composite(
    colors: torch.Tensor,
    densities: torch.Tensor,
    s_values: torch.Tensor,
    *,
    far: float,
) -> RadianceOutput:
    """Volume-rendering quadrature along the last sample axis.

    colors (..., S, 3), densities (..., S), s_values (..., S) strictly increasing.
    The last interval runs to `far`.
    """
    if s_values.shape[-1] > 1 and not bool(
        (s_values[..., 1:] > s_values[..., :-1]).all()
    ):
        raise InvalidArgument('s_values must be strictly increasing')

    last = (far - s_values[..., -1:]).clamp_min(0.0)
    deltas = torch.cat((s_values[..., 1:] - s_values[..., :-1], last), dim=-1)
    optical = densities * deltas
    alpha = 1.0 - torch.exp(-optical)
    # T_k = prod_{j<k} (1 - alpha_j) = exp(-sum_{j<k} tau_j delta_j)
    accum = torch.cumsum(optical, dim=-1)
    before = torch.cat((torch.zeros_like(accum[..., :1]), accum[..., :-1]), dim=-1)
    trans = torch.exp(-before)
    weights = trans * alpha

    acc = weights.sum(dim=-1)
    color = (weights.unsqueeze(-1) * colors).sum(dim=-2)
    depth = (weights * s_values).sum(dim=-1) / acc.clamp_min(EPS_ACC)
    return RadianceOutput(
        color=color, depth=depth, weights=weights, acc=acc, transmittance=trans
    )


def render_rays(
    rays: RayBundle,
    s_values: torch.Tensor,
    deformation: DeformationPort,
    canonical: RadiancePort,
    *,
    far: float,
    track_points: bool = False,
) -> RenderResult:
    """Warp every sample into the canonical space, query radiance, composite.

    With `track_points` the sample positions require grad so the warp Jacobian
    can be taken on them afterwards without another field evaluation.
    """
    origins = rays.origins.unsqueeze(-2)
    pts = origins + s_values.unsqueeze(-1) * rays.directions.unsqueeze(-2)
    if track_points:
        pts = pts.detach().requires_grad_(True)
    warped = warp_point(pts, deformation(pts, rays.t))
    dirs = rays.directions.unsqueeze(-2).expand_as(pts)
    colors, tau = canonical(warped, dirs)
    out = composite(colors, tau, s_values, far=far)
    return RenderResult(output=out, points=pts, warped=warped)


def render_ray(
    ray: Ray,
    s_values: torch.Tensor,
    deformation: DeformationPort,
    canonical: RadiancePort,
    *,
    far: float,
) -> RadianceOutput:
    bundle = RayBundle(
        origins=ray.origin.reshape(1, 3),
        directions=ray.direction.reshape(1, 3),
        rows=torch.tensor([ray.pixel[0]]),
        cols=torch.tensor([ray.pixel[1]]),
        t=ray.t,
    )
    out = render_rays(
        bundle, s_values.reshape(1, -1), deformation, canonical, far=far
    ).output
    return RadianceOutput(
        color=out.color[0],
        depth=out.depth[0],
        weights=out.weights[0],
        acc=out.acc[0],
        transmittance=out.transmittance[0],
    )


@torch.no_grad()
def render_chunked(
    rays: RayBundle,
    s_values: torch.Tensor,
    deformation: DeformationPort,
    canonical: RadiancePort,
    *,
    far: float,
    chunk: int = 4096,
    keep_weights: bool = False,
) -> RadianceOutput:
    """Render many rays in fixed-size pieces; weights are dropped unless asked for."""
    colors, depths, accs, weights, trans = [], [], [], [], []
    n = len(rays)
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        part = RayBundle(
            origins=rays.origins[sl],
            directions=rays.directions[sl],
            rows=rays.rows[sl],
            cols=rays.cols[sl],
            t=rays.t,
        )
        out = render_rays(part, s_values[sl], deformation, canonical, far=far).output
        colors.append(out.color)
        depths.append(out.depth)
        accs.append(out.acc)
        if keep_weights:
            weights.append(out.weights)
            trans.append(out.transmittance)
    logger.debug('[render] %d rays in %d chunks', n, len(colors))
    empty: Optional[torch.Tensor] = None
    return RadianceOutput(
        color=torch.cat(colors),
        depth=torch.cat(depths),
        weights=torch.cat(weights) if keep_weights else empty,
        acc=torch.cat(accs),
        transmittance=torch.cat(trans) if keep_weights else empty,
    )
