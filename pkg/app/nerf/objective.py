"""Loss terms of the training objective.

Every term is a mean over batch elements. Depth-valued inputs are expected in
normalized units (scene depth divided by far - near); `batch_losses` does that
conversion for a rendered training batch.
"""
import logging
from typing import Mapping, Optional

import torch
import torch.nn.functional as F

from app.domain.enums import LossTerm
from app.domain.errors import InvalidArgument, NonFiniteLoss, UndefinedBatch
from app.domain.models import LossWeights
from app.domain.ports.fields import DeformationPort
from app.domain.types import LossReport, RenderResult, SampleBatch
from app.geometry.se3 import jacobian_of, warp_points

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-12
TIME_TOL = 1e-9

_REPORT_FIELDS = {
    LossTerm.COLOR: 'l_color',
    LossTerm.DEPTH: 'l_depth',
    LossTerm.JACOBIAN: 'l_jac',
    LossTerm.GRAD: 'l_grad',
    LossTerm.SMOOTH: 'l_smooth',
    LossTerm.TV: 'l_tv',
}


def _same_shape(op: str, a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise InvalidArgument(
            f'{op}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}'
        )


def _weighted_mean(per_pixel: torch.Tensor, mask_weight: torch.Tensor) -> torch.Tensor:
    w = mask_weight.to(per_pixel.dtype)
    denom = w.sum()
    if not bool(denom > 0):
        raise UndefinedBatch('no unmasked pixel in the batch')
    # where() keeps masked pixels out of the graph even if they hold inf/nan
    return torch.where(w > 0, per_pixel * w, torch.zeros_like(per_pixel)).sum() / denom


def loss_color(
    pred: torch.Tensor, gt: torch.Tensor, mask_weight: torch.Tensor
) -> torch.Tensor:
    """Mean squared color error over unmasked pixels; pred and gt are (N, 3)."""
    _same_shape('loss_color', pred, gt)
    return _weighted_mean(((pred - gt) ** 2).sum(dim=-1), mask_weight)


def loss_depth(
    pred: torch.Tensor,
    gt: torch.Tensor,
    mask_weight: torch.Tensor,
    huber_delta: float,
) -> torch.Tensor:
    _same_shape('loss_depth', pred, gt)
    if not huber_delta > 0:
        raise InvalidArgument('huber_delta must be positive')
    per_pixel = F.huber_loss(pred, gt, reduction='none', delta=huber_delta)
    return _weighted_mean(per_pixel, mask_weight)


def geman_mcclure(r: torch.Tensor, c: float) -> torch.Tensor:
    q = (r / c) ** 2
    return 2.0 * q / (q + 4.0)


def loss_jacobian(jacobians: torch.Tensor, c: float) -> torch.Tensor:
    """Robust penalty on the log singular values of (N, 3, 3) warp Jacobians."""
    if not c > 0:
        raise InvalidArgument('robust scale must be positive')
    if jacobians.shape[-2:] != (3, 3):
        raise InvalidArgument('expected a batch of 3x3 matrices')
    J = jacobians.reshape(-1, 3, 3)
    if J.shape[0] == 0:
        raise UndefinedBatch('no Jacobian in the batch')
    if not bool(torch.isfinite(J).all()):
        raise InvalidArgument('loss_jacobian: non-finite Jacobian')
    sigma = torch.linalg.svdvals(J).clamp_min(SIGMA_FLOOR)
    r = torch.linalg.vector_norm(torch.log(sigma), dim=-1)
    return geman_mcclure(r, c).mean()


def _patch_mask(
    mask: Optional[torch.Tensor], like: torch.Tensor
) -> torch.Tensor:
    if mask is None:
        return torch.ones_like(like)
    _same_shape('patch mask', mask, like)
    return (mask > 0.5).to(like.dtype)


def loss_grad(
    pred_depth: torch.Tensor,
    gt_depth: torch.Tensor,
    mask: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """First-order depth-error gradients on (..., p, p) patches.

    mean |dE/dx| + mean |dE/dy| with E = pred - gt and forward differences;
    a difference touching a masked pixel is dropped.
    """
    _same_shape('loss_grad', pred_depth, gt_depth)
    if pred_depth.dim() < 2 or min(pred_depth.shape[-2:]) < 2:
        raise InvalidArgument('loss_grad needs patches of at least 2x2')
    m = _patch_mask(mask, pred_depth)
    e = pred_depth - gt_depth

    total = e.new_zeros(())
    used = 0
    for dim in (-1, -2):
        n = e.shape[dim] - 1
        diff = (e.narrow(dim, 1, n) - e.narrow(dim, 0, n)).abs()
        valid = m.narrow(dim, 1, n) * m.narrow(dim, 0, n)
        count = valid.sum()
        if bool(count > 0):
            kept = torch.where(valid > 0, diff, torch.zeros_like(diff))
            total = total + kept.sum() / count
            used += 1
    if not used:
        raise UndefinedBatch('loss_grad: no valid neighbouring pixel pair')
    return total


def loss_smooth(
    pred_depth: torch.Tensor,
    laplacian: torch.Tensor,
    mask: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Edge-aware second-order smoothness on (..., p, p) depth patches.

    Evaluated on the interior pixels, where the 3-point stencils fit, and
    weighted by exp(-|laplacian of the color image|).
    """
    _same_shape('loss_smooth', pred_depth, laplacian)
    if pred_depth.dim() < 2 or min(pred_depth.shape[-2:]) < 3:
        raise InvalidArgument('loss_smooth needs patches of at least 3x3')
    m = _patch_mask(mask, pred_depth)
    d = pred_depth

    c = d[..., 1:-1, 1:-1]
    dxx = d[..., 1:-1, 2:] - 2 * c + d[..., 1:-1, :-2]
    dyy = d[..., 2:, 1:-1] - 2 * c + d[..., :-2, 1:-1]
    dxy = d[..., 2:, 2:] - d[..., 2:, 1:-1] - d[..., 1:-1, 2:] + c
    penalty = dxx.abs() + dxy.abs() + dyy.abs()
    weight = torch.exp(-laplacian[..., 1:-1, 1:-1].abs())

    # every stencil reads the 3x3 neighbourhood of its center
    h, w = m.shape[-2:]
    valid = torch.ones_like(c)
    for i in range(3):
        for j in range(3):
            valid = valid * m[..., i : h - 2 + i, j : w - 2 + j]
    count = valid.sum()
    if not bool(count > 0):
        raise UndefinedBatch('loss_smooth: no fully unmasked stencil')
    term = weight * penalty
    return torch.where(valid > 0, term, torch.zeros_like(term)).sum() / count


def loss_tv(
    deformation: DeformationPort,
    query_points: torch.Tensor,
    t: float,
    dt: float,
    *,
    current: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Squared displacement of warped query points between adjacent time instants.

    A neighbour outside [0, 1] is left out, so edge frames use one sum only.
    `current` may carry the warp at t when the caller already has it.
    """
    if not dt > 0:
        raise InvalidArgument('dt must be positive')
    pts = query_points.reshape(-1, 3)
    if pts.shape[0] == 0:
        raise UndefinedBatch('loss_tv: no query point')
    if current is None:
        here = warp_points(pts, t, deformation)
    else:
        here = current.reshape(-1, 3)

    total = pts.new_zeros(())
    for other in (t - dt, t + dt):
        if other < -TIME_TOL or other > 1.0 + TIME_TOL:
            continue
        there = warp_points(pts, min(max(other, 0.0), 1.0), deformation)
        total = total + ((here - there) ** 2).sum(dim=-1).mean()
    return total


def total_loss(
    values: Mapping[LossTerm, torch.Tensor], weights: LossWeights
) -> LossReport:
    """Weighted sum of the six terms; absent terms count as zero.

    Terms whose weight is zero are reported but never enter the sum.
    """
    terms = {}
    for term in LossTerm:
        value = values.get(term)
        if value is None:
            value = torch.zeros(())
        if not bool(torch.isfinite(value).all()):
            raise NonFiniteLoss(
                f'loss term {term.value} is not finite', term=term.value
            )
        terms[term] = value

    total = terms[LossTerm.COLOR]
    for term in LossTerm:
        if term == LossTerm.COLOR:
            continue
        w = weights.weight(term)
        if w:
            total = total + w * terms[term]

    fields = {_REPORT_FIELDS[k]: v for k, v in terms.items()}
    return LossReport(total=total, **fields)


def batch_losses(
    batch: SampleBatch,
    result: RenderResult,
    deformation: DeformationPort,
    weights: LossWeights,
    *,
    near: float,
    far: float,
    dt: float,
    huber_delta: float,
    robust_scale: float,
) -> LossReport:
    """All six terms for one rendered training batch.

    `result` must come from `render_rays(..., track_points=True)`; its samples
    double as Jacobian and temporal query points.
    """
    if not result.points.requires_grad:
        raise InvalidArgument('batch_losses needs tracked sample points')
    out = result.output
    span = far - near
    pred_d = out.depth / span
    gt_d = batch.gt_depth.to(pred_d.dtype) / span
    mask = batch.mask_weight

    values = {
        LossTerm.COLOR: loss_color(out.color, batch.gt_color.to(out.color.dtype), mask),
        LossTerm.DEPTH: loss_depth(pred_d, gt_d, mask, huber_delta),
    }

    train_jac = weights.weight(LossTerm.JACOBIAN) > 0
    J = jacobian_of(result.warped, result.points, create_graph=train_jac)
    values[LossTerm.JACOBIAN] = loss_jacobian(
        J if train_jac else J.detach(), robust_scale
    )

    mask_p = batch.as_patches(mask)
    pred_p = batch.as_patches(pred_d)
    values[LossTerm.GRAD] = loss_grad(pred_p, batch.as_patches(gt_d), mask_p)
    values[LossTerm.SMOOTH] = loss_smooth(
        pred_p, batch.as_patches(batch.laplacian.to(pred_d.dtype)), mask_p
    )

    queries = result.points.detach()
    if weights.weight(LossTerm.TV) > 0:
        values[LossTerm.TV] = loss_tv(
            deformation, queries, batch.rays.t, dt, current=result.warped
        )
    else:
        with torch.no_grad():
            values[LossTerm.TV] = loss_tv(deformation, queries, batch.rays.t, dt)

    return total_loss(values, weights)
