"""Closed-form SE(3) geometry used by the deformation field.

All functions are batched over leading dimensions and differentiable. The
degenerate branches (tiny rotation angle or translation generator) switch to
Taylor limits through a double `torch.where`, so neither the forward values
nor the gradients produce NaN at zero.
"""
from typing import Tuple

import torch

from app.domain.errors import InvalidArgument
from app.domain.ports.fields import DeformationPort
from app.domain.types import DEGENERACY_EPS, RigidTransform, ScrewAxis


def _check_finite(op: str, *tensors: torch.Tensor) -> None:
    for t in tensors:
        if not bool(torch.isfinite(t).all()):
            raise InvalidArgument(f'{op}: input must be finite')


def skew(v: torch.Tensor) -> torch.Tensor:
    """[v]x such that skew(v) @ w == cross(v, w)."""
    x, y, z = v.unbind(-1)
    zero = torch.zeros_like(x)
    return torch.stack(
        (
            torch.stack((zero, -z, y), dim=-1),
            torch.stack((z, zero, -x), dim=-1),
            torch.stack((-y, x, zero), dim=-1),
        ),
        dim=-2,
    )


def _angle(a: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    # zeta is only meaningful where `small` is False
    sq = (a * a).sum(dim=-1)
    small = sq < DEGENERACY_EPS**2
    zeta = torch.sqrt(torch.where(small, torch.ones_like(sq), sq))
    return zeta, small


def _safe_norm(v: torch.Tensor) -> torch.Tensor:
    # zero-gradient at the origin instead of NaN
    sq = (v * v).sum(dim=-1, keepdim=True)
    pos = sq > 0
    return torch.where(pos, torch.sqrt(torch.where(pos, sq, torch.ones_like(sq))), sq)


def _eye_like(m: torch.Tensor) -> torch.Tensor:
    return torch.eye(3, dtype=m.dtype, device=m.device).expand_as(m)


def _exp_so3(a: torch.Tensor) -> torch.Tensor:
    zeta, small = _angle(a)
    A = skew(a / zeta.unsqueeze(-1))
    A2 = A @ A
    eye = _eye_like(A)
    s = torch.sin(zeta)[..., None, None]
    c = torch.cos(zeta)[..., None, None]
    rodrigues = eye + A * s + A2 * (1.0 - c)

    K = skew(a)
    taylor = eye + K + 0.5 * (K @ K)
    return torch.where(small[..., None, None], taylor, rodrigues)


def exp_so3(a: torch.Tensor) -> torch.Tensor:
    """Rodrigues' formula R = I + [A] sin z + [A]^2 (1 - cos z), z = |a|."""
    _check_finite('exp_so3', a)
    return _exp_so3(a)


def _screw_to_transform(s: ScrewAxis) -> RigidTransform:
    a, b = s.a, s.b
    R = _exp_so3(a)
    zeta, small = _angle(a)

    A = skew(a / zeta.unsqueeze(-1))
    eye = _eye_like(A)
    z = zeta[..., None, None]
    G = eye * z + A * (1.0 - torch.cos(z)) + (A @ A) * (z - torch.sin(z))

    if s.unnormalized:
        # v = b / zeta, so p -> b when the rotation vanishes
        v = b / zeta.unsqueeze(-1)
        p_limit = b
    else:
        v = s.b_hat
        p_limit = _safe_norm(a) * v

    p = (G @ v.unsqueeze(-1)).squeeze(-1)
    p = torch.where(small.unsqueeze(-1), p_limit, p)
    return RigidTransform(R=R, p=p)


def screw_to_transform(s: ScrewAxis) -> RigidTransform:
    _check_finite('screw_to_transform', s.a, s.b)
    return _screw_to_transform(s)


def warp_point(x: torch.Tensor, s: ScrewAxis) -> torch.Tensor:
    """x' = R x + p."""
    _check_finite('warp_point', x, s.a, s.b)
    return _screw_to_transform(s).apply(x)


def warp_points(
    x: torch.Tensor, t: float, deformation: DeformationPort
) -> torch.Tensor:
    """Warp observation-space points at time t into the canonical space."""
    return warp_point(x, deformation(x, t))


def jacobian_of(
    warped: torch.Tensor, points: torch.Tensor, *, create_graph: bool = False
) -> torch.Tensor:
    """Per-point 3x3 Jacobian d warped / d points of a pointwise map.

    `points` must require grad and `warped[n]` may depend on `points[n]` only.
    """
    flat_w = warped.reshape(-1, 3)
    rows = [
        torch.autograd.grad(
            flat_w[:, i].sum(),
            points,
            create_graph=create_graph,
            retain_graph=True,
        )[0].reshape(-1, 3)
        for i in range(3)
    ]
    return torch.stack(rows, dim=-2)


def warp_jacobian(
    x: torch.Tensor,
    t: float,
    deformation: DeformationPort,
    *,
    create_graph: bool = False,
) -> torch.Tensor:
    """Exact Jacobian of the full warp, including the screw's dependence on x."""
    single = x.dim() == 1
    with torch.enable_grad():
        pts = x.detach().reshape(-1, 3).requires_grad_(True)
        warped = warp_points(pts, t, deformation)
        J = jacobian_of(warped, pts, create_graph=create_graph)
    return J[0] if single else J


def pose_from_euler(
    yaw: float,
    pitch: float,
    roll: float,
    tx: float = 0.0,
    ty: float = 0.0,
    tz: float = 0.0,
    *,
    degrees: bool = True,
    dtype=None,
) -> RigidTransform:
    """Camera pose R = Ry(yaw) Rx(pitch) Rz(roll), p = (tx, ty, tz)."""
    angles = torch.tensor((yaw, pitch, roll), dtype=dtype or torch.float64)
    if degrees:
        angles = torch.deg2rad(angles)
    axes = torch.eye(3, dtype=angles.dtype)
    Ry = exp_so3(axes[1] * angles[0])
    Rx = exp_so3(axes[0] * angles[1])
    Rz = exp_so3(axes[2] * angles[2])
    p = torch.tensor((tx, ty, tz), dtype=angles.dtype)
    return RigidTransform(R=Ry @ Rx @ Rz, p=p)
