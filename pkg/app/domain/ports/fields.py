from typing import Protocol, Tuple, Union

import torch

from app.domain.types import ScrewAxis

Time = Union[float, torch.Tensor]


class DeformationPort(Protocol):
    """
    Maps observation-space points at a time instant to screw axes.
    Implemented by the learned deformation field and by analytic test motions.
    """

    def __call__(self, x: torch.Tensor, t: Time) -> ScrewAxis:
        """
        x: (..., 3) points in scene units; t: scalar in [0, 1] or a tensor
        broadcastable to x[..., :1].
        """
        pass


class RadiancePort(Protocol):
    """
    Canonical-space radiance: color in [0, 1] and nonnegative density.
    """

    def __call__(
        self, x: torch.Tensor, d: torch.Tensor
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        x: (..., 3) canonical points; d: (..., 3) unit view directions.
        Returns (color (..., 3), density (...)).
        """
        pass
