import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from app.domain.errors import (
    DatasetValidationError,
    InvalidArgument,
    NormalizationError,
)
from app.domain.models import PinholeCamera
from app.domain.ports.dataset_store import DatasetStorePort
from app.domain.types import FrameRecord, RawVideo
from app.utils.images import color_laplacian

logger = logging.getLogger(__name__)

LOW_PERCENTILE = 2.0
HIGH_PERCENTILE = 98.0
DEGENERATE_SPREAD = 1e-9


@dataclass
class Dataset:
    """Ingested clip with depth priors already mapped into [near, far]."""

    frames: List[FrameRecord]
    camera: PinholeCamera

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def near(self) -> float:
        return self.camera.near

    @property
    def far(self) -> float:
        return self.camera.far

    @property
    def dt(self) -> float:
        return 1.0 / len(self.frames)

    def holdout_indices(self, holdout_every: Optional[int]) -> List[int]:
        if not holdout_every:
            return []
        k = holdout_every
        return [i for i in range(len(self.frames)) if i % k == k // 2]

    def training_indices(self, holdout_every: Optional[int]) -> List[int]:
        held = set(self.holdout_indices(holdout_every))
        return [i for i in range(len(self.frames)) if i not in held]


def frames_from_video(video: RawVideo) -> List[FrameRecord]:
    """Validate a raw clip and turn it into time-stamped frame records (t_i = i/I)."""
    n = len(video)
    if n < 1:
        raise DatasetValidationError('dataset holds no frame')
    if not (len(video.masks) == len(video.depths) == n):
        raise DatasetValidationError('frames, masks and depth maps differ in count')

    shape = (video.camera.height, video.camera.width)
    records = []
    for i in range(n):
        image, mask, depth = video.images[i], video.masks[i], video.depths[i]
        for name, arr in (('frame', image), ('mask', mask), ('depth', depth)):
            if tuple(arr.shape[:2]) != shape:
                raise DatasetValidationError(
                    f'{name} {i} has shape {tuple(arr.shape)}, expected {shape}'
                )
        if not bool(torch.isfinite(depth[mask > 0.5]).all()):
            raise DatasetValidationError(f'depth {i} is not finite on tissue pixels')
        records.append(
            FrameRecord(
                index=i,
                image=image,
                mask=mask,
                depth=depth,
                t=i / n,
                laplacian=color_laplacian(image),
            )
        )
    return records


def ingest(
    store: DatasetStorePort, location: str
) -> Tuple[List[FrameRecord], PinholeCamera]:
    video = store.read(location)
    records = frames_from_video(video)
    cam = video.camera
    logger.info(
        '[dataset] ingested %d frames of %dx%d', len(records), cam.width, cam.height
    )
    return records, cam


def normalize_depth(
    depths: Sequence[torch.Tensor],
    masks: Sequence[torch.Tensor],
    near: float,
    far: float,
) -> List[torch.Tensor]:
    """One affine map for the whole clip: unmasked 2nd/98th percentiles -> near/far."""
    if not near < far:
        raise InvalidArgument('normalize_depth needs near < far')
    values = np.concatenate(
        [
            d[m > 0.5].detach().cpu().double().numpy().ravel()
            for d, m in zip(depths, masks)
        ]
    )
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise NormalizationError('no unmasked depth value to normalize')
    lo, hi = np.percentile(values, [LOW_PERCENTILE, HIGH_PERCENTILE])
    if not hi - lo > DEGENERATE_SPREAD * max(1.0, abs(hi)):
        raise NormalizationError(f'degenerate depth: percentiles {lo:.6g} and {hi:.6g}')

    scale = (far - near) / (hi - lo)
    logger.debug('[dataset] depth affine scale=%.6g lo=%.6g hi=%.6g', scale, lo, hi)
    out = []
    for d in depths:
        mapped = near + (d.double() - lo) * scale
        mapped = torch.nan_to_num(mapped, nan=far, posinf=far, neginf=near)
        out.append(mapped.clamp(near, far).to(d.dtype))
    return out


def prepare(
    records: List[FrameRecord],
    camera: PinholeCamera,
    near: Optional[float] = None,
    far: Optional[float] = None,
) -> Dataset:
    """Apply near/far overrides and normalize the depth priors."""
    update = {k: v for k, v in (('near', near), ('far', far)) if v is not None}
    if update:
        camera = PinholeCamera.model_validate({**camera.model_dump(), **update})
    depths = normalize_depth(
        [r.depth for r in records], [r.mask for r in records], camera.near, camera.far
    )
    frames = [
        FrameRecord(
            index=r.index,
            image=r.image,
            mask=r.mask,
            depth=d,
            t=r.t,
            laplacian=r.laplacian,
        )
        for r, d in zip(records, depths)
    ]
    return Dataset(frames=frames, camera=camera)


def load_dataset(
    store: DatasetStorePort,
    location: str,
    near: Optional[float] = None,
    far: Optional[float] = None,
) -> Dataset:
    records, camera = ingest(store, location)
    return prepare(records, camera, near, far)
