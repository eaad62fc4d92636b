import json
import logging
from pathlib import Path

import torch
from pydantic import ValidationError

from app.domain.errors import DatasetValidationError, IngestionError
from app.domain.models import DatasetMeta
from app.domain.ports.dataset_store import DatasetStorePort
from app.domain.types import RawVideo
from app.utils.images import read_mask, read_rgb, write_mask, write_rgb
from app.utils.pfm import read_pfm, write_pfm

logger = logging.getLogger(__name__)

META = 'meta.json'
FRAME_FMT = 'frames/{:06d}.png'
MASK_FMT = 'masks/{:06d}.png'
DEPTH_FMT = 'depth/{:06d}.pfm'


class FilesystemDatasetStore(DatasetStorePort):
    """
    Directory layout:
        meta.json            intrinsics, near/far, frame_count
        frames/%06d.png      8-bit RGB
        masks/%06d.png       8-bit, 255 = tissue, 0 = tool
        depth/%06d.pfm       float32 relative depth
    """

    def read(self, location: str) -> RawVideo:
        root = Path(location)
        meta_path = root / META
        if not meta_path.is_file():
            raise IngestionError(f'missing file: {meta_path}')
        try:
            meta = DatasetMeta.model_validate(json.loads(meta_path.read_text()))
        except (ValueError, ValidationError) as exc:
            raise IngestionError(f'invalid metadata {meta_path}: {exc}') from exc

        # check every path up front so the error names the first missing file
        for i in range(meta.frame_count):
            for fmt in (FRAME_FMT, MASK_FMT, DEPTH_FMT):
                p = root / fmt.format(i)
                if not p.is_file():
                    raise IngestionError(f'missing file: {p}')

        video = RawVideo(camera=meta.camera)
        expected = (meta.height, meta.width)
        for i in range(meta.frame_count):
            image = read_rgb(root / FRAME_FMT.format(i))
            mask = read_mask(root / MASK_FMT.format(i))
            depth = torch.from_numpy(read_pfm(root / DEPTH_FMT.format(i)).copy())
            for name, arr in (('frame', image), ('mask', mask), ('depth', depth)):
                flat = name != 'depth' or arr.dim() == 2
                if tuple(arr.shape[:2]) != expected or not flat:
                    raise DatasetValidationError(
                        f'{name} {i} has shape {tuple(arr.shape)}, expected {expected}'
                    )
            video.images.append(image)
            video.masks.append(mask)
            video.depths.append(depth)
        logger.info('[dataset] read %d frames from %s', len(video), root)
        return video

    def write(self, location: str, video: RawVideo) -> None:
        root = Path(location)
        for sub in ('frames', 'masks', 'depth'):
            (root / sub).mkdir(parents=True, exist_ok=True)
        meta = DatasetMeta.from_camera(video.camera, frame_count=len(video))
        (root / META).write_text(json.dumps(meta.model_dump(), indent=2) + '\n')
        for i in range(len(video)):
            write_rgb(root / FRAME_FMT.format(i), video.images[i])
            write_mask(root / MASK_FMT.format(i), video.masks[i])
            write_pfm(root / DEPTH_FMT.format(i), video.depths[i].cpu().numpy())
        logger.info('[dataset] wrote %d frames to %s', len(video), root)
