from pathlib import Path
from typing import Union

import imageio.v3 as iio
import numpy as np
import torch
import torch.nn.functional as F

from app.domain.errors import IngestionError

PathLike = Union[str, Path]

# 5-point Laplacian stencil
_LAPLACE = torch.tensor([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


def color_laplacian(image: torch.Tensor) -> torch.Tensor:
    """|laplacian| of an (H, W, 3) image, averaged over channels.

    Borders are replicated.
    """
    x = image.permute(2, 0, 1).unsqueeze(1)  # (3, 1, H, W)
    x = F.pad(x, (1, 1, 1, 1), mode='replicate')
    kernel = _LAPLACE.to(dtype=image.dtype, device=image.device).view(1, 1, 3, 3)
    lap = F.conv2d(x, kernel)[:, 0]  # (3, H, W)
    return lap.mean(dim=0).abs()


def to_uint8(image: torch.Tensor) -> np.ndarray:
    arr = image.detach().cpu().clamp(0.0, 1.0).numpy()
    return np.round(arr * 255.0).astype(np.uint8)


def depth_to_uint16(depth: torch.Tensor, near: float, far: float) -> np.ndarray:
    """Map [near, far] onto the full 16-bit range."""
    d = ((depth.detach().cpu().double() - near) / (far - near)).clamp(0.0, 1.0)
    return np.round(d.numpy() * 65535.0).astype(np.uint16)


def _read(path: Path) -> np.ndarray:
    if not path.is_file():
        raise IngestionError(f'missing file: {path}')
    try:
        return iio.imread(path)
    except Exception as exc:
        raise IngestionError(f'cannot decode image {path}: {exc}') from exc


def read_rgb(path: PathLike) -> torch.Tensor:
    """8-bit RGB PNG as float32 (H, W, 3) in [0, 1]."""
    path = Path(path)
    arr = _read(path)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=-1)
    if arr.ndim != 3 or arr.shape[-1] not in (3, 4) or arr.dtype != np.uint8:
        raise IngestionError(f'expected an 8-bit RGB image: {path}')
    return torch.from_numpy(arr[..., :3].astype(np.float32) / 255.0)


def read_mask(path: PathLike) -> torch.Tensor:
    """8-bit mask PNG as float32 (H, W) with values in {0, 1}."""
    path = Path(path)
    arr = _read(path)
    if arr.ndim == 3:
        arr = arr[..., 0]
    return torch.from_numpy((arr > 127).astype(np.float32))


def write_rgb(path: PathLike, image: torch.Tensor) -> None:
    iio.imwrite(Path(path), to_uint8(image))


def write_mask(path: PathLike, mask: torch.Tensor) -> None:
    arr = (mask.detach().cpu().numpy() > 0.5).astype(np.uint8) * 255
    iio.imwrite(Path(path), arr)


def write_depth(path: PathLike, depth: torch.Tensor, near: float, far: float) -> None:
    iio.imwrite(Path(path), depth_to_uint16(depth, near, far))


def encode_png(array: np.ndarray) -> bytes:
    return iio.imwrite('<bytes>', array, extension='.png')
