"""Portable float map codec (single-channel `Pf` and three-channel `PF`).

Rows are stored bottom-to-top; a negative scale marks little-endian data.
"""
import re
from pathlib import Path
from typing import Union

import numpy as np

from app.domain.errors import IngestionError

_DIMS_RX = re.compile(rb'^\s*(\d+)\s+(\d+)\s*$')

PathLike = Union[str, Path]


def _header_line(fh, path: Path) -> bytes:
    line = fh.readline()
    if not line:
        raise IngestionError(f'truncated PFM header: {path}')
    return line.rstrip(b'\r\n')


def read_pfm(path: PathLike) -> np.ndarray:
    """Read a PFM file as float32, (H, W) or (H, W, 3), top row first."""
    path = Path(path)
    with path.open('rb') as fh:
        magic = _header_line(fh, path)
        if magic == b'Pf':
            channels = 1
        elif magic == b'PF':
            channels = 3
        else:
            raise IngestionError(f'not a PFM file: {path}')

        m = _DIMS_RX.match(_header_line(fh, path))
        if not m:
            raise IngestionError(f'malformed PFM dimensions: {path}')
        width, height = int(m.group(1)), int(m.group(2))

        try:
            scale = float(_header_line(fh, path))
        except ValueError as exc:
            raise IngestionError(f'malformed PFM scale: {path}') from exc
        dtype = np.dtype('<f4') if scale < 0 else np.dtype('>f4')

        count = width * height * channels
        payload = fh.read(count * 4)
    if len(payload) != count * 4:
        raise IngestionError(f'truncated PFM data: {path}')
    data = np.frombuffer(payload, dtype=dtype)

    shape = (height, width) if channels == 1 else (height, width, 3)
    return np.flipud(data.reshape(shape)).astype(np.float32)


def write_pfm(path: PathLike, array: np.ndarray) -> None:
    """Write (H, W) or (H, W, 3) data as little-endian float32."""
    arr = np.asarray(array, dtype='<f4')
    if arr.ndim == 2:
        magic = b'Pf'
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b'PF'
    else:
        raise ValueError(f'unsupported PFM shape {arr.shape}')
    height, width = arr.shape[:2]
    with Path(path).open('wb') as fh:
        fh.write(magic + b'\n')
        fh.write(b'%d %d\n' % (width, height))
        fh.write(b'-1.0\n')
        fh.write(np.ascontiguousarray(np.flipud(arr)).tobytes())
