from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

PathLike = Union[str, Path]


def write_ply(
    path: PathLike, points: np.ndarray, colors: Optional[np.ndarray] = None
) -> None:
    """ASCII PLY with float xyz and optional uchar rgb per vertex."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cols = None
    if colors is not None:
        cols = np.asarray(colors, dtype=np.uint8).reshape(-1, 3)
        if cols.shape[0] != pts.shape[0]:
            raise ValueError('points and colors differ in length')

    header = ['ply', 'format ascii 1.0', f'element vertex {pts.shape[0]}']
    header += ['property float x', 'property float y', 'property float z']
    if cols is not None:
        header += [
            'property uchar red',
            'property uchar green',
            'property uchar blue',
        ]
    header.append('end_header')

    with Path(path).open('w', encoding='ascii') as fh:
        fh.write('\n'.join(header) + '\n')
        for i, p in enumerate(pts):
            line = f'{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}'
            if cols is not None:
                c = cols[i]
                line += f' {c[0]} {c[1]} {c[2]}'
            fh.write(line + '\n')


def read_ply(path: PathLike) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Read back what `write_ply` produces."""
    with Path(path).open('r', encoding='ascii') as fh:
        if fh.readline().strip() != 'ply':
            raise ValueError(f'not a PLY file: {path}')
        n = 0
        props = []
        for line in fh:
            line = line.strip()
            if line.startswith('element vertex'):
                n = int(line.split()[-1])
            elif line.startswith('property'):
                props.append(line.split()[-1])
            elif line == 'end_header':
                break
        rows = [fh.readline().split() for _ in range(n)]

    data = np.array(rows, dtype=np.float64).reshape(n, len(props))
    pts = data[:, :3]
    cols = data[:, 3:6].astype(np.uint8) if len(props) >= 6 else None
    return pts, cols
