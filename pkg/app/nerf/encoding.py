import math

import torch
from torch import nn


def encode(x: torch.Tensor, n_freqs: int, include_input: bool = True) -> torch.Tensor:
    """Frequency encoding (x, sin 2^j pi x, cos 2^j pi x) for j < n_freqs.

    Features are grouped per frequency: [x, sin(f0 x), cos(f0 x), sin(f1 x), ...],
    each block holding every input component.
    """
    parts = [x] if include_input else []
    for j in range(n_freqs):
        arg = (2.0**j) * math.pi * x
        parts.append(torch.sin(arg))
        parts.append(torch.cos(arg))
    if not parts:
        return x[..., :0]
    return torch.cat(parts, dim=-1)


class PositionalEncoding(nn.Module):
    def __init__(self, in_dim: int, n_freqs: int, include_input: bool = True):
        super().__init__()
        self.in_dim = in_dim
        self.n_freqs = n_freqs
        self.include_input = include_input

    @property
    def output_dim(self) -> int:
        return self.in_dim * (2 * self.n_freqs + int(self.include_input))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return encode(x, self.n_freqs, self.include_input)

    def extra_repr(self) -> str:
        return f'in_dim={self.in_dim}, n_freqs={self.n_freqs}'
