import math

import pytest
import torch

from app.nerf.encoding import PositionalEncoding, encode

pytestmark = pytest.mark.unit


def test_output_dimension():
    enc = PositionalEncoding(3, 10)
    assert enc.output_dim == 63
    assert enc(torch.zeros(5, 3)).shape == (5, 63)
    assert PositionalEncoding(1, 6, include_input=False).output_dim == 12


def test_layout_is_grouped_per_frequency(double):
    x = torch.tensor([[0.25]])
    out = encode(x, 2)
    expected = torch.tensor(
        [[0.25, math.sin(math.pi / 4), math.cos(math.pi / 4), 1.0, 0.0]]
    )
    assert torch.allclose(out, expected, atol=1e-12)


def test_zero_frequencies_without_input_is_empty():
    assert encode(torch.ones(4, 3), 0, include_input=False).shape == (4, 0)


def test_batched_leading_dims():
    assert encode(torch.zeros(2, 7, 3), 4).shape == (2, 7, 27)
