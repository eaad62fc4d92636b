import json
import re

import numpy as np
import pytest
import torch

from app.adapters.dataset.filesystem import DEPTH_FMT, MASK_FMT, FilesystemDatasetStore
from app.adapters.dataset.memory import InMemoryDatasetStore
from app.domain.errors import (
    DatasetValidationError,
    IngestionError,
    InvalidArgument,
    NormalizationError,
)
from app.domain.models import PinholeCamera
from app.domain.types import RawVideo
from app.services.dataset_service import (
    Dataset,
    frames_from_video,
    load_dataset,
    normalize_depth,
)

pytestmark = pytest.mark.unit


@pytest.fixture()
def small_camera():
    return PinholeCamera(
        fx=10.0, fy=10.0, cx=4.0, cy=3.0, width=8, height=6, near=0.5, far=2.5
    )


def _video(camera, n=3, seed=0):
    gen = torch.Generator().manual_seed(seed)
    video = RawVideo(camera=camera)
    for _ in range(n):
        video.images.append(
            torch.randint(0, 256, (6, 8, 3), generator=gen).float() / 255.0
        )
        mask = torch.ones(6, 8)
        mask[:2, :2] = 0.0
        video.masks.append(mask)
        video.depths.append(torch.rand(6, 8, generator=gen) * 10 + 1)
    return video


def test_filesystem_round_trip(tmp_path, small_camera):
    video = _video(small_camera)
    store = FilesystemDatasetStore()
    store.write(str(tmp_path), video)

    meta = json.loads((tmp_path / 'meta.json').read_text())
    assert meta['frame_count'] == 3 and meta['width'] == 8

    back = store.read(str(tmp_path))
    assert back.camera == small_camera
    assert len(back) == 3
    for a, b in zip(video.images, back.images):
        assert torch.allclose(a, b, atol=1e-6)
    for a, b in zip(video.masks, back.masks):
        assert torch.equal(a, b)
    for a, b in zip(video.depths, back.depths):
        assert torch.equal(a, b)


def test_missing_mask_names_its_path(tmp_path, small_camera):
    store = FilesystemDatasetStore()
    store.write(str(tmp_path), _video(small_camera))
    missing = tmp_path / MASK_FMT.format(1)
    missing.unlink()
    with pytest.raises(IngestionError, match=re.escape(str(missing))):
        store.read(str(tmp_path))


def test_missing_metadata(tmp_path):
    with pytest.raises(IngestionError, match='meta.json'):
        FilesystemDatasetStore().read(str(tmp_path))


def test_depth_of_wrong_shape_is_rejected(tmp_path, small_camera):
    from app.utils.pfm import write_pfm

    store = FilesystemDatasetStore()
    store.write(str(tmp_path), _video(small_camera))
    write_pfm(tmp_path / DEPTH_FMT.format(2), np.zeros((5, 8), dtype=np.float32))
    with pytest.raises(DatasetValidationError, match='depth 2'):
        store.read(str(tmp_path))


def test_frames_are_time_stamped(small_camera):
    records = frames_from_video(_video(small_camera, n=4))
    assert [r.t for r in records] == [0.0, 0.25, 0.5, 0.75]
    assert [r.index for r in records] == [0, 1, 2, 3]
    assert records[0].laplacian.shape == (6, 8)


def test_single_frame_clip_is_allowed(small_camera):
    records = frames_from_video(_video(small_camera, n=1))
    assert records[0].t == 0.0


def test_empty_clip_is_rejected(small_camera):
    with pytest.raises(DatasetValidationError):
        frames_from_video(RawVideo(camera=small_camera))


def test_count_mismatch_is_rejected(small_camera):
    video = _video(small_camera)
    video.masks.pop()
    with pytest.raises(DatasetValidationError, match='count'):
        frames_from_video(video)


def test_non_finite_tissue_depth_is_rejected(small_camera):
    video = _video(small_camera)
    video.depths[1][4, 4] = float('nan')
    with pytest.raises(DatasetValidationError, match='depth 1'):
        frames_from_video(video)


def test_non_finite_depth_under_the_tool_is_accepted(small_camera):
    video = _video(small_camera)
    video.depths[1][0, 0] = float('inf')
    frames_from_video(video)


def test_normalized_percentiles_hit_the_bounds():
    gen = torch.Generator().manual_seed(4)
    depths = [
        torch.rand(20, 20, generator=gen, dtype=torch.float64) * 7 for _ in range(3)
    ]
    masks = [torch.ones(20, 20) for _ in range(3)]
    out = normalize_depth(depths, masks, 1.0, 3.0)

    raw = np.concatenate([d.numpy().ravel() for d in depths])
    lo, hi = np.percentile(raw, [2.0, 98.0])
    for d, o in zip(depths, out):
        expected = np.clip(1.0 + (d.numpy() - lo) * 2.0 / (hi - lo), 1.0, 3.0)
        assert np.allclose(o.numpy(), expected, atol=1e-12)
    assert float(min(o.min() for o in out)) == 1.0
    assert float(max(o.max() for o in out)) == 3.0


def test_normalization_ignores_affine_changes_of_the_input():
    gen = torch.Generator().manual_seed(5)
    depths = [torch.rand(10, 10, generator=gen, dtype=torch.float64) for _ in range(2)]
    masks = [torch.ones(10, 10) for _ in range(2)]
    a = normalize_depth(depths, masks, 1.0, 3.0)
    b = normalize_depth([4.0 * d + 9.0 for d in depths], masks, 1.0, 3.0)
    for x, y in zip(a, b):
        assert torch.allclose(x, y, atol=1e-9)


def test_normalization_uses_tissue_pixels_only():
    depth = torch.linspace(0, 1, 100, dtype=torch.float64).reshape(10, 10)
    mask = torch.ones(10, 10)
    spoiled = depth.clone()
    spoiled[0, :] = 1e6
    mask[0, :] = 0
    ref = normalize_depth([depth[1:]], [mask[1:]], 1.0, 3.0)[0]
    got = normalize_depth([spoiled], [mask], 1.0, 3.0)[0]
    assert torch.allclose(got[1:], ref)
    assert torch.equal(got[0], torch.full((10,), 3.0, dtype=torch.float64))


def test_flat_depth_cannot_be_normalized():
    with pytest.raises(NormalizationError):
        normalize_depth([torch.ones(4, 4)], [torch.ones(4, 4)], 1.0, 3.0)


def test_fully_masked_clip_cannot_be_normalized():
    with pytest.raises(NormalizationError):
        normalize_depth([torch.rand(4, 4)], [torch.zeros(4, 4)], 1.0, 3.0)


def test_normalization_needs_ordered_bounds():
    with pytest.raises(InvalidArgument):
        normalize_depth([torch.rand(4, 4)], [torch.ones(4, 4)], 3.0, 1.0)


def test_load_dataset_applies_bound_overrides(small_camera):
    store = InMemoryDatasetStore()
    store.write('clip', _video(small_camera))
    ds = load_dataset(store, 'clip', near=1.0, far=4.0)
    assert (ds.near, ds.far) == (1.0, 4.0)
    for f in ds.frames:
        assert float(f.depth.min()) >= 1.0 and float(f.depth.max()) <= 4.0
    assert ds.dt == pytest.approx(1 / 3)


def test_unknown_memory_dataset():
    with pytest.raises(IngestionError):
        InMemoryDatasetStore().read('nope')


def test_holdout_split(small_camera):
    frames = frames_from_video(_video(small_camera, n=16))
    ds = Dataset(frames=frames, camera=small_camera)
    assert ds.holdout_indices(8) == [4, 12]
    assert 4 not in ds.training_indices(8)
    assert len(ds.training_indices(8)) == 14
    assert ds.holdout_indices(None) == []
    assert ds.training_indices(None) == list(range(16))
