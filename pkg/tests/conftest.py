# conftest.py
import os

import pytest
import torch
from dotenv import load_dotenv

load_dotenv()


@pytest.fixture(autouse=True, scope='session')
def _set_global_env():
    os.environ.setdefault('DETERMINISTIC', 'true')
    yield


@pytest.fixture()
def double():
    """float64 as default dtype for oracle comparisons."""
    previous = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    try:
        yield torch.float64
    finally:
        torch.set_default_dtype(previous)


@pytest.fixture()
def camera():
    from app.domain.models import PinholeCamera

    return PinholeCamera(
        fx=20.0, fy=20.0, cx=8.0, cy=8.0, width=16, height=16, near=1.0, far=3.0
    )


@pytest.fixture()
def tiny_spec():
    from app.domain.models import FieldSpec

    return FieldSpec(
        deform_depth=3,
        deform_width=16,
        deform_skips=(2,),
        deform_init_scale=1e-2,
        canonical_depth=3,
        canonical_width=16,
        canonical_skips=(2,),
        color_width=8,
        position_freqs=2,
        direction_freqs=1,
        time_freqs=2,
    )


@pytest.fixture()
def tiny_scene(tiny_spec, camera):
    from app.nerf.fields import DynamicScene

    torch.manual_seed(0)
    return DynamicScene(tiny_spec, camera)


@pytest.fixture()
def synthetic_spec(camera):
    from app.domain.models import BlobSpec, SyntheticScene

    return SyntheticScene(
        camera=camera,
        frame_count=4,
        blobs=[
            BlobSpec(
                center=(0.0, 0.0, 2.0),
                radius=0.25,
                color=(0.9, 0.3, 0.2),
                density=40.0,
                translation_amplitude=(0.1, 0.0, 0.0),
            ),
            BlobSpec(
                center=(0.3, -0.2, 2.4),
                radius=0.2,
                color=(0.2, 0.7, 0.4),
                rotation_amplitude=(0.0, 0.3, 0.0),
            ),
        ],
        seed=3,
        quadrature_steps=128,
    )


@pytest.fixture()
def tiny_config(tiny_spec):
    from app.domain.models import TrainConfig

    return TrainConfig(
        rays_per_batch=36,
        patch_size=3,
        samples_per_ray=8,
        iterations=4,
        checkpoint_every=2,
        fields=tiny_spec,
    )


@pytest.fixture()
def tiny_dataset(synthetic_spec):
    from app.services.dataset_service import frames_from_video, prepare
    from app.services.synthetic_service import synthesize

    video = synthesize(synthetic_spec)
    return prepare(frames_from_video(video), video.camera)
