import pytest
import torch
from fastapi.testclient import TestClient

from app.adapters.checkpoints.memory import InMemoryCheckpointStore
from app.adapters.logs.ndjson import InMemoryTrainingLog
from app.domain.models import BlobSpec, PinholeCamera, SyntheticScene, TrainConfig
from app.services.checkpoint_service import build_sidecar, checkpoint_load
from app.services.dataset_service import frames_from_video, prepare
from app.services.evaluation_service import Renderer
from app.services.synthetic_service import synthesize
from app.services.training_service import TrainingService

LOCATION = 'run'


@pytest.fixture()
def client(tiny_scene):
    """
    A TestClient serving the tiny scene via FastAPI dependency overrides.
    """
    from app.infra.service import get_renderer_singleton, get_sidecar
    from app.main import app

    renderer = Renderer.from_scene(tiny_scene, samples=16)
    app.dependency_overrides[get_renderer_singleton] = lambda: renderer
    app.dependency_overrides[get_sidecar] = lambda: build_sidecar(tiny_scene, 12)
    try:
        with TestClient(app) as c:
            yield c
    finally:
        app.dependency_overrides.clear()


@pytest.fixture(scope='session')
def scene_camera():
    return PinholeCamera(
        fx=32.0, fy=32.0, cx=16.0, cy=16.0, width=32, height=32, near=1.0, far=3.0
    )


@pytest.fixture(scope='session')
def deforming_spec(scene_camera):
    """Three blobs under sinusoidal screws, sixteen frames."""
    return SyntheticScene(
        camera=scene_camera,
        frame_count=16,
        blobs=[
            BlobSpec(
                center=(0.0, 0.0, 2.2),
                radius=0.35,
                color=(0.85, 0.35, 0.3),
                density=30.0,
                translation_amplitude=(0.1, 0.0, 0.0),
            ),
            BlobSpec(
                center=(-0.4, 0.3, 2.0),
                radius=0.2,
                color=(0.9, 0.75, 0.6),
                rotation_amplitude=(0.0, 0.0, 0.4),
                translation_amplitude=(0.0, 0.05, 0.0),
            ),
            BlobSpec(
                center=(0.4, -0.3, 2.5),
                radius=0.25,
                color=(0.6, 0.2, 0.25),
                translation_amplitude=(0.0, 0.0, 0.1),
                frequency=0.5,
            ),
        ],
        seed=7,
    )


@pytest.fixture(scope='session')
def deforming_dataset(deforming_spec):
    video = synthesize(deforming_spec)
    return prepare(frames_from_video(video), video.camera)


def train(config: TrainConfig, dataset):
    """Run one deterministic training; returns (renderer, log)."""
    torch.set_num_threads(1)
    store, log = InMemoryCheckpointStore(), InMemoryTrainingLog()
    TrainingService(
        config,
        dataset,
        checkpoints=store,
        log=log,
        location=LOCATION,
        deterministic=True,
    ).train()
    scene = checkpoint_load(store, LOCATION).scene.eval()
    return Renderer.from_scene(scene, samples=128), log
