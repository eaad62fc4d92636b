from functools import lru_cache

from fastapi import Depends

from app.domain.errors import ConfigError
from app.domain.ports.checkpoint_store import CheckpointStorePort
from app.infra.device import get_device
from app.infra.stores import get_checkpoint_store
from app.services.checkpoint_service import checkpoint_load
from app.services.evaluation_service import Renderer
from app.settings import settings


def make_renderer(location: str, store: CheckpointStorePort, device=None) -> Renderer:
    ckpt = checkpoint_load(store, location, device=device)
    ckpt.scene.eval()
    return Renderer.from_scene(
        ckpt.scene,
        chunk=settings.RENDER_CHUNK,
        samples=settings.RENDER_SAMPLES,
        device=device,
    )


@lru_cache(maxsize=1)
def get_renderer_singleton() -> Renderer:
    # one frozen checkpoint per process
    if not settings.CHECKPOINT_PATH:
        raise ConfigError('CHECKPOINT_PATH is required by the render service')
    return make_renderer(
        settings.CHECKPOINT_PATH, get_checkpoint_store(), device=get_device()
    )


def get_sidecar(
    store: CheckpointStorePort = Depends(get_checkpoint_store),
) -> dict:
    if not settings.CHECKPOINT_PATH:
        raise ConfigError('CHECKPOINT_PATH is required by the render service')
    return store.read_sidecar(settings.CHECKPOINT_PATH)
