from functools import lru_cache

from app.adapters.checkpoints.safetensors_store import SafetensorsCheckpointStore
from app.adapters.dataset.filesystem import FilesystemDatasetStore
from app.domain.ports.checkpoint_store import CheckpointStorePort
from app.domain.ports.dataset_store import DatasetStorePort


@lru_cache(maxsize=1)
def get_dataset_store() -> DatasetStorePort:
    return FilesystemDatasetStore()


@lru_cache(maxsize=1)
def get_checkpoint_store() -> CheckpointStorePort:
    return SafetensorsCheckpointStore()
