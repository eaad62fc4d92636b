from copy import deepcopy
from typing import Dict

from app.domain.errors import IngestionError
from app.domain.ports.dataset_store import DatasetStorePort
from app.domain.types import RawVideo


class InMemoryDatasetStore(DatasetStorePort):
    """
    Clips keyed by name. Used by tests and in-process pipelines. Not thread-safe.
    """

    def __init__(self):
        self._db: Dict[str, RawVideo] = {}

    def read(self, location: str) -> RawVideo:
        video = self._db.get(location)
        if video is None:
            raise IngestionError(f'no dataset named {location!r}')
        return deepcopy(video)

    def write(self, location: str, video: RawVideo) -> None:
        self._db[location] = deepcopy(video)

    def clear(self) -> None:
        self._db.clear()
