from copy import deepcopy
from typing import Dict, Tuple

import torch

from app.domain.errors import CheckpointNotFound
from app.domain.ports.checkpoint_store import CheckpointStorePort


class InMemoryCheckpointStore(CheckpointStorePort):
    """Checkpoints keyed by location, cloned on the way in and out."""

    def __init__(self):
        self._db: Dict[str, Tuple[Dict[str, torch.Tensor], dict]] = {}

    def save(
        self, location: str, tensors: Dict[str, torch.Tensor], sidecar: dict
    ) -> None:
        copied = {k: v.detach().cpu().clone() for k, v in tensors.items()}
        self._db[location] = (copied, deepcopy(sidecar))

    def read_sidecar(self, location: str) -> dict:
        if location not in self._db:
            raise CheckpointNotFound(f'no checkpoint at {location}')
        return deepcopy(self._db[location][1])

    def load(self, location: str) -> Tuple[Dict[str, torch.Tensor], dict]:
        sidecar = self.read_sidecar(location)
        tensors = {k: v.clone() for k, v in self._db[location][0].items()}
        return tensors, sidecar

    def exists(self, location: str) -> bool:
        return location in self._db
