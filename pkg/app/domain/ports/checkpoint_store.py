from typing import Dict, Protocol, Tuple

import torch


class CheckpointStorePort(Protocol):
    """
    A checkpoint is a flat dict of named tensors plus a JSON-serializable
    sidecar describing them (format version, architecture, iteration).
    """

    def save(
        self, location: str, tensors: Dict[str, torch.Tensor], sidecar: dict
    ) -> None:
        pass

    def read_sidecar(self, location: str) -> dict:
        """Raises CheckpointNotFound when nothing is stored at `location`."""
        pass

    def load(self, location: str) -> Tuple[Dict[str, torch.Tensor], dict]:
        pass
