import json
import logging
import os
from pathlib import Path
from typing import Dict, Tuple

import torch
from safetensors import SafetensorError, safe_open
from safetensors.torch import save_file

from app.domain.errors import CheckpointIncompatible, CheckpointNotFound
from app.domain.ports.checkpoint_store import CheckpointStorePort

logger = logging.getLogger(__name__)

BLOB_NAME = 'checkpoint.safetensors'
# copied into the blob header so a blob can be matched with its sidecar
_LINK_KEYS = ('format_version', 'iteration')
# one header key: safetensors does not keep metadata key order
_LINK_FIELD = 'link'


def _link(sidecar: dict) -> str:
    return json.dumps(
        {k: sidecar[k] for k in _LINK_KEYS if k in sidecar}, sort_keys=True
    )


def resolve(location: str) -> Tuple[Path, Path]:
    """Blob and sidecar paths; a directory means its checkpoint.safetensors."""
    path = Path(location)
    if path.is_dir() or not path.suffix:
        path = path / BLOB_NAME
    return path, path.with_suffix('.json')


class SafetensorsCheckpointStore(CheckpointStorePort):
    def save(
        self, location: str, tensors: Dict[str, torch.Tensor], sidecar: dict
    ) -> None:
        blob, side = resolve(location)
        blob.parent.mkdir(parents=True, exist_ok=True)
        payload = {k: v.detach().cpu().contiguous().clone() for k, v in tensors.items()}
        metadata = {_LINK_FIELD: _link(sidecar)}

        tmp_blob = blob.with_name(blob.name + '.tmp')
        tmp_side = side.with_name(side.name + '.tmp')
        save_file(payload, str(tmp_blob), metadata=metadata)
        tmp_side.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + '\n')
        os.replace(tmp_blob, blob)
        os.replace(tmp_side, side)
        logger.info('[checkpoint] saved %s (%d tensors)', blob, len(payload))

    def read_sidecar(self, location: str) -> dict:
        blob, side = resolve(location)
        if not blob.is_file() or not side.is_file():
            raise CheckpointNotFound(f'no checkpoint at {blob}')
        try:
            return json.loads(side.read_text())
        except ValueError as exc:
            raise CheckpointIncompatible(f'unreadable sidecar {side}: {exc}') from exc

    def load(self, location: str) -> Tuple[Dict[str, torch.Tensor], dict]:
        sidecar = self.read_sidecar(location)
        blob, _ = resolve(location)
        try:
            with safe_open(str(blob), framework='pt') as fh:
                metadata = fh.metadata() or {}
                tensors = {k: fh.get_tensor(k) for k in fh.keys()}
        except SafetensorError as exc:
            raise CheckpointIncompatible(f'unreadable blob {blob}: {exc}') from exc
        try:
            stored = json.loads(metadata.get(_LINK_FIELD, '{}'))
        except ValueError as exc:
            raise CheckpointIncompatible(f'unreadable header of {blob}: {exc}') from exc
        for key in _LINK_KEYS:
            if key in sidecar and stored.get(key) != sidecar[key]:
                raise CheckpointIncompatible(
                    f'{key} differs between blob ({stored.get(key)}) '
                    f'and sidecar ({sidecar[key]})'
                )
        return tensors, sidecar
