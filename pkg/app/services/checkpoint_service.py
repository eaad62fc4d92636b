"""Checkpoint (de)serialization of a DynamicScene and its Adam state.

Tensors go to the store under `field.<name>` and `optim.<param>.<slot>`; the
sidecar records everything needed to rebuild the modules before copying.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import torch

from app.domain.errors import CheckpointIncompatible
from app.domain.models import FieldSpec, PinholeCamera, TrainConfig
from app.domain.ports.checkpoint_store import CheckpointStorePort
from app.nerf.fields import DynamicScene

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
FIELD_PREFIX = 'field.'
OPTIM_PREFIX = 'optim.'


@dataclass
class Checkpoint:
    scene: DynamicScene
    iteration: int
    sidecar: dict
    optimizer_state: Optional[dict] = None


def _optimizer_tensors(optimizer: torch.optim.Optimizer) -> Dict[str, torch.Tensor]:
    out = {}
    for idx, slots in optimizer.state_dict()['state'].items():
        for name, value in slots.items():
            out[f'{OPTIM_PREFIX}{idx}.{name}'] = torch.as_tensor(value)
    return out


def _param_groups(optimizer: torch.optim.Optimizer) -> list:
    groups = []
    for g in optimizer.state_dict()['param_groups']:
        groups.append({k: list(v) if isinstance(v, tuple) else v for k, v in g.items()})
    return groups


def build_sidecar(
    scene: DynamicScene,
    iteration: int,
    optimizer: Optional[torch.optim.Optimizer] = None,
    config: Optional[TrainConfig] = None,
) -> dict:
    lo, hi = scene.box.bounds()
    return {
        'format_version': FORMAT_VERSION,
        'iteration': iteration,
        'fields': scene.spec.model_dump(mode='json'),
        'camera': scene.camera.model_dump(mode='json'),
        'scene_box': {'lo': list(lo), 'hi': list(hi)},
        'optimizer': (
            {'param_groups': _param_groups(optimizer)}
            if optimizer is not None
            else None
        ),
        'config': config.model_dump(mode='json') if config is not None else None,
    }


def checkpoint_save(
    store: CheckpointStorePort,
    location: str,
    scene: DynamicScene,
    iteration: int,
    optimizer: Optional[torch.optim.Optimizer] = None,
    config: Optional[TrainConfig] = None,
) -> None:
    tensors = {FIELD_PREFIX + k: v for k, v in scene.state_dict().items()}
    if optimizer is not None:
        tensors.update(_optimizer_tensors(optimizer))
    store.save(location, tensors, build_sidecar(scene, iteration, optimizer, config))
    logger.info('[checkpoint] iteration=%d -> %s', iteration, location)


def _restore_optimizer_state(
    tensors: Dict[str, torch.Tensor], sidecar: dict
) -> Optional[dict]:
    meta = sidecar.get('optimizer')
    if meta is None:
        return None
    state: Dict[int, dict] = {}
    for key, value in tensors.items():
        if not key.startswith(OPTIM_PREFIX):
            continue
        idx, name = key[len(OPTIM_PREFIX) :].split('.', 1)
        state.setdefault(int(idx), {})[name] = value
    groups = []
    for g in meta['param_groups']:
        g = dict(g)
        if 'betas' in g:
            g['betas'] = tuple(g['betas'])
        groups.append(g)
    return {'state': state, 'param_groups': groups}


def checkpoint_load(
    store: CheckpointStorePort,
    location: str,
    *,
    spec: Optional[FieldSpec] = None,
    device=None,
) -> Checkpoint:
    """Rebuild the scene described by the sidecar and copy the stored tensors.

    Every check (format version, requested architecture, tensor names and
    shapes) runs before a single parameter is copied.
    """
    sidecar = store.read_sidecar(location)
    if sidecar.get('format_version') != FORMAT_VERSION:
        raise CheckpointIncompatible(
            f'checkpoint format {sidecar.get("format_version")} is not {FORMAT_VERSION}'
        )
    stored_spec = FieldSpec.model_validate(sidecar['fields'])
    if spec is not None and spec != stored_spec:
        raise CheckpointIncompatible(
            'checkpoint architecture differs from the requested one'
        )
    camera = PinholeCamera.model_validate(sidecar['camera'])

    tensors, sidecar = store.load(location)
    scene = DynamicScene(stored_spec, camera)
    expected = scene.state_dict()
    stored = {
        k[len(FIELD_PREFIX) :]: v
        for k, v in tensors.items()
        if k.startswith(FIELD_PREFIX)
    }
    if set(stored) != set(expected):
        missing = sorted(set(expected) - set(stored))
        extra = sorted(set(stored) - set(expected))
        raise CheckpointIncompatible(
            f'tensor names differ: missing={missing} extra={extra}'
        )
    for name, value in expected.items():
        if tuple(stored[name].shape) != tuple(value.shape):
            raise CheckpointIncompatible(
                f'{name} has shape {tuple(stored[name].shape)}, '
                f'expected {tuple(value.shape)}'
            )

    scene.load_state_dict(stored)
    if device is not None:
        scene = scene.to(device)
    return Checkpoint(
        scene=scene,
        iteration=int(sidecar['iteration']),
        sidecar=sidecar,
        optimizer_state=_restore_optimizer_state(tensors, sidecar),
    )
