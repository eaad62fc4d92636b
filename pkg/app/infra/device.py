import logging
from functools import lru_cache

import torch

from app.domain.errors import ConfigError
from app.settings import settings

logger = logging.getLogger(__name__)


def configure_determinism(enabled: bool) -> None:
    """Serial, bit-reproducible math: deterministic kernels and one thread."""
    if not enabled:
        return
    torch.use_deterministic_algorithms(True)
    torch.set_num_threads(1)
    torch.backends.cudnn.benchmark = False
    logger.info('[device] deterministic mode on')


@lru_cache(maxsize=1)
def get_device() -> torch.device:
    name = settings.DEVICE or ('cuda' if torch.cuda.is_available() else 'cpu')
    try:
        device = torch.device(name)
    except RuntimeError as exc:
        raise ConfigError(f'unknown DEVICE {name!r}') from exc
    if device.type == 'cuda' and not torch.cuda.is_available():
        raise ConfigError('DEVICE=cuda requested but CUDA is not available')
    return device
