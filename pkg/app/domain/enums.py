from enum import Enum


class LossTerm(str, Enum):
    COLOR = 'color'
    DEPTH = 'depth'
    JACOBIAN = 'jacobian'
    GRAD = 'grad'
    SMOOTH = 'smooth'
    TV = 'tv'


class AblationPreset(str, Enum):
    BASELINE = 'baseline'  # color, depth, jacobian
    GRAD = 'grad'
    GRAD_SMOOTH = 'grad_smooth'
    FULL = 'full'
    NO_DEPTH = 'no_depth'  # full objective without the depth prior


class RenderKind(str, Enum):
    COLOR = 'color'
    DEPTH = 'depth'
