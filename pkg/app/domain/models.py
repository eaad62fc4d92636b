from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from app.domain.enums import AblationPreset, LossTerm
from app.domain.errors import ConfigError

Vec3 = Tuple[float, float, float]


class PinholeCamera(BaseModel):
    fx: float
    fy: float
    cx: float
    cy: float
    width: int = Field(gt=0)
    height: int = Field(gt=0)
    near: float
    far: float

    @model_validator(mode='after')
    def _check(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigError('focal lengths must be positive')
        if not 0 < self.near < self.far:
            raise ConfigError('camera bounds must satisfy 0 < near < far')
        return self

    def frustum_bounds(self) -> Tuple[Vec3, Vec3]:
        """Axis-aligned box enclosing the viewing frustum between near and far."""
        xs, ys = [], []
        for z in (self.near, self.far):
            for col in (0.0, float(self.width)):
                xs.append((col - self.cx) / self.fx * z)
            for row in (0.0, float(self.height)):
                ys.append((row - self.cy) / self.fy * z)
        lo = (min(xs), min(ys), self.near)
        hi = (max(xs), max(ys), self.far)
        return lo, hi


class DatasetMeta(BaseModel):
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float
    far: float
    frame_count: int = Field(ge=1)

    @property
    def camera(self) -> PinholeCamera:
        return PinholeCamera(
            fx=self.fx,
            fy=self.fy,
            cx=self.cx,
            cy=self.cy,
            width=self.width,
            height=self.height,
            near=self.near,
            far=self.far,
        )

    @classmethod
    def from_camera(cls, camera: PinholeCamera, frame_count: int) -> 'DatasetMeta':
        return cls(**camera.model_dump(), frame_count=frame_count)


_PRESET_TERMS = {
    AblationPreset.BASELINE: (LossTerm.DEPTH, LossTerm.JACOBIAN),
    AblationPreset.GRAD: (LossTerm.DEPTH, LossTerm.JACOBIAN, LossTerm.GRAD),
    AblationPreset.GRAD_SMOOTH: (
        LossTerm.DEPTH,
        LossTerm.JACOBIAN,
        LossTerm.GRAD,
        LossTerm.SMOOTH,
    ),
    AblationPreset.FULL: (
        LossTerm.DEPTH,
        LossTerm.JACOBIAN,
        LossTerm.GRAD,
        LossTerm.SMOOTH,
        LossTerm.TV,
    ),
    AblationPreset.NO_DEPTH: (
        LossTerm.JACOBIAN,
        LossTerm.GRAD,
        LossTerm.SMOOTH,
        LossTerm.TV,
    ),
}


class LossWeights(BaseModel):
    """Weights of the regularizers; the photometric term always has weight 1."""

    depth: float = Field(default=1.0, ge=0)
    jacobian: float = Field(default=1e-6, ge=0)
    grad: float = Field(default=1.0, ge=0)
    smooth: float = Field(default=1e-2, ge=0)
    tv: float = Field(default=1e-4, ge=0)

    def weight(self, term: LossTerm) -> float:
        if term == LossTerm.COLOR:
            return 1.0
        return getattr(self, term.value)

    def without(self, term: LossTerm) -> 'LossWeights':
        if term == LossTerm.COLOR:
            raise ConfigError('the photometric term cannot be disabled')
        return self.model_copy(update={term.value: 0.0})

    def for_preset(self, preset: AblationPreset) -> 'LossWeights':
        kept = _PRESET_TERMS[preset]
        update = {
            t.value: 0.0 for t in LossTerm if t != LossTerm.COLOR and t not in kept
        }
        return self.model_copy(update=update)


class FieldSpec(BaseModel):
    deform_depth: int = Field(default=8, ge=2)
    deform_width: int = Field(default=128, gt=0)
    deform_skips: Tuple[int, ...] = (4,)
    deform_init_scale: float = 1e-5
    canonical_depth: int = Field(default=8, ge=2)
    canonical_width: int = Field(default=256, gt=0)
    canonical_skips: Tuple[int, ...] = (4,)
    color_width: int = Field(default=128, gt=0)
    position_freqs: int = Field(default=10, ge=0)
    direction_freqs: int = Field(default=4, ge=0)
    time_freqs: int = Field(default=6, ge=0)
    include_input: bool = True
    unnormalized_translation: bool = False

    @model_validator(mode='after')
    def _check_skips(self):
        for depth, skips in (
            (self.deform_depth, self.deform_skips),
            (self.canonical_depth, self.canonical_skips),
        ):
            if any(s <= 0 or s >= depth for s in skips):
                raise ConfigError('skip layers must lie strictly inside the MLP')
        return self


class TrainConfig(BaseModel):
    rays_per_batch: int = Field(default=1024, gt=0)
    patch_size: int = 4
    samples_per_ray: int = Field(default=64, ge=2)
    surface_fraction: float = Field(default=0.75, ge=0, le=1)
    iterations: int = Field(default=50_000, ge=0)
    lr: float = Field(default=5e-4, gt=0)
    lr_final: float = Field(default=5e-5, gt=0)
    weights: LossWeights = LossWeights()
    ablation: Optional[AblationPreset] = None
    sigma_start: float = Field(default=0.05, gt=0)
    sigma_end: float = Field(default=0.01, gt=0)
    huber_delta: float = Field(default=0.2, gt=0)
    robust_scale: float = Field(default=0.03, gt=0)
    seed: int = 0
    checkpoint_every: int = Field(default=5000, gt=0)
    log_every: int = Field(default=1, gt=0)
    holdout_every: Optional[int] = Field(default=None, ge=2)
    near: Optional[float] = None
    far: Optional[float] = None
    fields: FieldSpec = FieldSpec()

    @model_validator(mode='after')
    def _check(self):
        if self.patch_size < 3:
            raise ConfigError('patch_size must be at least 3')
        if self.rays_per_batch % (self.patch_size**2):
            raise ConfigError('rays_per_batch must be a multiple of patch_size**2')
        return self

    @property
    def n_patches(self) -> int:
        return self.rays_per_batch // (self.patch_size**2)

    @property
    def n_surface(self) -> int:
        return int(round(self.samples_per_ray * self.surface_fraction))

    @property
    def n_uniform(self) -> int:
        return self.samples_per_ray - self.n_surface

    def effective_weights(self) -> LossWeights:
        if self.ablation is None:
            return self.weights
        return self.weights.for_preset(self.ablation)


class BlobSpec(BaseModel):
    center: Vec3
    radius: float = Field(gt=0)
    color: Vec3
    density: float = Field(default=50.0, gt=0)
    rotation_amplitude: Vec3 = (0.0, 0.0, 0.0)
    translation_amplitude: Vec3 = (0.0, 0.0, 0.0)
    frequency: float = 1.0


class ToolMaskSpec(BaseModel):
    """Rectangle of tool pixels moving linearly from `start` (t=0) to `end` (t=1)."""

    start: Tuple[int, int]
    end: Tuple[int, int]
    size: Tuple[int, int]


class SyntheticScene(BaseModel):
    camera: PinholeCamera
    frame_count: int = Field(default=16, ge=1)
    blobs: List[BlobSpec] = []
    tool_masks: List[ToolMaskSpec] = []
    seed: int = 0
    depth_scale: float = 0.8
    depth_offset: float = 0.1
    depth_noise: float = 0.01
    quadrature_steps: int = Field(default=1024, ge=2)
