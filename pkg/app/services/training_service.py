import logging
from concurrent.futures import Future, ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Optional

import torch

from app.domain.errors import NonFiniteLoss
from app.domain.models import TrainConfig
from app.domain.ports.checkpoint_store import CheckpointStorePort
from app.domain.ports.training_log import TrainingLogPort
from app.domain.types import LossReport, RayBundle, SampleBatch
from app.nerf.fields import DynamicScene
from app.nerf.objective import batch_losses
from app.nerf.render import render_rays
from app.nerf.sampling import (
    gen_rays,
    patch_pixels,
    sample_depth_guided,
    sample_patches,
    sigma_at,
)
from app.services.checkpoint_service import checkpoint_load, checkpoint_save
from app.services.dataset_service import Dataset

logger = logging.getLogger(__name__)

Progress = Callable[[Iterable[int]], Iterable[int]]


def iteration_seed(seed: int, iteration: int) -> int:
    """Independent, reproducible stream per (run seed, iteration)."""
    return (seed * 1_000_003 + iteration) % (2**63)


def lr_at(config: TrainConfig, iteration: int) -> float:
    if config.iterations <= 0:
        return config.lr
    frac = min(iteration / config.iterations, 1.0)
    return config.lr * (config.lr_final / config.lr) ** frac


def _bundle_to(rays: RayBundle, device) -> RayBundle:
    return RayBundle(
        origins=rays.origins.to(device),
        directions=rays.directions.to(device),
        rows=rays.rows.to(device),
        cols=rays.cols.to(device),
        t=rays.t,
    )


def assemble_batch(
    dataset: Dataset,
    config: TrainConfig,
    iteration: int,
    frame_pool: list,
    *,
    dtype: Optional[torch.dtype] = None,
    device=None,
) -> SampleBatch:
    """Patches of one randomly chosen frame, with depth-guided samples.

    Everything is drawn on the CPU from the iteration's own generator.
    """
    dtype = dtype or torch.get_default_dtype()
    gen = torch.Generator().manual_seed(iteration_seed(config.seed, iteration))
    pick = int(torch.randint(len(frame_pool), (1,), generator=gen))
    frame = dataset.frames[frame_pool[pick]]

    p = config.patch_size
    corners = sample_patches(frame.mask, p, config.n_patches, gen)
    rows, cols = patch_pixels(corners, p)
    rays = gen_rays(dataset.camera, rows, cols, frame.t, dtype=dtype)

    near, far = dataset.near, dataset.far
    sigma = sigma_at(
        iteration, config.iterations, near, far, config.sigma_start, config.sigma_end
    )
    prior = frame.depth[rows, cols].to(dtype)
    s = sample_depth_guided(
        prior, sigma, config.n_surface, config.n_uniform, near, far, gen, dtype=dtype
    )
    return SampleBatch(
        rays=_bundle_to(rays, device),
        s_values=s.to(device),
        gt_color=frame.image[rows, cols].to(device=device, dtype=dtype),
        gt_depth=prior.to(device),
        mask_weight=frame.mask[rows, cols].to(device=device, dtype=dtype),
        laplacian=frame.laplacian[rows, cols].to(device=device, dtype=dtype),
        patch_size=p,
        frame_index=frame.index,
    )


class _Prefetcher:
    """Builds the batch of iteration k+1 while iteration k trains."""

    def __init__(self, make: Callable[[int], SampleBatch], serial: bool):
        self._make = make
        self._pool = None if serial else ThreadPoolExecutor(max_workers=1)
        self._pending: Optional[Future] = None
        self._pending_it = -1

    def get(self, iteration: int, upcoming: Optional[int]) -> SampleBatch:
        if self._pending is not None and self._pending_it == iteration:
            batch = self._pending.result()
        else:
            batch = self._make(iteration)
        self._pending = None
        if self._pool is not None and upcoming is not None:
            self._pending = self._pool.submit(self._make, upcoming)
            self._pending_it = upcoming
        return batch

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)


class TrainingService:
    def __init__(
        self,
        config: TrainConfig,
        dataset: Dataset,
        *,
        checkpoints: CheckpointStorePort,
        log: TrainingLogPort,
        location: str,
        device=None,
        deterministic: bool = False,
        progress: Optional[Progress] = None,
    ):
        self.config = config
        self.dataset = dataset
        self.checkpoints = checkpoints
        self.log = log
        self.location = location
        self.device = torch.device(device if device is not None else 'cpu')
        self.deterministic = deterministic
        self.progress = progress or (lambda it: it)

        self.weights = config.effective_weights()
        # near/far overrides are applied when the dataset is prepared
        self.near = dataset.near
        self.far = dataset.far
        self.frame_pool = dataset.training_indices(config.holdout_every)

    def _new_scene(self) -> DynamicScene:
        torch.manual_seed(self.config.seed)
        scene = DynamicScene(self.config.fields, self.dataset.camera)
        return scene.to(device=self.device, dtype=torch.get_default_dtype())

    def _make_batch(self, iteration: int) -> SampleBatch:
        return assemble_batch(
            self.dataset,
            self.config,
            iteration,
            self.frame_pool,
            device=self.device,
        )

    def _step(
        self, scene: DynamicScene, optimizer: torch.optim.Optimizer, batch: SampleBatch
    ) -> LossReport:
        optimizer.zero_grad(set_to_none=True)
        result = render_rays(
            batch.rays,
            batch.s_values,
            scene.deformation,
            scene.canonical,
            far=self.far,
            track_points=True,
        )
        report = batch_losses(
            batch,
            result,
            scene.deformation,
            self.weights,
            near=self.near,
            far=self.far,
            dt=self.dataset.dt,
            huber_delta=self.config.huber_delta,
            robust_scale=self.config.robust_scale,
        )
        report.total.backward()
        optimizer.step()
        return report

    def _save(self, scene, iteration, optimizer) -> None:
        checkpoint_save(
            self.checkpoints, self.location, scene, iteration, optimizer, self.config
        )

    def train(self, resume: bool = False) -> str:
        """Run (or continue) the optimization; returns the checkpoint location."""
        cfg = self.config
        start = 0
        if resume:
            ckpt = checkpoint_load(
                self.checkpoints, self.location, spec=cfg.fields, device=self.device
            )
            scene = ckpt.scene.to(dtype=torch.get_default_dtype())
            optimizer = torch.optim.Adam(scene.parameters(), lr=cfg.lr)
            if ckpt.optimizer_state is not None:
                optimizer.load_state_dict(ckpt.optimizer_state)
            start = ckpt.iteration
            self.log.truncate_after(start - 1)
            logger.info('[train] resuming at iteration %d', start)
        else:
            scene = self._new_scene()
            optimizer = torch.optim.Adam(scene.parameters(), lr=cfg.lr)

        logger.info(
            '[train] %d iterations, %d training frames, weights=%s',
            cfg.iterations,
            len(self.frame_pool),
            self.weights.model_dump(),
        )
        prefetch = _Prefetcher(self._make_batch, serial=self.deterministic)
        try:
            for it in self.progress(range(start, cfg.iterations)):
                for group in optimizer.param_groups:
                    group['lr'] = lr_at(cfg, it)
                upcoming = it + 1 if it + 1 < cfg.iterations else None
                batch = prefetch.get(it, upcoming)
                try:
                    report = self._step(scene, optimizer, batch)
                except NonFiniteLoss as exc:
                    logger.error('[train] it=%d aborted: %s', it, exc.message)
                    raise
                if it % cfg.log_every == 0:
                    self.log.append(it, report)
                    logger.debug('[train] it=%d total=%.5f', it, float(report.total))
                done = it + 1
                if done % cfg.checkpoint_every == 0 and done < cfg.iterations:
                    self._save(scene, done, optimizer)
        finally:
            prefetch.close()

        self._save(scene, max(start, cfg.iterations), optimizer)
        return self.location


def default_location(out_dir: str) -> str:
    return str(Path(out_dir) / 'checkpoint.safetensors')
