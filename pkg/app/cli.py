"""Command-line entry point: train, render, eval, synth, export-ply."""
import argparse
import json
import logging
import logging.config
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError
from tqdm import tqdm

from app.adapters.logs.ndjson import NdjsonTrainingLog
from app.domain.enums import AblationPreset, RenderKind
from app.domain.errors import ConfigError, DomainError
from app.domain.models import SyntheticScene, TrainConfig
from app.geometry.se3 import pose_from_euler
from app.infra.device import configure_determinism, get_device
from app.infra.service import make_renderer
from app.infra.stores import get_checkpoint_store, get_dataset_store
from app.services.dataset_service import load_dataset
from app.services.evaluation_service import (
    evaluate,
    evaluate_oracle,
    export_pointcloud,
    oracle_times,
    write_metrics,
)
from app.services.synthetic_service import generate_synthetic, load_oracle
from app.services.training_service import TrainingService, default_location
from app.settings import settings
from app.utils.images import read_mask, write_depth, write_rgb

logger = logging.getLogger('app.cli')

ORACLE_METRICS = 'oracle_metrics.json'


def _bar(desc: str):
    return lambda it: tqdm(it, desc=desc, dynamic_ncols=True)


def _load_model(model_cls, path: str):
    try:
        return model_cls.model_validate_json(Path(path).read_text())
    except ValidationError as exc:
        raise ConfigError(f'invalid {path}: {exc}') from exc


def _parse_pose(raw: Optional[str]):
    if raw is None:
        return None
    try:
        values = [float(v) for v in raw.split(',')]
    except ValueError as exc:
        raise ConfigError(f'--pose expects six numbers, got {raw!r}') from exc
    if len(values) != 6:
        raise ConfigError(f'--pose expects six numbers, got {len(values)}')
    return pose_from_euler(*values)


def cmd_train(args) -> None:
    config = _load_model(TrainConfig, args.config)
    if args.ablation:
        config = config.model_copy(update={'ablation': AblationPreset(args.ablation)})
    dataset = load_dataset(get_dataset_store(), args.data, config.near, config.far)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    service = TrainingService(
        config,
        dataset,
        checkpoints=get_checkpoint_store(),
        log=NdjsonTrainingLog(out / 'log.ndjson'),
        location=default_location(str(out)),
        device=get_device(),
        deterministic=settings.DETERMINISTIC,
        progress=_bar('train'),
    )
    if not args.resume:
        (out / 'log.ndjson').unlink(missing_ok=True)
    print(service.train(resume=args.resume))


def cmd_render(args) -> None:
    renderer = make_renderer(args.ckpt, get_checkpoint_store(), device=get_device())
    view = renderer.render_view(
        args.time, pose_override=_parse_pose(args.pose), stride=args.stride
    )
    cam = renderer.camera
    if RenderKind(args.kind) == RenderKind.DEPTH:
        write_depth(args.out, view.depth, cam.near, cam.far)
    else:
        write_rgb(args.out, view.image)
    logger.info('[render] t=%.4f -> %s', args.time, args.out)


def cmd_eval(args) -> None:
    store = get_checkpoint_store()
    renderer = make_renderer(args.ckpt, store, device=get_device())
    cam = renderer.camera
    dataset = load_dataset(get_dataset_store(), args.data, cam.near, cam.far)
    oracle = load_oracle(args.data) if args.oracle else None
    report = evaluate(renderer, dataset, args.holdout_every)
    write_metrics(Path(args.out), report)
    if oracle is not None:
        times = oracle_times(len(dataset), report.frames)
        extra = evaluate_oracle(renderer, oracle, times)
        write_metrics(Path(args.out).with_name(ORACLE_METRICS), extra)
    print(json.dumps({'mean_psnr': report.mean_psnr, 'mean_ssim': report.mean_ssim}))


def cmd_synth(args) -> None:
    spec = _load_model(SyntheticScene, args.spec)
    generate_synthetic(spec, args.out, progress=_bar('synth'))
    print(args.out)


def cmd_export_ply(args) -> None:
    renderer = make_renderer(args.ckpt, get_checkpoint_store(), device=get_device())
    mask = read_mask(args.mask) if args.mask else None
    pts, _ = export_pointcloud(renderer, args.time, Path(args.out), mask=mask)
    print(f'{pts.shape[0]} points -> {args.out}')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='deformable-nerf')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('train', help='optimize the fields on a dataset')
    p.add_argument('--config', required=True, help='TrainConfig JSON')
    p.add_argument('--data', required=True, help='dataset directory')
    p.add_argument('--out', required=True, help='output directory')
    p.add_argument('--ablation', choices=[a.value for a in AblationPreset])
    p.add_argument('--resume', action='store_true')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('render', help='render one view of a checkpoint')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--time', type=float, required=True)
    p.add_argument('--pose', help='yaw,pitch,roll,tx,ty,tz (degrees, scene units)')
    p.add_argument('--stride', type=int, default=1)
    p.add_argument('--kind', choices=[k.value for k in RenderKind], default='color')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser('eval', help='PSNR/SSIM on held-out frames')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--data', required=True)
    p.add_argument('--holdout-every', type=int, default=settings.HOLDOUT_EVERY)
    p.add_argument('--out', required=True)
    p.add_argument(
        '--oracle',
        action='store_true',
        help='also score against the analytic renders of a synthetic dataset',
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('synth', help='write a synthetic deforming-scene dataset')
    p.add_argument('--spec', required=True, help='SyntheticScene JSON')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('export-ply', help='back-project a render into a point cloud')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--time', type=float, required=True)
    p.add_argument('--mask', help='optional 8-bit mask PNG')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_export_ply)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if Path(settings.LOG_CONFIG).is_file():
        logging.config.fileConfig(settings.LOG_CONFIG, disable_existing_loggers=False)
    configure_determinism(settings.DETERMINISTIC)
    try:
        args.func(args)
    except DomainError as exc:
        print(f'error: {exc.message}', file=sys.stderr)
        return 2
    return 0


if __name__ == '__main__':
    sys.exit(main())
