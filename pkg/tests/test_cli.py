import json

import pytest

from app.cli import main

pytestmark = pytest.mark.unit


@pytest.fixture()
def spec_file(tmp_path, synthetic_spec):
    path = tmp_path / 'scene.json'
    path.write_text(synthetic_spec.model_dump_json())
    return path


@pytest.fixture()
def config_file(tmp_path, tiny_config):
    path = tmp_path / 'config.json'
    path.write_text(tiny_config.model_dump_json())
    return path


def _run(command, **options):
    argv = [command]
    for key, value in options.items():
        flag = '--' + key.replace('_', '-')
        argv += [flag] if value is True else [flag, str(value)]
    return main(argv)


def test_bad_config_exits_with_two(tmp_path, capsys):
    path = tmp_path / 'config.json'
    path.write_text('{"patch_size": 2, "rays_per_batch": 8}')
    assert _run('train', config=path, data=tmp_path, out=tmp_path) == 2
    assert capsys.readouterr().err.startswith('error: ')


def test_malformed_pose_exits_with_two(tmp_path, capsys):
    assert _run('render', ckpt=tmp_path, time=0, pose='1,2', out='x.png') == 2
    assert 'error: ' in capsys.readouterr().err


def test_missing_checkpoint_exits_with_two(tmp_path, capsys):
    assert _run('render', ckpt=tmp_path / 'none', time=0, out='x.png') == 2
    assert 'no checkpoint' in capsys.readouterr().err


def test_full_command_cycle(tmp_path, spec_file, config_file, capsys):
    data, run = tmp_path / 'data', tmp_path / 'run'
    assert _run('synth', spec=spec_file, out=data) == 0
    assert (data / 'meta.json').is_file() and (data / 'oracle.json').is_file()

    assert _run('train', config=config_file, data=data, out=run) == 0
    assert (run / 'checkpoint.safetensors').is_file()
    lines = (run / 'log.ndjson').read_text().splitlines()
    assert [json.loads(ln)['iteration'] for ln in lines] == [0, 1, 2, 3]

    view = tmp_path / 'view.png'
    assert _run('render', ckpt=run, time=0.5, stride=2, out=view) == 0
    assert view.read_bytes().startswith(b'\x89PNG')
    depth = tmp_path / 'depth.png'
    pose = '5,0,0,0,0,0.1'
    assert _run('render', ckpt=run, time=0.5, kind='depth', pose=pose, out=depth) == 0

    capsys.readouterr()
    metrics = tmp_path / 'metrics.json'
    assert _run('eval', ckpt=run, data=data, holdout_every=2, out=metrics) == 0
    assert json.loads(metrics.read_text())['frames'] == [1, 3]
    assert 'mean_psnr' in json.loads(capsys.readouterr().out.strip().splitlines()[-1])

    scored = tmp_path / 'scored' / 'metrics.json'
    code = _run('eval', ckpt=run, data=data, holdout_every=2, out=scored, oracle=True)
    assert code == 0
    oracle = json.loads((tmp_path / 'scored' / 'oracle_metrics.json').read_text())
    assert oracle['times'] == [0.25, 0.375, 0.75, 0.875]
    assert len(oracle['psnr']) == 4

    cloud = tmp_path / 'cloud.ply'
    assert _run('export-ply', ckpt=run, time=0, out=cloud) == 0
    assert 'element vertex 256' in cloud.read_text()

