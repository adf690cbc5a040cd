"""
运行管理器测试：输出目录锁、文件登记、运行清单
"""
import json
import os

import pytest

from core.errors import ConfigError
from core.run_manager import LOCK_NAME, RunManager, file_sha256


def test_file_sha256(tmp_path):
    path = tmp_path / 'abc.txt'
    path.write_bytes(b'abc')
    assert file_sha256(path) == 'ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad'


def test_lock_lifecycle(tmp_path):
    manager = RunManager(tmp_path / 'out', 'theorem_check')
    assert manager.acquire_lock()
    assert (tmp_path / 'out' / LOCK_NAME).read_text() == str(os.getpid())
    other = RunManager(tmp_path / 'out', 'theorem_check')
    assert not other.acquire_lock()
    manager.release_lock()
    assert not (tmp_path / 'out' / LOCK_NAME).exists()


def test_stale_lock_is_cleared(tmp_path):
    manager = RunManager(tmp_path, 'fig1_ranks')
    (tmp_path / LOCK_NAME).write_text('999999999')
    assert manager.acquire_lock()
    manager.release_lock()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / 'file'
    blocker.write_text('x')
    with pytest.raises(ConfigError):
        RunManager(blocker / 'out', 'fig1_ranks')


def test_manifest_lists_outputs(tmp_path):
    manager = RunManager(tmp_path, 'fig1_ranks')
    for name in ('b.csv', 'a.csv'):
        (tmp_path / name).write_text(name, encoding='utf-8')
        manager.register(tmp_path / name, 'table')
    manager.record_replicate(1, 11, 0.5)
    manager.record_replicate(0, 10, 0.25, note='first')
    path = manager.write_manifest({'preset': 'fig1_ranks'}, 20190101, 1.0, extra={'summary': {'ok': 1}})
    manifest = json.loads(path.read_text(encoding='utf-8'))
    assert [o['name'] for o in manifest['outputs']] == ['a.csv', 'b.csv']
    assert manifest['outputs'][0]['sha256'] == file_sha256(tmp_path / 'a.csv')
    assert [r['replicate'] for r in manifest['replicates']] == [0, 1]
    assert manifest['replicates'][0]['note'] == 'first'
    assert manifest['master_seed'] == 20190101
    assert set(manifest['versions']) >= {'python', 'numpy', 'scipy', 'pandas', 'psutil'}
    assert manifest['peak_rss_bytes'] > 0
    assert manifest['summary'] == {'ok': 1}
    assert manager.get_stats()['outputs'] == 2
