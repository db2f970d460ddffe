"""Checkpoint round trips and the fail-before-mutate loading contract."""

from __future__ import annotations

import numpy as np
import pytest

from fusionsort.checkpoint import (load_checkpoint, load_into_network,
                                   save_checkpoint, save_network)
from fusionsort.errors import ConfigError, FormatError
from fusionsort.fusion import fuse_sample
from fusionsort.network import NetworkConfig, ablation_config, build_network
from fusionsort.synthetic import generate_synthetic_dataset
from fusionsort.train import TrainConfig, train_toy


def test_entries_round_trip_bit_exact(rng, tmp_path):
    entries = {
        "b.weight": rng.uniform(-1, 1, (2, 3)),
        "a.bias": rng.uniform(-1, 1, (4,)),
        "c.scalar": np.array(3.5),
    }
    path = tmp_path / "c.ckpt"
    save_checkpoint(str(path), {"k": 1}, entries)
    config, back = load_checkpoint(str(path))
    assert config == {"k": 1}
    assert sorted(back) == sorted(entries)
    for name in entries:
        np.testing.assert_array_equal(back[name], entries[name])
        assert back[name].dtype == np.float64


def test_network_round_trip_reproduces_eval_forward(rng, tmp_path):
    # train a few steps so running statistics differ from their init values
    data = generate_synthetic_dataset(1, 2, 16, 16, 5, 3)
    fused = [(fuse_sample(cube, rgb)[0], mask) for cube, rgb, mask in data]
    cfg = ablation_config("all", widths=(4, 8), reduction=2, state_dim=2, seed=1)
    net = build_network(cfg)
    train_toy(net, fused, TrainConfig(learning_rate=1e-3, iterations=4))
    path = tmp_path / "n.ckpt"
    save_network(str(path), net)

    net.set_training(False)
    want = net.forward(fused[0][0]).data.copy()

    other = build_network(cfg)
    load_into_network(str(path), other)
    other.set_training(False)
    got = other.forward(fused[0][0]).data
    np.testing.assert_array_equal(got, want)


def test_config_mismatch_fails_before_mutation(tmp_path):
    cfg_a = ablation_config("all", widths=(4, 8), reduction=2, state_dim=2, seed=0)
    cfg_b = ablation_config("all", widths=(4, 8), reduction=2, state_dim=2,
                            seed=0, num_classes=4)
    net_a = build_network(cfg_a)
    net_b = build_network(cfg_b)
    path = tmp_path / "a.ckpt"
    save_network(str(path), net_a)
    before = {p.name: p.value.data.copy() for p in net_b.state_entries()}
    with pytest.raises(ConfigError):
        load_into_network(str(path), net_b)
    for p in net_b.state_entries():
        np.testing.assert_array_equal(p.value.data, before[p.name])


def test_entry_shape_mismatch_fails_before_mutation(tmp_path):
    cfg = ablation_config("baseline", widths=(4, 8), seed=0)
    net = build_network(cfg)
    path = tmp_path / "n.ckpt"
    save_network(str(path), net)

    # transpose one entry's declared shape; the payload length is unchanged
    blob = path.read_bytes()
    manifest, data = blob.split(b"\nDATA\n", 1)
    lines = manifest.decode().split("\n")
    for i, line in enumerate(lines):
        if line.startswith("entry ") and line.endswith(" 4x6x3x3"):
            lines[i] = line.replace(" 4x6x3x3", " 6x4x3x3")
            break
    else:
        pytest.fail("expected a 4x6x3x3 entry in the manifest")
    tampered = tmp_path / "t.ckpt"
    tampered.write_bytes("\n".join(lines).encode() + b"\nDATA\n" + data)

    before = {p.name: p.value.data.copy() for p in net.state_entries()}
    with pytest.raises(ConfigError):
        load_into_network(str(tampered), net)
    for p in net.state_entries():
        np.testing.assert_array_equal(p.value.data, before[p.name])


def test_entry_set_mismatch_rejected(tmp_path):
    cfg = ablation_config("baseline", widths=(4, 8), seed=0)
    net = build_network(cfg)
    path = tmp_path / "n.ckpt"
    save_network(str(path), net)
    blob = path.read_bytes()
    manifest, data = blob.split(b"\nDATA\n", 1)
    lines = manifest.decode().split("\n")
    entry_lines = [i for i, l in enumerate(lines) if l.startswith("entry ")]
    last = entry_lines[-1]
    name, shape = lines[last].split(" ")[1:]
    lines[last] = f"entry {name}zz {shape}"
    tampered = tmp_path / "t.ckpt"
    tampered.write_bytes("\n".join(lines).encode() + b"\nDATA\n" + data)
    with pytest.raises(ConfigError):
        load_into_network(str(tampered), net)


def test_bad_magic_rejected(rng, tmp_path):
    path = tmp_path / "c.ckpt"
    save_checkpoint(str(path), {}, {"a": rng.uniform(-1, 1, (2,))})
    blob = bytearray(path.read_bytes())
    blob[0] = ord("X")
    (tmp_path / "t.ckpt").write_bytes(bytes(blob))
    with pytest.raises(FormatError):
        load_checkpoint(str(tmp_path / "t.ckpt"))


def test_nonlexicographic_entries_rejected(rng, tmp_path):
    path = tmp_path / "c.ckpt"
    save_checkpoint(str(path), {}, {"a": np.zeros(1), "b": np.ones(1)})
    blob = path.read_bytes()
    manifest, data = blob.split(b"\nDATA\n", 1)
    lines = manifest.decode().split("\n")
    lines[2], lines[3] = lines[3], lines[2]
    tampered = tmp_path / "t.ckpt"
    tampered.write_bytes("\n".join(lines).encode() + b"\nDATA\n" + data)
    with pytest.raises(FormatError, match="lexicographic"):
        load_checkpoint(str(tampered))


def test_rejects_every_truncation(rng, tmp_path):
    path = tmp_path / "c.ckpt"
    save_checkpoint(str(path), {"n": 2}, {"w": rng.uniform(-1, 1, (2,))})
    blob = path.read_bytes()
    target = tmp_path / "t.ckpt"
    for cut in range(len(blob)):
        target.write_bytes(blob[:cut])
        with pytest.raises(FormatError):
            load_checkpoint(str(target))


def test_trailing_bytes_rejected(rng, tmp_path):
    path = tmp_path / "c.ckpt"
    save_checkpoint(str(path), {}, {"w": rng.uniform(-1, 1, (2,))})
    (tmp_path / "t.ckpt").write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(FormatError):
        load_checkpoint(str(tmp_path / "t.ckpt"))


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_checkpoint(str(tmp_path / "absent.ckpt"))
