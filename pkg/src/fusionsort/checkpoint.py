"""Checkpoint format: a UTF-8 manifest, a DATA line, then one float64 blob.

Manifest layout:

    FSCKPT 1
    config {"in_channels": 6, ...}        (JSON, sorted keys, one line)
    entry <name> <d0>x<d1>x...            (lexicographic by name)
    ...
    DATA
    <all entry values, float64 little-endian, manifest order>

Entries cover trainable parameters and buffers (running statistics), so a
loaded network reproduces eval-mode forwards bit-exactly.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from .errors import ConfigError, FormatError

MAGIC_LINE = "FSCKPT 1"


def _config_json(config) -> str:
    if dataclasses.is_dataclass(config):
        config = dataclasses.asdict(config)
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def save_checkpoint(path: str, config, entries: dict[str, np.ndarray]) -> None:
    names = sorted(entries)
    lines = [MAGIC_LINE, f"config {_config_json(config)}"]
    for name in names:
        arr = entries[name]
        shape = "x".join(str(d) for d in arr.shape) if arr.ndim else "scalar"
        lines.append(f"entry {name} {shape}")
    lines.append("DATA")
    manifest = ("\n".join(lines) + "\n").encode("utf-8")
    blob = b"".join(np.ascontiguousarray(entries[n], dtype="<f8").tobytes()
                    for n in names)
    with open(path, "wb") as fh:
        fh.write(manifest)
        fh.write(blob)


def load_checkpoint(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    sep = b"\nDATA\n"
    cut = raw.find(sep)
    if cut < 0:
        raise FormatError("checkpoint has no DATA line", offset=len(raw))
    try:
        manifest = raw[:cut].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"checkpoint manifest is not UTF-8: {exc}", offset=0)
    lines = manifest.split("\n")
    if lines[0] != MAGIC_LINE:
        raise FormatError(f"bad checkpoint magic line {lines[0]!r}", offset=0)
    if len(lines) < 2 or not lines[1].startswith("config "):
        raise FormatError("checkpoint missing config line", offset=len(lines[0]))
    try:
        config = json.loads(lines[1][len("config "):])
    except json.JSONDecodeError as exc:
        raise FormatError(f"checkpoint config is not valid JSON: {exc}",
                          offset=len(lines[0]) + 1)
    entries_meta: list[tuple[str, tuple[int, ...]]] = []
    for line in lines[2:]:
        parts = line.split(" ")
        if len(parts) != 3 or parts[0] != "entry":
            raise FormatError(f"bad manifest line {line!r}", offset=0)
        name, shape_txt = parts[1], parts[2]
        shape = () if shape_txt == "scalar" else tuple(int(d) for d in shape_txt.split("x"))
        entries_meta.append((name, shape))
    names = [n for n, _ in entries_meta]
    if names != sorted(names):
        raise FormatError("manifest entries are not in lexicographic order", offset=0)

    blob = raw[cut + len(sep):]
    expected = sum(int(np.prod(s)) if s else 1 for _, s in entries_meta) * 8
    if len(blob) != expected:
        raise FormatError(
            f"checkpoint blob has {len(blob)} bytes, expected {expected}",
            offset=cut + len(sep) + min(len(blob), expected))
    entries: dict[str, np.ndarray] = {}
    pos = 0
    for name, shape in entries_meta:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).reshape(shape)
        entries[name] = arr.copy()
        pos += count * 8
    return config, entries


def load_into_network(path: str, network) -> None:
    """Restore a network in place; validates config before touching any value."""
    config, entries = load_checkpoint(path)
    expected = _config_json(network.config)
    actual = _config_json(config)
    if expected != actual:
        raise ConfigError(
            f"checkpoint config {actual} does not match network config {expected}")
    state = {p.name: p for p in network.state_entries()}
    if sorted(state) != sorted(entries):
        missing = sorted(set(state) - set(entries))
        extra = sorted(set(entries) - set(state))
        raise ConfigError(
            f"checkpoint entries mismatch: missing {missing}, unexpected {extra}")
    for name, p in state.items():
        if entries[name].shape != p.value.shape:
            raise ConfigError(
                f"entry {name} has shape {entries[name].shape}, network expects {p.value.shape}")
    for name, p in state.items():
        p.value.data[...] = entries[name]


def save_network(path: str, network) -> None:
    save_checkpoint(path, network.config,
                    {p.name: p.value.data for p in network.state_entries()})
