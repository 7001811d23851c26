"""
On-disk formats: shared-weight tensor containers, their metadata sidecars
and three-level model bundles.

Tensor container layout (little-endian)::

    magic   8 bytes   b"RSNNW2\\x00\\x00"
    version uint32    1
    n       uint32    number of S2 lattices
    maps    uint32    C1 maps per lattice (4)
    w_s2    uint32    receptive-field side
    theta   float64   S2 threshold
    data    float64   n * maps * w_s2 * w_s2 weights, C order
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import HarnessError
from .hierarchy import (LEVELS, HierarchyModel, LevelConfig, ModuleState, Taxonomy,
                        canonical_level)

MAGIC = b"RSNNW2\x00\x00"
VERSION = 1
_HEADER = struct.Struct("<8sIIIId")


def write_tensor(path, weights: np.ndarray, theta: float) -> None:
    weights = np.asarray(weights, dtype="<f8")
    n, maps, w, w2 = weights.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, maps, w, float(theta)))
        fh.write(np.ascontiguousarray(weights).tobytes())


def read_tensor(path):
    """Return ``(weights, theta)`` from a tensor container."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise HarnessError(f"{path}: truncated tensor header")
    magic, version, n, maps, w, theta = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise HarnessError(f"{path}: not a weight tensor (bad magic)")
    if version != VERSION:
        raise HarnessError(f"{path}: unsupported tensor version {version}")
    count = n * maps * w * w
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise HarnessError(f"{path}: expected {count} weights, found {len(body) // 8}")
    weights = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(n, maps, w, w)
    return weights, theta


def write_meta(path, meta: dict) -> None:
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in meta.items()))


def read_meta(path) -> dict:
    meta = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    return meta


def save_module(state: ModuleState, bundle_dir) -> Path:
    """Write ``<level>.tensor``, ``<level>.meta`` and ``<level>.cfg`` into a bundle directory."""
    out = Path(bundle_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(out / f"{state.level}.tensor", state.weights, state.config.theta)
    (out / f"{state.level}.cfg").write_text(state.config.to_text())
    write_meta(out / f"{state.level}.meta", {
        "level": state.level,
        "classes": ",".join(state.classes),
        "groups": ",".join(str(int(g)) for g in state.groups),
        "config_digest": state.config.digest(),
        "trials": len(state.trace),
    })
    return out


def write_trace(state: ModuleState, path) -> None:
    with open(path, "w") as fh:
        fh.write("# trial\ttrue_class\tdecided\tsignal\tA_r\tA_p\twinner_lattice\n")
        for rec in state.trace:
            fh.write(rec.to_line() + "\n")


def load_module(bundle_dir, level: str) -> ModuleState:
    bundle = Path(bundle_dir)
    level = canonical_level(level)
    tensor = bundle / f"{level}.tensor"
    if not tensor.exists():
        raise HarnessError(f"bundle {bundle} has no trained {level} module")
    weights, theta = read_tensor(tensor)
    cfg = LevelConfig.from_text((bundle / f"{level}.cfg").read_text())
    meta = read_meta(bundle / f"{level}.meta")
    if meta.get("config_digest") != cfg.digest():
        raise HarnessError(f"{level} config in {bundle} does not match its recorded digest")
    if theta != cfg.theta:
        raise HarnessError(f"{level} tensor threshold {theta} disagrees with config {cfg.theta}")
    groups = np.array([int(g) for g in meta["groups"].split(",")])
    return ModuleState(level=level, config=cfg, classes=meta["classes"].split(","),
                       groups=groups, weights=weights)


def available_levels(bundle_dir):
    return [lvl for lvl in LEVELS if (Path(bundle_dir) / f"{lvl}.tensor").exists()]


def save_bundle(model: HierarchyModel, bundle_dir) -> Path:
    out = Path(bundle_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.taxonomy.write(out / "taxonomy.tsv")
    for state in model.modules.values():
        save_module(state, out)
    return out


def load_bundle(bundle_dir) -> HierarchyModel:
    bundle = Path(bundle_dir)
    taxonomy = Taxonomy.read(bundle / "taxonomy.tsv")
    modules = {lvl: load_module(bundle, lvl) for lvl in available_levels(bundle)}
    return HierarchyModel(taxonomy, modules)
