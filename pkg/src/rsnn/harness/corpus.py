"""Corpus manifests and the per-category 50/50 train/test split."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..errors import HarnessError, SplitError
from ..hierarchy import LEVELS, canonical_level
from ..imaging import load_grayscale


@dataclass(frozen=True)
class Sample:
    """One manifest line: image path plus its three category labels."""

    path: Path
    superordinate: str
    basic: str
    subordinate: str

    def label(self, level: str) -> str:
        return (self.superordinate, self.basic, self.subordinate)[LEVELS.index(canonical_level(level))]

    @property
    def labels(self) -> Tuple[str, str, str]:
        return self.superordinate, self.basic, self.subordinate


def read_manifest(path) -> List[Sample]:
    """
    Parse a tab-separated manifest (path, superordinate, basic, subordinate).

    Relative image paths resolve against the manifest's directory. Blank
    lines and ``#`` comments are skipped.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise HarnessError(f"cannot read manifest {path}: {exc}") from exc
    base = path.parent
    samples = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 4:
            raise HarnessError(f"{path}:{n}: expected 4 tab-separated columns, got {len(cols)}")
        rel, sup, bas, sub = (c.strip() for c in cols)
        samples.append(Sample((base / rel).resolve(), sup, bas, sub))
    return samples


def write_manifest(samples: Sequence[Sample], path) -> None:
    """Write samples with paths relative to the manifest's own directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.parent.resolve()
    with open(path, "w") as fh:
        for s in samples:
            rel = os.path.relpath(Path(s.path).resolve(), base)
            fh.write(f"{Path(rel).as_posix()}\t{s.superordinate}\t{s.basic}\t{s.subordinate}\n")


def split(samples: Sequence, seed: int = 0, key=None):
    """
    Seeded 50/50 split applied to each category independently.

    Categories default to the subordinate label of each sample; pass ``key``
    to group differently. Odd-sized categories give the extra item to the
    training half. Output order follows the input order, so the split is a
    pure function of ``(samples, seed)``.
    """
    if key is None:
        key = lambda s: s.subordinate  # noqa: E731
    by_cat: Dict[str, List[int]] = {}
    for i, s in enumerate(samples):
        by_cat.setdefault(key(s), []).append(i)
    rng = np.random.default_rng(seed)
    train_idx = set()
    for cat in sorted(by_cat):
        idx = by_cat[cat]
        if len(idx) < 2:
            raise SplitError(cat, len(idx))
        perm = rng.permutation(len(idx))
        n_train = (len(idx) + 1) // 2
        train_idx.update(idx[j] for j in perm[:n_train])
    train = [s for i, s in enumerate(samples) if i in train_idx]
    test = [s for i, s in enumerate(samples) if i not in train_idx]
    return train, test


def load_images(samples: Sequence[Sample], size: int) -> List[np.ndarray]:
    return [load_grayscale(s.path, size) for s in samples]
