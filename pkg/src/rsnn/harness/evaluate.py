"""
Metrics and experiment drivers: evaluation reports with confusion matrices,
occlusion sweeps and the spatial-frequency band comparison.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import HarnessError
from ..hierarchy import (LEVEL_BAND, LEVELS, LevelConfig, ModuleState, Taxonomy,
                         build_taxonomy, canonical_level, default_level_config, train_level)
from ..imaging import BANDS, OcclusionSpec, occlude, save_image
from .corpus import Sample, load_images, split

SILENT_LABEL = "SILENT"


@dataclass
class EvalReport:
    """
    Test-set tally for one level.

    ``confusion[i, j]`` counts images of class ``i`` decided as class ``j``;
    the extra last column counts silent decisions.
    """

    level: str
    classes: List[str]
    confusion: np.ndarray

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        m = len(self.classes)
        return float(np.trace(self.confusion[:, :m]) / self.total) if self.total else 0.0

    @property
    def silent_rate(self) -> float:
        return float(self.confusion[:, -1].sum() / self.total) if self.total else 0.0

    @property
    def recall(self) -> Dict[str, float]:
        rows = self.confusion.sum(axis=1)
        return {c: (float(self.confusion[i, i] / rows[i]) if rows[i] else float("nan"))
                for i, c in enumerate(self.classes)}

    def summary(self) -> str:
        lines = [f"level: {self.level}",
                 f"images: {self.total}",
                 f"accuracy: {self.accuracy:.4f}",
                 f"silent_rate: {self.silent_rate:.4f}",
                 "per-class recall:"]
        lines += [f"  {c}: {r:.4f}" for c, r in self.recall.items()]
        header = ["true\\decided"] + list(self.classes) + [SILENT_LABEL]
        widths = [max(len(h), 6) for h in header]
        lines.append("confusion:")
        lines.append("  " + " ".join(h.rjust(w) for h, w in zip(header, widths)))
        for c, row in zip(self.classes, self.confusion):
            cells = [c] + [str(int(v)) for v in row]
            lines.append("  " + " ".join(x.rjust(w) for x, w in zip(cells, widths)))
        return "\n".join(lines) + "\n"

    def write(self, report_dir, prefix: Optional[str] = None) -> Path:
        """Write ``metrics.csv``, ``confusion.csv`` and ``summary.txt`` (prefixed by level)."""
        out = Path(report_dir)
        out.mkdir(parents=True, exist_ok=True)
        prefix = self.level if prefix is None else prefix
        with open(out / f"{prefix}_metrics.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "class", "value"])
            w.writerow(["accuracy", "", f"{self.accuracy:.6f}"])
            w.writerow(["silent_rate", "", f"{self.silent_rate:.6f}"])
            w.writerow(["images", "", self.total])
            for c, r in self.recall.items():
                w.writerow(["recall", c, f"{r:.6f}"])
        with open(out / f"{prefix}_confusion.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["true"] + list(self.classes) + [SILENT_LABEL])
            for c, row in zip(self.classes, self.confusion):
                w.writerow([c] + [int(v) for v in row])
        (out / f"{prefix}_summary.txt").write_text(self.summary())
        return out


def _labelled(items, level: str):
    """Normalise manifests (``Sample``) and ``(image, label)`` pairs to pairs."""
    for item in items:
        if isinstance(item, Sample):
            yield item, item.label(level)
        else:
            yield item


def _image_of(item, size: int) -> np.ndarray:
    if isinstance(item, Sample):
        return load_images([item], size)[0]
    return item


def tally(state: ModuleState, images: Sequence[np.ndarray], labels: Sequence[str]) -> EvalReport:
    m = len(state.classes)
    confusion = np.zeros((m, m + 1), dtype=np.int64)
    for img, lbl in zip(images, labels):
        try:
            truth = state.classes.index(lbl)
        except ValueError:
            raise HarnessError(f"test label {lbl!r} unknown to the {state.level} module") from None
        decision, _ = state.run(img)
        confusion[truth, m if decision.silent else decision.group] += 1
    return EvalReport(state.level, list(state.classes), confusion)


def evaluate(state: ModuleState, test, level: Optional[str] = None) -> EvalReport:
    """
    Score a trained module on a test set.

    ``test`` holds manifest samples or ``(image, label)`` pairs. Silent
    decisions land in the extra confusion column and count as errors.
    """
    level = state.level if level is None else canonical_level(level)
    if level != state.level:
        raise HarnessError(f"module was trained for {state.level}, not {level}")
    pairs = list(_labelled(test, level))
    images = [_image_of(x, state.config.image_size) for x, _ in pairs]
    return tally(state, images, [lbl for _, lbl in pairs])


# ---------------------------------------------------------------------------
# Occlusion
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    level: str
    blob_counts: List[int]
    accuracies: np.ndarray  # (counts, seeds)

    @property
    def mean(self) -> np.ndarray:
        return self.accuracies.mean(axis=1)

    @property
    def std(self) -> np.ndarray:
        return self.accuracies.std(axis=1)

    def rows(self):
        return [(k, float(m), float(s)) for k, m, s in zip(self.blob_counts, self.mean, self.std)]

    def write(self, report_dir) -> Path:
        out = Path(report_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / f"{self.level}_occlusion.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["blobs", "mean_accuracy", "std_accuracy", "seeds"])
            for k, m, s in self.rows():
                w.writerow([k, f"{m:.6f}", f"{s:.6f}", self.accuracies.shape[1]])
        text = [f"level: {self.level}", "blobs  mean    std"]
        text += [f"{k:5d}  {m:.4f}  {s:.4f}" for k, m, s in self.rows()]
        (out / f"{self.level}_occlusion.txt").write_text("\n".join(text) + "\n")
        return out


def _occluded_names(items) -> List[str]:
    items = list(items)
    if items and all(isinstance(x, Sample) for x in items):
        paths = [Path(x.path) for x in items]
        root = Path(os.path.commonpath([p.parent for p in paths]))
        return [p.relative_to(root).with_suffix("").as_posix() for p in paths]
    return [f"{i:04d}" for i in range(len(items))]


def occlusion_seed(seed: int, image_index: int, blob_count: int) -> int:
    """Independent, reproducible blob layout per (seed, image, blob count)."""
    return int(np.random.SeedSequence([seed, image_index, blob_count]).generate_state(1)[0])


def occlusion_sweep(state: ModuleState, test, blob_counts: Sequence[int] = (0, 2, 4, 8),
                    radius: Optional[float] = None, sigma: Optional[float] = None,
                    seeds: int = 10, image_dir=None) -> SweepResult:
    """
    Accuracy under growing numbers of soft occluding blobs.

    ``radius`` defaults to one eighth of the image side and ``sigma`` to a
    third of the radius. With ``image_dir`` every occluded image is written
    there; manifest samples keep their path below the corpus root with a
    ``_b<count>_s<seed>`` suffix, plain images are named by index.
    """
    test = list(test)
    names = _occluded_names(test)
    pairs = list(_labelled(test, state.level))
    images = [_image_of(x, state.config.image_size) for x, _ in pairs]
    labels = [lbl for _, lbl in pairs]
    if not images:
        raise HarnessError("empty test set")
    side = images[0].shape[0]
    radius = side / 8.0 if radius is None else float(radius)
    sigma = radius / 3.0 if sigma is None else float(sigma)
    counts = [int(k) for k in blob_counts]
    acc = np.zeros((len(counts), seeds))
    for a, k in enumerate(counts):
        for s in range(seeds):
            occluded = [occlude(img, OcclusionSpec(k, radius, sigma, occlusion_seed(s, i, k)))
                        for i, img in enumerate(images)]
            if image_dir is not None:
                for name, img in zip(names, occluded):
                    save_image(img, Path(image_dir) / f"{name}_b{k}_s{s}.png")
            acc[a, s] = tally(state, occluded, labels).accuracy
    return SweepResult(state.level, counts, acc)


# ---------------------------------------------------------------------------
# Spatial-frequency bands
# ---------------------------------------------------------------------------

def band_config(base: Dict[str, LevelConfig], level: str, band: str) -> LevelConfig:
    """
    Configuration of one (level, band) cell.

    A filtered band applies the explicit band-pass prefilter and uses the S1
    window of the level that owns that band by default; ``"full"`` keeps the
    level's own window and feeds unfiltered images.
    """
    level = canonical_level(level)
    cfg = base[level]
    if band == "full":
        return cfg.replace(band="full", prefilter=False)
    owner = next(lvl for lvl, b in LEVEL_BAND.items() if b == band)
    return cfg.replace(band=band, prefilter=True, gabor_window=base[owner].gabor_window)


@dataclass
class BandTable:
    levels: List[str]
    bands: List[str]
    accuracies: np.ndarray  # (levels, bands, runs)

    @property
    def mean(self) -> np.ndarray:
        return self.accuracies.mean(axis=2)

    def cell(self, level: str, band: str) -> float:
        return float(self.mean[self.levels.index(canonical_level(level)), self.bands.index(band)])

    def write(self, report_dir) -> Path:
        out = Path(report_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bands.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level"] + self.bands)
            for lvl, row in zip(self.levels, self.mean):
                w.writerow([lvl] + [f"{v:.6f}" for v in row])
        with open(out / "bands_runs.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level", "band", "run", "accuracy"])
            for i, lvl in enumerate(self.levels):
                for j, band in enumerate(self.bands):
                    for r, v in enumerate(self.accuracies[i, j]):
                        w.writerow([lvl, band, r, f"{v:.6f}"])
        text = ["level  " + "  ".join(b.rjust(6) for b in self.bands)]
        text += [f"{lvl:5s}  " + "  ".join(f"{v:6.4f}" for v in row)
                 for lvl, row in zip(self.levels, self.mean)]
        (out / "bands.txt").write_text("\n".join(text) + "\n")
        return out


def run_cell(samples: Sequence[Sample], taxonomy: Taxonomy, level: str, cfg: LevelConfig,
             run: int) -> float:
    """Split with seed ``run``, train and score one module."""
    train, test = split(samples, run)
    train_imgs = load_images(train, cfg.image_size)
    state = train_level(level, taxonomy, list(zip(train_imgs, [s.label(level) for s in train])),
                        cfg, seed=run)
    return evaluate(state, test).accuracy


def band_comparison(samples: Sequence[Sample], levels: Sequence[str] = LEVELS,
                    bands: Sequence[str] = BANDS, runs: int = 10,
                    configs: Optional[Dict[str, LevelConfig]] = None) -> BandTable:
    """Mean test accuracy over ``runs`` seeded split/train/evaluate runs per (level, band) cell."""
    levels = [canonical_level(lvl) for lvl in levels]
    bands = [b.lower() for b in bands]
    taxonomy = build_taxonomy([s.labels for s in samples])
    base = {lvl: default_level_config("synthetic", lvl) for lvl in LEVELS}
    if configs:
        base.update({canonical_level(k): v for k, v in configs.items()})
    acc = np.zeros((len(levels), len(bands), runs))
    for i, lvl in enumerate(levels):
        for j, band in enumerate(bands):
            cfg = band_config(base, lvl, band)
            for r in range(runs):
                acc[i, j, r] = run_cell(samples, taxonomy, lvl, cfg, r)
    return BandTable(levels, bands, acc)
