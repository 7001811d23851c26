"""
Synthetic desk-scale corpora.

Two generators:

* :func:`oriented_bars` - the two-class horizontal/vertical bar task;
* :func:`taxonomy_corpus` - a 2 x 2 x 2 three-level taxonomy where the
  superordinate class is the bar orientation, the basic class is a thin vs a
  thick stroke, and the subordinate class is a solid vs a dashed stroke.

Orientation is visible at any scale; stroke width needs intermediate
resolution; the dash gaps are only a few pixels wide.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..imaging import save_image

ORIENT = {"horizontal": 0.0, "vertical": np.pi / 2}
WIDTHS = {"thin": 2.0, "thick": 5.0}
STROKES = ("solid", "dashed")

BACKGROUND = 0.5
FOREGROUND = 0.95


def draw_bar(canvas, center, angle, length, thickness, value, dash=None):
    """
    Paint an anti-aliased bar into ``canvas`` in place.

    ``dash=(on, off)`` breaks the stroke into segments of ``on`` pixels
    separated by ``off``-pixel gaps along its length.
    """
    rows, cols = canvas.shape
    yy, xx = np.mgrid[0:rows, 0:cols].astype(np.float64)
    dy, dx = yy - center[0], xx - center[1]
    along = dx * np.cos(angle) + dy * np.sin(angle)
    across = -dx * np.sin(angle) + dy * np.cos(angle)
    # soft edges: one pixel of linear ramp
    cover = np.clip(thickness / 2.0 + 0.5 - np.abs(across), 0.0, 1.0)
    cover *= np.clip(length / 2.0 + 0.5 - np.abs(along), 0.0, 1.0)
    if dash is not None:
        on, off = dash
        phase = np.mod(along + length / 2.0, on + off)
        cover *= np.clip(np.minimum(phase, on - phase) + 0.5, 0.0, 1.0) * (phase < on + 0.5)
    canvas[:] = canvas * (1.0 - cover) + value * cover
    return canvas


def bar_image(rng, side, orientation, width="thin", stroke="solid", noise=0.02):
    """One bar with jittered position, length and angle on a mid-gray background."""
    img = np.full((side, side), BACKGROUND)
    angle = ORIENT[orientation] + rng.uniform(-0.12, 0.12)
    length = rng.uniform(0.6, 0.8) * side
    center = np.array([side / 2.0, side / 2.0]) + rng.uniform(-side / 10, side / 10, size=2)
    dash = (4.0, 3.0) if stroke == "dashed" else None
    draw_bar(img, center, angle, length, WIDTHS[width], FOREGROUND, dash)
    if noise:
        img += rng.normal(0.0, noise, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def oriented_bars(per_class=40, side=32, seed=0, noise=0.02):
    """``per_class`` horizontal and ``per_class`` vertical thin solid bars as ``(image, label)``."""
    rng = np.random.default_rng(seed)
    data = []
    for _ in range(per_class):
        for label in ORIENT:
            data.append((bar_image(rng, side, label, noise=noise), label))
    return data


def leaf_labels(orientation, width, stroke):
    basic = f"{orientation}-{width}"
    return orientation, basic, f"{basic}-{stroke}"


def taxonomy_corpus(per_class=10, side=32, seed=0, noise=0.02):
    """
    ``per_class`` images for each of the eight leaves.

    Returns a list of ``(image, (super, basic, sub))`` in a deterministic
    order.
    """
    rng = np.random.default_rng(seed)
    data = []
    for _ in range(per_class):
        for orientation in ORIENT:
            for width in WIDTHS:
                for stroke in STROKES:
                    img = bar_image(rng, side, orientation, width, stroke, noise)
                    data.append((img, leaf_labels(orientation, width, stroke)))
    return data


def write_corpus(out_dir, per_class=10, seed=0, side=32, task="taxonomy"):
    """
    Write a synthetic corpus as PNG files plus a ``manifest.tsv``.

    Images go under ``<super>/<basic>/<sub>/NNNN.png``; manifest paths are
    relative to ``out_dir``. Returns the manifest path.
    """
    from .corpus import Sample, write_manifest

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if task == "bars":
        items = [(img, (lbl, lbl, lbl)) for img, lbl in oriented_bars(per_class, side, seed)]
    elif task == "taxonomy":
        items = taxonomy_corpus(per_class, side, seed)
    else:
        raise ValueError(f"unknown synthetic task {task!r}")
    samples = []
    counters = {}
    for img, (sup, bas, sub) in items:
        k = counters.get(sub, 0)
        counters[sub] = k + 1
        path = out / sup / bas / sub / f"{k:04d}.png"
        save_image(img, path)
        samples.append(Sample(path, sup, bas, sub))
    manifest = out / "manifest.tsv"
    write_manifest(samples, manifest)
    return manifest
