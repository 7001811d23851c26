"""
From pixels to a C1 spike wave
==============================

Walk one synthetic bar image through the front end and look at what each
stage keeps.
"""

import numpy as np

from rsnn import imaging
from rsnn.encoding import encode_latency, relative_floor
from rsnn.harness.synth import bar_image
from rsnn.network import c1_pool, cross_map_inhibit, local_inhibit

rng = np.random.default_rng(0)
img = bar_image(rng, 32, "vertical", "thick", "dashed")
print("image", img.shape, "range", img.min().round(3), img.max().round(3))

# four orientations; a vertical bar should light up the map tuned to it
bank = imaging.make_gabor_bank(9)
stack = imaging.convolve(img, bank)
energy = np.abs(stack).sum(axis=(1, 2))
for theta, e in zip(bank.orientations, energy):
    print(f"  orientation {np.degrees(theta):5.1f} deg  energy {e:8.2f}")

# strongest response fires first, one spike per step
wave = encode_latency(stack, relative_floor(stack, 0.01))
print("S1 spikes:", len(wave), "of", stack.size, "cells")
print("first five (t, map, row, col):", list(wave.events())[:5])

# pooling plus cross-map inhibition thin the wave out
pooled = c1_pool(wave, 2)
crossed = cross_map_inhibit(pooled)
for name, w in [("pooled", pooled), ("cross-map", crossed)]:
    print(f"{name:>10}: {len(w):4d} spikes")

# local inhibition keeps every spike but pushes crowded neighbours later
local = local_inhibit(crossed, radius=3, strength=3)
before = list(map(tuple, crossed.addresses[:20].tolist()))
after = list(map(tuple, local.addresses[:20].tolist()))
print("local: same spike count", len(local) == len(crossed),
      "| first 20 still first 20:", len(set(before) & set(after)))

# where did the surviving spikes land?
lat = local.latency_map()
print("surviving spikes per orientation:", np.isfinite(lat).sum(axis=(1, 2)).tolist())

# each band is tied to the Gabor window of the level that owns it
for band, window in [("lsf", 15), ("isf", 9), ("hsf", 5)]:
    filtered = imaging.band_image(img, band, window, prefilter=True)
    print(f"{band} (window {window:2d}): std {filtered.std():.4f}")
