"""
Forward pass of one R-SNN module: C1 pooling and lateral inhibition, S2
integrate-and-fire lattices with shared weights, C2 first-spike pooling and
the group decision.

Spike times are integers stored in float arrays so that ``np.inf`` can mark
"never fired"; every public function follows that convention.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .encoding import SpikeWave
from .errors import InvalidInputError, InvalidParameterError


# ---------------------------------------------------------------------------
# C1: earliest-spike pooling and inhibition
# ---------------------------------------------------------------------------

def c1_pool(wave: SpikeWave, pool_window: int = 2, stride: Optional[int] = None) -> SpikeWave:
    """
    Local earliest-spike pooling over ``pool_window`` x ``pool_window`` windows.

    ``stride`` defaults to ``pool_window - 1``. Each C1 cell fires at the time
    of the first spike inside its window; the pooled cells are re-serialised
    one spike per time step.
    """
    if stride is None:
        stride = pool_window - 1
    if pool_window < 1 or stride < 1:
        raise InvalidParameterError(f"invalid pooling window {pool_window} / stride {stride}")
    maps, rows, cols = wave.dims
    if rows < pool_window or cols < pool_window:
        raise InvalidInputError(f"wave {wave.dims} smaller than pooling window {pool_window}")
    lat = wave.latency_map()
    windows = sliding_window_view(lat, (pool_window, pool_window), axis=(1, 2))
    pooled = windows[:, ::stride, ::stride].min(axis=(-2, -1))
    return SpikeWave.from_latencies(pooled)


def cross_map_inhibit(wave: SpikeWave) -> SpikeWave:
    """Keep only the earliest spike at each ``(row, col)`` across all maps."""
    if len(wave) == 0:
        return wave
    rc = wave.addresses[:, 1:]
    # events are already time-ordered, so the first occurrence of a position wins
    _, first = np.unique(rc[:, 0] * wave.dims[2] + rc[:, 1], return_index=True)
    keep = np.sort(first)
    return SpikeWave(wave.addresses[keep], wave.dims)


def _inhibition_offsets(radius: float, strength: float):
    r = int(math.floor(radius))
    offsets = []
    for dr in range(-r, r + 1):
        for dc in range(-r, r + 1):
            d = math.hypot(dr, dc)
            if (dr or dc) and d <= radius:
                penalty = math.ceil(strength * (1.0 - d / (radius + 1.0)))
                if penalty > 0:
                    offsets.append((dr, dc, penalty))
    return offsets


def local_inhibit(wave: SpikeWave, radius: float = 3, strength: float = 3) -> SpikeWave:
    """
    Delay same-map neighbours of every spike in proportion to proximity.

    Spikes are released in order of their current latency. When a spike at
    ``p`` on map ``k`` is released, every not-yet-released spike on map ``k``
    within Euclidean distance ``d <= radius`` is delayed by
    ``ceil(strength * (1 - d / (radius + 1)))`` steps. A spike can collect
    delays from several earlier neighbours. The wave is then re-serialised.
    """
    if radius < 0:
        raise InvalidParameterError("inhibition radius must be >= 0")
    offsets = _inhibition_offsets(radius, strength)
    if not offsets or len(wave) == 0:
        return wave
    maps, rows, cols = wave.dims
    lat = wave.latency_map()
    heap = [(t, m, r, c) for t, m, r, c in wave.events()]
    heapq.heapify(heap)
    released = np.zeros(wave.dims, dtype=bool)
    order = []
    while heap:
        t, m, r, c = heapq.heappop(heap)
        if released[m, r, c] or t != lat[m, r, c]:
            continue
        released[m, r, c] = True
        order.append((m, r, c))
        for dr, dc, penalty in offsets:
            rr, cc = r + dr, c + dc
            if 0 <= rr < rows and 0 <= cc < cols and not released[m, rr, cc] and lat[m, rr, cc] < np.inf:
                lat[m, rr, cc] += penalty
                heapq.heappush(heap, (lat[m, rr, cc], m, rr, cc))
    return SpikeWave(np.array(order, dtype=np.int64), wave.dims)


# ---------------------------------------------------------------------------
# S2 and C2
# ---------------------------------------------------------------------------

@dataclass
class S2Activity:
    """
    Result of presenting one wave to the S2 layer.

    ``spike_times`` and ``potentials`` have shape ``(lattices, rows, cols)``.
    Silent neurons carry ``inf``; a fired neuron's potential is frozen at the
    value that crossed threshold.
    """

    spike_times: np.ndarray
    potentials: np.ndarray

    @property
    def n_lattices(self) -> int:
        return self.spike_times.shape[0]

    @property
    def fired(self) -> np.ndarray:
        return np.isfinite(self.spike_times)


def receptive_fields(latencies: np.ndarray, w_s2: int) -> np.ndarray:
    """``(rows', cols', maps, w_s2, w_s2)`` view of afferent latencies per S2 position."""
    win = sliding_window_view(latencies, (w_s2, w_s2), axis=(1, 2))
    return win.transpose(1, 2, 0, 3, 4)


@numba.njit(cache=True)
def _integrate(addresses, weights, theta, out_rows, out_cols, until_first):
    n, _, w, _ = weights.shape
    potential = np.zeros((n, out_rows, out_cols))
    spike = np.full((n, out_rows, out_cols), np.inf)
    for e in range(addresses.shape[0]):
        t = e + 1.0
        m, r, c = addresses[e, 0], addresses[e, 1], addresses[e, 2]
        fired = False
        for i in range(max(0, r - w + 1), min(out_rows - 1, r) + 1):
            dr = r - i
            for j in range(max(0, c - w + 1), min(out_cols - 1, c) + 1):
                dc = c - j
                for k in range(n):
                    if spike[k, i, j] == np.inf:
                        potential[k, i, j] += weights[k, m, dr, dc]
                        if potential[k, i, j] >= theta:
                            spike[k, i, j] = t
                            fired = True
        if until_first and fired:
            break
    return spike, potential


def s2_forward(wave: SpikeWave, weights: np.ndarray, theta: float,
               until_first: bool = False) -> S2Activity:
    """
    Integrate a C1 wave into ``n`` shared-weight IF lattices.

    ``weights`` has shape ``(n, maps, w_s2, w_s2)``. Receptive fields tile the
    C1 grid with stride 1 over valid positions only. Events are consumed one
    per time step; each adds its shared weight to every covering neuron of
    every lattice, and a neuron whose potential reaches ``theta`` records the
    step as its spike time and ignores all later input (no leak, fire once).

    With ``until_first=True`` the simulation stops after the first step at
    which any neuron fires. That is enough for the first-spike decision and
    the winner-take-all update; later spikes are left unrecorded.
    """
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    n, maps, w_s2, w2 = weights.shape
    if w_s2 != w2:
        raise InvalidInputError("S2 weight windows must be square")
    if maps != wave.dims[0]:
        raise InvalidInputError(f"weights expect {maps} maps, wave has {wave.dims[0]}")
    if wave.dims[1] < w_s2 or wave.dims[2] < w_s2:
        raise InvalidInputError(f"S2 window {w_s2} does not fit wave {wave.dims}")
    if not theta > 0:
        raise InvalidParameterError("threshold must be positive")
    out_rows = wave.dims[1] - w_s2 + 1
    out_cols = wave.dims[2] - w_s2 + 1
    spike, potential = _integrate(np.ascontiguousarray(wave.addresses), weights, float(theta),
                                  out_rows, out_cols, until_first)
    return S2Activity(spike, potential)


def c2_pool(activity: S2Activity) -> np.ndarray:
    """Per-lattice earliest S2 spike time (``inf`` for a silent lattice)."""
    n = activity.n_lattices
    if activity.spike_times.size == 0:
        return np.full(n, np.inf)
    return activity.spike_times.reshape(n, -1).min(axis=1)


# ---------------------------------------------------------------------------
# Decision
# ---------------------------------------------------------------------------

def make_groups(n_neurons: int, n_groups: int) -> np.ndarray:
    """
    Assign ``n_neurons`` C2 neurons to ``n_groups`` classes in contiguous blocks.

    Blocks have size ``n_neurons // n_groups``; the remainder goes one extra
    neuron each to the first groups.
    """
    if n_groups < 1 or n_neurons < n_groups:
        raise InvalidParameterError(
            f"cannot give each of {n_groups} groups a neuron out of {n_neurons}")
    base, extra = divmod(n_neurons, n_groups)
    sizes = [base + (1 if g < extra else 0) for g in range(n_groups)]
    return np.repeat(np.arange(n_groups), sizes)


@dataclass(frozen=True)
class Decision:
    """Module output: the class group of the first C2 neuron to fire, or silence."""

    group: Optional[int] = None
    neuron: Optional[int] = None
    time: Optional[int] = None

    @property
    def silent(self) -> bool:
        return self.group is None

    def __str__(self):
        if self.silent:
            return "SILENT"
        return f"class {self.group} (neuron {self.neuron} at t={self.time})"


SILENT = Decision()


def decide(times, groups) -> Decision:
    """
    First-spike readout over C2 firing times.

    ``times`` may use ``None`` or ``inf`` for silent neurons. The earliest
    neuron wins; equal times go to the lowest index.
    """
    t = np.array([np.inf if v is None else v for v in times], dtype=np.float64)
    groups = np.asarray(groups)
    if len(groups) != len(t):
        raise InvalidInputError(f"group map covers {len(groups)} neurons, got {len(t)} times")
    if not np.isfinite(t).any():
        return SILENT
    f = int(np.argmin(t))
    return Decision(group=int(groups[f]), neuron=f, time=int(t[f]))


def forward(wave: SpikeWave, weights: np.ndarray, theta: float, groups, until_first=True):
    """S2 -> C2 -> decision for one wave; returns ``(decision, activity)``."""
    activity = s2_forward(wave, weights, theta, until_first)
    return decide(c2_pool(activity), groups), activity
