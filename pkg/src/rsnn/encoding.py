"""Intensity-to-latency (rank-order) coding of S1 responses into spike waves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError


@dataclass(frozen=True)
class SpikeWave:
    """
    An ordered sequence of spikes, one per time step.

    ``addresses[k]`` is the ``(map, row, col)`` of the spike emitted at time
    step ``k + 1``; time is therefore implicit and always consecutive.
    ``dims`` is the ``(maps, rows, cols)`` extent of the emitting layer.
    """

    addresses: np.ndarray
    dims: tuple

    def __post_init__(self):
        addr = np.asarray(self.addresses, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "addresses", addr)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    def __len__(self):
        return len(self.addresses)

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, len(self) + 1, dtype=np.int64)

    def events(self):
        """Iterate ``(t, map, row, col)`` tuples."""
        for t, (m, r, c) in enumerate(self.addresses.tolist(), start=1):
            yield t, m, r, c

    def latency_map(self) -> np.ndarray:
        """Dense ``dims``-shaped array of spike times, ``inf`` where silent."""
        lat = np.full(self.dims, np.inf)
        if len(self):
            m, r, c = self.addresses.T
            lat[m, r, c] = self.times
        return lat

    @classmethod
    def empty(cls, dims):
        return cls(np.zeros((0, 3), dtype=np.int64), dims)

    @classmethod
    def from_latencies(cls, latencies: np.ndarray) -> "SpikeWave":
        """
        Serialise a dense latency array (``inf`` = no spike) into a wave.

        Cells are ordered by ascending latency with ``(map, row, col)``
        breaking ties, and renumbered ``t = 1, 2, ...``.
        """
        lat = np.asarray(latencies, dtype=np.float64)
        m, r, c = np.nonzero(np.isfinite(lat))
        order = np.lexsort((c, r, m, lat[m, r, c]))
        return cls(np.column_stack((m[order], r[order], c[order])), lat.shape)


def encode_latency(stack: np.ndarray, activation_floor: float = 0.0) -> SpikeWave:
    """
    Convert a ``(maps, rows, cols)`` response stack into a spike wave.

    Saliency is the absolute response. Cells whose saliency does not exceed
    ``activation_floor`` stay silent; the rest fire in order of decreasing
    saliency, ties broken by ``(map, row, col)``.
    """
    values = np.asarray(stack, dtype=np.float64)
    if values.ndim != 3 or min(values.shape) == 0:
        raise InvalidInputError(f"feature stack must be a non-empty 3-D array, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("feature stack contains non-finite values")
    if activation_floor < 0:
        raise InvalidParameterError("activation_floor must be >= 0")
    sal = np.abs(values)
    m, r, c = np.nonzero(sal > activation_floor)
    order = np.lexsort((c, r, m, -sal[m, r, c]))
    return SpikeWave(np.column_stack((m[order], r[order], c[order])), values.shape)


def relative_floor(stack: np.ndarray, fraction: float) -> float:
    """Absolute activation floor equal to ``fraction`` of the peak saliency."""
    peak = float(np.max(np.abs(stack))) if np.size(stack) else 0.0
    return fraction * peak
