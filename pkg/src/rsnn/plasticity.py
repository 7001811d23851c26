"""
Learning rules for S2 shared weights.

Reward-modulated STDP with outcome-balanced adjustment factors, plain
unsupervised STDP for the baseline network, winner-take-all selection and the
S2 feature vectors used by external classifiers.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractViolation, InvalidParameterError
from .network import S2Activity


class Signal(enum.Enum):
    REWARD = "reward"
    PUNISH = "punish"
    NONE = "none"


class Outcome(enum.Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    SILENT = "silent"


@dataclass(frozen=True)
class LearningConfig:
    """Magnitudes of the four R-STDP branches plus the outcome-window length."""

    m_r_plus: float
    m_r_minus: float
    m_p_plus: float
    m_p_minus: float
    window_n: int = 100
    theta: Optional[float] = None

    def __post_init__(self):
        if not (self.m_r_plus > 0 and self.m_p_plus > 0):
            raise InvalidParameterError("m_r_plus and m_p_plus must be positive")
        if not (self.m_r_minus < 0 and self.m_p_minus < 0):
            raise InvalidParameterError("m_r_minus and m_p_minus must be negative")
        if self.window_n < 1:
            raise InvalidParameterError("window_n must be a positive integer")


def signal_for(decided: Optional[int], label: int) -> Signal:
    """Reward a correct decision, punish a wrong one, stay quiet on silence."""
    if decided is None:
        return Signal.NONE
    return Signal.REWARD if decided == label else Signal.PUNISH


def rstdp_delta(w, pre_not_after_post, signal: Signal, a_r: float, a_p: float,
                cfg: LearningConfig):
    """
    R-STDP weight change; vectorises over ``w`` and ``pre_not_after_post``.

    ``pre_not_after_post`` is true where the presynaptic spike came no later
    than the postsynaptic one. The soft-bound factor ``w (1 - w)`` keeps the
    result inside [0, 1] for small steps and makes 0 and 1 fixed points.
    """
    if signal is Signal.REWARD:
        causal = a_r * cfg.m_r_plus
        acausal = a_r * cfg.m_r_minus
    elif signal is Signal.PUNISH:
        causal = a_p * cfg.m_p_minus
        acausal = a_p * cfg.m_p_plus
    else:
        raise ContractViolation("no reinforcement signal: weights must not be updated")
    w = np.asarray(w, dtype=np.float64)
    gamma = np.where(pre_not_after_post, causal, acausal)
    out = gamma * w * (1.0 - w)
    return out if out.ndim else float(out)


def stdp_delta(w, pre_not_after_post, a_plus: float = 0.004, a_minus: float = -0.003):
    """Unsupervised multiplicative STDP: potentiate causal, depress acausal synapses."""
    w = np.asarray(w, dtype=np.float64)
    out = np.where(pre_not_after_post, a_plus, a_minus) * w * (1.0 - w)
    return out if out.ndim else float(out)


class OutcomeWindow:
    """
    Sliding record of the last ``capacity`` labelled training outcomes.

    Silent trials carry no reinforcement and are not stored. The adjustment
    factors are computed over the outcomes currently held, so they sum to 1
    once anything has been recorded and are both 0 before that.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise InvalidParameterError("outcome window capacity must be >= 1")
        self.capacity = int(capacity)
        self._buf = deque(maxlen=self.capacity)

    def __len__(self):
        return len(self._buf)

    @property
    def n_correct(self) -> int:
        return sum(1 for o in self._buf if o is Outcome.CORRECT)

    @property
    def n_incorrect(self) -> int:
        return sum(1 for o in self._buf if o is Outcome.INCORRECT)

    def factors(self):
        """``(A_r, A_p)`` = (fraction incorrect, fraction correct)."""
        n = len(self._buf)
        if n == 0:
            return 0.0, 0.0
        return self.n_incorrect / n, self.n_correct / n

    def push(self, outcome: Outcome) -> None:
        if outcome is not Outcome.SILENT:
            self._buf.append(outcome)


def update_window(window: OutcomeWindow, outcome: Outcome):
    window.push(outcome)
    return window.factors()


def select_winner(activity: S2Activity, lattice: Optional[int] = None):
    """
    Earliest-firing S2 neuron as ``(lattice, row, col)``, or ``None``.

    Equal spike times favour the higher potential, then the lexicographically
    smallest address. Passing ``lattice`` restricts the competition to one
    lattice.
    """
    t = activity.spike_times
    v = activity.potentials
    if lattice is not None:
        t = t[lattice:lattice + 1]
        v = v[lattice:lattice + 1]
    fired = np.isfinite(t)
    if not fired.any():
        return None
    k, r, c = np.nonzero(fired)
    best = np.lexsort((c, r, k, -v[k, r, c], t[k, r, c]))[0]
    offset = 0 if lattice is None else lattice
    return int(k[best]) + offset, int(r[best]), int(c[best])


def afferent_times(c1_latencies: np.ndarray, winner, w_s2: int) -> np.ndarray:
    """``(maps, w_s2, w_s2)`` spike times feeding the S2 neuron at ``winner``."""
    _, r, c = winner
    return c1_latencies[:, r:r + w_s2, c:c + w_s2]


def apply_update(weights: np.ndarray, winner, pre_times: np.ndarray, post_time: float,
                 signal: Signal, window: OutcomeWindow, cfg: LearningConfig) -> np.ndarray:
    """
    R-STDP update of the winning lattice's shared weights, in place.

    ``weights`` is the full ``(n, maps, w, w)`` tensor; only
    ``weights[winner[0]]`` changes. Afferents that never fired count as
    firing after the postsynaptic spike. Returns ``weights``.
    """
    lattice = winner[0]
    if not 0 <= lattice < weights.shape[0]:
        raise ContractViolation(f"winner lattice {lattice} outside tensor of {weights.shape[0]}")
    if pre_times.shape != weights.shape[1:]:
        raise ContractViolation(
            f"afferent times {pre_times.shape} do not match synapses {weights.shape[1:]}")
    a_r, a_p = window.factors()
    w = weights[lattice]
    causal = pre_times <= post_time
    w += rstdp_delta(w, causal, signal, a_r, a_p, cfg)
    np.clip(w, 0.0, 1.0, out=w)
    return weights


def apply_stdp_update(weights: np.ndarray, winner, pre_times: np.ndarray, post_time: float,
                      a_plus: float = 0.004, a_minus: float = -0.003) -> np.ndarray:
    """Unsupervised counterpart of :func:`apply_update` for the baseline network."""
    w = weights[winner[0]]
    w += stdp_delta(w, pre_times <= post_time, a_plus, a_minus)
    np.clip(w, 0.0, 1.0, out=w)
    return weights


FEATURE_KINDS = ("first_spike", "spike_count", "max_potential")


def extract_features(activity: S2Activity, kind: str) -> np.ndarray:
    """Length-``n`` S2 feature vector of the requested kind."""
    kind = kind.replace("-", "_")
    n = activity.n_lattices
    if kind == "first_spike":
        vec = np.zeros(n)
        w = select_winner(activity)
        if w is not None:
            vec[w[0]] = 1.0
        return vec
    if kind in ("spike_count", "count"):
        return activity.fired.reshape(n, -1).sum(axis=1).astype(np.float64)
    if kind in ("max_potential", "potential"):
        return activity.potentials.reshape(n, -1).max(axis=1)
    raise InvalidParameterError(f"unknown feature kind {kind!r}; expected one of {FEATURE_KINDS}")
