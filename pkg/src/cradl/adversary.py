"""Byzantine identities and attacks.

Identities are redrawn every iteration: a uniformly random ``round(alpha N)``
subset of devices is Byzantine, from a stream keyed by ``(seed, iteration)``.
Attacks see the honest messages of the same iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _rng
from .aggregation import byzantine_count

ATTACKS = ("signflip", "gaussian", "duplicate")


class IdentitySample(NamedTuple):
    honest: np.ndarray
    byzantine: np.ndarray
    iteration: int

    def mask(self, N: int) -> np.ndarray:
        """Honest indicator vector ``h`` (1 = honest)."""
        h = np.zeros(N, dtype=np.int8)
        h[self.honest] = 1
        return h


def sample_identities(N: int, alpha: float, iteration: int, seed: int = 0) -> IdentitySample:
    if not 0 <= alpha < 0.5:
        raise ValueError(f"alpha must lie in [0, 0.5), got {alpha}")
    if N < 1:
        raise ValueError("N must be positive")
    n_byz = byzantine_count(N, alpha)
    rng = _rng.stream(seed, _rng.IDENTITY, iteration)
    byz = np.sort(rng.choice(N, size=n_byz, replace=False))
    is_byz = np.zeros(N, dtype=bool)
    is_byz[byz] = True
    return IdentitySample(np.flatnonzero(~is_byz), byz, int(iteration))


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    coefficient: float = -2.0
    variance: float = 10000.0

    def __post_init__(self):
        if self.kind not in ATTACKS:
            raise ValueError(f"unknown attack {self.kind!r}; expected one of {', '.join(ATTACKS)}")
        if self.kind == "signflip" and not self.coefficient < 0:
            raise ValueError(f"sign-flip coefficient must be negative, got {self.coefficient}")
        if self.kind == "gaussian" and not self.variance > 0:
            raise ValueError(f"Gaussian attack variance must be positive, got {self.variance}")

    def __str__(self):
        if self.kind == "signflip":
            return f"signflip:{self.coefficient:g}"
        if self.kind == "gaussian":
            return f"gaussian:{self.variance:g}"
        return "duplicate"

    @classmethod
    def parse(cls, text: str) -> "AttackSpec":
        """Parse ``signflip[:<coef>] | gaussian[:<var>] | duplicate``."""
        name, _, arg = text.strip().partition(":")
        name = name.strip().lower()
        if name == "signflip":
            return cls(name, coefficient=float(arg) if arg else -2.0)
        if name == "gaussian":
            return cls(name, variance=float(arg) if arg else 10000.0)
        if name == "duplicate" and not arg:
            return cls(name)
        raise ValueError(f"bad attack {text!r}; grammar: signflip:<coef> | gaussian:<var> | duplicate")


def attack_sign_flip(true_msg, coefficient: float = -2.0) -> np.ndarray:
    return coefficient * np.asarray(true_msg, dtype=np.float64)


def attack_gaussian(D: int, variance: float = 10000.0, rng=None) -> np.ndarray:
    if D < 1:
        raise ValueError("D must be positive")
    rng = np.random.default_rng() if rng is None else rng
    return np.sqrt(variance) * rng.standard_normal(D)


def attack_sample_duplicate(honest_msgs, rng=None) -> np.ndarray:
    """Copy of one uniformly chosen honest message."""
    honest_msgs = np.asarray(honest_msgs, dtype=np.float64)
    if honest_msgs.ndim != 2 or honest_msgs.shape[0] == 0:
        raise ValueError("sample duplication needs at least one honest message")
    rng = np.random.default_rng() if rng is None else rng
    return honest_msgs[rng.integers(honest_msgs.shape[0])].copy()


def byzantine_messages(attack: AttackSpec, true_msgs: np.ndarray, ids: IdentitySample, seed: int = 0) -> np.ndarray:
    """Messages sent by the Byzantine devices of ``ids``, in the order of ``ids.byzantine``.

    ``true_msgs`` holds what every device would send if honest.  Each Byzantine
    device draws from its own stream keyed by ``(seed, iteration, device)``.
    """
    true_msgs = np.asarray(true_msgs, dtype=np.float64)
    D = true_msgs.shape[1]
    out = np.empty((ids.byzantine.size, D))
    honest_msgs = true_msgs[ids.honest]
    for row, j in enumerate(ids.byzantine):
        if attack.kind == "signflip":
            out[row] = attack_sign_flip(true_msgs[j], attack.coefficient)
            continue
        rng = _rng.stream(seed, _rng.ATTACK, ids.iteration, int(j))
        if attack.kind == "gaussian":
            out[row] = attack_gaussian(D, attack.variance, rng)
        else:
            out[row] = attack_sample_duplicate(honest_msgs, rng)
    return out
