"""Gradient encoding on the devices.

Device ``i`` sends ``g_i = sum_{k held by i} grad f_k / d_k``.  Because each
subset gradient is split evenly across the ``d_k`` devices holding it, the coded
gradients of all devices sum to the full gradient.
"""

from __future__ import annotations

from typing import Mapping, NamedTuple

import numpy as np

from .allocation import Allocation
from .problem import ordered_sum


class CodedGradient(NamedTuple):
    device: int
    vector: np.ndarray


def encode_device(i: int, alloc: Allocation, local_grads: Mapping[int, np.ndarray]) -> CodedGradient:
    """Encode the gradients of the subsets held by device ``i``.

    ``local_grads`` must contain exactly those subsets.
    """
    held = alloc.subsets_of(i)
    if set(local_grads) != {int(k) for k in held}:
        missing = sorted(set(map(int, held)) - set(local_grads))
        extra = sorted(set(local_grads) - set(map(int, held)))
        raise ValueError(f"device {i}: missing subsets {missing}, unexpected subsets {extra}")
    if np.any(alloc.d[held] == 0):
        raise ValueError("replication count d_k = 0")
    terms = np.stack([np.asarray(local_grads[int(k)], dtype=np.float64) / alloc.d[k] for k in held])
    return CodedGradient(int(i), ordered_sum(terms))


def encode_all(alloc: Allocation, grads: np.ndarray) -> np.ndarray:
    """Coded gradients of every device, stacked as rows of an ``(N, D)`` array.

    ``grads`` holds one subset gradient per row.  Row ``i`` of the result is
    bit-identical to ``encode_device(i, ...).vector``.
    """
    grads = np.asarray(grads, dtype=np.float64)
    if grads.ndim != 2 or grads.shape[0] != alloc.M:
        raise ValueError(f"expected ({alloc.M}, D) subset gradients, got {grads.shape}")
    scaled = grads / alloc.d[:, None]
    # column j of ``members`` is each device's j-th smallest subset, so this
    # accumulates in ascending subset order, exactly like encode_device
    out = scaled[alloc.members[:, 0]]
    for j in range(1, alloc.r):
        out += scaled[alloc.members[:, j]]
    return out


def honest_average(messages: np.ndarray, honest) -> np.ndarray:
    """Mean of the messages sent by the devices listed in ``honest``."""
    honest = np.asarray(honest, dtype=np.int64)
    if honest.size == 0:
        raise ValueError("honest set is empty")
    messages = np.asarray(messages, dtype=np.float64)
    return ordered_sum(messages[honest]) / honest.size
