"""Robust bounded aggregation (RBA) rules.

Each rule maps a stack of ``N`` messages (rows of an ``(N, D)`` array) to one
vector.  A rule is RBA when, for honest messages ``z_1..z_n1`` mixed with
Byzantine ones at fraction ``alpha``,

    ||A(...) - mean(z)||^2 <= C_alpha^2 * max_i ||mean(z) - z_i||^2.

:func:`c_alpha_sq` returns the tabulated ``C_alpha^2`` for every rule and
:func:`robust_bound_check` measures both sides on a concrete instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _rng
from .problem import ordered_sum

KINDS = ("mean", "median", "trimmed", "geomedian", "krum", "phocas", "faba")

# Rules whose C_alpha^2 is only defined below these fractions.
ALPHA_LIMITS = {
    "median": 0.5,
    "trimmed": 0.5,
    "geomedian": 0.5,
    "krum": 0.5,
    "phocas": 0.5,
    "faba": 1.0 / 3.0,
}


class InfeasibleRule(ValueError):
    """The rule cannot run (or is undefined) for the given N and alpha."""


@dataclass(frozen=True)
class RbaRuleSpec:
    """Rule name plus parameters.

    ``trim`` is a per-side fraction for ``trimmed`` and ``phocas``; ``count`` is
    the Byzantine count ``f`` for ``krum`` and the number of removals for
    ``faba``.  Unset parameters are derived from ``alpha`` at aggregation time.
    """

    kind: str
    trim: float | None = None
    count: int | None = None
    tol: float = 1e-10
    max_iter: int = 1000

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown rule {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.trim is not None and not 0 <= self.trim < 0.5:
            raise ValueError(f"trim fraction must lie in [0, 0.5), got {self.trim}")
        if self.count is not None and self.count < 0:
            raise ValueError(f"count must be non-negative, got {self.count}")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")

    def __str__(self):
        if self.kind == "trimmed" and self.trim is not None:
            return f"trimmed:{self.trim:g}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "RbaRuleSpec":
        """Parse ``mean | median | trimmed[:<frac>] | geomedian | krum | phocas | faba``."""
        name, _, arg = text.strip().partition(":")
        name = name.strip().lower()
        if name not in KINDS:
            raise ValueError(f"unknown rule {text!r}; grammar: mean | median | trimmed:<frac> | geomedian | krum | phocas | faba")
        if name == "trimmed":
            return cls(name, trim=float(arg) if arg else None)
        if arg:
            raise ValueError(f"rule {name!r} takes no argument, got {text!r}")
        return cls(name)


def _ceil(x):
    # guards 0.3 * 10 = 3.0000000000000004 style round-up
    return math.ceil(x - 1e-9)


def byzantine_count(N: int, alpha: float) -> int:
    """Number of Byzantine devices for fraction ``alpha``: ``round(alpha * N)``."""
    return int(round(alpha * N))


def _stack(messages):
    arr = np.asarray(messages, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"messages must be an (N, D) array, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("no messages to aggregate")
    return arr


# -- rules -------------------------------------------------------------------


def mean(messages) -> np.ndarray:
    z = _stack(messages)
    return ordered_sum(z) / z.shape[0]


def coord_median(messages) -> np.ndarray:
    """Coordinate-wise median; an even count averages the two central values."""
    z = np.sort(_stack(messages), axis=0)
    n = z.shape[0]
    if n % 2:
        return z[n // 2].copy()
    return 0.5 * (z[n // 2 - 1] + z[n // 2])


def trimmed_mean(messages, per_side: int) -> np.ndarray:
    """Per coordinate, drop the ``per_side`` smallest and largest values and average the rest."""
    z = np.sort(_stack(messages), axis=0)
    n = z.shape[0]
    if per_side < 0 or 2 * per_side >= n:
        raise InfeasibleRule(f"cannot trim {per_side} per side from {n} messages")
    kept = z[per_side:n - per_side]
    return ordered_sum(kept) / kept.shape[0]


def phocas(messages, trim: int) -> np.ndarray:
    """Average, per coordinate, the ``N - trim`` values nearest the ``trim``-trimmed mean."""
    z = _stack(messages)
    n = z.shape[0]
    center = trimmed_mean(z, trim)
    keep = n - trim
    # stable ordering on (distance, value) keeps the choice permutation invariant
    dist = np.abs(z - center)
    order = np.lexsort((z, dist), axis=0)[:keep]
    chosen = np.sort(np.take_along_axis(z, order, axis=0), axis=0)
    return ordered_sum(chosen) / keep


class WeiszfeldResult(NamedTuple):
    point: np.ndarray
    converged: bool
    iterations: int


def weiszfeld(messages, tol: float = 1e-10, max_iter: int = 1000) -> WeiszfeldResult:
    """Geometric median by Weiszfeld iteration.

    When the iterate lands on an input point the Vardi-Zhang modification is
    used: the point is optimal if the pull of the remaining points does not
    exceed its multiplicity, otherwise the iterate is moved off it.
    Convergence is declared when the step is below ``tol * (1 + |y|)``.
    """
    z = _stack(messages)
    # canonical order so the result does not depend on message order
    z = z[np.lexsort(z.T[::-1])]
    n = z.shape[0]
    y = ordered_sum(z) / n
    scale = 1.0 + float(np.abs(z).max())
    for it in range(1, max_iter + 1):
        diff = z - y
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        tie = dist <= 1e-14 * scale
        w = np.zeros(n)
        w[~tie] = 1.0 / dist[~tie]
        if not np.any(~tie):
            return WeiszfeldResult(y, True, it)
        target = (w @ z) / w.sum()
        if np.any(tie):
            mult = int(tie.sum())
            pull = np.linalg.norm(w @ diff)
            if pull <= mult:
                return WeiszfeldResult(y, True, it)
            step = min(1.0, mult / pull)
            new = (1.0 - step) * target + step * y
        else:
            new = target
        moved = np.linalg.norm(new - y)
        y = new
        if moved <= tol * (1.0 + np.linalg.norm(y)):
            return WeiszfeldResult(y, True, it)
    return WeiszfeldResult(y, False, max_iter)


def geometric_median(messages, tol: float = 1e-10, max_iter: int = 1000) -> np.ndarray:
    return weiszfeld(messages, tol, max_iter).point


def krum_scores(messages, f: int) -> np.ndarray:
    """Sum of squared distances from each message to its ``N - f - 2`` nearest others."""
    z = _stack(messages)
    n = z.shape[0]
    k = n - f - 2
    if k < 1:
        raise InfeasibleRule(f"Krum needs N - f - 2 >= 1, got N={n}, f={f}")
    diff = z[:, None, :] - z[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(sq, np.inf)
    nearest = np.sort(sq, axis=1)[:, :k]
    return np.add.reduce(nearest, axis=1)


def krum(messages, f: int) -> np.ndarray:
    """The message with the smallest Krum score.

    Ties go to the lexicographically smallest vector, then the lowest index.
    """
    z = _stack(messages)
    scores = krum_scores(z, f)
    best = np.flatnonzero(scores == scores.min())
    if best.size > 1:
        cand = z[best]
        best = best[np.lexsort(cand.T[::-1])]
    return z[best[0]].copy()


def faba(messages, removals: int) -> np.ndarray:
    """Drop, one at a time, the message farthest from the running mean; average the rest."""
    z = _stack(messages)
    z = z[np.lexsort(z.T[::-1])]
    if removals < 0 or removals >= z.shape[0]:
        raise InfeasibleRule(f"FABA cannot remove {removals} of {z.shape[0]} messages")
    keep = np.ones(z.shape[0], dtype=bool)
    for _ in range(removals):
        center = mean(z[keep])
        dist = np.einsum("ij,ij->i", z - center, z - center)
        dist[~keep] = -np.inf
        keep[int(np.argmax(dist))] = False
    return mean(z[keep])


# -- dispatch ----------------------------------------------------------------


def resolve_parameter(rule: RbaRuleSpec, N: int, alpha: float):
    """Concrete trim count / Byzantine count used by ``rule`` for ``N`` messages."""
    if rule.kind == "trimmed":
        frac = alpha if rule.trim is None else rule.trim
        return _ceil(frac * N)
    if rule.kind == "phocas":
        frac = alpha if rule.trim is None else rule.trim
        return _ceil(frac * N)
    if rule.kind in ("krum", "faba"):
        return byzantine_count(N, alpha) if rule.count is None else rule.count
    return None


def check_feasible(rule: RbaRuleSpec, N: int, alpha: float) -> None:
    """Raise :class:`InfeasibleRule` if ``rule`` cannot aggregate ``N`` messages at ``alpha``."""
    if N < 1:
        raise InfeasibleRule("no messages")
    if not 0 <= alpha < 1:
        raise InfeasibleRule(f"alpha must lie in [0, 1), got {alpha}")
    limit = ALPHA_LIMITS.get(rule.kind)
    if limit is not None and alpha >= limit:
        raise InfeasibleRule(f"{rule.kind} requires alpha < {limit:.4g}, got {alpha}")
    p = resolve_parameter(rule, N, alpha)
    if rule.kind in ("trimmed", "phocas") and 2 * p >= N:
        raise InfeasibleRule(f"{rule.kind} would trim {p} per side from {N} messages")
    if rule.kind == "krum" and N - p - 2 < 1:
        raise InfeasibleRule(f"Krum needs N - f - 2 >= 1, got N={N}, f={p}")
    if rule.kind == "faba" and p >= N:
        raise InfeasibleRule(f"FABA cannot remove {p} of {N} messages")


def aggregate(rule: RbaRuleSpec, messages, alpha: float = 0.0) -> np.ndarray:
    z = _stack(messages)
    n = z.shape[0]
    check_feasible(rule, n, alpha)
    p = resolve_parameter(rule, n, alpha)
    if rule.kind == "mean":
        return mean(z)
    if rule.kind == "median":
        return coord_median(z)
    if rule.kind == "trimmed":
        return trimmed_mean(z, p)
    if rule.kind == "phocas":
        return phocas(z, p)
    if rule.kind == "geomedian":
        return geometric_median(z, rule.tol, rule.max_iter)
    if rule.kind == "krum":
        return krum(z, p)
    return faba(z, p)


def c_alpha_sq(kind, alpha: float, N: int, D: int) -> float:
    """Tabulated robustness constant ``C_alpha^2``.

    The plain mean is not robust: its constant is 0 at ``alpha = 0`` and
    infinite otherwise.
    """
    if isinstance(kind, RbaRuleSpec):
        kind = kind.kind
    if kind not in KINDS:
        raise ValueError(f"unknown rule {kind!r}")
    if N < 2:
        raise ValueError("C_alpha^2 needs N >= 2")
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    if kind == "mean":
        return 0.0 if alpha == 0 else math.inf
    limit = ALPHA_LIMITS[kind]
    if alpha >= limit:
        raise ValueError(f"C_alpha^2 for {kind} is defined for 0 <= alpha < {limit:.4g}, got {alpha}")
    a = alpha
    if kind == "median":
        m = min(2.0 * math.sqrt(N - N * a), math.sqrt(D))
        return m * m / (2.0 * (1.0 - a) ** 2)
    if kind == "trimmed":
        return 2.0 * a * (1.0 - a) / (1.0 - 2.0 * a) ** 2
    if kind == "geomedian":
        return (2.0 * (1.0 - a) / (1.0 - 2.0 * a)) ** 2
    if kind == "krum":
        return 2.0 * (1.0 + math.sqrt((1.0 - a) / (1.0 - 2.0 * a))) ** 2
    if kind == "phocas":
        return 4.0 + 12.0 * a * (1.0 - a) / (1.0 - 2.0 * a) ** 2
    # faba
    na = N * a
    return 4.0 * (na / (N - na) + (N + 1 - na) / (N - na) * na / (N - 3 * na))


@dataclass(frozen=True)
class RobustBoundReport:
    lhs: float
    varsigma: float
    c_alpha_sq: float
    satisfied: bool


def spread(honest) -> float:
    """``max_i ||mean(honest) - z_i||^2``."""
    z = _stack(honest)
    dev = z - mean(z)
    return float(np.einsum("ij,ij->i", dev, dev).max())


def robust_bound_check(rule: RbaRuleSpec, honest, byzantine, alpha: float | None = None, seed: int = 0) -> RobustBoundReport:
    """Measure both sides of the RBA inequality on one instance.

    The honest and Byzantine messages are shuffled together (stream keyed by
    ``seed``) before aggregation, so the rule never sees who is who.
    """
    h = _stack(honest)
    b = np.asarray(byzantine, dtype=np.float64).reshape(-1, h.shape[1])
    n = h.shape[0] + b.shape[0]
    frac = b.shape[0] / n
    if alpha is None:
        alpha = frac
    elif abs(alpha - frac) > 0.5 / n:
        raise ValueError(f"alpha={alpha} does not match {b.shape[0]} Byzantine of {n} messages")
    union = np.vstack([h, b])
    union = union[_rng.stream(seed, _rng.SHUFFLE).permutation(n)]
    out = aggregate(rule, union, alpha)
    zbar = mean(h)
    lhs = float(np.sum((out - zbar) ** 2))
    vs = spread(h)
    c2 = c_alpha_sq(rule.kind, alpha, n, h.shape[1])
    ok = lhs <= c2 * vs + 1e-9 * (1.0 + vs)
    return RobustBoundReport(lhs, vs, c2, bool(ok))
