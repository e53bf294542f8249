"""Device-to-subset allocation matrices.

``S[i, k] == 1`` when device ``i`` holds subset ``k``.  Every device holds the
same number ``r`` of subsets, and ``d[k]`` counts the devices holding subset
``k``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _rng


class AllocationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Allocation:
    S: np.ndarray
    r: int
    seed: int | None = None
    scheme: str = "custom"
    d: np.ndarray = field(init=False, repr=False)
    members: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        S = np.array(self.S, dtype=np.int8)
        if S.ndim != 2 or not np.isin(S, (0, 1)).all():
            raise AllocationError("S must be a binary N x M matrix")
        rows = S.sum(axis=1)
        if not np.all(rows == self.r):
            bad = int(np.flatnonzero(rows != self.r)[0])
            raise AllocationError(f"row {bad} holds {rows[bad]} subsets, expected r={self.r}")
        d = S.sum(axis=0).astype(np.int64)
        if d.min() < 1:
            raise AllocationError(f"subset {int(np.argmin(d))} is not held by any device")
        # (N, r) sorted subset indices per device
        members = np.nonzero(S)[1].reshape(S.shape[0], self.r)
        for arr in (S, d, members):
            arr.flags.writeable = False
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "members", members)

    @property
    def N(self) -> int:
        return self.S.shape[0]

    @property
    def M(self) -> int:
        return self.S.shape[1]

    @property
    def d_min(self) -> int:
        return int(self.d.min())

    def subsets_of(self, i: int) -> np.ndarray:
        return self.members[i]

    def __eq__(self, other):
        if not isinstance(other, Allocation):
            return NotImplemented
        return self.r == other.r and np.array_equal(self.S, other.S)

    __hash__ = None


def allocate_non_redundant(N: int, M: int | None = None) -> Allocation:
    """Disjoint allocation: device ``i`` holds ``M // N`` consecutive subsets.

    With ``M == N`` (the default) this is the identity pattern.
    """
    M = N if M is None else M
    if N < 1 or M < 1:
        raise AllocationError("N and M must be positive")
    if M % N:
        raise AllocationError(f"non-redundant allocation needs M divisible by N, got M={M}, N={N}")
    r = M // N
    S = np.zeros((N, M), dtype=np.int8)
    for i in range(N):
        S[i, i * r:(i + 1) * r] = 1
    return Allocation(S, r, scheme="non_redundant")


def allocate_full_replication(N: int, M: int) -> Allocation:
    if N < 1 or M < 1:
        raise AllocationError("N and M must be positive")
    return Allocation(np.ones((N, M), dtype=np.int8), M, scheme="full")


def allocate_uniform_random(
    N: int, M: int, r: int, seed: int = 0, max_attempts: int = 20, repair: bool = True
) -> Allocation:
    """Each device draws an independent uniform ``r``-subset of the ``M`` subsets.

    If some subset ends up uncovered the whole matrix is redrawn from the next
    stream (attempt index ``1, 2, ...``).  At realistic sizes full coverage is
    rare (N=100, M=1000, r=40 leaves ~17 subsets uncovered on average), so once
    ``max_attempts`` draws fail the first draw is repaired instead: each
    uncovered subset replaces a uniformly chosen entry whose subset is held at
    least twice.  Row sums stay ``r``.  With ``repair=False`` the exhausted
    budget raises :class:`AllocationError`.
    """
    if N < 1 or M < 1:
        raise AllocationError("N and M must be positive")
    if not 1 <= r <= M:
        raise AllocationError(f"r must lie in [1, M={M}], got {r}")
    if N * r < M:
        raise AllocationError(f"N*r = {N * r} < M = {M}: some subset is necessarily uncovered")
    first = None
    for attempt in range(max_attempts):
        S = _independent_rows(N, M, r, _rng.stream(seed, _rng.ALLOCATION, attempt))
        if S.sum(axis=0).min() >= 1:
            return Allocation(S, r, seed=seed, scheme="random")
        if first is None:
            first = S
    if not repair or first is None:
        raise AllocationError(f"no allocation covering all {M} subsets after {max_attempts} attempts")
    return Allocation(_repair(first, _rng.stream(seed, _rng.ALLOCATION, max_attempts)), r, seed=seed, scheme="random")


def _independent_rows(N, M, r, rng):
    S = np.zeros((N, M), dtype=np.int8)
    for i in range(N):
        S[i, rng.choice(M, size=r, replace=False)] = 1
    return S


def _repair(S, rng):
    S = S.copy()
    d = S.sum(axis=0)
    for k in np.flatnonzero(d == 0):
        rows, cols = np.nonzero(S[:, d >= 2])
        donors = np.flatnonzero(d >= 2)
        pick = rng.integers(rows.size)
        i, k_old = rows[pick], donors[cols[pick]]
        S[i, k_old] = 0
        S[i, k] = 1
        d[k_old] -= 1
        d[k] += 1
    return S


def allocate_balanced_random(N: int, M: int, r: int, seed: int = 0) -> Allocation:
    """Random allocation whose replication counts differ by at most one.

    Devices take ``r`` consecutive entries from a stream of concatenated random
    permutations of the subsets; an entry already held by the device is pushed
    back for the next device.  When ``N r / M`` is an integer every subset is
    held exactly that many times, so ``d_min M = N r``.
    """
    if N < 1 or M < 1:
        raise AllocationError("N and M must be positive")
    if not 1 <= r <= M:
        raise AllocationError(f"r must lie in [1, M={M}], got {r}")
    if N * r < M:
        raise AllocationError(f"N*r = {N * r} < M = {M}: some subset is necessarily uncovered")
    rng = _rng.stream(seed, _rng.ALLOCATION, 0)
    S = np.zeros((N, M), dtype=np.int8)
    queue = deque()
    for i in range(N):
        held = set()
        deferred = []
        while len(held) < r:
            if not queue:
                queue.extend(int(k) for k in rng.permutation(M))
            k = queue.popleft()
            if k in held:
                deferred.append(k)
            else:
                held.add(k)
        queue.extendleft(reversed(deferred))
        S[i, sorted(held)] = 1
    return Allocation(S, r, seed=seed, scheme="balanced")


def allocate(scheme: str, N: int, M: int, r: int | None = None, seed: int = 0) -> Allocation:
    """Dispatch on the scheme name used in run configurations."""
    if scheme == "non_redundant":
        return allocate_non_redundant(N, M)
    if scheme == "full":
        return allocate_full_replication(N, M)
    if scheme in ("random", "balanced"):
        if r is None:
            raise AllocationError(f"{scheme} allocation needs r")
        if scheme == "random":
            return allocate_uniform_random(N, M, r, seed)
        return allocate_balanced_random(N, M, r, seed)
    raise AllocationError(f"unknown allocation scheme {scheme!r}")


def pairwise_overlap(S, i: int, j: int) -> int:
    """Number of subsets held by both devices ``i`` and ``j``."""
    S = _matrix(S)
    return int(np.count_nonzero(S[i] & S[j]))


@dataclass(frozen=True)
class BalanceReport:
    ideal_overlap: float
    min_overlap: int
    mean_overlap: float
    max_overlap: int
    max_deviation: float
    # symdiff[i, j] = |row_i \ row_j|
    symdiff: np.ndarray = field(repr=False)

    @property
    def exact(self) -> bool:
        """True when every pair shares exactly ``r^2 / M`` subsets."""
        return self.max_deviation == 0.0

    @property
    def max_symdiff(self) -> int:
        return int(self.symdiff.max())


def balance_diagnostics(S) -> BalanceReport:
    S = _matrix(S).astype(np.int64)
    N, M = S.shape
    r = int(S[0].sum())
    ideal = r * r / M
    overlap = S @ S.T
    symdiff = S.sum(axis=1)[:, None] - overlap
    if N < 2:
        pairs = np.array([ideal])
    else:
        pairs = overlap[np.triu_indices(N, k=1)]
    return BalanceReport(
        ideal_overlap=ideal,
        min_overlap=int(pairs.min()),
        mean_overlap=float(pairs.mean()),
        max_overlap=int(pairs.max()),
        max_deviation=float(np.abs(pairs - ideal).max()),
        symdiff=symdiff,
    )


def _matrix(S):
    if isinstance(S, Allocation):
        return S.S
    return np.asarray(S, dtype=np.int8)


def save_allocation(alloc: Allocation, path) -> None:
    """Header ``N M r seed`` followed by one line of sorted subset indices per device."""
    seed = -1 if alloc.seed is None else alloc.seed
    with open(path, "w") as fh:
        fh.write(f"{alloc.N} {alloc.M} {alloc.r} {seed}\n")
        for row in alloc.members:
            fh.write(" ".join(str(int(k)) for k in row) + "\n")


def load_allocation(path) -> Allocation:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise AllocationError(f"{path}:1: expected header 'N M r seed'")
        N, M, r, seed = (int(v) for v in header)
        S = np.zeros((N, M), dtype=np.int8)
        rows = 0
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            if rows >= N:
                raise AllocationError(f"{path}:{lineno}: more than N={N} device lines")
            idx = [int(v) for v in line.split()]
            if len(idx) != r or len(set(idx)) != r or not all(0 <= k < M for k in idx):
                raise AllocationError(f"{path}:{lineno}: expected {r} distinct indices in [0, {M})")
            S[rows, idx] = 1
            rows += 1
    if rows != N:
        raise AllocationError(f"{path}: header declares {N} devices, found {rows}")
    return Allocation(S, r, seed=None if seed < 0 else seed, scheme="loaded")
