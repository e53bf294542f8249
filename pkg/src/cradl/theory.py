"""Convergence constants and numerical checks of the CRA-DL analysis.

The quantities here follow the analysis of coded robust aggregation with
non-convex losses: smoothness ``L``, heterogeneity bound ``beta``, the identity
moments ``phi1, phi2``, the step-size constants ``rho1..rho4`` and the bounds
they generate.  Each ``*_check`` function evaluates one inequality on concrete
data and reports both sides instead of asserting.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from statistics import NormalDist
from typing import NamedTuple

import numpy as np

from . import problem
from .adversary import sample_identities
from .aggregation import byzantine_count, c_alpha_sq as _c_alpha_sq
from .allocation import Allocation, balance_diagnostics
from .coding import encode_all, honest_average


class PowerIteration(NamedTuple):
    value: float
    converged: bool
    iterations: int


def estimate_L(dataset: problem.Dataset, tol: float = 1e-10, max_iter: int = 10_000, full_output: bool = False):
    """Smoothness constant of ``F``: the top eigenvalue of ``sum_k z_k z_k^T``.

    Power iteration on the Gram matrix, stopped when the Rayleigh quotient
    changes by less than ``tol`` relative.  With ``full_output=True`` a
    :class:`PowerIteration` (value, converged flag, iterations) is returned.
    """
    if dataset.m == 0:
        raise ValueError("empty dataset")
    H = dataset.features.T @ dataset.features
    v = np.ones(H.shape[0]) / math.sqrt(H.shape[0])
    value = float(v @ H @ v)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = H @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            value, converged = 0.0, True
            break
        v = w / norm
        new = float(v @ H @ v)
        if abs(new - value) <= tol * abs(new):
            value, converged = new, True
            break
        value = new
    result = PowerIteration(value, converged, it)
    return result if full_output else result.value


def estimate_beta(dataset: problem.Dataset, x) -> float:
    """``max_k ||grad f_k(x) - grad F(x) / M||`` at one point."""
    grads = problem.subset_grads(x, dataset)
    full = problem.ordered_sum(grads)
    dev = grads - full / dataset.num_subsets
    return float(np.sqrt(np.einsum("ij,ij->i", dev, dev).max()))


def phi_constants(alpha: float, N: int) -> tuple[float, float]:
    """Probability that one device is honest, and that two given devices both are."""
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if N < 2:
        raise ValueError("N must be at least 2")
    phi1 = 1.0 - alpha
    phi2 = (1.0 - alpha) * (N - N * alpha - 1.0) / (N - 1.0)
    return phi1, phi2


def _gap(r, M):
    return r - r * r / M


@dataclass(frozen=True)
class TheoryConstants:
    L: float
    beta: float
    f_star: float
    alpha: float
    N: int
    M: int
    r: int
    d_min: int
    c_alpha_sq: float
    phi1: float
    phi2: float
    rho1: float
    rho2: float
    rho3: float
    rho4: float
    eta: float

    def as_dict(self) -> dict:
        return asdict(self)


def rho_constants(L, beta, alpha, N, M, r, d_min, c_alpha_sq) -> tuple[float, float, float, float]:
    phi1, phi2 = phi_constants(alpha, N)
    gap = _gap(r, M)
    root = math.sqrt(2.0 * c_alpha_sq)
    one_minus = (1.0 - alpha) ** 2
    b2 = beta * beta
    d2 = d_min * d_min
    rho1 = 1.0 / N - 2.0 * gap * root / (d_min * M)
    rho2 = (
        (phi1 - phi2) * 2.0 * r * r * L / (one_minus * N * d2 * M * M)
        + phi2 * L / (one_minus * N * N)
        + 8.0 * L * c_alpha_sq * gap * gap / (d2 * M * M)
    )
    rho3 = b2 * M * root * gap / d_min
    rho4 = (phi1 - phi2) * 2.0 * r * r * b2 * L / (one_minus * N * d2) + 8.0 * c_alpha_sq * b2 * L * gap * gap / d2
    return rho1, rho2, rho3, rho4


def make_constants(L, beta, alpha, N, M, r, d_min, c_alpha_sq, f_star: float = 0.0) -> TheoryConstants:
    phi1, phi2 = phi_constants(alpha, N)
    rho1, rho2, rho3, rho4 = rho_constants(L, beta, alpha, N, M, r, d_min, c_alpha_sq)
    eta = 2.0 * _gap(r, M) * math.sqrt(2.0 * c_alpha_sq) / (d_min * M)
    return TheoryConstants(
        float(L), float(beta), float(f_star), float(alpha), int(N), int(M), int(r), int(d_min),
        float(c_alpha_sq), phi1, phi2, rho1, rho2, rho3, rho4, eta,
    )


def constants_for(dataset, allocation: Allocation, rule, alpha: float, points, f_star: float = 0.0) -> TheoryConstants:
    """Constants for a concrete problem.

    ``beta`` is the largest pointwise heterogeneity over ``points`` (e.g. every
    iterate of a trajectory); ``F* = 0`` is valid for least squares.
    """
    beta = max(estimate_beta(dataset, x) for x in points)
    c2 = _c_alpha_sq(rule, alpha, allocation.N, dataset.dimension)
    return make_constants(
        estimate_L(dataset), beta, alpha, allocation.N, allocation.M, allocation.r, allocation.d_min, c2, f_star
    )


def convergence_condition(c_alpha: float, d_min: int, M: int, N: int, r: int) -> bool:
    """``C_alpha < d_min M / (2 sqrt(2) N (r - r^2/M))``; always true at ``r = M``."""
    if r > M:
        raise ValueError("r cannot exceed M")
    gap = _gap(r, M)
    if r == M or gap <= 0:
        return True
    return c_alpha < d_min * M / (2.0 * math.sqrt(2.0) * N * gap)


def condition_sides(c_alpha: float, d_min: int, M: int, N: int, r: int) -> tuple[float, float]:
    gap = _gap(r, M)
    rhs = math.inf if gap <= 0 else d_min * M / (2.0 * math.sqrt(2.0) * N * gap)
    return c_alpha, rhs


# -- spread of coded gradients ----------------------------------------------


@dataclass(frozen=True)
class Lemma1Report:
    actual: float
    ideal_bound: float
    exact_balance: bool
    violations: int
    worst_ratio: float
    pair_actual: np.ndarray
    pair_bound: np.ndarray

    @property
    def holds(self) -> bool:
        """Per-pair bound holds everywhere (and the ideal one too when balance is exact)."""
        ok = self.violations == 0
        if self.exact_balance:
            ok = ok and self.actual <= self.ideal_bound * (1 + 1e-9) + 1e-12
        return ok


def lemma1_check(x, allocation: Allocation, dataset: problem.Dataset) -> Lemma1Report:
    """Bound on ``max_{i,j} ||g_i - g_j||^2``.

    The ideal bound is ``8 (r - r^2/M)^2 (beta^2 + ||grad F||^2/M^2) / d_min^2``
    with the pointwise ``beta`` at ``x``.  For pair ``(i, j)`` the same argument
    with the actual set differences ``a = |i \\ j|`` and ``b = |j \\ i|`` gives
    ``4 (a^2 + b^2) (...) / d_min^2``, which holds for any allocation.
    """
    grads = problem.subset_grads(x, dataset)
    full = problem.ordered_sum(grads)
    M = dataset.num_subsets
    dev = grads - full / M
    beta_sq = float(np.einsum("ij,ij->i", dev, dev).max())
    q = beta_sq + float(full @ full) / (M * M)

    coded = encode_all(allocation, grads)
    sq = np.einsum("ij,ij->i", coded, coded)
    pair_actual = np.maximum(sq[:, None] + sq[None, :] - 2.0 * coded @ coded.T, 0.0)
    # exact differences for identical rows keep the r = M case at exactly zero
    diff_rows = np.array([[np.array_equal(coded[i], coded[j]) for j in range(allocation.N)] for i in range(allocation.N)])
    pair_actual[diff_rows] = 0.0
    np.fill_diagonal(pair_actual, 0.0)

    rep = balance_diagnostics(allocation)
    a = rep.symdiff.astype(np.float64)
    d2 = allocation.d_min ** 2
    pair_bound = 4.0 * (a * a + a.T * a.T) * q / d2
    # rounding slack relative to the size of the vectors involved
    slack = 1e-9 * (1.0 + sq[:, None] + sq[None, :])
    off = ~np.eye(allocation.N, dtype=bool)
    violations = int(np.count_nonzero((pair_actual > pair_bound + slack) & off))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pair_bound > 0, pair_actual / pair_bound, np.where(pair_actual > 0, np.inf, 0.0))
    ideal = 8.0 * _gap(allocation.r, M) ** 2 * q / d2
    return Lemma1Report(
        actual=float(pair_actual.max()),
        ideal_bound=float(ideal),
        exact_balance=rep.exact,
        violations=violations,
        worst_ratio=float(ratio[off].max()) if allocation.N > 1 else 0.0,
        pair_actual=pair_actual,
        pair_bound=pair_bound,
    )


# -- honest average ----------------------------------------------------------


@dataclass(frozen=True)
class Lemma2Report:
    estimate: float
    std_error: float
    bound: float
    exact_value: float
    mean_error: float
    hh_diag: float
    hh_offdiag: float
    hh_max_z: float
    hh_z_limit: float
    trials: int

    @property
    def holds(self) -> bool:
        return self.estimate <= self.bound + 3.0 * self.std_error + 1e-12 * (1.0 + abs(self.bound))

    @property
    def hh_ok(self) -> bool:
        return self.hh_max_z <= self.hh_z_limit


def lemma2_bound(x, allocation: Allocation, dataset: problem.Dataset, alpha: float) -> float:
    grads = problem.subset_grads(x, dataset)
    full = problem.ordered_sum(grads)
    M = dataset.num_subsets
    dev = grads - full / M
    beta_sq = float(np.einsum("ij,ij->i", dev, dev).max())
    N, r, d = allocation.N, allocation.r, allocation.d_min
    phi1, phi2 = phi_constants(alpha, N)
    g2 = float(full @ full)
    one_minus = (1.0 - alpha) ** 2
    return (phi1 - phi2) * 2.0 * r * r / (one_minus * N * d * d) * (beta_sq + g2 / (M * M)) + phi2 / (
        one_minus * N * N
    ) * g2


def lemma2_check(x, allocation: Allocation, dataset: problem.Dataset, alpha: float, trials: int = 10_000, seed: int = 0) -> Lemma2Report:
    """Monte Carlo estimate of ``E ||g_bar||^2`` over identity draws against its bound.

    Also returns the exact expectation computed from the second moments of the
    honest indicator, the error of the empirical mean of ``g_bar`` against
    ``grad F / N``, and the empirical moments of the honest indicator ``h``.
    """
    if trials < 1000:
        raise ValueError("use at least 1000 trials")
    N = allocation.N
    if abs(byzantine_count(N, alpha) - alpha * N) > 1e-9:
        raise ValueError("alpha * N must be an integer so that |H| = (1 - alpha) N")
    grads = problem.subset_grads(x, dataset)
    full = problem.ordered_sum(grads)
    coded = encode_all(allocation, grads)

    values = np.empty(trials)
    mean_acc = np.zeros(dataset.dimension)
    hh = np.zeros((N, N))
    hh_sq = np.zeros((N, N))
    for t in range(trials):
        ids = sample_identities(N, alpha, t, seed)
        g_bar = honest_average(coded, ids.honest)
        values[t] = g_bar @ g_bar
        mean_acc += g_bar
        h = ids.mask(N).astype(np.float64)
        outer = np.outer(h, h)
        hh += outer
        hh_sq += outer  # entries are 0/1 so outer**2 == outer
    est = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(trials))

    phi1, phi2 = phi_constants(alpha, N)
    gram = coded @ coded.T
    exact = ((phi1 - phi2) * np.trace(gram) + phi2 * gram.sum()) / ((1.0 - alpha) ** 2 * N * N)

    hh_mean = hh / trials
    hh_var = np.maximum(hh_sq / trials - hh_mean ** 2, 0.0)
    target = np.full((N, N), phi2)
    np.fill_diagonal(target, phi1)
    with np.errstate(divide="ignore", invalid="ignore"):
        se_hh = np.sqrt(hh_var / (trials - 1))
        z = np.where(se_hh > 0, np.abs(hh_mean - target) / se_hh, np.where(np.isclose(hh_mean, target), 0.0, np.inf))
    n_entries = N * N
    z_limit = NormalDist().inv_cdf(1.0 - 0.00135 / n_entries)  # 3-sigma level, Bonferroni over entries
    off = ~np.eye(N, dtype=bool)
    return Lemma2Report(
        estimate=est,
        std_error=se,
        bound=lemma2_bound(x, allocation, dataset, alpha),
        exact_value=float(exact),
        mean_error=float(np.abs(mean_acc / trials - full / N).max()),
        hh_diag=float(np.diag(hh_mean).mean()),
        hh_offdiag=float(hh_mean[off].mean()) if N > 1 else float("nan"),
        hh_max_z=float(z.max()),
        hh_z_limit=float(z_limit),
        trials=trials,
    )


# -- convergence bounds ------------------------------------------------------


def _require_condition(c: TheoryConstants):
    if not c.rho1 > 0:
        c_alpha, rhs = condition_sides(math.sqrt(c.c_alpha_sq), c.d_min, c.M, c.N, c.r)
        raise ValueError(f"convergence condition violated: C_alpha = {c_alpha:.6g} >= d_min M / (2 sqrt2 N (r - r^2/M)) = {rhs:.6g}")


def theorem1_bound(T: int, lam: float, c: TheoryConstants, f0: float) -> float:
    """Bound on ``(1/(T+1)) sum_t E ||grad F(x^t)||^2`` with ``gamma = lam / sqrt(T+1)``."""
    _require_condition(c)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    need = (lam * c.rho2 / c.rho1) ** 2 - 1.0
    if not T > need:
        raise ValueError(f"need T > (lambda rho2 / rho1)^2 - 1 = {need:.6g}, got T = {T}")
    s = math.sqrt(T + 1.0)
    return (f0 - c.f_star) / (lam * s * c.rho1 - lam * lam * c.rho2) + (s * c.rho3 + lam * c.rho4) / (
        s * c.rho1 - lam * c.rho2
    )


def theorem2_bound(T: int, gamma0: float, c: TheoryConstants, f0: float) -> float:
    """Bound on ``min_t E ||grad F(x^t)||^2`` under the decaying schedule."""
    _require_condition(c)
    if not 0 < gamma0 < c.rho1 / (2.0 * c.rho2):
        raise ValueError(f"need 0 < gamma0 < rho1 / (2 rho2) = {c.rho1 / (2.0 * c.rho2):.6g}, got {gamma0}")
    s = math.sqrt(T + 1.0)
    base = gamma0 * c.rho1 - gamma0 * gamma0 * c.rho2
    return (
        (f0 - c.f_star) / (base * s)
        + c.rho3 / (c.rho1 - gamma0 * c.rho2)
        + gamma0 * gamma0 * c.rho4 * (2.0 + math.log(T + 1.0)) / (base * s)
    )


def asymptotic_error_fixed(c: TheoryConstants, approximate: bool = False) -> float:
    """Limit of the fixed-rate bound, ``rho3 / rho1``.

    ``approximate=True`` substitutes ``d_min M = N r`` (replication counts all
    close to each other) and returns the resulting closed form.
    """
    if not approximate:
        if not c.rho1 > 0:
            raise ValueError("rho1 <= 0: convergence condition violated")
        return c.rho3 / c.rho1
    frac = 1.0 - c.r / c.M
    root = math.sqrt(2.0 * c.c_alpha_sq)
    den = 1.0 - 2.0 * frac * root
    if not den > 0:
        raise ValueError(f"denominator 1 - 2 (1 - r/M) sqrt(2 C^2) = {den:.6g} <= 0")
    return c.beta ** 2 * c.M ** 2 * root * frac / den


def asymptotic_error_decaying(c: TheoryConstants, gamma0: float, approximate: bool = False) -> float:
    """Limit of the decaying-rate bound, ``rho3 / (rho1 - gamma0 rho2)``."""
    if not approximate:
        den = c.rho1 - gamma0 * c.rho2
        if not den > 0:
            raise ValueError(f"rho1 - gamma0 rho2 = {den:.6g} <= 0")
        return c.rho3 / den
    frac = 1.0 - c.r / c.M
    root = math.sqrt(2.0 * c.c_alpha_sq)
    a2 = (1.0 - c.alpha) ** 2
    N, L = c.N, c.L
    den = 1.0 - 2.0 * frac * root - gamma0 * (
        (c.phi1 - c.phi2) * 2.0 * L / (a2 * N * N) + c.phi2 * L / (a2 * N) + 8.0 * L * c.c_alpha_sq / N * frac * frac
    )
    if not den > 0:
        raise ValueError(f"denominator {den:.6g} <= 0")
    return c.beta ** 2 * c.M ** 2 * root * frac / den


def decaying_identity_residual(gamma0: float, rho1: float, rho2: float, t: int) -> float:
    """Relative residual of ``g rho1 - g^2 rho2 = (gamma0 rho1 - gamma0^2 rho2) / sqrt(t+1)``."""
    from .trainer import lr_decaying

    g = lr_decaying(gamma0, rho1, rho2, t)
    lhs = g * rho1 - g * g * rho2
    rhs = (gamma0 * rho1 - gamma0 * gamma0 * rho2) / math.sqrt(t + 1)
    return abs(lhs - rhs) / abs(rhs)


def smoothness_violation(dataset: problem.Dataset, L: float, x, y) -> float:
    """``F(x) - F(y) - <grad F(y), x - y> - L/2 ||x - y||^2`` (non-positive when ``L`` is valid)."""
    diff = np.asarray(x) - np.asarray(y)
    return (
        problem.total_loss(x, dataset)
        - problem.total_loss(y, dataset)
        - float(problem.total_grad(y, dataset) @ diff)
        - 0.5 * L * float(diff @ diff)
    )
