"""Training loop for CRA-DL and its baselines.

Every iteration the server broadcasts ``x^t``; honest devices send coded
gradients, Byzantine devices send attack vectors, the server aggregates and
steps ``x^{t+1} = x^t - gamma^t * g_hat^t``.  The baselines differ only in how
data is allocated and how the server aggregates:

=============  ===================  ==============================
method         allocation           server aggregation
=============  ===================  ==============================
CRA-DL         redundant (random)   RBA rule
SGC-DL         redundant (random)   mean
RBA-DL         non-redundant        RBA rule
MA             non-redundant        mean
Clairvoyant    non-redundant        mean over honest devices only
=============  ===================  ==============================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import problem
from .adversary import AttackSpec, byzantine_messages, sample_identities
from .aggregation import RbaRuleSpec, aggregate, check_feasible, spread
from .allocation import Allocation, allocate
from .coding import encode_all, honest_average

METHODS = ("CRA-DL", "MA", "RBA-DL", "SGC-DL", "Clairvoyant")
DIVERGENCE_LOSS = 1e12


def lr_fixed(lam: float, T: int) -> float:
    """Constant rate ``lam / sqrt(T + 1)`` used by the fixed-rate convergence bound."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if T < 0:
        raise ValueError("T must be non-negative")
    return lam / math.sqrt(T + 1)


def lr_decaying(gamma0: float, rho1: float, rho2: float, t: int) -> float:
    """Decaying rate solving ``g*rho1 - g^2*rho2 = (gamma0*rho1 - gamma0^2*rho2) / sqrt(t+1)``.

    The smaller root is taken, so ``t = 0`` gives back ``gamma0``.
    """
    if rho1 <= 0 or rho2 <= 0:
        raise ValueError("rho1 and rho2 must be positive")
    if not 0 < gamma0 < rho1 / (2 * rho2):
        raise ValueError(f"need 0 < gamma0 < rho1/(2 rho2) = {rho1 / (2 * rho2):.6g}, got {gamma0}")
    if t == 0:
        return float(gamma0)
    c = (gamma0 * rho1 - gamma0 * gamma0 * rho2) / math.sqrt(t + 1)
    disc = rho1 * rho1 - 4.0 * rho2 * c
    # rationalised form of (rho1 - sqrt(disc)) / (2 rho2); avoids cancellation
    return 2.0 * c / (rho1 + math.sqrt(disc))


@dataclass(frozen=True)
class FixedSchedule:
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("learning rate must be positive")

    @classmethod
    def from_lambda(cls, lam: float, T: int) -> "FixedSchedule":
        return cls(lr_fixed(lam, T))

    def __call__(self, t: int) -> float:
        return self.gamma


@dataclass(frozen=True)
class DecayingSchedule:
    gamma0: float
    rho1: float
    rho2: float

    def __post_init__(self):
        lr_decaying(self.gamma0, self.rho1, self.rho2, 0)

    def __call__(self, t: int) -> float:
        return lr_decaying(self.gamma0, self.rho1, self.rho2, t)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """One training run.

    ``allocation`` and ``rule`` default per method; conflicting explicit choices
    (e.g. a redundant allocation for MA) are rejected by :meth:`resolved`.
    """

    method: str = "CRA-DL"
    N: int = 100
    r: int | None = 40
    allocation: str | None = None
    rule: RbaRuleSpec = field(default_factory=lambda: RbaRuleSpec("median"))
    attack: AttackSpec = field(default_factory=lambda: AttackSpec("signflip"))
    alpha: float = 0.2
    schedule: FixedSchedule | DecayingSchedule = field(default_factory=lambda: FixedSchedule(0.001))
    T: int = 500
    seed: int = 0
    x0: tuple | None = None

    def resolved(self, M: int | None = None) -> "RunConfig":
        """Fill method defaults and validate consistency."""
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if self.T < 1:
            raise ConfigError("T must be at least 1")
        if self.N < 1:
            raise ConfigError("N must be positive")
        if not 0 <= self.alpha < 0.5:
            raise ConfigError(f"alpha must lie in [0, 0.5), got {self.alpha}")
        cfg = self
        if self.method in ("MA", "RBA-DL", "Clairvoyant"):
            if self.allocation not in (None, "non_redundant"):
                raise ConfigError(f"{self.method} uses non-redundant allocation, got {self.allocation!r}")
            cfg = replace(cfg, allocation="non_redundant", r=None if M is None else M // self.N)
        elif self.allocation is None:
            cfg = replace(cfg, allocation="random")
        if self.method in ("MA", "SGC-DL", "Clairvoyant"):
            if self.rule.kind != "mean":
                cfg = replace(cfg, rule=RbaRuleSpec("mean"))
        if cfg.allocation == "random" and cfg.r is None:
            raise ConfigError("random allocation needs r")
        if cfg.allocation == "full" and M is not None:
            cfg = replace(cfg, r=M)
        return cfg

    @property
    def label(self) -> str:
        if self.method in ("CRA-DL", "RBA-DL"):
            return f"{self.method}({self.rule})"
        return self.method


class IterationRecord(NamedTuple):
    t: int
    loss: float
    grad_norm: float
    agg_error: float
    spread: float
    lr: float


@dataclass
class Trajectory:
    config: RunConfig
    records: list[IterationRecord]
    final_model: np.ndarray
    final_loss: float
    diverged: bool = False
    allocation: Allocation | None = None
    models: list[np.ndarray] | None = None

    @property
    def losses(self) -> np.ndarray:
        return np.array([rec.loss for rec in self.records])

    @property
    def grad_norms(self) -> np.ndarray:
        return np.array([rec.grad_norm for rec in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records])


def build_allocation(config: RunConfig, M: int) -> Allocation:
    cfg = config.resolved(M)
    return allocate(cfg.allocation, cfg.N, M, cfg.r, cfg.seed)


def run(
    config: RunConfig, dataset: problem.Dataset, allocation: Allocation | None = None, keep_models: bool = False
) -> Trajectory:
    """Execute the training loop for iterations ``t = 0..T``.

    Returns ``T + 1`` records (record ``t`` describes ``x^t`` and the aggregate
    computed from it) and the model ``x^{T+1}``.  A loss above 1e12 or a
    non-finite loss stops the run early with ``diverged=True``.  With
    ``keep_models`` every iterate ``x^0..x^{T+1}`` is kept in ``models``.
    """
    M = dataset.num_subsets
    cfg = config.resolved(M)
    if allocation is None:
        allocation = allocate(cfg.allocation, cfg.N, M, cfg.r, cfg.seed)
    elif allocation.N != cfg.N or allocation.M != M:
        raise ConfigError(f"allocation is {allocation.N}x{allocation.M}, run needs {cfg.N}x{M}")
    check_feasible(cfg.rule, cfg.N, cfg.alpha)

    if cfg.x0 is None:
        x = np.zeros(dataset.dimension)
    else:
        x = np.array(cfg.x0, dtype=np.float64)
        if x.shape != (dataset.dimension,):
            raise ConfigError(f"x0 has length {x.size}, dataset dimension is {dataset.dimension}")

    records = []
    models = [x.copy()] if keep_models else None
    diverged = False
    for t in range(cfg.T + 1):
        grads = problem.subset_grads(x, dataset)
        loss = float(problem.subset_losses(x, dataset).sum())
        full = problem.ordered_sum(grads)
        if not math.isfinite(loss) or loss > DIVERGENCE_LOSS:
            records.append(IterationRecord(t, loss, float(np.linalg.norm(full)), math.nan, math.nan, math.nan))
            diverged = True
            break

        coded = encode_all(allocation, grads)
        ids = sample_identities(cfg.N, cfg.alpha, t, cfg.seed)
        received = coded.copy()
        if ids.byzantine.size:
            received[ids.byzantine] = byzantine_messages(cfg.attack, coded, ids, cfg.seed)
        g_bar = honest_average(coded, ids.honest)
        if cfg.method == "Clairvoyant":
            g_hat = honest_average(received, ids.honest)
        else:
            g_hat = aggregate(cfg.rule, received, cfg.alpha)

        gamma = cfg.schedule(t)
        records.append(
            IterationRecord(
                t,
                loss,
                float(np.linalg.norm(full)),
                float(np.linalg.norm(g_hat - g_bar)),
                spread(coded[ids.honest]),
                float(gamma),
            )
        )
        x = x - gamma * g_hat
        if keep_models:
            models.append(x.copy())

    final_loss = problem.total_loss(x, dataset) if not diverged else math.inf
    if not diverged and (not math.isfinite(final_loss) or final_loss > DIVERGENCE_LOSS):
        diverged = True
    return Trajectory(cfg, records, x, final_loss, diverged, allocation, models)


def run_baseline_suite(dataset: problem.Dataset, base: RunConfig, rules=None, methods=METHODS) -> dict[str, Trajectory]:
    """Run every method on the same data, identity draws and attack randomness.

    ``rules`` lists the RBA rules tried for CRA-DL and RBA-DL (default: the rule
    of ``base``).  Keys are :attr:`RunConfig.label` strings.
    """
    rules = [base.rule] if rules is None else [RbaRuleSpec.parse(r) if isinstance(r, str) else r for r in rules]
    out = {}
    for method in methods:
        variants = rules if method in ("CRA-DL", "RBA-DL") else [RbaRuleSpec("mean")]
        for rule in variants:
            cfg = replace(base, method=method, rule=rule, allocation=None)
            traj = run(cfg, dataset)
            out[traj.config.label] = traj
    return out
