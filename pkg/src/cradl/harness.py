"""Experiment files, sweeps, CSV results, figure specifications and the verify suite.

An experiment file is plain ``key = value`` text.  Keys before any section
header describe one run plus its dataset; an optional ``[sweep]`` section lists
comma-separated values for the sweep axes and the seeds::

    # full-scale sign-flip run
    method = CRA-DL
    rule = median
    attack = signflip
    alpha = 0.2
    r = 40
    T = 500
    out = results/run.csv

    [sweep]
    r = 0.1M, 0.2M, 0.4M, 0.8M, M
    seeds = 0, 1, 2, 3, 4

Values of ``r`` may be written as multiples of ``M`` (``0.4M``).
"""

from __future__ import annotations

import csv
import itertools
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import problem
from .adversary import AttackSpec
from .aggregation import InfeasibleRule, RbaRuleSpec
from .allocation import AllocationError
from .trainer import ConfigError, DecayingSchedule, FixedSchedule, RunConfig, Trajectory, run

SWEEP_AXES = ("r", "alpha", "sigma_h", "rule", "attack", "method")

RUN_KEYS = {
    "method", "N", "r", "allocation", "rule", "attack", "alpha", "lr", "lambda", "schedule",
    "gamma0", "rho1", "rho2", "T", "seed", "m", "D", "sigma_h", "data_seed", "dataset", "out",
}
SWEEP_KEYS = set(SWEEP_AXES) | {"seeds"}


class ConfigFileError(ValueError):
    """Malformed experiment file; the message carries ``path:line``."""


@dataclass(frozen=True)
class Experiment:
    """A parsed experiment file.

    ``data_seed=None`` ties the dataset seed to the run seed, so every seed of a
    sweep draws its own dataset and all cells of that seed share it.
    """

    run: RunConfig = field(default_factory=RunConfig)
    m: int = 1000
    D: int = 100
    sigma_h: float = 0.0
    data_seed: int | None = None
    dataset_path: Path | None = None
    out: Path | None = None
    r_expr: str | None = None
    sweep: dict = field(default_factory=dict)
    seeds: tuple = ()

    def dataset(self, seed: int | None = None, sigma_h: float | None = None) -> problem.Dataset:
        if self.dataset_path is not None:
            return problem.load_dataset(self.dataset_path)
        seed = self.run.seed if seed is None else seed
        data_seed = seed if self.data_seed is None else self.data_seed
        return problem.generate_dataset(self.m, self.D, self.sigma_h if sigma_h is None else sigma_h, data_seed)


def parse_r(text: str, M: int) -> int:
    """``40`` -> 40; ``0.4M`` -> 0.4*M rounded; ``M`` -> M."""
    text = text.strip()
    if text.endswith("M"):
        coef = text[:-1].strip() or "1"
        value = float(coef) * M
        if abs(value - round(value)) > 1e-9:
            raise ValueError(f"{text} is not an integer for M={M}")
        return int(round(value))
    return int(text)


def _schedule(values: dict, T: int):
    kind = values.get("schedule", "fixed")
    if kind == "fixed":
        if "lr" in values and "lambda" in values:
            raise ValueError("give either lr or lambda, not both")
        if "lambda" in values:
            return FixedSchedule.from_lambda(float(values["lambda"]), T)
        return FixedSchedule(float(values.get("lr", 0.001)))
    if kind == "decaying":
        missing = [k for k in ("gamma0", "rho1", "rho2") if k not in values]
        if missing:
            raise ValueError(f"decaying schedule needs {', '.join(missing)}")
        return DecayingSchedule(float(values["gamma0"]), float(values["rho1"]), float(values["rho2"]))
    raise ValueError(f"schedule must be fixed or decaying, got {kind!r}")


def parse_experiment(text: str, path: str | os.PathLike = "<config>", base_dir=None) -> Experiment:
    """Parse experiment text; every error names the offending line."""
    path = str(path)
    base_dir = Path(base_dir) if base_dir is not None else Path(path).resolve().parent
    values, lines = {}, {}
    sweep, sweep_lines = {}, {}
    section = "run"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section != "sweep":
                raise ConfigFileError(f"{path}:{lineno}: unknown section [{section}]")
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigFileError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        allowed = RUN_KEYS if section == "run" else SWEEP_KEYS
        target, where = (values, lines) if section == "run" else (sweep, sweep_lines)
        if key not in allowed:
            raise ConfigFileError(f"{path}:{lineno}: unknown key {key!r} in [{section}]; allowed: {', '.join(sorted(allowed))}")
        if key in target:
            raise ConfigFileError(f"{path}:{lineno}: duplicate key {key!r} (first set on line {where[key]})")
        if not value:
            raise ConfigFileError(f"{path}:{lineno}: empty value for {key!r}")
        target[key] = value
        where[key] = lineno

    def fail(key, exc, table=lines):
        raise ConfigFileError(f"{path}:{table.get(key, 0)}: {key}: {exc}") from exc

    def get(key, conv, default):
        if key not in values:
            return default
        try:
            return conv(values[key])
        except (TypeError, ValueError) as exc:
            fail(key, exc)

    m = get("m", int, 1000)
    D = get("D", int, 100)
    sigma_h = get("sigma_h", float, 0.0)
    if "dataset" in values:
        clash = [k for k in ("m", "D", "sigma_h", "data_seed") if k in values]
        if clash:
            raise ConfigFileError(f"{path}:{lines[clash[0]]}: {clash[0]} cannot be combined with dataset")
        try:
            with open(base_dir / values["dataset"]) as fh:
                m, D, sigma_h = (conv(v) for conv, v in zip((int, int, float), fh.readline().split()))
        except (OSError, ValueError) as exc:
            fail("dataset", exc)
        if "sigma_h" in sweep:
            raise ConfigFileError(f"{path}:{sweep_lines['sigma_h']}: sigma_h cannot be swept over a stored dataset")
    if m < 1 or D < 1 or sigma_h < 0:
        raise ConfigFileError(f"{path}:{lines.get('m', lines.get('D', lines.get('sigma_h', 0)))}: need m >= 1, D >= 1, sigma_h >= 0")
    T = get("T", int, 500)
    r_expr = values.get("r")
    r = get("r", lambda v: parse_r(v, m), 40)
    try:
        schedule = _schedule(values, T)
    except ValueError as exc:
        key = next((k for k in ("schedule", "lr", "lambda", "gamma0", "rho1", "rho2") if k in lines), "schedule")
        fail(key, exc)
    cfg = RunConfig(
        method=values.get("method", "CRA-DL"),
        N=get("N", int, 100),
        r=r,
        allocation=values.get("allocation"),
        rule=get("rule", RbaRuleSpec.parse, RbaRuleSpec("median")),
        attack=get("attack", AttackSpec.parse, AttackSpec("signflip")),
        alpha=get("alpha", float, 0.2),
        schedule=schedule,
        T=T,
        seed=get("seed", int, 0),
    )
    try:
        cfg.resolved(m)
    except ConfigError as exc:
        key = next((k for k in ("method", "allocation", "alpha", "T", "N") if k in lines), "method")
        fail(key, exc)

    axes = {}
    for key, value in sweep.items():
        if key == "seeds":
            continue
        items = [v.strip() for v in value.split(",") if v.strip()]
        try:
            axes[key] = tuple(_axis_value(key, v, m) for v in items)
        except (TypeError, ValueError) as exc:
            fail(key, exc, sweep_lines)
    seeds = ()
    if "seeds" in sweep:
        try:
            seeds = tuple(int(v) for v in sweep["seeds"].split(","))
        except ValueError as exc:
            fail("seeds", exc, sweep_lines)
        if any(s < 0 for s in seeds):
            fail("seeds", ValueError("seeds must be non-negative"), sweep_lines)

    def resolve(key):
        return None if key not in values else (base_dir / values[key]).resolve()

    return Experiment(
        run=cfg, m=m, D=D, sigma_h=sigma_h, data_seed=get("data_seed", int, None),
        dataset_path=resolve("dataset"), out=resolve("out"), r_expr=r_expr, sweep=axes, seeds=seeds,
    )


def load_experiment(path) -> Experiment:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigFileError(f"{path}: cannot read config: {exc.strerror}") from exc
    return parse_experiment(text, path)


def _axis_value(axis, text, M):
    if axis == "r":
        return parse_r(text, M)
    if axis in ("alpha", "sigma_h"):
        return float(text)
    if axis == "rule":
        return RbaRuleSpec.parse(text)
    if axis == "attack":
        return AttackSpec.parse(text)
    return text


# -- results -----------------------------------------------------------------


class ResultRow(NamedTuple):
    run_id: str
    method: str
    rule: str
    attack: str
    alpha: float
    r: int
    sigma_h: float
    seed: int
    iteration: int
    loss: float
    grad_norm: float
    agg_error: float
    lr: float


COLUMNS = ResultRow._fields
SKIP_COLUMNS = ("run_id", "method", "rule", "attack", "alpha", "r", "sigma_h", "seed", "reason")
_FLOAT_COLS = {"alpha", "sigma_h", "loss", "grad_norm", "agg_error", "lr"}
_INT_COLS = {"r", "seed", "iteration"}


def trajectory_rows(run_id: str, traj: Trajectory, sigma_h: float) -> list[ResultRow]:
    cfg = traj.config
    return [
        ResultRow(run_id, cfg.method, str(cfg.rule), str(cfg.attack), cfg.alpha, cfg.r, sigma_h, cfg.seed,
                  rec.t, rec.loss, rec.grad_norm, rec.agg_error, rec.lr)
        for rec in traj.records
    ]


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(rows, path, columns=COLUMNS) -> None:
    """Write rows (named tuples or dicts) with floats as ``repr`` so they read back exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            get = row.get if isinstance(row, dict) else lambda c, row=row: getattr(row, c)
            writer.writerow([_fmt(get(c)) for c in columns])


def read_rows(path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(COLUMNS)}")
        out = []
        for rec in reader:
            out.append(ResultRow(**{
                c: float(v) if c in _FLOAT_COLS else int(v) if c in _INT_COLS else v for c, v in rec.items()
            }))
    return out


def skipped_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + "_skipped.csv")


# -- runs and sweeps ---------------------------------------------------------


@dataclass
class SweepResult:
    rows: list[ResultRow]
    skipped: list[dict]
    trajectories: dict
    diverged: list[str]


def run_experiment(exp: Experiment, seed: int | None = None) -> tuple[Trajectory, list[ResultRow]]:
    cfg = exp.run if seed is None else replace(exp.run, seed=seed)
    data = exp.dataset(cfg.seed)
    traj = run(cfg, data)
    return traj, trajectory_rows(f"{0:04d}", traj, data.sigma_h)


def sweep_cells(exp: Experiment):
    """Cross product of the sweep axes and seeds, in a fixed order."""
    axes = [a for a in SWEEP_AXES if a in exp.sweep]
    seeds = exp.seeds or (exp.run.seed,)
    for seed in seeds:
        for combo in itertools.product(*(exp.sweep[a] for a in axes)):
            yield seed, dict(zip(axes, combo))


def run_sweep(exp: Experiment, progress=None) -> SweepResult:
    """Run every sweep cell.

    All cells of one seed share the dataset, identity draws and attack
    randomness.  Cells that resolve to the same run (e.g. MA under different
    rule values, whose rule is forced to the mean) are run once.  Infeasible
    cells are collected in ``skipped`` with the reason.
    """
    rows, skipped, trajs, diverged = [], [], {}, []
    seen = set()
    datasets = {}
    index = 0
    for seed, cell in sweep_cells(exp):
        sigma_h = cell.get("sigma_h", exp.sigma_h)
        cfg = replace(exp.run, seed=seed)
        for key in ("r", "alpha", "rule", "attack", "method"):
            if key in cell:
                cfg = replace(cfg, **{key: cell[key]})
        if cfg.method in ("MA", "RBA-DL", "Clairvoyant"):
            # these methods fix their own allocation; a base allocation is meant for the others
            cfg = replace(cfg, allocation=None)
        run_id = f"{index:04d}"
        info = {
            "run_id": run_id, "method": cfg.method, "rule": str(cfg.rule), "attack": str(cfg.attack),
            "alpha": cfg.alpha, "r": cfg.r, "sigma_h": sigma_h, "seed": seed,
        }
        try:
            resolved = cfg.resolved(exp.m)
            key = (resolved.label, str(resolved.attack), resolved.alpha, resolved.r, resolved.allocation, sigma_h, seed)
            if key in seen:
                continue
            seen.add(key)
            dkey = (seed, sigma_h)
            if dkey not in datasets:
                datasets = {dkey: exp.dataset(seed, sigma_h)}
            traj = run(cfg, datasets[dkey])
        except (InfeasibleRule, AllocationError, ConfigError) as exc:
            skipped.append({**info, "reason": str(exc)})
            index += 1
            continue
        rows.extend(trajectory_rows(run_id, traj, datasets[dkey].sigma_h))
        trajs[run_id] = traj
        if traj.diverged:
            diverged.append(run_id)
        if progress is not None:
            progress(run_id, traj)
        index += 1
    rows.sort(key=lambda row: (row.run_id, row.iteration))
    return SweepResult(rows, skipped, trajs, diverged)


def write_sweep(result: SweepResult, out) -> None:
    write_rows(result.rows, out)
    write_rows(result.skipped, skipped_path(out), SKIP_COLUMNS)


# -- figures -----------------------------------------------------------------

FIGURES = {
    "fig2a": {
        "run": {"attack": "signflip", "alpha": "0.2"},
        "sweep": {"method": "CRA-DL, RBA-DL, SGC-DL, MA, Clairvoyant", "rule": "median, trimmed, phocas"},
    },
    "fig2b": {
        "run": {"attack": "gaussian", "alpha": "0.03"},
        "sweep": {"method": "CRA-DL, RBA-DL, SGC-DL, MA, Clairvoyant", "rule": "median, trimmed, phocas"},
    },
    "fig2c": {
        "run": {"attack": "duplicate", "alpha": "0.4"},
        "sweep": {"method": "CRA-DL, RBA-DL, SGC-DL, MA, Clairvoyant", "rule": "median, trimmed, phocas"},
    },
    "fig3": {
        "run": {"method": "CRA-DL", "rule": "median", "attack": "signflip"},
        "sweep": {"r": "0.1M, 0.2M, 0.4M, 0.8M, M", "alpha": "0.2, 0.4"},
    },
    "fig4": {
        "run": {"method": "CRA-DL", "rule": "median", "attack": "signflip", "r": "0.4M"},
        "sweep": {"alpha": "0, 0.05, 0.1, 0.2"},
    },
    "fig5": {
        "run": {"rule": "median", "attack": "signflip", "alpha": "0.2"},
        "sweep": {"method": "CRA-DL, RBA-DL", "sigma_h": "0, 0.5, 1.0"},
    },
}


def figure_experiment(figure: str, seeds=(0, 1, 2, 3, 4), overrides: dict | None = None) -> Experiment:
    """Experiment reproducing one figure at full scale.

    ``overrides`` are extra ``key = value`` run settings (e.g. ``{"T": "50"}``)
    applied on top of the figure's own settings.
    """
    if figure not in FIGURES:
        raise ConfigFileError(f"unknown figure {figure!r}; expected one of {', '.join(FIGURES)}")
    spec = FIGURES[figure]
    run_values = {**spec["run"], **(overrides or {})}
    lines = [f"{k} = {v}" for k, v in run_values.items()]
    lines.append("[sweep]")
    lines += [f"{k} = {v}" for k, v in spec["sweep"].items()]
    lines.append("seeds = " + ", ".join(str(s) for s in seeds))
    return parse_experiment("\n".join(lines), f"<{figure}>", base_dir=Path.cwd())


def curve_key(row: ResultRow) -> str:
    label = f"{row.method}({row.rule})" if row.method in ("CRA-DL", "RBA-DL") else row.method
    return f"{label} {row.attack} alpha={row.alpha:g} r={row.r} sigma_h={row.sigma_h:g}"


def mean_curves(rows) -> dict[str, np.ndarray]:
    """Seed-averaged loss per curve; curves of unequal length are cut to the shortest run."""
    per_run = {}
    for row in rows:
        per_run.setdefault((curve_key(row), row.seed), []).append(row.loss)
    grouped = {}
    for (key, _), losses in per_run.items():
        grouped.setdefault(key, []).append(losses)
    out = {}
    for key, runs in grouped.items():
        n = min(len(r) for r in runs)
        out[key] = np.mean([r[:n] for r in runs], axis=0)
    return out


def plot_csv(csv_path, out, title: str | None = None) -> Path:
    """Seed-averaged training loss against iteration on a log axis, saved as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curves = mean_curves(read_rows(csv_path))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for key in sorted(curves):
        ax.plot(np.arange(curves[key].size), curves[key], label=key, linewidth=1.2)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("training loss")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=6, loc="upper right")
    fig.tight_layout()
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out


# -- theory table ------------------------------------------------------------


def theory_table(exp: Experiment) -> list[dict]:
    """Constants and bounds for the configured run.

    The configured run is executed once so that ``beta`` can be taken as the
    largest pointwise heterogeneity over its iterates.  Bounds whose
    preconditions fail are reported with the reason instead of a value.
    """
    from . import theory
    from .trainer import build_allocation

    cfg = exp.run.resolved(exp.m)
    data = exp.dataset(cfg.seed)
    alloc = build_allocation(cfg, data.num_subsets)
    traj = run(cfg, data, allocation=alloc, keep_models=True)
    c = theory.constants_for(data, alloc, cfg.rule.kind, cfg.alpha, traj.models)
    f0 = problem.total_loss(traj.models[0], data)
    rows = [{"name": k, "value": v, "note": ""} for k, v in c.as_dict().items()]
    c_alpha, rhs = theory.condition_sides(math.sqrt(c.c_alpha_sq), c.d_min, c.M, c.N, c.r)
    rows.append({"name": "c_alpha", "value": c_alpha, "note": ""})
    rows.append({"name": "condition_rhs", "value": rhs, "note": "d_min M / (2 sqrt2 N (r - r^2/M))"})
    rows.append({"name": "condition", "value": int(theory.convergence_condition(c_alpha, c.d_min, c.M, c.N, c.r)), "note": ""})
    rows.append({"name": "F_x0", "value": f0, "note": ""})
    rows.append({"name": "observed_avg_grad_sq", "value": float(np.mean(traj.grad_norms ** 2)), "note": "time average over the run"})

    def attempt(name, fn, note=""):
        try:
            rows.append({"name": name, "value": float(fn()), "note": note})
        except ValueError as exc:
            rows.append({"name": name, "value": math.nan, "note": str(exc)})

    if isinstance(cfg.schedule, FixedSchedule):
        lam = cfg.schedule.gamma * math.sqrt(cfg.T + 1)
        rows.append({"name": "lambda", "value": lam, "note": "gamma * sqrt(T + 1)"})
        attempt("theorem1_bound", lambda: theory.theorem1_bound(cfg.T, lam, c, f0))
    else:
        attempt("theorem2_bound", lambda: theory.theorem2_bound(cfg.T, cfg.schedule.gamma0, c, f0))
        attempt("asymptotic_decaying", lambda: theory.asymptotic_error_decaying(c, cfg.schedule.gamma0))
    attempt("asymptotic_fixed", lambda: theory.asymptotic_error_fixed(c))
    attempt("asymptotic_fixed_approx", lambda: theory.asymptotic_error_fixed(c, approximate=True), "assumes d_min M = N r")
    return rows


# -- verify suite ------------------------------------------------------------


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def verify_suite(quick: bool = False) -> list[CheckResult]:
    """Invariant checks across all modules at toy scale (plus one full-scale allocation)."""
    from . import aggregation, allocation, theory
    from .coding import encode_all
    from .trainer import lr_decaying

    results = []
    rng = np.random.default_rng(20240531)
    n = 10 if quick else 50

    # coded gradients sum to the full gradient
    worst = 0.0
    for i in range(n):
        N = int(rng.integers(2, 30))
        M = int(rng.integers(N, 200))
        r = int(rng.integers(max(1, -(-M // N)), M + 1))
        data = problem.generate_dataset(M, 6, 0.5, i)
        alloc = allocation.allocate_balanced_random(N, M, r, i)
        x = rng.normal(size=6)
        grads = problem.subset_grads(x, data)
        full = problem.ordered_sum(grads)
        total = encode_all(alloc, grads).sum(axis=0)
        worst = max(worst, np.abs(total - full).max() / (1 + np.abs(full).max()))
    results.append(CheckResult("sum identity", worst < 1e-9, f"max relative error {worst:.3g}"))

    # gradient against central differences
    data = problem.generate_dataset(30, 4, 0.0, 1)
    worst = 0.0
    for _ in range(n):
        x = rng.normal(size=4)
        k = int(rng.integers(30))
        g = problem.subset_grad(x, data, k)
        fd = np.empty(4)
        for j in range(4):
            e = np.zeros(4)
            e[j] = 1e-4 * (1 + abs(x[j]))
            fd[j] = (problem.subset_loss(x + e, data, k) - problem.subset_loss(x - e, data, k)) / (2 * e[j])
        worst = max(worst, np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-12))
    results.append(CheckResult("gradient oracle", worst < 1e-5, f"max relative error {worst:.3g}"))

    # Definition 1 on random instances
    trials = 100 if quick else 1000
    for kind in ("median", "trimmed", "phocas", "krum", "geomedian", "faba"):
        rule = RbaRuleSpec(kind)
        bad = 0
        for trial in range(trials):
            honest, byz = random_instance(10, 5, 0.2, trial)
            if not aggregation.robust_bound_check(rule, honest, byz, 0.2, seed=trial).satisfied:
                bad += 1
        results.append(CheckResult(f"definition 1 {kind}", bad == 0, f"{bad} violations in {trials}"))

    # Lemma 1 per pair
    for label, data, alloc in (
        ("toy", problem.generate_dataset(40, 5, 0.5, 2), allocation.allocate_uniform_random(10, 40, 12, 2)),
        ("full", problem.generate_dataset(40, 5, 0.5, 2), allocation.allocate_full_replication(10, 40)),
    ):
        reps = [theory.lemma1_check(rng.normal(size=5), alloc, data) for _ in range(5)]
        ok = all(rep.holds for rep in reps)
        results.append(CheckResult(f"lemma 1 {label}", ok, f"violations {sum(r.violations for r in reps)}"))

    # Lemma 2 Monte Carlo
    data = problem.generate_dataset(20, 5, 0.0, 3)
    alloc = allocation.allocate_balanced_random(10, 20, 8, 3)
    for a in (0.0, 0.2):
        rep = theory.lemma2_check(rng.normal(size=5), alloc, data, a, trials=1000 if quick else 10_000)
        results.append(CheckResult(f"lemma 2 alpha={a:g}", rep.holds and rep.hh_ok,
                                   f"estimate {rep.estimate:.6g} +- {rep.std_error:.3g} vs bound {rep.bound:.6g}"))

    # decaying-rate identity
    worst = 0.0
    for _ in range(100):
        rho1, rho2 = rng.uniform(0.1, 2.0, size=2)
        g0 = rng.uniform(0.01, 0.99) * rho1 / (2 * rho2)
        t = int(rng.integers(0, 10_000))
        worst = max(worst, theory.decaying_identity_residual(g0, rho1, rho2, t))
    g = [lr_decaying(0.25, 1.0, 1.0, t) for t in range(101)]
    results.append(CheckResult("decaying rate identity", worst < 1e-12 and all(np.diff(g) < 0), f"max residual {worst:.3g}"))

    # smoothness constant
    data = problem.generate_dataset(50, 5, 0.0, 4)
    L = theory.estimate_L(data)
    worst = max(theory.smoothness_violation(data, L, rng.normal(size=5) * 3, rng.normal(size=5) * 3) for _ in range(200))
    results.append(CheckResult("smoothness", worst <= 1e-8 * L, f"max violation {worst:.3g}"))

    # determinism of a short run
    exp = parse_experiment("N = 10\nm = 40\nD = 5\nr = 12\nT = 20\nattack = gaussian", "<verify>", base_dir=Path.cwd())
    t1, rows1 = run_experiment(exp)
    t2, rows2 = run_experiment(exp)
    results.append(CheckResult("determinism", rows1 == rows2, f"{len(rows1)} rows"))
    return results


def random_instance(N: int, D: int, alpha: float, seed: int):
    """Random honest/Byzantine message split used by the Definition 1 checks.

    Honest messages are Gaussian around a random centre with a random scale.
    The Byzantine ones follow one of several strategies chosen by ``seed``:
    far outliers, sign-flipped honest mean, copies of one honest message,
    a tight cluster just outside the honest cloud, or scaled honest messages.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 424242]))
    nb = int(round(alpha * N))
    centre = rng.normal(scale=rng.uniform(0, 10), size=D)
    honest = centre + rng.normal(scale=rng.uniform(0.01, 5), size=(N - nb, D))
    mu = honest.mean(axis=0)
    radius = np.sqrt(((honest - mu) ** 2).sum(axis=1).max())
    kind = seed % 5
    if kind == 0:
        byz = rng.normal(scale=1e3, size=(nb, D))
    elif kind == 1:
        byz = np.tile(-2.0 * mu, (nb, 1)) + rng.normal(scale=1e-3, size=(nb, D))
    elif kind == 2:
        byz = np.tile(honest[rng.integers(len(honest))], (nb, 1))
    elif kind == 3:
        direction = rng.normal(size=D)
        direction /= np.linalg.norm(direction)
        byz = mu + direction * radius * rng.uniform(1.0, 3.0) + rng.normal(scale=0.01 * (radius + 1e-12), size=(nb, D))
    else:
        byz = honest[rng.integers(len(honest), size=nb)] * rng.uniform(-3, 3)
    return honest, byz
