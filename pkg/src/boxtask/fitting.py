"""Behavioral model fitting: forward-simulated probability tables P(n | t, θ),
floored trajectory log-likelihoods, per-subject grid search, AIC, and paired
comparison statistics."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .agents import SocAgentParams, run_soc_episode
from .soc import DEFAULT_P_T, VARIANTS
from .task import Attempt, TaskSetup
from .trajectories import Trajectory

EPSILON = 0.01  # likelihood floor, 1/N at the default particle count

# Beta(alpha, beta) reliability-prior grid, sorted by prior mean so that grid
# neighborhoods are meaningful on the rho axis.
RHO_GRID: tuple[tuple[float, float], ...] = (
    (1, 3),
    (1, 2),
    (1, 1),
    (2, 1),
    (3, 1),
    (4, 1),
    (5, 1),
    (6, 1),
    (9, 1),
    (15, 1),
    (19, 1),
)

PGEN_GRID: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

SOC_VARIANTS = ("soc-l", "soc-rel", "soc-gen", "soc-full")


class MissingTableError(KeyError):
    """Grid search asked for a probability table that was never built."""


@dataclass(frozen=True)
class Theta:
    """One grid setting; a lesioned reliability axis is encoded as None."""

    rho_alpha: float | None
    rho_beta: float | None
    p_gen: float
    p_t: float = DEFAULT_P_T

    @property
    def rho(self) -> float:
        if self.rho_alpha is None:
            return 1.0
        return self.rho_alpha / (self.rho_alpha + self.rho_beta)

    def key(self) -> str:
        if self.rho_alpha is None:
            rho_part = "rho=1"
        else:
            rho_part = f"a={self.rho_alpha:g},b={self.rho_beta:g}"
        return f"{rho_part};pgen={self.p_gen:g};pt={self.p_t:g}"

    def agent_params(self, variant: str, n_particles: int = 100) -> SocAgentParams:
        return SocAgentParams(
            variant=variant,
            n_particles=n_particles,
            p_gen=self.p_gen,
            rho_prior=(self.rho_alpha, self.rho_beta)
            if self.rho_alpha is not None
            else (1.0, 1.0),
            p_t=self.p_t,
        )

    def as_dict(self) -> dict:
        return {
            "rho_alpha": self.rho_alpha,
            "rho_beta": self.rho_beta,
            "p_gen": self.p_gen,
            "p_t": self.p_t,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Theta":
        return cls(
            rho_alpha=d["rho_alpha"],
            rho_beta=d["rho_beta"],
            p_gen=d["p_gen"],
            p_t=d.get("p_t", DEFAULT_P_T),
        )


def grid_for_variant(variant: str, p_t: float = DEFAULT_P_T) -> list[Theta]:
    """The fitting grid: 1 / 11 / 9 / 99 settings for L / Rel / Gen / Full."""
    if variant == "soc-l":
        return [Theta(None, None, 0.0, p_t)]
    if variant == "soc-rel":
        return [Theta(a, b, 0.0, p_t) for a, b in RHO_GRID]
    if variant == "soc-gen":
        return [Theta(None, None, g, p_t) for g in PGEN_GRID]
    if variant == "soc-full":
        return [Theta(a, b, g, p_t) for a, b in RHO_GRID for g in PGEN_GRID]
    raise ValueError(f"unknown variant {variant!r}")


def grid_indices(theta: Theta) -> tuple[int, int]:
    """(rho index, p_gen index) of a setting; lesioned axes map to 0."""
    i = RHO_GRID.index((theta.rho_alpha, theta.rho_beta)) if theta.rho_alpha is not None else 0
    j = PGEN_GRID.index(theta.p_gen) if theta.p_gen > 0.0 else 0
    return i, j


@dataclass
class ProbabilityTable:
    """P(n | t): empirical distribution of cumulative open counts by trial,
    from n_sims forward simulations at one setting."""

    variant: str
    theta: Theta
    probs: np.ndarray  # (n_boxes + 1, max_trials)
    n_sims: int

    def prob(self, n: int, trial: int) -> float:
        return float(self.probs[n, trial - 1])


def trajectory_counts(traj: Trajectory, n_boxes: int = 5) -> np.ndarray:
    """Cumulative distinct boxes opened after each recorded trial; observe
    trials hold the running count."""
    counts = np.zeros(len(traj.records), dtype=np.int64)
    n = 0
    for i, rec in enumerate(traj.records):
        if isinstance(rec.action, Attempt) and rec.outcome.success:
            n += 1
        counts[i] = n
    if n > n_boxes:
        raise ValueError(f"{traj.subject_id}: more successes than boxes")
    return counts


def _padded_counts(traj: Trajectory, horizon: int, n_boxes: int) -> np.ndarray:
    counts = trajectory_counts(traj, n_boxes)
    if len(counts) > horizon:
        raise ValueError(f"trajectory longer ({len(counts)}) than horizon {horizon}")
    out = np.full(horizon, counts[-1] if len(counts) else 0, dtype=np.int64)
    out[: len(counts)] = counts
    return out


def _sim_seed(base_seed: int, sim_index: int) -> int:
    return int(np.random.SeedSequence([base_seed, sim_index]).generate_state(1)[0])


def build_probability_table(
    variant: str,
    theta: Theta,
    n_sims: int,
    seed: int,
    setup: TaskSetup,
    n_particles: int = 100,
) -> ProbabilityTable:
    """Simulate the variant at θ and record the empirical frequency of each
    cumulative count at each trial; early-terminated episodes hold their final
    count through the horizon."""
    if n_sims < 1:
        raise ValueError("n_sims must be >= 1")
    horizon = setup.config.max_trials
    n_boxes = len(setup.boxes)
    params = theta.agent_params(variant, n_particles)
    tally = np.zeros((n_boxes + 1, horizon), dtype=np.int64)
    for j in range(n_sims):
        traj = run_soc_episode(
            params, setup, _sim_seed(seed, j), subject_id=f"tab{j}", collect_log=False
        )
        padded = _padded_counts(traj, horizon, n_boxes)
        tally[padded, np.arange(horizon)] += 1
    return ProbabilityTable(variant, theta, tally / n_sims, n_sims)


def log_likelihood(traj: Trajectory, table: ProbabilityTable, eps: float = EPSILON) -> float:
    """Floored log-likelihood: sum over trials of log max(P(n_t | t), eps)."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    counts = trajectory_counts(traj, table.probs.shape[0] - 1)
    if len(counts) > table.probs.shape[1]:
        raise ValueError(
            f"{traj.subject_id}: {len(counts)} trials exceed the table horizon"
        )
    p = table.probs[counts, np.arange(len(counts))]
    return float(np.log(np.maximum(p, eps)).sum())


@dataclass(frozen=True)
class FitOutcome:
    theta: Theta
    theta_index: int
    ll: float
    ties: int


def grid_search(
    traj: Trajectory,
    variant: str,
    grid: Sequence[Theta],
    tables: dict[str, ProbabilityTable],
    eps: float = EPSILON,
) -> FitOutcome:
    """Argmax-LL setting for one subject, deterministic first-index tie-break;
    the tie count is recorded."""
    best_ll = -math.inf
    best_idx = -1
    ties = 0
    for idx, theta in enumerate(grid):
        table = tables.get(theta.key())
        if table is None:
            raise MissingTableError(f"no table for {variant} at {theta.key()}")
        ll = log_likelihood(traj, table, eps)
        if ll > best_ll + 1e-12:
            best_ll, best_idx, ties = ll, idx, 0
        elif ll >= best_ll - 1e-12:
            ties += 1
    return FitOutcome(grid[best_idx], best_idx, best_ll, ties)


def aic(nll: float, k: int) -> float:
    """Akaike information criterion from a negative log-likelihood."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return 2.0 * nll + 2.0 * k


@dataclass(frozen=True)
class PairedStats:
    t: float
    p: float
    d: float
    dof: int
    degenerate: bool = False


def paired_compare(a: Sequence[float], b: Sequence[float]) -> PairedStats:
    """Paired t statistic, two-sided Student-t p-value (incomplete-beta
    evaluation), and Cohen's d for paired samples. Zero-variance differences
    are reported as t=0, d=0 with the degenerate flag set."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    n = len(a)
    if n < 2:
        raise ValueError("need at least two paired observations")
    delta = a - b
    sd = float(delta.std(ddof=1))
    dof = n - 1
    if sd == 0.0:
        return PairedStats(t=0.0, p=1.0, d=0.0, dof=dof, degenerate=True)
    mean = float(delta.mean())
    t = mean / (sd / math.sqrt(n))
    d = mean / sd
    p = float(special.betainc(dof / 2.0, 0.5, dof / (dof + t * t)))
    return PairedStats(t=t, p=p, d=d, dof=dof)


@dataclass
class FitResult:
    subject_id: str
    outcomes: dict[str, FitOutcome] = field(default_factory=dict)

    def ll(self, variant: str) -> float:
        return self.outcomes[variant].ll

    def aic(self, variant: str) -> float:
        return aic(-self.outcomes[variant].ll, VARIANTS[variant].k)

    def best_by_ll(self) -> str:
        return max(self.outcomes, key=lambda v: self.outcomes[v].ll)

    def best_by_aic(self) -> str:
        return min(self.outcomes, key=self.aic)


# ---------------------------------------------------------------------------
# Table building / persistence
# ---------------------------------------------------------------------------


def _setting_seed(master_seed: int, variant: str, theta_index: int) -> int:
    variant_id = SOC_VARIANTS.index(variant)
    return int(
        np.random.SeedSequence([master_seed, variant_id, theta_index]).generate_state(1)[0]
    )


def _build_one(args) -> tuple[str, str, ProbabilityTable]:
    variant, theta, n_sims, seed, setup, n_particles = args
    table = build_probability_table(variant, theta, n_sims, seed, setup, n_particles)
    return variant, theta.key(), table


def build_tables(
    variants: Sequence[str],
    setup: TaskSetup,
    n_sims: int = 100,
    seed: int = 0,
    n_particles: int = 100,
    p_t: float = DEFAULT_P_T,
    jobs: int = 1,
) -> dict[str, dict[str, ProbabilityTable]]:
    """Build every grid setting's table for the given variants; results are
    keyed (variant, theta) and independent of the worker count."""
    tasks = []
    for variant in variants:
        for idx, theta in enumerate(grid_for_variant(variant, p_t)):
            tasks.append(
                (variant, theta, n_sims, _setting_seed(seed, variant, idx), setup, n_particles)
            )
    out: dict[str, dict[str, ProbabilityTable]] = {v: {} for v in variants}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for variant, key, table in pool.map(_build_one, tasks):
                out[variant][key] = table
    else:
        for task in tasks:
            variant, key, table = _build_one(task)
            out[variant][key] = table
    return out


def save_tables(directory: str | Path, tables: dict[str, dict[str, ProbabilityTable]]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for variant, settings in tables.items():
        payload = {
            "variant": variant,
            "settings": [
                {
                    "theta": table.theta.as_dict(),
                    "n_sims": table.n_sims,
                    "probs": table.probs.tolist(),
                }
                for table in settings.values()
            ],
        }
        with open(directory / f"{variant}.json", "w") as f:
            json.dump(payload, f)


def load_tables(
    directory: str | Path, variants: Sequence[str]
) -> dict[str, dict[str, ProbabilityTable]]:
    directory = Path(directory)
    out: dict[str, dict[str, ProbabilityTable]] = {}
    for variant in variants:
        path = directory / f"{variant}.json"
        if not path.exists():
            raise MissingTableError(f"no table file for {variant} in {directory}")
        with open(path) as f:
            payload = json.load(f)
        settings = {}
        for entry in payload["settings"]:
            theta = Theta.from_dict(entry["theta"])
            settings[theta.key()] = ProbabilityTable(
                variant, theta, np.asarray(entry["probs"], dtype=float), entry["n_sims"]
            )
        out[variant] = settings
    return out


# ---------------------------------------------------------------------------
# Cohort-level fitting and comparisons
# ---------------------------------------------------------------------------


def fit_cohort(
    trajectories: Iterable[Trajectory],
    variants: Sequence[str],
    tables: dict[str, dict[str, ProbabilityTable]],
    eps: float = EPSILON,
    p_t: float = DEFAULT_P_T,
) -> list[FitResult]:
    grids = {v: grid_for_variant(v, p_t) for v in variants}
    results = []
    for traj in trajectories:
        result = FitResult(subject_id=traj.subject_id)
        for variant in variants:
            result.outcomes[variant] = grid_search(
                traj, variant, grids[variant], tables[variant], eps
            )
        results.append(result)
    return results


def aic_summary(results: Sequence[FitResult], variants: Sequence[str]) -> list[dict]:
    """Per-variant mean NLL with SEM-based 95% CI and mean AIC."""
    rows = []
    for variant in variants:
        nlls = np.array([-r.ll(variant) for r in results])
        aics = np.array([r.aic(variant) for r in results])
        sd = float(nlls.std(ddof=1)) if len(nlls) > 1 else 0.0
        sem = sd / math.sqrt(len(nlls)) if len(nlls) > 1 else 0.0
        rows.append(
            {
                "variant": variant,
                "mean_nll": float(nlls.mean()),
                "sd_nll": sd,
                "ci95_low": float(nlls.mean() - 1.96 * sem),
                "ci95_high": float(nlls.mean() + 1.96 * sem),
                "k": VARIANTS[variant].k,
                "mean_aic": float(aics.mean()),
            }
        )
    return rows


def pairwise_comparisons(
    results: Sequence[FitResult], variants: Sequence[str], baseline: str = "soc-full"
) -> list[dict]:
    """Paired t-tests of baseline LLs against each other variant."""
    base = [r.ll(baseline) for r in results]
    rows = []
    for variant in variants:
        if variant == baseline:
            continue
        stats = paired_compare(base, [r.ll(variant) for r in results])
        rows.append(
            {
                "baseline": baseline,
                "variant": variant,
                "t": stats.t,
                "p": stats.p,
                "d": stats.d,
                "dof": stats.dof,
                "degenerate": stats.degenerate,
            }
        )
    return rows


def best_variant_counts(results: Sequence[FitResult]) -> dict[str, dict[str, int]]:
    by_ll: dict[str, int] = {}
    by_aic: dict[str, int] = {}
    for r in results:
        by_ll[r.best_by_ll()] = by_ll.get(r.best_by_ll(), 0) + 1
        by_aic[r.best_by_aic()] = by_aic.get(r.best_by_aic(), 0) + 1
    return {"by_ll": by_ll, "by_aic": by_aic}


def generate_synthetic_cohort(
    grid_points: Sequence[Theta],
    per_point: int,
    setup: TaskSetup,
    seed: int = 0,
    n_particles: int = 100,
    variant: str = "soc-full",
) -> list[tuple[Trajectory, Theta]]:
    """Forward-simulate subjects at the given generating settings; returns
    (trajectory, generating theta) pairs for recovery studies."""
    out = []
    counter = 0
    for point_idx, theta in enumerate(grid_points):
        params = theta.agent_params(variant, n_particles)
        for j in range(per_point):
            subject_seed = int(
                np.random.SeedSequence([seed, 7919, point_idx, j]).generate_state(1)[0]
            )
            traj = run_soc_episode(
                params, setup, subject_seed, subject_id=f"synth{counter:03d}", collect_log=False
            )
            out.append((traj, theta))
            counter += 1
    return out
