"""Weighted-particle inference over rule hypotheses: Bernoulli-reliability
likelihood updates, ESS-triggered systematic resampling with rejuvenation,
and expected-information-gain action scoring."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .rules import RuleProgram, eval_rule
from .soc import SoC
from .task import Action, Attempt, BoxView, KeyDef, Observe, Outcome

EIG_TOL = 1e-12
ESS_FRACTION = 0.5  # resample when ESS < N * fraction


class DegenerateWeightsError(Exception):
    """Every particle assigned zero likelihood; weights left untouched for the
    caller's full-rejuvenation path."""


class NoCandidatesError(Exception):
    """No unopened box to target."""


Hypothesis = SoC | RuleProgram


def prediction_matrix(
    hypothesis: Hypothesis, keys: Sequence[KeyDef], views: Sequence[BoxView]
) -> np.ndarray:
    """Dense (n_boxes, n_keys) success predictions under the current views."""
    if isinstance(hypothesis, SoC):
        return hypothesis.matrix(views, keys)
    out = np.zeros((len(views), len(keys)), dtype=bool)
    for i, view in enumerate(views):
        for j, key in enumerate(keys):
            out[i, j] = eval_rule(hypothesis, key, view)
    return out


def outcome_likelihood(predicts_success: bool, y: bool, rho: float) -> float:
    """Bernoulli(rho) on predicted successes; predicted failures never open."""
    if predicts_success:
        return rho if y else 1.0 - rho
    return 0.0 if y else 1.0


def likelihood(
    hypothesis: Hypothesis, attempt: Attempt, y: bool, rho: float, view: BoxView, keys=None
) -> float:
    """Likelihood of one attempt outcome under one hypothesis.

    `view` is the attempted box's current view; `keys` (id -> KeyDef or a
    sequence) resolves the attempted key for program hypotheses.
    """
    if isinstance(hypothesis, SoC):
        predicted = attempt.key_id in hypothesis.mapping.get(attempt.box_id, frozenset())
    else:
        key = _resolve_key(attempt.key_id, keys)
        predicted = eval_rule(hypothesis, key, view)
    return outcome_likelihood(predicted, y, rho)


def _resolve_key(key_id: str, keys) -> KeyDef:
    if keys is None:
        raise ValueError("keys required to score a program hypothesis")
    if isinstance(keys, dict):
        return keys[key_id]
    for k in keys:
        if k.id == key_id:
            return k
    raise KeyError(key_id)


@dataclass
class Evidence:
    """Append-only (action, outcome) history plus the tallies proposals and
    scoring need: per-pair failure counts, recorded openers, revealed counts."""

    boxes: tuple
    keys: tuple
    records: list = field(default_factory=list)

    def __post_init__(self) -> None:
        self._box_index = {b.id: i for i, b in enumerate(self.boxes)}
        self._key_index = {k.id: j for j, k in enumerate(self.keys)}
        self.fail_counts = np.zeros((len(self.boxes), len(self.keys)), dtype=np.int64)
        self.opened_by: dict[str, str] = {}
        self.revealed: dict[str, int] = {}

    def append(self, action: Action, outcome: Outcome) -> None:
        self.records.append((action, outcome))
        if isinstance(action, Attempt):
            if outcome.success:
                self.opened_by[action.box_id] = action.key_id
            else:
                b = self._box_index[action.box_id]
                k = self._key_index[action.key_id]
                self.fail_counts[b, k] += 1
        elif isinstance(action, Observe) and outcome.revealed_number is not None:
            self.revealed[action.box_id] = outcome.revealed_number

    @property
    def attempts(self) -> list:
        return [(a, o) for a, o in self.records if isinstance(a, Attempt)]

    def __len__(self) -> int:
        return len(self.records)


class ParticleSet:
    """Weighted hypothesis population with a cached prediction table.

    Weights are kept normalized by every mutating operation; the prediction
    cache must be refreshed (`refresh_predictions`) after belief collapse so
    program hypotheses re-evaluate against the new views.
    """

    def __init__(
        self,
        hypotheses: list,
        rho: float,
        keys: Sequence[KeyDef],
        views: Sequence[BoxView],
        weights: np.ndarray | None = None,
        predictions: np.ndarray | None = None,
    ):
        if not hypotheses:
            raise ValueError("particle set needs at least one hypothesis")
        if not 0.0 < rho <= 1.0:
            raise ValueError(f"rho must be in (0, 1], got {rho}")
        self.hypotheses = list(hypotheses)
        self.rho = rho
        self.keys = tuple(keys)
        self.views = tuple(views)
        self._key_index = {k.id: j for j, k in enumerate(self.keys)}
        self._box_index = {v.id: i for i, v in enumerate(self.views)}
        n = len(hypotheses)
        if weights is None:
            self.weights = np.full(n, 1.0 / n)
        else:
            self.weights = np.asarray(weights, dtype=float).copy()
            self.normalize()
        if predictions is None:
            self.predictions = np.stack(
                [prediction_matrix(h, self.keys, self.views) for h in self.hypotheses]
            )
        else:
            self.predictions = predictions

    def __len__(self) -> int:
        return len(self.hypotheses)

    def normalize(self) -> None:
        total = self.weights.sum()
        if total <= 0:
            raise DegenerateWeightsError("zero total weight")
        self.weights /= total

    def ess(self) -> float:
        return float(1.0 / np.square(self.weights).sum())

    def refresh_predictions(self, views: Sequence[BoxView]) -> None:
        self.views = tuple(views)
        self.predictions = np.stack(
            [prediction_matrix(h, self.keys, self.views) for h in self.hypotheses]
        )

    def top_hypothesis(self, rng: np.random.Generator | None = None) -> tuple[int, int]:
        """Index of a highest-weight particle and the tie count; ties sampled
        uniformly when an rng is given, else first index."""
        best = np.flatnonzero(self.weights >= self.weights.max() - 1e-12)
        if rng is None or len(best) == 1:
            return int(best[0]), len(best)
        return int(best[int(rng.integers(len(best)))]), len(best)

    def replace(self, index: int, hypothesis: Hypothesis) -> None:
        self.hypotheses[index] = hypothesis
        self.predictions[index] = prediction_matrix(hypothesis, self.keys, self.views)


def ess(ps: ParticleSet) -> float:
    return ps.ess()


def update_weights(ps: ParticleSet, attempt: Attempt, y: bool) -> ParticleSet:
    """Multiply weights by the outcome likelihood and renormalize in place.
    Raises DegenerateWeightsError (weights untouched) on zero total mass."""
    b = ps._box_index[attempt.box_id]
    k = ps._key_index[attempt.key_id]
    pred = ps.predictions[:, b, k]
    like = np.where(pred, ps.rho if y else 1.0 - ps.rho, 0.0 if y else 1.0)
    new = ps.weights * like
    total = new.sum()
    if total <= 0.0:
        raise DegenerateWeightsError(f"all particles contradict outcome of {attempt}")
    ps.weights = new / total
    return ps


def eig_matrix(ps: ParticleSet) -> np.ndarray:
    """Expected information gain (nats) of every key-box attempt.

    Closed form of the two-outcome enumeration: with q the posterior mass on
    particles predicting success,
        EIG = -rho*q*ln(q) + (1-rho*q) * [s*ln(1-rho) - ln(1-rho*q)],
    where s = (1-rho)*q / (1-rho*q), and 0*ln(0) = 0 throughout.
    """
    rho = ps.rho
    q = np.einsum("n,nbk->bk", ps.weights, ps.predictions)
    q = np.clip(q, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        term1 = np.where(q > 0.0, -rho * q * np.log(np.where(q > 0.0, q, 1.0)), 0.0)
        z = 1.0 - rho * q
        s = np.where(z > 0.0, (1.0 - rho) * q / np.where(z > 0.0, z, 1.0), 0.0)
        s_term = s * np.log(1.0 - rho) if rho < 1.0 else np.zeros_like(q)
        term0 = np.where(z > 0.0, z * (s_term - np.log(np.where(z > 0.0, z, 1.0))), 0.0)
    out = term1 + term0
    # clamp the tiny negatives float cancellation can leave behind
    return np.maximum(out, 0.0)


def expected_information_gain(ps: ParticleSet, attempt: Attempt) -> float:
    b = ps._box_index[attempt.box_id]
    k = ps._key_index[attempt.key_id]
    return float(eig_matrix(ps)[b, k])


def predicted_success_matrix(ps: ParticleSet) -> np.ndarray:
    """Posterior probability that each attempt succeeds (rho * mass on
    predictors); the exploit score when every EIG is zero."""
    return ps.rho * np.einsum("n,nbk->bk", ps.weights, ps.predictions)


def _choose_masked(
    scores: np.ndarray, open_flags: Sequence[bool], rng: np.random.Generator
) -> tuple[int, int]:
    masked = scores.copy()
    masked[np.asarray(open_flags, dtype=bool), :] = -np.inf
    best = masked.max()
    if best == -np.inf:
        raise NoCandidatesError("all boxes are open")
    ties = np.argwhere(masked >= best - EIG_TOL)
    pick = ties[int(rng.integers(len(ties)))]
    return int(pick[0]), int(pick[1])


def select_action(
    ps: ParticleSet, open_flags: Sequence[bool], rng: np.random.Generator
) -> Attempt:
    """Argmax-EIG attempt over unopened boxes, ties uniform. Observe actions
    are never produced here; they belong to agent policies."""
    b, k = _choose_masked(eig_matrix(ps), open_flags, rng)
    return Attempt(box_id=ps.views[b].id, key_id=ps.keys[k].id)


def select_action_with_exploit(
    ps: ParticleSet, open_flags: Sequence[bool], rng: np.random.Generator
) -> Attempt:
    """EIG argmax, except when information gain is uniformly zero: then attempt
    a max-posterior-predicted pair instead of flailing over exact ties."""
    eig = eig_matrix(ps)
    masked = eig.copy()
    masked[np.asarray(open_flags, dtype=bool), :] = -np.inf
    best = masked.max()
    if best == -np.inf:
        raise NoCandidatesError("all boxes are open")
    if best > EIG_TOL:
        b, k = _choose_masked(eig, open_flags, rng)
    else:
        b, k = _choose_masked(predicted_success_matrix(ps), open_flags, rng)
    return Attempt(box_id=ps.views[b].id, key_id=ps.keys[k].id)


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Low-variance resampling: counts are within one of N*w_i and unbiased."""
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    return np.searchsorted(np.cumsum(weights), positions)


def _draw(proposal, evidence, rng, m):
    """Fresh proposal draws plus their prediction matrices when the proposal
    can supply them batched (matrices must align with the set's views/keys)."""
    if hasattr(proposal, "sample_matrices"):
        mats, hyps = proposal.sample_matrices(evidence, rng, m)
        return list(hyps), mats
    return list(proposal.sample_batch(evidence, rng, m)), None


def maybe_resample_rejuvenate(
    ps: ParticleSet,
    proposal,
    evidence: Evidence,
    rng: np.random.Generator,
    degenerate: bool = False,
) -> ParticleSet:
    """Resample + rejuvenate when ESS < N/2 (or redraw everything on a
    degenerate update); identity otherwise.

    Rejuvenation replaces the duplicated slots left by resampling with fresh
    proposal draws so diversity is restored at equal weights.
    """
    n = len(ps)
    if degenerate:
        hyps, mats = _draw(proposal, evidence, rng, n)
        ps.hypotheses = hyps
        ps.weights = np.full(n, 1.0 / n)
        if mats is not None:
            ps.predictions = mats
        else:
            ps.refresh_predictions(ps.views)
        return ps
    if ps.ess() >= n * ESS_FRACTION:
        return ps
    idx = systematic_resample(ps.weights, rng)
    seen: set[int] = set()
    new_hyps: list = [None] * n
    new_pred = np.empty_like(ps.predictions)
    fresh_slots: list[int] = []
    for slot, i in enumerate(idx):
        i = int(i)
        if i in seen:
            fresh_slots.append(slot)
        else:
            seen.add(i)
            new_hyps[slot] = ps.hypotheses[i]
            new_pred[slot] = ps.predictions[i]
    if fresh_slots:
        hyps, mats = _draw(proposal, evidence, rng, len(fresh_slots))
        for j, slot in enumerate(fresh_slots):
            new_hyps[slot] = hyps[j]
            new_pred[slot] = (
                mats[j]
                if mats is not None
                else prediction_matrix(hyps[j], ps.keys, ps.views)
            )
    ps.hypotheses = new_hyps
    ps.weights = np.full(n, 1.0 / n)
    ps.predictions = new_pred
    return ps
