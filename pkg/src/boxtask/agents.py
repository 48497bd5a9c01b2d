"""Episode runners binding environment to inference: the constraint-set
particle agent (four lesion variants), the program-synthesis loop backed by a
completion backend, and the direct-action baseline."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import prompts
from .backends import ChatMessage
from .rules import (
    RuleProgram,
    RuleSyntaxError,
    canonical_rule_program,
    generalization_choice,
    parse_rule,
    rule_to_soc,
)
from .smc import (
    EIG_TOL,
    DegenerateWeightsError,
    Evidence,
    NoCandidatesError,
    ParticleSet,
    eig_matrix,
    maybe_resample_rejuvenate,
    outcome_likelihood,
    predicted_success_matrix,
    update_weights,
)
from .soc import (
    CANONICAL_RULES,
    ProposalConfig,
    SoC,
    SocProposal,
    VariantSpec,
    VARIANTS,
    canonical_rule_name,
)
from .task import (
    Attempt,
    Deterministic,
    GENERALIZATION_TRIALS,
    Observe,
    TaskSetup,
    true_views,
)
from .trajectories import Trajectory, TrialRecord

# Stands in for log(0) when an outcome contradicts a program; summing it keeps
# particles ordered by contradiction count.
LOG_ZERO = -1.0e6

LLM_VARIANTS = ("llm-ps", "llm-ps-s", "llm-ps-p")


class MalformedProgramError(Exception):
    """Backend output failed to parse even after the repair round."""


class MalformedActionError(Exception):
    """Direct-action reply was not a valid `key, box` pair."""


def _split_seed(seed: int) -> tuple[int, int]:
    env_ss, agent_ss = np.random.SeedSequence(seed).spawn(2)
    return (
        int(env_ss.generate_state(1)[0]),
        int(agent_ss.generate_state(1)[0]),
    )


def _weights_digest(weights: np.ndarray, top: int = 3) -> str:
    shown = np.sort(weights)[::-1][:top]
    return "[" + " ".join(f"{w:.4f}" for w in shown) + "]"


def _log_line(trial: int, action, outcome, ess_value: float, top_text: str, weights) -> str:
    if isinstance(action, Attempt):
        what = f"Attempt {action.key_id} -> {action.box_id}"
        result = "success" if outcome.success else "failure"
    else:
        what = f"Observe {action.box_id}"
        result = f"revealed {outcome.revealed_number}"
    return (
        f"trial {trial:02d} | {what} | {result} | ESS {ess_value:.3f} "
        f"| top {top_text} | w {_weights_digest(np.asarray(weights))}"
    )


def _pick(scores: np.ndarray, open_flags, rng: np.random.Generator) -> tuple[int, int]:
    masked = scores.copy()
    masked[np.asarray(open_flags, dtype=bool), :] = -np.inf
    best = masked.max()
    if best == -np.inf:
        raise NoCandidatesError("all boxes are open")
    ties = np.argwhere(masked >= best - EIG_TOL)
    pick = ties[int(rng.integers(len(ties)))]
    return int(pick[0]), int(pick[1])


def choose_attempt(ps: ParticleSet, open_flags, rng: np.random.Generator) -> Attempt:
    """EIG argmax with the exploit tie-break: when information gain is
    uniformly zero, attempt a max-posterior-predicted pair instead.

    Exactly one rng draw per call, whichever branch runs.
    """
    eig = eig_matrix(ps)
    masked = eig.copy()
    masked[np.asarray(open_flags, dtype=bool), :] = -np.inf
    best = masked.max()
    if best == -np.inf:
        raise NoCandidatesError("all boxes are open")
    scores = eig if best > EIG_TOL else predicted_success_matrix(ps)
    b, k = _pick(scores, open_flags, rng)
    return Attempt(box_id=ps.views[b].id, key_id=ps.keys[k].id)


def _answer_generalization(program: RuleProgram | None, rng: np.random.Generator) -> list[str]:
    choices = []
    for trial in GENERALIZATION_TRIALS:
        picked = generalization_choice(program, trial.box_view(), trial.candidates, rng)
        choices.append(picked.id)
    return choices


# ---------------------------------------------------------------------------
# Constraint-set agent
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SocAgentParams:
    """Agent configuration; the variant's lesions override rho/p_gen.
    `rho_override` pins the subjective reliability directly instead of the
    Beta-prior mean (lesions still win)."""

    variant: str = "soc-full"
    n_particles: int = 100
    p_gen: float = 0.5
    rho_prior: tuple[float, float] = (4.0, 1.0)
    p_t: float = 0.02
    rho_override: float | None = None

    def __post_init__(self) -> None:
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")

    def spec(self) -> VariantSpec:
        try:
            return VARIANTS[self.variant]
        except KeyError:
            raise ValueError(f"unknown variant {self.variant!r}") from None

    @property
    def rho_subjective(self) -> float:
        if self.spec().lesion_rho:
            return 1.0
        if self.rho_override is not None:
            return self.rho_override
        alpha, beta = self.rho_prior
        return alpha / (alpha + beta)

    @property
    def p_gen_effective(self) -> float:
        return 0.0 if self.spec().lesion_gen else self.p_gen

    def as_dict(self) -> dict:
        return {
            "variant": self.variant,
            "n_particles": self.n_particles,
            "p_gen": self.p_gen_effective,
            "rho_alpha": None if self.spec().lesion_rho else self.rho_prior[0],
            "rho_beta": None if self.spec().lesion_rho else self.rho_prior[1],
            "rho_subjective": self.rho_subjective,
            "p_t": self.p_t,
        }


def run_soc_episode(
    params: SocAgentParams,
    setup: TaskSetup,
    seed: int,
    subject_id: str = "sim",
    initial_particles: Sequence[SoC] | None = None,
    collect_log: bool = True,
) -> Trajectory:
    """Run one constraint-set episode: EIG-with-exploit action selection,
    likelihood weighting, ESS-triggered resample/rejuvenate, until terminal.
    The agent issues no Observe actions."""
    env_seed, agent_seed = _split_seed(seed)
    env = setup.env(seed=env_seed)
    rng = np.random.default_rng(agent_seed)
    state = env.reset()
    views = env.box_views()
    evidence = Evidence(env.boxes, env.keys)

    rho = params.rho_subjective
    proposal = SocProposal(
        ProposalConfig(p_gen=params.p_gen_effective, p_t=params.p_t, rho_prior=params.rho_prior),
        env.boxes,
        env.keys,
        rho=rho,
    )
    if initial_particles is not None:
        ps = ParticleSet(list(initial_particles), rho, env.keys, views)
    else:
        mats, hyps = proposal.sample_matrices(evidence, rng, params.n_particles)
        ps = ParticleSet(hyps, rho, env.keys, views, predictions=mats)

    traj = Trajectory(subject_id=subject_id, variant=params.variant)
    degenerate_events = 0
    while not env.is_terminal():
        attempt = choose_attempt(ps, state.open_flags, rng)
        state, outcome = env.step(attempt)
        evidence.append(attempt, outcome)
        try:
            update_weights(ps, attempt, bool(outcome.success))
            degenerate = False
        except DegenerateWeightsError:
            degenerate = True
            degenerate_events += 1
        maybe_resample_rejuvenate(ps, proposal, evidence, rng, degenerate=degenerate)
        traj.records.append(TrialRecord(state.trial_index, attempt, outcome))
        if collect_log:
            top_idx, _ = ps.top_hypothesis()
            traj.log.append(
                _log_line(
                    state.trial_index,
                    attempt,
                    outcome,
                    ps.ess(),
                    ps.hypotheses[top_idx].digest(),
                    ps.weights,
                )
            )

    top_idx, tie_count = ps.top_hypothesis(rng)
    top = ps.hypotheses[top_idx]
    # provenance classification: a generated constraint set that happens to
    # coincide with the true mapping is a memorized opener table, not the
    # rule, and does not generalize to novel boxes
    rule_name = top.label
    traj.final_hypothesis = top.digest()
    traj.final_rule = rule_name or "mixed"
    program = (
        canonical_rule_program(rule_name, env.boxes, env.keys)
        if rule_name in CANONICAL_RULES
        else None
    )
    traj.generalization = _answer_generalization(program, rng)
    traj.metadata = {
        "seed": seed,
        "params": params.as_dict(),
        "realized_rho": state.realized_rho,
        "completed": all(state.open_flags),
        "top_weight_ties": tie_count,
        "degenerate_events": degenerate_events,
    }
    return traj


# ---------------------------------------------------------------------------
# Program-synthesis agent
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LlmAgentParams:
    variant: str = "llm-ps"  # llm-ps | llm-ps-s | llm-ps-p
    n_particles: int = 1
    rho_subjective: float | None = None  # default: 1.0 for llm-ps, else 0.8

    def __post_init__(self) -> None:
        if self.variant not in LLM_VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")

    @property
    def rho(self) -> float:
        if self.rho_subjective is not None:
            return self.rho_subjective
        return 1.0 if self.variant == "llm-ps" else 0.8


def score_program(
    program: RuleProgram, evidence: Evidence, rho: float, views, keys
) -> float:
    """Log-likelihood of the attempt evidence under the program, evaluated
    against the current views; zero-likelihood outcomes add LOG_ZERO each."""
    views_by_id = {v.id: v for v in views}
    keys_by_id = {k.id: k for k in keys}
    total = 0.0
    for attempt, outcome in evidence.attempts:
        predicted = program.predicts(keys_by_id[attempt.key_id], views_by_id[attempt.box_id])
        p = outcome_likelihood(predicted, bool(outcome.success), rho)
        total += np.log(p) if p > 0.0 else LOG_ZERO
    return float(total)


def _rescore(ps: ParticleSet, evidence: Evidence) -> np.ndarray:
    scores = np.array(
        [score_program(h, evidence, ps.rho, ps.views, ps.keys) for h in ps.hypotheses]
    )
    shifted = np.exp(scores - scores.max())
    ps.weights = shifted / shifted.sum()
    return scores


def _worst_index(scores: np.ndarray) -> int:
    # ties broken by oldest: lowest index is the longest-lived particle
    return int(np.argmin(scores))


def _clean_reply(text: str) -> str:
    text = text.strip()
    if text.startswith("```"):
        text = re.sub(r"^```[A-Za-z]*\s*", "", text)
        text = re.sub(r"\s*```$", "", text)
    return text.strip()


_PICK_UP_RE = re.compile(r"^PICK\s+UP\s+([A-Za-z0-9_]+)$", re.IGNORECASE)


def _program_from_backend(backend, messages: list[ChatMessage]) -> RuleProgram:
    """One completion with a single repair round, then one fresh redraw."""
    text = _clean_reply(backend.complete(messages))
    try:
        return parse_rule(text)
    except RuleSyntaxError as first_error:
        repair = prompts.repair_messages(messages, text, str(first_error))
        text2 = _clean_reply(backend.complete(repair))
        try:
            return parse_rule(text2)
        except RuleSyntaxError:
            text3 = _clean_reply(backend.complete(messages))
            try:
                return parse_rule(text3)
            except RuleSyntaxError as final_error:
                raise MalformedProgramError(
                    f"backend output unparseable after repair and redraw: {final_error}"
                ) from final_error


def classify_program(program: RuleProgram, boxes, keys) -> str:
    """Name the rule a program implements, or 'mixed'.

    The program must match a salient rule both on the fully observed task and
    on the novel generalization boxes: a table that hard-codes the original
    pairs reproduces the true mapping without expressing the rule, and counts
    as mixed.
    """
    soc = rule_to_soc(program, true_views(boxes), keys)
    name = canonical_rule_name(soc, boxes, keys)
    if name is None:
        return "mixed"
    canon = canonical_rule_program(name, boxes, keys)
    for trial in GENERALIZATION_TRIALS:
        view = trial.box_view()
        for key in trial.candidates:
            if program.predicts(key, view) != canon.predicts(key, view):
                return "mixed"
    return name


def run_llm_ps_episode(
    params: LlmAgentParams,
    setup: TaskSetup,
    backend,
    seed: int = 0,
    env_seed: int | None = None,
    agent_seed: int | None = None,
    subject_id: str = "llm",
) -> Trajectory:
    """Program-synthesis loop: initial particles from generate prompts, then
    one backend call per trial that either revises the worst-scoring program
    or (partial observability only) issues PICK UP; attempts chosen by EIG
    with the exploit tie-break."""
    if params.variant in ("llm-ps", "llm-ps-s") and setup.config.observability != "full":
        raise ValueError(f"{params.variant} runs on a fully observable task")
    default_env_seed, default_agent_seed = _split_seed(seed)
    env = setup.env(seed=env_seed if env_seed is not None else default_env_seed)
    rng = np.random.default_rng(agent_seed if agent_seed is not None else default_agent_seed)
    state = env.reset()
    views = env.box_views()
    evidence = Evidence(env.boxes, env.keys)
    unreliable = not isinstance(setup.config.reliability, Deterministic)
    rho = params.rho

    programs = [
        _program_from_backend(
            backend, prompts.generate_messages(params.variant, views, env.keys, evidence, unreliable)
        )
        for _ in range(params.n_particles)
    ]
    ps = ParticleSet(programs, rho, env.keys, views)

    def resolve(reply: str):
        """PICK UP directive (partial-obs variant, known box) or a parsed
        program; malformed text raises RuleSyntaxError."""
        pick_up = _PICK_UP_RE.match(reply)
        if (
            pick_up
            and params.variant == "llm-ps-p"
            and pick_up.group(1) in env.box_index
        ):
            return Observe(pick_up.group(1))
        return parse_rule(reply)

    traj = Trajectory(subject_id=subject_id, variant=params.variant)
    first_trial = True
    while not env.is_terminal():
        if not first_trial:
            scores = _rescore(ps, evidence)
            worst = _worst_index(scores)
            messages = prompts.refine_messages(
                params.variant,
                views,
                env.keys,
                evidence,
                ps.hypotheses[worst].text,
                unreliable,
            )
            reply = _clean_reply(backend.complete(messages))
            try:
                resolved = resolve(reply)
            except RuleSyntaxError as err:
                repair = prompts.repair_messages(messages, reply, str(err))
                try:
                    resolved = resolve(_clean_reply(backend.complete(repair)))
                except RuleSyntaxError:
                    resolved = _program_from_backend(
                        backend,
                        prompts.generate_messages(
                            params.variant, views, env.keys, evidence, unreliable
                        ),
                    )
            if isinstance(resolved, Observe):
                state, outcome = env.step(resolved)
                evidence.append(resolved, outcome)
                views = env.box_views()
                ps.refresh_predictions(views)
                _rescore(ps, evidence)
                traj.records.append(TrialRecord(state.trial_index, resolved, outcome))
                top_idx, _ = ps.top_hypothesis()
                traj.log.append(
                    _log_line(
                        state.trial_index,
                        resolved,
                        outcome,
                        ps.ess(),
                        ps.hypotheses[top_idx].text,
                        ps.weights,
                    )
                )
                continue
            ps.replace(worst, resolved)
        first_trial = False
        _rescore(ps, evidence)
        attempt = choose_attempt(ps, state.open_flags, rng)
        state, outcome = env.step(attempt)
        evidence.append(attempt, outcome)
        traj.records.append(TrialRecord(state.trial_index, attempt, outcome))
        _rescore(ps, evidence)
        top_idx, _ = ps.top_hypothesis()
        traj.log.append(
            _log_line(
                state.trial_index,
                attempt,
                outcome,
                ps.ess(),
                ps.hypotheses[top_idx].text,
                ps.weights,
            )
        )

    _rescore(ps, evidence)
    top_idx, tie_count = ps.top_hypothesis(rng)
    top = ps.hypotheses[top_idx]
    traj.final_hypothesis = top.text
    traj.final_rule = classify_program(top, env.boxes, env.keys)
    traj.generalization = _answer_generalization(top, rng)
    traj.metadata = {
        "seed": seed,
        "variant": params.variant,
        "n_particles": params.n_particles,
        "rho_subjective": rho,
        "realized_rho": state.realized_rho,
        "completed": all(state.open_flags),
        "top_weight_ties": tie_count,
    }
    return traj


# ---------------------------------------------------------------------------
# Direct-action baseline
# ---------------------------------------------------------------------------

_ACTION_RE = re.compile(r"^\s*([A-Za-z0-9_]+)\s*,\s*([A-Za-z0-9_]+)\s*$")


def run_react_episode(
    setup: TaskSetup,
    backend,
    seed: int = 0,
    subject_id: str = "react",
) -> Trajectory:
    """Evidence history in, a `key, box` action out, every trial; no explicit
    hypotheses, so no final rule and no generalization answers."""
    if setup.config.observability != "full":
        raise ValueError("the direct-action baseline runs on a fully observable task")
    env_seed, _ = _split_seed(seed)
    env = setup.env(seed=env_seed)
    state = env.reset()
    views = env.box_views()
    evidence = Evidence(env.boxes, env.keys)
    traj = Trajectory(subject_id=subject_id, variant="react")

    while not env.is_terminal():
        messages = prompts.react_messages(views, env.keys, evidence)
        reply = backend.complete(messages)
        attempt = _parse_react_reply(reply, env, state)
        if attempt is None:
            retry = messages + [
                ChatMessage("assistant", reply),
                ChatMessage(
                    "user",
                    'That was not a valid move. Respond exactly in the format "key, box" '
                    "naming an existing key and an unopened box, with no other text.",
                ),
            ]
            reply = backend.complete(retry)
            attempt = _parse_react_reply(reply, env, state)
            if attempt is None:
                traj.metadata["aborted"] = f"malformed action reply: {reply[:80]!r}"
                break
        state, outcome = env.step(attempt)
        evidence.append(attempt, outcome)
        traj.records.append(TrialRecord(state.trial_index, attempt, outcome))
        traj.log.append(
            _log_line(state.trial_index, attempt, outcome, 1.0, "(none)", np.array([1.0]))
        )

    traj.metadata.update(
        {
            "seed": seed,
            "completed": all(state.open_flags),
            "realized_rho": state.realized_rho,
        }
    )
    return traj


def _parse_react_reply(reply: str, env, state) -> Attempt | None:
    m = _ACTION_RE.match(reply.strip())
    if not m:
        return None
    key_id, box_id = m.group(1), m.group(2)
    if key_id not in env.key_index or box_id not in env.box_index:
        return None
    if state.open_flags[env.box_index[box_id]]:
        return None
    return Attempt(box_id=box_id, key_id=key_id)
