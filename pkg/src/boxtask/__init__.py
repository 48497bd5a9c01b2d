"""Box Task laboratory: a seeded POMDP recreation of the five-boxes /
thirteen-keys rule-induction task, particle-based agents that play it, and
the grid-search machinery that fits lesioned agent variants to behavior."""

from .task import (
    Attempt,
    BoxDef,
    BoxTaskEnv,
    BoxView,
    Deterministic,
    EnvConfig,
    EnvState,
    Fixed,
    KeyDef,
    Observe,
    OneInflatedBeta,
    Outcome,
    TaskSetup,
    DEFAULT_BOXES,
    DEFAULT_KEYS,
    GENERALIZATION_TRIALS,
    load_task_config,
    oracle_predicts,
    sample_reliability,
)
from .rules import RuleProgram, eval_rule, parse_rule, print_rule, rule_to_soc
from .soc import (
    ProposalConfig,
    SoC,
    SocProposal,
    VariantSpec,
    VARIANTS,
    prespecified_rules,
    sample_hypothesis,
)
from .smc import (
    Evidence,
    ParticleSet,
    expected_information_gain,
    likelihood,
    maybe_resample_rejuvenate,
    select_action,
    update_weights,
)
from .agents import (
    LlmAgentParams,
    SocAgentParams,
    run_llm_ps_episode,
    run_react_episode,
    run_soc_episode,
    score_program,
)
from .backends import BackendConfig, ChatMessage, HttpBackend, ScriptedBackend, mock_from_script
from .fitting import (
    ProbabilityTable,
    Theta,
    aic,
    build_probability_table,
    grid_for_variant,
    grid_search,
    log_likelihood,
    paired_compare,
    trajectory_counts,
)
from .trajectories import Trajectory, TrialRecord, read_trajectories, write_trajectories

__version__ = "0.1.0"
