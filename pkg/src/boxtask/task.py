"""Box Task world: the five boxes, thirteen keys, key reliability, and the
seeded episode simulator (Observe / Attempt transitions, termination)."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

N_BOXES = 5
FULL_BELIEF = frozenset(range(1, N_BOXES + 1))
DEFAULT_MAX_TRIALS = 70


class BoxTaskError(Exception):
    """Base class for task-level errors."""


class UnknownIdError(BoxTaskError):
    """Action referenced a box or key id absent from the configuration."""


class AttemptOnOpenBoxError(BoxTaskError):
    """Attempt targeted an already-open box; boxes cannot re-lock, so this
    signals a caller bug rather than a legal move."""


@dataclass(frozen=True)
class KeyDef:
    """A key: colored fob showing either a number or a shape, never both."""

    id: str
    color: str
    number: int | None = None
    shape: str | None = None

    def __post_init__(self) -> None:
        if (self.number is None) == (self.shape is None):
            raise ValueError(f"key {self.id!r} must carry exactly one of number/shape")


@dataclass(frozen=True)
class BoxDef:
    """A box: unique color, a shape printed on its faces, the hidden count of
    shape instances (1..5), and its fixed line-up position."""

    id: str
    color: str
    shape: str
    true_number: int
    position: int


# The production box/key set. Box numbers are the hidden shape counts; the
# true rule pairs each box with the key whose number equals that count.
DEFAULT_BOXES: tuple[BoxDef, ...] = (
    BoxDef("red", "red", "moon", 1, 1),
    BoxDef("pink", "pink", "cloud", 2, 2),
    BoxDef("white", "white", "diamond", 4, 3),
    BoxDef("purple", "purple", "heart", 3, 4),
    BoxDef("blue", "blue", "triangle", 5, 5),
)

DEFAULT_KEYS: tuple[KeyDef, ...] = (
    KeyDef("red1", "red", number=1),
    KeyDef("pink6", "pink", number=6),
    KeyDef("grey2", "grey", number=2),
    KeyDef("greycloud", "grey", shape="cloud"),
    KeyDef("orange4", "orange", number=4),
    KeyDef("green3", "green", number=3),
    KeyDef("bluestar", "blue", shape="star"),
    KeyDef("yellow5", "yellow", number=5),
    KeyDef("greenheart", "green", shape="heart"),
    KeyDef("white7", "white", number=7),
    KeyDef("triangleyellow", "yellow", shape="triangle"),
    KeyDef("diamondorange", "orange", shape="diamond"),
    KeyDef("purplearrow", "purple", shape="arrow"),
)


@dataclass(frozen=True)
class Deterministic:
    """Keys always work on rule-correct attempts."""

    def sample(self, rng: np.random.Generator) -> float:
        return 1.0


@dataclass(frozen=True)
class Fixed:
    """A fixed per-episode success probability on rule-correct attempts."""

    rho: float

    def __post_init__(self) -> None:
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must be in (0, 1], got {self.rho}")

    def sample(self, rng: np.random.Generator) -> float:
        return self.rho


@dataclass(frozen=True)
class OneInflatedBeta:
    """Mixture of a point mass at 1.0 and a Beta(alpha, beta) component; the
    empirical per-subject key reliability model."""

    alpha: float
    beta: float
    point_mass: float

    def __post_init__(self) -> None:
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if not 0.0 <= self.point_mass <= 1.0:
            raise ValueError(f"point_mass must be in [0, 1], got {self.point_mass}")

    def sample(self, rng: np.random.Generator) -> float:
        if rng.random() < self.point_mass:
            return 1.0
        return float(rng.beta(self.alpha, self.beta))


ReliabilityModel = Deterministic | Fixed | OneInflatedBeta

# Fit to the behavioral sample: half the subjects never saw a correct pair
# fail; the rest follow Beta(5.9, 2.7).
EMPIRICAL_RELIABILITY = OneInflatedBeta(alpha=5.9, beta=2.7, point_mass=0.5)


def sample_reliability(mode: ReliabilityModel, rng: np.random.Generator) -> float:
    """Draw the episode's realized reliability for the given mode."""
    return mode.sample(rng)


@dataclass(frozen=True)
class EnvConfig:
    reliability: ReliabilityModel = Deterministic()
    observability: str = "full"  # "full" | "partial"
    max_trials: int = DEFAULT_MAX_TRIALS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.observability not in ("full", "partial"):
            raise ValueError(f"unknown observability {self.observability!r}")
        if self.max_trials < 1:
            raise ValueError("max_trials must be >= 1")


@dataclass(frozen=True)
class Observe:
    box_id: str


@dataclass(frozen=True)
class Attempt:
    box_id: str
    key_id: str


Action = Observe | Attempt


@dataclass(frozen=True)
class Outcome:
    """Attempt outcomes carry `success`; Observe outcomes carry `revealed_number`."""

    success: bool | None = None
    revealed_number: int | None = None


@dataclass(frozen=True)
class BoxView:
    """The observable slice of one box: full static attributes plus the
    current belief over its hidden shape count."""

    id: str
    color: str
    shape: str
    position: int
    number_belief: frozenset[int]
    observed: bool


@dataclass(frozen=True)
class EnvState:
    """Open flags, per-box number beliefs and observed markers (aligned with
    the env's position-sorted box order), trial counter, realized reliability."""

    open_flags: tuple[bool, ...]
    number_belief: tuple[frozenset[int], ...]
    observed: tuple[bool, ...]
    trial_index: int
    realized_rho: float

    @property
    def n_open(self) -> int:
        return sum(self.open_flags)


def oracle_predicts(key: KeyDef, box: BoxDef) -> bool:
    """Ground truth: a box opens with the key whose number equals the box's
    hidden shape count. Shape-only keys never open anything."""
    return key.number is not None and key.number == box.true_number


class BoxTaskEnv:
    """Single-episode, externally synchronized simulator. Batch runners may
    execute many envs in parallel as long as each owns its seed."""

    def __init__(
        self,
        config: EnvConfig,
        boxes: Sequence[BoxDef] = DEFAULT_BOXES,
        keys: Sequence[KeyDef] = DEFAULT_KEYS,
    ):
        boxes = tuple(sorted(boxes, key=lambda b: b.position))
        if sorted(b.position for b in boxes) != list(range(1, len(boxes) + 1)):
            raise ValueError("box positions must be a permutation of 1..n")
        if len({b.id for b in boxes}) != len(boxes):
            raise ValueError("box ids must be unique")
        if len({k.id for k in keys}) != len(keys):
            raise ValueError("key ids must be unique")
        self.config = config
        self.boxes = boxes
        self.keys = tuple(keys)
        self.box_index = {b.id: i for i, b in enumerate(boxes)}
        self.key_index = {k.id: i for i, k in enumerate(self.keys)}
        self._rng = np.random.default_rng(config.seed)
        self.state: EnvState | None = None

    def reset(self) -> EnvState:
        rho = sample_reliability(self.config.reliability, self._rng)
        full = self.config.observability == "full"
        beliefs = tuple(
            frozenset({b.true_number}) if full else FULL_BELIEF for b in self.boxes
        )
        self.state = EnvState(
            open_flags=(False,) * len(self.boxes),
            number_belief=beliefs,
            observed=(full,) * len(self.boxes),
            trial_index=0,
            realized_rho=rho,
        )
        return self.state

    def is_terminal(self, state: EnvState | None = None) -> bool:
        s = state if state is not None else self.state
        if s is None:
            return False
        return all(s.open_flags) or s.trial_index >= self.config.max_trials

    def step(self, action: Action) -> tuple[EnvState, Outcome]:
        if self.state is None:
            raise BoxTaskError("step before reset")
        s = self.state
        if isinstance(action, Observe):
            b = self._box(action.box_id)
            box = self.boxes[b]
            beliefs = list(s.number_belief)
            observed = list(s.observed)
            beliefs[b] = frozenset({box.true_number})
            observed[b] = True
            self.state = replace(
                s,
                number_belief=tuple(beliefs),
                observed=tuple(observed),
                trial_index=s.trial_index + 1,
            )
            return self.state, Outcome(revealed_number=box.true_number)
        if isinstance(action, Attempt):
            b = self._box(action.box_id)
            if action.key_id not in self.key_index:
                raise UnknownIdError(f"unknown key {action.key_id!r}")
            if s.open_flags[b]:
                raise AttemptOnOpenBoxError(f"box {action.box_id!r} is already open")
            key = self.keys[self.key_index[action.key_id]]
            # One uniform draw per attempt, consumed even when the oracle says
            # no: the outcome stream then depends only on the attempt schedule.
            u = self._rng.random()
            success = oracle_predicts(key, self.boxes[b]) and u < s.realized_rho
            flags = list(s.open_flags)
            if success:
                flags[b] = True
            self.state = replace(
                s, open_flags=tuple(flags), trial_index=s.trial_index + 1
            )
            return self.state, Outcome(success=success)
        raise BoxTaskError(f"unknown action {action!r}")

    def box_views(self, state: EnvState | None = None) -> tuple[BoxView, ...]:
        s = state if state is not None else self.state
        if s is None:
            raise BoxTaskError("no state; call reset first")
        return tuple(
            BoxView(
                id=box.id,
                color=box.color,
                shape=box.shape,
                position=box.position,
                number_belief=s.number_belief[i],
                observed=s.observed[i],
            )
            for i, box in enumerate(self.boxes)
        )

    def _box(self, box_id: str) -> int:
        try:
            return self.box_index[box_id]
        except KeyError:
            raise UnknownIdError(f"unknown box {box_id!r}") from None


def true_views(boxes: Sequence[BoxDef] = DEFAULT_BOXES) -> tuple[BoxView, ...]:
    """Fully-observed views of the given boxes (singleton beliefs)."""
    return tuple(
        BoxView(
            id=b.id,
            color=b.color,
            shape=b.shape,
            position=b.position,
            number_belief=frozenset({b.true_number}),
            observed=True,
        )
        for b in sorted(boxes, key=lambda b: b.position)
    )


@dataclass(frozen=True)
class GeneralizationTrial:
    """One forced-choice screen: a novel box plus four candidate keys
    (color-matched, shape-matched, number-matched = correct, number foil)."""

    box: BoxDef
    candidates: tuple[KeyDef, KeyDef, KeyDef, KeyDef]
    correct_key_id: str

    def box_view(self) -> BoxView:
        return BoxView(
            id=self.box.id,
            color=self.box.color,
            shape=self.box.shape,
            position=self.box.position,
            number_belief=frozenset({self.box.true_number}),
            observed=True,
        )


def _gen_trial(box_id, color, shape, number, off_shape, foil):
    return GeneralizationTrial(
        box=BoxDef(box_id, color, shape, number, 1),
        candidates=(
            KeyDef(f"{box_id}-color", color, shape=off_shape),
            KeyDef(f"{box_id}-shape", "silver", shape=shape),
            KeyDef(f"{box_id}-number", "gold", number=number),
            KeyDef(f"{box_id}-foil", "bronze", number=foil),
        ),
        correct_key_id=f"{box_id}-number",
    )


# Novel on-screen boxes for the post-task forced-choice phase. Shape counts
# shown on screen, so views are fully observed.
GENERALIZATION_TRIALS: tuple[GeneralizationTrial, ...] = (
    _gen_trial("novstar", "orange", "star", 4, "leaf", 7),
    _gen_trial("novcircle", "black", "circle", 2, "sun", 6),
    _gen_trial("novsun", "brown", "sun", 5, "ring", 1),
    _gen_trial("novfish", "teal", "fish", 3, "tree", 6),
)


@dataclass(frozen=True)
class TaskSetup:
    """An env configuration bundled with its box/key tables."""

    config: EnvConfig
    boxes: tuple[BoxDef, ...] = DEFAULT_BOXES
    keys: tuple[KeyDef, ...] = DEFAULT_KEYS

    def env(self, seed: int | None = None) -> BoxTaskEnv:
        cfg = self.config if seed is None else replace(self.config, seed=seed)
        return BoxTaskEnv(cfg, self.boxes, self.keys)


def reliability_from_dict(d: dict) -> ReliabilityModel:
    mode = d.get("mode", "deterministic")
    if mode == "deterministic":
        return Deterministic()
    if mode == "fixed":
        return Fixed(rho=float(d["rho"]))
    if mode == "one_inflated_beta":
        return OneInflatedBeta(
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            point_mass=float(d["point_mass"]),
        )
    raise ValueError(f"unknown reliability mode {mode!r}")


def reliability_to_dict(mode: ReliabilityModel) -> dict:
    if isinstance(mode, Deterministic):
        return {"mode": "deterministic"}
    if isinstance(mode, Fixed):
        return {"mode": "fixed", "rho": mode.rho}
    return {
        "mode": "one_inflated_beta",
        "alpha": mode.alpha,
        "beta": mode.beta,
        "point_mass": mode.point_mass,
    }


def load_task_config(path: str | Path) -> TaskSetup:
    """Load a task setup from a JSON config file.

    Recognized keys: reliability (mode dict), observability, max_trials, seed,
    and optional boxes/keys tables in the built-in schema.
    """
    with open(path) as f:
        raw = json.load(f)
    config = EnvConfig(
        reliability=reliability_from_dict(raw.get("reliability", {"mode": "deterministic"})),
        observability=raw.get("observability", "full"),
        max_trials=int(raw.get("max_trials", DEFAULT_MAX_TRIALS)),
        seed=int(raw.get("seed", 0)),
    )
    boxes = DEFAULT_BOXES
    if "boxes" in raw:
        boxes = tuple(
            BoxDef(
                id=b["id"],
                color=b["color"],
                shape=b["shape"],
                true_number=int(b["number"]),
                position=int(b["position"]),
            )
            for b in raw["boxes"]
        )
    keys = DEFAULT_KEYS
    if "keys" in raw:
        keys = tuple(
            KeyDef(
                id=k["id"],
                color=k["color"],
                number=int(k["number"]) if k.get("number") is not None else None,
                shape=k.get("shape"),
            )
            for k in raw["keys"]
        )
    return TaskSetup(config=config, boxes=boxes, keys=keys)
