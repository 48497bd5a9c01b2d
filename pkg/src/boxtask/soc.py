"""Set-of-constraints hypotheses and their proposal distribution: four
prespecified salient rules plus an evidence-conditioned online generator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .task import BoxDef, BoxView, KeyDef

DEFAULT_P_T = 0.02


@dataclass(frozen=True)
class SoC:
    """Mapping from each box to the set of keys predicted to open it.
    Predicted sets may be empty or multi-element."""

    mapping: dict
    label: str | None = field(default=None, compare=False)

    def predicts(self, key: KeyDef, box: BoxView) -> bool:
        return key.id in self.mapping.get(box.id, frozenset())

    def matrix(self, boxes: Sequence, keys: Sequence[KeyDef]) -> np.ndarray:
        """Dense (n_boxes, n_keys) prediction table in the given order."""
        out = np.zeros((len(boxes), len(keys)), dtype=bool)
        for i, box in enumerate(boxes):
            predicted = self.mapping.get(box.id, frozenset())
            for j, key in enumerate(keys):
                out[i, j] = key.id in predicted
        return out

    @classmethod
    def from_matrix(cls, mat: np.ndarray, boxes: Sequence, keys: Sequence[KeyDef], label=None) -> "SoC":
        return cls(
            mapping={
                box.id: frozenset(keys[j].id for j in np.flatnonzero(mat[i]))
                for i, box in enumerate(boxes)
            },
            label=label,
        )

    def digest(self) -> str:
        parts = []
        for box_id in self.mapping:
            keys = ",".join(sorted(self.mapping[box_id])) or "-"
            parts.append(f"{box_id}:{keys}")
        return "{" + " ".join(parts) + "}"


def _sorted_boxes(boxes: Sequence[BoxDef]) -> list[BoxDef]:
    return sorted(boxes, key=lambda b: b.position)


def color_rule(boxes, keys) -> SoC:
    return SoC(
        {b.id: frozenset(k.id for k in keys if k.color == b.color) for b in boxes},
        label="color",
    )


def shape_rule(boxes, keys) -> SoC:
    """Shape-matched keys; a box with no matching shape key is unconstrained
    (any key could open it)."""
    mapping = {}
    for b in boxes:
        matched = frozenset(k.id for k in keys if k.shape == b.shape)
        mapping[b.id] = matched if matched else frozenset(k.id for k in keys)
    return SoC(mapping, label="shape")


def order_rule(boxes, keys) -> SoC:
    """Box at position k opens with the key whose number is the k-th smallest
    among numbered keys."""
    numbered = sorted((k for k in keys if k.number is not None), key=lambda k: k.number)
    mapping = {}
    for i, b in enumerate(_sorted_boxes(boxes)):
        mapping[b.id] = frozenset({numbered[i].id}) if i < len(numbered) else frozenset()
    return SoC(mapping, label="order")


def number_rule(boxes, keys) -> SoC:
    return SoC(
        {
            b.id: frozenset(k.id for k in keys if k.number == b.true_number)
            for b in boxes
        },
        label="number",
    )


CANONICAL_RULES = ("color", "shape", "order", "number")

_RULE_BUILDERS = {
    "color": color_rule,
    "shape": shape_rule,
    "order": order_rule,
    "number": number_rule,
}


def canonical_rule(name: str, boxes, keys) -> SoC:
    return _RULE_BUILDERS[name](boxes, keys)


def shape_rule_strict(boxes, keys) -> SoC:
    """Shape matching without the unconstrained fallback: a box with no
    matching shape key maps to the empty set (the program `shape_match`)."""
    return SoC(
        {b.id: frozenset(k.id for k in keys if k.shape == b.shape) for b in boxes},
        label="shape",
    )


def canonical_rule_name(soc: SoC, boxes, keys) -> str | None:
    """Classify a constraint set against the four salient rules by mapping
    equality (either reading of the shape rule); None means a mixed set."""
    for name, build in _RULE_BUILDERS.items():
        if soc.mapping == build(boxes, keys).mapping:
            return name
    if soc.mapping == shape_rule_strict(boxes, keys).mapping:
        return "shape"
    return None


def prespecified_rules(
    p_t: float, p_gen: float, boxes, keys
) -> list[tuple[SoC, float]]:
    """The four salient rules with their prior slots: the true (number) rule
    gets p_t and the rest split the remaining non-generator mass equally.
    At p_gen = 1 every prespecified slot is zero (generator-only proposal)."""
    if not 0.0 < p_t < 1.0:
        raise ValueError(f"p_t must be in (0, 1), got {p_t}")
    if not 0.0 <= p_gen <= 1.0:
        raise ValueError(f"p_gen must be in [0, 1], got {p_gen}")
    if p_gen == 1.0:
        number_prior, rest = 0.0, 0.0
    else:
        if p_t + p_gen > 1.0:
            raise ValueError(f"need p_t + p_gen <= 1, got p_t={p_t}, p_gen={p_gen}")
        number_prior = p_t
        rest = (1.0 - p_t - p_gen) / 3.0
    return [
        (color_rule(boxes, keys), rest),
        (shape_rule(boxes, keys), rest),
        (order_rule(boxes, keys), rest),
        (number_rule(boxes, keys), number_prior),
    ]


@dataclass(frozen=True)
class VariantSpec:
    """A lesion configuration: which of the two mechanisms are disabled."""

    name: str
    lesion_rho: bool
    lesion_gen: bool

    @property
    def k(self) -> int:
        """Free-parameter count for complexity penalties."""
        return int(not self.lesion_rho) + int(not self.lesion_gen)


VARIANTS = {
    "soc-l": VariantSpec("soc-l", lesion_rho=True, lesion_gen=True),
    "soc-rel": VariantSpec("soc-rel", lesion_rho=False, lesion_gen=True),
    "soc-gen": VariantSpec("soc-gen", lesion_rho=True, lesion_gen=False),
    "soc-full": VariantSpec("soc-full", lesion_rho=False, lesion_gen=False),
}


@dataclass(frozen=True)
class ProposalConfig:
    """Mixture weights for the proposal: prespecified priors plus generator
    mass p_gen sum to one; rho_prior is the Beta prior over reliability whose
    mean is the agent's subjective rho."""

    p_gen: float = 0.0
    p_t: float = DEFAULT_P_T
    rho_prior: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_gen <= 1.0:
            raise ValueError(f"p_gen must be in [0, 1], got {self.p_gen}")
        if not 0.0 < self.p_t < 1.0:
            raise ValueError(f"p_t must be in (0, 1), got {self.p_t}")
        alpha, beta = self.rho_prior
        if alpha <= 0 or beta <= 0:
            raise ValueError("rho prior parameters must be positive")

    @property
    def rho_mean(self) -> float:
        alpha, beta = self.rho_prior
        return alpha / (alpha + beta)


class SocProposal:
    """q(h): draw a prespecified rule by prior, or sample the generator with
    probability p_gen. Pure given the caller's rng; safe to share."""

    def __init__(self, config: ProposalConfig, boxes, keys, rho: float | None = None):
        self.config = config
        self.boxes = tuple(_sorted_boxes(boxes))
        self.keys = tuple(keys)
        self._key_index = {k.id: j for j, k in enumerate(self.keys)}
        # subjective reliability used for generator downweighting
        self.rho = config.rho_mean if rho is None else rho
        self.prespecified = prespecified_rules(config.p_t, config.p_gen, self.boxes, self.keys)
        self._pre_matrices = np.stack(
            [soc.matrix(self.boxes, self.keys) for soc, _ in self.prespecified]
        )
        priors = np.array([p for _, p in self.prespecified])
        total = priors.sum() + config.p_gen
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"proposal mass must sum to 1, got {total}")
        self._pre_probs = priors / priors.sum() if priors.sum() > 0 else priors

    def generator_matrices(self, evidence, rng: np.random.Generator, m: int) -> np.ndarray:
        """Sample m generator constraint sets as (m, n_boxes, n_keys) bools.

        Per box: forced to the opener when a success is on record, otherwise
        one key drawn with weight (1 - rho)^failures.
        """
        n_b, n_k = len(self.boxes), len(self.keys)
        out = np.zeros((m, n_b, n_k), dtype=bool)
        weights = np.power(1.0 - self.rho, evidence.fail_counts) if evidence is not None else np.ones((n_b, n_k))
        for i, box in enumerate(self.boxes):
            opener = evidence.opened_by.get(box.id) if evidence is not None else None
            if opener is not None:
                out[:, i, self._key_index[opener]] = True
                continue
            w = weights[i]
            total = w.sum()
            # all wiped out (rho=1 and every key failed): fall back to uniform
            p = w / total if total > 0 else np.full(n_k, 1.0 / n_k)
            draws = rng.choice(n_k, size=m, p=p)
            out[np.arange(m), i, draws] = True
        return out

    def generator_sample(self, evidence, rng: np.random.Generator) -> SoC:
        mat = self.generator_matrices(evidence, rng, 1)[0]
        return SoC.from_matrix(mat, self.boxes, self.keys)

    def sample(self, evidence, rng: np.random.Generator) -> SoC:
        if rng.random() < self.config.p_gen:
            return self.generator_sample(evidence, rng)
        idx = int(rng.choice(len(self.prespecified), p=self._pre_probs))
        return self.prespecified[idx][0]

    def sample_batch(self, evidence, rng: np.random.Generator, m: int) -> list[SoC]:
        return [self.sample(evidence, rng) for _ in range(m)]

    def sample_hypothesis(self, evidence, rng: np.random.Generator) -> SoC:
        return self.sample(evidence, rng)

    def sample_matrices(self, evidence, rng: np.random.Generator, m: int) -> tuple[np.ndarray, list[SoC]]:
        """Batched draw returning both matrices and SoC objects."""
        use_gen = rng.random(m) < self.config.p_gen
        n_gen = int(use_gen.sum())
        mats = np.zeros((m, len(self.boxes), len(self.keys)), dtype=bool)
        socs: list[SoC | None] = [None] * m
        if n_gen:
            gen_mats = self.generator_matrices(evidence, rng, n_gen)
            mats[use_gen] = gen_mats
        if n_gen < m:
            idx = rng.choice(len(self.prespecified), size=m - n_gen, p=self._pre_probs)
            mats[~use_gen] = self._pre_matrices[idx]
            pre_slots = np.flatnonzero(~use_gen)
            for slot, which in zip(pre_slots, idx):
                socs[slot] = self.prespecified[which][0]
        for slot in np.flatnonzero(use_gen):
            socs[slot] = SoC.from_matrix(mats[slot], self.boxes, self.keys)
        return mats, socs  # type: ignore[return-value]


def sample_hypothesis(
    config: ProposalConfig,
    evidence,
    rng: np.random.Generator,
    boxes=None,
    keys=None,
    rho: float | None = None,
) -> SoC:
    """One mixture draw from q(h): the generator with probability p_gen,
    otherwise a prespecified rule by its prior. Convenience wrapper over
    SocProposal for one-off draws."""
    from .task import DEFAULT_BOXES, DEFAULT_KEYS

    proposal = SocProposal(
        config,
        boxes if boxes is not None else DEFAULT_BOXES,
        keys if keys is not None else DEFAULT_KEYS,
        rho=rho,
    )
    return proposal.sample(evidence, rng)
