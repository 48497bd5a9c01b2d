"""Prompt builders: history lines in the run-log style, the misleading
teacher script, belief-aware box blocks, and DSL expressiveness for the
representative hypothesis shapes agents actually produce."""

from __future__ import annotations

import pytest

from boxtask import prompts
from boxtask.rules import eval_rule, parse_rule
from boxtask.smc import Evidence
from boxtask.task import (
    Attempt,
    BoxView,
    DEFAULT_BOXES,
    DEFAULT_KEYS,
    FULL_BELIEF,
    Observe,
    Outcome,
    true_views,
)

from conftest import KEY_BY_ID

VIEWS = true_views()


def partial_views(observed: dict[str, int]) -> list[BoxView]:
    views = []
    for v in VIEWS:
        if v.id in observed:
            views.append(
                BoxView(v.id, v.color, v.shape, v.position, frozenset({observed[v.id]}), True)
            )
        else:
            views.append(BoxView(v.id, v.color, v.shape, v.position, FULL_BELIEF, False))
    return views


class TestHistoryBlock:
    def test_attempt_and_observe_lines(self):
        evidence = Evidence(DEFAULT_BOXES, DEFAULT_KEYS)
        evidence.append(Attempt("white", "white7"), Outcome(success=False))
        evidence.append(Observe("purple"), Outcome(revealed_number=3))
        evidence.append(Attempt("red", "red1"), Outcome(success=True))
        block = prompts.history_block(evidence)
        assert block.splitlines() == [
            "Open box white with key white7: failure",
            "Examine purple: 3 faces have shapes on them",
            "Open box red with key red1: success",
        ]

    def test_empty_history(self):
        assert "No actions" in prompts.history_block(Evidence(DEFAULT_BOXES, DEFAULT_KEYS))


class TestPromptContent:
    def test_teacher_script_present_and_misleading(self):
        msgs = prompts.generate_messages("llm-ps", VIEWS, DEFAULT_KEYS, Evidence(DEFAULT_BOXES, DEFAULT_KEYS), False)
        body = msgs[1].content
        assert "matches the color of the box" in body
        assert "red key" in body

    def test_full_observability_lists_counts(self):
        msgs = prompts.generate_messages("llm-ps", VIEWS, DEFAULT_KEYS, Evidence(DEFAULT_BOXES, DEFAULT_KEYS), False)
        body = msgs[1].content
        assert "The white box has 4 diamond shapes." in body
        assert "The red box has 1 moon shape." in body

    def test_partial_observability_hides_counts_until_pickup(self):
        views = partial_views({"purple": 3})
        msgs = prompts.generate_messages(
            "llm-ps-p", views, DEFAULT_KEYS, Evidence(DEFAULT_BOXES, DEFAULT_KEYS), True
        )
        body = msgs[1].content
        assert "PICK UP" in body
        assert "The fourth box is purple, has a heart shape. You picked it up: 3" in body
        assert "The first box is red, has a moon shape." in body
        assert "The red box has 1" not in body

    def test_thirteen_key_lines(self):
        block = prompts.keys_block(DEFAULT_KEYS)
        assert block.count("\nThe ") == 13
        assert "The red1 key is red and has the number 1." in block
        assert "The purplearrow key is purple and has a arrow shape." in block

    def test_react_reply_format_requested(self):
        msgs = prompts.react_messages(VIEWS, DEFAULT_KEYS, Evidence(DEFAULT_BOXES, DEFAULT_KEYS))
        assert 'Respond in the format "key, box"' in msgs[1].content

    def test_refine_carries_hypothesis_and_unreliability_note(self):
        evidence = Evidence(DEFAULT_BOXES, DEFAULT_KEYS)
        evidence.append(Attempt("pink", "pink6"), Outcome(success=False))
        msgs = prompts.refine_messages("llm-ps-s", VIEWS, DEFAULT_KEYS, evidence, "color_match", True)
        body = msgs[1].content
        assert "This is the hypothesis: color_match" in body
        assert "mechanical failure" in body
        assert "Open box pink with key pink6: failure" in body


class TestDslExpressiveness:
    """The representative hypothesis shapes agents produce, transcribed."""

    def test_position_conditional_rule(self):
        # color for the first box, then shape
        program = parse_rule("IF box_position_is(1) THEN color_match ELSE shape_match")
        assert eval_rule(program, KEY_BY_ID["red1"], VIEWS[0])
        assert eval_rule(program, KEY_BY_ID["greycloud"], VIEWS[1])
        assert not eval_rule(program, KEY_BY_ID["pink6"], VIEWS[1])

    def test_optimistic_unknown_count_rule(self):
        # numbered keys are worth trying when the count is unknown,
        # otherwise require the match
        program = parse_rule("IF number_known THEN number_match ELSE key_has_number")
        unknown_pink = partial_views({})[1]
        assert eval_rule(program, KEY_BY_ID["pink6"], unknown_pink)
        assert not eval_rule(program, KEY_BY_ID["greycloud"], unknown_pink)
        known_pink = VIEWS[1]
        assert eval_rule(program, KEY_BY_ID["grey2"], known_pink)
        assert not eval_rule(program, KEY_BY_ID["pink6"], known_pink)

    def test_shape_or_number_rule(self):
        program = parse_rule("shape_match OR number_match")
        assert eval_rule(program, KEY_BY_ID["greycloud"], VIEWS[1])
        assert eval_rule(program, KEY_BY_ID["grey2"], VIEWS[1])
        assert not eval_rule(program, KEY_BY_ID["yellow5"], VIEWS[1])

    def test_lazy_fallback_rule(self):
        # the number rule where evidence exists, the taught rule elsewhere
        program = parse_rule(
            "IF key_has_number AND number_known THEN number_match ELSE color_match"
        )
        views = partial_views({"pink": 2})
        pink, red = views[1], views[0]
        assert eval_rule(program, KEY_BY_ID["grey2"], pink)
        assert not eval_rule(program, KEY_BY_ID["pink6"], pink)
        assert eval_rule(program, KEY_BY_ID["red1"], red)  # color fallback

    def test_enumerated_pairing_rule(self):
        # constraint-set style enumerated mappings stay expressible
        program = parse_rule("pair(red1, red) OR pair(grey2, pink)")
        assert eval_rule(program, KEY_BY_ID["red1"], VIEWS[0])
        assert eval_rule(program, KEY_BY_ID["grey2"], VIEWS[1])
        assert not eval_rule(program, KEY_BY_ID["grey2"], VIEWS[0])
