"""Rule language: parser/printer round trips, evaluator semantics, the
semantics-lock tables for the four named rules, generalization choice."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boxtask.rules import (
    And,
    Atom,
    If,
    Or,
    RuleSyntaxError,
    UnknownConstantError,
    UnknownPredicateError,
    canonical_rule_program,
    eval_rule,
    generalization_choice,
    parse_rule,
    print_rule,
    random_program,
    rule_to_soc,
)
from boxtask.task import (
    BoxView,
    DEFAULT_BOXES,
    DEFAULT_KEYS,
    FULL_BELIEF,
    GENERALIZATION_TRIALS,
    true_views,
)

from conftest import KEY_BY_ID

VIEWS = true_views()
VIEW_BY_ID = {v.id: v for v in VIEWS}


def unobserved_view(box_id: str) -> BoxView:
    v = VIEW_BY_ID[box_id]
    return BoxView(v.id, v.color, v.shape, v.position, FULL_BELIEF, observed=False)


class TestParser:
    def test_bare_atom(self):
        assert parse_rule("color_match").root == Atom("color_match")

    def test_conditional(self):
        program = parse_rule("IF box_position_is(1) THEN color_match ELSE shape_match")
        assert program.root == If(
            Atom("box_position_is", (1,)), Atom("color_match"), Atom("shape_match")
        )

    def test_precedence_and_binds_tighter_than_or(self):
        program = parse_rule("color_match OR shape_match AND number_known")
        assert program.root == Or(
            Atom("color_match"), And(Atom("shape_match"), Atom("number_known"))
        )

    def test_parens_override(self):
        program = parse_rule("(color_match OR shape_match) AND number_known")
        assert program.root == And(
            Or(Atom("color_match"), Atom("shape_match")), Atom("number_known")
        )

    def test_dangling_operator_is_syntax_error(self):
        with pytest.raises(RuleSyntaxError):
            parse_rule("number_match AND")

    def test_unknown_predicate(self):
        with pytest.raises(UnknownPredicateError):
            parse_rule("numbr_match")

    def test_unknown_constant(self):
        with pytest.raises(UnknownConstantError):
            parse_rule("box_position_is(red)")
        with pytest.raises(UnknownConstantError):
            parse_rule("key_color_is(7)")

    def test_arity_checked(self):
        with pytest.raises(RuleSyntaxError):
            parse_rule("pair(red1)")
        with pytest.raises(RuleSyntaxError):
            parse_rule("color_match(red)")

    def test_error_carries_position(self):
        with pytest.raises(RuleSyntaxError) as err:
            parse_rule("color_match AND\nOR shape_match")
        assert err.value.line == 2
        assert err.value.column == 1

    def test_empty_input(self):
        with pytest.raises(RuleSyntaxError):
            parse_rule("")

    def test_trailing_garbage(self):
        with pytest.raises(RuleSyntaxError):
            parse_rule("color_match shape_match")


class TestRoundTrip:
    def test_roundtrip_fuzz_seeded(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            program = random_program(rng)
            text = print_rule(program)
            assert parse_rule(text).root == program.root, text

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_roundtrip_hypothesis(self, seed):
        program = random_program(np.random.default_rng(seed))
        assert parse_rule(print_rule(program)).root == program.root

    def test_right_nested_same_op_parenthesized(self):
        ast = And(Atom("color_match"), And(Atom("shape_match"), Atom("number_known")))
        assert print_rule(ast) == "color_match AND (shape_match AND number_known)"
        assert parse_rule(print_rule(ast)).root == ast

    def test_left_nested_same_op_flat(self):
        ast = And(And(Atom("color_match"), Atom("shape_match")), Atom("number_known"))
        assert print_rule(ast) == "color_match AND shape_match AND number_known"
        assert parse_rule(print_rule(ast)).root == ast


class TestEvaluator:
    def test_color_match(self):
        assert eval_rule(parse_rule("color_match"), KEY_BY_ID["red1"], VIEW_BY_ID["red"])
        assert not eval_rule(parse_rule("color_match"), KEY_BY_ID["grey2"], VIEW_BY_ID["red"])

    def test_number_match_observed(self):
        program = parse_rule("number_match")
        assert eval_rule(program, KEY_BY_ID["grey2"], VIEW_BY_ID["pink"])
        assert not eval_rule(program, KEY_BY_ID["green3"], VIEW_BY_ID["pink"])

    def test_number_match_unobserved_membership_semantics(self):
        program = parse_rule("number_match")
        view = unobserved_view("pink")
        # 2 is in {1..5}: optimistically true
        assert eval_rule(program, KEY_BY_ID["grey2"], view)
        # 6 can never be a shape count
        assert not eval_rule(program, KEY_BY_ID["pink6"], view)

    def test_number_known_tracks_observed_flag(self):
        program = parse_rule("number_known")
        assert eval_rule(program, KEY_BY_ID["red1"], VIEW_BY_ID["pink"])
        assert not eval_rule(program, KEY_BY_ID["red1"], unobserved_view("pink"))

    def test_pair_atom(self):
        program = parse_rule("pair(grey2, pink)")
        assert eval_rule(program, KEY_BY_ID["grey2"], VIEW_BY_ID["pink"])
        assert not eval_rule(program, KEY_BY_ID["grey2"], VIEW_BY_ID["red"])
        assert not eval_rule(program, KEY_BY_ID["red1"], VIEW_BY_ID["pink"])

    def test_boolean_connectives(self):
        key, view = KEY_BY_ID["red1"], VIEW_BY_ID["red"]
        assert eval_rule(parse_rule("TRUE AND color_match"), key, view)
        assert not eval_rule(parse_rule("NOT color_match"), key, view)
        assert eval_rule(parse_rule("FALSE OR TRUE"), key, view)
        assert eval_rule(
            parse_rule("IF FALSE THEN FALSE ELSE number_match"), key, view
        )

    def test_totality_fuzz(self):
        # evaluator never faults on random ASTs across the whole grid
        rng = np.random.default_rng(99)
        views = list(VIEWS) + [unobserved_view(b.id) for b in DEFAULT_BOXES]
        for _ in range(300):
            program = random_program(rng)
            for key in DEFAULT_KEYS:
                for view in views:
                    assert eval_rule(program, key, view) in (True, False)


class TestSemanticsLock:
    """rule_to_soc against hand-written tables for the named rules."""

    def test_color_rule_table(self):
        soc = rule_to_soc(parse_rule("color_match"), VIEWS, DEFAULT_KEYS)
        assert soc.mapping == {
            "red": frozenset({"red1"}),
            "pink": frozenset({"pink6"}),
            "white": frozenset({"white7"}),
            "purple": frozenset({"purplearrow"}),
            "blue": frozenset({"bluestar"}),
        }

    def test_shape_program_table(self):
        soc = rule_to_soc(parse_rule("shape_match"), VIEWS, DEFAULT_KEYS)
        assert soc.mapping == {
            "red": frozenset(),
            "pink": frozenset({"greycloud"}),
            "white": frozenset({"diamondorange"}),
            "purple": frozenset({"greenheart"}),
            "blue": frozenset({"triangleyellow"}),
        }

    def test_number_rule_matches_true_configuration(self):
        soc = rule_to_soc(parse_rule("number_match"), VIEWS, DEFAULT_KEYS)
        assert soc.mapping == {
            "red": frozenset({"red1"}),
            "pink": frozenset({"grey2"}),
            "white": frozenset({"orange4"}),
            "purple": frozenset({"green3"}),
            "blue": frozenset({"yellow5"}),
        }

    def test_order_program_table(self):
        soc = rule_to_soc(canonical_rule_program("order"), VIEWS, DEFAULT_KEYS)
        assert soc.mapping == {
            "red": frozenset({"red1"}),
            "pink": frozenset({"grey2"}),
            "white": frozenset({"green3"}),
            "purple": frozenset({"orange4"}),
            "blue": frozenset({"yellow5"}),
        }

    def test_false_maps_everything_to_empty(self):
        soc = rule_to_soc(parse_rule("FALSE"), VIEWS, DEFAULT_KEYS)
        assert all(keys == frozenset() for keys in soc.mapping.values())


class TestGeneralizationChoice:
    def test_number_rule_picks_correct_key(self, rng):
        trial = GENERALIZATION_TRIALS[0]
        choice = generalization_choice(
            parse_rule("number_match"), trial.box_view(), trial.candidates, rng
        )
        assert choice.id == trial.correct_key_id

    def test_color_rule_picks_color_key(self, rng):
        trial = GENERALIZATION_TRIALS[1]
        choice = generalization_choice(
            parse_rule("color_match"), trial.box_view(), trial.candidates, rng
        )
        assert choice.id == f"{trial.box.id}-color"

    def test_false_rule_uniform(self):
        # Monte Carlo: no predicted candidate -> uniform over the four
        rng = np.random.default_rng(5)
        trial = GENERALIZATION_TRIALS[2]
        program = parse_rule("FALSE")
        picks = [
            generalization_choice(program, trial.box_view(), trial.candidates, rng).id
            for _ in range(10_000)
        ]
        for candidate in trial.candidates:
            rate = picks.count(candidate.id) / len(picks)
            assert abs(rate - 0.25) < 0.03

    def test_duplicate_candidates_rejected(self, rng):
        trial = GENERALIZATION_TRIALS[0]
        with pytest.raises(ValueError):
            generalization_choice(
                None, trial.box_view(), [trial.candidates[0]] * 4, rng
            )

    def test_each_trial_has_one_cue_per_candidate(self):
        for trial in GENERALIZATION_TRIALS:
            box = trial.box_view()
            color = [k for k in trial.candidates if k.color == box.color]
            shape = [k for k in trial.candidates if k.shape == box.shape]
            number = [
                k for k in trial.candidates if k.number in box.number_belief
            ]
            assert len(color) == len(shape) == len(number) == 1
            assert number[0].id == trial.correct_key_id
