"""Prompt builders for the program-synthesis agents and the direct-action
baseline. The task framing and the misleading teacher script are fixed; the
code-template section presents the rule DSL the agents must emit."""

from __future__ import annotations

from .backends import ChatMessage
from .smc import Evidence
from .task import Attempt, KeyDef, Observe

SYSTEM_PROMPT = """You are an intelligent agent playing a game.
Your task is to open 5 boxes using 13 keys in fewest attempts.
You do not need special skills to play this game.
This game can be played by an 8-12 year old child."""

TEACHER_SCRIPT = """I'm going to show you the right way to unlock the boxes.
To open the boxes, you have to use a key that matches the color of the box.
So, to open this red box, I'm going to use this red key.
Great, now you can open all the doors!"""

DSL_REFERENCE = """A hypothesis is a rule written in the following mini-language, evaluated
for a (key, box) pair; the rule is TRUE when the key is predicted to open the box.

    expr     = "IF" expr "THEN" expr "ELSE" expr
             | expr "OR" expr | expr "AND" expr | "NOT" expr | "(" expr ")"
             | predicate
    predicate= color_match | shape_match | number_match | number_known
             | key_has_number | key_has_shape
             | key_color_is(<color>) | box_color_is(<color>)
             | box_position_is(<1-5>) | key_number_is(<n>)
             | pair(<key_id>, <box_id>) | TRUE | FALSE

color_match: key color equals box color. shape_match: key has a shape and it
equals the box shape. number_match: key has a number and it is in the box's
current belief set of shape counts (before picking a box up the belief set
holds every candidate count, so number_match treats any key number 1-5 as
possible; after picking up it collapses to the exact count). number_known:
the box has been picked up. pair(k, b): exactly that key on that box.

Your output should contain only one rule expression, absolutely nothing else."""


def _key_line(key: KeyDef) -> str:
    if key.number is not None:
        return f"The {key.id} key is {key.color} and has the number {key.number}."
    return f"The {key.id} key is {key.color} and has a {key.shape} shape."


def _ordinal(position: int) -> str:
    names = {1: "first", 2: "second", 3: "third", 4: "fourth", 5: "fifth"}
    return names.get(position, f"{position}th")


def keys_block(keys) -> str:
    lines = ["Here are the 13 keys (in no specific order):"]
    lines += [_key_line(k) for k in keys]
    return "\n".join(lines)


def boxes_block_partial(views) -> str:
    lines = ["Here are the boxes, lined up in this order:"]
    for v in sorted(views, key=lambda v: v.position):
        line = f"The {_ordinal(v.position)} box is {v.color}, has a {v.shape} shape."
        if v.observed:
            count = next(iter(v.number_belief))
            line += f" You picked it up: {count} of its faces have shapes on them."
        lines.append(line)
    return "\n".join(lines)


def boxes_block_full(views) -> str:
    lines = []
    for v in sorted(views, key=lambda v: v.position):
        count = next(iter(v.number_belief))
        plural = "s" if count != 1 else ""
        lines.append(f"The {v.color} box has {count} {v.shape} shape{plural}.")
    return "\n".join(lines)


def history_block(evidence: Evidence) -> str:
    if not len(evidence):
        return "No actions taken yet."
    lines = []
    for action, outcome in evidence.records:
        if isinstance(action, Attempt):
            result = "success" if outcome.success else "failure"
            lines.append(f"Open box {action.box_id} with key {action.key_id}: {result}")
        elif isinstance(action, Observe):
            lines.append(
                f"Examine {action.box_id}: {outcome.revealed_number} faces have shapes on them"
            )
    return "\n".join(lines)


def _context(variant: str, views, keys, unreliable: bool) -> str:
    parts = ["For each box there is a key that opens it."]
    if variant == "llm-ps-p":
        parts.append(
            "The goal of the game is to find the right key for each box, using as few actions as possible."
        )
    else:
        parts.append("The goal of the game is to find the right key for each box.")
    parts.append(
        "You have a demonstration video from a teacher telling you how to open all boxes.\n"
        'In the video, the teacher says:\n"' + TEACHER_SCRIPT + '"'
    )
    if variant == "llm-ps-p":
        parts.append(
            "Each box has a color. It also has a shape, which is printed on at least one of its faces.\n"
            "Not all faces are visible to you initially, but the game allows you to pick up boxes and\n"
            "examine them to get more information."
        )
        parts.append(boxes_block_partial(views))
    else:
        parts.append(boxes_block_full(views))
    parts.append(keys_block(keys))
    if unreliable:
        parts.append(
            "Remember that the keys and boxes are physical objects, so for some probability the\n"
            "correct key might fail to open the correct box due to a mechanical failure."
        )
    parts.append(DSL_REFERENCE)
    return "\n\n".join(parts)


def generate_messages(variant: str, views, keys, evidence: Evidence, unreliable: bool) -> list[ChatMessage]:
    """Initial-population prompt: produce a fresh hypothesis."""
    body = _context(variant, views, keys, unreliable)
    if variant == "llm-ps-p":
        body += (
            "\n\nYou can interact with this environment by taking two types of actions:\n"
            "(1) Attempt Action: write a rule that will be used to generate opening attempts, or\n"
            "(2) Observe Action: request more information about a given box.\n\n"
            'To take the Observe Action, your output should be exactly\n'
            '"PICK UP x", where x is the box id (do not use any other attributes of the box)\n\n'
            "Here is the history of actions taken and observed evidence.\n"
            "Please use them to make your decision:\n\n" + history_block(evidence)
        )
        body += "\n\nNow is your turn. Respond with either Observe or Attempt action."
    else:
        body += (
            "\n\nNow, it is your turn to generate a hypothesis.\n"
            "Your output should contain only one rule expression, absolutely nothing else."
        )
    return [ChatMessage("system", SYSTEM_PROMPT), ChatMessage("user", body)]


def refine_messages(
    variant: str,
    views,
    keys,
    evidence: Evidence,
    hypothesis_text: str,
    unreliable: bool,
) -> list[ChatMessage]:
    """Per-trial rejuvenation prompt: revise the worst hypothesis."""
    body = _context(variant, views, keys, unreliable)
    body += (
        "\n\nNow, your task is to improve and refine an existing hypothesis that\n"
        "performs poorly on existing evidence.\n\n"
        f"This is the hypothesis: {hypothesis_text}\n\n"
        "Here is the evidence from previous attempts:\n\n" + history_block(evidence)
    )
    if variant == "llm-ps-p":
        body += (
            '\n\nYou may instead take an Observe Action: output exactly "PICK UP x",\n'
            "where x is the box id, to examine that box."
        )
    body += (
        "\n\nGenerate a new hypothesis.\n"
        "Your output should contain only one rule expression, absolutely nothing else."
    )
    return [ChatMessage("system", SYSTEM_PROMPT), ChatMessage("user", body)]


def repair_messages(messages: list[ChatMessage], bad_output: str, error: str) -> list[ChatMessage]:
    return messages + [
        ChatMessage("assistant", bad_output),
        ChatMessage(
            "user",
            f"That output could not be parsed as a rule ({error}). "
            "Respond again with exactly one valid rule expression, nothing else.",
        ),
    ]


def react_messages(views, keys, evidence: Evidence) -> list[ChatMessage]:
    """Direct-action baseline: evidence history in, a `key, box` reply out."""
    tried = "\n".join(
        f"[{a.box_id}, {a.key_id}, {'success' if o.success else 'failure'}]"
        for a, o in evidence.records
        if isinstance(a, Attempt)
    )
    body = (
        "For each box there is a key that opens it, so the goal of the game is to find\n"
        "the right key for each box.\n"
        "You have a demonstration video from a teacher telling you how to open all boxes.\n"
        'In the video, the teacher says:\n"' + TEACHER_SCRIPT + '"\n\n'
        "Here are the boxes, lined up in this order:\n"
        + boxes_block_full(views)
        + "\n\n"
        + keys_block(keys)
        + "\n\nYou have already tried the following keys-box combinations:\n"
        + (tried if tried else "[none]")
        + "\n\nNow is your turn to open the boxes.\n"
        'Respond in the format "key, box" (e.g. "red1, red") and do not include any other\n'
        "text in the response."
    )
    return [ChatMessage("system", SYSTEM_PROMPT), ChatMessage("user", body)]
