"""Hypothesis mini-language: boolean predicates over a (key, box view) pair.

Grammar (canonical text form, EBNF):

    expr     = if_expr | or_expr ;
    if_expr  = "IF" expr "THEN" expr "ELSE" expr ;
    or_expr  = and_expr { "OR" and_expr } ;
    and_expr = not_expr { "AND" not_expr } ;
    not_expr = "NOT" not_expr | primary ;
    primary  = "(" expr ")" | "TRUE" | "FALSE" | atom ;
    atom     = NAME [ "(" arg { "," arg } ")" ] ;
    arg      = NAME | INTEGER ;

Atoms: color_match, shape_match, number_match, number_known, key_has_number,
key_has_shape, key_color_is(c), box_color_is(c), box_position_is(k),
key_number_is(k), pair(key_id, box_id). `number_match` uses membership in the
box's current belief set, so it is optimistically true on unobserved boxes;
compose with `number_known` for the pessimistic reading.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from .task import BoxView, KeyDef

__all__ = [
    "Atom",
    "Not",
    "And",
    "Or",
    "If",
    "RuleProgram",
    "RuleSyntaxError",
    "UnknownPredicateError",
    "UnknownConstantError",
    "parse_rule",
    "print_rule",
    "eval_rule",
    "rule_to_soc",
    "generalization_choice",
    "canonical_rule_program",
    "random_program",
]


class RuleSyntaxError(Exception):
    """Parse failure, with 1-based line/column of the offending token."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnknownPredicateError(RuleSyntaxError):
    pass


class UnknownConstantError(RuleSyntaxError):
    pass


# atom name -> argument kinds ("name" or "int")
ATOM_SIGNATURES: dict[str, tuple[str, ...]] = {
    "color_match": (),
    "shape_match": (),
    "number_match": (),
    "number_known": (),
    "key_has_number": (),
    "key_has_shape": (),
    "key_color_is": ("name",),
    "box_color_is": ("name",),
    "box_position_is": ("int",),
    "key_number_is": ("int",),
    "pair": ("name", "name"),
    "TRUE": (),
    "FALSE": (),
}

KEYWORDS = {"IF", "THEN", "ELSE", "NOT", "AND", "OR"}


@dataclass(frozen=True)
class Atom:
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class Not:
    child: "Expr"


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"


Expr = Union[Atom, Not, And, Or, If]


@dataclass(frozen=True)
class RuleProgram:
    """An immutable predicate program; evaluation is pure and total."""

    root: Expr

    @property
    def text(self) -> str:
        return print_rule(self)

    def predicts(self, key: KeyDef, box: BoxView) -> bool:
        return eval_rule(self, key, box)

    def __str__(self) -> str:
        return self.text


# ---------------------------------------------------------------------------
# Lexer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|\d+|[(),]|\S")


@dataclass(frozen=True)
class _Token:
    kind: str  # "name" | "int" | "punct" | "eof"
    value: str
    line: int
    column: int


def _tokenize(text: str) -> Iterator[_Token]:
    for lineno, line in enumerate(text.splitlines() or [""], start=1):
        for m in _TOKEN_RE.finditer(line):
            value = m.group(0)
            col = m.start() + 1
            if value.isdigit():
                yield _Token("int", value, lineno, col)
            elif value in "(),":
                yield _Token("punct", value, lineno, col)
            elif re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", value):
                yield _Token("name", value, lineno, col)
            else:
                raise RuleSyntaxError(f"unexpected character {value!r}", lineno, col)
    last_line = text.count("\n") + 1
    yield _Token("eof", "", last_line, len(text.splitlines()[-1]) + 1 if text.splitlines() else 1)


def _describe(tok: _Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.value)


class _Parser:
    def __init__(self, text: str):
        self.tokens = list(_tokenize(text))
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str) -> _Token:
        tok = self.peek()
        if tok.value != value:
            raise RuleSyntaxError(
                f"expected {value!r}, got {_describe(tok)}", tok.line, tok.column
            )
        return self.advance()

    def parse(self) -> Expr:
        expr = self.expr()
        tok = self.peek()
        if tok.kind != "eof":
            raise RuleSyntaxError(f"unexpected trailing {tok.value!r}", tok.line, tok.column)
        return expr

    def expr(self) -> Expr:
        if self.peek().value == "IF":
            return self.if_expr()
        return self.or_expr()

    def if_expr(self) -> Expr:
        self.expect("IF")
        cond = self.expr()
        self.expect("THEN")
        then = self.expr()
        self.expect("ELSE")
        orelse = self.expr()
        return If(cond, then, orelse)

    def or_expr(self) -> Expr:
        node = self.and_expr()
        while self.peek().value == "OR":
            self.advance()
            node = Or(node, self.and_expr())
        return node

    def and_expr(self) -> Expr:
        node = self.not_expr()
        while self.peek().value == "AND":
            self.advance()
            node = And(node, self.not_expr())
        return node

    def not_expr(self) -> Expr:
        if self.peek().value == "NOT":
            self.advance()
            return Not(self.not_expr())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.peek()
        if tok.value == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.value == "IF":
            return self.if_expr()
        if tok.kind != "name":
            raise RuleSyntaxError(
                f"expected a predicate, got {_describe(tok)}", tok.line, tok.column
            )
        if tok.value in KEYWORDS:
            raise RuleSyntaxError(f"unexpected keyword {tok.value!r}", tok.line, tok.column)
        return self.atom()

    def atom(self) -> Expr:
        tok = self.advance()
        name = tok.value
        if name not in ATOM_SIGNATURES:
            raise UnknownPredicateError(f"unknown predicate {name!r}", tok.line, tok.column)
        sig = ATOM_SIGNATURES[name]
        args: list = []
        if self.peek().value == "(":
            self.advance()
            while True:
                args.append(self._arg())
                if self.peek().value == ",":
                    self.advance()
                    continue
                break
            self.expect(")")
        if len(args) != len(sig):
            raise RuleSyntaxError(
                f"{name} takes {len(sig)} argument(s), got {len(args)}", tok.line, tok.column
            )
        coerced = []
        for kind, (arg, arg_tok) in zip(sig, args):
            if kind == "int":
                if arg_tok.kind != "int":
                    raise UnknownConstantError(
                        f"{name} expects an integer, got {arg!r}", arg_tok.line, arg_tok.column
                    )
                coerced.append(int(arg))
            else:
                if arg_tok.kind != "name" or arg in KEYWORDS:
                    raise UnknownConstantError(
                        f"{name} expects an identifier, got {arg!r}", arg_tok.line, arg_tok.column
                    )
                coerced.append(arg)
        return Atom(name, tuple(coerced))

    def _arg(self):
        tok = self.peek()
        if tok.kind not in ("name", "int"):
            raise RuleSyntaxError(
                f"expected an argument, got {_describe(tok)}", tok.line, tok.column
            )
        self.advance()
        return tok.value, tok


def parse_rule(text: str) -> RuleProgram:
    """Parse canonical rule text into a program; raises RuleSyntaxError with
    position info on malformed input."""
    return RuleProgram(_Parser(text).parse())


# ---------------------------------------------------------------------------
# Printer (canonical text; inverse of the parser on ASTs)
# ---------------------------------------------------------------------------

_LEVEL = {If: 0, Or: 1, And: 2, Not: 3, Atom: 4}


def _print(node: Expr, min_level: int) -> str:
    level = _LEVEL[type(node)]
    if isinstance(node, Atom):
        out = node.name
        if node.args:
            out += "(" + ", ".join(str(a) for a in node.args) + ")"
    elif isinstance(node, Not):
        out = "NOT " + _print(node.child, 3)
    elif isinstance(node, And):
        out = _print(node.left, 2) + " AND " + _print(node.right, 3)
    elif isinstance(node, Or):
        out = _print(node.left, 1) + " OR " + _print(node.right, 2)
    else:
        out = (
            "IF "
            + _print(node.cond, 0)
            + " THEN "
            + _print(node.then, 0)
            + " ELSE "
            + _print(node.orelse, 0)
        )
    if level < min_level:
        return "(" + out + ")"
    return out


def print_rule(program: RuleProgram | Expr) -> str:
    root = program.root if isinstance(program, RuleProgram) else program
    return _print(root, 0)


# ---------------------------------------------------------------------------
# Evaluator
# ---------------------------------------------------------------------------


def _eval_atom(atom: Atom, key: KeyDef, box: BoxView) -> bool:
    name = atom.name
    if name == "color_match":
        return key.color == box.color
    if name == "shape_match":
        return key.shape is not None and key.shape == box.shape
    if name == "number_match":
        return key.number is not None and key.number in box.number_belief
    if name == "number_known":
        return box.observed
    if name == "key_has_number":
        return key.number is not None
    if name == "key_has_shape":
        return key.shape is not None
    if name == "key_color_is":
        return key.color == atom.args[0]
    if name == "box_color_is":
        return box.color == atom.args[0]
    if name == "box_position_is":
        return box.position == atom.args[0]
    if name == "key_number_is":
        return key.number == atom.args[0]
    if name == "pair":
        return key.id == atom.args[0] and box.id == atom.args[1]
    if name == "TRUE":
        return True
    if name == "FALSE":
        return False
    raise AssertionError(f"unreachable atom {name}")


def eval_rule(program: RuleProgram | Expr, key: KeyDef, box: BoxView) -> bool:
    """Structural evaluation; total over all (key, box view) pairs."""
    node = program.root if isinstance(program, RuleProgram) else program
    if isinstance(node, Atom):
        return _eval_atom(node, key, box)
    if isinstance(node, Not):
        return not eval_rule(node.child, key, box)
    if isinstance(node, And):
        return eval_rule(node.left, key, box) and eval_rule(node.right, key, box)
    if isinstance(node, Or):
        return eval_rule(node.left, key, box) or eval_rule(node.right, key, box)
    return (
        eval_rule(node.then, key, box)
        if eval_rule(node.cond, key, box)
        else eval_rule(node.orelse, key, box)
    )


def rule_to_soc(program: RuleProgram, views, keys):
    """Brute-force the program over the full key/box grid into a constraint set."""
    from .soc import SoC

    return SoC(
        mapping={
            view.id: frozenset(k.id for k in keys if eval_rule(program, k, view))
            for view in views
        }
    )


def generalization_choice(
    hypothesis: RuleProgram | None,
    novel_box: BoxView,
    candidates,
    rng: np.random.Generator,
) -> KeyDef:
    """Forced choice among candidate keys: uniform over the predicted-true
    set, falling back to uniform over all candidates when nothing (or no
    hypothesis) predicts success."""
    candidates = list(candidates)
    if len(set(k.id for k in candidates)) != len(candidates):
        raise ValueError("candidate key ids must be distinct")
    if hypothesis is not None:
        predicted = [k for k in candidates if eval_rule(hypothesis, k, novel_box)]
        if predicted:
            return predicted[int(rng.integers(len(predicted)))]
    return candidates[int(rng.integers(len(candidates)))]


def canonical_rule_program(name: str, boxes=None, keys=None) -> RuleProgram:
    """The DSL form of a named salient rule.

    The order rule is an enumerated pairing (position k -> key with the k-th
    smallest number), so it needs the box/key tables.
    """
    if name == "color":
        return RuleProgram(Atom("color_match"))
    if name == "shape":
        return RuleProgram(Atom("shape_match"))
    if name == "number":
        return RuleProgram(Atom("number_match"))
    if name == "order":
        from .task import DEFAULT_BOXES, DEFAULT_KEYS

        boxes = list(boxes) if boxes is not None else list(DEFAULT_BOXES)
        keys = list(keys) if keys is not None else list(DEFAULT_KEYS)
        numbered = sorted((k for k in keys if k.number is not None), key=lambda k: k.number)
        boxes = sorted(boxes, key=lambda b: b.position)
        node: Expr | None = None
        for box, key in zip(boxes, numbered):
            atom = Atom("pair", (key.id, box.id))
            node = atom if node is None else Or(node, atom)
        return RuleProgram(node if node is not None else Atom("FALSE"))
    raise ValueError(f"unknown canonical rule {name!r}")


def random_program(rng: np.random.Generator, max_depth: int = 4, colors=None, ids=None) -> RuleProgram:
    """Uniform-ish random AST generator used by round-trip and totality fuzz."""
    colors = list(colors) if colors else ["red", "pink", "white", "purple", "blue", "grey"]
    ids = list(ids) if ids else ["red1", "grey2", "pink", "white", "blue", "purplearrow"]

    def gen(depth: int) -> Expr:
        if depth <= 0 or rng.random() < 0.4:
            name = list(ATOM_SIGNATURES)[int(rng.integers(len(ATOM_SIGNATURES)))]
            sig = ATOM_SIGNATURES[name]
            args = []
            for kind in sig:
                if kind == "int":
                    args.append(int(rng.integers(1, 8)))
                elif name == "pair":
                    args.append(ids[int(rng.integers(len(ids)))])
                else:
                    args.append(colors[int(rng.integers(len(colors)))])
            return Atom(name, tuple(args))
        choice = rng.integers(4)
        if choice == 0:
            return Not(gen(depth - 1))
        if choice == 1:
            return And(gen(depth - 1), gen(depth - 1))
        if choice == 2:
            return Or(gen(depth - 1), gen(depth - 1))
        return If(gen(depth - 1), gen(depth - 1), gen(depth - 1))

    return RuleProgram(gen(max_depth))
