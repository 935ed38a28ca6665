"""Small expression language used by inheritance conditions, attractor
triggers, rule guards and fork predicates.

Supported forms: comparisons, ``and`` / ``or`` / ``not`` with short-circuit
evaluation, additive and multiplicative arithmetic, number / string / boolean
literals, slot references (``role.slot.path`` or an absolute slash path), and
the builtins ``distance(a, b)``, ``elapsed_since(t)`` and ``exists(p)``.
There is no implicit coercion: mixing types is a hard :class:`TypeMismatch`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import (
    ConditionSyntaxError,
    TypeMismatch,
    UnknownPathInCondition,
    Unresolvable,
    PathThroughScalar,
    UnknownSegment,
    BadPath,
)
from .model import KnowledgeBase, Quantity, Ref, UNSET, slot_get
from .paths import kline_of, locate

_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<string>"(?:[^"\\]|\\.)*")
      | (?P<word>[A-Za-z0-9_.\-]+(?:/[A-Za-z0-9_.\-]+)*)
      | (?P<op>==|!=|<=|>=|<|>|\(|\)|,|\+|\*)
    )""",
    re.VERBOSE,
)

_NUMBER_RE = re.compile(r"^-?\d+(\.\d+)?([eE]-?\d+)?$")

_BUILTINS = ("distance", "elapsed_since", "exists")


@dataclass
class Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            remainder = text[pos:].lstrip()
            if not remainder:
                break
            raise ConditionSyntaxError(
                f"cannot tokenize {remainder[:12]!r} in condition {text!r}")
        if match.lastgroup == "string":
            tokens.append(Token("string", match.group("string"), match.start()))
        elif match.lastgroup == "word":
            word = match.group("word")
            if _NUMBER_RE.match(word):
                tokens.append(Token("number", word, match.start()))
            elif word in ("and", "or", "not", "true", "false"):
                tokens.append(Token(word, word, match.start()))
            else:
                tokens.append(Token("ref", word, match.start()))
        else:
            tokens.append(Token("op", match.group("op"), match.start()))
        pos = match.end()
    return tokens


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: Any


@dataclass(frozen=True)
class PathRef:
    text: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: Any


@dataclass(frozen=True)
class Binary:
    op: str
    left: Any
    right: Any


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> Optional[Token]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ConditionSyntaxError(f"unexpected end of condition {self.text!r}")
        self.i += 1
        return tok

    def expect_op(self, text: str) -> None:
        tok = self.take()
        if tok.kind != "op" or tok.text != text:
            raise ConditionSyntaxError(
                f"expected {text!r}, got {tok.text!r} in {self.text!r}")

    def parse(self) -> Any:
        node = self.parse_or()
        if self.peek() is not None:
            raise ConditionSyntaxError(
                f"trailing tokens after condition in {self.text!r}")
        return node

    def parse_or(self) -> Any:
        node = self.parse_and()
        while (tok := self.peek()) is not None and tok.kind == "or":
            self.take()
            node = Binary("or", node, self.parse_and())
        return node

    def parse_and(self) -> Any:
        node = self.parse_not()
        while (tok := self.peek()) is not None and tok.kind == "and":
            self.take()
            node = Binary("and", node, self.parse_not())
        return node

    def parse_not(self) -> Any:
        if (tok := self.peek()) is not None and tok.kind == "not":
            self.take()
            return Unary("not", self.parse_not())
        return self.parse_cmp()

    def parse_cmp(self) -> Any:
        node = self.parse_sum()
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text in (
                "==", "!=", "<", "<=", ">", ">="):
            op = self.take().text
            node = Binary(op, node, self.parse_sum())
        return node

    def parse_sum(self) -> Any:
        node = self.parse_term()
        while (tok := self.peek()) is not None and (
                (tok.kind == "op" and tok.text == "+")
                or (tok.kind == "number" and tok.text.startswith("-"))):
            if tok.kind == "op":
                self.take()
                node = Binary("+", node, self.parse_term())
            else:
                # "a - 1" tokenizes the minus into the number literal
                self.take()
                node = Binary("+", node, Lit(_parse_number(tok.text)))
        return node

    def parse_term(self) -> Any:
        node = self.parse_primary()
        while (tok := self.peek()) is not None and tok.kind == "op" and tok.text == "*":
            self.take()
            node = Binary("*", node, self.parse_primary())
        return node

    def parse_primary(self) -> Any:
        tok = self.take()
        if tok.kind == "number":
            return Lit(_parse_number(tok.text))
        if tok.kind == "string":
            return Lit(_unquote(tok.text))
        if tok.kind == "true":
            return Lit(True)
        if tok.kind == "false":
            return Lit(False)
        if tok.kind == "op" and tok.text == "(":
            node = self.parse_or()
            self.expect_op(")")
            return node
        if tok.kind == "ref":
            nxt = self.peek()
            if tok.text in _BUILTINS and nxt is not None and nxt.kind == "op" \
                    and nxt.text == "(":
                self.take()
                args = [self.parse_or()]
                while (t := self.peek()) is not None and t.kind == "op" and t.text == ",":
                    self.take()
                    args.append(self.parse_or())
                self.expect_op(")")
                return Call(tok.text, tuple(args))
            return PathRef(tok.text)
        raise ConditionSyntaxError(f"unexpected token {tok.text!r} in {self.text!r}")


def _parse_number(text: str) -> float:
    value = float(text)
    return int(value) if value.is_integer() and "e" not in text.lower() \
        and "." not in text else value


def _unquote(text: str) -> str:
    return text[1:-1].replace('\\"', '"').replace("\\n", "\n").replace("\\\\", "\\")


_CACHE: dict[str, Any] = {}


def compile_condition(text: str) -> Any:
    """Parse once, cache by text."""
    node = _CACHE.get(text)
    if node is None:
        node = _Parser(text).parse()
        _CACHE[text] = node
    return node


# --- evaluation ------------------------------------------------------------

@dataclass
class Env:
    """Evaluation context.

    ``roles`` maps role names to knowledge-source appellations; ``vars``
    holds directly-bound values (rule variables, pulse payload fields).
    ``reads`` collects the canonical address of every successful slot read.
    """

    kb: Optional[KnowledgeBase] = None
    roles: dict = field(default_factory=dict)
    vars: dict = field(default_factory=dict)
    clock: int = 0
    context: Any = None
    reads: Optional[set] = None

    def note_read(self, ks: str, slot_path: tuple) -> None:
        if self.reads is not None:
            self.reads.add(kline_of(ks, slot_path))


def _unwrap(value: Any) -> Any:
    if isinstance(value, Quantity):
        return value.magnitude
    if isinstance(value, Ref):
        return value.appellation
    return value


def _resolve_ref(ref: PathRef, env: Env) -> Any:
    text = ref.text
    if "/" in text:
        if env.kb is None:
            raise UnknownPathInCondition(f"no knowledge base to resolve {text!r}")
        try:
            ks, slots = locate(env.kb, text)
            value = _shadowed_get(env, ks, slots)
        except (UnknownSegment, BadPath, Unresolvable, PathThroughScalar) as exc:
            raise UnknownPathInCondition(str(exc)) from None
        env.note_read(ks, slots)
        return _unwrap(value)
    head, _, rest = text.partition(".")
    if not rest:
        if head in env.vars:
            return _unwrap(env.vars[head])
        if head in env.roles:
            return env.roles[head]
        raise UnknownPathInCondition(f"unknown name {head!r} in condition")
    if head in env.roles:
        ks = env.roles[head]
        slots = tuple(rest.split("."))
        if slots == ("appellation",):
            return ks
        if env.kb is None:
            raise UnknownPathInCondition(f"no knowledge base to resolve {text!r}")
        try:
            value = _shadowed_get(env, ks, slots)
        except (Unresolvable, PathThroughScalar) as exc:
            raise UnknownPathInCondition(str(exc)) from None
        env.note_read(ks, slots)
        return _unwrap(value)
    if head in env.vars:
        raise UnknownPathInCondition(
            f"{head!r} is a plain value, cannot descend {rest!r}")
    raise UnknownPathInCondition(f"unknown role {head!r} in condition")


def _shadowed_get(env: Env, ks: str, slots: tuple) -> Any:
    if env.context is not None:
        for assumed_path, assumed_value in env.context.assumptions:
            try:
                a_ks, a_slots = locate(env.kb, assumed_path)
            except (UnknownSegment, BadPath):
                continue
            if a_ks == ks and a_slots == slots:
                return assumed_value
    value = slot_get(env.kb.ks(ks).slots, slots)
    if value is UNSET:
        raise Unresolvable(f"slot {kline_of(ks, slots)!r} is unset")
    return value


def _require_number(value: Any, where: str) -> Any:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeMismatch(f"{where} needs a number, got {type(value).__name__}")
    return value


def _require_bool(value: Any, where: str) -> bool:
    if not isinstance(value, bool):
        raise TypeMismatch(f"{where} needs a boolean, got {type(value).__name__}")
    return value


def _compare(op: str, left: Any, right: Any) -> bool:
    if op in ("==", "!="):
        if isinstance(left, bool) != isinstance(right, bool):
            raise TypeMismatch(f"cannot compare {left!r} with {right!r}")
        numeric = (isinstance(left, (int, float)) and not isinstance(left, bool),
                   isinstance(right, (int, float)) and not isinstance(right, bool))
        if numeric[0] != numeric[1]:
            raise TypeMismatch(f"cannot compare {left!r} with {right!r}")
        if isinstance(left, str) != isinstance(right, str):
            raise TypeMismatch(f"cannot compare {left!r} with {right!r}")
        return (left == right) if op == "==" else (left != right)
    left = _require_number(left, f"operand of {op!r}")
    right = _require_number(right, f"operand of {op!r}")
    return {"<": left < right, "<=": left <= right,
            ">": left > right, ">=": left >= right}[op]


def _as_vector(value: Any, where: str) -> list:
    if isinstance(value, (list, tuple)) and value and all(
            isinstance(_unwrap(v), (int, float)) and not isinstance(v, bool)
            for v in value):
        return [_unwrap(v) for v in value]
    raise TypeMismatch(f"{where} needs a numeric vector, got {value!r}")


def _eval(node: Any, env: Env) -> Any:
    if isinstance(node, Lit):
        return node.value
    if isinstance(node, PathRef):
        return _resolve_ref(node, env)
    if isinstance(node, Unary):
        return not _require_bool(_eval(node.operand, env), "'not'")
    if isinstance(node, Binary):
        if node.op == "and":
            return _require_bool(_eval(node.left, env), "'and'") \
                and _require_bool(_eval(node.right, env), "'and'")
        if node.op == "or":
            return _require_bool(_eval(node.left, env), "'or'") \
                or _require_bool(_eval(node.right, env), "'or'")
        if node.op in ("+", "*"):
            left = _require_number(_eval(node.left, env), f"operand of {node.op!r}")
            right = _require_number(_eval(node.right, env), f"operand of {node.op!r}")
            return left + right if node.op == "+" else left * right
        return _compare(node.op, _eval(node.left, env), _eval(node.right, env))
    if isinstance(node, Call):
        return _call(node, env)
    raise ConditionSyntaxError(f"cannot evaluate node {node!r}")


def _call(node: Call, env: Env) -> Any:
    if node.fn == "exists":
        if len(node.args) != 1 or not isinstance(node.args[0], PathRef):
            raise ConditionSyntaxError("exists() takes one path argument")
        try:
            _resolve_ref(node.args[0], env)
            return True
        except UnknownPathInCondition:
            return False
    if node.fn == "distance":
        if len(node.args) != 2:
            raise ConditionSyntaxError("distance() takes two arguments")
        left = _as_vector(_eval(node.args[0], env), "distance()")
        right = _as_vector(_eval(node.args[1], env), "distance()")
        if len(left) != len(right):
            raise TypeMismatch("distance() vectors differ in length")
        return math.sqrt(sum((a - b) ** 2 for a, b in zip(left, right)))
    if node.fn == "elapsed_since":
        if len(node.args) != 1:
            raise ConditionSyntaxError("elapsed_since() takes one argument")
        then = _require_number(_eval(node.args[0], env), "elapsed_since()")
        return env.clock - then
    raise ConditionSyntaxError(f"unknown builtin {node.fn!r}")


def eval_condition(text: str, env: Env) -> bool:
    """Evaluate a condition to a boolean; non-boolean results are rejected."""
    result = _eval(compile_condition(text), env)
    return _require_bool(result, "condition")


def eval_expression(text: str, env: Env) -> Any:
    """Evaluate an expression to any value (used by rule guards and tests)."""
    return _eval(compile_condition(text), env)
