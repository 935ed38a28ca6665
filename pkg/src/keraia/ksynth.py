"""Textual syntax for the knowledge model: parser, serializer, loader.

Block-structured, brace-delimited declarations introduced by keywords
(``cloud``, ``ks``, ``slot``, ``responder``, ``attractor``, ``drel``,
``lot``, ``step``, ``fork``, ``dimension``, ``juncture``, ``rule``,
``elaborate``); ``#`` starts a line comment.  Scalars are double-quoted
strings, decimal numbers, ``true``/``false``, and bare identifiers; a number
may carry a trailing quoted unit.  In slot and assumption positions a bare
identifier denotes a reference to another appellation; in rule positions it
denotes a plain string.  Condition expressions are carried verbatim as
quoted strings and parsed by the condition evaluator, never here.

``serialize`` emits a canonical two-space-indented form; parsing the output
of ``serialize`` yields a structurally equal document (round-trip law).
``load_into_kb`` builds a knowledge base in two passes, resolving every
cross-reference (responder names, cloud names, step and branch targets) and
rejecting unresolved ones.  ``parse_file`` honours ``use "file.ksynth"``
inclusion with cycle detection.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .drel import DRel
from .elaboration import ElaborationPlan, standard_functions
from .errors import (
    DuplicateAppellation,
    IncludeCycle,
    KsynthSyntaxError,
    UnresolvedReference,
)
from .lot import Branch, Fork, LineOfThought, Step
from .model import (
    UNSET,
    AttractorBinding,
    Dimension,
    Juncture,
    KnowledgeBase,
    KnowledgeSource,
    Quantity,
    Ref,
    ResponderBinding,
)
from .paths import parse_kline, resolve_kline
from .rules import Aggregate, Assert, Pattern, Respond, Rule, SetSlot, Var

__all__ = [
    "KsynthDocument", "CloudDecl", "KsDecl", "SlotDecl", "ResponderDecl",
    "AttractorDecl", "DrelDecl", "LotDecl", "StepDecl", "BranchDecl",
    "DimensionDecl", "JunctureDecl", "RuleDecl", "PatternDecl", "ActionDecl",
    "ElaborateDecl", "UseDecl", "parse", "parse_file", "serialize",
    "load_into_kb", "load_file", "parse_kline", "resolve_kline",
    "BUILTIN_OPS",
]

# --- document model --------------------------------------------------------


@dataclass
class SlotDecl:
    name: str
    value: Any = UNSET
    children: Optional[list] = None       # nested SlotDecls (block form)


@dataclass
class ResponderDecl:
    name: str
    op: str = "noop"
    params: list = field(default_factory=list)     # (name, value) in order
    trigger: str = ""


@dataclass
class AttractorDecl:
    watch: str = ""
    when: str = "true"
    respond: str = ""


@dataclass
class KsDecl:
    name: str
    slots: list = field(default_factory=list)
    responders: list = field(default_factory=list)
    attractors: list = field(default_factory=list)
    explains: str = ""


@dataclass
class CloudDecl:
    name: str
    tags: list = field(default_factory=list)
    decls: list = field(default_factory=list)      # CloudDecl | KsDecl


@dataclass
class DrelDecl:
    name: str
    source: str = ""
    target: str = ""
    shares: list = field(default_factory=list)
    when: str = "true"
    priority: int = 0


@dataclass
class BranchDecl:
    label: str
    when: str = ""
    kind: str = "continue"
    target: Any = None


@dataclass
class StepDecl:
    ks: str
    action: str
    name: str
    branches: Optional[list] = None


@dataclass
class LotDecl:
    name: str
    steps: list = field(default_factory=list)


@dataclass
class DimensionDecl:
    name: str
    juncture: str = ""
    assumes: list = field(default_factory=list)    # (path, value)


@dataclass
class JunctureDecl:
    name: str
    dimensions: list = field(default_factory=list)
    lots: list = field(default_factory=list)


@dataclass
class PatternDecl:
    subject: Any                                    # str | Var
    path: tuple = ()
    value: Any = True
    absent: bool = False


@dataclass
class ActionDecl:
    kind: str                                       # assert | set | respond
    subject: Any = None
    path: tuple = ()
    value: Any = True
    responder: str = ""


@dataclass
class RuleDecl:
    name: str
    rule_set: str = ""
    salience: int = 0
    patterns: list = field(default_factory=list)
    conditions: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)  # (kind, var, as_var)
    actions: list = field(default_factory=list)


@dataclass
class ElaborateDecl:
    name: str
    source: str = ""
    target: str = ""
    pairs: list = field(default_factory=list)       # (ks, function)


@dataclass
class UseDecl:
    path: str


@dataclass
class KsynthDocument:
    declarations: list = field(default_factory=list)


# --- lexer -----------------------------------------------------------------

_WORD_RE = re.compile(r"[A-Za-z0-9_.\-]+(?:/[A-Za-z0-9_.\-]+)*")
_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?$")
_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}


@dataclass
class _Token:
    kind: str           # word | var | string | punct | end
    text: str
    line: int
    column: int


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == '"':
            out = []
            i += 1
            col += 1
            while i < n and text[i] != '"':
                c = text[i]
                if c == "\\":
                    if i + 1 >= n or text[i + 1] not in _ESCAPES:
                        raise KsynthSyntaxError("bad string escape",
                                                line, col)
                    out.append(_ESCAPES[text[i + 1]])
                    i += 2
                    col += 2
                    continue
                if c == "\n":
                    raise KsynthSyntaxError("unterminated string",
                                            start_line, start_col)
                out.append(c)
                i += 1
                col += 1
            if i >= n:
                raise KsynthSyntaxError("unterminated string",
                                        start_line, start_col)
            i += 1
            col += 1
            tokens.append(_Token("string", "".join(out),
                                 start_line, start_col))
            continue
        if ch == "?":
            m = re.match(r"\?([A-Za-z0-9_.\-]+)", text[i:])
            if not m:
                raise KsynthSyntaxError("expected variable name after '?'",
                                        line, col)
            tokens.append(_Token("var", m.group(1), start_line, start_col))
            i += m.end()
            col += m.end()
            continue
        if ch in "{}[],":
            tokens.append(_Token("punct", ch, start_line, start_col))
            i += 1
            col += 1
            continue
        if text.startswith("==", i):
            tokens.append(_Token("punct", "==", start_line, start_col))
            i += 2
            col += 2
            continue
        if ch == "=":
            tokens.append(_Token("punct", "=", start_line, start_col))
            i += 1
            col += 1
            continue
        m = _WORD_RE.match(text, i)
        if m:
            tokens.append(_Token("word", m.group(0), start_line, start_col))
            col += m.end() - i
            i = m.end()
            continue
        raise KsynthSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("end", "", line, col))
    return tokens


# --- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = _lex(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str, tok: Optional[_Token] = None):
        tok = tok or self.peek()
        raise KsynthSyntaxError(message, tok.line, tok.column)

    def expect_word(self, text: Optional[str] = None) -> _Token:
        tok = self.next()
        if tok.kind != "word" or (text is not None and tok.text != text):
            self.fail(f"expected {text or 'identifier'}", tok)
        return tok

    def expect_punct(self, text: str) -> _Token:
        tok = self.next()
        if tok.kind != "punct" or tok.text != text:
            self.fail(f"expected {text!r}", tok)
        return tok

    def expect_string(self) -> str:
        tok = self.next()
        if tok.kind != "string":
            self.fail("expected quoted string", tok)
        return tok.text

    def at_word(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "word" and tok.text == text

    def at_punct(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.text == text

    # -- values ------------------------------------------------------------

    def parse_value(self, bare_as_ref: bool = True) -> Any:
        tok = self.next()
        if tok.kind == "string":
            return tok.text
        if tok.kind == "var":
            return Var(tok.text)
        if tok.kind == "punct" and tok.text == "[":
            items = []
            while not self.at_punct("]"):
                items.append(self.parse_value(bare_as_ref))
                if self.at_punct(","):
                    self.next()
            self.next()
            return items
        if tok.kind == "punct" and tok.text == "{":
            mapping: dict[str, Any] = {}
            while not self.at_punct("}"):
                key = self.expect_word().text
                self.expect_punct("=")
                mapping[key] = self.parse_value(bare_as_ref)
            self.next()
            return mapping
        if tok.kind == "word":
            if _NUMBER_RE.fullmatch(tok.text):
                number = (float(tok.text) if "." in tok.text
                          or "e" in tok.text or "E" in tok.text
                          else int(tok.text))
                if self.peek().kind == "string":
                    return Quantity(number, self.next().text)
                return number
            if tok.text == "true":
                return True
            if tok.text == "false":
                return False
            if tok.text == "unset":
                return UNSET
            return Ref(tok.text) if bare_as_ref else tok.text
        self.fail("expected a value", tok)

    # -- declarations ------------------------------------------------------

    def parse_document(self) -> KsynthDocument:
        decls = []
        while self.peek().kind != "end":
            decls.append(self.parse_declaration())
        return KsynthDocument(decls)

    def parse_declaration(self) -> Any:
        tok = self.peek()
        handlers = {
            "cloud": self.parse_cloud, "ks": self.parse_ks,
            "drel": self.parse_drel, "lot": self.parse_lot,
            "dimension": self.parse_dimension, "juncture": self.parse_juncture,
            "rule": self.parse_rule, "elaborate": self.parse_elaborate,
            "use": self.parse_use,
        }
        if tok.kind != "word" or tok.text not in handlers:
            self.fail("expected a declaration keyword", tok)
        return handlers[tok.text]()

    def parse_cloud(self) -> CloudDecl:
        self.expect_word("cloud")
        decl = CloudDecl(self.expect_word().text)
        self.expect_punct("{")
        while not self.at_punct("}"):
            if self.at_word("tag"):
                self.next()
                decl.tags.append(self.expect_word().text)
            elif self.at_word("cloud"):
                decl.decls.append(self.parse_cloud())
            elif self.at_word("ks"):
                decl.decls.append(self.parse_ks())
            else:
                self.fail("expected tag, cloud, or ks in cloud block")
        self.next()
        return decl

    def parse_ks(self) -> KsDecl:
        self.expect_word("ks")
        decl = KsDecl(self.expect_word().text)
        self.expect_punct("{")
        while not self.at_punct("}"):
            if self.at_word("slot"):
                decl.slots.append(self.parse_slot())
            elif self.at_word("responder"):
                decl.responders.append(self.parse_responder())
            elif self.at_word("attractor"):
                decl.attractors.append(self.parse_attractor())
            elif self.at_word("explains"):
                self.next()
                decl.explains = self.expect_string()
            else:
                self.fail("expected slot, responder, attractor, or explains")
        self.next()
        return decl

    def parse_slot(self) -> SlotDecl:
        self.expect_word("slot")
        name = self.expect_word().text
        if self.at_punct("="):
            self.next()
            return SlotDecl(name, value=self.parse_value())
        if self.at_punct("{"):
            self.next()
            children = []
            while not self.at_punct("}"):
                children.append(self.parse_slot())
            self.next()
            return SlotDecl(name, children=children)
        return SlotDecl(name)

    def parse_responder(self) -> ResponderDecl:
        self.expect_word("responder")
        decl = ResponderDecl(self.expect_word().text)
        self.expect_punct("{")
        while not self.at_punct("}"):
            if self.at_word("op"):
                self.next()
                decl.op = self.expect_word().text
            elif self.at_word("when"):
                self.next()
                decl.trigger = self.expect_string()
            elif self.at_word("param"):
                self.next()
                pname = self.expect_word().text
                self.expect_punct("=")
                decl.params.append((pname, self.parse_value(bare_as_ref=False)))
            else:
                self.fail("expected op, when, or param in responder block")
        self.next()
        return decl

    def parse_attractor(self) -> AttractorDecl:
        self.expect_word("attractor")
        decl = AttractorDecl()
        self.expect_punct("{")
        while not self.at_punct("}"):
            if self.at_word("watch"):
                self.next()
                tok = self.next()
                if tok.kind not in ("string", "word"):
                    self.fail("expected watch path", tok)
                decl.watch = tok.text
            elif self.at_word("when"):
                self.next()
                decl.when = self.expect_string()
            elif self.at_word("respond"):
                self.next()
                decl.respond = self.expect_word().text
            else:
                self.fail("expected watch, when, or respond in attractor")
        self.next()
        return decl

    def parse_drel(self) -> DrelDecl:
        self.expect_word("drel")
        decl = DrelDecl(self.expect_word().text)
        self.expect_punct("{")
        while not self.at_punct("}"):
            if self.at_word("source"):
                self.next()
                decl.source = self.expect_word().text
            elif self.at_word("target"):
                self.next()
                decl.target = self.expect_word().text
            elif self.at_word("share"):
                self.next()
                decl.shares.append(self.expect_word().text)
            elif self.at_word("when"):
                self.next()
                decl.when = self.expect_string()
            elif self.at_word("priority"):
                self.next()
                decl.priority = self._expect_int()
            else:
                self.fail("expected source, target, share, when, or priority")
        self.next()
        return decl

    def _expect_int(self) -> int:
        tok = self.expect_word()
        if not re.fullmatch(r"-?\d+", tok.text):
            self.fail("expected an integer", tok)
        return int(tok.text)

    def parse_lot(self) -> LotDecl:
        self.expect_word("lot")
        decl = LotDecl(self.expect_word().text)
        self.expect_punct("{")
        while not self.at_punct("}"):
            decl.steps.append(self.parse_step())
        self.next()
        return decl

    def parse_step(self) -> StepDecl:
        self.expect_word("step")
        ks = self.expect_word().text
        action_tok = self.expect_word()
        if action_tok.text not in ("respond", "rules"):
            self.fail("expected respond or rules", action_tok)
        name = self.expect_word().text
        step = StepDecl(ks, action_tok.text, name)
        if self.at_punct("{"):
            self.next()
            self.expect_word("fork")
            self.expect_punct("{")
            step.branches = []
            while not self.at_punct("}"):
                step.branches.append(self.parse_branch())
            self.next()
            self.expect_punct("}")
        return step

    def parse_branch(self) -> BranchDecl:
        self.expect_word("branch")
        decl = BranchDecl(self.expect_word().text)
        if self.at_word("when"):
            self.next()
            decl.when = self.expect_string()
        kind_tok = self.expect_word()
        if kind_tok.text == "continue":
            decl.kind = "continue"
        elif kind_tok.text == "step":
            decl.kind = "step"
            decl.target = self._expect_int()
        elif kind_tok.text == "lot":
            decl.kind = "lot"
            decl.target = self.expect_word().text
        else:
            self.fail("expected continue, step, or lot", kind_tok)
        return decl

    def parse_dimension(self) -> DimensionDecl:
        self.expect_word("dimension")
        decl = DimensionDecl(self.expect_word().text)
        self.expect_punct("{")
        while not self.at_punct("}"):
            if self.at_word("juncture"):
                self.next()
                decl.juncture = self.expect_word().text
            elif self.at_word("assume"):
                self.next()
                path = self.expect_word().text
                self.expect_punct("=")
                decl.assumes.append((path, self.parse_value()))
            else:
                self.fail("expected juncture or assume in dimension block")
        self.next()
        return decl

    def parse_juncture(self) -> JunctureDecl:
        self.expect_word("juncture")
        decl = JunctureDecl(self.expect_word().text)
        self.expect_punct("{")
        while not self.at_punct("}"):
            if self.at_word("dimension"):
                self.next()
                decl.dimensions.append(self.expect_word().text)
            elif self.at_word("lot"):
                self.next()
                decl.lots.append(self.expect_word().text)
            else:
                self.fail("expected dimension or lot in juncture block")
        self.next()
        return decl

    def parse_rule(self) -> RuleDecl:
        self.expect_word("rule")
        decl = RuleDecl(self.expect_word().text)
        self.expect_punct("{")
        while not self.at_punct("}"):
            if self.at_word("set"):
                self.next()
                decl.rule_set = self.expect_word().text
            elif self.at_word("salience"):
                self.next()
                decl.salience = self._expect_int()
            elif self.at_word("when"):
                self.next()
                mode = self.expect_word()
                if mode.text == "condition":
                    decl.conditions.append(self.expect_string())
                elif mode.text in ("fact", "absent"):
                    decl.patterns.append(
                        self.parse_pattern(absent=mode.text == "absent"))
                else:
                    self.fail("expected fact, absent, or condition", mode)
            elif self.at_word("minimize") or self.at_word("maximize"):
                kind = "min" if self.next().text == "minimize" else "max"
                var_tok = self.next()
                if var_tok.kind != "var":
                    self.fail("expected ?variable", var_tok)
                self.expect_word("as")
                decl.aggregates.append((kind, var_tok.text,
                                        self.expect_word().text))
            elif self.at_word("then"):
                self.next()
                decl.actions.append(self.parse_action())
            else:
                self.fail("expected set, salience, when, minimize, maximize,"
                          " or then")
        self.next()
        return decl

    def _subject_and_path(self) -> tuple[Any, tuple]:
        tok = self.next()
        if tok.kind == "var":
            subject: Any = Var(tok.text)
            combined: list[str] = []
        elif tok.kind == "word":
            segments = tok.text.split("/")
            subject = segments[0]
            combined = segments[1:]
        else:
            self.fail("expected a fact subject", tok)
        if self.peek().kind == "word" and self.peek().text not in (
                "then", "when", "set", "salience", "minimize", "maximize"):
            if combined:
                self.fail("subject already carries a path")
            combined = self.next().text.split("/")
        return subject, tuple(combined)

    def parse_pattern(self, absent: bool) -> PatternDecl:
        subject, path = self._subject_and_path()
        value: Any = True
        if self.at_punct("=="):
            self.next()
            value = self.parse_value(bare_as_ref=False)
        return PatternDecl(subject, path, value, absent)

    def parse_action(self) -> ActionDecl:
        kind_tok = self.expect_word()
        if kind_tok.text == "respond":
            ks = self.expect_word().text
            return ActionDecl("respond", subject=ks,
                              responder=self.expect_word().text)
        if kind_tok.text not in ("assert", "set"):
            self.fail("expected assert, set, or respond", kind_tok)
        subject, path = self._subject_and_path()
        value: Any = True
        if self.at_punct("="):
            self.next()
            value = self.parse_value(bare_as_ref=False)
        if kind_tok.text == "set" and not path:
            self.fail("set action needs a slot path", kind_tok)
        return ActionDecl(kind_tok.text, subject=subject, path=path,
                          value=value)

    def parse_elaborate(self) -> ElaborateDecl:
        self.expect_word("elaborate")
        decl = ElaborateDecl(self.expect_word().text)
        self.expect_punct("{")
        while not self.at_punct("}"):
            if self.at_word("from"):
                self.next()
                decl.source = self.expect_word().text
            elif self.at_word("into"):
                self.next()
                decl.target = self.expect_word().text
            elif self.at_word("apply"):
                self.next()
                ks = self.expect_word().text
                self.expect_word("with")
                decl.pairs.append((ks, self.expect_word().text))
            else:
                self.fail("expected from, into, or apply in elaborate block")
        self.next()
        return decl

    def parse_use(self) -> UseDecl:
        self.expect_word("use")
        return UseDecl(self.expect_string())


def parse(text: str) -> KsynthDocument:
    """Parse one source text; include directives are kept as declarations."""
    return _Parser(text).parse_document()


def parse_file(path: "str | Path",
               _stack: tuple = ()) -> KsynthDocument:
    """Parse a file, splicing ``use`` inclusions; cycles are rejected."""
    resolved = Path(path).resolve()
    if str(resolved) in _stack:
        chain = " -> ".join(_stack + (str(resolved),))
        raise IncludeCycle(f"inclusion cycle: {chain}")
    doc = parse(resolved.read_text(encoding="utf-8"))
    spliced = []
    for decl in doc.declarations:
        if isinstance(decl, UseDecl):
            target = (resolved.parent / decl.path)
            inner = parse_file(target, _stack + (str(resolved),))
            spliced.extend(inner.declarations)
        else:
            spliced.append(decl)
    return KsynthDocument(spliced)


# --- serializer ------------------------------------------------------------


def _escape(text: str) -> str:
    out = text.replace("\\", "\\\\").replace('"', '\\"')
    return out.replace("\n", "\\n").replace("\t", "\\t")


def _value_text(value: Any) -> str:
    if value is UNSET:
        return "unset"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Quantity):
        return f'{_value_text(value.magnitude)} "{_escape(value.unit)}"'
    if isinstance(value, Ref):
        return value.appellation
    if isinstance(value, str):
        return f'"{_escape(value)}"'
    if isinstance(value, float):
        if not math.isfinite(value):
            raise KsynthSyntaxError(f"non-finite number {value!r} has no "
                                    f"textual form", 0, 0)
        return repr(value).replace("e+", "e")
    if isinstance(value, int):
        return repr(value)
    if isinstance(value, Var):
        return f"?{value.name}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_value_text(v) for v in value) + "]"
    if isinstance(value, dict):
        inner = " ".join(f"{k} = {_value_text(v)}" for k, v in value.items())
        return "{ " + inner + " }" if inner else "{ }"
    raise KsynthSyntaxError(f"value {value!r} has no textual form", 0, 0)


def _term_text(subject: Any, path: tuple) -> str:
    head = f"?{subject.name}" if isinstance(subject, Var) else str(subject)
    return head + (" " + "/".join(path) if path else "")


class _Writer:
    def __init__(self) -> None:
        self.lines: list[str] = []
        self.depth = 0

    def put(self, text: str) -> None:
        self.lines.append("  " * self.depth + text)

    def block(self, header: str, body) -> None:
        self.put(header + " {")
        self.depth += 1
        body()
        self.depth -= 1
        self.put("}")


def serialize(doc: KsynthDocument) -> str:
    w = _Writer()
    for decl in doc.declarations:
        _write_decl(w, decl)
    return "\n".join(w.lines) + ("\n" if w.lines else "")


def _write_decl(w: _Writer, decl: Any) -> None:
    if isinstance(decl, CloudDecl):
        def body():
            for tag in decl.tags:
                w.put(f"tag {tag}")
            for inner in decl.decls:
                _write_decl(w, inner)
        w.block(f"cloud {decl.name}", body)
    elif isinstance(decl, KsDecl):
        _write_ks(w, decl)
    elif isinstance(decl, DrelDecl):
        def body():
            w.put(f"source {decl.source}")
            w.put(f"target {decl.target}")
            for share in decl.shares:
                w.put(f"share {share}")
            if decl.when != "true":
                w.put(f'when "{_escape(decl.when)}"')
            if decl.priority:
                w.put(f"priority {decl.priority}")
        w.block(f"drel {decl.name}", body)
    elif isinstance(decl, LotDecl):
        def body():
            for step in decl.steps:
                _write_step(w, step)
        w.block(f"lot {decl.name}", body)
    elif isinstance(decl, DimensionDecl):
        def body():
            if decl.juncture:
                w.put(f"juncture {decl.juncture}")
            for path, value in decl.assumes:
                w.put(f"assume {path} = {_value_text(value)}")
        w.block(f"dimension {decl.name}", body)
    elif isinstance(decl, JunctureDecl):
        def body():
            for dim in decl.dimensions:
                w.put(f"dimension {dim}")
            for lot in decl.lots:
                w.put(f"lot {lot}")
        w.block(f"juncture {decl.name}", body)
    elif isinstance(decl, RuleDecl):
        _write_rule(w, decl)
    elif isinstance(decl, ElaborateDecl):
        def body():
            w.put(f"from {decl.source}")
            w.put(f"into {decl.target}")
            for ks, fn in decl.pairs:
                w.put(f"apply {ks} with {fn}")
        w.block(f"elaborate {decl.name}", body)
    elif isinstance(decl, UseDecl):
        w.put(f'use "{_escape(decl.path)}"')
    else:
        raise KsynthSyntaxError(f"cannot serialize {type(decl).__name__}", 0, 0)


def _write_ks(w: _Writer, decl: KsDecl) -> None:
    def body():
        for slot in decl.slots:
            _write_slot(w, slot)
        for responder in decl.responders:
            _write_responder(w, responder)
        for attractor in decl.attractors:
            _write_attractor(w, attractor)
        if decl.explains:
            w.put(f'explains "{_escape(decl.explains)}"')
    w.block(f"ks {decl.name}", body)


def _write_slot(w: _Writer, slot: SlotDecl) -> None:
    if slot.children is not None:
        def body():
            for child in slot.children:
                _write_slot(w, child)
        w.block(f"slot {slot.name}", body)
    elif slot.value is UNSET:
        w.put(f"slot {slot.name}")
    else:
        w.put(f"slot {slot.name} = {_value_text(slot.value)}")


def _write_responder(w: _Writer, decl: ResponderDecl) -> None:
    def body():
        w.put(f"op {decl.op}")
        if decl.trigger:
            w.put(f'when "{_escape(decl.trigger)}"')
        for name, value in decl.params:
            w.put(f"param {name} = {_value_text(value)}")
    w.block(f"responder {decl.name}", body)


def _write_attractor(w: _Writer, decl: AttractorDecl) -> None:
    def body():
        if decl.watch:
            w.put(f'watch "{_escape(decl.watch)}"')
        w.put(f'when "{_escape(decl.when)}"')
        w.put(f"respond {decl.respond}")
    w.block("attractor", body)


def _write_step(w: _Writer, step: StepDecl) -> None:
    header = f"step {step.ks} {step.action} {step.name}"
    if step.branches is None:
        w.put(header)
        return

    def fork_body():
        for branch in step.branches:
            parts = [f"branch {branch.label}"]
            if branch.when:
                parts.append(f'when "{_escape(branch.when)}"')
            if branch.kind == "continue":
                parts.append("continue")
            elif branch.kind == "step":
                parts.append(f"step {branch.target}")
            else:
                parts.append(f"lot {branch.target}")
            w.put(" ".join(parts))

    def body():
        w.block("fork", fork_body)
    w.block(header, body)


def _write_rule(w: _Writer, decl: RuleDecl) -> None:
    def body():
        w.put(f"set {decl.rule_set}")
        if decl.salience:
            w.put(f"salience {decl.salience}")
        for pat in decl.patterns:
            mode = "absent" if pat.absent else "fact"
            line = f"when {mode} {_term_text(pat.subject, pat.path)}"
            if pat.value is not True:
                line += f" == {_value_text(pat.value)}"
            w.put(line)
        for cond in decl.conditions:
            w.put(f'when condition "{_escape(cond)}"')
        for kind, var, as_var in decl.aggregates:
            word = "minimize" if kind == "min" else "maximize"
            w.put(f"{word} ?{var} as {as_var}")
        for action in decl.actions:
            if action.kind == "respond":
                w.put(f"then respond {action.subject} {action.responder}")
            else:
                line = (f"then {action.kind} "
                        f"{_term_text(action.subject, action.path)}")
                if action.value is not True:
                    line += f" = {_value_text(action.value)}"
                w.put(line)
    w.block(f"rule {decl.name}", body)


# --- loader ----------------------------------------------------------------

BUILTIN_OPS = ("noop", "set_value", "record_tick", "copy_slot", "copy_slots",
               "derive_lookup", "append_to")


def _slots_from_decls(decls: list) -> dict:
    out: dict[str, Any] = {}
    for slot in decls:
        if slot.children is not None:
            out[slot.name] = _slots_from_decls(slot.children)
        else:
            out[slot.name] = slot.value
    return out


def _rule_value(value: Any) -> Any:
    return value


class _Loader:
    def __init__(self, kb: KnowledgeBase, known_ops, known_functions) -> None:
        self.kb = kb
        self.known_ops = set(known_ops)
        self.known_functions = set(known_functions)
        self.ks_decls: dict[str, KsDecl] = {}
        self.lot_decls: dict[str, LotDecl] = {}
        self.seen: dict[str, set] = {}

    def claim(self, kind: str, name: str, namespace: str) -> None:
        bucket = self.seen.setdefault(namespace, set())
        if name in bucket:
            raise DuplicateAppellation(f"{kind} {name!r} declared twice")
        bucket.add(name)

    # -- first pass: definitions ------------------------------------------

    def load(self, doc: KsynthDocument) -> None:
        for decl in doc.declarations:
            if isinstance(decl, CloudDecl):
                self.load_cloud(decl, parent="")
            elif isinstance(decl, KsDecl):
                raise UnresolvedReference(
                    f"ks {decl.name!r} is declared outside any cloud")
            elif isinstance(decl, DrelDecl):
                self.claim("drel", decl.name, "drel")
                self.kb.drels.append(DRel(
                    decl.name, decl.source, decl.target,
                    shared=list(decl.shares), condition=decl.when,
                    priority=decl.priority))
            elif isinstance(decl, LotDecl):
                self.claim("lot", decl.name, "lot")
                self.lot_decls[decl.name] = decl
                self.kb.lots[decl.name] = LineOfThought(
                    decl.name,
                    steps=[self.build_step(s) for s in decl.steps])
            elif isinstance(decl, DimensionDecl):
                self.claim("dimension", decl.name, "dimension")
                self.kb.dimensions[decl.name] = Dimension(
                    decl.name, assumptions=list(decl.assumes),
                    parent_juncture=decl.juncture)
            elif isinstance(decl, JunctureDecl):
                self.claim("juncture", decl.name, "juncture")
                self.kb.junctures[decl.name] = Juncture(
                    decl.name, dimensions=list(decl.dimensions),
                    lots=list(decl.lots))
            elif isinstance(decl, RuleDecl):
                self.claim("rule", decl.name, "rule")
                self.load_rule(decl)
            elif isinstance(decl, ElaborateDecl):
                self.claim("elaborate plan", decl.name, "plan")
                self.kb.plans[decl.name] = ElaborationPlan(
                    decl.name, decl.source, decl.target,
                    pairs=list(decl.pairs))
            elif isinstance(decl, UseDecl):
                raise UnresolvedReference(
                    f"inclusion {decl.path!r} was not spliced; load from a "
                    f"file so includes resolve")
            else:
                raise UnresolvedReference(
                    f"unsupported declaration {type(decl).__name__}")

    def load_cloud(self, decl: CloudDecl, parent: str) -> None:
        self.claim("cloud", decl.name, "appellation")
        self.kb.put_cloud(decl.name, parent=parent,
                          dimension_tags=list(decl.tags))
        for inner in decl.decls:
            if isinstance(inner, CloudDecl):
                self.load_cloud(inner, parent=decl.name)
            else:
                self.load_ks(inner, cloud=decl.name)

    def load_ks(self, decl: KsDecl, cloud: str) -> None:
        self.claim("ks", decl.name, "appellation")
        self.ks_decls[decl.name] = decl
        responders = [ResponderBinding(r.name, r.op, dict(r.params), r.trigger)
                      for r in decl.responders]
        attractors = [AttractorBinding(a.when, a.respond, a.watch)
                      for a in decl.attractors]
        self.kb.put_ks(cloud, KnowledgeSource(
            decl.name, slots=_slots_from_decls(decl.slots),
            responders=responders, attractors=attractors,
            explains=decl.explains))

    def build_step(self, decl: StepDecl) -> Step:
        fork = None
        if decl.branches is not None:
            fork = Fork([Branch(b.label, b.when, b.kind, b.target)
                         for b in decl.branches])
        return Step(decl.ks, decl.action, decl.name, fork=fork)

    def load_rule(self, decl: RuleDecl) -> None:
        if not decl.rule_set:
            raise UnresolvedReference(f"rule {decl.name!r} names no rule set")
        patterns = [Pattern(p.subject, p.path, _rule_value(p.value), p.absent)
                    for p in decl.patterns]
        aggregates = [Aggregate(kind, var, as_var)
                      for kind, var, as_var in decl.aggregates]
        actions = []
        for action in decl.actions:
            if action.kind == "assert":
                actions.append(Assert(action.subject, action.path,
                                      _rule_value(action.value)))
            elif action.kind == "set":
                actions.append(SetSlot(action.subject, action.path,
                                       _rule_value(action.value)))
            else:
                actions.append(Respond(action.subject, action.responder))
        bucket = self.kb.rule_sets.setdefault(decl.rule_set, [])
        bucket.append(Rule(
            decl.name, decl.rule_set, patterns=patterns,
            guards=list(decl.conditions), aggregates=aggregates,
            actions=actions, salience=decl.salience, order=len(bucket)))

    # -- second pass: cross-references ------------------------------------

    def validate(self) -> None:
        kb = self.kb
        for name, decl in self.ks_decls.items():
            ops = {r.name for r in decl.responders} | self.known_ops
            for responder in decl.responders:
                if responder.op not in self.known_ops:
                    raise UnresolvedReference(
                        f"{name}: responder {responder.name!r} uses unknown "
                        f"operation {responder.op!r}")
            for attractor in decl.attractors:
                if attractor.respond not in ops:
                    raise UnresolvedReference(
                        f"{name}: attractor responds with undeclared "
                        f"{attractor.respond!r}")
                if attractor.watch:
                    head = attractor.watch.split("/", 1)[0]
                    if head not in kb.sources:
                        raise UnresolvedReference(
                            f"{name}: attractor watches unknown source "
                            f"{head!r}")
        for drel in kb.drels:
            for end, label in ((drel.source, "source"),
                               (drel.target, "target")):
                if end not in kb.sources:
                    raise UnresolvedReference(
                        f"drel {drel.appellation}: {label} {end!r} is not "
                        f"declared")
        for lot_name, decl in self.lot_decls.items():
            for index, step in enumerate(decl.steps):
                where = f"{lot_name} step {index}"
                if step.ks not in kb.sources:
                    raise UnresolvedReference(
                        f"{where}: unknown source {step.ks!r}")
                if step.action == "respond":
                    bindings = {r.name
                                for r in kb.sources[step.ks].responders}
                    if step.name not in bindings | self.known_ops:
                        raise UnresolvedReference(
                            f"{where}: unknown responder {step.name!r}")
                else:
                    if step.name not in kb.rule_sets:
                        raise UnresolvedReference(
                            f"{where}: unknown rule set {step.name!r}")
                for branch in step.branches or ():
                    if branch.kind == "lot" and branch.target not in self.lot_decls \
                            and branch.target not in kb.lots:
                        raise UnresolvedReference(
                            f"{where}: branch {branch.label!r} jumps to "
                            f"unknown line {branch.target!r}")
                    if branch.kind == "step" and not \
                            0 <= int(branch.target) < len(decl.steps):
                        raise UnresolvedReference(
                            f"{where}: branch {branch.label!r} jumps to "
                            f"step {branch.target} outside the line")
        for dim in kb.dimensions.values():
            if dim.parent_juncture and dim.parent_juncture not in kb.junctures:
                raise UnresolvedReference(
                    f"dimension {dim.appellation}: unknown juncture "
                    f"{dim.parent_juncture!r}")
        for junc in kb.junctures.values():
            for dim in junc.dimensions:
                if dim not in kb.dimensions:
                    raise UnresolvedReference(
                        f"juncture {junc.appellation}: unknown dimension "
                        f"{dim!r}")
            for lot in junc.lots:
                if lot not in kb.lots:
                    raise UnresolvedReference(
                        f"juncture {junc.appellation}: unknown line {lot!r}")
        for plan in kb.plans.values():
            if plan.source_cloud not in kb.clouds:
                raise UnresolvedReference(
                    f"plan {plan.name}: unknown source cloud "
                    f"{plan.source_cloud!r}")
            for ks, fn in plan.pairs:
                if ks not in kb.sources:
                    raise UnresolvedReference(
                        f"plan {plan.name}: unknown source {ks!r}")
                if fn not in self.known_functions:
                    raise UnresolvedReference(
                        f"plan {plan.name}: unknown transformation {fn!r}")
        for rules in kb.rule_sets.values():
            for rule in rules:
                for action in rule.actions:
                    if isinstance(action, (SetSlot, Respond)):
                        target = action.ks
                        if isinstance(target, str) and target not in kb.sources:
                            raise UnresolvedReference(
                                f"rule {rule.name}: action targets unknown "
                                f"source {target!r}")


def load_into_kb(doc: KsynthDocument, kb: Optional[KnowledgeBase] = None,
                 known_ops=BUILTIN_OPS,
                 known_functions=None) -> KnowledgeBase:
    """Build (or extend) a knowledge base from a parsed document."""
    if kb is None:
        kb = KnowledgeBase()
    if known_functions is None:
        known_functions = standard_functions()
    loader = _Loader(kb, known_ops, known_functions)
    loader.load(doc)
    loader.validate()
    return kb


def load_file(path: "str | Path", kb: Optional[KnowledgeBase] = None,
              known_ops=BUILTIN_OPS,
              known_functions=None) -> KnowledgeBase:
    return load_into_kb(parse_file(path), kb=kb, known_ops=known_ops,
                        known_functions=known_functions)
