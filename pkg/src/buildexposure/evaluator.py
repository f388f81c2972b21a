"""Symbolic interpretation of a parsed CMake project.

Every command runs under a path condition (``pc``).  Variables are not kept
as a list of alternatives internally but as a sequence of guarded list
items plus a guard saying where the variable is defined; conditional
``list(APPEND)`` chains then grow linearly instead of doubling the number of
alternatives.  :meth:`FlattenedVariable.alternatives` derives the
partitioned view on demand.

Values that come from the user at configure time (cache strings, ``$ENV{}``)
are carried as sentinel strings and turn into ``Equals``/``Truthy`` atoms
when a condition inspects them.
"""

from __future__ import annotations

import logging
import os
import posixpath
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Union

from . import diagnostics as diag
from .conditions import (
    BOOLEAN,
    ENUMERATED,
    FALSE,
    OPAQUE_DOMAIN,
    ORIGIN_CACHE,
    ORIGIN_ENV,
    ORIGIN_OPTION,
    TRUE,
    Atom,
    Condition,
    ConfigOption,
    ConfigurationAssignment,
    Const,
    Defined,
    Equals,
    Opaque,
    Truthy,
    cmake_truthy,
    conj,
    constant_truth,
    disj,
    disj_all,
    neg,
    satisfiable,
    simplify,
)
from .diagnostics import AnalyzerError, Diagnostic, SourceSpan
from .frontend import (
    BRACKET,
    INCLUDE_DEPTH_CAP,
    QUOTED,
    UNQUOTED,
    Argument,
    AstNode,
    CommandInvocation,
    ForeachBlock,
    FunctionDef,
    IfBlock,
    IfClause,
    MacroDef,
    ParsedProject,
    ScopeBlock,
    WhileBlock,
)

log = logging.getLogger(__name__)

BRANCH_CAP = 64
UNROLL_CAP = 1024
CALL_DEPTH_CAP = 16

# stands in for the project root inside variable values, so that results do
# not depend on where the tree is checked out
VIRTUAL_ROOT = "/__root__"
BINARY_DIR = "${CMAKE_BINARY_DIR}"

_SENTINEL = re.compile("\x00([^\x00]*)\x00")
_ESCAPED_SEMICOLON = "\x01"
_IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def sentinel(name: str) -> str:
    """Placeholder for the configure-time value of *name*."""
    return f"\x00{name}\x00"


def _sentinel_only(text: str) -> str | None:
    m = _SENTINEL.fullmatch(text)
    return m.group(1) if m else None


def render(text: str) -> str:
    """Human form of a value: sentinels become ``${NAME}`` / ``$ENV{X}``."""

    def repl(m: re.Match) -> str:
        name = m.group(1)
        return f"${name}" if name.startswith("ENV{") else f"${{{name}}}"

    return _SENTINEL.sub(repl, text)


class InvariantViolation(AnalyzerError):
    pass


class BranchOverflow(Exception):
    pass


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------


class Item(NamedTuple):
    guard: Condition
    text: str
    quoted: bool = False
    # came out of a ${} expansion (as opposed to literal source text)
    expanded: bool = False


@dataclass(frozen=True)
class FlattenedVariable:
    name: str
    items: tuple[tuple[Condition, str], ...] = ()
    defined: Condition = FALSE

    def alternatives(self, options=None, cap: int = BRANCH_CAP) -> list[tuple[Condition, list[str]]]:
        """Mutually exclusive (guard, values) pairs covering all configurations.

        Where the variable is unset the value list is empty.  Raises
        :class:`BranchOverflow` beyond *cap* alternatives.
        """
        out = []
        for guard, value in _alternatives(self, lambda c: satisfiable(c, options) is not False, cap):
            values = [] if value is None else [v for v in value.split(";") if v]
            out.append((guard, values))
        merged: dict[tuple[str, ...], Condition] = {}
        for guard, values in out:
            key = tuple(values)
            merged[key] = disj(merged[key], guard) if key in merged else guard
        return [(g, list(k)) for k, g in merged.items()]


UNDEFINED = FlattenedVariable("")


def _alternatives(fv: FlattenedVariable, sat, cap: int) -> list[tuple[Condition, str | None]]:
    parts: list[tuple[Condition, tuple[str, ...]]] = []
    if sat(fv.defined):
        parts.append((fv.defined, ()))
    for guard, text in fv.items:
        nxt: dict[tuple[str, ...], Condition] = {}
        for p, vals in parts:
            if guard == TRUE or guard == p:
                cands = [(p, vals + (text,))]
            else:
                cands = [(conj(p, guard), vals + (text,)), (conj(p, neg(guard)), vals)]
            for c, v in cands:
                if c is FALSE or not sat(c):
                    continue
                nxt[v] = disj(nxt[v], c) if v in nxt else c
        parts = list(nxt.items())
        parts = [(c, v) for v, c in parts]
        if len(parts) > cap:
            raise BranchOverflow
    result: list[tuple[Condition, str | None]] = [(c, ";".join(v)) for c, v in parts]
    undefined = neg(fv.defined)
    if sat(undefined):
        result.append((undefined, None))
    return result


class Scope:
    def __init__(self, parent: "Scope | None" = None) -> None:
        self.parent = parent
        self.vars: dict[str, FlattenedVariable] = {}

    def lookup(self, name: str) -> FlattenedVariable | None:
        scope: Scope | None = self
        while scope is not None:
            hit = scope.vars.get(name)
            if hit is not None:
                return hit
            scope = scope.parent
        return None

    def flatten(self) -> dict[str, FlattenedVariable]:
        chain = []
        scope: Scope | None = self
        while scope is not None:
            chain.append(scope)
            scope = scope.parent
        out: dict[str, FlattenedVariable] = {}
        for s in reversed(chain):
            out.update(s.vars)
        return dict(sorted(out.items()))


@dataclass
class SymbolicEnv:
    variables: dict[str, FlattenedVariable] = field(default_factory=dict)
    options: dict[str, ConfigOption] = field(default_factory=dict)
    cache: dict[str, FlattenedVariable] = field(default_factory=dict)
    functions: dict[str, Union[FunctionDef, MacroDef]] = field(default_factory=dict)
    opaque_atoms: dict[str, Opaque] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Trace events
# ---------------------------------------------------------------------------

EXECUTABLE = "executable"
IMPORTED = "imported"
_LIBRARY_KINDS = {"STATIC": "static", "SHARED": "shared", "MODULE": "module",
                  "INTERFACE": "interface", "OBJECT": "object", "UNKNOWN": "unknown"}


def library_kind(sub: str) -> str:
    return f"library({sub})"


@dataclass(frozen=True)
class DeclareDeliverable:
    name: str
    kind: str
    guard: Condition
    span: SourceSpan


@dataclass(frozen=True)
class DeclareAlias:
    name: str
    target: str
    guard: Condition
    span: SourceSpan


@dataclass(frozen=True)
class AttachSources:
    target: str
    source_paths: tuple[tuple[Condition, tuple[str, ...]], ...]
    span: SourceSpan


@dataclass(frozen=True)
class LinkDependency:
    from_target: str
    to_target: str
    guard: Condition
    span: SourceSpan


Event = Union[DeclareDeliverable, DeclareAlias, AttachSources, LinkDependency]


@dataclass
class DeclarationTrace:
    events: list[Event] = field(default_factory=list)

    def of_type(self, kind: type) -> list:
        return [e for e in self.events if isinstance(e, kind)]

    def __len__(self) -> int:
        return len(self.events)


# ---------------------------------------------------------------------------
# Argument templates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Ref:
    kind: str  # "" | "ENV" | "CACHE"
    name: tuple


_REF_OPEN = re.compile(r"\$(ENV|CACHE)?\{")
_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", ";": _ESCAPED_SEMICOLON, "\n": ""}


def _parse_template(raw: str, escapes: bool = True) -> tuple:
    parts: list = []
    buf: list[str] = []
    i, n = 0, len(raw)
    while i < n:
        ch = raw[i]
        if ch == "\\" and escapes and i + 1 < n:
            nxt = raw[i + 1]
            buf.append(_ESCAPES.get(nxt, nxt))
            i += 2
            continue
        if ch == "$":
            m = _REF_OPEN.match(raw, i)
            if m:
                depth, k = 1, m.end()
                while k < n:
                    inner = _REF_OPEN.match(raw, k) if raw[k] == "$" else None
                    if inner:
                        depth += 1
                        k = inner.end()
                        continue
                    if raw[k] == "}":
                        depth -= 1
                        if depth == 0:
                            break
                    k += 1
                if k < n:
                    if buf:
                        parts.append("".join(buf))
                        buf = []
                    parts.append(_Ref(m.group(1) or "", _parse_template(raw[m.end():k], escapes=False)))
                    i = k + 1
                    continue
        buf.append(ch)
        i += 1
    if buf:
        parts.append("".join(buf))
    return tuple(parts)


def _has_ref(parts: tuple) -> bool:
    return any(isinstance(p, _Ref) for p in parts)


def _split(text: str) -> list[str]:
    return [p.replace(_ESCAPED_SEMICOLON, ";") for p in text.split(";") if p]


def _clean(text: str) -> str:
    return text.replace(_ESCAPED_SEMICOLON, ";")


# ---------------------------------------------------------------------------
# if() expressions
# ---------------------------------------------------------------------------

_UNARY = frozenset({"EXISTS", "COMMAND", "DEFINED", "TARGET", "POLICY", "TEST", "IS_DIRECTORY",
                    "IS_SYMLINK", "IS_ABSOLUTE", "IS_READABLE", "IS_WRITABLE", "IS_EXECUTABLE"})
_BINARY = frozenset({
    "EQUAL", "LESS", "LESS_EQUAL", "GREATER", "GREATER_EQUAL",
    "STREQUAL", "STRLESS", "STRLESS_EQUAL", "STRGREATER", "STRGREATER_EQUAL",
    "VERSION_EQUAL", "VERSION_LESS", "VERSION_LESS_EQUAL", "VERSION_GREATER",
    "VERSION_GREATER_EQUAL", "MATCHES", "IN_LIST", "PATH_EQUAL", "IS_NEWER_THAN",
})
_NUMERIC_OPS = {
    "EQUAL": lambda a, b: a == b, "LESS": lambda a, b: a < b, "LESS_EQUAL": lambda a, b: a <= b,
    "GREATER": lambda a, b: a > b, "GREATER_EQUAL": lambda a, b: a >= b,
}
_STRING_OPS = {
    "STREQUAL": lambda a, b: a == b, "STRLESS": lambda a, b: a < b,
    "STRLESS_EQUAL": lambda a, b: a <= b, "STRGREATER": lambda a, b: a > b,
    "STRGREATER_EQUAL": lambda a, b: a >= b,
}
_NUMBER = re.compile(r"\s*[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\s*")


class _MalformedCondition(Exception):
    pass


class _IfParser:
    """Recursive descent over one branch's expanded if() arguments."""

    def __init__(self, ev: "Evaluator", toks: list[Item], span: SourceSpan) -> None:
        self.ev = ev
        self.toks = toks
        self.pos = 0
        self.span = span

    def keyword(self, offset: int = 0) -> str | None:
        i = self.pos + offset
        if i < len(self.toks) and not self.toks[i].quoted:
            return self.toks[i].text
        return None

    def take(self) -> Item:
        if self.pos >= len(self.toks):
            raise _MalformedCondition
        self.pos += 1
        return self.toks[self.pos - 1]

    def parse(self) -> Condition:
        if not self.toks:
            return FALSE
        c = self.parse_or()
        if self.pos != len(self.toks):
            raise _MalformedCondition
        return c

    def parse_or(self) -> Condition:
        c = self.parse_and()
        while self.keyword() == "OR":
            self.pos += 1
            c = disj(c, self.parse_and())
        return c

    def parse_and(self) -> Condition:
        c = self.parse_not()
        while self.keyword() == "AND":
            self.pos += 1
            c = conj(c, self.parse_not())
        return c

    def parse_not(self) -> Condition:
        if self.keyword() == "NOT":
            self.pos += 1
            return neg(self.parse_not())
        return self.parse_predicate()

    def parse_predicate(self) -> Condition:
        kw = self.keyword()
        if kw == "(":
            self.pos += 1
            c = self.parse_or()
            if self.keyword() != ")":
                raise _MalformedCondition
            self.pos += 1
            return c
        if kw in _UNARY:
            self.pos += 1
            return self.ev._unary(kw, self.take(), self.span)
        left = self.take()
        op = self.keyword()
        if op in _BINARY:
            self.pos += 1
            return self.ev._binary(left, op, self.take(), self.span)
        return self.ev._bare(left, self.span)


# ---------------------------------------------------------------------------
# Evaluator
# ---------------------------------------------------------------------------


class _StopFile(Exception):
    pass


def _kw(items: list[Item], i: int) -> str | None:
    return items[i].text if i < len(items) else None


class Evaluator:
    def __init__(self, project: ParsedProject, overrides: ConfigurationAssignment | None = None, *,
                 branch_cap: int = BRANCH_CAP, unroll_cap: int = UNROLL_CAP,
                 call_depth_cap: int = CALL_DEPTH_CAP, include_depth_cap: int = INCLUDE_DEPTH_CAP,
                 check_invariants: bool = False) -> None:
        self.project = project
        self.overrides = overrides or ConfigurationAssignment()
        self.total = self.overrides.total
        self.branch_cap = branch_cap
        self.unroll_cap = unroll_cap
        self.call_depth_cap = call_depth_cap
        self.include_depth_cap = include_depth_cap
        self.check_invariants = check_invariants

        self.env = SymbolicEnv()
        self.trace = DeclarationTrace()
        self.warnings: list[Diagnostic] = []
        self._seen_warnings: set[tuple] = set()
        self._sat_cache: dict[Condition, bool] = {}
        self._tidy_cache: dict[Condition, Condition] = {}
        self._templates: dict[str, tuple] = {}
        self.root_scope = Scope()
        self.scope = self.root_scope
        self.cur_dir = VIRTUAL_ROOT
        self.cur_file = "CMakeLists.txt"
        self.file_stack: list[str] = []
        self.call_depth = 0
        self.returned: Condition = FALSE
        self.targets: dict[str, Condition] = {}
        self.included_once: set[str] = set()
        self._option_defaults: dict[str, list[tuple[Condition, str | None]]] = {}

    # -- bookkeeping --------------------------------------------------------

    def warn(self, code: str, message: str, span: SourceSpan | None, subject: str = "") -> None:
        key = (code, span, subject, message)
        if key in self._seen_warnings:
            return
        self._seen_warnings.add(key)
        self.warnings.append(Diagnostic(code, message, span, subject))

    def sat(self, c: Condition) -> bool:
        if isinstance(c, Const):
            return c.value
        hit = self._sat_cache.get(c)
        if hit is None:
            hit = satisfiable(c, self.env.options) is not False
            self._sat_cache[c] = hit
        return hit

    def tidy(self, c: Condition) -> Condition:
        if isinstance(c, (Const, Atom)) or len(c.key) < 32:
            return c
        hit = self._tidy_cache.get(c)
        if hit is None:
            hit = c
            if len(c.atoms) <= 10:
                s = simplify(c, self.env.options, clause_cap=32)
                if len(s.key) < len(c.key):
                    hit = s
            self._tidy_cache[c] = hit
        return hit

    def _options_changed(self) -> None:
        self._sat_cache.clear()
        self._tidy_cache.clear()

    def register_option(self, opt: ConfigOption) -> None:
        old = self.env.options.get(opt.name)
        if old == opt:
            return
        self.env.options[opt.name] = opt
        if old is None or old.domain != opt.domain or old.values != opt.values:
            self._options_changed()

    def span_file(self) -> str:
        return self.cur_file

    # -- paths ---------------------------------------------------------------

    def fs_path(self, virtual: str) -> Path | None:
        if virtual == VIRTUAL_ROOT:
            return self.project.root
        if virtual.startswith(VIRTUAL_ROOT + "/"):
            return self.project.root / virtual[len(VIRTUAL_ROOT) + 1:]
        if "\x00" in virtual or "$" in virtual:
            return None
        p = Path(virtual)
        return p if p.is_absolute() else None

    def absolute(self, text: str) -> str:
        text = posixpath.normpath(text) if text else "."
        if text.startswith("/"):
            return text
        return posixpath.normpath(posixpath.join(self.cur_dir, text))

    def source_path(self, text: str, span: SourceSpan) -> str:
        """Project-relative, normalized id for a source file reference."""
        text = render(_clean(text))
        if "$<" in text:
            self.warn(diag.GENERATOR_EXPRESSION, f"generator expression kept verbatim: {text}",
                      span, subject=text)
            return text
        if text.startswith("$"):
            return posixpath.normpath(text)
        full = self.absolute(text)
        if full == VIRTUAL_ROOT:
            return "."
        if full.startswith(VIRTUAL_ROOT + "/"):
            return full[len(VIRTUAL_ROOT) + 1:]
        root = self.project.root.as_posix()
        if full.startswith(root.rstrip("/") + "/"):
            return full[len(root.rstrip("/")) + 1:]
        return full

    # -- variables -----------------------------------------------------------

    def combined(self, name: str) -> FlattenedVariable:
        """Normal binding, falling back to the cache where it is unset."""
        normal = self.scope.lookup(name) or UNDEFINED
        cached = self.env.cache.get(name)
        if cached is None:
            return normal
        if normal.defined == TRUE:
            return normal
        gap = neg(normal.defined)
        items = list(normal.items)
        for g, s in cached.items:
            c = self.tidy(conj(g, gap))
            if self.sat(c):
                items.append((c, s))
        defined = self.tidy(disj(normal.defined, cached.defined))
        return FlattenedVariable(name, tuple(items), defined)

    def assign(self, scope: Scope, name: str, new_items: Iterable[tuple[Condition, str]],
               guard: Condition) -> None:
        """``set(name ...)`` under *guard*; new item guards must imply it."""
        old = scope.lookup(name) or UNDEFINED
        items: list[tuple[Condition, str]] = []
        if guard != TRUE:
            keep = neg(guard)
            for g, s in old.items:
                c = self.tidy(conj(g, keep))
                if self.sat(c):
                    items.append((c, s))
        items.extend(new_items)
        defined = TRUE if guard == TRUE else self.tidy(disj(conj(old.defined, neg(guard)), guard))
        scope.vars[name] = FlattenedVariable(name, tuple(items), defined)

    def unset(self, scope: Scope, name: str, guard: Condition) -> None:
        old = scope.lookup(name)
        if old is None:
            return
        keep = neg(guard)
        items = []
        for g, s in old.items:
            c = self.tidy(conj(g, keep))
            if self.sat(c):
                items.append((c, s))
        scope.vars[name] = FlattenedVariable(name, tuple(items), self.tidy(conj(old.defined, keep)))

    def set_builtin(self, scope: Scope, name: str, value: str) -> None:
        scope.vars[name] = FlattenedVariable(name, ((TRUE, value),) if value else (), TRUE)

    def value_alternatives(self, name: str, implicit: bool = False) -> list[tuple[Condition, str | None]]:
        """(guard, joined value) pairs; None marks where the variable is unset.

        With *implicit*, an unset variable in symbolic mode stands for a
        value the user may pass at configure time.
        """
        alts = _alternatives(self.combined(name), self.sat, self.branch_cap)
        if implicit and not self.total and alts and alts[-1][1] is None:
            guard, _ = alts.pop()
            self.register_option(ConfigOption(name, OPAQUE_DOMAIN, origin=ORIGIN_CACHE))
            alts.append((guard, sentinel(name)))
        return alts

    def env_value(self, name: str) -> list[tuple[Condition, str]]:
        key = f"ENV{{{name}}}"
        if key in self.overrides.values:
            return [(TRUE, self.overrides.values[key])]
        if self.total:
            return [(TRUE, "")]
        self.register_option(ConfigOption(key, OPAQUE_DOMAIN, origin=ORIGIN_ENV))
        return [(TRUE, sentinel(key))]

    # -- expansion -----------------------------------------------------------

    def template(self, arg: Argument) -> tuple:
        if arg.kind == BRACKET:
            return (arg.raw_text,)
        key = arg.kind[0] + arg.raw_text
        hit = self._templates.get(key)
        if hit is None:
            hit = _parse_template(arg.raw_text)
            self._templates[key] = hit
        return hit

    def _expand_parts(self, parts: tuple, pc: Condition, span: SourceSpan) -> list[tuple[Condition, str]]:
        branches: list[tuple[Condition, str]] = [(pc, "")]
        for part in parts:
            if isinstance(part, str):
                branches = [(g, s + part) for g, s in branches]
                continue
            merged: dict[str, Condition] = {}
            for gn, name in self._expand_parts(part.name, TRUE, span):
                for ga, val in self._ref_values(part.kind, _clean(name), span):
                    for g, s in branches:
                        c = conj(g, gn, ga)
                        if c is FALSE or not self.sat(c):
                            continue
                        text = s + val
                        merged[text] = disj(merged[text], c) if text in merged else c
            branches = [(self.tidy(c), s) for s, c in merged.items()]
            if len(branches) > self.branch_cap:
                raise BranchOverflow
        return branches

    def _ref_values(self, kind: str, name: str, span: SourceSpan) -> list[tuple[Condition, str]]:
        if kind == "ENV":
            return self.env_value(name)
        if kind == "CACHE":
            cached = self.env.cache.get(name, UNDEFINED)
            return [(g, v or "") for g, v in _alternatives(cached, self.sat, self.branch_cap)]
        fv = self.combined(name)
        if fv.defined == FALSE:
            self.warn(diag.UNDEFINED_VARIABLE, f"variable {name} is never set; expands to empty",
                      span, subject=name)
        return [(g, v or "") for g, v in _alternatives(fv, self.sat, self.branch_cap)]

    def arg_items(self, arg: Argument, pc: Condition) -> list[Item]:
        """Guarded list items one argument contributes to a command line."""
        parts = self.template(arg)
        expanded = _has_ref(parts)
        if arg.kind == BRACKET:
            return [Item(pc, arg.raw_text, True, False)]
        if (arg.kind == UNQUOTED and len(parts) == 1 and isinstance(parts[0], _Ref)
                and parts[0].kind == "" and all(isinstance(p, str) for p in parts[0].name)):
            name = "".join(parts[0].name)
            fv = self.combined(name)
            if fv.defined == FALSE:
                self.warn(diag.UNDEFINED_VARIABLE, f"variable {name} is never set; expands to empty",
                          arg.span, subject=name)
            out = []
            for g, s in fv.items:
                c = g if pc == TRUE else self.tidy(conj(pc, g))
                if c is FALSE or not self.sat(c):
                    continue
                out.extend(Item(c, piece, False, True) for piece in _split(s))
            return out
        try:
            branches = self._expand_parts(parts, pc, arg.span)
        except BranchOverflow:
            self.warn(diag.BRANCH_OVERFLOW,
                      f"more than {self.branch_cap} expansions of {arg.raw_text!r}; kept verbatim",
                      arg.span, subject=arg.raw_text)
            branches = [(pc, arg.raw_text)]
        out = []
        for g, s in branches:
            if arg.kind == QUOTED:
                out.append(Item(g, _clean(s), True, expanded))
            else:
                out.extend(Item(g, piece, False, expanded) for piece in _split(s))
        return out

    def items(self, args: Iterable[Argument], pc: Condition) -> list[Item]:
        out: list[Item] = []
        for arg in args:
            out.extend(self.arg_items(arg, pc))
        return out

    def expand(self, arg: Argument, pc: Condition = TRUE) -> list[tuple[Condition, list[str]]]:
        """All (guard, strings) branches of one argument."""
        return [(g, [it.text for it in head]) for g, head, _ in self.partition(self.arg_items(arg, pc), pc)]

    def partition(self, items: list[Item], pc: Condition,
                  head: int | None = None) -> list[tuple[Condition, list[Item], list[Item]]]:
        """Split configurations until each part knows its first *head* items.

        Returns (guard, head items, remaining items) triples; remaining items
        keep their own guards, conjoined with the part's guard.
        """
        parts: list[tuple[Condition, list[Item], list[Item]]] = [(pc, [], [])]
        for it in items:
            nxt = []
            for g, h, r in parts:
                if head is not None and len(h) >= head:
                    c = g if it.guard == g or it.guard == TRUE else self.tidy(conj(g, it.guard))
                    if c is not FALSE and self.sat(c):
                        r.append(it._replace(guard=c))
                    nxt.append((g, h, r))
                    continue
                if it.guard == g or it.guard == TRUE:
                    nxt.append((g, h + [it._replace(guard=g)], r))
                    continue
                a = self.tidy(conj(g, it.guard))
                b = self.tidy(conj(g, neg(it.guard)))
                if a is not FALSE and self.sat(a):
                    nxt.append((a, h + [it._replace(guard=a)], list(r)))
                if b is not FALSE and self.sat(b):
                    nxt.append((b, list(h), list(r)))
            parts = nxt
            if len(parts) > self.branch_cap:
                raise BranchOverflow
        return parts

    def _branches(self, cmd: CommandInvocation, pc: Condition, head: int | None):
        try:
            return self.partition(self.items(cmd.args, pc), pc, head)
        except BranchOverflow:
            self.warn(diag.BRANCH_OVERFLOW,
                      f"{cmd.name}() arguments split into more than {self.branch_cap} cases; skipped",
                      cmd.span, subject=cmd.name)
            return []

    # -- driver --------------------------------------------------------------

    def run(self) -> tuple[SymbolicEnv, DeclarationTrace, list[Diagnostic]]:
        for name in sorted(self.overrides.values):
            value = self.overrides.values[name]
            if name.startswith("ENV{"):
                continue
            self.env.cache[name] = FlattenedVariable(name, ((TRUE, value),) if value else (), TRUE)
        root = self.root_scope
        for var in ("CMAKE_SOURCE_DIR", "CMAKE_CURRENT_SOURCE_DIR", "CMAKE_CURRENT_LIST_DIR",
                    "PROJECT_SOURCE_DIR"):
            self.set_builtin(root, var, VIRTUAL_ROOT)
        self.set_builtin(root, "CMAKE_CURRENT_LIST_FILE", VIRTUAL_ROOT + "/CMakeLists.txt")
        for var in ("CMAKE_BINARY_DIR", "CMAKE_CURRENT_BINARY_DIR", "PROJECT_BINARY_DIR"):
            self.set_builtin(root, var, BINARY_DIR)
        self.set_builtin(root, "CMAKE_COMMAND", "cmake")
        self.set_builtin(root, "CMAKE_MODULE_PATH", "")
        nodes = self.project.files.get("CMakeLists.txt")
        if nodes is None:
            nodes = self.project.get(self.project.root / "CMakeLists.txt") or ()
        self.file_stack.append("CMakeLists.txt")
        try:
            self.run_nodes(nodes, TRUE, top=True)
        except _StopFile:
            pass
        self.file_stack.pop()
        self._finish_options()
        for name in sorted(self.overrides.values):
            if name not in self.env.options:
                origin = ORIGIN_ENV if name.startswith("ENV{") else ORIGIN_CACHE
                self.warn(diag.UNKNOWN_OPTION, f"-D {name} does not match any option in the project",
                          None, subject=name)
                self.register_option(ConfigOption(name, OPAQUE_DOMAIN, origin=origin))
        self.env.variables = self.root_scope.flatten()
        self.env.options = dict(sorted(self.env.options.items()))
        self.env.cache = dict(sorted(self.env.cache.items()))
        warnings = [w for w in self.project.warnings if w.code != diag.UNRESOLVED_INCLUDE]
        return self.env, self.trace, warnings + self.warnings

    def run_nodes(self, nodes: Iterable[AstNode], pc: Condition, top: bool = False) -> None:
        for node in nodes:
            guard = pc
            if self.returned is not FALSE:
                guard = self.tidy(conj(pc, neg(self.returned)))
                if not self.sat(guard):
                    return
            self.run_node(node, guard)
            if top and self.check_invariants:
                self.verify_partitions()

    def run_node(self, node: AstNode, pc: Condition) -> None:
        if isinstance(node, CommandInvocation):
            self.run_command(node, pc)
        elif isinstance(node, IfBlock):
            self.interpret_if(node, pc)
        elif isinstance(node, ForeachBlock):
            self.interpret_foreach(node, pc)
        elif isinstance(node, (FunctionDef, MacroDef)):
            self.env.functions[node.name] = node
        elif isinstance(node, ScopeBlock):
            outer = self.scope
            self.scope = Scope(outer)
            try:
                self.run_nodes(node.body, pc)
            finally:
                self.scope = outer
        elif isinstance(node, WhileBlock):
            self.warn(diag.UNSUPPORTED_COMMAND, "while() loops are not interpreted; body skipped",
                      node.span, subject="while")

    def verify_partitions(self) -> None:
        for name, fv in self.scope.flatten().items():
            try:
                alts = _alternatives(fv, self.sat, 256)
            except BranchOverflow:
                continue
            guards = [g for g, _ in alts]
            if satisfiable(neg(disj_all(guards)), self.env.options) is True:
                raise InvariantViolation(f"alternatives of {name} do not cover all configurations")
            for i, a in enumerate(guards):
                for b in guards[i + 1:]:
                    if satisfiable(conj(a, b), self.env.options) is True:
                        raise InvariantViolation(f"alternatives of {name} overlap")

    # -- control flow --------------------------------------------------------

    def condition(self, args: tuple[Argument, ...], span: SourceSpan) -> Condition:
        """Predicate of one if()/elseif() argument list."""
        try:
            branches = self.partition(self.items(args, TRUE), TRUE)
        except BranchOverflow:
            return self._opaque(" ".join(a.raw_text for a in args), span)
        parts = []
        for g, toks, _ in branches:
            try:
                c = _IfParser(self, toks, span).parse()
            except (_MalformedCondition, BranchOverflow):
                c = self._opaque(" ".join(render(t.text) for t in toks), span)
            parts.append(conj(g, c))
        return self.tidy(disj_all(parts))

    def interpret_if(self, block: IfBlock, pc: Condition) -> None:
        rest = pc
        for clause in block.clauses:
            c = self.condition(clause.args, clause.span)
            guard = self.tidy(conj(rest, c))
            if guard is not FALSE and self.sat(guard):
                self.run_nodes(clause.body, guard)
            rest = self.tidy(conj(rest, neg(c)))
            if rest is FALSE or not self.sat(rest):
                return
        if block.else_body:
            self.run_nodes(block.else_body, rest)

    def interpret_foreach(self, block: ForeachBlock, pc: Condition) -> None:
        span = block.span
        try:
            parts = self.partition(self.items(block.header_args, pc), pc, head=1)
        except BranchOverflow:
            self.warn(diag.BRANCH_OVERFLOW, "foreach() header has too many cases; skipped",
                      span, subject="foreach")
            return
        for g, head, rest in parts:
            if not head:
                continue
            var = head[0].text
            loop = self._loop_items(g, rest, span)
            if loop is None:
                continue
            if len(loop) > self.unroll_cap:
                self.warn(diag.UNROLL_CAP_EXCEEDED,
                          f"foreach over {len(loop)} items exceeds the cap of {self.unroll_cap}; skipped",
                          span, subject=var)
                continue
            saved = self.scope.vars.get(var)
            for it in loop:
                if not self.sat(it.guard):
                    continue
                self.assign(self.scope, var, [(it.guard, it.text)], it.guard)
                self.run_nodes(block.body, it.guard)
            if saved is None:
                self.scope.vars.pop(var, None)
            else:
                self.scope.vars[var] = saved

    def _loop_items(self, g: Condition, rest: list[Item], span: SourceSpan) -> list[Item] | None:
        first = _kw(rest, 0)
        if first == "RANGE":
            out = []
            try:
                cases = self.partition(rest[1:], g)
            except BranchOverflow:
                return None
            for cg, vals, _ in cases:
                try:
                    nums = [int(v.text) for v in vals]
                except ValueError:
                    self.warn(diag.UNSUPPORTED_COMMAND, "non-numeric foreach(RANGE)", span,
                              subject="foreach(RANGE)")
                    return None
                if len(nums) == 1:
                    seq = range(0, nums[0] + 1)
                elif len(nums) in (2, 3):
                    step = nums[2] if len(nums) == 3 else 1
                    if step <= 0:
                        return None
                    seq = range(nums[0], nums[1] + 1, step)
                else:
                    return None
                if len(seq) > self.unroll_cap:
                    return [Item(cg, "")] * len(seq)
                out.extend(Item(cg, str(i)) for i in seq)
            return out
        if first != "IN":
            return rest
        out, mode = [], None
        for it in rest[1:]:
            if not it.quoted and it.text in ("LISTS", "ITEMS", "ZIP_LISTS"):
                mode = it.text
                if mode == "ZIP_LISTS":
                    self.warn(diag.UNSUPPORTED_COMMAND, "foreach(ZIP_LISTS) is not interpreted",
                              span, subject="foreach(ZIP_LISTS)")
                    return None
                continue
            if mode == "LISTS":
                for vg, s in self.combined(it.text).items:
                    c = self.tidy(conj(it.guard, vg))
                    if self.sat(c):
                        out.extend(Item(c, piece) for piece in _split(s))
            elif mode == "ITEMS":
                out.append(it)
            else:
                return None
        return out

    # -- conditions ----------------------------------------------------------

    def _opaque(self, text: str, span: SourceSpan) -> Opaque:
        atom = Opaque.from_text(text, span)
        known = self.env.opaque_atoms.get(atom.stable_id)
        if known is not None:
            return known
        self.env.opaque_atoms[atom.stable_id] = atom
        self.warn(diag.OPAQUE_CONDITION, f"condition {text!r} is not decided statically",
                  span, subject=text)
        return atom

    def _truth_of_value(self, value: str | None, span: SourceSpan) -> Condition:
        if value is None:
            return FALSE
        name = _sentinel_only(value)
        if name is not None:
            return Truthy(name)
        if "\x00" in value:
            return self._opaque(f"if({render(value)})", span)
        return TRUE if cmake_truthy(value) else FALSE

    def _bare(self, tok: Item, span: SourceSpan) -> Condition:
        text = tok.text
        name = _sentinel_only(text)
        if name is not None:
            return Truthy(name)
        if "\x00" in text:
            return self._opaque(f"if({render(text)})", span)
        known = constant_truth(text)
        if known is not None:
            return TRUE if known else FALSE
        if tok.quoted:
            return FALSE
        implicit = bool(_IDENTIFIER.fullmatch(text))
        alts = self.value_alternatives(text, implicit=implicit)
        return disj_all(conj(g, self._truth_of_value(v, span)) for g, v in alts)

    def _operand(self, tok: Item, implicit: bool) -> list[tuple[Condition, str]]:
        if tok.quoted or "\x00" in tok.text:
            return [(TRUE, tok.text)]
        implicit = implicit and not tok.expanded and bool(_IDENTIFIER.fullmatch(tok.text))
        return [(g, tok.text if v is None else v)
                for g, v in self.value_alternatives(tok.text, implicit=implicit)]

    def _unary(self, op: str, tok: Item, span: SourceSpan) -> Condition:
        name = tok.text
        if op == "DEFINED":
            if name.startswith("ENV{") and name.endswith("}"):
                if name in self.overrides.values:
                    return TRUE
                if self.total:
                    return FALSE
                self.register_option(ConfigOption(name, OPAQUE_DOMAIN, origin=ORIGIN_ENV))
                return Defined(name)
            if name.startswith("CACHE{") and name.endswith("}"):
                return self.env.cache.get(name[6:-1], UNDEFINED).defined
            fv = self.combined(name)
            if self.total or fv.defined == TRUE or not _IDENTIFIER.fullmatch(name):
                return fv.defined
            self.register_option(ConfigOption(name, OPAQUE_DOMAIN, origin=ORIGIN_CACHE))
            return self.tidy(disj(fv.defined, conj(neg(fv.defined), Defined(name))))
        if op == "TARGET" and name in self.targets:
            return self.targets[name]
        return self._opaque(f"{op} {render(name)}", span)

    def _binary(self, left: Item, op: str, right: Item, span: SourceSpan) -> Condition:
        if op in ("STREQUAL", "EQUAL", "LESS", "LESS_EQUAL", "GREATER", "GREATER_EQUAL",
                  "STRLESS", "STRLESS_EQUAL", "STRGREATER", "STRGREATER_EQUAL"):
            lhs = self._operand(left, implicit=True)
            rhs = self._operand(right, implicit=False)
            parts = []
            for gl, vl in lhs:
                for gr, vr in rhs:
                    g = conj(gl, gr)
                    if g is FALSE:
                        continue
                    parts.append(conj(g, self._compare(vl, op, vr, span)))
            return disj_all(parts)
        if op == "IN_LIST":
            lhs = self._operand(left, implicit=False)
            parts = []
            for gr, vr in self.value_alternatives(right.text):
                members = _split(vr or "")
                for gl, vl in lhs:
                    g = conj(gl, gr)
                    if "\x00" in vl or any("\x00" in m for m in members):
                        parts.append(conj(g, self._opaque(
                            f"{render(vl)} IN_LIST {render(';'.join(members))}", span)))
                    elif vl in members:
                        parts.append(g)
            return disj_all(parts)
        return self._opaque(f"{render(left.text)} {op} {render(right.text)}", span)

    def _compare(self, a: str, op: str, b: str, span: SourceSpan) -> Condition:
        if "\x00" in a or "\x00" in b:
            if op == "STREQUAL":
                na, nb = _sentinel_only(a), _sentinel_only(b)
                if na is not None and "\x00" not in b:
                    return Equals(na, b)
                if nb is not None and "\x00" not in a:
                    return Equals(nb, a)
            return self._opaque(f"{render(a)} {op} {render(b)}", span)
        if op in _STRING_OPS:
            return TRUE if _STRING_OPS[op](a, b) else FALSE
        if not (_NUMBER.fullmatch(a) and _NUMBER.fullmatch(b)):
            return FALSE
        return TRUE if _NUMERIC_OPS[op](float(a), float(b)) else FALSE

    # -- commands ------------------------------------------------------------

    _NO_OPS = frozenset({"cmake_minimum_required", "message", "cmake_policy", "mark_as_advanced"})

    def run_command(self, cmd: CommandInvocation, pc: Condition) -> None:
        name = cmd.name
        if name in self._NO_OPS:
            return
        handler = getattr(self, f"_cmd_{name}", None)
        if handler is not None:
            handler(cmd, pc)
            return
        fn = self.env.functions.get(name)
        if fn is not None:
            self.call(fn, cmd, pc)
            return
        self.warn(diag.UNSUPPORTED_COMMAND, f"{name}() is not interpreted; skipped",
                  cmd.span, subject=name)

    def _cmd_return(self, cmd: CommandInvocation, pc: Condition) -> None:
        self.returned = self.tidy(disj(self.returned, pc))

    def _cmd_include_guard(self, cmd: CommandInvocation, pc: Condition) -> None:
        if self.cur_file in self.included_once:
            raise _StopFile
        self.included_once.add(self.cur_file)

    def _cmd_set(self, cmd: CommandInvocation, pc: Condition) -> None:
        for g, head, rest in self._branches(cmd, pc, head=1):
            if not head:
                continue
            name = head[0].text
            cache_at = next((i for i, it in enumerate(rest) if it.text == "CACHE" and not it.quoted), None)
            if cache_at is not None:
                self._set_cache(cmd, g, name, rest, cache_at)
            elif rest and rest[-1].text == "PARENT_SCOPE" and not rest[-1].quoted:
                target = self.scope.parent
                if target is None:
                    continue
                values = rest[:-1]
                if values:
                    self.assign(target, name, [(it.guard, it.text) for it in values], g)
                else:
                    self.unset(target, name, g)
            elif rest:
                self.assign(self.scope, name, [(it.guard, it.text) for it in rest], g)
            else:
                self.unset(self.scope, name, g)

    def _set_cache(self, cmd: CommandInvocation, pc: Condition, name: str,
                   rest: list[Item], cache_at: int) -> None:
        try:
            cases = self.partition(rest, pc)
        except BranchOverflow:
            self.warn(diag.BRANCH_OVERFLOW, f"set({name} ... CACHE) has too many cases; skipped",
                      cmd.span, subject="set")
            return
        for g, toks, _ in cases:
            texts = [t.text for t in toks]
            at = texts.index("CACHE")
            value = ";".join(texts[:at])
            kind = texts[at + 1].upper() if at + 1 < len(texts) else "STRING"
            force = "FORCE" in texts[at + 2:]
            if kind == "INTERNAL":
                force = True
            self.define_cache(name, g, value, kind, force)

    def define_cache(self, name: str, guard: Condition, value: str, kind: str, force: bool) -> None:
        old = self.env.cache.get(name, UNDEFINED)
        if force:
            region = guard
        else:
            region = self.tidy(conj(guard, neg(old.defined)))
            if region is FALSE or not self.sat(region):
                if kind == "BOOL" and name not in self.env.options:
                    self.register_option(ConfigOption(name, BOOLEAN, default=value or None))
                return
        if kind == "BOOL":
            self._option_defaults.setdefault(name, []).append((region, value))
            default = "ON" if cmake_truthy(value) else "OFF"
            self.register_option(ConfigOption(name, BOOLEAN, default=default, origin=ORIGIN_OPTION))
            items = self._user_value_items(name, region, value, boolean=True, force=force)
        elif kind == "INTERNAL":
            items = [(region, value)] if value else []
        else:
            opt = self.env.options.get(name)
            if opt is None or opt.domain == OPAQUE_DOMAIN:
                default = None if "\x00" in value else value
                self.register_option(ConfigOption(name, OPAQUE_DOMAIN, default=default, origin=ORIGIN_CACHE))
            items = self._user_value_items(name, region, value, boolean=False, force=force)
        self._write_cache(name, region, items)

    def _user_value_items(self, name: str, region: Condition, default: str, *,
                          boolean: bool, force: bool) -> list[tuple[Condition, str]]:
        if force or name in self.overrides.values or self.total:
            value = self.overrides.values.get(name, default) if not force else default
            if boolean and not force and name not in self.overrides.values:
                value = "ON" if cmake_truthy(default) else "OFF"
            return [(region, v) for v in _split(value)]
        if boolean:
            out = []
            for c, v in ((conj(region, Truthy(name)), "ON"), (conj(region, neg(Truthy(name))), "OFF")):
                c = self.tidy(c)
                if self.sat(c):
                    out.append((c, v))
            return out
        return [(region, sentinel(name))]

    def _write_cache(self, name: str, region: Condition, items: list[tuple[Condition, str]]) -> None:
        old = self.env.cache.get(name, UNDEFINED)
        keep = neg(region)
        kept = []
        for g, s in old.items:
            c = self.tidy(conj(g, keep))
            if self.sat(c):
                kept.append((c, s))
        defined = self.tidy(disj(old.defined, region))
        self.env.cache[name] = FlattenedVariable(name, tuple(kept + items), defined)

    def _cmd_option(self, cmd: CommandInvocation, pc: Condition) -> None:
        for g, args, _ in self._branches(cmd, pc, head=None):
            if not args:
                continue
            name = args[0].text
            default = args[2].text if len(args) >= 3 else "OFF"
            self.define_cache(name, g, default, "BOOL", force=False)

    def _finish_options(self) -> None:
        """Give options whose default depends on configuration a default guard."""
        for name, cases in sorted(self._option_defaults.items()):
            opt = self.env.options.get(name)
            if opt is None or opt.domain != BOOLEAN:
                continue
            covered = disj_all(g for g, _ in cases)
            truths = {cmake_truthy(v) for _, v in cases}
            if len(truths) == 1 and covered == TRUE:
                continue
            on = disj_all(g for g, v in cases if cmake_truthy(v))
            if on.option_names & {name}:
                continue
            self.env.options[name] = ConfigOption(
                name, BOOLEAN, default=None, origin=opt.origin, default_guard=self.tidy(on))

    def _cmd_set_property(self, cmd: CommandInvocation, pc: Condition) -> None:
        for g, toks, _ in self._branches(cmd, pc, head=None):
            texts = [t.text for t in toks]
            if len(texts) >= 4 and texts[0] == "CACHE" and "PROPERTY" in texts:
                at = texts.index("PROPERTY")
                if texts[at + 1:at + 2] == ["STRINGS"]:
                    for var in texts[1:at]:
                        self._enumerate(var, texts[at + 2:])
                    continue
            self.warn(diag.UNSUPPORTED_COMMAND, "set_property() is only interpreted for CACHE STRINGS",
                      cmd.span, subject="set_property")

    def _enumerate(self, name: str, values: list[str]) -> None:
        opt = self.env.options.get(name)
        if opt is None or opt.domain == BOOLEAN or not values:
            return
        domain = list(dict.fromkeys(v for v in values if "\x00" not in v))
        if opt.default is not None and opt.default not in domain:
            domain.append(opt.default)
        if not domain:
            return
        self.register_option(ConfigOption(name, ENUMERATED, tuple(domain), opt.default, opt.origin))
        cached = self.env.cache.get(name)
        if cached is None:
            return
        mark = sentinel(name)
        items = []
        for g, s in cached.items:
            if s != mark:
                items.append((g, s))
                continue
            for v in domain:
                c = self.tidy(conj(g, Equals(name, v)))
                if self.sat(c):
                    items.append((c, v))
        self.env.cache[name] = FlattenedVariable(name, tuple(items), cached.defined)

    def _cmd_unset(self, cmd: CommandInvocation, pc: Condition) -> None:
        for g, head, rest in self._branches(cmd, pc, head=1):
            if not head:
                continue
            flags = {t.text for t in rest}
            name = head[0].text
            if "CACHE" in flags:
                old = self.env.cache.get(name)
                if old is not None:
                    self._write_cache(name, g, [])
                    fv = self.env.cache[name]
                    self.env.cache[name] = FlattenedVariable(name, fv.items, self.tidy(conj(fv.defined, neg(g))))
            elif "PARENT_SCOPE" in flags:
                if self.scope.parent is not None:
                    self.unset(self.scope.parent, name, g)
            else:
                self.unset(self.scope, name, g)

    def _cmd_list(self, cmd: CommandInvocation, pc: Condition) -> None:
        for g, head, rest in self._branches(cmd, pc, head=2):
            if len(head) < 2:
                continue
            sub, name = head[0].text.upper(), head[1].text
            old = self.combined(name)
            if sub in ("APPEND", "PREPEND"):
                new = [(it.guard, it.text) for it in rest]
                items = list(old.items) + new if sub == "APPEND" else new + list(old.items)
                self.scope.vars[name] = FlattenedVariable(name, tuple(items), self.tidy(disj(old.defined, g)))
            elif sub == "REMOVE_ITEM":
                removals: dict[str, Condition] = {}
                for it in rest:
                    removals[it.text] = disj(removals.get(it.text, FALSE), it.guard)
                self._rewrite_items(name, old, lambda i, c, s: conj(c, neg(removals.get(s, FALSE))))
            elif sub == "REMOVE_DUPLICATES":
                seen: dict[str, Condition] = {}

                def first_only(i: int, c: Condition, s: str) -> Condition:
                    before = seen.get(s, FALSE)
                    seen[s] = disj(before, c)
                    return conj(c, neg(before))

                # the value is only rewritten where this command runs
                self._rewrite_items(name, old, lambda i, c, s: disj(conj(c, neg(g)), conj(first_only(i, c, s), g)))
            else:
                self.warn(diag.UNSUPPORTED_COMMAND, f"list({sub}) is not interpreted; skipped",
                          cmd.span, subject=f"list({sub})")

    def _rewrite_items(self, name: str, old: FlattenedVariable, fn) -> None:
        items = []
        for i, (c, s) in enumerate(old.items):
            c2 = self.tidy(fn(i, c, s))
            if self.sat(c2):
                items.append((c2, s))
        self.scope.vars[name] = FlattenedVariable(name, tuple(items), old.defined)

    def _cmd_project(self, cmd: CommandInvocation, pc: Condition) -> None:
        for g, head, _ in self._branches(cmd, pc, head=1):
            if not head:
                continue
            name = head[0].text
            binary = BINARY_DIR + self.cur_dir[len(VIRTUAL_ROOT):]
            values = {"PROJECT_NAME": name, "PROJECT_SOURCE_DIR": self.cur_dir,
                      f"{name}_SOURCE_DIR": self.cur_dir, "PROJECT_BINARY_DIR": binary,
                      f"{name}_BINARY_DIR": binary}
            if self.cur_dir == VIRTUAL_ROOT:
                values["CMAKE_PROJECT_NAME"] = name
            for var, value in values.items():
                self.assign(self.scope, var, [(g, value)], g)

    # -- files ---------------------------------------------------------------

    def _enter_file(self, key: str, span: SourceSpan) -> bool:
        if key in self.file_stack:
            self.warn(diag.INCLUDE_CYCLE, f"include cycle through {key}; not entered again",
                      span, subject=key)
            return False
        if len(self.file_stack) > self.include_depth_cap:
            self.warn(diag.INCLUDE_DEPTH_EXCEEDED,
                      f"nesting deeper than {self.include_depth_cap} at {key}; not entered",
                      span, subject=key)
            return False
        return True

    def _module_dirs(self) -> list[str]:
        out = []
        for _, s in self.combined("CMAKE_MODULE_PATH").items:
            out.extend(_split(s))
        return out

    def _resolve_include(self, name: str) -> Path | None:
        if name.endswith(".cmake") or "/" in name:
            full = self.fs_path(self.absolute(name))
            return full if full is not None and full.is_file() else None
        for entry in self._module_dirs():
            base = self.fs_path(self.absolute(entry))
            if base is not None and (base / f"{name}.cmake").is_file():
                return base / f"{name}.cmake"
        return None

    def _cmd_include(self, cmd: CommandInvocation, pc: Condition) -> None:
        for g, head, rest in self._branches(cmd, pc, head=1):
            if not head:
                continue
            name = head[0].text
            optional = any(t.text == "OPTIONAL" for t in rest)
            if "\x00" in name or "$<" in name:
                self.warn(diag.UNRESOLVED_INCLUDE, f"include({render(name)}) depends on configuration",
                          cmd.span, subject=cmd.args[0].raw_text if cmd.args else name)
                continue
            path = self._resolve_include(name)
            if path is None:
                if optional:
                    continue
                if "/" not in name and not name.endswith(".cmake"):
                    self.warn(diag.EXTERNAL_MODULE, f"module {name} is not part of the project",
                              cmd.span, subject=name)
                else:
                    self.warn(diag.UNRESOLVED_INCLUDE, f"include({name}) not found",
                              cmd.span, subject=cmd.args[0].raw_text)
                continue
            self.include_file(path, g, cmd.span)

    def include_file(self, path: Path, pc: Condition, span: SourceSpan) -> None:
        key = self.project.key(path)
        if not self._enter_file(key, span):
            return
        nodes = self.project.get(path)
        if nodes is None:
            return
        virtual = self._virtual(path)
        saved = {v: self.scope.vars.get(v) for v in ("CMAKE_CURRENT_LIST_DIR", "CMAKE_CURRENT_LIST_FILE")}
        self.assign(self.scope, "CMAKE_CURRENT_LIST_DIR", [(pc, posixpath.dirname(virtual))], pc)
        self.assign(self.scope, "CMAKE_CURRENT_LIST_FILE", [(pc, virtual)], pc)
        outer_file, outer_returned = self.cur_file, self.returned
        self.cur_file, self.returned = key, FALSE
        self.file_stack.append(key)
        try:
            self.run_nodes(nodes, pc)
        except _StopFile:
            pass
        finally:
            self.file_stack.pop()
            self.cur_file, self.returned = outer_file, outer_returned
            for var, fv in saved.items():
                if fv is None:
                    self.scope.vars.pop(var, None)
                else:
                    self.scope.vars[var] = fv

    def _virtual(self, path: Path) -> str:
        key = self.project.key(path)
        return key if key.startswith("/") else f"{VIRTUAL_ROOT}/{key}"

    def _cmd_add_subdirectory(self, cmd: CommandInvocation, pc: Condition) -> None:
        for g, head, _ in self._branches(cmd, pc, head=1):
            if not head:
                continue
            name = head[0].text
            virtual = self.absolute(name)
            directory = self.fs_path(virtual)
            if directory is None or not (directory / "CMakeLists.txt").is_file():
                self.warn(diag.UNRESOLVED_INCLUDE, f"add_subdirectory({render(name)}) not found",
                          cmd.span, subject=cmd.args[0].raw_text)
                continue
            listfile = directory / "CMakeLists.txt"
            key = self.project.key(listfile)
            if not self._enter_file(key, cmd.span):
                continue
            nodes = self.project.get(listfile)
            if nodes is None:
                continue
            outer = (self.scope, self.cur_dir, self.cur_file, self.returned)
            self.scope = Scope(self.scope)
            self.cur_dir, self.cur_file, self.returned = virtual, key, FALSE
            binary = BINARY_DIR + virtual[len(VIRTUAL_ROOT):] if virtual.startswith(VIRTUAL_ROOT) else BINARY_DIR
            for var in ("CMAKE_CURRENT_SOURCE_DIR", "CMAKE_CURRENT_LIST_DIR"):
                self.set_builtin(self.scope, var, virtual)
            self.set_builtin(self.scope, "CMAKE_CURRENT_LIST_FILE", virtual + "/CMakeLists.txt")
            self.set_builtin(self.scope, "CMAKE_CURRENT_BINARY_DIR", binary)
            self.file_stack.append(key)
            try:
                self.run_nodes(nodes, g)
            except _StopFile:
                pass
            finally:
                self.file_stack.pop()
                self.scope, self.cur_dir, self.cur_file, self.returned = outer

    # -- functions and macros ------------------------------------------------

    def call(self, fn: Union[FunctionDef, MacroDef], cmd: CommandInvocation, pc: Condition) -> None:
        if self.call_depth >= self.call_depth_cap:
            self.warn(diag.CALL_DEPTH_EXCEEDED,
                      f"call depth cap {self.call_depth_cap} reached at {fn.name}(); skipped",
                      cmd.span, subject=fn.name)
            return
        is_macro = isinstance(fn, MacroDef)
        for g, head, rest in self._branches(cmd, pc, head=len(fn.params)):
            if is_macro:
                self._call_macro(fn, cmd, g, head, rest)
            else:
                self._call_function(fn, g, head, rest)

    def _call_function(self, fn: FunctionDef, g: Condition, head: list[Item], rest: list[Item]) -> None:
        outer = (self.scope, self.returned)
        self.scope = Scope(self.scope)
        self.returned = FALSE
        scope = self.scope
        for i, param in enumerate(fn.params):
            value = head[i].text if i < len(head) else ""
            scope.vars[param] = FlattenedVariable(param, ((TRUE, value),) if value else (), TRUE)
        argn = tuple((it.guard, it.text) for it in rest)
        scope.vars["ARGN"] = FlattenedVariable("ARGN", argn, TRUE)
        scope.vars["ARGV"] = FlattenedVariable(
            "ARGV", tuple((TRUE, it.text) for it in head) + argn, TRUE)
        for i, it in enumerate(head):
            self.set_builtin(scope, f"ARGV{i}", it.text)
        if all(it.guard == g for it in rest):
            self.set_builtin(scope, "ARGC", str(len(head) + len(rest)))
            for i, it in enumerate(rest, start=len(head)):
                self.set_builtin(scope, f"ARGV{i}", it.text)
        self.call_depth += 1
        try:
            self.run_nodes(fn.body, g)
        finally:
            self.call_depth -= 1
            self.scope, self.returned = outer

    def _call_macro(self, fn: MacroDef, cmd: CommandInvocation, g: Condition,
                    head: list[Item], rest: list[Item]) -> None:
        if any(it.guard != g for it in rest):
            try:
                cases = self.partition(rest, g)
            except BranchOverflow:
                self.warn(diag.BRANCH_OVERFLOW, f"arguments of macro {fn.name}() have too many cases",
                          cmd.span, subject=fn.name)
                return
        else:
            cases = [(g, rest, [])]
        for cg, extra, _ in cases:
            values = {p: (head[i].text if i < len(head) else "") for i, p in enumerate(fn.params)}
            args = [it.text for it in head] + [it.text for it in extra]
            values["ARGN"] = ";".join(it.text for it in extra)
            values["ARGV"] = ";".join(args)
            values["ARGC"] = str(len(args))
            for i, a in enumerate(args):
                values[f"ARGV{i}"] = a
            body = _substitute_macro(fn.body, values)
            self.call_depth += 1
            try:
                self.run_nodes(body, cg)
            finally:
                self.call_depth -= 1

    # -- targets -------------------------------------------------------------

    def _declared(self, name: str, guard: Condition, span: SourceSpan) -> None:
        declared = self.targets.get(name)
        if declared is None:
            self.warn(diag.DANGLING_REFERENCE, f"target {name} is not declared before use",
                      span, subject=name)
        elif not self.sat(conj(declared, guard)):
            self.warn(diag.UNSAT_REFERENCE, f"target {name} does not exist where it is used",
                      span, subject=name)

    def _declare(self, name: str, kind: str, guard: Condition, span: SourceSpan) -> None:
        self.targets[name] = self.tidy(disj(self.targets.get(name, FALSE), guard))
        self.trace.events.append(DeclareDeliverable(name, kind, guard, span))

    def _attach(self, target: str, items: list[Item], span: SourceSpan) -> None:
        groups: dict[Condition, list[str]] = {}
        for it in items:
            path = self.source_path(it.text, span)
            bucket = groups.setdefault(self.tidy(it.guard), [])
            if path not in bucket:
                bucket.append(path)
        if groups:
            self.trace.events.append(AttachSources(
                target, tuple((g, tuple(paths)) for g, paths in groups.items()), span))

    def _cmd_add_executable(self, cmd: CommandInvocation, pc: Condition) -> None:
        self._add_target(cmd, pc, executable=True)

    def _cmd_add_library(self, cmd: CommandInvocation, pc: Condition) -> None:
        self._add_target(cmd, pc, executable=False)

    def _add_target(self, cmd: CommandInvocation, pc: Condition, executable: bool) -> None:
        keywords = {"WIN32", "MACOSX_BUNDLE", "EXCLUDE_FROM_ALL", "GLOBAL", "IMPORTED"}
        if not executable:
            keywords |= set(_LIBRARY_KINDS)
        for g, head, rest in self._branches(cmd, pc, head=1):
            if not head:
                continue
            name = head[0].text
            if rest and rest[0].text == "ALIAS" and len(rest) >= 2:
                self.targets[name] = self.tidy(disj(self.targets.get(name, FALSE), g))
                self.trace.events.append(DeclareAlias(name, rest[1].text, g, cmd.span))
                continue
            flags = [it for it in rest if it.text in keywords and not it.quoted]
            sources = [it for it in rest if not (it.text in keywords and not it.quoted)]
            if any(it.guard != g for it in flags):
                self.warn(diag.CONDITIONAL_TARGET_KIND,
                          f"the kind of target {name} depends on configuration", cmd.span, subject=name)
            texts = {it.text for it in flags}
            if "IMPORTED" in texts:
                kind = IMPORTED
            elif executable:
                kind = EXECUTABLE
            else:
                sub = next((_LIBRARY_KINDS[t.text] for t in flags if t.text in _LIBRARY_KINDS), None)
                kind = library_kind(sub or self._default_library_kind(name, g, cmd.span))
            self._declare(name, kind, g, cmd.span)
            if kind != IMPORTED:
                self._attach(name, sources, cmd.span)

    def _default_library_kind(self, name: str, g: Condition, span: SourceSpan) -> str:
        """STATIC or SHARED as chosen by BUILD_SHARED_LIBS; "default" when that varies."""
        truths = set()
        for guard, value in self.value_alternatives("BUILD_SHARED_LIBS"):
            if self.sat(conj(guard, g)) is False:
                continue
            truths.add(None if value is not None and "\x00" in value else cmake_truthy(value))
        if truths == {True}:
            return "shared"
        if truths == {False}:
            return "static"
        self.warn(diag.CONDITIONAL_TARGET_KIND,
                  f"the kind of library {name} follows BUILD_SHARED_LIBS", span, subject=name)
        return "default"

    _SCOPE_WORDS = frozenset({"PRIVATE", "PUBLIC", "INTERFACE"})

    def _cmd_target_sources(self, cmd: CommandInvocation, pc: Condition) -> None:
        for g, head, rest in self._branches(cmd, pc, head=1):
            if not head:
                continue
            name = head[0].text
            self._declared(name, g, cmd.span)
            sources, skip, mode = [], 0, "files"
            for it in rest:
                word = None if it.quoted else it.text
                if skip:
                    skip -= 1
                    continue
                if word in self._SCOPE_WORDS:
                    mode = "files"
                elif word == "FILE_SET":
                    mode, skip = "files", 1
                elif word == "TYPE":
                    skip = 1
                elif word == "BASE_DIRS":
                    mode = "dirs"
                elif word == "FILES":
                    mode = "files"
                elif mode == "files":
                    sources.append(it)
            self._attach(name, sources, cmd.span)

    _LINK_WORDS = frozenset({"PRIVATE", "PUBLIC", "INTERFACE", "LINK_PRIVATE", "LINK_PUBLIC",
                             "LINK_INTERFACE_LIBRARIES", "debug", "optimized", "general"})

    def _cmd_target_link_libraries(self, cmd: CommandInvocation, pc: Condition) -> None:
        for g, head, rest in self._branches(cmd, pc, head=1):
            if not head:
                continue
            name = head[0].text
            self._declared(name, g, cmd.span)
            for it in rest:
                if not it.quoted and it.text in self._LINK_WORDS:
                    continue
                dep = render(it.text)
                if "$<" in dep:
                    self.warn(diag.GENERATOR_EXPRESSION, f"generator expression in link item {dep}",
                              cmd.span, subject=dep)
                self.trace.events.append(LinkDependency(name, dep, self.tidy(it.guard), cmd.span))


def _substitute_macro(body: tuple, values: dict[str, str]) -> tuple:
    pattern = re.compile(r"\$\{(" + "|".join(re.escape(k) for k in sorted(values, key=len, reverse=True)) + r")\}")

    def arg(a: Argument) -> Argument:
        if a.kind == BRACKET or "${" not in a.raw_text:
            return a
        return Argument(a.kind, pattern.sub(lambda m: values[m.group(1)].replace("\\", "\\\\"), a.raw_text), a.span)

    def node(n):
        if isinstance(n, CommandInvocation):
            return CommandInvocation(n.name, tuple(arg(a) for a in n.args), n.span)
        if isinstance(n, IfBlock):
            return IfBlock(tuple(IfClause(tuple(arg(a) for a in c.args), tuple(node(x) for x in c.body), c.span)
                                 for c in n.clauses), tuple(node(x) for x in n.else_body), n.span)
        if isinstance(n, (ForeachBlock, WhileBlock, ScopeBlock)):
            return type(n)(tuple(arg(a) for a in n.header_args), tuple(node(x) for x in n.body), n.span)
        return n

    if not values:
        return body
    return tuple(node(n) for n in body)


def evaluate_project(project: ParsedProject, overrides: ConfigurationAssignment | None = None,
                     **caps) -> tuple[SymbolicEnv, DeclarationTrace, list[Diagnostic]]:
    """Interpret *project* symbolically, or concretely under total *overrides*."""
    return Evaluator(project, overrides, **caps).run()


def iter_events(trace: DeclarationTrace) -> Iterator[Event]:
    return iter(trace.events)
