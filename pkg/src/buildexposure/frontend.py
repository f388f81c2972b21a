"""CMake listfile lexer, block parser and project loader.

The lexer covers the CMake language core: command invocations, unquoted,
quoted and bracket arguments, line and bracket comments.  Variable
references are kept verbatim in the argument text; expansion happens in the
evaluator.  The parser folds the flat command stream into nested blocks.
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from . import diagnostics as diag
from .diagnostics import (
    CMakeSyntaxError,
    Diagnostic,
    MisplacedElse,
    MissingRootListfile,
    SourceSpan,
    UnbalancedBlock,
    UnterminatedBracket,
    UnterminatedString,
)

log = logging.getLogger(__name__)

INCLUDE_DEPTH_CAP = 32

UNQUOTED = "unquoted"
QUOTED = "quoted"
BRACKET = "bracket"


@dataclass(frozen=True)
class Token:
    kind: str  # ident | lparen | rparen | unquoted | quoted | bracket | newline
    text: str
    span: SourceSpan = field(compare=False)


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_BRACKET_OPEN = re.compile(r"\[(=*)\[")
_UNQUOTED_STOP = frozenset(' \t\r\n\f\v()#"\\')


class _Cursor:
    def __init__(self, text: str, file_path: str) -> None:
        self.text = text
        self.file_path = file_path
        self.pos = 0
        self.line = 1
        self.col = 1

    def span(self) -> SourceSpan:
        return SourceSpan(self.file_path, self.line, self.col)

    def advance(self, n: int) -> str:
        chunk = self.text[self.pos:self.pos + n]
        for ch in chunk:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += len(chunk)
        return chunk


def tokenize(text: str, file_path: str | os.PathLike = "<string>") -> list[Token]:
    """Split one listfile into tokens; comments are dropped.

    Newlines are only emitted between commands, where they separate them.
    """
    cur = _Cursor(text, str(file_path) or "<string>")
    tokens: list[Token] = []
    depth = 0
    n = len(text)
    while cur.pos < n:
        ch = text[cur.pos]
        start = cur.span()
        if ch == "\n":
            cur.advance(1)
            if depth == 0:
                tokens.append(Token("newline", "\n", start))
        elif ch in " \t\r\f\v":
            cur.advance(1)
        elif ch == "#":
            m = _BRACKET_OPEN.match(text, cur.pos + 1)
            if m:
                close = "]" + m.group(1) + "]"
                end = text.find(close, m.end())
                if end < 0:
                    raise UnterminatedBracket("unterminated bracket comment", start)
                cur.advance(end + len(close) - cur.pos)
            else:
                end = text.find("\n", cur.pos)
                cur.advance((n if end < 0 else end) - cur.pos)
        elif ch == "(":
            cur.advance(1)
            tokens.append(Token("lparen", "(", start))
            depth += 1
        elif ch == ")":
            cur.advance(1)
            tokens.append(Token("rparen", ")", start))
            depth = max(depth - 1, 0)
        elif depth == 0:
            m = _IDENT.match(text, cur.pos)
            if not m:
                raise CMakeSyntaxError(f"unexpected character {ch!r} outside a command", start)
            cur.advance(m.end() - cur.pos)
            tokens.append(Token("ident", m.group(0), start))
        elif ch == '"':
            tokens.append(Token(QUOTED, _scan_quoted(cur), start))
        elif ch == "[" and _BRACKET_OPEN.match(text, cur.pos):
            tokens.append(Token(BRACKET, _scan_bracket(cur), start))
        else:
            tokens.append(Token(UNQUOTED, _scan_unquoted(cur), start))
    return tokens


def _scan_quoted(cur: _Cursor) -> str:
    start = cur.span()
    text = cur.text
    i = cur.pos + 1
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text):
                break
            i += 2
            continue
        if ch == '"':
            raw = text[cur.pos + 1:i]
            cur.advance(i + 1 - cur.pos)
            return raw
        i += 1
    raise UnterminatedString("unterminated quoted argument", start)


def _scan_bracket(cur: _Cursor) -> str:
    start = cur.span()
    m = _BRACKET_OPEN.match(cur.text, cur.pos)
    assert m is not None
    close = "]" + m.group(1) + "]"
    end = cur.text.find(close, m.end())
    if end < 0:
        raise UnterminatedBracket("unterminated bracket argument", start)
    content = cur.text[m.end():end]
    if content.startswith("\r\n"):
        content = content[2:]
    elif content.startswith("\n"):
        content = content[1:]
    cur.advance(end + len(close) - cur.pos)
    return content


def _scan_unquoted(cur: _Cursor) -> str:
    text = cur.text
    i = cur.pos
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\\":
            i += 2
            continue
        if ch == '"' and i > cur.pos:
            # legacy form: -Dx="a b" keeps the quoted run inside the argument
            close = i + 1
            while close < n and text[close] != '"':
                close += 2 if text[close] == "\\" else 1
            i = min(close + 1, n)
            continue
        if ch in _UNQUOTED_STOP:
            break
        i += 1
    i = min(i, n)
    raw = text[cur.pos:i]
    cur.advance(i - cur.pos)
    return raw


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Argument:
    kind: str
    raw_text: str
    span: SourceSpan = field(compare=False, default=SourceSpan("<string>"))


@dataclass(frozen=True)
class CommandInvocation:
    name: str
    args: tuple[Argument, ...]
    span: SourceSpan = field(compare=False, default=SourceSpan("<string>"))


@dataclass(frozen=True)
class IfClause:
    args: tuple[Argument, ...]
    body: tuple["AstNode", ...]
    span: SourceSpan = field(compare=False, default=SourceSpan("<string>"))


@dataclass(frozen=True)
class IfBlock:
    clauses: tuple[IfClause, ...]
    else_body: tuple["AstNode", ...]
    span: SourceSpan = field(compare=False, default=SourceSpan("<string>"))


@dataclass(frozen=True)
class ForeachBlock:
    header_args: tuple[Argument, ...]
    body: tuple["AstNode", ...]
    span: SourceSpan = field(compare=False, default=SourceSpan("<string>"))


@dataclass(frozen=True)
class WhileBlock:
    header_args: tuple[Argument, ...]
    body: tuple["AstNode", ...]
    span: SourceSpan = field(compare=False, default=SourceSpan("<string>"))


@dataclass(frozen=True)
class ScopeBlock:
    """``block()``/``endblock()``."""

    header_args: tuple[Argument, ...]
    body: tuple["AstNode", ...]
    span: SourceSpan = field(compare=False, default=SourceSpan("<string>"))


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple[str, ...]
    body: tuple["AstNode", ...]
    span: SourceSpan = field(compare=False, default=SourceSpan("<string>"))


@dataclass(frozen=True)
class MacroDef:
    name: str
    params: tuple[str, ...]
    body: tuple["AstNode", ...]
    span: SourceSpan = field(compare=False, default=SourceSpan("<string>"))


AstNode = Union[CommandInvocation, IfBlock, ForeachBlock, WhileBlock, ScopeBlock, FunctionDef, MacroDef]


def _commands(tokens: list[Token]) -> list[CommandInvocation]:
    out: list[CommandInvocation] = []
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if tok.kind == "newline":
            i += 1
            continue
        if tok.kind != "ident":
            raise CMakeSyntaxError(f"expected a command name, found {tok.text!r}", tok.span)
        if i + 1 >= n or tokens[i + 1].kind != "lparen":
            raise CMakeSyntaxError(f"expected '(' after {tok.text!r}", tok.span)
        i += 2
        depth = 1
        args: list[Argument] = []
        while True:
            if i >= n:
                raise UnbalancedBlock(f"missing ')' for command {tok.text!r}", tok.span)
            a = tokens[i]
            i += 1
            if a.kind == "rparen":
                depth -= 1
                if depth == 0:
                    break
                args.append(Argument(UNQUOTED, ")", a.span))
            elif a.kind == "lparen":
                depth += 1
                args.append(Argument(UNQUOTED, "(", a.span))
            elif a.kind in (UNQUOTED, QUOTED, BRACKET):
                args.append(Argument(a.kind, a.text, a.span))
            elif a.kind == "ident":
                # only reachable for hand-built token streams
                args.append(Argument(UNQUOTED, a.text, a.span))
        out.append(CommandInvocation(tok.text.lower(), tuple(args), tok.span))
    return out


_OPENERS = {
    "if": "endif",
    "foreach": "endforeach",
    "while": "endwhile",
    "function": "endfunction",
    "macro": "endmacro",
    "block": "endblock",
}
_CLOSERS = {v: k for k, v in _OPENERS.items()}


@dataclass
class _Frame:
    opener: CommandInvocation
    body: list = field(default_factory=list)
    # if-blocks only: finished (args, body, span) clauses and else state
    clauses: list = field(default_factory=list)
    in_else: bool = False
    clause_args: tuple = ()
    clause_span: SourceSpan | None = None


def _close(frame: _Frame) -> AstNode:
    op = frame.opener
    body = tuple(frame.body)
    if op.name == "if":
        if frame.in_else:
            clauses = frame.clauses
            else_body = body
        else:
            clauses = [*frame.clauses, IfClause(frame.clause_args, body, frame.clause_span or op.span)]
            else_body = ()
        return IfBlock(tuple(clauses), else_body, op.span)
    if op.name == "foreach":
        return ForeachBlock(op.args, body, op.span)
    if op.name == "while":
        return WhileBlock(op.args, body, op.span)
    if op.name == "block":
        return ScopeBlock(op.args, body, op.span)
    words = [a.raw_text for a in op.args]
    name = words[0].lower() if words else ""
    cls = FunctionDef if op.name == "function" else MacroDef
    return cls(name, tuple(words[1:]), body, op.span)


def parse(tokens: list[Token]) -> list[AstNode]:
    """Fold a token stream into a list of (possibly nested) AST nodes."""
    root: list = []
    stack: list[_Frame] = []
    for cmd in _commands(tokens):
        target = stack[-1].body if stack else root
        name = cmd.name
        if name in _OPENERS:
            frame = _Frame(cmd)
            if name == "if":
                frame.clause_args = cmd.args
                frame.clause_span = cmd.span
            stack.append(frame)
        elif name in ("elseif", "else"):
            if not stack or stack[-1].opener.name != "if":
                raise MisplacedElse(f"{name}() outside of an if block", cmd.span)
            frame = stack[-1]
            if frame.in_else:
                raise MisplacedElse(f"{name}() after else()", cmd.span)
            frame.clauses.append(IfClause(frame.clause_args, tuple(frame.body), frame.clause_span or cmd.span))
            frame.body = []
            if name == "else":
                frame.in_else = True
            else:
                frame.clause_args = cmd.args
                frame.clause_span = cmd.span
        elif name in _CLOSERS:
            if not stack or stack[-1].opener.name != _CLOSERS[name]:
                raise UnbalancedBlock(f"{name}() without matching {_CLOSERS[name]}()", cmd.span)
            node = _close(stack.pop())
            (stack[-1].body if stack else root).append(node)
        else:
            target.append(cmd)
    if stack:
        opener = stack[-1].opener
        raise UnbalancedBlock(f"{opener.name}() without {_OPENERS[opener.name]}()", opener.span)
    return root


def parse_text(text: str, file_path: str | os.PathLike = "<string>") -> list[AstNode]:
    return parse(tokenize(text, file_path))


def serialize_argument(arg: Argument) -> str:
    if arg.kind == QUOTED:
        return f'"{arg.raw_text}"'
    if arg.kind == BRACKET:
        content = arg.raw_text
        level = 0
        while True:
            close = "]" + "=" * level + "]"
            if (content + close).find(close) == len(content):
                break
            level += 1
        lead = "\n" if content.startswith("\n") or content.startswith("\r\n") else ""
        return "[" + "=" * level + "[" + lead + content + close
    return arg.raw_text


def serialize_command(cmd: CommandInvocation) -> str:
    return f"{cmd.name}(" + " ".join(serialize_argument(a) for a in cmd.args) + ")"


def iter_commands(nodes: Iterable[AstNode]) -> Iterable[CommandInvocation]:
    """Every command invocation in source order, descending into blocks."""
    for node in nodes:
        if isinstance(node, CommandInvocation):
            yield node
        elif isinstance(node, IfBlock):
            for clause in node.clauses:
                yield from iter_commands(clause.body)
            yield from iter_commands(node.else_body)
        else:
            yield from iter_commands(node.body)


# ---------------------------------------------------------------------------
# Project loading
# ---------------------------------------------------------------------------


def read_listfile(path: Path, warnings: list[Diagnostic]) -> str:
    data = path.read_bytes()
    if data.startswith(b"\xef\xbb\xbf"):
        data = data[3:]
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        warnings.append(Diagnostic(
            diag.INVALID_ENCODING,
            f"invalid UTF-8 at byte {exc.start}; replaced",
            SourceSpan(str(path)),
        ))
        return data.decode("utf-8", errors="replace")


@dataclass
class ParsedProject:
    root: Path
    files: dict[str, tuple[AstNode, ...]] = field(default_factory=dict)
    warnings: list[Diagnostic] = field(default_factory=list)

    def key(self, path: Path) -> str:
        path = Path(os.path.normpath(path))
        try:
            return path.relative_to(self.root).as_posix()
        except ValueError:
            return path.as_posix()

    def path_of(self, key: str) -> Path:
        p = Path(key)
        return p if p.is_absolute() else self.root / p

    def get(self, path: Path) -> tuple[AstNode, ...] | None:
        """The parsed listfile at *path*, parsing it on first request.

        Returns None when the file does not exist or does not parse; the
        latter is recorded as a PARSE_ERROR warning.
        """
        key = self.key(path)
        if key in self.files:
            return self.files[key]
        full = self.path_of(key)
        if not full.is_file():
            return None
        text = read_listfile(full, self.warnings)
        try:
            nodes = tuple(parse_text(text, key))
        except CMakeSyntaxError as exc:
            self.warnings.append(Diagnostic(diag.PARSE_ERROR, str(exc), exc.span))
            nodes = ()
        self.files[key] = nodes
        return nodes

    @property
    def root_listfile(self) -> str:
        return "CMakeLists.txt"


_REF = re.compile(r"\$\{([A-Za-z0-9_.+\-/]+)\}")


class _StaticEnv:
    """Single-valued variables known without evaluation, for include lookup."""

    def __init__(self, values: dict[str, str] | None = None, module_path: list[str] | None = None):
        self.values = dict(values or {})
        self.module_path = list(module_path or [])

    def child(self) -> "_StaticEnv":
        return _StaticEnv(self.values, self.module_path)

    def expand(self, text: str) -> str | None:
        unresolved = False

        def repl(m: re.Match) -> str:
            nonlocal unresolved
            if m.group(1) in self.values:
                return self.values[m.group(1)]
            unresolved = True
            return ""

        for _ in range(8):
            new = _REF.sub(repl, text)
            if new == text:
                break
            text = new
        if unresolved or "$" in text and ("${" in text or "$ENV{" in text or "$<" in text):
            return None
        return text


def resolve_module(name: str, current_dir: Path, module_path: Iterable[str]) -> Path | None:
    """File an ``include(name)`` refers to, or None if not in the project."""
    candidate = Path(name)
    if name.endswith(".cmake") or "/" in name or candidate.is_absolute():
        full = candidate if candidate.is_absolute() else current_dir / candidate
        return full if full.is_file() else None
    for entry in module_path:
        base = Path(entry) if Path(entry).is_absolute() else current_dir / entry
        full = base / f"{name}.cmake"
        if full.is_file():
            return full
    return None


def load_project(root_dir: str | os.PathLike) -> ParsedProject:
    """Parse the root listfile and everything it statically includes.

    Raises :class:`MissingRootListfile` when there is no root
    ``CMakeLists.txt``; a syntax error in the root listfile propagates.
    Problems in included files become warnings.
    """
    root = Path(os.path.abspath(root_dir))
    root_file = root / "CMakeLists.txt"
    if not root_file.is_file():
        raise MissingRootListfile(f"no CMakeLists.txt in {root_dir}")
    project = ParsedProject(root)
    text = read_listfile(root_file, project.warnings)
    project.files["CMakeLists.txt"] = tuple(parse_text(text, "CMakeLists.txt"))

    builtins = {
        "CMAKE_SOURCE_DIR": root.as_posix(),
        "PROJECT_SOURCE_DIR": root.as_posix(),
        "CMAKE_CURRENT_SOURCE_DIR": root.as_posix(),
        "CMAKE_CURRENT_LIST_DIR": root.as_posix(),
    }
    _walk_static(project, root_file, _StaticEnv(builtins), [], 0)
    return project


def _walk_static(project: ParsedProject, listfile: Path, env: _StaticEnv,
                 stack: list[str], depth: int) -> None:
    key = project.key(listfile)
    if key in stack:
        project.warnings.append(Diagnostic(
            diag.INCLUDE_CYCLE, f"include cycle through {key}; not descending again",
            SourceSpan(stack[-1]), subject=key))
        return
    if depth > INCLUDE_DEPTH_CAP:
        project.warnings.append(Diagnostic(
            diag.INCLUDE_DEPTH_EXCEEDED, f"include depth cap {INCLUDE_DEPTH_CAP} reached at {key}",
            SourceSpan(stack[-1] if stack else key), subject=key))
        return
    nodes = project.get(listfile)
    if nodes is None:
        return
    here = listfile.parent
    env.values["CMAKE_CURRENT_LIST_DIR"] = here.as_posix()
    stack.append(key)
    _walk_nodes(project, nodes, env, stack, depth, here, nested=False)
    stack.pop()


def _walk_nodes(project: ParsedProject, nodes: Iterable[AstNode], env: _StaticEnv,
                stack: list[str], depth: int, here: Path, nested: bool) -> None:
    for node in nodes:
        if isinstance(node, IfBlock):
            for clause in node.clauses:
                _walk_nodes(project, clause.body, env, stack, depth, here, True)
            _walk_nodes(project, node.else_body, env, stack, depth, here, True)
            continue
        if isinstance(node, (FunctionDef, MacroDef)):
            continue
        if not isinstance(node, CommandInvocation):
            _walk_nodes(project, node.body, env, stack, depth, here, True)
            continue
        words = [a.raw_text for a in node.args]
        if node.name == "set" and words:
            name = words[0]
            value = env.expand(";".join(w for w in words[1:] if w not in ("PARENT_SCOPE",)))
            if nested or value is None or "CACHE" in words:
                env.values.pop(name, None)
            else:
                env.values[name] = value
        elif node.name == "list" and len(words) >= 3 and words[0] == "APPEND" \
                and words[1] == "CMAKE_MODULE_PATH":
            for w in words[2:]:
                resolved = env.expand(w)
                if resolved is not None:
                    env.module_path.append(resolved)
        elif node.name == "project" and words:
            env.values[f"{words[0]}_SOURCE_DIR"] = here.as_posix()
            env.values["PROJECT_SOURCE_DIR"] = here.as_posix()
        elif node.name in ("include", "add_subdirectory") and words:
            resolved = env.expand(words[0])
            if resolved is None:
                project.warnings.append(Diagnostic(
                    diag.UNRESOLVED_INCLUDE,
                    f"{node.name}({words[0]}) is not statically resolvable",
                    node.span, subject=words[0]))
                continue
            if node.name == "include":
                target = resolve_module(resolved, here, env.module_path)
                if target is not None:
                    _walk_static(project, target, env, stack, depth + 1)
                    env.values["CMAKE_CURRENT_LIST_DIR"] = here.as_posix()
            else:
                sub = Path(resolved) if Path(resolved).is_absolute() else here / resolved
                sub_file = sub / "CMakeLists.txt"
                if sub_file.is_file():
                    child = env.child()
                    child.values["CMAKE_CURRENT_SOURCE_DIR"] = sub.as_posix()
                    _walk_static(project, sub_file, child, stack, depth + 1)
