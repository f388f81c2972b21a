"""Unified diff ingestion: which files does a patch touch?

Hunk bodies are skipped by their line counts and never interpreted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .diagnostics import MalformedDiff
from .exposure import ChangeSet, normalize_path

MODIFIED = "modified"
ADDED = "added"
DELETED = "deleted"
RENAMED = "renamed"

_HUNK = re.compile(r"@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
_GIT_HEADER = re.compile(r"diff --git (.+)")
_BINARY = re.compile(r"Binary files (.+) and (.+) differ")
_DEV_NULL = "/dev/null"
_C_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\", "a": "\a", "b": "\b", "f": "\f",
              "r": "\r", "v": "\v"}


@dataclass(frozen=True)
class FileEntry:
    old_path: str | None
    new_path: str | None
    status: str


@dataclass(frozen=True)
class DiffDocument:
    entries: tuple[FileEntry, ...]


def _unquote(path: str) -> str:
    """Undo git's C-style quoting of paths with unusual characters."""
    if not (len(path) >= 2 and path[0] == '"' and path[-1] == '"'):
        return path
    body = path[1:-1]
    out = bytearray()
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            if nxt in "01234567" and i + 3 < len(body) + 1:
                out.append(int(body[i + 1:i + 4], 8))
                i += 4
                continue
            out.extend(_C_ESCAPES.get(nxt, nxt).encode())
            i += 2
            continue
        out.extend(ch.encode())
        i += 1
    return out.decode("utf-8", errors="replace")


class _Parser:
    def __init__(self, text: str, strip: int | None) -> None:
        self.lines = text.splitlines()
        self.strip = strip
        self.entries: list[FileEntry] = []
        self.open = False
        self.git = False
        self.headers_seen = False
        self.old: str | None = None
        self.new: str | None = None
        self.status: str | None = None

    def path(self, raw: str, line: int) -> str | None:
        raw = raw.rstrip("\r")
        if "\t" in raw:
            raw = raw.split("\t", 1)[0]
        raw = _unquote(raw.strip())
        if raw == _DEV_NULL:
            return None
        if self.strip is None:
            if raw[:2] in ("a/", "b/"):
                raw = raw[2:]
        elif self.strip > 0:
            parts = raw.split("/")
            if len(parts) <= self.strip:
                raise MalformedDiff(f"cannot strip {self.strip} components from {raw!r}", line)
            raw = "/".join(parts[self.strip:])
        if not raw:
            raise MalformedDiff("empty path", line)
        return normalize_path(raw)

    def flush(self) -> None:
        if not self.open:
            return
        self.open = False
        old, new, status = self.old, self.new, self.status
        if old is None and new is None:
            return
        if status is None:
            if old is None:
                status = ADDED
            elif new is None:
                status = DELETED
            elif old != new:
                status = RENAMED
            else:
                status = MODIFIED
        if status == ADDED:
            old = None
        elif status == DELETED:
            new = None
        elif status == MODIFIED:
            old = new = new or old
        self.entries.append(FileEntry(old, new, status))

    def start(self, git: bool) -> None:
        self.flush()
        self.open, self.git, self.headers_seen = True, git, False
        self.old = self.new = self.status = None

    def git_header(self, rest: str, line: int) -> None:
        self.start(git=True)
        rest = rest.strip()
        if rest.startswith('"'):
            end = 1
            while end < len(rest) and (rest[end] != '"' or rest[end - 1] == "\\"):
                end += 1
            first, second = rest[:end + 1], rest[end + 1:].strip()
        else:
            marker = rest.find(" b/") if self.strip is None else -1
            if marker < 0:
                # "a/x b/x" with identical halves is the common unprefixed case
                half = len(rest) // 2
                first, second = rest[:half], rest[half + 1:]
            else:
                first, second = rest[:marker], rest[marker + 1:]
        self.old = self.path(first, line)
        self.new = self.path(second, line)

    def file_headers(self, i: int) -> None:
        if not (self.open and self.git and not self.headers_seen):
            self.start(git=False)
        old = self.path(self.lines[i][4:], i + 1)
        new = self.path(self.lines[i + 1][4:], i + 2)
        self.headers_seen = True
        if self.status == RENAMED:
            return
        self.old, self.new = old, new
        if old is None:
            self.status = ADDED
        elif new is None:
            self.status = DELETED

    def extended(self, line: str, lineno: int) -> None:
        if line.startswith("new file mode"):
            self.status = ADDED
        elif line.startswith("deleted file mode"):
            self.status = DELETED
        elif line.startswith("rename from "):
            self.old = normalize_path(_unquote(line[len("rename from "):].strip()))
            self.status = RENAMED
        elif line.startswith("rename to "):
            self.new = normalize_path(_unquote(line[len("rename to "):].strip()))
            self.status = RENAMED
        elif line.startswith("copy to "):
            self.new = normalize_path(_unquote(line[len("copy to "):].strip()))
            self.status = ADDED
        else:
            m = _BINARY.match(line)
            if m:
                old, new = self.path(m.group(1), lineno), self.path(m.group(2), lineno)
                if not self.git:
                    self.old, self.new = old, new
                if old is None:
                    self.status = self.status or ADDED
                elif new is None:
                    self.status = self.status or DELETED

    def skip_hunk(self, i: int) -> int:
        m = _HUNK.match(self.lines[i])
        if not m:
            raise MalformedDiff("malformed hunk header", i + 1)
        old_left = int(m.group(2)) if m.group(2) is not None else 1
        new_left = int(m.group(4)) if m.group(4) is not None else 1
        i += 1
        while (old_left > 0 or new_left > 0) and i < len(self.lines):
            tag = self.lines[i][:1]
            if tag in (" ", ""):
                old_left -= 1
                new_left -= 1
            elif tag == "-":
                old_left -= 1
            elif tag == "+":
                new_left -= 1
            elif tag != "\\":
                raise MalformedDiff("hunk shorter than its header says", i + 1)
            i += 1
        if old_left > 0 or new_left > 0:
            raise MalformedDiff("diff ends inside a hunk", len(self.lines))
        while i < len(self.lines) and self.lines[i].startswith("\\"):
            i += 1
        return i

    def run(self) -> DiffDocument:
        lines = self.lines
        i, n = 0, len(lines)
        while i < n:
            line = lines[i]
            m = _GIT_HEADER.match(line)
            if m:
                self.git_header(m.group(1), i + 1)
                i += 1
            elif line.startswith("--- "):
                if i + 1 >= n or not lines[i + 1].startswith("+++ "):
                    raise MalformedDiff("'---' header without a following '+++' line", i + 1)
                self.file_headers(i)
                i += 2
            elif line.startswith("+++ "):
                raise MalformedDiff("'+++' header without a preceding '---' line", i + 1)
            elif line.startswith("@@"):
                if not self.open:
                    raise MalformedDiff("hunk outside of a file section", i + 1)
                i = self.skip_hunk(i)
            else:
                if self.open:
                    self.extended(line, i + 1)
                i += 1
        self.flush()
        if not self.entries:
            raise MalformedDiff("no file sections found", max(1, n))
        return DiffDocument(tuple(self.entries))


def parse_unified_diff(text: str, strip: int | None = None) -> DiffDocument:
    """File entries of a unified diff.

    *strip* removes that many leading path components (like ``patch -p``);
    by default ``a/`` and ``b/`` prefixes are removed when present.
    """
    if not text.strip():
        raise MalformedDiff("empty diff", 1)
    return _Parser(text, strip).run()


def to_changeset(doc: DiffDocument, id: str) -> ChangeSet:
    files: list[str] = []
    for e in doc.entries:
        if e.status == RENAMED:
            files.extend(p for p in (e.old_path, e.new_path) if p)
        elif e.status == DELETED:
            files.append(e.old_path or "")
        else:
            files.append(e.new_path or "")
    return ChangeSet(id, tuple(f for f in files if f))


def read_file_list(text: str) -> list[str]:
    """Newline-separated paths; blank lines and ``#`` comments ignored."""
    return [normalize_path(line) for line in text.splitlines()
            if line.strip() and not line.lstrip().startswith("#")]


def changeset_from_files(id: str, files: Iterable[str]) -> ChangeSet:
    return ChangeSet(id, tuple(files))
