from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from buildexposure.changes import (
    ADDED,
    DELETED,
    MODIFIED,
    RENAMED,
    FileEntry,
    changeset_from_files,
    parse_unified_diff,
    read_file_list,
    to_changeset,
)
from buildexposure.diagnostics import MalformedDiff
from buildexposure.exposure import ChangeSet

GIT_DIFF = """\
diff --git a/src/a.c b/src/a.c
index 1111111..2222222 100644
--- a/src/a.c
+++ b/src/a.c
@@ -1,2 +1,2 @@
-x
--- looks like a header but is a removed line
+y
 z
diff --git a/old.c b/new.c
similarity index 90%
rename from old.c
rename to new.c
diff --git a/img.png b/img.png
new file mode 100644
index 0000000..3333333
Binary files /dev/null and b/img.png differ
diff --git a/gone.c b/gone.c
deleted file mode 100644
--- a/gone.c
+++ /dev/null
@@ -1 +0,0 @@
-bye
"""


def test_git_diff_entries():
    doc = parse_unified_diff(GIT_DIFF)
    assert doc.entries == (
        FileEntry("src/a.c", "src/a.c", MODIFIED),
        FileEntry("old.c", "new.c", RENAMED),
        FileEntry(None, "img.png", ADDED),
        FileEntry("gone.c", None, DELETED),
    )


def test_changeset_paths_per_status():
    cs = to_changeset(parse_unified_diff(GIT_DIFF), "p1")
    assert cs.id == "p1"
    assert cs.changed_files == ("gone.c", "img.png", "new.c", "old.c", "src/a.c")


def test_plain_unified_diff_without_git_headers():
    text = ("--- src/x.c\t2024-01-01 00:00:00\n+++ src/x.c\t2024-01-02 00:00:00\n@@ -1 +1 @@\n-a\n+b\n"
            "--- /dev/null\n+++ src/new.c\n@@ -0,0 +1 @@\n+c\n")
    doc = parse_unified_diff(text)
    assert doc.entries == (FileEntry("src/x.c", "src/x.c", MODIFIED), FileEntry(None, "src/new.c", ADDED))


def test_strip_components():
    text = "--- proj/src/x.c\n+++ proj/src/x.c\n@@ -1 +1 @@\n-a\n+b\n"
    assert parse_unified_diff(text, strip=1).entries[0].new_path == "src/x.c"
    assert parse_unified_diff(text, strip=0).entries[0].new_path == "proj/src/x.c"
    with pytest.raises(MalformedDiff):
        parse_unified_diff(text, strip=3)


def test_binary_change_counts_as_modified():
    text = "diff --git a/logo.png b/logo.png\nindex 1..2 100644\nBinary files a/logo.png and b/logo.png differ\n"
    assert parse_unified_diff(text).entries == (FileEntry("logo.png", "logo.png", MODIFIED),)


def test_quoted_paths():
    text = ('diff --git "a/dir/sp ace.c" "b/dir/sp ace.c"\n--- "a/dir/sp ace.c"\n+++ "b/dir/sp ace.c"\n'
            "@@ -1 +1 @@\n-a\n+b\n")
    assert parse_unified_diff(text).entries[0].new_path == "dir/sp ace.c"


def test_no_newline_marker_and_empty_context_lines():
    text = "--- a/f.c\n+++ b/f.c\n@@ -1,3 +1,3 @@\n a\n\n-b\n+c\n\\ No newline at end of file\n"
    assert parse_unified_diff(text).entries == (FileEntry("f.c", "f.c", MODIFIED),)


def test_empty_input_is_malformed():
    with pytest.raises(MalformedDiff) as exc:
        parse_unified_diff("")
    assert exc.value.line == 1


@pytest.mark.parametrize("text,line", [
    ("--- a/x\n@@ -1 +1 @@\n", 1),
    ("+++ b/x\n", 1),
    ("--- a/x\n+++ b/x\n@@ bogus @@\n", 3),
    ("--- a/x\n+++ b/x\n@@ -1,3 +1,3 @@\n a\n", 4),
    ("@@ -1 +1 @@\n-a\n+b\n", 1),
    ("just some prose\n", 1),
])
def test_malformed_diffs_report_lines(text, line):
    with pytest.raises(MalformedDiff) as exc:
        parse_unified_diff(text)
    assert exc.value.line == line


def test_file_lists():
    assert read_file_list("# comment\nsrc/a.c\n\n./src/b.c\n") == ["src/a.c", "src/b.c"]
    assert changeset_from_files("x", ["b", "a", "a"]).changed_files == ("a", "b")
    with pytest.raises(ValueError):
        ChangeSet("", ())


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------

segment = st.from_regex(r"[a-z0-9_]{1,6}", fullmatch=True)
paths = st.lists(segment, min_size=1, max_size=3).map(lambda xs: "/".join(xs) + ".c")


@st.composite
def diffs(draw):
    entries = draw(st.lists(st.tuples(st.sampled_from([MODIFIED, ADDED, DELETED, RENAMED]), paths, paths),
                            min_size=1, max_size=6))
    lines = []
    expected = []
    for status, a, b in entries:
        if status == RENAMED and a == b:
            status = MODIFIED
        old, new = {MODIFIED: (a, a), ADDED: (None, a), DELETED: (a, None), RENAMED: (a, b)}[status]
        expected.append(FileEntry(old, new, status))
        lines.append(f"diff --git a/{old or new} b/{new or old}")
        if status == ADDED:
            lines.append("new file mode 100644")
        elif status == DELETED:
            lines.append("deleted file mode 100644")
        elif status == RENAMED:
            lines += [f"rename from {old}", f"rename to {new}"]
        body = draw(st.lists(st.sampled_from(["-", "+", " "]), min_size=1, max_size=4))
        n_old = sum(1 for t in body if t in "- ")
        n_new = sum(1 for t in body if t in "+ ")
        lines.append(f"--- {'a/' + old if old else '/dev/null'}")
        lines.append(f"+++ {'b/' + new if new else '/dev/null'}")
        lines.append(f"@@ -1,{n_old} +1,{n_new} @@")
        lines += [t + "--- +++ @@ text" for t in body]
    return "\n".join(lines) + "\n", expected


@settings(max_examples=150, deadline=None)
@given(diffs())
def test_generated_diffs_parse_to_their_entries(case):
    text, expected = case
    doc = parse_unified_diff(text)
    assert list(doc.entries) == expected
    assert len(to_changeset(doc, "p").changed_files) <= 2 * len(doc.entries)


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=300))
def test_parser_is_total(text):
    try:
        doc = parse_unified_diff(text)
    except MalformedDiff as exc:
        assert exc.line >= 1
    else:
        assert doc.entries
