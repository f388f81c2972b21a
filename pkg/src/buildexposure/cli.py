"""Command-line interface: ``buildexposure <subcommand> ...``.

JSON documents go to standard output; warnings and errors go to standard
error.  Exit codes: 0 success, 1 warnings under ``--strict``, 2 usage
error, 3 input error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from dataclasses import dataclass, field
from typing import Sequence, TextIO

from . import __version__
from .bdg import Bdg, build_bdg, dumps, export_dot, load_bdg
from .changes import changeset_from_files, parse_unified_diff, read_file_list, to_changeset
from .conditions import OPAQUE_DOMAIN, ORIGIN_CACHE, ConfigOption, ConfigurationAssignment
from .diagnostics import (
    UNKNOWN_OPTION,
    AnalyzerError,
    CMakeSyntaxError,
    CorruptPayload,
    Diagnostic,
    EmptyGroundTruth,
    MalformedDiff,
    MissingRootListfile,
    NotAPermutation,
    SchemaVersionMismatch,
    TooShort,
    UnknownDeliverable,
    summarize,
    unsupported_constructs,
)
from .evaluator import InvariantViolation, evaluate_project
from .exposure import (
    DELIVERABLE_COUNT,
    PATH_CAP,
    REPORT_SCHEMA_VERSION,
    VARIANT_COUNT,
    ChangeSet,
    filter_patches,
    impacted_deliverables,
    paths_for_change,
    rank_patches,
)
from .frontend import load_project
from .scoring import read_ground_truth, score_list, score_ranking

EXIT_OK = 0
EXIT_WARNINGS = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_INTERNAL = 4


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


@dataclass
class Output:
    """Where a command's results and diagnostics go."""

    stdout: TextIO
    stderr: TextIO
    fmt: str = "json"
    verbose: int = 0
    warnings: list[Diagnostic] = field(default_factory=list)

    def json(self, doc: object) -> None:
        self.stdout.write(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n")

    def human(self, text: str) -> None:
        self.stdout.write(text if text.endswith("\n") else text + "\n")

    def note(self, text: str) -> None:
        self.stderr.write(text + "\n")

    def warn(self, warnings: Sequence[Diagnostic], *, detail: bool = False) -> None:
        self.warnings.extend(warnings)
        if detail or self.verbose:
            for w in warnings:
                self.note(str(w))


# ---------------------------------------------------------------------------
# Shared input handling
# ---------------------------------------------------------------------------


def parse_defines(pairs: Sequence[str] | None) -> dict[str, str]:
    values: dict[str, str] = {}
    for pair in pairs or ():
        name, sep, value = pair.partition("=")
        # CMake also accepts NAME:TYPE=VALUE
        name = name.split(":", 1)[0].strip()
        if not sep or not name:
            raise UsageError(f"-D expects NAME=VALUE, got {pair!r}")
        values[name] = value
    return values


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8", errors="surrogateescape") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def analyze_directory(project_dir: str, defines: dict[str, str] | None = None
                      ) -> tuple[Bdg, list[Diagnostic]]:
    """Parse, evaluate and build the graph for the project rooted at *project_dir*."""
    project = load_project(project_dir)
    overrides = ConfigurationAssignment(dict(defines or {}))
    env, trace, warnings = evaluate_project(project, overrides)
    name = os.path.basename(os.path.abspath(project_dir))
    bdg, found = build_bdg(trace, env, warnings=warnings, root=name)
    return bdg, list(warnings) + found


def _graph(args: argparse.Namespace, out: Output) -> Bdg:
    if args.bdg:
        if args.bdg != "-" and not os.path.isfile(args.bdg):
            raise InputError(f"no such graph file: {args.bdg}")
        return load_bdg(sys.stdin.buffer.read() if args.bdg == "-" else args.bdg)
    if args.project:
        bdg, warnings = analyze_directory(args.project)
        out.warn(warnings)
        return bdg
    raise UsageError("give --bdg FILE or --project DIR")


def _register_defines(bdg: Bdg, defines: dict[str, str], out: Output) -> None:
    for name in sorted(defines):
        if name not in bdg.options:
            out.warn([Diagnostic(UNKNOWN_OPTION, f"-D {name} does not match any option in the graph",
                                 subject=name)], detail=True)
            bdg.options[name] = ConfigOption(name, OPAQUE_DOMAIN, origin=ORIGIN_CACHE)


def _changeset(args: argparse.Namespace) -> ChangeSet:
    files: list[str] = []
    sources = 0
    if args.files:
        files.extend(args.files)
        sources += 1
    if args.files_from:
        files.extend(read_file_list(_read_text(args.files_from)))
        sources += 1
    if args.diff:
        files.extend(to_changeset(parse_unified_diff(_read_text(args.diff), args.strip), args.id).changed_files)
        sources += 1
    if not sources:
        raise UsageError("give changed files with --files, --files-from or --diff")
    return changeset_from_files(args.id, files)


def _patches(args: argparse.Namespace) -> list[ChangeSet]:
    patches: list[ChangeSet] = []
    seen: set[str] = set()
    for spec in args.patch or ():
        pid, sep, path = spec.partition("=")
        if not sep or not pid or not path:
            raise UsageError(f"--patch expects ID=DIFF_FILE, got {spec!r}")
        patches.append(to_changeset(parse_unified_diff(_read_text(path), args.strip), pid))
    for spec in args.patch_files or ():
        pid, sep, listed = spec.partition("=")
        if not sep or not pid:
            raise UsageError(f"--patch-files expects ID=FILE[,FILE...], got {spec!r}")
        patches.append(changeset_from_files(pid, [f for f in listed.split(",") if f.strip()]))
    for p in patches:
        if p.id in seen:
            raise UsageError(f"patch id {p.id!r} given twice")
        seen.add(p.id)
    return patches


def _assignment_text(values: dict[str, str]) -> str:
    return ", ".join(f"{k}={v}" for k, v in sorted(values.items())) or "defaults"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_analyze(args: argparse.Namespace, out: Output) -> None:
    defines = parse_defines(args.define)
    bdg, warnings = analyze_directory(args.project_dir, defines)
    out.warn(warnings)
    payload = dumps(bdg)
    if args.out:
        try:
            with open(args.out, "wb") as fh:
                fh.write(payload)
        except OSError as exc:
            raise InputError(f"cannot write {args.out}: {exc.strerror}") from None
    summary = {
        "graph": args.out,
        "nodes": len(bdg.nodes),
        "edges": len(bdg.edges),
        "deliverables": len(bdg.deliverables),
        "options": len(bdg.options),
        "warnings": summarize(warnings),
        "unsupported_constructs": unsupported_constructs(warnings),
    }
    counts = ", ".join(f"{k}={v}" for k, v in summary["warnings"].items()) or "none"
    out.note(f"warnings: {counts}")
    if summary["unsupported_constructs"]:
        listed = ", ".join(f"{k} ({v})" for k, v in summary["unsupported_constructs"].items())
        out.note(f"unsupported constructs: {listed}")
    if out.fmt == "human":
        lines = [f"{bdg.metadata.get('root') or args.project_dir}: {summary['deliverables']} deliverables, "
                 f"{summary['nodes']} nodes, {summary['edges']} edges, {summary['options']} options"]
        if args.out:
            lines.append(f"graph written to {args.out}")
        out.human("\n".join(lines))
    elif args.out:
        out.json(summary)
    else:
        out.stdout.write(payload.decode("utf-8"))


def _impact_all_configs(bdg: Bdg, changes: ChangeSet, out: Output) -> None:
    report = impacted_deliverables(bdg, changes)
    per_file = paths_for_change(bdg, changes)
    rows = []
    for d in report.deliverables:
        if d.guard.key == "FALSE":
            continue
        files = [{"changed_file": p.changed_file, "condition": e.aggregate_guard.key}
                 for p in per_file for e in p.entries if e.deliverable == d.deliverable]
        rows.append({"deliverable": d.deliverable, "condition": d.guard.key, "files": files,
                     "variant_count": {"count": d.variant_count.count, "exact": d.variant_count.exact}})
    if out.fmt == "json":
        out.json({"schema_version": REPORT_SCHEMA_VERSION, "query": {"changeset": changes.to_json(),
                                                                      "all_configs": True},
                  "deliverables": rows})
        return
    if not rows:
        out.human("no deliverable is reached by the change in any configuration")
        return
    lines = []
    for row in rows:
        count = row["variant_count"]
        approx = "" if count["exact"] else " (approximate)"
        noun = "variant" if count["count"] == 1 else "variants"
        lines.append(f"{row['deliverable']}  [{count['count']} {noun}{approx}]")
        for f in row["files"]:
            lines.append(f"  {f['changed_file']}: {f['condition']}")
    out.human("\n".join(lines))


def cmd_impact(args: argparse.Namespace, out: Output) -> None:
    bdg = _graph(args, out)
    changes = _changeset(args)
    defines = parse_defines(args.define)
    _register_defines(bdg, defines, out)
    if args.all_configs:
        if defines:
            raise UsageError("--all-configs does not take -D assignments")
        _impact_all_configs(bdg, changes, out)
        return
    assignment = ConfigurationAssignment(defines, total=not args.partial)
    report = impacted_deliverables(bdg, changes, assignment)
    if out.fmt == "json":
        out.json(report.to_json())
        return
    per_file = {p.changed_file: p for p in paths_for_change(bdg, changes)}
    lines = [f"configuration: {_assignment_text(defines)}{' (partial)' if args.partial else ''}"]
    for status, ids in (("impacted", report.yes), ("possibly impacted", report.unknown)):
        for d in ids:
            lines.append(f"{d}  [{status}]")
            for path, obj in per_file.items():
                entry = obj.entry(d)
                if entry is not None:
                    lines.append(f"  {path}: {entry.aggregate_guard.key}")
    if len(lines) == 1:
        lines.append("no deliverable is impacted")
    out.human("\n".join(lines))


def cmd_paths(args: argparse.Namespace, out: Output) -> None:
    if args.path_cap < 1:
        raise UsageError("--path-cap must be at least 1")
    bdg = _graph(args, out)
    changes = _changeset(args)
    objects = paths_for_change(bdg, changes, args.path_cap)
    if out.fmt == "json":
        out.json({"schema_version": REPORT_SCHEMA_VERSION, "changeset": changes.to_json(),
                  "path_objects": [o.to_json() for o in objects]})
        return
    lines = []
    for obj in objects:
        lines.append(obj.changed_file)
        if not obj.entries:
            lines.append("  (not built by any deliverable)")
        for entry in obj.entries:
            more = "  (truncated)" if entry.truncated else ""
            lines.append(f"  {entry.deliverable}: {entry.aggregate_guard.key}{more}")
            for path in entry.paths:
                lines.append(f"    {' -> '.join(path.nodes)}  [{path.path_guard.key}]")
    out.human("\n".join(lines))


def cmd_rank(args: argparse.Namespace, out: Output) -> None:
    bdg = _graph(args, out)
    patches = _patches(args)
    if not patches:
        raise UsageError("rank needs at least one --patch or --patch-files")
    defines = parse_defines(args.define)
    _register_defines(bdg, defines, out)
    if args.by == "variants" and defines:
        raise UsageError("-D assignments only apply when ranking by deliverables")
    key = VARIANT_COUNT if args.by == "variants" else DELIVERABLE_COUNT
    assignment = ConfigurationAssignment(defines, total=True) if key == DELIVERABLE_COUNT else None
    ranked = rank_patches(bdg, patches, key, assignment)
    if out.fmt == "json":
        out.json({"key": key, "assignment": assignment.to_json() if assignment else None,
                  "ranking": [r.to_json() for r in ranked]})
        return
    unit = "deliverables" if key == DELIVERABLE_COUNT else "variants"
    out.human("\n".join(f"{i}. {r.id}  {r.score} {unit}{'' if r.exact else ' (approximate)'}"
                        for i, r in enumerate(ranked, 1)))


def cmd_filter(args: argparse.Namespace, out: Output) -> None:
    bdg = _graph(args, out)
    patches = _patches(args)
    defines = parse_defines(args.define)
    if (args.deliverable is None) == (not defines):
        raise UsageError("give exactly one of --deliverable or -D assignments")
    if args.deliverable is not None:
        kept = filter_patches(bdg, patches, deliverable=args.deliverable)
        target: dict = {"deliverable": args.deliverable}
    else:
        _register_defines(bdg, defines, out)
        kept = filter_patches(bdg, patches, assignment=ConfigurationAssignment(defines, total=True))
        target = {"assignment": dict(sorted(defines.items()))}
    if out.fmt == "json":
        out.json({"target": target, "patches": kept})
    else:
        out.human("\n".join(kept) if kept else "no matching patches")


def cmd_score(args: argparse.Namespace, out: Output) -> None:
    try:
        answer = read_ground_truth(_read_text(args.answer))
        truth = read_ground_truth(_read_text(args.truth))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.mode == "list":
        score = score_list(answer, truth)
        if out.fmt == "json":
            out.json({"mode": "list", **score.to_json()})
        else:
            flag = " (empty answer)" if score.empty_estimate else ""
            out.human(f"precision {score.precision:.4f}{flag}\nrecall    {score.recall:.4f}\n"
                      f"f-measure {score.f_measure:.4f}")
    else:
        score = score_ranking(answer, truth)
        if out.fmt == "json":
            out.json({"mode": "rank", **score.to_json()})
        else:
            out.human(f"kendall tau distance {score.tau_distance:.4f} "
                      f"({score.discordant_pairs} of {score.total_pairs} pairs discordant)")


def cmd_export_dot(args: argparse.Namespace, out: Output) -> None:
    text = export_dot(_graph(args, out))
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise InputError(f"cannot write {args.out}: {exc.strerror}") from None
    else:
        out.stdout.write(text)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "human"), default="json")
    p.add_argument("--strict", action="store_true", help="exit with status 1 when there are warnings")
    p.add_argument("-v", "--verbose", action="count", default=0, help="print every warning")


def _graph_source(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--bdg", metavar="FILE", help="graph written by 'analyze --out' ('-' for stdin)")
    group.add_argument("--project", metavar="DIR", help="analyze this project first")


def _change_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--files", nargs="+", metavar="PATH", help="changed paths relative to the project root")
    p.add_argument("--files-from", metavar="FILE", help="newline-separated changed paths ('-' for stdin)")
    p.add_argument("--diff", metavar="FILE", help="unified diff ('-' for stdin)")
    p.add_argument("--id", default="change", help="change set id used in reports")


def _strip(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strip", type=int, metavar="N", default=None,
                   help="strip N leading path components from diff paths (default: a/ and b/ prefixes)")


def _defines(p: argparse.ArgumentParser, help: str) -> None:
    p.add_argument("-D", dest="define", action="append", metavar="NAME=VALUE", help=help)


def _patch_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--patch", action="append", metavar="ID=DIFF", help="a patch given as a unified diff")
    p.add_argument("--patch-files", action="append", metavar="ID=F1,F2",
                   help="a patch given as a comma-separated file list")
    _strip(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="buildexposure",
        description="Which deliverables of a CMake project does a change reach, and under which configurations?")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("analyze", help="build the dependency graph of a project")
    p.add_argument("project_dir")
    p.add_argument("--out", metavar="FILE", help="write the graph here (default: print it)")
    _defines(p, "fix an option's value (repeatable)")
    _common(p)
    p.set_defaults(run=cmd_analyze)

    p = sub.add_parser("impact", help="list the deliverables a change reaches")
    _graph_source(p)
    _change_source(p)
    _strip(p)
    _defines(p, "configuration to evaluate; unassigned options take their defaults")
    p.add_argument("--partial", action="store_true", help="leave unassigned options unknown")
    p.add_argument("--all-configs", action="store_true",
                   help="report the propagation condition of every deliverable instead")
    _common(p)
    p.set_defaults(run=cmd_impact)

    p = sub.add_parser("paths", help="dependency paths from deliverables to changed files")
    _graph_source(p)
    _change_source(p)
    _strip(p)
    p.add_argument("--path-cap", type=int, default=PATH_CAP, help="paths listed per deliverable")
    _common(p)
    p.set_defaults(run=cmd_paths)

    p = sub.add_parser("rank", help="order patches by how much they reach")
    _graph_source(p)
    _patch_source(p)
    p.add_argument("--by", choices=("deliverables", "variants"), default="deliverables")
    _defines(p, "configuration for --by deliverables")
    _common(p)
    p.set_defaults(run=cmd_rank)

    p = sub.add_parser("filter", help="keep the patches that reach a deliverable or configuration")
    _graph_source(p)
    _patch_source(p)
    p.add_argument("--deliverable", metavar="ID")
    _defines(p, "keep patches impacting some deliverable in this configuration")
    _common(p)
    p.set_defaults(run=cmd_filter)

    p = sub.add_parser("score", help="score an answer file against ground truth")
    p.add_argument("--mode", choices=("list", "rank"), required=True)
    p.add_argument("--answer", required=True, metavar="FILE")
    p.add_argument("--truth", required=True, metavar="FILE")
    _common(p)
    p.set_defaults(run=cmd_score)

    p = sub.add_parser("export-dot", help="render the graph in Graphviz DOT")
    _graph_source(p)
    p.add_argument("--out", metavar="FILE", help="write here instead of standard output")
    _common(p)
    p.set_defaults(run=cmd_export_dot)
    return parser


_INPUT_ERRORS = (InputError, MissingRootListfile, CMakeSyntaxError, MalformedDiff, UnknownDeliverable,
                 CorruptPayload, SchemaVersionMismatch, EmptyGroundTruth, NotAPermutation, TooShort)


def main(argv: Sequence[str] | None = None, stdout: TextIO | None = None,
         stderr: TextIO | None = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    out = Output(stdout, stderr, args.format, args.verbose)
    try:
        args.run(args, out)
    except UsageError as exc:
        out.note(f"{parser.prog} {args.command}: error: {exc}")
        return EXIT_USAGE
    except _INPUT_ERRORS as exc:
        out.note(f"error: {exc}")
        return EXIT_INPUT
    except (InvariantViolation, AnalyzerError) as exc:
        out.note(f"internal error: {exc}")
        return EXIT_INTERNAL
    except Exception:  # noqa: BLE001 - any crash maps to the internal-error status
        out.note("internal error:\n" + traceback.format_exc())
        return EXIT_INTERNAL
    if args.strict and out.warnings:
        out.note(f"{len(out.warnings)} warning(s) with --strict")
        return EXIT_WARNINGS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
