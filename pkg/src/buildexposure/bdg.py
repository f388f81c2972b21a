"""The build dependency graph: construction from a trace, JSON persistence, DOT export."""

from __future__ import annotations

import graphlib
import io
import json
import os
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import BinaryIO, Iterable, Mapping, Union

from . import __version__
from . import diagnostics as diag
from .conditions import (
    FALSE,
    TRUE,
    Condition,
    ConfigOption,
    Opaque,
    conj,
    disj,
    disj_all,
    neg,
    parse_condition,
    satisfiable,
    simplify,
)
from .diagnostics import CorruptPayload, Diagnostic, SchemaVersionMismatch, SourceSpan
from .evaluator import (
    IMPORTED,
    AttachSources,
    DeclarationTrace,
    DeclareAlias,
    DeclareDeliverable,
    LinkDependency,
    SymbolicEnv,
)

SCHEMA_VERSION = 1

SOURCE_FILE = "source_file"
EXTERNAL_LIBRARY = "external_library"
COMPILES = "compiles"
LINKS = "links"

VARIANT_DEFINITION = "satisfying assignments of the options appearing in the guard"


def is_deliverable_kind(kind: str) -> bool:
    return kind not in (SOURCE_FILE, EXTERNAL_LIBRARY)


@dataclass(frozen=True)
class BdgNode:
    id: str
    kind: str  # executable | library(<sub>) | external_library | source_file
    display_name: str
    exists_guard: Condition = TRUE

    @property
    def is_deliverable(self) -> bool:
        return is_deliverable_kind(self.kind)


@dataclass(frozen=True)
class BdgEdge:
    from_id: str
    to_id: str
    kind: str
    guard: Condition
    spans: tuple[SourceSpan, ...] = ()


@dataclass
class Bdg:
    nodes: dict[str, BdgNode] = field(default_factory=dict)
    edges: list[BdgEdge] = field(default_factory=list)
    options: dict[str, ConfigOption] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for e in self.edges:
            if e.from_id not in self.nodes or e.to_id not in self.nodes:
                raise ValueError(f"edge {e.from_id} -> {e.to_id} references a missing node")

    @property
    def deliverables(self) -> list[str]:
        return sorted(n.id for n in self.nodes.values() if n.is_deliverable)

    @cached_property
    def incoming(self) -> dict[str, list[BdgEdge]]:
        out: dict[str, list[BdgEdge]] = {}
        for e in self.edges:
            out.setdefault(e.to_id, []).append(e)
        return out

    @cached_property
    def opaque_atoms(self) -> dict[str, Opaque]:
        return {k: Opaque(k, v) for k, v in self.metadata.get("opaque_atoms", {}).items()}

    def source_node(self, path: str) -> str | None:
        """Node id of the source file *path*, if the graph has one."""
        for candidate in (path, "file:" + path):
            node = self.nodes.get(candidate)
            if node is not None and node.kind == SOURCE_FILE:
                return candidate
        return None


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _merge(guards: Iterable[Condition], options) -> Condition:
    return simplify(disj_all(guards), options, clause_cap=64)


def build_bdg(trace: DeclarationTrace, env: SymbolicEnv | None = None, *,
              warnings: Iterable[Diagnostic] = (), root: str = "") -> tuple[Bdg, list[Diagnostic]]:
    """Materialize the graph; returns it with any construction warnings.

    *warnings* (from loading and evaluation) only feed the metadata summary.
    """
    env = env or SymbolicEnv()
    options = env.options
    found: list[Diagnostic] = []

    kinds: dict[str, str] = {}
    exists: dict[str, list[Condition]] = {}
    aliases: dict[str, str] = {}
    for ev in trace.events:
        if isinstance(ev, DeclareDeliverable):
            if ev.name in kinds and kinds[ev.name] != ev.kind:
                found.append(Diagnostic(diag.CONDITIONAL_TARGET_KIND,
                                        f"target {ev.name} is declared as both {kinds[ev.name]} and {ev.kind}",
                                        ev.span, subject=ev.name))
            kinds.setdefault(ev.name, ev.kind)
            exists.setdefault(ev.name, []).append(ev.guard)
        elif isinstance(ev, DeclareAlias):
            aliases[ev.name] = ev.target

    def resolve(name: str) -> str:
        seen = set()
        while name in aliases and name not in seen:
            seen.add(name)
            name = aliases[name]
        return name

    target_guard = {name: _merge(gs, options) for name, gs in exists.items()}
    nodes: dict[str, BdgNode] = {}
    for name in sorted(kinds):
        if kinds[name] == IMPORTED:
            nodes[f"external:{name}"] = BdgNode(f"external:{name}", EXTERNAL_LIBRARY, name, TRUE)
        else:
            nodes[name] = BdgNode(name, kinds[name], name, target_guard[name])

    pending: dict[tuple[str, str, str], tuple[list[Condition], list[SourceSpan]]] = {}

    def add_edge(src: str, dst: str, kind: str, guard: Condition, span: SourceSpan) -> None:
        guards, spans = pending.setdefault((src, dst, kind), ([], []))
        guards.append(guard)
        if span not in spans:
            spans.append(span)

    def owner(name: str, span: SourceSpan) -> str | None:
        real = resolve(name)
        if real not in kinds or kinds[real] == IMPORTED:
            found.append(Diagnostic(diag.DANGLING_REFERENCE,
                                    f"{name} is not a declared deliverable; dependency dropped",
                                    span, subject=name))
            return None
        return real

    source_ids: dict[str, str] = {}

    def source_id(path: str, span: SourceSpan) -> str:
        sid = source_ids.get(path)
        if sid is None:
            sid = path
            if path in nodes or path.startswith("external:"):
                sid = "file:" + path
                found.append(Diagnostic(diag.ID_COLLISION,
                                        f"source {path} collides with a target name; stored as {sid}",
                                        span, subject=path))
            source_ids[path] = sid
        return sid

    for ev in trace.events:
        if isinstance(ev, AttachSources):
            real = owner(ev.target, ev.span)
            if real is None:
                continue
            for guard, paths in ev.source_paths:
                g = conj(guard, target_guard[real])
                if satisfiable(g, options) is False:
                    found.append(Diagnostic(diag.UNSAT_REFERENCE,
                                            f"sources attached to {real} where it does not exist",
                                            ev.span, subject=real))
                    continue
                for path in paths:
                    add_edge(real, source_id(path, ev.span), COMPILES, g, ev.span)
        elif isinstance(ev, LinkDependency):
            real = owner(ev.from_target, ev.span)
            if real is None:
                continue
            base = conj(ev.guard, target_guard[real])
            dep = resolve(ev.to_target)
            if dep in kinds and kinds[dep] != IMPORTED:
                here = conj(base, target_guard[dep])
                elsewhere = conj(base, neg(target_guard[dep]))
                if satisfiable(here, options) is not False:
                    add_edge(real, dep, LINKS, here, ev.span)
                if satisfiable(elsewhere, options) is False:
                    continue
                base = elsewhere
            if satisfiable(base, options) is False:
                continue
            ext = f"external:{dep}"
            if ext not in nodes:
                nodes[ext] = BdgNode(ext, EXTERNAL_LIBRARY, dep, TRUE)
            add_edge(real, ext, LINKS, base, ev.span)

    edges = []
    compiled_under: dict[str, list[Condition]] = {}
    for (src, dst, kind), (guards, spans) in sorted(pending.items()):
        guard = _merge(guards, options)
        if guard == FALSE:
            continue
        edges.append(BdgEdge(src, dst, kind, guard, tuple(sorted(spans))))
        if kind == COMPILES:
            compiled_under.setdefault(dst, []).append(guard)
    for path, sid in source_ids.items():
        if sid in compiled_under:
            nodes[sid] = BdgNode(sid, SOURCE_FILE, path, _merge(compiled_under[sid], options))

    link_graph = graphlib.TopologicalSorter()
    for e in edges:
        if e.kind == LINKS:
            link_graph.add(e.from_id, e.to_id)
    try:
        link_graph.prepare()
    except graphlib.CycleError as exc:
        cycle = " -> ".join(exc.args[1])
        found.append(Diagnostic(diag.LINK_CYCLE, f"link cycle {cycle}", None, subject=cycle))

    all_warnings = [*warnings, *found]
    opaque = {}
    for node in nodes.values():
        opaque.update(_opaque_texts(node.exists_guard, env))
    for e in edges:
        opaque.update(_opaque_texts(e.guard, env))
    metadata = {
        "root": root,
        "analyzer_version": __version__,
        "warning_summary": diag.summarize(all_warnings),
        "unsupported_commands": diag.unsupported_constructs(all_warnings),
        "variant_definition": VARIANT_DEFINITION,
        "opaque_atoms": dict(sorted(opaque.items())),
    }
    bdg = Bdg(dict(sorted(nodes.items())), edges, dict(sorted(options.items())), metadata)
    return bdg, found


def _opaque_texts(c: Condition, env: SymbolicEnv) -> dict[str, str]:
    out = {}
    for a in c.atoms:
        if isinstance(a, Opaque):
            known = env.opaque_atoms.get(a.stable_id, a)
            out[a.stable_id] = known.source_text
    return out


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _option_to_json(o: ConfigOption) -> dict:
    return {
        "name": o.name, "domain": o.domain, "values": list(o.values), "default": o.default,
        "origin": o.origin,
        "default_guard": None if o.default_guard is None else o.default_guard.key,
    }


def bdg_to_json(bdg: Bdg) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "options": [_option_to_json(o) for _, o in sorted(bdg.options.items())],
        "nodes": [
            {"id": n.id, "kind": n.kind, "display_name": n.display_name, "exists_guard": n.exists_guard.key}
            for _, n in sorted(bdg.nodes.items())
        ],
        "edges": [
            {"from": e.from_id, "to": e.to_id, "kind": e.kind, "guard": e.guard.key,
             "spans": [s.to_json() for s in e.spans]}
            for e in bdg.edges
        ],
        "metadata": bdg.metadata,
    }


def dumps(bdg: Bdg) -> bytes:
    text = json.dumps(bdg_to_json(bdg), sort_keys=True, indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def save_bdg(bdg: Bdg, destination: Union[str, os.PathLike, BinaryIO]) -> int:
    """Write *bdg* as versioned JSON; returns the number of bytes written."""
    data = dumps(bdg)
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "wb") as fh:
            fh.write(data)
    else:
        destination.write(data)
    return len(data)


_KNOWN_KIND = re.compile(r"executable|source_file|external_library|library\([a-z]+\)")


def _need(obj: Mapping, key: str, kind: type | tuple[type, ...], where: str):
    if not isinstance(obj, Mapping) or key not in obj:
        raise CorruptPayload(f"{where}: missing {key!r}")
    value = obj[key]
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise CorruptPayload(f"{where}: {key!r} has the wrong type")
    return value


def loads(data: bytes | str) -> Bdg:
    try:
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        doc = json.loads(data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptPayload(f"not a JSON document: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorruptPayload("top level is not an object")
    version = _need(doc, "schema_version", int, "graph")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"schema version {version}; this build reads {SCHEMA_VERSION}")
    metadata = _need(doc, "metadata", dict, "graph")
    opaque_texts = metadata.get("opaque_atoms", {})
    if not isinstance(opaque_texts, dict):
        raise CorruptPayload("metadata.opaque_atoms is not an object")
    opaque = {k: Opaque(k, str(v)) for k, v in opaque_texts.items()}

    def cond(text, where: str) -> Condition:
        if not isinstance(text, str):
            raise CorruptPayload(f"{where}: condition is not a string")
        try:
            return parse_condition(text, opaque)
        except ValueError as exc:
            raise CorruptPayload(f"{where}: {exc}") from exc

    options: dict[str, ConfigOption] = {}
    for i, o in enumerate(_need(doc, "options", list, "graph")):
        where = f"options[{i}]"
        name = _need(o, "name", str, where)
        guard = o.get("default_guard")
        default = o.get("default")
        if default is not None and not isinstance(default, str):
            raise CorruptPayload(f"{where}: default is not a string")
        values = _need(o, "values", list, where)
        if not all(isinstance(v, str) for v in values):
            raise CorruptPayload(f"{where}: values must be strings")
        try:
            options[name] = ConfigOption(
                name, _need(o, "domain", str, where), tuple(values), default,
                _need(o, "origin", str, where), None if guard is None else cond(guard, where))
        except ValueError as exc:
            raise CorruptPayload(f"{where}: {exc}") from exc
    nodes: dict[str, BdgNode] = {}
    for i, n in enumerate(_need(doc, "nodes", list, "graph")):
        where = f"nodes[{i}]"
        node = BdgNode(_need(n, "id", str, where), _need(n, "kind", str, where),
                       _need(n, "display_name", str, where), cond(_need(n, "exists_guard", str, where), where))
        if not _KNOWN_KIND.fullmatch(node.kind):
            raise CorruptPayload(f"{where}: unknown node kind {node.kind!r}")
        if node.id in nodes:
            raise CorruptPayload(f"{where}: duplicate node id {node.id!r}")
        nodes[node.id] = node
    edges = []
    for i, e in enumerate(_need(doc, "edges", list, "graph")):
        where = f"edges[{i}]"
        spans = []
        for s in _need(e, "spans", list, where):
            try:
                spans.append(SourceSpan.from_json(s))
            except (KeyError, TypeError, ValueError) as exc:
                raise CorruptPayload(f"{where}: bad span") from exc
        kind = _need(e, "kind", str, where)
        if kind not in (COMPILES, LINKS):
            raise CorruptPayload(f"{where}: unknown edge kind {kind!r}")
        edges.append(BdgEdge(_need(e, "from", str, where), _need(e, "to", str, where), kind,
                             cond(_need(e, "guard", str, where), where), tuple(spans)))
    try:
        return Bdg(nodes, edges, options, metadata)
    except ValueError as exc:
        raise CorruptPayload(str(exc)) from exc


def load_bdg(source: Union[str, os.PathLike, BinaryIO, bytes]) -> Bdg:
    if isinstance(source, bytes):
        return loads(source)
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return loads(fh.read())
    return loads(source.read())


# ---------------------------------------------------------------------------
# DOT
# ---------------------------------------------------------------------------


def _dot_id(text: str) -> str:
    return json.dumps(text, ensure_ascii=False)


_SHAPES = {SOURCE_FILE: "note", EXTERNAL_LIBRARY: "ellipse", "executable": "box"}


def export_dot(bdg: Bdg) -> str:
    out = io.StringIO()
    out.write("digraph bdg {\n")
    for node_id, node in sorted(bdg.nodes.items()):
        shape = _SHAPES.get(node.kind, "box3d")
        attrs = f"label={_dot_id(node.display_name)}, shape={shape}"
        if node.kind == EXTERNAL_LIBRARY:
            attrs += ", style=dashed"
        out.write(f"  {_dot_id(node_id)} [{attrs}];\n")
    for e in sorted(bdg.edges, key=lambda e: (e.from_id, e.to_id, e.kind)):
        attrs = []
        if e.guard != TRUE:
            attrs.append(f"label={_dot_id(e.guard.key)}")
        if e.kind == LINKS:
            attrs.append("style=dashed")
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        out.write(f"  {_dot_id(e.from_id)} -> {_dot_id(e.to_id)}{suffix};\n")
    out.write("}\n")
    return out.getvalue()
