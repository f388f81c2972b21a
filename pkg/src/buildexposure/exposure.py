"""Exposure queries over a build dependency graph."""

from __future__ import annotations

import posixpath
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .bdg import COMPILES, LINKS, Bdg
from .conditions import (
    FALSE,
    TRUE,
    Condition,
    ConfigurationAssignment,
    VariantCount,
    conj,
    count_variants,
    disj,
    disj_all,
    evaluate,
    neg,
    satisfiable,
    simplify,
)
from .diagnostics import UnknownDeliverable

PATH_CAP = 100
REPORT_SCHEMA_VERSION = 1

YES = "yes"
NO = "no"
UNKNOWN = "unknown"


def normalize_path(path: str) -> str:
    path = path.replace("\\", "/").strip()
    norm = posixpath.normpath(path) if path else path
    while norm.startswith("./"):
        norm = norm[2:]
    return norm


@dataclass(frozen=True)
class ChangeSet:
    id: str
    changed_files: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("a change set needs a non-empty id")
        files = sorted({normalize_path(f) for f in self.changed_files if f.strip()})
        object.__setattr__(self, "changed_files", tuple(files))

    def to_json(self) -> dict:
        return {"id": self.id, "changed_files": list(self.changed_files)}


@dataclass(frozen=True)
class DependencyPath:
    nodes: tuple[str, ...]  # deliverable first, changed file last
    path_guard: Condition

    def to_json(self) -> dict:
        return {"nodes": list(self.nodes), "guard": self.path_guard.key}


@dataclass(frozen=True)
class PathEntry:
    deliverable: str
    paths: tuple[DependencyPath, ...]
    aggregate_guard: Condition
    truncated: bool = False

    def to_json(self) -> dict:
        return {"deliverable": self.deliverable, "aggregate_guard": self.aggregate_guard.key,
                "paths": [p.to_json() for p in self.paths], "truncated": self.truncated}


@dataclass(frozen=True)
class PathObject:
    changed_file: str
    entries: tuple[PathEntry, ...] = ()

    def entry(self, deliverable: str) -> PathEntry | None:
        return next((e for e in self.entries if e.deliverable == deliverable), None)

    def to_json(self) -> dict:
        return {"changed_file": self.changed_file, "entries": [e.to_json() for e in self.entries]}


@dataclass(frozen=True)
class DeliverableImpact:
    deliverable: str
    impacted: str
    guard: Condition
    variant_count: VariantCount

    def to_json(self) -> dict:
        return {"deliverable": self.deliverable, "impacted": self.impacted, "guard": self.guard.key,
                "variant_count": {"count": self.variant_count.count, "exact": self.variant_count.exact}}


@dataclass(frozen=True)
class ExposureReport:
    changeset: ChangeSet
    assignment: ConfigurationAssignment
    deliverables: tuple[DeliverableImpact, ...] = field(default_factory=tuple)

    def _ids(self, status: str) -> list[str]:
        return [d.deliverable for d in self.deliverables if d.impacted == status]

    @property
    def yes(self) -> list[str]:
        return self._ids(YES)

    @property
    def no(self) -> list[str]:
        return self._ids(NO)

    @property
    def unknown(self) -> list[str]:
        return self._ids(UNKNOWN)

    def to_json(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "query": {"changeset": self.changeset.to_json(), "assignment": self.assignment.to_json()},
            "yes": self.yes, "no": self.no, "unknown": self.unknown,
            "deliverables": [d.to_json() for d in self.deliverables],
        }


# ---------------------------------------------------------------------------
# Guards toward a changed file
# ---------------------------------------------------------------------------


def _tidy(c: Condition, bdg: Bdg) -> Condition:
    if len(c.atoms) > 12:
        return c
    return simplify(c, bdg.options, clause_cap=64)


def reach_guards(bdg: Bdg, node_id: str) -> dict[str, Condition]:
    """For each deliverable, the disjunction over all paths reaching *node_id*.

    Computed as a least fixpoint over incoming edges.  A walk that repeats a
    node conjoins a superset of some simple path's edges, so the fixpoint
    equals the disjunction over simple paths.
    """
    guards: dict[str, Condition] = {node_id: TRUE}
    updates: dict[str, int] = {}
    update_cap = 2 * len(bdg.nodes) + 2
    frontier = deque([node_id])
    while frontier:
        current = frontier.popleft()
        reach = guards[current]
        for edge in bdg.incoming.get(current, ()):
            if (current == node_id) != (edge.kind == COMPILES):
                continue
            old = guards.get(edge.from_id, FALSE)
            contribution = conj(edge.guard, reach)
            if satisfiable(conj(contribution, neg(old)), bdg.options) is False:
                continue
            new = _tidy(disj(old, contribution), bdg)
            if new == old or updates.get(edge.from_id, 0) >= update_cap:
                continue
            updates[edge.from_id] = updates.get(edge.from_id, 0) + 1
            guards[edge.from_id] = new
            frontier.append(edge.from_id)
    del guards[node_id]
    return {k: v for k, v in sorted(guards.items()) if bdg.nodes[k].is_deliverable and v != FALSE}


def _enumerate_paths(bdg: Bdg, node_id: str, path_cap: int) -> tuple[dict[str, list[DependencyPath]], set[str]]:
    """Shortest-first simple paths per deliverable, at most *path_cap* each."""
    found: dict[str, list[DependencyPath]] = {}
    truncated: set[str] = set()
    budget = path_cap * (len(bdg.nodes) + 1) * 4
    queue = deque([((node_id,), TRUE)])
    while queue:
        if budget <= 0:
            truncated.add("*")
            break
        budget -= 1
        path, guard = queue.popleft()
        head = path[0]
        for edge in bdg.incoming.get(head, ()):
            if (head == node_id) != (edge.kind == COMPILES):
                continue
            if edge.from_id in path:
                continue
            g = conj(edge.guard, guard)
            if satisfiable(g, bdg.options) is False:
                continue
            new_path = (edge.from_id, *path)
            bucket = found.setdefault(edge.from_id, [])
            if len(bucket) < path_cap:
                bucket.append(DependencyPath(new_path, g))
            else:
                truncated.add(edge.from_id)
            queue.append((new_path, g))
    return found, truncated


def _path_object(bdg: Bdg, changed_file: str, path_cap: int) -> PathObject:
    node_id = bdg.source_node(changed_file)
    if node_id is None:
        return PathObject(changed_file)
    guards = reach_guards(bdg, node_id)
    paths, truncated = _enumerate_paths(bdg, node_id, path_cap)
    entries = []
    for deliverable, guard in guards.items():
        listed = tuple(paths.get(deliverable, ()))
        entries.append(PathEntry(deliverable, listed, guard, deliverable in truncated or "*" in truncated))
    return PathObject(changed_file, tuple(entries))


def paths_for_change(bdg: Bdg, changes: ChangeSet, path_cap: int = PATH_CAP) -> list[PathObject]:
    if path_cap < 1:
        raise ValueError("path_cap must be >= 1")
    return [_path_object(bdg, f, path_cap) for f in changes.changed_files]


def _file_guards(bdg: Bdg, changes: ChangeSet) -> dict[str, list[Condition]]:
    per: dict[str, list[Condition]] = {}
    for f in changes.changed_files:
        node_id = bdg.source_node(f)
        if node_id is None:
            continue
        for deliverable, guard in reach_guards(bdg, node_id).items():
            per.setdefault(deliverable, []).append(guard)
    return per


def _condition(guards: Sequence[Condition], bdg: Bdg) -> Condition:
    c = disj_all(guards)
    if c in (TRUE, FALSE) or len(c.atoms) > 12:
        return c
    return simplify(c, bdg.options, clause_cap=64)


def propagation_conditions(bdg: Bdg, changes: ChangeSet, deliverable: str) -> Condition:
    _require_deliverable(bdg, deliverable)
    return _condition(_file_guards(bdg, changes).get(deliverable, []), bdg)


def _require_deliverable(bdg: Bdg, deliverable: str) -> None:
    node = bdg.nodes.get(deliverable)
    if node is None or not node.is_deliverable:
        raise UnknownDeliverable(f"no deliverable named {deliverable!r}")


def _status(guard: Condition, assignment: ConfigurationAssignment, bdg: Bdg) -> str:
    value = evaluate(guard, assignment, bdg.options)
    return UNKNOWN if value is None else (YES if value else NO)


def impacted_deliverables(bdg: Bdg, changes: ChangeSet,
                          assignment: ConfigurationAssignment | None = None) -> ExposureReport:
    assignment = assignment or ConfigurationAssignment()
    per = _file_guards(bdg, changes)
    rows = []
    for deliverable in bdg.deliverables:
        guard = _condition(per.get(deliverable, []), bdg)
        rows.append(DeliverableImpact(deliverable, _status(guard, assignment, bdg), guard,
                                      count_variants(guard, bdg.options)))
    return ExposureReport(changes, assignment, tuple(rows))


# ---------------------------------------------------------------------------
# Patch ranking and filtering
# ---------------------------------------------------------------------------

DELIVERABLE_COUNT = "deliverable_count"
VARIANT_COUNT = "variant_count"


@dataclass(frozen=True)
class RankedPatch:
    id: str
    score: int
    exact: bool = True

    def to_json(self) -> dict:
        return {"id": self.id, "score": self.score, "exact": self.exact}


def rank_patches(bdg: Bdg, patches: Sequence[ChangeSet], key: str = DELIVERABLE_COUNT,
                 assignment: ConfigurationAssignment | None = None) -> list[RankedPatch]:
    """Order patches by descending score; ties go to the smaller id.

    ``deliverable_count`` counts deliverables impacted under *assignment*
    (default: every option at its declared default).  ``variant_count``
    counts the configurations in which the patch reaches some deliverable,
    over the options any of the patches depends on, so scores compare.
    """
    if not patches:
        raise ValueError("rank_patches needs at least one patch")
    if key == DELIVERABLE_COUNT:
        assignment = assignment or ConfigurationAssignment({}, total=True)
        scored = [RankedPatch(p.id, len(impacted_deliverables(bdg, p, assignment).yes)) for p in patches]
    elif key == VARIANT_COUNT:
        reach = {p.id: _condition([g for gs in _file_guards(bdg, p).values() for g in gs], bdg) for p in patches}
        universe = sorted(set().union(*(c.option_names for c in reach.values())))
        scored = []
        for p in patches:
            vc = count_variants(reach[p.id], bdg.options, atom_cap=max(20, len(universe)), universe=universe)
            scored.append(RankedPatch(p.id, vc.count, vc.exact))
    else:
        raise ValueError(f"unknown ranking key {key!r}")
    return sorted(scored, key=lambda r: (-r.score, r.id))


def filter_patches(bdg: Bdg, patches: Iterable[ChangeSet], *, deliverable: str | None = None,
                   assignment: ConfigurationAssignment | None = None) -> list[str]:
    """Ids of the patches that reach *deliverable*, or any deliverable under *assignment*."""
    if (deliverable is None) == (assignment is None):
        raise ValueError("give exactly one of deliverable or assignment")
    patches = list(patches)
    if deliverable is not None:
        _require_deliverable(bdg, deliverable)
        return [p.id for p in patches
                if satisfiable(propagation_conditions(bdg, p, deliverable), bdg.options) is not False]
    total = ConfigurationAssignment(dict(assignment.values), total=True)
    return [p.id for p in patches if impacted_deliverables(bdg, p, total).yes]


def slice_consistent(bdg: Bdg, changes: ChangeSet, assignments: Iterable[Mapping[str, str]]) -> bool:
    """Whether per-configuration reports agree with the propagation conditions."""
    for values in assignments:
        a = ConfigurationAssignment(dict(values), total=True)
        report = impacted_deliverables(bdg, changes, a)
        expected = [d for d in bdg.deliverables
                    if evaluate(propagation_conditions(bdg, changes, d), a, bdg.options) is True]
        if report.yes != expected:
            return False
    return True

