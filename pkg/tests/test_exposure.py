from __future__ import annotations

import tempfile
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import projgen
from buildexposure.cli import analyze_directory
from buildexposure.conditions import (
    TRUE,
    ConfigurationAssignment,
    Truthy,
    count_variants,
    disj_all,
    equivalent,
    evaluate,
)
from buildexposure.diagnostics import UnknownDeliverable
from buildexposure.exposure import (
    DELIVERABLE_COUNT,
    NO,
    UNKNOWN,
    VARIANT_COUNT,
    YES,
    ChangeSet,
    filter_patches,
    impacted_deliverables,
    paths_for_change,
    propagation_conditions,
    rank_patches,
    slice_consistent,
)
from conftest import FIG1

CURL = "src/qcommon/dl_main_curl.c"
CLIENT = "src/client/cl_main.c"


def on(**values):
    return ConfigurationAssignment(values, total=True)


@pytest.fixture(scope="module")
def fig1():
    return analyze_directory(str(FIG1))[0]


@pytest.fixture(scope="module")
def layered():
    """Three deliverables sharing libraries, with one optional dependency."""
    text = """\
option(GUI "" ON)
option(NET "" OFF)
add_library(base STATIC base.c util.c)
add_library(net STATIC net.c)
target_link_libraries(net PRIVATE base)
add_executable(cli cli.c)
target_link_libraries(cli PRIVATE base)
if(NET)
  target_link_libraries(cli PRIVATE net)
endif()
if(GUI)
  add_executable(gui gui.c)
  target_link_libraries(gui PRIVATE net base)
endif()
add_executable(server server.c)
target_link_libraries(server PRIVATE net)
"""
    root = Path(tempfile.mkdtemp())
    (root / "CMakeLists.txt").write_text(text)
    return analyze_directory(str(root))[0]


def test_fig1_impact_per_configuration(fig1):
    curl = ChangeSet("c", (CURL,))
    assert impacted_deliverables(fig1, curl, on(FEATURE_CURL="ON")).yes == ["etl"]
    report = impacted_deliverables(fig1, curl, on(FEATURE_CURL="OFF"))
    assert report.yes == [] and report.no == ["etl"]


def test_fig1_propagation_conditions(fig1):
    assert propagation_conditions(fig1, ChangeSet("c", (CURL,)), "etl") == Truthy("FEATURE_CURL")
    assert propagation_conditions(fig1, ChangeSet("c", (CLIENT,)), "etl") == TRUE


def test_partial_assignment_gives_unknown(fig1):
    report = impacted_deliverables(fig1, ChangeSet("c", (CURL,)))
    assert report.unknown == ["etl"]
    assert report.deliverables[0].impacted == UNKNOWN


def test_unknown_deliverable(fig1):
    with pytest.raises(UnknownDeliverable):
        propagation_conditions(fig1, ChangeSet("c", (CURL,)), "nope")
    with pytest.raises(UnknownDeliverable):
        propagation_conditions(fig1, ChangeSet("c", (CURL,)), CURL)


def test_unknown_file_has_no_entries(fig1):
    (obj,) = paths_for_change(fig1, ChangeSet("c", ("README.md",)))
    assert obj.changed_file == "README.md" and obj.entries == ()
    assert impacted_deliverables(fig1, ChangeSet("c", ("README.md",)), on()).yes == []


def test_two_files_two_path_objects(fig1):
    objs = paths_for_change(fig1, ChangeSet("c", (CURL, CLIENT)))
    assert [o.changed_file for o in objs] == [CLIENT, CURL]
    assert objs[1].entry("etl").paths[0].nodes == ("etl", CURL)


def test_transitive_impact_through_libraries(layered):
    util = ChangeSet("u", ("util.c",))
    assert impacted_deliverables(layered, util, on()).yes == ["base", "cli", "gui", "net", "server"]
    net = ChangeSet("n", ("net.c",))
    assert propagation_conditions(layered, net, "cli") == Truthy("NET")
    assert propagation_conditions(layered, net, "gui") == Truthy("GUI")
    assert propagation_conditions(layered, net, "server") == TRUE
    assert impacted_deliverables(layered, net, on(GUI="OFF")).yes == ["net", "server"]


def test_paths_are_listed_shortest_first(layered):
    (obj,) = paths_for_change(layered, ChangeSet("u", ("util.c",)))
    gui = obj.entry("gui")
    lengths = [len(p.nodes) for p in gui.paths]
    assert lengths == sorted(lengths)
    assert [p.nodes for p in gui.paths] == [("gui", "base", "util.c"), ("gui", "net", "base", "util.c")]
    assert not gui.truncated


def test_path_cap_truncates(layered):
    (obj,) = paths_for_change(layered, ChangeSet("u", ("util.c",)), path_cap=1)
    gui = obj.entry("gui")
    assert len(gui.paths) == 1 and gui.truncated
    assert gui.aggregate_guard == Truthy("GUI")
    with pytest.raises(ValueError):
        paths_for_change(layered, ChangeSet("u", ("util.c",)), path_cap=0)


def test_path_guard_identity(layered):
    for f in ("util.c", "net.c", "base.c", "gui.c"):
        for obj in paths_for_change(layered, ChangeSet("x", (f,))):
            for entry in obj.entries:
                listed = disj_all(p.path_guard for p in entry.paths)
                assert equivalent(listed, entry.aggregate_guard, layered.options) is True


def test_rank_by_deliverable_count(layered):
    patches = [ChangeSet("p-one", ("server.c",)), ChangeSet("p-three", ("net.c",)),
               ChangeSet("p-five", ("base.c",))]
    ranked = rank_patches(layered, patches, DELIVERABLE_COUNT, on(GUI="ON", NET="ON"))
    assert [(r.id, r.score) for r in ranked] == [("p-five", 5), ("p-three", 4), ("p-one", 1)]


def test_rank_ties_break_by_id(fig1):
    patches = [ChangeSet("b", (CLIENT,)), ChangeSet("a", ("src/client/cl_input.c",))]
    assert [r.id for r in rank_patches(fig1, patches)] == ["a", "b"]
    with pytest.raises(ValueError):
        rank_patches(fig1, [])


def test_rank_by_variant_count_matches_enumeration(layered):
    patches = [ChangeSet("n", ("net.c",)), ChangeSet("g", ("gui.c",)), ChangeSet("s", ("server.c",))]
    ranked = rank_patches(layered, patches, VARIANT_COUNT)
    # net.c reaches server unconditionally, so NET never matters and the
    # counting universe is {GUI}
    expected = {}
    for p in patches:
        expected[p.id] = sum(1 for gui in ("ON", "OFF")
                             if impacted_deliverables(layered, p, on(GUI=gui, NET="OFF")).yes)
    assert {r.id: r.score for r in ranked} == expected == {"n": 2, "g": 1, "s": 2}
    assert [r.id for r in ranked] == ["n", "s", "g"]
    assert all(r.exact for r in ranked)


def test_filter_by_deliverable_and_variant(fig1):
    patches = [ChangeSet("curl", (CURL,)), ChangeSet("client", (CLIENT,)), ChangeSet("doc", ("README",))]
    assert filter_patches(fig1, patches, deliverable="etl") == ["curl", "client"]
    assert filter_patches(fig1, patches, assignment=ConfigurationAssignment({"FEATURE_CURL": "OFF"})) == ["client"]
    assert filter_patches(fig1, [], deliverable="etl") == []
    with pytest.raises(UnknownDeliverable):
        filter_patches(fig1, patches, deliverable="nope")
    with pytest.raises(ValueError):
        filter_patches(fig1, patches)


def test_report_json_shape(fig1):
    doc = impacted_deliverables(fig1, ChangeSet("c", (CURL,)), on(FEATURE_CURL="ON")).to_json()
    assert doc["yes"] == ["etl"] and doc["no"] == [] and doc["unknown"] == []
    assert doc["deliverables"][0]["guard"] == "FEATURE_CURL"
    assert doc["query"]["changeset"] == {"id": "c", "changed_files": [CURL]}


# ---------------------------------------------------------------------------
# Properties over generated projects
# ---------------------------------------------------------------------------

_GRAPHS: dict[int, tuple] = {}


def generated(seed: int):
    if seed not in _GRAPHS:
        project = projgen.generate(seed, max_options=4, max_commands=30)
        root = projgen.write_project(project, Path(tempfile.mkdtemp()))
        _GRAPHS[seed] = (project, analyze_directory(str(root))[0])
    return _GRAPHS[seed]


def configs(project):
    for config in project.configurations():
        yield {k: "ON" if v else "OFF" for k, v in config.items()}


seeds = st.integers(0, 40)


@settings(max_examples=40, deadline=None)
@given(seeds, st.data())
def test_slice_consistency(seed, data):
    project, bdg = generated(seed)
    files = data.draw(st.lists(st.sampled_from(project.files), max_size=3))
    assert slice_consistent(bdg, ChangeSet("p", tuple(files)), configs(project))


@settings(max_examples=40, deadline=None)
@given(seeds, st.data())
def test_monotonicity(seed, data):
    project, bdg = generated(seed)
    small = data.draw(st.lists(st.sampled_from(project.files), max_size=3))
    extra = data.draw(st.lists(st.sampled_from(project.files), max_size=3))
    for values in configs(project):
        a = impacted_deliverables(bdg, ChangeSet("a", tuple(small)), on(**values)).yes
        b = impacted_deliverables(bdg, ChangeSet("b", tuple(small + extra)), on(**values)).yes
        assert set(a) <= set(b)


@settings(max_examples=40, deadline=None)
@given(seeds, st.data())
def test_path_guard_identity_on_generated(seed, data):
    project, bdg = generated(seed)
    f = data.draw(st.sampled_from(project.files))
    for obj in paths_for_change(bdg, ChangeSet("p", (f,))):
        for entry in obj.entries:
            assert not entry.truncated
            listed = disj_all(p.path_guard for p in entry.paths)
            assert equivalent(listed, entry.aggregate_guard, bdg.options) is True


@st.composite
def patch_sets(draw, files):
    n = draw(st.integers(1, 4))
    return [ChangeSet(f"p{i}", tuple(draw(st.lists(st.sampled_from(files), max_size=3)))) for i in range(n)]


@settings(max_examples=40, deadline=None)
@given(seeds, st.data(), st.sampled_from([DELIVERABLE_COUNT, VARIANT_COUNT]))
def test_ranking_is_a_sorted_permutation(seed, data, key):
    project, bdg = generated(seed)
    patches = data.draw(patch_sets(project.files))
    ranked = rank_patches(bdg, patches, key)
    assert sorted(r.id for r in ranked) == sorted(p.id for p in patches)
    scores = [r.score for r in ranked]
    assert scores == sorted(scores, reverse=True)
    for a, b in zip(ranked, ranked[1:]):
        if a.score == b.score:
            assert a.id < b.id


@settings(max_examples=40, deadline=None)
@given(seeds, st.data())
def test_filter_by_deliverable_matches_union_over_configurations(seed, data):
    project, bdg = generated(seed)
    if not bdg.deliverables:
        return
    patches = data.draw(patch_sets(project.files))
    d = data.draw(st.sampled_from(bdg.deliverables))
    expected = [p.id for p in patches
                if any(d in impacted_deliverables(bdg, p, on(**values)).yes for values in configs(project))]
    assert filter_patches(bdg, patches, deliverable=d) == expected


@settings(max_examples=30, deadline=None)
@given(seeds, st.data())
def test_variant_counts_match_enumeration(seed, data):
    project, bdg = generated(seed)
    f = data.draw(st.sampled_from(project.files))
    report = impacted_deliverables(bdg, ChangeSet("p", (f,)))
    for row in report.deliverables:
        names = sorted(row.guard.option_names)
        hits = 0
        for values in configs(project):
            sub = ConfigurationAssignment({n: values[n] for n in names}, total=True)
            hits += evaluate(row.guard, sub, bdg.options) is True
        expected = hits // 2 ** (len(project.options) - len(names))
        assert row.variant_count == count_variants(row.guard, bdg.options)
        assert row.variant_count.count == expected
        assert row.impacted in (YES, NO, UNKNOWN)
