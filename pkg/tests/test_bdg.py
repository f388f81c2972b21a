from __future__ import annotations

import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from buildexposure import diagnostics as diag
from buildexposure.bdg import (
    COMPILES,
    EXTERNAL_LIBRARY,
    LINKS,
    SCHEMA_VERSION,
    SOURCE_FILE,
    Bdg,
    BdgEdge,
    BdgNode,
    build_bdg,
    dumps,
    export_dot,
    load_bdg,
    loads,
    save_bdg,
)
from buildexposure.conditions import (
    ENUMERATED,
    OPAQUE_DOMAIN,
    TRUE,
    ConfigOption,
    Defined,
    Equals,
    Opaque,
    Truthy,
    conj,
    disj,
    neg,
)
from buildexposure.diagnostics import CorruptPayload, SchemaVersionMismatch, SourceSpan
from buildexposure.evaluator import evaluate_project
from buildexposure.frontend import load_project
from conftest import FIG1


def graph_of(root):
    env, trace, warnings = evaluate_project(load_project(root))
    return build_bdg(trace, env, warnings=warnings, root="t")


@pytest.fixture
def graph(make_project):
    return lambda text: graph_of(make_project({"CMakeLists.txt": text}))


def test_fig1_graph():
    bdg, found = graph_of(FIG1)
    assert not found
    assert bdg.deliverables == ["etl"]
    assert bdg.nodes["etl"].kind == "executable"
    guards = {e.to_id: e.guard for e in bdg.edges}
    assert guards["src/qcommon/dl_main_curl.c"] == Truthy("FEATURE_CURL")
    assert guards["src/client/cl_main.c"] == TRUE
    assert all(e.kind == COMPILES for e in bdg.edges)
    assert bdg.nodes["src/qcommon/dl_main_curl.c"].exists_guard == Truthy("FEATURE_CURL")


def test_links_aliases_and_externals(graph):
    bdg, _ = graph("add_library(core STATIC core.c)\nadd_library(ns::core ALIAS core)\n"
                   "add_library(zlib::z UNKNOWN IMPORTED)\n"
                   "add_executable(app main.c)\ntarget_link_libraries(app PRIVATE ns::core zlib::z m)\n")
    links = sorted((e.from_id, e.to_id) for e in bdg.edges if e.kind == LINKS)
    assert links == [("app", "core"), ("app", "external:m"), ("app", "external:zlib::z")]
    assert bdg.nodes["external:m"].kind == EXTERNAL_LIBRARY
    assert bdg.deliverables == ["app", "core"]


def test_link_to_conditional_target_splits_edge(graph):
    bdg, _ = graph('option(F "" ON)\nif(F)\n add_library(core STATIC c.c)\nendif()\n'
                   "add_executable(app m.c)\ntarget_link_libraries(app core)\n")
    links = {e.to_id: e.guard for e in bdg.edges if e.kind == LINKS}
    assert links == {"core": Truthy("F"), "external:core": neg(Truthy("F"))}


def test_attachments_conjoin_target_existence(graph):
    bdg, found = graph('option(F "" ON)\nif(F)\n add_executable(app m.c)\nendif()\n'
                       "if(F)\n target_sources(app PRIVATE x.c)\nelse()\n target_sources(app PRIVATE y.c)\nendif()\n")
    assert {e.to_id for e in bdg.edges} == {"m.c", "x.c"}
    assert diag.UNSAT_REFERENCE in {w.code for w in found}


def test_dangling_reference(graph):
    bdg, found = graph("target_sources(ghost PRIVATE a.c)\n")
    assert not bdg.edges
    assert diag.DANGLING_REFERENCE in {w.code for w in found}


def test_source_target_id_collision(graph):
    bdg, found = graph("add_executable(tool tool)\n")
    assert bdg.nodes["file:tool"].kind == SOURCE_FILE
    assert bdg.source_node("tool") == "file:tool"
    assert diag.ID_COLLISION in {w.code for w in found}


def test_link_cycle_is_reported(graph):
    _, found = graph("add_library(a STATIC a.c)\nadd_library(b STATIC b.c)\n"
                     "target_link_libraries(a b)\ntarget_link_libraries(b a)\n")
    assert diag.LINK_CYCLE in {w.code for w in found}


def test_guards_of_repeated_edges_merge(graph):
    bdg, _ = graph('option(A "" ON)\nadd_executable(app m.c)\nif(A)\n target_sources(app PRIVATE x.c)\n'
                   "else()\n target_sources(app PRIVATE x.c)\nendif()\n")
    (edge,) = [e for e in bdg.edges if e.to_id == "x.c"]
    assert edge.guard == TRUE
    assert len(edge.spans) == 2


def test_metadata_lists_unsupported_commands(graph):
    bdg, _ = graph("install(TARGETS x)\nadd_executable(x a.c)\n")
    assert bdg.metadata["unsupported_commands"] == {"install": 1}
    assert bdg.metadata["warning_summary"][diag.UNSUPPORTED_COMMAND] == 1


def test_opaque_atoms_are_recorded_and_survive_round_trip(graph):
    bdg, _ = graph('if(X MATCHES "^a")\n add_executable(x a.c)\nendif()\n')
    (atom_id,) = bdg.metadata["opaque_atoms"]
    assert "MATCHES" in bdg.metadata["opaque_atoms"][atom_id]
    again = loads(dumps(bdg))
    assert again == bdg
    assert isinstance(again.nodes["x"].exists_guard, Opaque)


def test_empty_graph_json_and_dot():
    empty = Bdg()
    assert export_dot(empty) == "digraph bdg {\n}\n"
    doc = json.loads(dumps(empty))
    assert doc == {"schema_version": SCHEMA_VERSION, "options": [], "nodes": [], "edges": [], "metadata": {}}


def test_dot_labels_conditional_edges_only():
    bdg, _ = graph_of(FIG1)
    dot = export_dot(bdg)
    assert dot.startswith("digraph bdg {\n") and dot.endswith("}\n")
    assert '"etl" -> "src/qcommon/dl_main_curl.c" [label="FEATURE_CURL"];' in dot
    assert '"etl" -> "src/client/cl_main.c";' in dot


def test_dot_escapes_quotes():
    bdg = Bdg({"a\"b": BdgNode("a\"b", "executable", "a\"b")})
    assert '"a\\"b" [label="a\\"b", shape=box];' in export_dot(bdg)


def test_json_is_sorted_and_deterministic():
    bdg, _ = graph_of(FIG1)
    data = dumps(bdg)
    assert data == dumps(graph_of(FIG1)[0])
    assert data.decode().index('"edges"') < data.decode().index('"schema_version"')


def test_save_and_load_via_file_and_stream(tmp_path):
    bdg, _ = graph_of(FIG1)
    path = tmp_path / "g.json"
    assert save_bdg(bdg, path) == path.stat().st_size
    assert load_bdg(path) == bdg
    buf = io.BytesIO()
    save_bdg(bdg, buf)
    assert load_bdg(io.BytesIO(buf.getvalue())) == bdg


def test_schema_version_mismatch():
    doc = json.loads(dumps(graph_of(FIG1)[0]))
    doc["schema_version"] = SCHEMA_VERSION + 1
    with pytest.raises(SchemaVersionMismatch):
        loads(json.dumps(doc))


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("nodes"),
    lambda d: d.update(edges="nope"),
    lambda d: d["edges"][0].update(guard="(A &&"),
    lambda d: d["edges"][0].update(to="missing"),
    lambda d: d["edges"][0].update(kind="uses"),
    lambda d: d["nodes"][0].update(kind="spaceship"),
    lambda d: d["nodes"].append(dict(d["nodes"][0])),
    lambda d: d["options"][0].update(domain="enumerated", values=[]),
    lambda d: d["edges"][0]["spans"][0].update(line=0),
    lambda d: d.update(schema_version="1"),
])
def test_corrupt_payloads_are_rejected(mutate):
    doc = json.loads(dumps(graph_of(FIG1)[0]))
    mutate(doc)
    with pytest.raises(CorruptPayload):
        loads(json.dumps(doc))


def test_non_json_payloads_are_rejected():
    for data in (b"", b"\xff\xfe", b"[1, 2]", b"{\"schema_version\": 1"):
        with pytest.raises(CorruptPayload):
            loads(data)


# ---------------------------------------------------------------------------
# Generated graphs
# ---------------------------------------------------------------------------

OPTION_NAMES = ["A", "B", "MODE", "ENV{CI}", "weird name"]
OPAQUES = {"u1": Opaque("u1", 'X MATCHES "a"'), "u2": Opaque("u2", "EXISTS /p")}

atoms = st.one_of(
    st.sampled_from(["A", "B"]).map(Truthy),
    st.sampled_from(["fast", "slow", 'q"uote', ""]).map(lambda v: Equals("MODE", v)),
    st.sampled_from(OPTION_NAMES).map(Defined),
    st.sampled_from(sorted(OPAQUES)).map(lambda k: OPAQUES[k]),
)
guards = st.recursive(
    st.one_of(st.just(TRUE), atoms),
    lambda inner: st.one_of(inner.map(neg), st.lists(inner, min_size=2, max_size=3).map(lambda xs: conj(*xs)),
                            st.lists(inner, min_size=2, max_size=3).map(lambda xs: disj(*xs))),
    max_leaves=6,
)
node_kinds = st.sampled_from(["executable", "library(static)", "library(shared)", "library(module)",
                              "library(interface)", "library(default)", SOURCE_FILE, EXTERNAL_LIBRARY])
names = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=8)
spans = st.builds(SourceSpan, st.sampled_from(["CMakeLists.txt", "src/CMakeLists.txt"]),
                  st.integers(1, 500), st.integers(1, 80))


@st.composite
def bdgs(draw):
    ids = draw(st.lists(names, unique=True, max_size=8))
    nodes = {i: BdgNode(i, draw(node_kinds), draw(names), draw(guards)) for i in ids}
    edges = []
    if ids:
        for _ in range(draw(st.integers(0, 10))):
            edges.append(BdgEdge(draw(st.sampled_from(ids)), draw(st.sampled_from(ids)),
                                 draw(st.sampled_from([COMPILES, LINKS])), draw(guards),
                                 tuple(sorted(draw(st.lists(spans, max_size=2, unique=True))))))
    options = {
        "A": ConfigOption("A", default=draw(st.sampled_from([None, "ON", "OFF"]))),
        "B": ConfigOption("B", default_guard=draw(st.one_of(st.none(), guards))),
        "MODE": ConfigOption("MODE", ENUMERATED, ("fast", "slow"), "fast", "cache_override"),
        "ENV{CI}": ConfigOption("ENV{CI}", OPAQUE_DOMAIN, origin="environment"),
    }
    metadata = {"root": draw(names), "opaque_atoms": {k: v.source_text for k, v in OPAQUES.items()},
                "warning_summary": draw(st.dictionaries(names, st.integers(0, 9), max_size=3))}
    return Bdg(nodes, edges, options, metadata)


@settings(max_examples=200, deadline=None)
@given(bdgs())
def test_round_trip_generated_graphs(g):
    data = dumps(g)
    again = loads(data)
    assert again == g
    assert dumps(again) == data


@settings(max_examples=100, deadline=None)
@given(bdgs(), st.data())
def test_truncated_payloads_are_rejected(g, data):
    payload = dumps(g)
    cut = data.draw(st.integers(0, len(payload) - 2))
    with pytest.raises(CorruptPayload):
        loads(payload[:cut])
