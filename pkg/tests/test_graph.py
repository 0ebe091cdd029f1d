import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egohomophily.features import MISSING, FeatureDef, FeatureSchema
from egohomophily.graph import (
    SECONDS_PER_YEAR,
    EgoFilter,
    IngestError,
    IngestReport,
    PseudoTimeError,
    build_graph,
    extract_ego_network,
    filter_egos,
    ingest_edges,
    ingest_profiles,
    load_store,
    read_edges_csv,
    read_profiles_csv,
    save_store,
)

from conftest import make_graph


def test_duplicates_collapse_to_earliest():
    g = ingest_edges([(1, 2, 100), (2, 1, 50)])
    assert g.n_edges == 1
    u, v, t = g.edges()
    assert (g.node_ids[u[0]], g.node_ids[v[0]], t[0]) == (1, 2, 50)


def test_self_loop_dropped_with_warning(caplog):
    report = IngestReport()
    with caplog.at_level(logging.WARNING):
        g = ingest_edges([(1, 1, 10)], report=report)
    assert g.n_edges == 0
    assert report.self_loops == 1
    assert "self-loop" in caplog.text


def test_triangle():
    g = ingest_edges([(1, 2, 1), (2, 3, 2), (3, 1, 3)])
    assert (g.n_nodes, g.n_edges) == (3, 3)
    assert np.array_equal(g.degrees(), [2, 2, 2])


def test_malformed_records_and_error_budget():
    report = IngestReport()
    g = ingest_edges(["1,2,5", "x,3,4", "2,3"], report=report)
    assert report.rejected[0][0] == 2
    assert g.n_edges == 2 and g.pseudo_time  # one record lacks a timestamp
    with pytest.raises(IngestError, match="more than 1"):
        ingest_edges(["a,b", "c,d", "1,2"], max_errors=1)


def test_read_edges_csv_paths(tmp_path):
    good = tmp_path / "edges.csv"
    good.write_text("# comment\nsrc,dst,ts\n1,2,10\n2,3,5\n3,1,7\n")
    g = read_edges_csv(good)
    assert g.n_edges == 3 and not g.pseudo_time
    bad = tmp_path / "bad.csv"
    bad.write_text("src,dst,ts\n1,2,10\noops\n2,3,5\n")
    report = IngestReport()
    g = read_edges_csv(bad, report=report)
    assert g.n_edges == 2
    assert report.rejected[0][0] == 3  # file line number
    no_ts = tmp_path / "nots.csv"
    no_ts.write_text("src,dst\n5,6\n6,7\n")
    g = read_edges_csv(no_ts)
    assert g.pseudo_time
    assert sorted(g.edges()[2].tolist()) == [1, 2]


SCHEMA3 = FeatureSchema([FeatureDef("gender", "cat"), FeatureDef("city", "cat"),
                         FeatureDef("birthyear", "num", 2)])


def test_ingest_profiles_examples():
    ids, table = ingest_profiles([["7", "F", "", "1980"]], SCHEMA3)
    prof = table.profile(0, user=int(ids[0]))
    assert prof.traits == ("F", MISSING, 1980.0)
    ids, table = ingest_profiles([["8", "", "", ""]], SCHEMA3)
    assert table.profile(0).traits == (MISSING,) * 3
    assert table.availability() == {"gender": 0.0, "city": 0.0, "birthyear": 0.0}


def test_availability_percentage():
    rows = [[str(i), "F", "", "1980" if i < 61 else ""] for i in range(100)]
    _, table = ingest_profiles(rows, SCHEMA3)
    assert table.availability()["birthyear"] == pytest.approx(61.0)


def test_profile_header_must_match(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("id,city,gender,birthyear\n1, Bp ,F,1990\n")
    ids, table = read_profiles_csv(path, SCHEMA3)
    assert table.profile(0).traits == ("F", "Bp", 1990.0)
    path.write_text("id,gender,town\n1,F,Bp\n")
    with pytest.raises(ValueError):
        read_profiles_csv(path, SCHEMA3)


def test_birth_dates_become_ages():
    from datetime import date
    schema = FeatureSchema([FeatureDef("age", "num", 2)])
    _, table = ingest_profiles([["1", "1980-06-15"]], schema, age_reference=date(2010, 1, 1))
    assert table.values[0, 0] == 29


def test_unknown_users_are_all_missing():
    g = ingest_edges([(1, 2, 1), (2, 3, 2)])
    ids, table = ingest_profiles([["2", "F", "Bp", "1980"]], SCHEMA3)
    aligned = table.align(ids, g.node_ids)
    assert not aligned.present[0].any() and aligned.present[1].all() and not aligned.present[2].any()


def test_star_and_triangle_ego_networks():
    star = ingest_edges([(0, i, i) for i in range(1, 6)])
    net = extract_ego_network(star, star.node_index(0))
    assert net.degree == 5 and len(net.edges) == 0
    tri = ingest_edges([(0, 1, 1), (0, 2, 2), (1, 2, 3)])
    net = extract_ego_network(tri, 0)
    assert net.edges.tolist() == [[0, 1]]


def test_appearance_order_by_time():
    g = ingest_edges([("0", "1", "30"), ("0", "2", "10"), ("0", "3", "20")])  # a=1, b=2, c=3
    net = extract_ego_network(g, g.node_index(0))
    assert g.node_ids[net.alters].tolist() == [2, 3, 1]
    assert net.appearance_order().tolist() == [1, 2, 3]


def test_isolated_ego_is_empty():
    g = build_graph([1], [2], [5])
    g2 = make_graph([(1, 2, 5), (3, 4, 6)])
    assert not extract_ego_network(g, 0).is_empty
    assert extract_ego_network(g2, 0).degree == 1


def test_filter_examples():
    year = int(SECONDS_PER_YEAR)
    edges = [(0, 1000 + i, 1 + i) for i in range(200)]             # degree 200, ~0 yr span
    edges += [(1, 2000 + i, i * year) for i in range(10)]          # degree 10, 9 yr span
    edges += [(2, 3000 + i, i * year // 10) for i in range(10)]    # degree 10, <1 yr span
    g = ingest_edges(edges)
    kept = filter_egos(g, EgoFilter.long_lived_or_mid_degree()).tolist()
    assert 0 in kept and 1 in kept and 2 not in kept
    assert kept == sorted(kept)
    pseudo = ingest_edges([(0, 1), (1, 2)])
    with pytest.raises(PseudoTimeError):
        filter_egos(pseudo, EgoFilter(min_span=1.0))
    with pytest.raises(ValueError):
        EgoFilter(k_min=5, k_max=3)


def test_store_roundtrip(tmp_path, schema):
    g = make_graph([(10, 20, 3), (20, 30, 1), (10, 30, 2)], schema,
                   values=[[0, 1, 30, 22.5], [0, 0, 31, 0], [1, 2, 50, 30]],
                   present=[[1, 1, 1, 1], [1, 0, 1, 0], [1, 1, 0, 1]])
    save_store(g, tmp_path / "s", {"note": "x"})
    h = load_store(tmp_path / "s")
    for name in ("node_ids", "indptr", "indices", "times"):
        assert np.array_equal(getattr(g, name), getattr(h, name))
        assert getattr(g, name).dtype == getattr(h, name).dtype
    assert np.array_equal(g.profiles.values, h.profiles.values)
    assert np.array_equal(g.profiles.present, h.profiles.present)
    assert h.profiles.schema == schema and h.pseudo_time == g.pseudo_time


# --------------------------------------------------------------------------
# properties


edge_lists = st.lists(st.tuples(st.integers(0, 12), st.integers(0, 12), st.integers(0, 5)),
                      min_size=1, max_size=40)


@settings(max_examples=200, deadline=None)
@given(edge_lists, st.randoms(use_true_random=False))
def test_appearance_order_invariant_under_permutation(edges, rnd):
    g1 = ingest_edges(edges)
    shuffled = list(edges)
    rnd.shuffle(shuffled)
    g2 = ingest_edges(shuffled)
    assert np.array_equal(g1.node_ids, g2.node_ids)
    for ego in range(g1.n_nodes):
        n1, n2 = extract_ego_network(g1, ego), extract_ego_network(g2, ego)
        assert np.array_equal(n1.alters, n2.alters)
        assert np.array_equal(n1.edges, n2.edges)


@settings(max_examples=200, deadline=None)
@given(edge_lists)
def test_handshake_and_induced_edges(edges):
    g = ingest_edges(edges)
    total = 0
    adj = {(int(u), int(v)) for u, v, _ in zip(*g.edges())}
    for ego in range(g.n_nodes):
        net = extract_ego_network(g, ego)
        again = extract_ego_network(g, ego)
        assert np.array_equal(net.alters, again.alters) and np.array_equal(net.edges, again.edges)
        total += net.degree
        times = net.times
        assert np.all(np.diff(times) >= 0)
        want = {(a, b) for a in range(net.degree) for b in range(a + 1, net.degree)
                if (min(net.alters[a], net.alters[b]), max(net.alters[a], net.alters[b])) in adj}
        assert {tuple(e) for e in net.edges.tolist()} == want
    assert total == 2 * g.n_edges
