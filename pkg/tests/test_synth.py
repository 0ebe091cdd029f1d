import json

import numpy as np
import pandas as pd
import pytest

from egohomophily.community import detect_communities
from egohomophily.graph import extract_ego_network, read_edges_csv, read_profiles_csv
from egohomophily.metrics import ego_link_overlaps
from egohomophily.model import OverlapModel
from egohomophily.synth import FeatureSpec, SynthConfig, SynthConfigError, generate_population


def load(pop, tmp_path):
    paths = pop.write(tmp_path)
    g = read_edges_csv(paths["edges.csv"])
    ids, table = read_profiles_csv(paths["profiles.csv"], pop.schema)
    return g.with_profiles(table.align(ids, g.node_ids))


def test_certain_matches_give_full_overlap(tmp_path):
    # b = c0 = 0 and a = 1 make the base term (1 - 1/(s + shift)); a huge shift rounds it to 1
    sure = OverlapModel(a=1.0, b=0.0, c0=0.0, bump=0.0, shift=1e300)
    cfg = SynthConfig(n_egos=20, k_real=40, overlap=sure, seed=3)
    g = load(generate_population(cfg), tmp_path)
    seen = 0
    for ego in generate_population(cfg).egos:
        o = ego_link_overlaps(g.profiles, extract_ego_network(g, g.node_index(ego)))
        defined = o[~np.isnan(o)]
        seen += len(defined)
        assert np.all(defined == 1.0)
    assert seen > 500


def test_planted_partition_recovered(tmp_path):
    cfg = SynthConfig(n_egos=30, k_real=(20, 80), seed=9)
    pop = generate_population(cfg)
    g = load(pop, tmp_path)
    truth = pop.truth.set_index("alter")
    for ego in pop.egos:
        net = extract_ego_network(g, g.node_index(ego))
        asg = detect_communities(net, seed=1)
        planted = truth.loc[g.node_ids[net.alters], "community_label"].to_numpy()
        # same partition up to label names
        pairs = set(zip(asg.labels.tolist(), planted.tolist()))
        assert len(pairs) == asg.n_communities == len(set(planted.tolist()))


def test_bit_reproducible(tmp_path):
    cfg = SynthConfig(n_egos=15, k_real=(10, 50), intra_density=0.6, inter_density=0.05, seed=4)
    a, b = generate_population(cfg), generate_population(cfg)
    for name in ("edges", "profiles", "truth"):
        pd.testing.assert_frame_equal(getattr(a, name), getattr(b, name))
    pa = a.write(tmp_path / "a")
    pb = b.write(tmp_path / "b")
    for name in pa:
        assert pa[name].read_bytes() == pb[name].read_bytes()
    other = generate_population(SynthConfig(n_egos=15, k_real=(10, 50), intra_density=0.6,
                                            inter_density=0.05, seed=5))
    assert not a.edges.equals(other.edges)


def test_truth_consistent_with_edges():
    cfg = SynthConfig(n_egos=25, k_real=(5, 60), intra_density=0.5, seed=2)
    pop = generate_population(cfg)
    ego_edges = set(zip(pop.edges.src, pop.edges.dst))
    assert all((e, a) in ego_edges for e, a in zip(pop.truth.ego, pop.truth.alter))
    for ego, grp in pop.truth.groupby("ego"):
        alters = set(pop.edges.dst[pop.edges.src == ego])
        assert set(grp.alter) == alters
        assert sorted(grp.accession_rank) == list(range(1, len(grp) + 1))
    # accession order agrees with the ego-alter timestamps
    ts = pop.edges.set_index(["src", "dst"]).ts
    for ego, grp in pop.truth.groupby("ego"):
        times = [ts[(ego, a)] for a in grp.sort_values("accession_rank").alter]
        assert times == sorted(times)


def test_availability_matches_configuration():
    cfg = SynthConfig(n_egos=200, k_real=100, seed=11)
    pop = generate_population(cfg)
    n = len(pop.profiles)
    for spec in cfg.features:
        rate = (pop.profiles[spec.name] != "").mean()
        se = np.sqrt(spec.availability * (1 - spec.availability) / n)
        assert abs(rate - spec.availability) <= 4 * se + 1e-12, spec.name


@pytest.mark.parametrize("kwargs", [
    dict(n_egos=0),
    dict(k_real=(50, 10)),
    dict(intra_density=0.0),
    dict(intra_density=0.3, inter_density=0.5),
    dict(overlap=OverlapModel(a=500.0)),
    dict(features=(FeatureSpec("x", "num"),)),
    dict(features=(FeatureSpec("x", availability=1.5),)),
    dict(features=()),
])
def test_invalid_configs(kwargs):
    with pytest.raises(SynthConfigError):
        SynthConfig(**kwargs)


def test_config_json_roundtrip(tmp_path):
    cfg = SynthConfig(n_egos=3, k_real=(4, 9), features=(FeatureSpec("g", categories=3),), seed=8)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert SynthConfig.load(path) == cfg
    with pytest.raises(SynthConfigError):
        SynthConfig.from_dict({"n_egos": 3, "colour": "red"})
