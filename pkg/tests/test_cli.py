import json
import subprocess
import sys

import pandas as pd
import pytest

from egohomophily.cli import main
from egohomophily.metrics import BinnedCurve


def strip_clock(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("# wall-clock")]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = {"n_egos": 40, "k_real": [20, 60], "seed": 6}
    (root / "synth.json").write_text(json.dumps(cfg))
    assert main(["synth", "--config", str(root / "synth.json"), "--out", str(root / "pop")]) == 0
    pop = root / "pop"
    assert main(["ingest", "--edges", str(pop / "edges.csv"), "--profiles", str(pop / "profiles.csv"),
                 "--schema", str(pop / "schema.json"), "--out", str(root / "store")]) == 0
    truth = pd.read_csv(pop / "truth.csv", comment="#")
    pd.DataFrame({"ego": truth.ego.unique()}).to_csv(root / "egos.csv", index=False)
    assert main(["detect", "--store", str(root / "store"), "--egos", str(root / "egos.csv"),
                 "--seed", "3", "--threads", "1", "--out", str(root / "communities.csv")]) == 0
    return root


def test_model_curve_values(tmp_path):
    out = tmp_path / "os.csv"
    assert main(["model-curve", "--what", "os", "--out", str(out)]) == 0
    df = pd.read_csv(out, comment="#")
    assert list(df.columns) == ["s", "value"]
    assert df.loc[df.s == 2, "value"].item() == pytest.approx(0.47781, abs=1e-5)
    assert main(["model-curve", "--what", "osn", "--smax", "5", "--out", str(out)]) == 0
    df = pd.read_csv(out, comment="#")
    assert len(df) == sum(range(2, 6))
    row = df[(df.s == 5) & (df.n == 1)]
    assert row.value.item() == pytest.approx(0.56889, abs=1e-5)


def test_unknown_flag_exits_2(capsys):
    assert main(["model-curve", "--what", "os", "--out", "x.csv", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "egohomophily.cli", "simulate", "--nonsense"],
                         capture_output=True, text=True)
    assert res.returncode == 2


def test_order_curve_on_pseudo_time_store_exits_3(tmp_path, capsys):
    (tmp_path / "edges.csv").write_text("src,dst\n1,2\n1,3\n2,3\n")
    (tmp_path / "profiles.csv").write_text("id,g\n1,a\n2,a\n3,b\n")
    (tmp_path / "schema.json").write_text(json.dumps([{"name": "g", "kind": "cat"}]))
    assert main(["ingest", "--edges", str(tmp_path / "edges.csv"), "--profiles", str(tmp_path / "profiles.csv"),
                 "--schema", str(tmp_path / "schema.json"), "--out", str(tmp_path / "store")]) == 0
    assert main(["detect", "--store", str(tmp_path / "store"), "--seed", "1",
                 "--out", str(tmp_path / "c.csv")]) == 0
    capsys.readouterr()
    code = main(["overlap", "--store", str(tmp_path / "store"), "--communities", str(tmp_path / "c.csv"),
                 "--curve", "order", "--size", "2", "--out", str(tmp_path / "o.csv")])
    assert code == 3
    assert "pseudo-time" in capsys.readouterr().err
    assert not (tmp_path / "o.csv").exists()


def test_missing_input_is_config_error(tmp_path):
    assert main(["ingest", "--edges", str(tmp_path / "nope.csv"), "--profiles", "p", "--schema", "s",
                 "--out", str(tmp_path / "st")]) == 2


def test_detect_output_columns(workspace):
    df = pd.read_csv(workspace / "communities.csv", comment="#")
    assert list(df.columns) == ["ego", "alter", "community_index", "codelength"]
    assert df.ego.nunique() == 40
    assert (df.codelength >= 0).all()


def test_pipeline_curves(workspace):
    common = ["--store", str(workspace / "store"), "--communities", str(workspace / "communities.csv")]
    for curve, extra in (("s", []), ("k", []), ("order", ["--size", "3"])):
        out = workspace / f"curve_{curve}.csv"
        assert main(["overlap", *common, "--curve", curve, *extra, "--out", str(out)]) == 0
        parsed = BinnedCurve.from_csv(out.read_text())
        assert len(parsed) > 0
        assert ((parsed.mean >= 0) & (parsed.mean <= 1)).all()
        header = out.read_text().splitlines()[0]
        assert header.startswith("# manifest-digest: ")
    out = workspace / "pcm.csv"
    assert main(["order-stats", *common, "--c", "5", "--out", str(out)]) == 0
    df = pd.read_csv(out, comment="#")
    assert list(df.columns) == ["bin", "mean", "count", "stderr", "m0", "r2"]
    assert df.iloc[-1]["bin"] == "fit"


def test_reruns_are_byte_identical_except_clock(workspace):
    out = workspace / "communities.csv"
    first = strip_clock(out)
    assert main(["detect", "--store", str(workspace / "store"), "--egos", str(workspace / "egos.csv"),
                 "--seed", "3", "--threads", "1", "--out", str(out)]) == 0
    assert strip_clock(out) == first
    sim = workspace / "sim.csv"
    args = ["simulate", "--kreal", "60", "--egos", "200", "--seed", "9", "--out", str(sim)]
    assert main(args) == 0
    before = strip_clock(sim)
    assert main(args) == 0
    assert strip_clock(sim) == before
    pop2 = workspace / "pop2"
    assert main(["synth", "--config", str(workspace / "synth.json"), "--out", str(pop2)]) == 0
    for name in ("edges.csv", "profiles.csv", "truth.csv"):
        a = [x for x in strip_clock(workspace / "pop" / name) if not x.startswith("# manifest")]
        b = [x for x in strip_clock(pop2 / name) if not x.startswith("# manifest")]
        assert a == b


def test_threads_do_not_change_results(workspace):
    out = workspace / "c2.csv"
    assert main(["detect", "--store", str(workspace / "store"), "--egos", str(workspace / "egos.csv"),
                 "--seed", "3", "--threads", "2", "--out", str(out)]) == 0
    body = lambda p: [x for x in p.read_text().splitlines() if not x.startswith("#")]  # noqa: E731
    assert body(out) == body(workspace / "communities.csv")


def test_missing_seed_is_recorded(tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--kreal", "20", "--egos", "10", "--out", str(out)]) == 0
    manifest = json.loads(out.read_text().splitlines()[1].removeprefix("# manifest: "))
    assert isinstance(manifest["seed"], int)


def test_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("EGOHOM_SEED", "77")
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--kreal", "20", "--egos", "10", "--out", str(out)]) == 0
    manifest = json.loads(out.read_text().splitlines()[1].removeprefix("# manifest: "))
    assert manifest["seed"] == 77
