import json
import xml.etree.ElementTree as ET

import pytest

from commlab.cli import main

SVG = "{http://www.w3.org/2000/svg}"


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("pipeline")
    g = d / "sbm"
    assert run("gen-sbm", "--n", 400, "--block-size", 20, "--p-intra", 0.5, "--balanced",
               "--seed", 7, "--out-prefix", g) == 0
    assert run("embed", "--graph", g, "--method", "netmf", "--dim", 16, "--seed", 1,
               "--out", d / "netmf.txt") == 0
    assert run("embed", "--graph", g, "--method", "deepwalk", "--dim", 16, "--walks-per-node", 4,
               "--walk-length", 20, "--epochs", 1, "--seed", 1, "--out", d / "deepwalk.txt") == 0
    assert run("baseline-train", "--graph", g, "--anchors", 10, "--seed", 2, "--out", d / "model.json") == 0
    assert run("evaluate", "--graph", g, "--scorer", "structural-lr", "--model", d / "model.json",
               "--samples", 50, "--seed", 11, "--out", d / "lr.json", "--curve-csv", d / "lr.csv") == 0
    for m in ("netmf", "deepwalk"):
        assert run("evaluate", "--graph", g, "--scorer", "dot", "--embedding", d / f"{m}.txt",
                   "--samples", 50, "--seed", 11, "--out", d / f"{m}.json") == 0
    reports = [d / f"{m}.json" for m in ("lr", "netmf", "deepwalk")]
    assert run("plot", *reports, "--out", d / "curves.svg") == 0
    assert run("report", *reports, "--out", d / "table.csv") == 0
    return d


def load(path):
    with open(path) as fh:
        return json.load(fh)


def test_pipeline_outputs(pipeline):
    d = pipeline
    for name in ("sbm.edges.txt", "sbm.communities.txt", "sbm.labels.txt", "sbm.manifest.json",
                 "netmf.txt.manifest.json", "model.manifest.json", "lr.manifest.json", "curves.svg.manifest.json"):
        assert (d / name).exists(), name
    lr = load(d / "lr.json")
    assert lr["method"] == "LR-Structural" and len(lr["precisions"]) == 50
    assert load(d / "netmf.json")["method"] == "netmf"
    assert (d / "lr.csv").read_text().splitlines()[1] == "0.0,1.0"
    table = (d / "table.csv").read_text().splitlines()
    assert table[0].startswith("method,")
    assert {row.split(",")[0] for row in table[1:]} == {"LR-Structural", "netmf", "deepwalk"}


def test_plot_is_valid_svg_with_one_polyline_per_method(pipeline):
    root = ET.parse(pipeline / "curves.svg").getroot()
    assert root.tag == SVG + "svg"
    lines = root.findall(f"{SVG}polyline")
    assert len(lines) == 3
    assert {p.get("data-series") for p in lines} == {"LR-Structural (sbm)", "netmf (sbm)", "deepwalk (sbm)"}


def test_manifest_contents(pipeline):
    m = load(pipeline / "lr.manifest.json")
    assert m["command"] == "evaluate"
    assert m["params"]["seed"] == 11 and m["sources"]["seed"] == "flag"
    assert m["sources"]["k"] == "default"
    assert m["seeds"] == {"seed": 11, "train_seed": 12}
    assert all(len(h) == 64 for h in m["inputs"].values())
    assert str(pipeline / "lr.json") in m["outputs"]
    assert {"commlab", "numpy", "scipy", "numba", "python"} <= set(m["versions"])
    assert "total" in m["timings"]


@pytest.mark.parametrize("stem", ["lr", "netmf", "deepwalk"])
def test_rerun_from_manifest_is_byte_identical(pipeline, stem):
    d = pipeline
    again = d / f"{stem}.again.json"
    assert run("evaluate", "--config", d / f"{stem}.manifest.json", "--out", again) == 0
    assert again.read_bytes() == (d / f"{stem}.json").read_bytes()


def test_embedding_rerun_is_byte_identical(pipeline):
    d = pipeline
    for m in ("netmf", "deepwalk"):
        again = d / f"{m}.again.txt"
        assert run("embed", "--config", d / f"{m}.txt.manifest.json", "--out", again) == 0
        assert again.read_bytes() == (d / f"{m}.txt").read_bytes()


def test_config_precedence(pipeline, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"samples": 20, "k": 5, "seed": 3, "unused": 1}))
    out = tmp_path / "r.json"
    assert run("evaluate", "--graph", pipeline / "sbm", "--model", pipeline / "model.json",
               "--config", cfg, "--k", 4, "--out", out) == 0
    m = load(tmp_path / "r.manifest.json")
    assert (m["params"]["samples"], m["sources"]["samples"]) == (20, "config")
    assert (m["params"]["k"], m["sources"]["k"]) == (4, "flag")
    assert m["sources"]["anchors"] == "default"
    assert load(out)["k"] == 4 and len(load(out)["precisions"]) == 20


def test_generated_seed_recorded(tmp_path):
    assert run("gen-sbm", "--n", 100, "--block-size", 20, "--p-intra", 0.5, "--balanced",
               "--out-prefix", tmp_path / "g") == 0
    m = load(tmp_path / "g.manifest.json")
    assert m["sources"]["seed"] == "generated"
    assert isinstance(m["params"]["seed"], int)
    assert run("gen-sbm", "--config", tmp_path / "g.manifest.json", "--out-prefix", tmp_path / "h") == 0
    assert (tmp_path / "g.edges.txt").read_bytes() == (tmp_path / "h.edges.txt").read_bytes()


def test_exit_codes(tmp_path, capsys):
    assert run("no-such-command") == 2
    assert run("gen-sbm", "--bogus", 1) == 2
    assert run("embed", "--method", "word2vec") == 2
    assert run("gen-sbm", "--n", 100, "--block-size", 20, "--seed", 1) == 1
    assert "exactly one of" in capsys.readouterr().err
    assert run("evaluate", "--edges", tmp_path / "missing.txt", "--seed", 0) == 1
    empty = tmp_path / "e.txt"
    empty.write_text("a b\n")
    labels = tmp_path / "e.labels.txt"
    labels.write_text("\n".join(["a", "b"] + [str(i) for i in range(25_000)]) + "\n")
    assert run("embed", "--edges", empty, "--labels", labels, "--method", "grarep",
               "--dim", 10, "--seed", 0, "--out", tmp_path / "x.txt") == 3
    assert "refused" in capsys.readouterr().err


def test_theory_commands(tmp_path):
    out = tmp_path / "gb.json"
    assert run("theory", "gram-bound", "--instances", 50, "--seed", 0, "--out", out) == 0
    assert load(out)["violations"] == 0
    assert run("theory", "construct", "--n", 512, "--out-prefix", tmp_path / "c") == 0
    c = load(tmp_path / "c.json")
    assert c["min_intra_nsm"] >= c["threshold"]
    assert c["community_pairs"] >= c["intra_block_pairs"]
    assert run("theory", "perturb-sweep", "--n", 512, "--deltas", 0, 0.2, "--trials", 2, "--seed", 0,
               "--out-prefix", tmp_path / "s") == 0
    sweep = load(tmp_path / "s.json")["sweep"]
    assert sweep[0]["mean"] == 1.0 and sweep[1]["mean"] < 0.5
    assert ET.parse(tmp_path / "s.svg").getroot().tag == SVG + "svg"
    assert (tmp_path / "s.csv").read_text().startswith("delta,mean_survival")
    assert run("theory", "lengths", "--embedding", tmp_path / "c.embedding.txt", "--epsilon", 1 / 32,
               "--out", tmp_path / "l.json") == 0
    assert load(tmp_path / "l.json")["regime"] == "below lemma regime"


def test_ingest_counts(tmp_path):
    edges = tmp_path / "e.txt"
    edges.write_text("# comment\n10 20\n20 30\n30 10\n40 50\n")
    comms = tmp_path / "c.txt"
    comms.write_text("10 20 30\n40 50 99\n")
    assert run("ingest", "--edges", edges, "--communities", comms, "--out-prefix", tmp_path / "g") == 0
    s = load(tmp_path / "g.summary.json")
    assert (s["nodes"], s["edges"], s["communities"], s["skipped_labels"]) == (5, 4, 2, 1)
    assert s["mean_density"] == pytest.approx(1.0)
    assert run("ingest", "--edges", edges, "--communities", comms, "--dataset", "dblp",
               "--out-prefix", tmp_path / "h") == 1
    assert load(tmp_path / "h.summary.json")["checks"]["nodes"]["ok"] is False
    assert run("ingest", "--edges", edges, "--communities", comms, "--strict",
               "--out-prefix", tmp_path / "k") == 1
