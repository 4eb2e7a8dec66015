import csv
import json

import numpy as np
import pytest

from graphtrace import cli
from graphtrace.cli import fmt, main, parse_int_list, parse_seeds
from graphtrace.representations import ingest_dump


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_formatting_helpers():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3" and fmt(float("inf")) == "inf" and fmt(True) == "true"
    assert parse_int_list("3-5,8") == [3, 4, 5, 8]
    assert parse_seeds("3") == [0, 1, 2] and parse_seeds("4-5") == [4, 5] and parse_seeds([7]) == [7]


def test_gen_batch_and_determinism(tmp_path):
    for name in ("a", "b"):
        assert main(["gen", "--out", str(tmp_path / name), "--length", "300", "--emit-dump", "true"]) == 0
    lines = (tmp_path / "a" / "contexts.jsonl").read_text().splitlines()
    assert len(lines) == 10 and len(json.loads(lines[0])["tokens"]) == 300
    for f in ("graph.json", "contexts.jsonl", "vocab.json", "activations.icrd", "config.json", "manifest.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    dump = ingest_dump(tmp_path / "a" / "activations.icrd")
    assert len(dump) == 3000
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert {e["path"] for e in manifest["files"]} >= {"graph.json", "contexts.jsonl", "config.json"}


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--out", str(tmp_path), "--topology", "torus"])
    assert exc.value.code == 2
    assert main(["gen"]) == 2
    assert main(["scaling", "--out", str(tmp_path / "s"), "--sizes", "4"]) == 2
    assert "at least 3 sizes" in capsys.readouterr().err
    assert main(["analyze", "--out", str(tmp_path / "x"), "--dump", str(tmp_path / "missing.icrd")]) == 2
    cfg = tmp_path / "c.toml"
    cfg.write_text('topology = "torus"\n')
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path / "y")]) == 2
    cfg.write_text("bogus_key = 1\n")
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path / "y")]) == 2


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('length = 50\nseed = 3\n[gen]\ntopology = "square_grid"\nsize = [3]\n')
    out = tmp_path / "g"
    assert main(["gen", "--config", str(cfg), "--out", str(out), "--length", "20"]) == 0
    snap = json.loads((out / "config.json").read_text())
    assert snap["length"] == 20 and snap["seed"] == 3 and snap["topology"] == "square_grid"
    assert len((out / "contexts.jsonl").read_text().splitlines()) == 9


def test_analyze_oracle_outputs(tmp_path):
    out = tmp_path / "a"
    assert main(["analyze", "--out", str(out), "--seeds", "3", "--lengths", "10,50,200", "--pc-dims", "3"]) == 0
    rows = read_csv(out / "curves.csv")
    metrics = {r["metric"] for r in rows}
    assert {"energy_laplacian_quadratic", "energy_ordered_pair_sum", "energy_standardized", "accuracy"} <= metrics
    assert {"memorization_1shot", "memorization_2shot"} <= metrics
    assert {r["seed"] for r in rows if r["metric"] == "accuracy"} == {"0", "1", "2", "median"}
    pcs = read_csv(out / "pca_scores_pooled_l200.csv")
    assert list(pcs[0]) == ["node_index", "label", "x", "y"] and len(pcs) == 10
    assert len(read_csv(out / "cosine_to_spectral.csv")) == 3
    sub = read_csv(out / "subspace_energy.csv")
    assert sub[0]["pc_dims"] == "3"
    for name in ("energy_accuracy.svg", "pca_embedding.svg", "spectral_embedding.svg"):
        assert (out / name).read_text().startswith("<?xml")


def test_analyze_dump_source_and_errors(tmp_path):
    gen = tmp_path / "g"
    assert main(["gen", "--out", str(gen), "--length", "120", "--emit-dump", "true"]) == 0
    dump = str(gen / "activations.icrd")
    out = tmp_path / "d"
    assert main(["analyze", "--out", str(out), "--source", "dump", "--dump", dump, "--lengths", "40,120"]) == 0
    rows = read_csv(out / "curves.csv")
    assert {r["seed"] for r in rows if r["metric"].startswith("energy")} == {"dump"}
    assert (out / "energy.svg").exists()
    # graph with fewer nodes than the dump references
    bad = ["analyze", "--out", str(tmp_path / "e"), "--source", "dump", "--dump", dump, "--lengths", "40"]
    assert main(bad + ["--size", "6"]) == 3
    assert main(bad + ["--layer", "2"]) == 3
    assert main(bad[:-1] + ["500"]) == 3
    broken = tmp_path / "broken.icrd"
    broken.write_bytes((gen / "activations.icrd").read_bytes()[:100])
    assert main(["analyze", "--out", str(tmp_path / "f"), "--source", "dump", "--dump", str(broken), "--lengths", "4"]) == 3


def test_analyze_with_contexts_file(tmp_path):
    gen = tmp_path / "g"
    assert main(["gen", "--out", str(gen), "--length", "60"]) == 0
    out = tmp_path / "a"
    args = ["analyze", "--out", str(out), "--contexts", str(gen / "contexts.jsonl"), "--lengths", "10,60"]
    assert main(args) == 0
    assert main(["analyze", "--out", str(out), "--contexts", str(gen / "contexts.jsonl"), "--lengths", "100"]) == 3


def test_spectral_outputs(tmp_path):
    out = tmp_path / "s"
    assert main(["spectral", "--out", str(out), "--topology", "square_grid", "--size", "4", "--method", "jacobi"]) == 0
    ev = read_csv(out / "eigenvalues.csv")
    assert float(ev[0]["eigenvalue"]) == 0.0 and len(ev) == 3
    emb = read_csv(out / "embedding.csv")
    assert list(emb[0]) == ["node_index", "label", "x", "y"] and len(emb) == 16
    assert list(read_csv(out / "pca_scores.csv")[0]) == ["node_index", "label", "x", "y", "z"]
    graph = tmp_path / "two.json"
    graph.write_text(json.dumps({"n": 5, "edges": [[0, 1], [1, 2], [3, 4]]}))
    out2 = tmp_path / "t"
    assert main(["spectral", "--out", str(out2), "--graph", str(graph), "--epsilons", "3,2,1"]) == 0
    zb = json.loads((out2 / "zero_energy_basis.json").read_text())
    assert np.array(zb["gram"]).shape == (2, 2)


def test_transition_and_scaling(tmp_path):
    out = tmp_path / "t"
    assert main(["transition", "--out", str(out), "--family", "ring", "--sizes", "8", "--seeds", "3",
                 "--lengths-per-size", "10"]) == 0
    rep = json.loads((out / "transition.json").read_text())
    assert rep["per_size"][0]["source"] == "oracle" and rep["per_size"][0]["tc"] > 0
    assert (out / "breakpoint_size8.svg").exists()
    # refit the emitted curve from CSV
    out2 = tmp_path / "t2"
    assert main(["transition", "--out", str(out2), "--curve", str(out / "curves.csv"), "--curve-metric", "accuracy_size8"]) == 0
    again = json.loads((out2 / "transition.json").read_text())
    assert again["per_size"][0]["tc"] == pytest.approx(rep["per_size"][0]["tc"], rel=1e-9)
    out3 = tmp_path / "c"
    assert main(["scaling", "--out", str(out3), "--metric", "coverage", "--sizes", "3-6", "--seeds", "10"]) == 0
    sc = json.loads((out3 / "scaling.json").read_text())
    assert {"exponent", "prefactor", "r2", "per_size"} <= set(sc)
    assert sc["source"] == "coverage-simulation" and sc["reference_exponents"]["square_grid"] == 0.49
    assert (out3 / "power_law.svg").exists()


def test_numeric_error_exit_code(tmp_path, monkeypatch):
    from graphtrace.errors import ConvergenceError

    def boom(cfg):
        raise ConvergenceError("synthetic failure", 3)

    monkeypatch.setitem(cli.COMMANDS, "spectral", boom)
    assert main(["spectral", "--out", str(tmp_path / "n")]) == 4
