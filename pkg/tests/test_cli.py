"""Model persistence, manifests, and the end-to-end command pipeline."""

import json
import struct

import numpy as np
import pytest

from kgex.cli import run_cli
from kgex.manifest import file_digest
from kgex.modelio import MAGIC, ModelFormatError, load_model, save_model
from kgex.models import init_model

from toygraphs import block_graph


def write_graph_tsv(g, path):
    ev, rv = g.entity_vocab, g.relation_vocab
    with open(path, "w", encoding="utf-8") as fh:
        for s, p, o in g.triples:
            fh.write(f"{ev.label_of(int(s))}\t{rv.label_of(int(p))}\t{ev.label_of(int(o))}\n")
    return path


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    g, held_out = block_graph(20, 10, 3, n_train=80, n_test=16, seed=13)
    write_graph_tsv(g, root / "train.tsv")
    ev, rv = g.entity_vocab, g.relation_vocab
    with open(root / "test.tsv", "w", encoding="utf-8") as fh:
        for s, p, o in held_out:
            fh.write(f"{ev.label_of(int(s))}\t{rv.label_of(int(p))}\t{ev.label_of(int(o))}\n")
    return root, g, held_out


class TestModelPersistence:
    def test_round_trip_bitwise(self, tmp_path):
        model = init_model("complex", 5, 9, 4, seed=3)
        path = tmp_path / "m.kgex"
        save_model(model, path)
        loaded, ev, rv = load_model(path)
        assert loaded.kind == model.kind
        assert loaded.k == model.k
        assert np.array_equal(loaded.entity_table, model.entity_table)
        assert np.array_equal(loaded.relation_table, model.relation_table)
        assert ev is None and rv is None

    def test_sidecar_vocabularies(self, tmp_path):
        from kgex.graph import Vocabulary

        ev, rv = Vocabulary(), Vocabulary()
        for x in ("a", "b", "c"):
            ev.add(x)
        rv.add("r")
        model = init_model("distmult", 2, 3, 1, seed=0)
        path = tmp_path / "m.kgex"
        save_model(model, path, ev, rv)
        _, ev2, rv2 = load_model(path)
        assert ev2.labels == ["a", "b", "c"]
        assert rv2.labels == ["r"]

    def test_corrupted_magic_rejected(self, tmp_path):
        model = init_model("distmult", 2, 3, 1, seed=0)
        path = tmp_path / "m.kgex"
        save_model(model, path)
        blob = bytearray(path.read_bytes())
        blob[:5] = b"WRONG"
        path.write_bytes(bytes(blob))
        with pytest.raises(ModelFormatError, match="magic"):
            load_model(path)

    def test_truncated_file_rejected(self, tmp_path):
        model = init_model("distmult", 2, 3, 1, seed=0)
        path = tmp_path / "m.kgex"
        save_model(model, path)
        path.write_bytes(path.read_bytes()[:-7])
        with pytest.raises(ModelFormatError, match="truncated"):
            load_model(path)

    def test_file_size_layout_arithmetic(self, tmp_path):
        # header = 5-byte magic + 4 u64 fields; tables row-major f64
        n_entities, n_relations, k = 3, 2, 350
        model = init_model("complex", k, n_entities, n_relations, seed=1)
        path = tmp_path / "m.kgex"
        save_model(model, path)
        expected = 5 + 4 * 8 + (n_entities + n_relations) * (2 * k) * 8
        assert path.stat().st_size == expected

    def test_unknown_kind_tag_rejected(self, tmp_path):
        path = tmp_path / "m.kgex"
        path.write_bytes(MAGIC + struct.pack("<4Q", 99, 2, 1, 1) + b"\0" * 32)
        with pytest.raises(ModelFormatError, match="kind"):
            load_model(path)


class TestPipeline:
    def test_train_subcommand(self, workspace):
        root, g, _ = workspace
        status = run_cli([
            "train", "--graph", str(root / "train.tsv"), "--model", "transe-l2",
            "--k", "8", "--eta", "2", "--lr", "0.1", "--epochs", "60",
            "--seed", "3", "--out", str(root / "teacher.kgex"),
        ])
        assert status == 0
        assert (root / "teacher.kgex").exists()
        log = (root / "teacher.kgex.train.log").read_text().strip().splitlines()
        assert len(log) == 60
        epoch, loss = log[0].split("\t")
        assert epoch == "0" and float(loss) > 0
        manifest = json.loads((root / "teacher.kgex.manifest.json").read_text())
        assert manifest["command"] == "train"
        assert manifest["config"]["seed"] == 3
        assert str(root / "train.tsv") in manifest["inputs"]

    def test_sample_subgraph_subcommand(self, workspace):
        root, g, held_out = workspace
        ev, rv = g.entity_vocab, g.relation_vocab
        s, p, o = map(int, held_out[0])
        target = f"{ev.label_of(s)} {rv.label_of(p)} {ev.label_of(o)}"
        status = run_cli([
            "sample-subgraph", "--graph", str(root / "train.tsv"), "--target", target,
            "--method", "pn", "--n", "3", "--seed", "11", "--out", str(root / "sub.tsv"),
        ])
        assert status == 0
        lines = (root / "sub.tsv").read_text().splitlines()
        assert sum(1 for l in lines if not l.startswith("#")) > 0

    def test_distill_train_subcommand(self, workspace):
        root, _, _ = workspace
        status = run_cli([
            "distill-train", "--teacher", str(root / "teacher.kgex"),
            "--subgraph", str(root / "sub.tsv"), "--kd-lambda", "3",
            "--k", "4", "--epochs", "30", "--seed", "5",
            "--out", str(root / "student.kgex"),
        ])
        assert status == 0
        student, ev, rv = load_model(root / "student.kgex")
        assert student.k == 4
        assert ev is not None

    def test_evaluate_subcommand(self, workspace, capsys):
        root, _, _ = workspace
        status = run_cli([
            "evaluate", "--model", str(root / "teacher.kgex"), "--test", str(root / "test.tsv"),
            "--pool", "all", "--filter", str(root / "train.tsv"), str(root / "test.tsv"),
            "--out", str(root / "metrics.json"),
        ])
        assert status == 0
        payload = json.loads((root / "metrics.json").read_text())
        assert set(payload) == {"mr", "mrr", "hits1", "hits10", "skipped"}
        assert payload["mrr"] > 0.3  # the teacher actually learned the toy graph
        assert payload["skipped"] == 0

    def test_evaluate_subgraph_pool(self, workspace, capsys):
        root, _, _ = workspace
        status = run_cli([
            "evaluate", "--model", str(root / "teacher.kgex"), "--test", str(root / "test.tsv"),
            "--pool", f"subgraph:{root / 'sub.tsv'}",
        ])
        assert status == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["mr"] >= 1.0

    def test_explain_subcommand_and_replay_determinism(self, workspace):
        root, g, held_out = workspace
        ev, rv = g.entity_vocab, g.relation_vocab
        s, p, o = map(int, held_out[1])
        target = f"{ev.label_of(s)} {rv.label_of(p)} {ev.label_of(o)}"
        argv = [
            "explain", "--teacher", str(root / "teacher.kgex"), "--graph", str(root / "train.tsv"),
            "--target", target, "--method", "pn", "--n", "2", "--mc-runs", "4",
            "--partitions", "2", "--kd-lambda", "3", "--k", "4", "--epochs", "30",
            "--seed", "21", "--out", str(root / "report.tsv"),
        ]
        assert run_cli(argv) == 0
        first_digest = file_digest(root / "report.tsv")
        manifest = json.loads((root / "report.tsv.manifest.json").read_text())
        assert manifest["config"]["mc_runs"] == 4
        # replaying the manifest's argv reproduces the report byte for byte
        assert run_cli(manifest["argv"]) == 0
        assert file_digest(root / "report.tsv") == first_digest
        body = [
            l for l in (root / "report.tsv").read_text().splitlines() if not l.startswith("#")
        ]
        assert all(len(l.split("\t")) == 6 for l in body)

    def test_explain_threads_match_serial(self, workspace):
        root, g, held_out = workspace
        ev, rv = g.entity_vocab, g.relation_vocab
        s, p, o = map(int, held_out[2])
        target = f"{ev.label_of(s)} {rv.label_of(p)} {ev.label_of(o)}"
        base = [
            "explain", "--teacher", str(root / "teacher.kgex"), "--graph", str(root / "train.tsv"),
            "--target", target, "--method", "rw", "--n", "10", "--mc-runs", "4",
            "--partitions", "2", "--k", "4", "--epochs", "20", "--seed", "31",
        ]
        assert run_cli(base + ["--threads", "1", "--out", str(root / "serial.tsv")]) == 0
        assert run_cli(base + ["--threads", "2", "--out", str(root / "parallel.tsv")]) == 0
        assert file_digest(root / "serial.tsv") == file_digest(root / "parallel.tsv")

    def test_selftest_subcommand(self, capsys):
        assert run_cli(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "checks passed" in out


class TestCliBehavior:
    def test_unknown_flag_usage_error(self, workspace):
        root, _, _ = workspace
        with pytest.raises(SystemExit) as excinfo:
            run_cli(["train", "--graph", str(root / "train.tsv"), "--frobnicate"])
        assert excinfo.value.code == 2

    def test_module_error_returns_one(self, tmp_path, capsys):
        missing = tmp_path / "nope.tsv"
        status = run_cli(["train", "--graph", str(missing), "--out", str(tmp_path / "m")])
        assert status == 1
        assert "error" in capsys.readouterr().err

    def test_bad_target_label(self, workspace, capsys):
        root, _, _ = workspace
        status = run_cli([
            "sample-subgraph", "--graph", str(root / "train.tsv"),
            "--target", "nosuch r0 e1", "--out", str(root / "x.tsv"), "--seed", "1",
        ])
        assert status == 1
        assert "unknown entity" in capsys.readouterr().err

    def test_config_file_precedence(self, workspace, tmp_path):
        root, _, _ = workspace
        config = tmp_path / "kgex.conf"
        config.write_text("epochs = 5\nk = 6\nlr = 0.05\n", encoding="utf-8")
        out = tmp_path / "m.kgex"
        status = run_cli([
            "train", "--graph", str(root / "train.tsv"), "--config", str(config),
            "--k", "3", "--seed", "1", "--out", str(out),
        ])
        assert status == 0
        model, _, _ = load_model(out)
        assert model.k == 3  # CLI wins over the config file
        manifest = json.loads((out.parent / "m.kgex.manifest.json").read_text())
        assert manifest["config"]["epochs"] == 5  # config file wins over default
        assert manifest["config"]["lr"] == 0.05

    def test_threads_env_fallback(self, workspace, tmp_path, monkeypatch):
        root, g, held_out = workspace
        ev, rv = g.entity_vocab, g.relation_vocab
        s, p, o = map(int, held_out[4])
        target = f"{ev.label_of(s)} {rv.label_of(p)} {ev.label_of(o)}"
        monkeypatch.setenv("KGEX_THREADS", "2")
        out = tmp_path / "env_report.tsv"
        status = run_cli([
            "explain", "--teacher", str(root / "teacher.kgex"), "--graph", str(root / "train.tsv"),
            "--target", target, "--method", "pn", "--n", "1", "--mc-runs", "2",
            "--partitions", "2", "--k", "4", "--epochs", "10", "--seed", "51",
            "--out", str(out),
        ])
        assert status == 0
        manifest = json.loads((tmp_path / "env_report.tsv.manifest.json").read_text())
        assert manifest["config"]["threads"] == 2

    def test_missing_seed_is_drawn_and_recorded(self, workspace, tmp_path, capsys):
        root, _, _ = workspace
        out = tmp_path / "m.kgex"
        status = run_cli([
            "train", "--graph", str(root / "train.tsv"), "--epochs", "2",
            "--k", "2", "--out", str(out),
        ])
        assert status == 0
        assert "drew seed" in capsys.readouterr().err
        manifest = json.loads(json.dumps(json.loads((tmp_path / "m.kgex.manifest.json").read_text())))
        assert isinstance(manifest["config"]["seed"], int)
