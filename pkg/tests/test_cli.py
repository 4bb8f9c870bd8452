import json
import hashlib
from pathlib import Path

import numpy as np
import pytest

from dbnlearn.cli import main, parse_experiment_config, SchemaError
from dbnlearn.io import dataset_from_csv, dataset_to_csv, read_dataset, write_dataset
from dbnlearn.simulate import EdgeProbs, GeneratorConfig, sample_random_dbn, sample_trajectories

from conftest import continuous_dataset, discrete_dataset


def write_config(path, **overrides):
    doc = {
        "seed": 42,
        "out": str(path.parent / "out"),
        "regime": {"label": "mini", "triples": [[3, 10, 10]]},
        "replicates": 2,
        "generator": {
            "model": "cpt",
            "sharpen": 3.0,
            "edge_probs": {"intra": 0.3, "inter": 0.4, "auto": 0.3},
        },
        "learners": [
            {"name": "hill", "score": "bic", "restarts": 2},
            {"name": "exact", "score": "bde"},
        ],
    }
    doc.update(overrides)
    path.write_text(json.dumps(doc))
    return doc


def sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class TestConfigSchema:
    def test_missing_required_field_named(self, tmp_path):
        cfg = tmp_path / "c.json"
        doc = write_config(cfg)
        doc.pop("seed")
        cfg.write_text(json.dumps(doc))
        assert main(["generate", "--config", str(cfg)]) == 2

    def test_unknown_key_rejected(self):
        with pytest.raises(SchemaError, match="unknown field 'frobnicate'"):
            parse_experiment_config({"seed": 1, "regime": "favorable",
                                     "generator": {}, "frobnicate": True})

    def test_nested_unknown_key_rejected(self):
        with pytest.raises(SchemaError, match="generator.n_x"):
            parse_experiment_config({"seed": 1, "regime": "favorable",
                                     "generator": {"n_x": 3}})

    def test_invalid_json_reports_line(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{\n  \"seed\": 1,\n}")
        assert main(["generate", "--config", str(cfg)]) == 2

    def test_unknown_learner_name(self):
        with pytest.raises(SchemaError, match="valid names"):
            parse_experiment_config({
                "seed": 1, "regime": "favorable", "generator": {},
                "learners": [{"name": "magic"}]})


class TestGenerate:
    def test_file_shapes_and_manifest(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        write_config(cfg, regime={"label": "mini", "triples": [[3, 30, 10]]},
                     replicates=1)
        assert main(["generate", "--config", str(cfg)]) == 0
        manifest = capsys.readouterr().out.strip().splitlines()
        assert len(manifest) == 4 and all("sha256=" in line for line in manifest)
        cell = tmp_path / "out" / "mini" / "n3_N30_T10" / "rep00"
        data_rows = (cell / "data.csv").read_text().strip().splitlines()
        assert data_rows[0] == "traj,t,x1,x2,x3"
        assert len(data_rows) == 1 + 30 * 11  # header + N * (T + 1)
        truth = json.loads((cell / "truth.json").read_text())
        assert truth["n_x"] == 3

    def test_idempotent_reruns(self, tmp_path):
        cfg = tmp_path / "c.json"
        write_config(cfg, replicates=1)
        main(["generate", "--config", str(cfg)])
        first = sha(tmp_path / "out" / "mini" / "n3_N10_T10" / "rep00" / "data.csv")
        main(["generate", "--config", str(cfg)])
        assert sha(tmp_path / "out" / "mini" / "n3_N10_T10" / "rep00" / "data.csv") == first


@pytest.fixture
def generated(tmp_path):
    cfg = tmp_path / "c.json"
    write_config(cfg, replicates=1)
    main(["generate", "--config", str(cfg)])
    return tmp_path, tmp_path / "out" / "mini" / "n3_N10_T10" / "rep00"


class TestLearnCommand:
    def test_report_written_and_deterministic(self, generated):
        tmp_path, cell = generated
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        argv = ["learn", "--data", str(cell / "data.csv"), "--learner", "exact",
                "--score", "bde", "--seed", "42"]
        assert main(argv + ["--out", str(out1)]) == 0
        assert main(argv + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        report = json.loads(out1.read_text())
        assert report["learner"] == "exact" and "wall" not in json.dumps(report)

    def test_unknown_learner_usage_error(self, generated, capsys):
        _, cell = generated
        code = main(["learn", "--data", str(cell / "data.csv"), "--learner", "zap"])
        assert code == 2
        assert "valid names" in capsys.readouterr().err

    def test_domain_guard_maps_to_data_error(self, generated):
        _, cell = generated
        code = main(["learn", "--data", str(cell / "data.csv"),
                     "--learner", "dynotears"])
        assert code == 3

    def test_unknown_hyperparameter_is_usage_error(self, generated):
        _, cell = generated
        code = main(["learn", "--data", str(cell / "data.csv"), "--learner", "hill",
                     "--hyper", "warp=9"])
        assert code == 2


class TestScoreAndCheck:
    def test_score_prints_value(self, generated, capsys):
        _, cell = generated
        assert main(["score", "--data", str(cell / "data.csv"), "--node", "0",
                     "--parents", "inter:1", "--kind", "bde"]) == 0
        value = float(capsys.readouterr().out)
        assert value < 0

    def test_check_reports_summary(self, generated, capsys):
        _, cell = generated
        assert main(["check", "--data", str(cell / "data.csv"),
                     "--truth", str(cell / "truth.json"),
                     "--params", str(cell / "params.json")]) == 0
        out = capsys.readouterr().out
        assert "N=10 T=10 n_x=3" in out and "acyclic" in out

    def test_check_rejects_mismatched_truth(self, generated, tmp_path, capsys):
        _, cell = generated
        other = tmp_path / "other.json"
        other.write_text(json.dumps({
            "n_x": 2, "n_z": 0, "p": 1, "intra": [[0, 0], [0, 0]],
            "inter": [[0, 0], [0, 0]], "auto_lags": [[], []], "static_edges": []}))
        assert main(["check", "--data", str(cell / "data.csv"),
                     "--truth", str(other)]) == 4


class TestBenchmarkCommand:
    def test_csv_and_tables_written(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        write_config(cfg, replicates=2,
                     regime={"label": "mini", "triples": [[2, 8, 6], [3, 6, 6]]})
        assert main(["benchmark", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "AUROC" in out and "SHD" in out
        rows = (tmp_path / "out" / "results.csv").read_text().strip().splitlines()
        assert len(rows) == 1 + 2 * 2 * 2  # header + learners x triples x reps
        assert (tmp_path / "out" / "timings.csv").exists()

    def test_eval_alias(self, tmp_path):
        cfg = tmp_path / "c.json"
        write_config(cfg, replicates=1,
                     regime={"label": "mini", "triples": [[2, 6, 6]]})
        assert main(["eval", "--config", str(cfg)]) == 0
        assert (tmp_path / "out" / "results.csv").exists()


class TestCsvRoundTrip:
    def test_discrete_exact(self, rng):
        ds = discrete_dataset((rng.random((4, 6, 3)) < 0.5).astype(int),
                              z=(rng.random((4, 2)) < 0.5).astype(int))
        data_csv, static_csv = dataset_to_csv(ds)
        back = dataset_from_csv(data_csv, static_csv,
                                x_arities=ds.domain.x_arities,
                                z_arities=ds.domain.z_arities)
        assert np.array_equal(back.x, ds.x) and np.array_equal(back.z, ds.z)
        assert back.domain == ds.domain

    def test_continuous_bit_exact(self, rng):
        ds = continuous_dataset(rng.normal(size=(3, 5, 2)), z=rng.normal(size=(3, 1)))
        data_csv, static_csv = dataset_to_csv(ds)
        back = dataset_from_csv(data_csv, static_csv)
        assert np.array_equal(back.x, ds.x) and np.array_equal(back.z, ds.z)

    def test_file_round_trip(self, tmp_path):
        cfg = GeneratorConfig(n_x=2, n_z=1, model="cpt", seed=1,
                              edge_probs=EdgeProbs(inter=0.5, static=0.5))
        structure, params = sample_random_dbn(cfg)
        ds = sample_trajectories(structure, params, 5, 6, seed=2,
                                 x_arities=(2, 2), z_arities=(2,))
        write_dataset(ds, tmp_path / "data.csv", tmp_path / "static.csv")
        back = read_dataset(tmp_path / "data.csv", tmp_path / "static.csv",
                            x_arities=(2, 2), z_arities=(2,))
        assert np.array_equal(back.x, ds.x) and np.array_equal(back.z, ds.z)
