from __future__ import annotations

import json

import pytest
import yaml

from ilgamma.config import DATA_DIR_ENV, ConfigError, RunConfig, data_path, read_config_file, resolve


class TestResolve:
    def test_defaults(self):
        run = resolve()
        assert run.model_kind == "gnn" and run.get("ensemble.n") == 40
        assert run.provenance["train.initial_lr"] == "default"

    def test_file_then_flag_precedence(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(yaml.safe_dump({"seed": 4, "train": {"initial_lr": 0.01, "max_epochs": 9}}))
        run = resolve(path, {"train.max_epochs": 3, "train.batch_size": None})
        assert run.get("seed") == 4 and run.get("train.initial_lr") == 0.01
        assert run.get("train.max_epochs") == 3 and run.get("train.batch_size") == 64
        assert run.provenance["train.max_epochs"] == "flag"
        assert run.provenance["seed"] == f"file:{path}"
        assert run.provenance["train.batch_size"] == "default"

    def test_json_file_is_accepted(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"model": {"kind": "mcm"}}))
        assert resolve(path).model_kind == "mcm"

    def test_dump_round_trip(self, tmp_path):
        run = resolve(None, {"seed": 8})
        run.dump(tmp_path / "d.json")
        again = resolve(tmp_path / "d.json")
        assert again.values == run.values

    @pytest.mark.parametrize("tree", [{"train": {"bogus": 1}}, {"nope": 1}, {"train": 3}])
    def test_unknown_keys(self, tmp_path, tree):
        path = tmp_path / "c.yaml"
        path.write_text(yaml.safe_dump(tree))
        with pytest.raises(ConfigError):
            resolve(path)

    def test_invalid_values(self):
        with pytest.raises(ConfigError, match="train"):
            resolve(None, {"train.initial_lr": -1.0})
        with pytest.raises(ConfigError, match="model"):
            resolve(None, {"model.gnn.head_widths": [5, 1]})

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            read_config_file(tmp_path / "missing.yaml")
        bad = tmp_path / "bad.yaml"
        bad.write_text("- a\n- b\n")
        with pytest.raises(ConfigError, match="mapping"):
            read_config_file(bad)

    def test_inspect_output_is_a_config(self, tmp_path):
        info = {"kind": "mcm", "config": {"embedding_widths": [4], "fusion_widths": [8],
                                          "head_widths": [4, 1]}, "seed": 2, "t_min": 1.0}
        path = tmp_path / "i.json"
        path.write_text(json.dumps(info))
        run = resolve(path)
        assert run.model_kind == "mcm" and run.model_config()["embedding_widths"] == [4]
        assert run.get("seed") == 2

    def test_run_config_is_isolated(self):
        a, b = RunConfig(), RunConfig()
        a.set("seed", 5, "test")
        assert b.get("seed") == 0


class TestDataPath:
    def test_env_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path))
        assert data_path(None) == tmp_path / "records.csv"
        (tmp_path / "x.csv").write_text("")
        assert data_path("x.csv") == tmp_path / "x.csv"

    def test_missing_env(self, monkeypatch):
        monkeypatch.delenv(DATA_DIR_ENV, raising=False)
        with pytest.raises(ConfigError, match=DATA_DIR_ENV):
            data_path(None)
