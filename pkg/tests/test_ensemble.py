from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ilgamma import artifact
from ilgamma.ensemble import (
    Ensemble,
    EnsembleMemberError,
    aggregate,
    as_ensemble,
    build_model,
    ensemble_predict,
    is_ensemble_manifest,
    load_ensemble,
    member_predictions,
    save_ensemble,
    train_ensemble,
    train_member,
)

from .conftest import TINY_GNN, TINY_MCM

FAST = {"max_epochs": 3, "batch_size": 32}


@pytest.fixture(scope="module")
def trained(small_records):
    test = list(range(10))
    return train_ensemble(small_records, test, n=3, kind="mcm", model_config=TINY_MCM,
                          train_config=FAST, base_seed=11)


class TestAggregate:
    def test_mean_and_spread_of_two_members(self):
        mean, std = aggregate(np.array([[1.0], [2.0]]))
        assert mean[0] == 1.5 and std[0] == 0.5

    def test_identical_members_have_zero_spread(self):
        mean, std = aggregate(np.tile([0.3, -1.7, 2.2], (5, 1)))
        np.testing.assert_array_equal(mean, [0.3, -1.7, 2.2])
        np.testing.assert_array_equal(std, 0.0)

    def test_single_member_is_identity(self):
        row = np.array([[0.1, 0.2, 0.7]])
        mean, std = aggregate(row)
        np.testing.assert_array_equal(mean, row[0])
        np.testing.assert_array_equal(std, 0.0)

    @settings(max_examples=100)
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=40), st.randoms(use_true_random=False))
    def test_member_order_is_irrelevant(self, values, rnd):
        shuffled = list(values)
        rnd.shuffle(shuffled)
        a = aggregate(np.array(values)[:, None])
        b = aggregate(np.array(shuffled)[:, None])
        assert a[0][0] == b[0][0]
        np.testing.assert_allclose(a[1], b[1], rtol=1e-12, atol=1e-12)

    @settings(max_examples=50)
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=40))
    def test_matches_numpy_population_std(self, values):
        mean, std = aggregate(np.array(values)[:, None])
        np.testing.assert_allclose(mean[0], np.mean(values), rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(std[0], np.std(values), rtol=1e-9, atol=1e-9)


class TestTraining:
    def test_seeds_are_consecutive(self, trained):
        assert trained.seeds == [11, 12, 13]
        assert [m.seed for m in trained.members] == [11, 12, 13]

    def test_one_member_equals_single_model(self, small_records):
        test = list(range(10))
        pool = list(range(10, len(small_records)))
        ens = train_ensemble(small_records, test, n=1, kind="mcm", model_config=TINY_MCM,
                             train_config=FAST, base_seed=5)
        single = artifact.from_bytes(
            train_member(small_records, pool, "prediction", "mcm", TINY_MCM, FAST, 5).artifact_bytes
        )
        mean, std = ensemble_predict(ens, small_records[:10])
        np.testing.assert_array_equal(mean, single.predict(small_records[:10]))
        np.testing.assert_array_equal(std, 0.0)

    def test_members_differ(self, trained, small_records):
        preds = member_predictions(trained, small_records[:10])
        assert not np.array_equal(preds[0], preds[1])

    def test_member_independent_of_ensemble_size(self, small_records, trained):
        # member k of a larger ensemble is the same artifact as training seed k alone
        pool = list(range(10, len(small_records)))
        alone = train_member(small_records, pool, "prediction", "mcm", TINY_MCM, FAST, 12)
        assert alone.artifact_bytes == artifact.to_bytes(
            trained.members[1], extra={"member_seed": 12, "mode": "prediction"}
        )

    def test_parallel_equals_sequential(self, small_records, trained):
        par = train_ensemble(small_records, list(range(10)), n=3, kind="mcm", model_config=TINY_MCM,
                             train_config=FAST, base_seed=11, parallel=2)
        for a, b in zip(trained.members, par.members):
            assert artifact.to_bytes(a) == artifact.to_bytes(b)

    def test_test_records_never_seen(self, small_records):
        # a solute present only in the test set is out of the MCM vocabulary
        target = small_records[0].solute_smiles
        test = [i for i, r in enumerate(small_records) if r.solute_smiles == target]
        ens = train_ensemble(small_records, test, n=1, kind="mcm", model_config=TINY_MCM,
                             train_config=FAST, mode="generalization",
                             val_fraction=0.25)
        assert target not in ens.members[0].vocabulary.maps["solute"]

    def test_failing_member_is_identified(self, small_records):
        with pytest.raises(EnsembleMemberError) as info:
            train_ensemble(small_records, [], n=2, kind="gnn",
                           model_config={**TINY_GNN, "head_widths": [3, 1]}, train_config=FAST,
                           base_seed=20)
        assert info.value.index == 0 and info.value.seed == 20
        assert isinstance(info.value.cause, ValueError)

    def test_prediction_failure_is_identified(self, trained, small_records):
        broken = Ensemble(list(trained.members), list(trained.seeds))
        broken.members[2] = object()
        with pytest.raises(EnsembleMemberError) as info:
            member_predictions(broken, small_records[:2])
        assert info.value.index == 2 and info.value.seed == 13

    def test_invalid_arguments(self, small_records):
        with pytest.raises(ValueError):
            train_ensemble(small_records, [], n=0)
        with pytest.raises(ValueError):
            train_ensemble(small_records, list(range(len(small_records))), n=1)
        with pytest.raises(ValueError):
            build_model("svm", {}, 0)

    def test_gnn_member_trains(self, small_records):
        ens = train_ensemble(small_records, list(range(10)), n=2, kind="gnn", model_config=TINY_GNN,
                             train_config={"max_epochs": 1})
        mean, std = ensemble_predict(ens, small_records[:10])
        assert mean.shape == std.shape == (10,) and np.all(np.isfinite(mean)) and np.all(std > 0)


class TestPersistence:
    def test_round_trip(self, tmp_path, trained, small_records):
        path = save_ensemble(trained, tmp_path / "ens")
        assert is_ensemble_manifest(path) and is_ensemble_manifest(tmp_path / "ens")
        loaded = load_ensemble(tmp_path / "ens")
        assert loaded.seeds == trained.seeds and loaded.test_indices == list(range(10))
        np.testing.assert_array_equal(member_predictions(loaded, small_records),
                                      member_predictions(trained, small_records))
        manifest = json.loads(path.read_text())
        assert [m["file"] for m in manifest["members"]] == ["member_000.bin", "member_001.bin",
                                                            "member_002.bin"]

    def test_not_a_manifest(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text('{"format": "other"}')
        assert not is_ensemble_manifest(path)
        with pytest.raises(artifact.ArtifactError):
            load_ensemble(path)

    def test_t_range_is_intersection(self, trained):
        members = list(trained.members)
        members[0].t_min, members[1].t_max = 300.0, 360.0
        ens = Ensemble(members, trained.seeds)
        assert ens.t_range == (300.0, 360.0)

    def test_wrap_single(self, trained):
        ens = as_ensemble(trained.members[0])
        assert len(ens) == 1 and ens.seeds == [11]
