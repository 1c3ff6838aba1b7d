from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from ilgamma.autodiff import backward, no_grad
from ilgamma.mcm import CATEGORIES, McmConfig, McmModel, OutOfMatrixError, Vocabulary, build_vocab
from ilgamma.trainer import mse_loss

from .conftest import central_difference, relative_error, sample_entries


@pytest.fixture(scope="module")
def vocab(small_records):
    return build_vocab(small_records)


class TestVocabulary:
    def test_dense_sorted_indices(self, vocab, small_records):
        for c in CATEGORIES:
            keys = sorted(vocab.maps[c], key=vocab.maps[c].__getitem__)
            assert keys == sorted(keys)
            assert sorted(vocab.maps[c].values()) == list(range(vocab.size(c)))
        assert vocab.size("il") == len({r.il for r in small_records})
        assert vocab.size("solute") == len({r.solute_smiles for r in small_records})

    def test_deterministic_under_record_order(self, small_records):
        assert build_vocab(small_records) == build_vocab(list(reversed(small_records)))

    def test_round_trip(self, vocab):
        assert Vocabulary.from_dict(vocab.to_dict()) == vocab

    def test_missing_key(self, small_records):
        bad = dataclasses.replace(small_records[0], solute_family="")
        with pytest.raises(ValueError):
            build_vocab([bad])

    def test_unseen_solute(self, vocab, small_records):
        unseen = dataclasses.replace(small_records[0], solute_smiles="CCCCCCCCO")
        with pytest.raises(OutOfMatrixError) as info:
            vocab.encode(unseen)
        assert info.value.category == "solute"


class TestModel:
    def test_input_widths_follow_vocabulary(self, vocab):
        m = McmModel(vocab)
        for c, mlp in zip(CATEGORIES, m.embeddings):
            assert mlp.layers[0].w.shape[0] == vocab.size(c)

    def test_embedding_lookup_equals_one_hot_product(self, vocab, small_records):
        m = McmModel(vocab, seed=1)
        m.fit_normalization(small_records)
        batch = m.make_batch(small_records[:5])
        first = m.embeddings[1].layers[0]
        ids = batch.ids[:, 1]
        one_hot = np.eye(vocab.size("solute"))[ids]
        with no_grad():
            looked_up = m._embed(1, ids, False, None).value
        dense = one_hot @ first.w.value + first.b.value
        dense = np.where(dense > 0, dense, 0.01 * dense)
        for lin in m.embeddings[1].layers[1:]:
            dense = dense @ lin.w.value + lin.b.value
            dense = np.where(dense > 0, dense, 0.01 * dense)
        np.testing.assert_allclose(looked_up, dense, rtol=1e-13)

    def test_deterministic(self, vocab, small_records):
        m = McmModel(vocab, seed=2)
        m.fit_normalization(small_records)
        np.testing.assert_array_equal(m.predict(small_records), m.predict(small_records))

    def test_unseen_entity_never_predicts(self, vocab, small_records):
        m = McmModel(vocab)
        m.fit_normalization(small_records)
        with pytest.raises(OutOfMatrixError):
            m.predict([dataclasses.replace(small_records[0], anion_smiles="[Cl-]")])

    def test_custom_sizes(self, vocab):
        m = McmModel(vocab, McmConfig(embedding_widths=[8], fusion_widths=[16], head_widths=[4, 1]))
        assert m.head.layers[0].w.shape == (17, 4)

    def test_gradient_matches_finite_differences(self, vocab, small_records):
        m = McmModel(vocab, seed=3)
        m.fit_normalization(small_records)
        batch = m.make_batch(small_records[:6])
        params = m.parameters()

        def loss_value():
            with no_grad():
                return mse_loss(m.forward(batch), batch.targets).item()

        backward(mse_loss(m.forward(batch), batch.targets), params)
        rng = np.random.default_rng(1)
        # only rows that the batch actually touches carry signal in the tables
        touched = [(p, k) for p, k in sample_entries(params, 400, rng) if p.grad.reshape(-1)[k] != 0]
        assert len(touched) >= 50
        for p, k in touched[:60]:
            analytic = float(p.grad.reshape(-1)[k])
            numeric = central_difference(loss_value, p, k)
            assert relative_error(analytic, numeric, floor=1e-7) < 1e-4, (p.name, k)
        untouched = [(p, k) for p, k in sample_entries(params, 40, rng) if p.grad.reshape(-1)[k] == 0]
        for p, k in untouched[:10]:
            assert abs(central_difference(loss_value, p, k)) < 1e-9
