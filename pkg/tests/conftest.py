from __future__ import annotations

import numpy as np
import pytest

from ilgamma.synthetic import make_records


def central_difference(loss_fn, param, flat_index: int, step: float = 1e-5) -> float:
    """Central finite difference of ``loss_fn()`` in one parameter entry."""
    view = param.value.reshape(-1)
    original = view[flat_index]
    view[flat_index] = original + step
    plus = loss_fn()
    view[flat_index] = original - step
    minus = loss_fn()
    view[flat_index] = original
    return (plus - minus) / (2.0 * step)


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def sample_entries(params, count: int, rng: np.random.Generator):
    """``count`` distinct (parameter, flat index) pairs drawn over all entries."""
    sizes = np.array([p.value.size for p in params])
    owners = np.repeat(np.arange(len(params)), sizes)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    picks = rng.choice(owners.size, size=count, replace=False)
    return [(params[owners[k]], int(k - offsets[owners[k]])) for k in picks]


@pytest.fixture(scope="session")
def small_records():
    return make_records(120, seed=5, n_cations=4, n_anions=4, n_solutes=8)


@pytest.fixture(scope="session")
def split_records():
    """500 records over exactly 40 distinct molecules."""
    records = make_records(500, seed=0, n_cations=8, n_anions=8, n_solutes=24)
    assert len({m for r in records for m in r.molecules}) == 40
    return records


TINY_GNN = {
    "hidden_dim": 8,
    "num_layers": 1,
    "channel_mlp_widths": [16, 8],
    "interaction_widths": [16, 8],
    "head_widths": [9, 4, 1],
}
TINY_MCM = {"embedding_widths": [8], "fusion_widths": [16], "head_widths": [8, 1]}
