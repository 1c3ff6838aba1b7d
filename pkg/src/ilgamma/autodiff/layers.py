"""Neural building blocks on top of the tape: affine maps, GRU cell, dropout,
segment sums, and a tiny module system for named parameters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .tensor import (
    Parameter,
    Tensor,
    _make,
    add,
    as_tensor,
    concat,
    leaky_relu,
    matmul,
    mul,
    sigmoid,
    tanh,
)

# Sorting networks beat np.sort for the short segments of neighbour sums.
_NETWORK_MAX_WIDTH = 8


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


# segment sums ---------------------------------------------------------------

class Segments:
    """Precomputed padded layout for summing rows that share a segment id.

    Rows of one segment are summed in ascending order of their *values*
    (column by column), which makes the result independent of row order:
    relabelling atoms or swapping ions gives bit-identical sums.
    """

    __slots__ = ("ids", "num_segments", "index", "width", "nonempty")

    def __init__(self, segment_ids, num_segments: int) -> None:
        ids = np.asarray(segment_ids, dtype=np.intp).reshape(-1)
        if ids.size and (ids.min() < 0 or ids.max() >= num_segments):
            raise IndexError(
                f"segment id out of range [0, {num_segments}): "
                f"min={ids.min()}, max={ids.max()}"
            )
        self.ids = ids
        self.num_segments = int(num_segments)
        counts = np.bincount(ids, minlength=num_segments)
        self.width = int(counts.max()) if ids.size else 0
        order = np.argsort(ids, kind="stable")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        slot = np.arange(ids.size) - starts[ids[order]]
        # index ids.size points at an appended zero row (padding)
        index = np.full((num_segments, max(self.width, 1)), ids.size, dtype=np.intp)
        index[ids[order], slot] = order
        self.index = index
        self.nonempty = counts > 0

    def __len__(self) -> int:
        return self.ids.size


def _sorted_sum(padded: np.ndarray) -> np.ndarray:
    """Sum axis 1 of an (S, L, d) array after sorting it along that axis."""
    width = padded.shape[1]
    if width == 1:
        return padded[:, 0, :].copy()
    if width <= _NETWORK_MAX_WIDTH:
        cols = [padded[:, i, :] for i in range(width)]
        for end in range(width - 1, 0, -1):
            for j in range(end):
                lo = np.minimum(cols[j], cols[j + 1])
                hi = np.maximum(cols[j], cols[j + 1])
                cols[j], cols[j + 1] = lo, hi
    else:
        ordered = np.sort(padded, axis=1)
        cols = [ordered[:, i, :] for i in range(width)]
    total = cols[0].copy()
    for c in cols[1:]:
        total += c
    return total


def segment_sum(values, segments, num_segments: int | None = None) -> Tensor:
    """Sum rows of ``values`` into ``num_segments`` buckets.

    ``segments`` is either an id per row or a prebuilt :class:`Segments`.
    Empty segments yield zero rows.
    """
    x = as_tensor(values)
    if not isinstance(segments, Segments):
        if num_segments is None:
            raise ValueError("num_segments is required with raw segment ids")
        segments = Segments(segments, num_segments)
    if x.ndim != 2 or x.shape[0] != len(segments):
        raise ValueError(
            f"segment_sum expects ({len(segments)}, d) values, got {x.shape}"
        )
    d = x.shape[1]
    if len(segments) == 0:
        out = np.zeros((segments.num_segments, d))
    else:
        padded = np.concatenate([x.value, np.zeros((1, d))])[segments.index]
        out = _sorted_sum(padded)
    ids = segments.ids
    return _make(out, (x,), lambda g: (g[ids],))


# primitive layers -------------------------------------------------------------

def affine(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias``."""
    x = as_tensor(x)
    if x.ndim != 2 or weight.shape[0] != x.shape[1]:
        raise ValueError(f"affine shape mismatch: {x.shape} @ {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ValueError(f"bias shape {bias.shape} does not match {weight.shape}")
    y = matmul(x, weight)
    return y if bias is None else add(y, bias)


def dropout(x, rate: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity in inference mode or at rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = rng.random(x.shape) >= rate
    return mul(x, keep / (1.0 - rate))


@dataclass
class GRUParams:
    """Gate order along the 3d axis is (update z, reset r, candidate n)."""

    w_input: Parameter  # d x 3d
    w_hidden: Parameter  # d x 3d
    b_input: Parameter  # 3d: b_z, b_r, b_nx
    b_hidden_n: Parameter  # d: bias inside the reset product


def gru_cell(h_prev, x, params: GRUParams) -> Tensor:
    h_prev, x = as_tensor(h_prev), as_tensor(x)
    d = h_prev.shape[1]
    if x.shape != h_prev.shape or params.w_input.shape != (d, 3 * d):
        raise ValueError(f"gru_cell shape mismatch: h {h_prev.shape}, x {x.shape}")
    gx = add(matmul(x, params.w_input), params.b_input)
    gh = matmul(h_prev, params.w_hidden)
    zr = sigmoid(add(_cols(gx, 0, 2 * d), _cols(gh, 0, 2 * d)))
    z = _cols(zr, 0, d)
    r = _cols(zr, d, 2 * d)
    n = tanh(add(_cols(gx, 2 * d, 3 * d), mul(r, add(_cols(gh, 2 * d, 3 * d), params.b_hidden_n))))
    # (1 - z) * n + z * h  ==  n + z * (h - n)
    return add(n, mul(z, add(h_prev, mul(n, -1.0))))


def _cols(x: Tensor, start: int, stop: int) -> Tensor:
    shape = x.shape

    def backward(g):
        out = np.zeros(shape)
        out[:, start:stop] = g
        return (out,)

    return _make(x.value[:, start:stop], (x,), backward)


# modules ------------------------------------------------------------------------

class Module:
    """Container whose Parameters (direct or nested) are discoverable by name.

    Attribute assignment order defines parameter order.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, value in vars(self).items():
            yield from _walk(value, f"{prefix}{key}")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def assign_names(self, prefix: str) -> None:
        for name, p in self.named_parameters(prefix + "."):
            p.name = name

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = [p.name for p in params if p.name not in state]
        if missing:
            raise KeyError(f"missing parameters: {missing[:5]}")
        expected = {p.name for p in params}
        unexpected = sorted(set(state) - expected)
        if unexpected:
            raise KeyError(f"unexpected parameters: {unexpected[:5]}")
        for p in params:
            value = np.asarray(state[p.name], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(f"{p.name}: shape {value.shape} != {p.shape}")
            p.value = value.copy()

    def num_parameters(self) -> int:
        return int(sum(p.value.size for p in self.parameters()))


def _walk(value, name: str):
    if isinstance(value, Parameter):
        yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(name + ".")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(item, f"{name}.{i}")


class Linear(Module):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, bias: bool = True) -> None:
        self.w = Parameter(glorot_uniform(rng, d_in, d_out))
        self.b = Parameter(np.zeros(d_out)) if bias else None

    def __call__(self, x) -> Tensor:
        return affine(x, self.w, self.b)

    def named_parameters(self, prefix: str = ""):
        yield f"{prefix}w", self.w
        if self.b is not None:
            yield f"{prefix}b", self.b


class MLP(Module):
    """Stack of affine maps; leaky activation (and dropout) after each hidden
    map, and after the last one unless ``final_activation`` is False."""

    def __init__(
        self,
        rng: np.random.Generator,
        widths: Sequence[int],
        slope: float = 0.01,
        dropout_rate: float = 0.0,
        final_activation: bool = True,
    ) -> None:
        if len(widths) < 2:
            raise ValueError("an MLP needs at least input and output widths")
        self.layers = [Linear(rng, a, b) for a, b in zip(widths[:-1], widths[1:])]
        self.slope = slope
        self.dropout_rate = dropout_rate
        self.final_activation = final_activation

    def __call__(self, x, training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        h = as_tensor(x)
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < last or self.final_activation:
                h = leaky_relu(h, self.slope)
                h = dropout(h, self.dropout_rate, training, rng)
        return h


class GRUCell(Module):
    def __init__(self, rng: np.random.Generator, dim: int) -> None:
        w_in = np.concatenate([glorot_uniform(rng, dim, dim) for _ in range(3)], axis=1)
        w_h = np.concatenate([glorot_uniform(rng, dim, dim) for _ in range(3)], axis=1)
        self.params = GRUParams(
            w_input=Parameter(w_in),
            w_hidden=Parameter(w_h),
            b_input=Parameter(np.zeros(3 * dim)),
            b_hidden_n=Parameter(np.zeros(dim)),
        )

    def named_parameters(self, prefix: str = ""):
        for key in ("w_input", "w_hidden", "b_input", "b_hidden_n"):
            yield f"{prefix}{key}", getattr(self.params, key)

    def __call__(self, h_prev, x) -> Tensor:
        return gru_cell(h_prev, x, self.params)


__all__ = [
    "GRUCell",
    "GRUParams",
    "Linear",
    "MLP",
    "Module",
    "Segments",
    "affine",
    "concat",
    "dropout",
    "glorot_uniform",
    "gru_cell",
    "segment_sum",
]
