"""Minimal dense-tensor engine with reverse-mode differentiation."""

from .layers import (
    MLP,
    GRUCell,
    GRUParams,
    Linear,
    Module,
    Segments,
    affine,
    dropout,
    glorot_uniform,
    gru_cell,
    segment_sum,
)
from .optim import AdamState, adam_step
from .tensor import (
    Parameter,
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    exp,
    leaky_relu,
    matmul,
    mean,
    mul,
    no_grad,
    reshape,
    sigmoid,
    square,
    sub,
    sum_all,
    take_rows,
    tanh,
)

__all__ = [
    "AdamState",
    "GRUCell",
    "GRUParams",
    "Linear",
    "MLP",
    "Module",
    "Parameter",
    "Segments",
    "Tensor",
    "adam_step",
    "add",
    "affine",
    "as_tensor",
    "backward",
    "concat",
    "dropout",
    "exp",
    "glorot_uniform",
    "gru_cell",
    "leaky_relu",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "reshape",
    "segment_sum",
    "sigmoid",
    "square",
    "sub",
    "sum_all",
    "take_rows",
    "tanh",
]
