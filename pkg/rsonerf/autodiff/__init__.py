from .optim import AdamState, adam_step
from .tensor import (
    ACTIVATIONS,
    Tape,
    Tensor,
    activation,
    add,
    apply,
    backward,
    clamp,
    columns,
    concat,
    linear,
    matmul,
    mse_loss,
    mul,
    reshape,
    sub,
    total,
)


__all__ = (
    "ACTIVATIONS",
    "AdamState",
    "Tape",
    "Tensor",
    "activation",
    "adam_step",
    "add",
    "apply",
    "backward",
    "clamp",
    "columns",
    "concat",
    "linear",
    "matmul",
    "mse_loss",
    "mul",
    "reshape",
    "sub",
    "total",
)
