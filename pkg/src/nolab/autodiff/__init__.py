"""Reverse-mode automatic differentiation on numpy arrays."""

from .conv import conv2d
from .gradcheck import check_gradients, max_relative_error, numerical_grad
from .spectral import (
    channel_mix,
    count_transforms,
    fft2,
    ifft2,
    irfft2,
    mode_embed,
    mode_select,
    resample_array,
    retained_cols,
    retained_rows,
    rfft2,
    spectral_resample,
)
from .tensor import (
    ComputationRecord,
    DetachedError,
    Gradients,
    NonFiniteError,
    ShapeError,
    Tensor,
    abs_,
    activation,
    add,
    apply_primitive,
    as_tensor,
    backward,
    complex_,
    concat,
    div,
    exp,
    gelu,
    imag,
    matmul,
    mean,
    mul,
    no_grad,
    pad,
    permute,
    power,
    real,
    relu,
    reshape,
    scalar_mul,
    slice_,
    sqrt,
    sub,
    sum_,
    tanh,
    zeros_like,
)

__all__ = [name for name in dir() if not name.startswith("_")]
