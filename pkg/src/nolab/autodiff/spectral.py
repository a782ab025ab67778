"""Fourier-domain primitives.

Normalization is fixed: forward transforms are unnormalized, inverse
transforms carry the ``1/(H*W)`` factor (numpy's ``"backward"`` norm).
Transforms act on the last two axes.
"""

from __future__ import annotations

import contextlib
from collections.abc import Iterator

import numpy as np

from .tensor import ShapeError, Tensor, apply_primitive, primitive

_counter = {"forward": 0, "inverse": 0}


@contextlib.contextmanager
def count_transforms() -> Iterator[dict[str, int]]:
    """Count forward/inverse 2-D transforms executed inside the block."""
    start = dict(_counter)
    result = {"forward": 0, "inverse": 0}
    try:
        yield result
    finally:
        for key in result:
            result[key] = _counter[key] - start[key]


def _complex_dtype(a: np.ndarray) -> np.dtype:
    return np.dtype(np.complex64) if a.dtype in (np.float32, np.complex64) else np.dtype(np.complex128)


def _cast_like(g: np.ndarray, a: np.ndarray) -> np.ndarray:
    if a.dtype.kind != "c":
        g = g.real
    return g.astype(a.dtype, copy=False)


@primitive("fft2")
def _fft2(a):
    _counter["forward"] += 1
    out = np.fft.fft2(a).astype(_complex_dtype(a), copy=False)
    hw = a.shape[-1] * a.shape[-2]
    # adjoint of the unnormalized DFT is its conjugate transpose = H*W * ifft2
    return out, lambda g: (_cast_like(np.fft.ifft2(g) * hw, a),)


@primitive("ifft2")
def _ifft2(a):
    _counter["inverse"] += 1
    out = np.fft.ifft2(a).astype(_complex_dtype(a), copy=False)
    hw = a.shape[-1] * a.shape[-2]
    return out, lambda g: (_cast_like(np.fft.fft2(g) / hw, a),)


@primitive("rfft2")
def _rfft2(a):
    if a.dtype.kind == "c":
        raise TypeError("rfft2 expects a real tensor")
    _counter["forward"] += 1
    out = np.fft.rfft2(a).astype(_complex_dtype(a), copy=False)
    h, w = a.shape[-2:]

    def vjp(g):
        full = np.zeros(g.shape[:-1] + (w,), dtype=g.dtype)
        full[..., : g.shape[-1]] = g
        return ((np.fft.ifft2(full).real * (h * w)).astype(a.dtype),)

    return out, vjp


@primitive("irfft2")
def _irfft2(a, s):
    h, w = s
    if a.shape[-1] != w // 2 + 1 or a.shape[-2] != h:
        raise ShapeError(f"irfft2: half-spectrum {a.shape[-2:]} does not match output {s}")
    _counter["inverse"] += 1
    real_dtype = np.float32 if a.dtype == np.complex64 else np.float64
    out = np.fft.irfft2(a, s=s).astype(real_dtype, copy=False)
    weight = np.full(w // 2 + 1, 2.0)
    weight[0] = 1.0
    if w % 2 == 0:
        weight[-1] = 1.0

    def vjp(g):
        return ((np.fft.rfft2(g) * weight / (h * w)).astype(a.dtype),)

    return out, vjp


def fft2(x: Tensor) -> Tensor:
    return apply_primitive("fft2", (x,))


def ifft2(x: Tensor) -> Tensor:
    return apply_primitive("ifft2", (x,))


def rfft2(x: Tensor) -> Tensor:
    return apply_primitive("rfft2", (x,))


def irfft2(x: Tensor, s: tuple[int, int]) -> Tensor:
    return apply_primitive("irfft2", (x,), {"s": tuple(s)})


# ----------------------------------------------------------------------
# Mode truncation on the half spectrum
# ----------------------------------------------------------------------

def retained_rows(h: int, modes: int) -> np.ndarray:
    """Row indices kept when retaining ``modes`` frequencies per sign."""
    if modes >= h // 2:
        return np.arange(h)
    return np.concatenate([np.arange(modes), np.arange(h - modes, h)])


def retained_cols(w: int, modes: int) -> int:
    """Half-spectrum columns kept; ``modes >= w//2`` keeps Nyquist too."""
    return w // 2 + 1 if modes >= w // 2 else modes


@primitive("mode_select")
def _mode_select(a, rows, cols):
    out = a[..., rows, :cols]

    def vjp(g):
        ga = np.zeros_like(a)
        ga[..., rows, :cols] = g
        return (ga,)

    return np.ascontiguousarray(out), vjp


@primitive("mode_embed")
def _mode_embed(a, rows, shape):
    h, wr = shape
    out = np.zeros(a.shape[:-2] + (h, wr), dtype=a.dtype)
    cols = a.shape[-1]
    out[..., rows, :cols] = a
    return out, lambda g: (np.ascontiguousarray(g[..., rows, :cols]),)


def mode_select(x: Tensor, modes1: int, modes2: int) -> Tensor:
    h, w = x.shape[-2], 2 * (x.shape[-1] - 1)
    return apply_primitive(
        "mode_select", (x,), {"rows": retained_rows(h, modes1), "cols": min(modes2, x.shape[-1])}
    )


def mode_embed(x: Tensor, modes1: int, shape: tuple[int, int]) -> Tensor:
    return apply_primitive("mode_embed", (x,), {"rows": retained_rows(shape[0], modes1), "shape": tuple(shape)})


@primitive("channel_mix")
def _channel_mix(x, w):
    # x: (B, I, ...), w: (I, O, ...) -> (B, O, ...), independently per trailing index
    if x.shape[1] != w.shape[0] or x.shape[2:] != w.shape[2:]:
        raise ShapeError(f"channel_mix: input {x.shape} vs weights {w.shape}")
    out = np.einsum("bi...,io...->bo...", x, w)

    def vjp(g):
        gx = np.einsum("bo...,io...->bi...", g, np.conj(w))
        gw = np.einsum("bi...,bo...->io...", np.conj(x), g)
        return _cast_like(gx, x), _cast_like(gw, w)

    return out, vjp


def channel_mix(x: Tensor, w: Tensor) -> Tensor:
    """Per-mode linear map across the channel axis."""
    return apply_primitive("channel_mix", (x, w))


# ----------------------------------------------------------------------
# Band-limited resampling
# ----------------------------------------------------------------------

def _resize_spectrum(spec: np.ndarray, n_new: int, axis: int, fold: str) -> np.ndarray:
    """Grow or shrink a full spectrum along ``axis`` keeping low modes.

    ``fold`` sets how the Nyquist coefficient of the smaller grid relates to
    the +/- Nyquist pair of the larger one: ``split`` halves it into both,
    ``copy`` duplicates it, ``sum`` / ``mean`` combine the pair.
    """
    n = spec.shape[axis]
    if n_new == n:
        return spec
    spec = np.moveaxis(spec, axis, -1)
    small, large = min(n, n_new), max(n, n_new)
    half = small // 2
    out = np.zeros(spec.shape[:-1] + (n_new,), dtype=spec.dtype)
    if n_new > n:
        out[..., :half] = spec[..., :half]
        out[..., large - half + 1:] = spec[..., small - half + 1:]
        nyq = spec[..., half]
        if fold == "split":
            out[..., half] = nyq / 2
            out[..., large - half] = nyq / 2
        else:
            out[..., half] = nyq
            out[..., large - half] = nyq
    else:
        out[..., :half] = spec[..., :half]
        out[..., small - half + 1:] = spec[..., large - half + 1:]
        pair = spec[..., half] + spec[..., large - half]
        out[..., half] = pair if fold == "sum" else pair / 2
    return np.moveaxis(out, -1, axis)


def _resample_axis(x: np.ndarray, n_new: int, axis: int, adjoint_of: str | None = None) -> np.ndarray:
    n = x.shape[axis]
    if n_new == n:
        return x
    spec = np.fft.fft(x, axis=axis)
    if adjoint_of is None:
        fold = "split" if n_new > n else "sum"
        scale = n_new / n
    else:
        # adjoint of up (n_new < n here) averages the pair; adjoint of down copies
        fold = "mean" if adjoint_of == "up" else "copy"
        scale = 1.0
    spec = _resize_spectrum(spec, n_new, axis, fold)
    return (np.fft.ifft(spec, axis=axis).real * scale).astype(x.dtype)


def resample_array(x: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Band-limited interpolation of real samples on the last two axes."""
    for extent in (*x.shape[-2:], *target):
        if extent % 2:
            raise ValueError(f"spectral resampling needs even extents, got {x.shape[-2:]} -> {target}")
    out = _resample_axis(x, target[0], x.ndim - 2)
    return _resample_axis(out, target[1], x.ndim - 1)


@primitive("spectral_resample")
def _spectral_resample(a, target):
    out = resample_array(a, target)
    src = a.shape[-2:]

    def vjp(g):
        gy = g
        # reverse order of the separable forward passes
        gy = _resample_axis(gy, src[1], g.ndim - 1, "up" if target[1] > src[1] else "down")
        gy = _resample_axis(gy, src[0], g.ndim - 2, "up" if target[0] > src[0] else "down")
        return (gy,)

    return out, vjp


def spectral_resample(x: Tensor, target: tuple[int, int]) -> Tensor:
    """Resample a real field to ``target`` by Fourier zero-padding or truncation.

    Function values are preserved (interpolation), so a band-limited field
    keeps its samples exactly when upsampled and then downsampled.
    """
    return apply_primitive("spectral_resample", (x,), {"target": tuple(target)})
