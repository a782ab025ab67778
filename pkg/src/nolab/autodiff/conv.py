"""Same-size 2-D cross-correlation."""

from __future__ import annotations

import numpy as np

from .tensor import ShapeError, Tensor, apply_primitive, primitive

PADDING_MODES = ("zero", "circular")


def _pad_input(x: np.ndarray, ph: int, pw: int, mode: str) -> np.ndarray:
    widths = ((0, 0), (0, 0), (ph, ph), (pw, pw))
    return np.pad(x, widths, mode="wrap" if mode == "circular" else "constant")


def _fold_padding(gp: np.ndarray, ph: int, pw: int, mode: str) -> np.ndarray:
    """Adjoint of the padding step: crop, wrapping edge gradients back if circular."""
    h, w = gp.shape[2] - 2 * ph, gp.shape[3] - 2 * pw
    if mode == "circular":
        gp = gp.copy()
        if ph:
            gp[:, :, ph:2 * ph, :] += gp[:, :, ph + h:, :]
            gp[:, :, h:h + ph, :] += gp[:, :, :ph, :]
        if pw:
            gp[:, :, :, pw:2 * pw] += gp[:, :, :, pw + w:]
            gp[:, :, :, w:w + pw] += gp[:, :, :, :pw]
    return gp[:, :, ph:ph + h, pw:pw + w]


@primitive("conv2d")
def _conv2d(x, k, padding="zero"):
    if padding not in PADDING_MODES:
        raise ValueError(f"unknown padding mode {padding!r}")
    if x.ndim != 4 or k.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and kernel, got {x.shape}, {k.shape}")
    b, cin, h, w = x.shape
    cout, kcin, kh, kw = k.shape
    if kcin != cin:
        raise ShapeError(f"conv2d channel mismatch: input has {cin}, kernel expects {kcin}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d kernel extents must be odd, got {kh}x{kw}")
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    xp = _pad_input(x, ph, pw, padding)
    if kh == 1 and kw == 1:
        out = np.einsum("oi,bihw->bohw", k[:, :, 0, 0], x, optimize=True)

        def vjp1(g):
            gx = np.einsum("oi,bohw->bihw", k[:, :, 0, 0], g, optimize=True)
            gk = np.einsum("bohw,bihw->oi", g, x, optimize=True)
            return gx, gk[:, :, None, None]

        return out, vjp1

    # im2col: (B, H, W, Cin*kh*kw)
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b, h, w, cin * kh * kw)
    kmat = k.reshape(cout, -1)
    out = np.ascontiguousarray((cols @ kmat.T).transpose(0, 3, 1, 2))

    def vjp(g):
        gt = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(-1, cout)
        gk = (gt.T @ cols.reshape(-1, cols.shape[-1])).reshape(k.shape)
        gcols = (gt @ kmat).reshape(b, h, w, cin, kh, kw)
        gp = np.zeros_like(xp)
        for dy in range(kh):
            for dx in range(kw):
                gp[:, :, dy:dy + h, dx:dx + w] += gcols[:, :, :, :, dy, dx].transpose(0, 3, 1, 2)
        return _fold_padding(gp, ph, pw, padding), gk

    return out, vjp


def conv2d(x: Tensor, kernel: Tensor, padding: str = "zero") -> Tensor:
    """Cross-correlate ``x`` (B, Cin, H, W) with ``kernel`` (Cout, Cin, kh, kw).

    Output keeps the input's spatial size; ``padding`` is ``"zero"`` or
    ``"circular"``.
    """
    return apply_primitive("conv2d", (x, kernel), {"padding": padding})
