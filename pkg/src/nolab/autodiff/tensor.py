"""Dense tensors with reverse-mode differentiation.

Every differentiable operation is a *primitive*: a forward function on raw
numpy arrays that returns the output array together with a vector-Jacobian
closure. Applying a primitive to tracked inputs attaches a record entry to
the output tensor; :func:`backward` orders those entries topologically into a
:class:`ComputationRecord` and sweeps it once in reverse.

Complex gradients follow the conjugate convention: for a real loss ``L`` and
a complex value ``z`` the stored gradient is ``dL/dRe(z) + 1j * dL/dIm(z)``.
Records are not consumed by a sweep, so ``backward`` may be called again on
the same output.
"""

from __future__ import annotations

import contextlib
from collections.abc import Callable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

GELU_C = 0.7978845608
GELU_A = 0.044715

REAL_DTYPES = (np.float32, np.float64)


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class DetachedError(RuntimeError):
    pass


_state = {"grad_enabled": True}


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate without appending anything to a computation record."""
    prev = _state["grad_enabled"]
    _state["grad_enabled"] = False
    try:
        yield
    finally:
        _state["grad_enabled"] = prev


@dataclass(eq=False)
class Entry:
    kind: str
    inputs: tuple[Tensor, ...]
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tensor:
    """n-dimensional array, optionally tracked for differentiation.

    Real tensors are float32 or float64; complex tensors (complex64 /
    complex128) store real and imaginary parts as a numpy complex array.
    """

    __slots__ = ("data", "requires_grad", "_entry", "_detached", "name", "__weakref__")

    def __init__(self, data: Any, requires_grad: bool = False, dtype: Any = None, name: str | None = None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind in "iub":
            arr = arr.astype(np.float64)
        if arr.dtype not in (np.float32, np.float64, np.complex64, np.complex128):
            raise TypeError(f"unsupported dtype {arr.dtype}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self._entry: Entry | None = None
        self._detached = False
        self.name = name

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_complex(self) -> bool:
        return self.data.dtype.kind == "c"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def detach(self) -> Tensor:
        out = Tensor(self.data)
        out._detached = True
        return out

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # -- operator sugar --------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scalar_mul(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if np.isscalar(other):
            return scalar_mul(self, 1.0 / other)
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, key):
        return slice_(self, key)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def permute(self, *axes):
        return permute(self, axes)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


def as_tensor(x: Any, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = None
    if like is not None and np.isscalar(x) and not isinstance(x, complex):
        dtype = like.data.real.dtype
    return Tensor(np.asarray(x, dtype=dtype))


def zeros_like(x: Tensor) -> Tensor:
    return Tensor(np.zeros_like(x.data))


# ----------------------------------------------------------------------
# Primitive registry
# ----------------------------------------------------------------------

Forward = Callable[..., tuple[np.ndarray, Callable[[np.ndarray], Sequence[np.ndarray | None]]]]
PRIMITIVES: dict[str, Forward] = {}


def primitive(kind: str):
    def register(fn: Forward) -> Forward:
        PRIMITIVES[kind] = fn
        return fn

    return register


def apply_primitive(kind: str, inputs: Sequence[Tensor], attrs: Mapping[str, Any] | None = None) -> Tensor:
    """Run primitive ``kind`` and, if any input is tracked, record it."""
    try:
        fwd = PRIMITIVES[kind]
    except KeyError:
        raise ValueError(f"unknown primitive kind {kind!r}") from None
    inputs = tuple(as_tensor(x) for x in inputs)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out, vjp = fwd(*(x.data for x in inputs), **dict(attrs or {}))
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"{kind} produced non-finite values")
    result = Tensor(out)
    if _state["grad_enabled"] and any(x.requires_grad for x in inputs):
        result.requires_grad = True
        result._entry = Entry(kind, inputs, vjp)
    return result


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...], dtype: np.dtype) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    if dtype.kind != "c" and g.dtype.kind == "c":
        g = g.real
    return g.astype(dtype, copy=False)


def _real_grad(g: np.ndarray, dtype: np.dtype) -> np.ndarray:
    if dtype.kind != "c" and g.dtype.kind == "c":
        g = g.real
    return g.astype(dtype, copy=False)


@primitive("add")
def _add(a, b):
    out = a + b
    return out, lambda g: (_unbroadcast(g, a.shape, a.dtype), _unbroadcast(g, b.shape, b.dtype))


@primitive("sub")
def _sub(a, b):
    out = a - b
    return out, lambda g: (_unbroadcast(g, a.shape, a.dtype), _unbroadcast(-g, b.shape, b.dtype))


@primitive("mul")
def _mul(a, b):
    out = a * b
    return out, lambda g: (
        _unbroadcast(g * np.conj(b), a.shape, a.dtype),
        _unbroadcast(g * np.conj(a), b.shape, b.dtype),
    )


@primitive("div")
def _div(a, b):
    out = a / b
    return out, lambda g: (
        _unbroadcast(g / np.conj(b), a.shape, a.dtype),
        _unbroadcast(-g * np.conj(out / b), b.shape, b.dtype),
    )


@primitive("scalar_mul")
def _scalar_mul(a, scale):
    s = np.asarray(scale, dtype=a.real.dtype) if not isinstance(scale, complex) else scale
    out = a * s
    return out, lambda g: (_real_grad(g * np.conj(s), a.dtype),)


@primitive("pow")
def _pow(a, exponent):
    out = a**exponent
    return out, lambda g: (g * (exponent * a ** (exponent - 1)),)


@primitive("sqrt")
def _sqrt(a):
    out = np.sqrt(a)
    return out, lambda g: (g * 0.5 / out,)


@primitive("exp")
def _exp(a):
    out = np.exp(a)
    return out, lambda g: (g * out,)


@primitive("tanh")
def _tanh(a):
    out = np.tanh(a)
    return out, lambda g: (g * (1 - out * out),)


@primitive("abs")
def _abs(a):
    out = np.abs(a)
    return out, lambda g: (g * np.sign(a),)


@primitive("relu")
def _relu(a):
    mask = a > 0
    out = np.where(mask, a, np.zeros((), a.dtype))
    return out, lambda g: (g * mask,)


@primitive("gelu")
def _gelu(a):
    c = np.asarray(GELU_C, a.dtype)
    k = np.asarray(GELU_A, a.dtype)
    inner = c * a * (1 + k * a * a)
    th = np.tanh(inner)
    out = 0.5 * a * (1 + th)

    def vjp(g):
        dinner = c * (1 + 3 * k * a * a)
        return (g * (0.5 * (1 + th) + 0.5 * a * (1 - th * th) * dinner),)

    return out, vjp


@primitive("identity")
def _identity(a):
    return a.copy(), lambda g: (g,)


@primitive("matmul")
def _matmul(a, b):
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape} do not align")
    out = np.matmul(a, b)

    def vjp(g):
        ga = np.matmul(g, np.conj(np.swapaxes(b, -1, -2)))
        gb = np.matmul(np.conj(np.swapaxes(a, -1, -2)), g)
        return _unbroadcast(ga, a.shape, a.dtype), _unbroadcast(gb, b.shape, b.dtype)

    return out, vjp


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


@primitive("sum")
def _sum(a, axis=None, keepdims=False):
    axes = _norm_axis(axis, a.ndim)
    out = np.sum(a, axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).astype(a.dtype),)

    return np.asarray(out), vjp


@primitive("mean")
def _mean(a, axis=None, keepdims=False):
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    out = np.mean(a, axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, a.shape).astype(a.dtype),)

    return np.asarray(out), vjp


@primitive("slice")
def _slice(a, key):
    out = a[key]

    def vjp(g):
        ga = np.zeros_like(a)
        np.add.at(ga, key, g) if _has_fancy(key) else ga.__setitem__(key, g)
        return (ga,)

    return np.array(out), vjp


def _has_fancy(key) -> bool:
    if not isinstance(key, tuple):
        key = (key,)
    return any(isinstance(k, (list, np.ndarray)) for k in key)


@primitive("pad")
def _pad(a, widths):
    widths = tuple(tuple(w) for w in widths)
    if len(widths) != a.ndim:
        raise ShapeError(f"pad widths {widths} do not match rank {a.ndim}")
    out = np.pad(a, widths)
    key = tuple(slice(lo, lo + n) for (lo, _), n in zip(widths, a.shape))
    return out, lambda g: (g[key],)


@primitive("reshape")
def _reshape(a, shape):
    try:
        out = a.reshape(shape)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return out, lambda g: (g.reshape(a.shape),)


@primitive("permute")
def _permute(a, axes):
    axes = tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"bad permutation {axes} for rank {a.ndim}")
    inv = tuple(np.argsort(axes))
    return np.transpose(a, axes).copy(), lambda g: (np.transpose(g, inv),)


@primitive("concat")
def _concat(*arrays, axis=0):
    out = np.concatenate(arrays, axis=axis)
    bounds = np.cumsum([0] + [x.shape[axis] for x in arrays])

    def vjp(g):
        return tuple(
            np.take(g, range(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:])
        )

    return out, vjp


@primitive("real")
def _real(a):
    return np.ascontiguousarray(a.real), lambda g: (g.astype(a.dtype),)


@primitive("imag")
def _imag(a):
    return np.ascontiguousarray(a.imag), lambda g: ((1j * g).astype(a.dtype),)


@primitive("complex")
def _complex(re, im):
    if re.shape != im.shape:
        raise ShapeError(f"complex parts differ in shape: {re.shape} vs {im.shape}")
    out = re + 1j * im
    return out, lambda g: (g.real.astype(re.dtype), g.imag.astype(im.dtype))


# ----------------------------------------------------------------------
# Thin wrappers
# ----------------------------------------------------------------------

def _binary(kind, a, b):
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = as_tensor(b, like=a)
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = as_tensor(a, like=b)
    a, b = as_tensor(a), as_tensor(b)
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: shapes {a.shape} and {b.shape} do not broadcast") from None
    return apply_primitive(kind, (a, b))


def add(a, b) -> Tensor:
    return _binary("add", a, b)


def sub(a, b) -> Tensor:
    return _binary("sub", a, b)


def mul(a, b) -> Tensor:
    return _binary("mul", a, b)


def div(a, b) -> Tensor:
    return _binary("div", a, b)


def scalar_mul(a: Tensor, scale: float) -> Tensor:
    return apply_primitive("scalar_mul", (a,), {"scale": scale})


def power(a: Tensor, exponent: float) -> Tensor:
    return apply_primitive("pow", (a,), {"exponent": exponent})


def sqrt(a: Tensor) -> Tensor:
    return apply_primitive("sqrt", (a,))


def exp(a: Tensor) -> Tensor:
    return apply_primitive("exp", (a,))


def tanh(a: Tensor) -> Tensor:
    return apply_primitive("tanh", (a,))


def abs_(a: Tensor) -> Tensor:
    return apply_primitive("abs", (a,))


def relu(a: Tensor) -> Tensor:
    return apply_primitive("relu", (a,))


def gelu(a: Tensor) -> Tensor:
    return apply_primitive("gelu", (a,))


def matmul(a, b) -> Tensor:
    return apply_primitive("matmul", (as_tensor(a), as_tensor(b)))


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    return apply_primitive("sum", (a,), {"axis": axis, "keepdims": keepdims})


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    return apply_primitive("mean", (a,), {"axis": axis, "keepdims": keepdims})


def slice_(a: Tensor, key) -> Tensor:
    return apply_primitive("slice", (a,), {"key": key})


def pad(a: Tensor, widths) -> Tensor:
    return apply_primitive("pad", (a,), {"widths": widths})


def reshape(a: Tensor, shape) -> Tensor:
    return apply_primitive("reshape", (a,), {"shape": tuple(shape)})


def permute(a: Tensor, axes) -> Tensor:
    return apply_primitive("permute", (a,), {"axes": tuple(axes)})


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return apply_primitive("concat", tuple(tensors), {"axis": axis})


def real(a: Tensor) -> Tensor:
    return apply_primitive("real", (a,))


def imag(a: Tensor) -> Tensor:
    return apply_primitive("imag", (a,))


def complex_(re: Tensor, im: Tensor) -> Tensor:
    return apply_primitive("complex", (re, im))


ACTIVATIONS = {
    "gelu": gelu,
    "relu": relu,
    "tanh": tanh,
    "identity": lambda x: x,
}


def activation(tag: str) -> Callable[[Tensor], Tensor]:
    try:
        return ACTIVATIONS[tag]
    except KeyError:
        raise ValueError(f"unknown activation {tag!r}") from None


# ----------------------------------------------------------------------
# Reverse sweep
# ----------------------------------------------------------------------

@dataclass
class ComputationRecord:
    """Executed primitive applications in topological order."""

    nodes: list[Tensor] = field(default_factory=list)

    @classmethod
    def trace(cls, output: Tensor) -> ComputationRecord:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            if node._entry is not None:
                for inp in reversed(node._entry.inputs):
                    if inp.requires_grad and id(inp) not in seen:
                        stack.append((inp, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self.nodes)


class Gradients(Mapping):
    """Gradient map keyed by tensor identity."""

    def __init__(self, items: dict[int, tuple[Tensor, Tensor]] | None = None):
        self._items = items or {}

    def __getitem__(self, key: Tensor) -> Tensor:
        return self._items[id(key)][1]

    def __contains__(self, key: object) -> bool:
        return id(key) in self._items

    def __iter__(self):
        return (t for t, _ in self._items.values())

    def __len__(self) -> int:
        return len(self._items)

    def get(self, key, default=None):
        item = self._items.get(id(key))
        return default if item is None else item[1]


def backward(output: Tensor) -> Gradients:
    """Gradients of a one-element ``output`` w.r.t. every tracked leaf."""
    if output.size != 1:
        raise ShapeError(f"backward needs a scalar seed, got shape {output.shape}")
    if output._detached:
        raise DetachedError("output was detached from its computation record")
    if not output.requires_grad:
        return Gradients()
    record = ComputationRecord.trace(output)
    grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
    leaves: dict[int, tuple[Tensor, Tensor]] = {}
    for node in reversed(record.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        entry = node._entry
        if entry is None:
            leaves[id(node)] = (node, Tensor(g))
            continue
        for inp, gi in zip(entry.inputs, entry.vjp(g)):
            if gi is None or not inp.requires_grad:
                continue
            prev = grads.get(id(inp))
            grads[id(inp)] = gi if prev is None else prev + gi
    return Gradients(leaves)
