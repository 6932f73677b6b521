"""Dense order-N tensors and the multilinear operators built on them.

The memory convention is fixed once, here, and everything else in the
package relies on it:

* ``vectorize`` linearizes with the first mode varying fastest
  (column-major for matrices);
* ``unfold(t, n)`` produces the matrix whose columns are the mode-n
  fibres, ordered by cycling the remaining modes with the lowest
  remaining mode varying fastest.

Under this convention the vector form of a multi-mode product is
``kronecker_seq([u[-1], ..., u[0]]) @ vectorize(t)``, i.e. the Kronecker
factors appear in reverse mode order.

All operations are pure: tensors are immutable values and every operator
returns a new tensor, so values can be shared freely across threads.
Modes are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

__all__ = [
    "DenseTensor",
    "Unfolding",
    "as_tensor",
    "vectorize",
    "unfold",
    "fold",
    "mode_product",
    "multi_mode_product",
    "kronecker",
    "kronecker_seq",
]


class DenseTensor:
    """Immutable order-N array of 64-bit floats.

    The wrapped buffer is a read-only :class:`numpy.ndarray`; ``dims``
    is its shape and ``order`` the number of modes.  Scalars promote to
    order-1 tensors of length 1.
    """

    __slots__ = ("_data",)

    def __init__(self, data) -> None:
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.size == 0:
            raise ValueError("every mode of a tensor must have length >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor entries must be finite")
        arr.flags.writeable = False
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        """Read-only view of the underlying array."""
        return self._data

    @property
    def dims(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def order(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        """Total number of elements (the product of the dims)."""
        return self._data.size

    def norm(self) -> float:
        """Frobenius norm; equals the Euclidean norm of ``vectorize``."""
        return float(np.linalg.norm(self._data))

    def __getitem__(self, idx):
        return self._data[idx]

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.dims == other.dims and bool(np.all(self._data == other._data))

    __hash__ = None  # mutable-looking value type; compare by content only

    def __repr__(self) -> str:
        return f"DenseTensor(dims={self.dims})"


@dataclass(frozen=True)
class Unfolding:
    """A mode-n unfolding together with the shape it came from.

    ``matrix`` has shape ``(dims[mode], size/dims[mode])`` and its columns
    are the mode-n fibres in the package's fixed column order, so
    ``fold(unfolding.matrix, mode, source_dims)`` reproduces the source
    tensor element for element.
    """

    mode: int
    matrix: np.ndarray
    source_dims: tuple[int, ...] = field(default=())


def as_tensor(t) -> DenseTensor:
    """Coerce an array-like to :class:`DenseTensor` (no-op if already one)."""
    if isinstance(t, DenseTensor):
        return t
    return DenseTensor(t)


def vectorize(t) -> np.ndarray:
    """Flatten a tensor with the first mode varying fastest.

    For an order-2 tensor this stacks the columns (the mode-0 fibres) on
    top of each other in column order.
    """
    return as_tensor(t).data.ravel(order="F")


def _check_mode(order: int, mode: int) -> None:
    if not 0 <= mode < order:
        raise ValueError(f"mode {mode} out of range for order-{order} tensor")


def unfold(t, mode: int) -> Unfolding:
    """Matricize ``t`` along ``mode``.

    Columns are the mode-n fibres, cycling the remaining modes with the
    lowest remaining mode fastest.  For order-2 input, ``unfold(t, 0)``
    is the matrix itself and ``unfold(t, 1)`` its transpose.
    """
    t = as_tensor(t)
    _check_mode(t.order, mode)
    arr = np.moveaxis(t.data, mode, 0)
    matrix = arr.reshape((t.dims[mode], -1), order="F")
    matrix.flags.writeable = False
    return Unfolding(mode=mode, matrix=matrix, source_dims=t.dims)


def fold(matrix, mode: int, dims: Sequence[int]) -> DenseTensor:
    """Inverse of :func:`unfold`: rebuild the tensor of shape ``dims``
    whose mode-n unfolding equals ``matrix``."""
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"invalid dims {dims}")
    _check_mode(len(dims), mode)
    m = np.asarray(matrix, dtype=np.float64)
    size = int(np.prod(dims))
    expected = (dims[mode], size // dims[mode])
    if m.ndim != 2 or m.shape != expected:
        raise ValueError(f"matrix shape {m.shape} does not match mode-{mode} "
                         f"unfolding of dims {dims}; expected {expected}")
    rest = dims[:mode] + dims[mode + 1:]
    arr = m.reshape((dims[mode],) + rest, order="F")
    return DenseTensor(np.moveaxis(arr, 0, mode))


def mode_product(t, u, mode: int) -> DenseTensor:
    """Multiply ``t`` along ``mode`` by the matrix ``u``.

    Implemented as unfold, left matrix multiply, re-tensorize.  The
    result keeps the input dims except that ``dims[mode]`` becomes the
    row count of ``u``.  For order-2 input, ``mode_product(t, u, 0)`` is
    ``u @ t`` and ``mode_product(t, u, 1)`` is ``t @ u.T``.
    """
    t = as_tensor(t)
    _check_mode(t.order, mode)
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2:
        raise ValueError(f"mode-{mode} factor must be a matrix, got ndim={u.ndim}")
    if u.shape[1] != t.dims[mode]:
        raise ValueError(f"matrix with {u.shape[1]} columns cannot multiply "
                         f"mode {mode} of length {t.dims[mode]}")
    y = u @ unfold(t, mode).matrix
    new_dims = t.dims[:mode] + (u.shape[0],) + t.dims[mode + 1:]
    return fold(y, mode, new_dims)


def multi_mode_product(t, matrices: Sequence[np.ndarray]) -> DenseTensor:
    """Apply one matrix per mode, in mode order.

    Products along distinct modes commute, so the application order does
    not affect the result.  The vectorized form satisfies
    ``vectorize(result) == kronecker_seq(reversed(matrices)) @ vectorize(t)``.
    """
    t = as_tensor(t)
    if len(matrices) != t.order:
        raise ValueError(f"expected {t.order} matrices (one per mode), "
                         f"got {len(matrices)}")
    out = t
    for mode, u in enumerate(matrices):
        out = mode_product(out, u, mode)
    return out


def kronecker(a, b) -> np.ndarray:
    """Kronecker product: the block matrix with (i, j) block ``a[i, j] * b``."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    return np.kron(a, b)


def kronecker_seq(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Left fold of :func:`kronecker` over ``matrices`` in the given order."""
    if len(matrices) == 0:
        raise ValueError("kronecker_seq requires at least one matrix")
    mats = [np.atleast_2d(np.asarray(m, dtype=np.float64)) for m in matrices]
    return reduce(np.kron, mats)
