"""Dense multilinear operations: vectorization, unfolding, products, contractions.

All functions are pure and operate on float64 ``numpy.ndarray`` inputs.
Mode arguments are 1-based (modes run from 1 to N); internally numpy axes
are 0-based. Storage is the numpy default row-major layout, while the
vectorization and unfolding conventions below are fixed so that the CPD
factor identities hold exactly:

* ``vectorize`` enumerates multi-indices with the *first* index varying
  fastest (column-major order).
* ``matricize`` unfolds mode n into rows, with the remaining modes ordered
  so that lower modes vary fastest along the columns (Kolda convention).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "vectorize",
    "unvectorize",
    "matricize",
    "fold",
    "outer",
    "kronecker",
    "khatri_rao",
    "inner",
    "contract_vector",
]


def _as_tensor(t) -> np.ndarray:
    a = np.asarray(t, dtype=np.float64)
    if a.ndim < 1:
        raise ValueError("tensor must have order N >= 1")
    return a


def _check_mode(n: int, order: int) -> int:
    """Validate a 1-based mode index and return the 0-based axis."""
    if not 1 <= n <= order:
        raise ValueError(f"mode {n} out of range for an order-{order} tensor")
    return n - 1


def vectorize(t) -> np.ndarray:
    """Flatten a tensor to a vector, first index fastest.

    The element at multi-index (i_1, ..., i_N) lands at flat position
    (i_1 - 1) + (i_2 - 1) I_1 + (i_3 - 1) I_1 I_2 + ... (1-based indices).
    """
    return _as_tensor(t).ravel(order="F")


def unvectorize(v, shape) -> np.ndarray:
    """Inverse of :func:`vectorize` for the given shape."""
    v = np.asarray(v, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    if v.ndim != 1 or v.size != int(np.prod(shape)):
        raise ValueError(f"vector of length {v.size} does not fit shape {shape}")
    return np.reshape(v, shape, order="F")


def matricize(t, n: int) -> np.ndarray:
    """Mode-n unfolding of a tensor into an I_n x prod(I_k, k != n) matrix.

    Row i holds every entry whose n-th index equals i. Columns enumerate
    the remaining modes with lower modes varying fastest, so that for CPD
    factors U the identity  W_(n) = U(n) (U(N) kr ... kr U(1), skip n)^T
    holds exactly.

    Parameters
    ----------
    t : array_like
        Tensor of order N >= 1.
    n : int
        Mode to unfold, 1-based.
    """
    t = _as_tensor(t)
    axis = _check_mode(n, t.ndim)
    return np.reshape(np.moveaxis(t, axis, 0), (t.shape[axis], -1), order="F")


def fold(m, n: int, shape) -> np.ndarray:
    """Inverse of :func:`matricize`: rebuild the tensor from its mode-n unfolding.

    Parameters
    ----------
    m : array_like
        Matrix of shape (I_n, prod of the other mode sizes).
    n : int
        Mode the matrix was unfolded along, 1-based.
    shape : sequence of int
        Target tensor shape.
    """
    m = np.asarray(m, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    axis = _check_mode(n, len(shape))
    rest = shape[:axis] + shape[axis + 1 :]
    expected = (shape[axis], int(np.prod(rest)) if rest else 1)
    if m.ndim != 2 or m.shape != expected:
        raise ValueError(
            f"matrix of shape {getattr(m, 'shape', None)} does not match "
            f"mode-{n} unfolding {expected} of shape {shape}"
        )
    t = np.reshape(m, (shape[axis],) + rest, order="F")
    return np.moveaxis(t, 0, axis)


def outer(*vectors) -> np.ndarray:
    """Outer product of N vectors; entry (i_1..i_N) is the product of v^(n)_{i_n}."""
    if not vectors:
        raise ValueError("outer requires at least one vector")
    vs = [np.asarray(v, dtype=np.float64) for v in vectors]
    for v in vs:
        if v.ndim != 1:
            raise ValueError("outer operands must be vectors")
    out = vs[0]
    for v in vs[1:]:
        out = np.multiply.outer(out, v)
    return out


def kronecker(a, b) -> np.ndarray:
    """Kronecker product of an IxJ and a KxL matrix, entry ((i-1)K+k, (j-1)L+l) = a_ij b_kl."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("kronecker operands must be matrices")
    return np.kron(a, b)


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product of two matrices with equal column counts.

    Column r of the result is ``kronecker`` of column r of `a` with column r
    of `b`, giving an (I*J) x R matrix.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("khatri_rao operands must be matrices")
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"column count mismatch: {a.shape[1]} vs {b.shape[1]}"
        )
    i, r = a.shape
    j, _ = b.shape
    return (a[:, None, :] * b[None, :, :]).reshape(i * j, r)


def inner(a, b) -> float:
    """Inner product of two equal-shape tensors (sum of elementwise products)."""
    a = _as_tensor(a)
    b = _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a.ravel(), b.ravel()))


def contract_vector(t, n: int, v):
    """Contract mode n of a tensor with a vector: a linear combination in the
    n-th subspace.

    Equivalent to unfolding mode n, multiplying the transpose by `v`, and
    reshaping to the remaining modes. The result has order N-1; contracting
    an order-1 tensor returns a plain float.

    Parameters
    ----------
    t : array_like
        Tensor of order N >= 1.
    n : int
        Mode to contract, 1-based.
    v : array_like
        Vector of length I_n.
    """
    t = _as_tensor(t)
    v = np.asarray(v, dtype=np.float64)
    axis = _check_mode(n, t.ndim)
    if v.ndim != 1 or v.size != t.shape[axis]:
        raise ValueError(
            f"vector of length {v.size} cannot contract mode {n} of size {t.shape[axis]}"
        )
    out = np.tensordot(t, v, axes=([axis], [0]))
    if out.ndim == 0:
        return float(out)
    return out
