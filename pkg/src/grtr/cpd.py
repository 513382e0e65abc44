"""Canonical polyadic (CPD) factor representation and its dense equivalents.

A rank-R CPD stores an order-N tensor as N factor matrices U^(n) of shape
I_n x R; the tensor is the sum over r of the outer products of the r-th
factor columns. Everything here keeps the factors as the primary object:
reconstruction, unfoldings, vectorization and single-coefficient reads all
derive from them.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .tensor_ops import khatri_rao, outer

__all__ = [
    "CpdFactors",
    "reconstruct",
    "matricized",
    "khatri_rao_complement",
    "cpd_vectorize",
    "coefficient_at",
    "save_factors",
    "load_factors",
]


class CpdFactors:
    """Ordered CPD factor matrices, one I_n x R matrix per mode.

    Factor matrices are stored column-major so that extracting a factor
    column (one graph signal) is a cheap view.
    """

    __slots__ = ("factors",)

    def __init__(self, factors):
        mats = tuple(np.asfortranarray(np.asarray(u, dtype=np.float64)) for u in factors)
        if not mats:
            raise ValueError("CpdFactors needs at least one factor matrix")
        for u in mats:
            if u.ndim != 2:
                raise ValueError("factor matrices must be 2-dimensional")
            if u.shape[0] < 1 or u.shape[1] < 1:
                raise ValueError("factor matrices must be at least 1x1")
        ranks = {u.shape[1] for u in mats}
        if len(ranks) != 1:
            raise ValueError(f"factor matrices disagree on rank: {sorted(ranks)}")
        self.factors = mats

    def __repr__(self) -> str:
        return f"CpdFactors(shape={self.shape}, rank={self.rank})"

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def shape(self) -> tuple:
        return tuple(u.shape[0] for u in self.factors)

    @property
    def n_params(self) -> int:
        """Trainable entry count R * sum(I_n), excluding any bias."""
        return self.rank * sum(self.shape)

    def copy(self) -> "CpdFactors":
        return CpdFactors([u.copy() for u in self.factors])


def reconstruct(f: CpdFactors) -> np.ndarray:
    """Materialize the dense tensor: sum over r of outer(u_r^(1), ..., u_r^(N))."""
    out = np.zeros(f.shape)
    for r in range(f.rank):
        out += outer(*(u[:, r] for u in f.factors))
    return out


def khatri_rao_complement(f: CpdFactors, n: int) -> np.ndarray:
    """Khatri-Rao chain over all factors except mode n, in descending mode order.

    Returns the prod(I_k, k != n) x R matrix
    U^(N) kr ... kr U^(n+1) kr U^(n-1) kr ... kr U^(1).
    """
    if not 1 <= n <= f.order:
        raise ValueError(f"mode {n} out of range for an order-{f.order} CPD")
    out = None
    for i in range(f.order, 0, -1):
        if i == n:
            continue
        u = f.factors[i - 1]
        out = u if out is None else khatri_rao(out, u)
    if out is None:
        # order-1 CPD: the empty chain is the 1 x R row of ones
        out = np.ones((1, f.rank))
    return out


def matricized(f: CpdFactors, n: int) -> np.ndarray:
    """Mode-n unfolding of the CPD tensor, computed from the factors.

    Equals ``matricize(reconstruct(f), n)`` without materializing the
    dense tensor first.
    """
    return f.factors[n - 1] @ khatri_rao_complement(f, n).T


def cpd_vectorize(f: CpdFactors) -> np.ndarray:
    """Vectorization of the CPD tensor: the full descending Khatri-Rao chain
    applied to the all-ones vector. Equals ``vectorize(reconstruct(f))``."""
    out = None
    for i in range(f.order, 0, -1):
        u = f.factors[i - 1]
        out = u if out is None else khatri_rao(out, u)
    return out @ np.ones(f.rank)


def coefficient_at(f: CpdFactors, idx) -> float:
    """Single tensor coefficient sum_r prod_n U^(n)[i_n, r], without
    materializing the tensor.

    `idx` is a 1-based multi-index of length N.
    """
    idx = tuple(int(i) for i in idx)
    if len(idx) != f.order:
        raise ValueError(f"index of length {len(idx)} for an order-{f.order} CPD")
    for n, (i, size) in enumerate(zip(idx, f.shape), start=1):
        if not 1 <= i <= size:
            raise ValueError(f"index {i} out of range for mode {n} of size {size}")
    prod = np.ones(f.rank)
    for u, i in zip(f.factors, idx):
        prod *= u[i - 1, :]
    return float(prod.sum())


def save_factors(path, f: CpdFactors, bias: float = 0.0, config: dict | None = None) -> None:
    """Write factors, bias and an optional config echo as JSON.

    Factor matrices are serialized row-major. The file is written to a
    temporary sibling and renamed so failures never leave partial output.
    """
    doc = {
        "rank": f.rank,
        "shapes": list(f.shape),
        "factors": [np.ascontiguousarray(u).ravel().tolist() for u in f.factors],
        "bias": float(bias),
    }
    if config is not None:
        doc["config"] = config
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def load_factors(path):
    """Read a model file written by :func:`save_factors`.

    Returns
    -------
    (CpdFactors, float, dict or None)
        Factors, bias, and the config echo if one was stored.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    rank = int(doc["rank"])
    shapes = [int(s) for s in doc["shapes"]]
    mats = []
    for size, flat in zip(shapes, doc["factors"]):
        mats.append(np.asarray(flat, dtype=np.float64).reshape(size, rank))
    f = CpdFactors(mats)
    return f, float(doc.get("bias", 0.0)), doc.get("config")
