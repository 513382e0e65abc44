"""Graphs for mode-wise regularization: Laplacians, smoothness, and the two
adjacency builders used by the experiments (distance kernel and shared-sector).
"""

from __future__ import annotations

import csv

import numpy as np

__all__ = [
    "GraphSpec",
    "laplacian_from_adjacency",
    "smoothness",
    "kernel_adjacency",
    "sector_adjacency",
    "read_sector_file",
    "write_matrix_csv",
]


class GraphSpec:
    """One mode's graph: adjacency, diagonal degree matrix and Laplacian L = D - A.

    Instances are immutable after construction; build them with
    :func:`laplacian_from_adjacency`.
    """

    __slots__ = ("size", "adjacency", "degree", "laplacian")

    def __init__(self, adjacency: np.ndarray):
        adjacency = np.asarray(adjacency, dtype=np.float64)
        self.size = adjacency.shape[0]
        self.adjacency = adjacency
        self.degree = np.diag(adjacency.sum(axis=1))
        self.laplacian = self.degree - adjacency
        for a in (self.adjacency, self.degree, self.laplacian):
            a.setflags(write=False)

    def __repr__(self) -> str:
        return f"GraphSpec(size={self.size}, edges={int(np.count_nonzero(self.adjacency) // 2)})"


def laplacian_from_adjacency(a, *, atol: float = 1e-9) -> GraphSpec:
    """Build a :class:`GraphSpec` from a weighted adjacency matrix.

    The matrix must be square, symmetric within `atol` and nonnegative.
    Floating-point asymmetry up to `atol` is absorbed by symmetrizing with
    (A + A^T)/2, and the diagonal is zeroed (self-loops cancel in L = D - A).

    Raises
    ------
    ValueError
        If the matrix is not square, is asymmetric beyond `atol`, or has
        negative entries.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {a.shape}")
    if np.max(np.abs(a - a.T), initial=0.0) > atol:
        raise ValueError(f"adjacency asymmetric beyond tolerance {atol}")
    a = (a + a.T) / 2.0
    np.fill_diagonal(a, 0.0)
    if np.min(a, initial=0.0) < 0.0:
        raise ValueError("adjacency entries must be nonnegative")
    return GraphSpec(a)


def _laplacian_of(l) -> np.ndarray:
    if isinstance(l, GraphSpec):
        return l.laplacian
    return np.asarray(l, dtype=np.float64)


def smoothness(u, l) -> float:
    """Graph-signal smoothness tr(U^T L U) of the columns of U.

    Zero for signals constant on each connected component; small when the
    signal varies little across connected vertices.

    Parameters
    ----------
    u : array_like
        I x R matrix of R graph signals (a single vector is treated as R=1).
    l : GraphSpec or array_like
        Laplacian of a graph with I vertices.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 1:
        u = u[:, None]
    lap = _laplacian_of(l)
    if u.shape[0] != lap.shape[0]:
        raise ValueError(
            f"signal rows {u.shape[0]} do not match graph size {lap.shape[0]}"
        )
    return float(np.trace(u.T @ lap @ u))


def kernel_adjacency(rows, beta: float = 1.0) -> np.ndarray:
    """Distance-kernel adjacency a_ij = exp(-beta * ||r_i - r_j||) over row vectors.

    The Euclidean norm is used. The diagonal is forced to zero.

    Parameters
    ----------
    rows : array_like
        I vectors of equal length (an I x d matrix).
    beta : float
        Positive decay rate; larger values shrink the similarity faster.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValueError("kernel_adjacency needs a nonempty set of equal-length vectors")
    if beta <= 0:
        raise ValueError("beta must be positive")
    diff = rows[:, None, :] - rows[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    a = np.exp(-beta * dist)
    np.fill_diagonal(a, 0.0)
    return a


def sector_adjacency(sectors) -> np.ndarray:
    """Unit-weight adjacency connecting i and j exactly when their labels match."""
    labels = list(sectors)
    if not labels:
        raise ValueError("sector_adjacency needs a nonempty label list")
    arr = np.asarray(labels, dtype=object)
    a = (arr[:, None] == arr[None, :]).astype(np.float64)
    np.fill_diagonal(a, 0.0)
    return a


def read_sector_file(path) -> dict:
    """Read a `ticker,sector` CSV into an ordered ticker -> sector mapping."""
    out: dict = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["ticker", "sector"]:
            raise ValueError(f"{path}: expected header 'ticker,sector', got {reader.fieldnames}")
        for row in reader:
            out[row["ticker"].strip()] = row["sector"].strip()
    if not out:
        raise ValueError(f"{path}: no sector rows")
    return out


def write_matrix_csv(path, m) -> None:
    """Export a matrix (adjacency or Laplacian) as plain CSV, one row per line."""
    m = np.asarray(m, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        for row in m:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")
