"""Regression core: CPD-factored multilinear models trained by per-mode
gradient descent, with optional mode-wise graph smoothness penalties, plus
closed-form linear baselines.

The trained predictor is  y = <W, X> + b  where the weight tensor W is kept
in CPD factor form. The loss over M samples is

    (1/M) sum_m 0.5 (y_m - <W, X_m> - b)^2
  + (1/N) sum_n 0.5 lambda_n tr(U^(n)T L^(n) U^(n))

and the training loop sweeps the modes, taking one gradient step per factor
matrix per iteration (an alternating sweep with gradient updates rather than
exact least-squares sub-solves).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .cpd import CpdFactors, khatri_rao_complement, reconstruct
from .exceptions import DivergenceError
from .graph import GraphSpec
from .tensor_ops import contract_vector, inner, khatri_rao

__all__ = [
    "GrtrConfig",
    "TrainTrace",
    "predict_materialized",
    "predict_factored",
    "predict_batch",
    "modewise_breakdown",
    "loss",
    "grad_bias",
    "grad_factor",
    "fit_gd",
    "fit_linear",
]


@dataclass(frozen=True)
class GrtrConfig:
    """Training hyper-parameters for the gradient-descent loop.

    `lambdas` may be a single float (applied to every mode) or one value per
    mode. `rho` is accepted for interface compatibility but has no effect on
    the loss or the updates; passing a value triggers a warning.
    """

    rank: int = 1
    lambdas: float | tuple = 0.0
    learning_rate: float = 1e-2
    tolerance: float = 0.0
    max_steps: int = 500
    seed: int = 0
    init_scale: float = 0.1
    bias_update: str = "per_mode"
    rho: float | tuple | None = None

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.init_scale <= 0:
            raise ValueError("init_scale must be positive")
        if self.bias_update not in ("per_mode", "per_epoch"):
            raise ValueError("bias_update must be 'per_mode' or 'per_epoch'")
        if self.rho is not None:
            warnings.warn(
                "rho is accepted for interface compatibility but is unused",
                stacklevel=3,
            )

    def lambdas_for(self, n_modes: int) -> np.ndarray:
        lam = self.lambdas
        if np.isscalar(lam):
            out = np.full(n_modes, float(lam))
        else:
            out = np.asarray(lam, dtype=np.float64)
            if out.shape != (n_modes,):
                raise ValueError(
                    f"lambdas has length {out.size}, expected one per mode ({n_modes})"
                )
        if np.any(out < 0):
            raise ValueError("lambdas must be >= 0")
        return out


@dataclass
class TrainTrace:
    """Per-iteration record of the training loop.

    `mse` holds the convergence quantity (training mean squared error) and
    `loss` the full objective, both measured at the top of each iteration
    before that iteration's updates.
    """

    mse: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration,mse,loss\n")
            for k, (m, l) in enumerate(zip(self.mse, self.loss), start=1):
                fh.write(f"{k},{m!r},{l!r}\n")


# ---------------------------------------------------------------------------
# prediction paths


def predict_materialized(f: CpdFactors, bias: float, x) -> float:
    """Predict by reconstructing the dense weight tensor: <W, X> + b."""
    return inner(reconstruct(f), x) + bias


def predict_factored(f: CpdFactors, bias: float, x) -> float:
    """Predict without materializing W: for each rank-1 term, contract the
    input with the mode factors one mode at a time, then sum the scalars."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != f.shape:
        raise ValueError(f"input shape {x.shape} does not match factors {f.shape}")
    total = 0.0
    for r in range(f.rank):
        z = x
        for u in f.factors:
            z = contract_vector(z, 1, u[:, r])
        total += z
    return float(total + bias)


def predict_batch(f: CpdFactors, bias: float, X, path: str = "materialized") -> np.ndarray:
    """Vectorized prediction over samples stacked along the first axis."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1:] != f.shape:
        raise ValueError(f"sample shape {X.shape[1:]} does not match factors {f.shape}")
    m = X.shape[0]
    if path == "materialized":
        w = reconstruct(f).ravel()
        return X.reshape(m, -1) @ w + bias
    if path == "factored":
        out = np.zeros(m)
        for r in range(f.rank):
            z = X
            for u in f.factors:
                z = np.tensordot(z, u[:, r], axes=([1], [0]))
            out += z
        return out + bias
    raise ValueError(f"unknown prediction path {path!r}")


def modewise_breakdown(f: CpdFactors, bias: float, x) -> list:
    """Chains of intermediates from contracting the input mode by mode.

    For each rank-1 term r the chain holds the tensor after contracting with
    the mode-1 factor column (order N-1), then mode 2, and so on down to a
    scalar. The final scalars plus the bias sum to the model prediction.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != f.shape:
        raise ValueError(f"input shape {x.shape} does not match factors {f.shape}")
    chains = []
    for r in range(f.rank):
        z = x
        chain = []
        for u in f.factors:
            z = contract_vector(z, 1, u[:, r])
            chain.append(z)
        chains.append(chain)
    return chains


# ---------------------------------------------------------------------------
# loss and gradients


def _laplacian_matrices(laplacians, shape) -> list:
    if laplacians is None:
        return [None] * len(shape)
    if isinstance(laplacians, str) and laplacians == "identity":
        return [np.eye(s) for s in shape]
    laps = list(laplacians)
    if len(laps) != len(shape):
        raise ValueError(
            f"{len(laps)} Laplacians for an order-{len(shape)} model"
        )
    out = []
    for n, (l, size) in enumerate(zip(laps, shape), start=1):
        if l is None:
            out.append(None)
            continue
        mat = l.laplacian if isinstance(l, GraphSpec) else np.asarray(l, dtype=np.float64)
        if mat.shape != (size, size):
            raise ValueError(
                f"Laplacian for mode {n} has shape {mat.shape}, expected {(size, size)}"
            )
        out.append(mat)
    return out


def _check_samples(X, y, shape) -> tuple:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != len(shape) + 1 or X.shape[1:] != tuple(shape):
        raise ValueError(
            f"samples of shape {X.shape[1:]} do not match model modes {tuple(shape)}"
        )
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} samples but {y.size} labels")
    if X.shape[0] == 0:
        raise ValueError("at least one sample is required")
    return X, y


def _unfold_samples(X: np.ndarray, n: int) -> np.ndarray:
    """Stack the mode-n unfoldings of every sample: (M, I_n, prod other), with
    columns ordered lower-modes-fastest to match ``tensor_ops.matricize``."""
    moved = np.moveaxis(X, n, 1)  # (M, I_n, remaining modes ascending)
    order = (0, 1) + tuple(range(moved.ndim - 1, 1, -1))
    return moved.transpose(order).reshape(X.shape[0], X.shape[n], -1)


def _residuals(f: CpdFactors, bias: float, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    m = X.shape[0]
    w = reconstruct(f).ravel()
    return y - (X.reshape(m, -1) @ w + bias)


def loss(f: CpdFactors, bias: float, X, y, lambdas=0.0, laplacians=None) -> float:
    """Objective value: averaged half squared errors plus the mode-averaged
    half smoothness penalties. Modes without a Laplacian contribute zero."""
    X, y = _check_samples(X, y, f.shape)
    n_modes = f.order
    lam = GrtrConfig(lambdas=lambdas).lambdas_for(n_modes)
    laps = _laplacian_matrices(laplacians, f.shape)
    eps = _residuals(f, bias, X, y)
    err = 0.5 * float(np.mean(eps**2))
    reg = 0.0
    for u, l, lm in zip(f.factors, laps, lam):
        if l is None or lm == 0.0:
            continue
        reg += 0.5 * lm * float(np.trace(u.T @ l @ u))
    return err + reg / n_modes


def grad_bias(f: CpdFactors, bias: float, X, y) -> float:
    """Derivative of the loss with respect to the bias: -(1/M) sum_m eps_m."""
    X, y = _check_samples(X, y, f.shape)
    return -float(np.mean(_residuals(f, bias, X, y)))


def grad_factor(f: CpdFactors, bias: float, X, y, n: int, lambdas=0.0, laplacians=None) -> np.ndarray:
    """Derivative of the loss with respect to the mode-n factor matrix:

    -(1/M) sum_m eps_m X_m(n) U^(-n)  +  (lambda_n / N) L^(n) U^(n)

    with U^(-n) the descending Khatri-Rao chain over the other factors.
    """
    X, y = _check_samples(X, y, f.shape)
    n_modes = f.order
    if not 1 <= n <= n_modes:
        raise ValueError(f"mode {n} out of range for an order-{n_modes} model")
    lam = GrtrConfig(lambdas=lambdas).lambdas_for(n_modes)
    laps = _laplacian_matrices(laplacians, f.shape)
    m = X.shape[0]
    comp = khatri_rao_complement(f, n)
    xu = _unfold_samples(X, n) @ comp  # (M, I_n, R)
    eps = _residuals(f, bias, X, y)
    g = -np.einsum("m,mir->ir", eps, xu) / m
    l = laps[n - 1]
    if l is not None and lam[n - 1] != 0.0:
        g = g + (lam[n - 1] / n_modes) * (l @ f.factors[n - 1])
    return g


# ---------------------------------------------------------------------------
# training


def fit_gd(X, y, config: GrtrConfig, laplacians=None):
    """Train CPD factors and bias by per-mode gradient descent.

    Factors and bias are initialized uniformly on [0, init_scale].
    Each outer iteration records the training MSE (the convergence quantity)
    and the full loss, then sweeps the modes: the mode-n gradient is computed
    from the current, partially updated factors, and the bias takes a step
    after every mode (or once per sweep with ``bias_update='per_epoch'``).

    Returns
    -------
    (CpdFactors, float, TrainTrace)

    Raises
    ------
    DivergenceError
        If the training error becomes non-finite.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim < 2:
        raise ValueError("X must stack samples of order >= 1 on its first axis")
    if X.shape[0] != y.size or X.shape[0] == 0:
        raise ValueError(f"{X.shape[0]} samples but {y.size} labels")
    shape = X.shape[1:]
    n_modes = len(shape)
    lam = config.lambdas_for(n_modes)
    laps = _laplacian_matrices(laplacians, shape)

    rng = np.random.default_rng(config.seed)
    # Positive uniform init: symmetric init around zero makes the factored
    # model grow along empirical noise directions before it can pick up the
    # dominant structure, which stalls or inverts recovery on noisy data.
    factors = [
        rng.uniform(0.0, config.init_scale, size=(size, config.rank))
        for size in shape
    ]
    bias = float(rng.uniform(0.0, config.init_scale))

    m = X.shape[0]
    unfolded = [_unfold_samples(X, n) for n in range(1, n_modes + 1)]
    alpha = config.learning_rate
    trace = TrainTrace()

    def mode_products(n0: int) -> np.ndarray:
        comp = None
        for i in reversed(range(n_modes)):
            if i == n0:
                continue
            comp = factors[i] if comp is None else khatri_rao(comp, factors[i])
        if comp is None:  # order-1 model
            comp = np.ones((1, config.rank))
        return unfolded[n0] @ comp  # (M, I_n, R)

    def reg_loss() -> float:
        total = 0.0
        for u, l, lm in zip(factors, laps, lam):
            if l is None or lm == 0.0:
                continue
            total += 0.5 * lm * float(np.trace(u.T @ l @ u))
        return total / n_modes

    eps_mse = np.inf
    k = 0
    # overflow inside a diverging sweep is caught by the finiteness check at
    # the top of the next iteration; keep the interim warnings quiet
    with np.errstate(over="ignore", invalid="ignore"):
        while eps_mse > config.tolerance and k < config.max_steps:
            k += 1
            xu0 = mode_products(0)
            residual = y - (np.einsum("mir,ir->m", xu0, factors[0]) + bias)
            eps_mse = float(np.mean(residual**2))
            if not np.isfinite(eps_mse):
                raise DivergenceError(
                    f"training error became non-finite at iteration {k}; reduce the learning rate"
                )
            trace.mse.append(eps_mse)
            trace.loss.append(0.5 * eps_mse + reg_loss())

            for n0 in range(n_modes):
                xu = xu0 if n0 == 0 else mode_products(n0)
                res = y - (np.einsum("mir,ir->m", xu, factors[n0]) + bias)
                g = -np.einsum("m,mir->ir", res, xu) / m
                if laps[n0] is not None and lam[n0] != 0.0:
                    g = g + (lam[n0] / n_modes) * (laps[n0] @ factors[n0])
                g_bias = -float(np.mean(res))
                factors[n0] = factors[n0] - alpha * g
                if config.bias_update == "per_mode":
                    bias -= alpha * g_bias
            if config.bias_update == "per_epoch":
                xu0 = mode_products(0)
                res = y - (np.einsum("mir,ir->m", xu0, factors[0]) + bias)
                bias -= alpha * -float(np.mean(res))

    trace.iterations = k
    trace.converged = bool(eps_mse <= config.tolerance)
    return CpdFactors(factors), float(bias), trace


# ---------------------------------------------------------------------------
# linear baselines


def fit_linear(X, y, l2: float = 0.0, on_singular: str = "error"):
    """Least-squares baseline on flattened inputs, solved in closed form.

    With ``l2 > 0`` solves the ridge normal equations (bias unpenalized).
    With ``l2 == 0`` solves ordinary least squares; a rank-deficient system
    either raises (``on_singular='error'``) or takes the minimum-norm
    solution (``on_singular='minnorm'``).

    Parameters
    ----------
    X : array_like
        Samples on the first axis; trailing axes are flattened.
    y : array_like
        Labels, one per sample.

    Returns
    -------
    (weights, bias)
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size or y.size == 0:
        raise ValueError(f"{X.shape[0]} samples but {y.size} labels")
    if on_singular not in ("error", "minnorm"):
        raise ValueError("on_singular must be 'error' or 'minnorm'")
    m = X.shape[0]
    flat = X.reshape(m, -1)
    if l2 < 0:
        raise ValueError("l2 must be >= 0")
    if l2 > 0:
        # Unpenalized bias: center, solve the ridge normal equations for the
        # weights, recover the bias from the means. For wide data the dual
        # (Gram) form gives the identical solution at M x M cost.
        x_mean = flat.mean(axis=0)
        y_mean = float(y.mean())
        xc = flat - x_mean
        yc = y - y_mean
        d = flat.shape[1]
        if d <= m:
            w = np.linalg.solve(xc.T @ xc + l2 * np.eye(d), xc.T @ yc)
        else:
            dual = np.linalg.solve(xc @ xc.T + l2 * np.eye(m), yc)
            w = xc.T @ dual
        return w, y_mean - float(x_mean @ w)
    design = np.column_stack([np.ones(m), flat])
    d = design.shape[1]
    coeffs, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < d and on_singular == "error":
        raise np.linalg.LinAlgError(
            "singular least-squares system (more features than independent "
            "samples); use the ridge flavor (l2 > 0) or on_singular='minnorm'"
        )
    return coeffs[1:], float(coeffs[0])
