"""Experiment harnesses: synthetic planted-model study and the financial
forecasting pipeline (ingestion, windowing, grid search, metrics, reports).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .cpd import CpdFactors, reconstruct
from .exceptions import DataError, DivergenceError
from .graph import (
    kernel_adjacency,
    laplacian_from_adjacency,
    read_sector_file,
    sector_adjacency,
)
from .model import GrtrConfig, fit_gd, fit_linear, predict_batch

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1

PRICE_FEATURES = ("adj_close", "close", "high", "low", "open", "volume")


# ---------------------------------------------------------------------------
# synthetic experiment


@dataclass(frozen=True)
class SyntheticSpec:
    """Planted-model generator settings."""

    order: int = 4
    dim: int = 10
    true_rank: int = 5
    samples: int = 125
    noise_ratio: float = 0.5
    beta: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.order, self.dim, self.true_rank, self.samples) < 1:
            raise ValueError("order, dim, true_rank and samples must be positive")
        if self.noise_ratio < 0:
            raise ValueError("noise_ratio must be >= 0")
        if self.beta <= 0:
            raise ValueError("beta must be positive")


@dataclass
class SyntheticData:
    spec: SyntheticSpec
    true_factors: CpdFactors
    weight: np.ndarray
    inputs: np.ndarray
    labels: np.ndarray
    clean_labels: np.ndarray
    graphs: list


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """Draw a planted CPD regression problem.

    Ground-truth factors are uniform on [0, 1); inputs are standard normal;
    labels are the exact contractions plus Gaussian noise whose standard
    deviation is ``noise_ratio`` times the noiseless label deviation. One
    distance-kernel graph per mode is built from the true factor rows, so
    the graphs carry real information about the planted weights.
    """
    rng = np.random.default_rng(spec.seed)
    shape = (spec.dim,) * spec.order
    true = CpdFactors(
        [rng.uniform(0.0, 1.0, size=(spec.dim, spec.true_rank)) for _ in range(spec.order)]
    )
    weight = reconstruct(true)
    inputs = rng.normal(size=(spec.samples,) + shape)
    clean = inputs.reshape(spec.samples, -1) @ weight.ravel()
    sigma_y = float(np.std(clean))
    noise = rng.normal(0.0, spec.noise_ratio * sigma_y, size=spec.samples)
    labels = clean + noise
    graphs = [
        laplacian_from_adjacency(kernel_adjacency(u, beta=spec.beta))
        for u in true.factors
    ]
    return SyntheticData(spec, true, weight, inputs, labels, clean, graphs)


def split_synthetic(n_samples: int, seed: int, train_fraction: float = 0.8):
    """Seeded shuffle then a leading train / trailing test split."""
    if n_samples < 5:
        raise DataError(f"need at least 5 samples to split, got {n_samples}")
    perm = np.random.default_rng(seed).permutation(n_samples)
    n_train = int(math.floor(train_fraction * n_samples))
    return perm[:n_train], perm[n_train:]


# ---------------------------------------------------------------------------
# metrics


def metrics(y_true, y_pred) -> dict:
    """Mean squared error, explained variance, and directional accuracy.

    Sign agreement treats zero as positive. When the targets have zero
    variance the explained variance is undefined and reported as NaN.
    """
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if y_true.size != y_pred.size:
        raise ValueError(f"length mismatch: {y_true.size} vs {y_pred.size}")
    if y_true.size == 0:
        raise ValueError("metrics need at least one sample")
    resid = y_true - y_pred
    mse = float(np.mean(resid**2))
    var = float(np.var(y_true))
    evs = math.nan if var == 0.0 else 1.0 - float(np.var(resid)) / var
    sign_true = np.where(y_true >= 0, 1.0, -1.0)
    sign_pred = np.where(y_pred >= 0, 1.0, -1.0)
    acc = float(np.mean(sign_true == sign_pred))
    return {"mse": mse, "explained_variance": evs, "directional_accuracy": acc}


def weight_mse(estimated, truth) -> float:
    """Mean squared entrywise error between two weight tensors."""
    estimated = np.asarray(estimated, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimated.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimated.shape} vs {truth.shape}")
    return float(np.mean((estimated - truth) ** 2))


# ---------------------------------------------------------------------------
# grid search


def grid_search(
    X_train,
    y_train,
    X_val,
    y_val,
    ranks,
    lambdas,
    base_config: GrtrConfig,
    laplacians=None,
):
    """Exhaustive (rank, lambda) search scored by validation MSE.

    Each cell trains one model on the training split with its own derived
    seed. Failed cells are recorded, not fatal. Ties break toward the
    smaller rank, then the smaller lambda.

    Returns
    -------
    (best, cells)
        `best` is the winning cell dict; `cells` lists every cell with its
        validation MSE or error string.
    """
    ranks = list(ranks)
    lambdas = list(lambdas)
    if not ranks or not lambdas:
        raise ValueError("ranks and lambdas grids must be nonempty")
    cells = []
    for idx, (rank, lam) in enumerate((r, l) for r in ranks for l in lambdas):
        cell = {"rank": int(rank), "lambda": float(lam)}
        try:
            cfg = GrtrConfig(
                rank=int(rank),
                lambdas=float(lam),
                learning_rate=base_config.learning_rate,
                tolerance=base_config.tolerance,
                max_steps=base_config.max_steps,
                seed=base_config.seed + idx,
                init_scale=base_config.init_scale,
                bias_update=base_config.bias_update,
            )
            factors, bias, trace = fit_gd(X_train, y_train, cfg, laplacians)
            cell["val_mse"] = float(np.mean((y_val - predict_batch(factors, bias, X_val)) ** 2))
            cell["iterations"] = trace.iterations
        except (DivergenceError, ValueError, FloatingPointError) as exc:
            cell["error"] = str(exc)
            logger.warning("grid cell rank=%s lambda=%s failed: %s", rank, lam, exc)
        cells.append(cell)
    scored = [c for c in cells if "val_mse" in c]
    if not scored:
        raise DataError("every grid-search cell failed")
    best = min(scored, key=lambda c: (c["val_mse"], c["rank"], c["lambda"]))
    return best, cells


# ---------------------------------------------------------------------------
# financial pipeline


@dataclass
class PanelDataset:
    """Complete market-data panel: values[s, f, t] for ticker s, feature f, date t."""

    tickers: list
    dates: list
    features: tuple
    values: np.ndarray
    sectors: dict

    @property
    def n_dates(self) -> int:
        return self.values.shape[2]


@dataclass
class WindowedDataset:
    """Chronological rolling windows with train-range standardization.

    `inputs` has shape (n_windows, T, S, F) with the time mode ordered most
    recent first, standardized per feature by the train-range statistics.
    Labels are next-step index returns, standardized likewise; the raw
    labels are kept for sign-based scoring.
    """

    inputs: np.ndarray
    labels: np.ndarray
    labels_raw: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    feature_mean: np.ndarray
    feature_std: np.ndarray
    label_mean: float
    label_std: float
    tickers: list
    features: tuple
    sectors: dict

    @property
    def window(self) -> int:
        return self.inputs.shape[1]

    def destandardize_labels(self, y_std) -> np.ndarray:
        return np.asarray(y_std) * self.label_std + self.label_mean


def ingest_prices(prices_path, sectors_path) -> PanelDataset:
    """Load a long-format prices CSV and a sector map into a complete panel.

    Tickers with any missing value over the full date range are dropped with
    a warning, as are tickers missing from the sector file.
    """
    try:
        frame = pd.read_csv(prices_path)
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read prices file {prices_path}: {exc}") from exc
    expected = ["date", "ticker", *PRICE_FEATURES]
    if list(frame.columns) != expected:
        raise DataError(
            f"{prices_path}: expected columns {expected}, got {list(frame.columns)}"
        )
    try:
        sectors = read_sector_file(sectors_path)
    except OSError as exc:
        raise DataError(f"cannot read sectors file {sectors_path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc

    frame["date"] = frame["date"].astype(str)
    dates = sorted(frame["date"].unique())
    tickers = sorted(frame["ticker"].unique())

    kept = []
    panels = []
    for ticker in tickers:
        if ticker not in sectors:
            logger.warning("ticker %s missing from sector file; dropped", ticker)
            continue
        sub = frame[frame["ticker"] == ticker].set_index("date")
        if sub.index.duplicated().any():
            raise DataError(f"{prices_path}: duplicate rows for ticker {ticker}")
        sub = sub.reindex(dates)
        values = sub[list(PRICE_FEATURES)].to_numpy(dtype=np.float64)
        if np.isnan(values).any():
            logger.warning("ticker %s has missing values; dropped", ticker)
            continue
        kept.append(ticker)
        panels.append(values.T)  # (F, T')
    if not kept:
        raise DataError(f"{prices_path}: no ticker has complete data")
    values = np.stack(panels, axis=0)  # (S, F, T')
    return PanelDataset(
        tickers=kept,
        dates=dates,
        features=PRICE_FEATURES,
        values=values,
        sectors={t: sectors[t] for t in kept},
    )


def _log_returns(panel: PanelDataset, volume_mode: str) -> np.ndarray:
    values = panel.values
    if np.any(values <= 0):
        raise DataError("panel contains nonpositive values; log returns undefined")
    returns = np.log(values[:, :, 1:]) - np.log(values[:, :, :-1])
    if volume_mode == "raw":
        vol = list(panel.features).index("volume")
        returns[:, vol, :] = values[:, vol, 1:]
    elif volume_mode != "log_diff":
        raise ValueError("volume_mode must be 'log_diff' or 'raw'")
    return returns  # (S, F, T'-1)


def build_windows(
    panel: PanelDataset,
    window: int = 5,
    index_ticker: str | None = None,
    volume_mode: str = "log_diff",
    split=(0.5, 0.3),
) -> WindowedDataset:
    """Turn a panel into rolling-window tensors with next-step index labels.

    All features are converted to log differences (`volume_mode='raw'` keeps
    the raw volume level instead). The window at position t stacks the last
    `window` return steps, most recent first, and its label is the index
    return one step ahead: the equal-weighted mean of the constituents'
    adjusted-close returns, or the returns of `index_ticker` when given.
    The split is strictly chronological and the standardization statistics
    come from the training range only.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    returns = _log_returns(panel, volume_mode)
    n_steps = returns.shape[2]
    n_windows = n_steps - window
    if n_windows < 5:
        raise DataError(
            f"insufficient history: {panel.n_dates} dates give {max(n_windows, 0)} windows"
        )

    adj = list(panel.features).index("adj_close")
    if index_ticker is None:
        index_returns = returns[:, adj, :].mean(axis=0)
    else:
        if index_ticker not in panel.tickers:
            raise DataError(f"index ticker {index_ticker!r} not in panel")
        index_returns = returns[panel.tickers.index(index_ticker), adj, :]

    n_stocks, n_features = returns.shape[0], returns.shape[1]
    inputs = np.empty((n_windows, window, n_stocks, n_features))
    labels_raw = np.empty(n_windows)
    for w in range(n_windows):
        block = returns[:, :, w : w + window]  # (S, F, T) oldest..newest
        inputs[w] = block[:, :, ::-1].transpose(2, 0, 1)  # (T, S, F) newest first
        labels_raw[w] = index_returns[w + window]

    n_train = int(math.floor(split[0] * n_windows))
    n_val = int(math.floor(split[1] * n_windows))
    train_idx = np.arange(n_train)
    val_idx = np.arange(n_train, n_train + n_val)
    test_idx = np.arange(n_train + n_val, n_windows)
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise DataError("split produced an empty train or test range")

    train_block = inputs[train_idx]
    feature_mean = train_block.mean(axis=(0, 1, 2))
    feature_std = train_block.std(axis=(0, 1, 2))
    safe_std = np.where(feature_std > 0, feature_std, 1.0)
    inputs = (inputs - feature_mean) / safe_std

    label_mean = float(labels_raw[train_idx].mean())
    label_std = float(labels_raw[train_idx].std())
    safe_label_std = label_std if label_std > 0 else 1.0
    labels = (labels_raw - label_mean) / safe_label_std

    return WindowedDataset(
        inputs=inputs,
        labels=labels,
        labels_raw=labels_raw,
        train_idx=train_idx,
        val_idx=val_idx,
        test_idx=test_idx,
        feature_mean=feature_mean,
        feature_std=feature_std,
        label_mean=label_mean,
        label_std=label_std,
        tickers=list(panel.tickers),
        features=panel.features,
        sectors=dict(panel.sectors),
    )


def stock_mode_laplacians(data: WindowedDataset):
    """Per-mode Laplacian list for (time, stocks, features): sector graph on
    the stock mode only."""
    labels = [data.sectors[t] for t in data.tickers]
    graph = laplacian_from_adjacency(sector_adjacency(labels))
    return [None, graph, None]


# ---------------------------------------------------------------------------
# bundled fixture generator


FIXTURE_SECTORS = ("SEMIS", "BANKS", "ENERGY", "RETAIL")


def generate_financial_fixture(
    prices_path,
    sectors_path,
    n_stocks: int = 20,
    n_sectors: int = 4,
    n_dates: int = 500,
    window: int = 5,
    seed: int = 0,
) -> None:
    """Write a planted-structure prices/sectors CSV pair.

    Log returns carry a common component driven by a sector-smooth rank-1
    weight model applied to the trailing window, plus noise, so a model
    trained on the generated files can genuinely predict the next-step index
    return. Prices are the exponentiated cumulative returns.
    """
    if n_sectors < 1 or n_stocks % n_sectors != 0:
        raise ValueError("n_stocks must divide evenly into n_sectors")
    if n_dates < window + 10:
        raise ValueError("n_dates too small for the requested window")
    rng = np.random.default_rng(seed)
    per_sector = n_stocks // n_sectors
    sector_names = [FIXTURE_SECTORS[g % len(FIXTURE_SECTORS)] + (str(g // len(FIXTURE_SECTORS)) if g >= len(FIXTURE_SECTORS) else "") for g in range(n_sectors)]
    tickers = [f"TK{i:02d}" for i in range(n_stocks)]
    sectors = {t: sector_names[i // per_sector] for i, t in enumerate(tickers)}

    # Planted rank-1 weights: decaying time profile (most recent first),
    # sector-constant stock profile summing to zero (no feedback through the
    # common return channel), and weights concentrated on the price features.
    u_time = 0.6 ** np.arange(window)
    base_vals = np.linspace(1.0, -1.0, n_sectors)
    base_vals -= base_vals.mean()
    u_stock = np.repeat(base_vals, per_sector)
    u_feat = np.array([1.0, 0.7, 0.3, 0.3, 0.2, 0.0])
    planted = np.einsum("t,s,f->tsf", u_time, u_stock, u_feat)
    # Scale so the signal variance lands near the idiosyncratic return scale.
    sigma_idio = 0.010
    sigma_common = 0.004
    gain = 0.9 / np.linalg.norm(planted.ravel()) / sigma_idio * sigma_common
    planted = planted * gain

    n_steps = n_dates - 1
    n_features = len(PRICE_FEATURES)
    returns = np.zeros((n_stocks, n_features, n_steps))
    for j in range(n_steps):
        if j >= window:
            block = returns[:, :, j - window : j]
            x = block[:, :, ::-1].transpose(2, 0, 1)  # (T, S, F) newest first
            signal = float(np.sum(planted * x))
        else:
            signal = 0.0
        common = signal + rng.normal(0.0, sigma_common)
        idio = rng.normal(0.0, sigma_idio, size=n_stocks)
        idio -= idio.mean()
        r_adj = common + idio
        returns[:, 0, j] = r_adj
        returns[:, 1, j] = r_adj + rng.normal(0.0, 0.001, size=n_stocks)
        returns[:, 2, j] = r_adj + np.abs(rng.normal(0.0, 0.004, size=n_stocks))
        returns[:, 3, j] = r_adj - np.abs(rng.normal(0.0, 0.004, size=n_stocks))
        returns[:, 4, j] = r_adj + rng.normal(0.0, 0.003, size=n_stocks)
        returns[:, 5, j] = rng.normal(0.0, 0.02, size=n_stocks)

    start = np.empty((n_stocks, n_features))
    start[:, :5] = rng.uniform(20.0, 200.0, size=(n_stocks, 5))
    start[:, 5] = rng.uniform(1e6, 5e6, size=n_stocks)
    levels = np.empty((n_stocks, n_features, n_dates))
    levels[:, :, 0] = start
    for j in range(n_steps):
        levels[:, :, j + 1] = levels[:, :, j] * np.exp(returns[:, :, j])

    dates = [d.date().isoformat() for d in pd.bdate_range("2015-01-02", periods=n_dates)]

    with open(prices_path, "w", encoding="utf-8") as fh:
        fh.write("date,ticker," + ",".join(PRICE_FEATURES) + "\n")
        for t_idx, date in enumerate(dates):
            for s_idx, ticker in enumerate(tickers):
                row = ",".join(repr(float(v)) for v in levels[s_idx, :, t_idx])
                fh.write(f"{date},{ticker},{row}\n")
    with open(sectors_path, "w", encoding="utf-8") as fh:
        fh.write("ticker,sector\n")
        for ticker in tickers:
            fh.write(f"{ticker},{sectors[ticker]}\n")


# ---------------------------------------------------------------------------
# experiment runners


def _model_entry(name, n_params, n_params_with_bias, train_metrics, test_metrics, **extra):
    entry = {
        "name": name,
        "params": int(n_params),
        "params_with_bias": int(n_params_with_bias),
        "train": train_metrics,
        "test": test_metrics,
    }
    entry.update(extra)
    return entry


SYNTHETIC_MODELS = ("LR", "L2LR", "TR", "L2TR", "GRTR")


@dataclass(frozen=True)
class SyntheticHyper:
    """Fixed model settings for the synthetic study."""

    rank: int = 5
    learning_rate: float = 3e-4
    tolerance: float = 0.0
    max_steps: int = 600
    init_scale: float = 0.5
    l2lr_lambda: float = 100.0
    l2tr_lambda: float = 10.0
    grtr_lambdas: tuple | float = 75.0


def run_synthetic_once(spec: SyntheticSpec, models, hyper: SyntheticHyper, traces: dict | None = None) -> list:
    """Run one seed of the synthetic experiment; returns model report entries."""
    data = generate_synthetic(spec)
    train_idx, test_idx = split_synthetic(spec.samples, spec.seed)
    X_train, y_train = data.inputs[train_idx], data.labels[train_idx]
    X_test, y_test = data.inputs[test_idx], data.labels[test_idx]
    shape = data.weight.shape
    n_linear = int(np.prod(shape))
    entries = []

    def tensor_config(lambdas=0.0):
        return GrtrConfig(
            rank=hyper.rank,
            lambdas=lambdas,
            learning_rate=hyper.learning_rate,
            tolerance=hyper.tolerance,
            max_steps=hyper.max_steps,
            seed=spec.seed + 1,
            init_scale=hyper.init_scale,
        )

    for name in models:
        t0 = time.perf_counter()
        trace = None
        if name == "LR":
            w, b = fit_linear(X_train, y_train, l2=0.0, on_singular="minnorm")
            estimate = w.reshape(shape)
            yhat_tr = X_train.reshape(len(train_idx), -1) @ w + b
            yhat_te = X_test.reshape(len(test_idx), -1) @ w + b
            n_params = n_linear
        elif name == "L2LR":
            w, b = fit_linear(X_train, y_train, l2=hyper.l2lr_lambda)
            estimate = w.reshape(shape)
            yhat_tr = X_train.reshape(len(train_idx), -1) @ w + b
            yhat_te = X_test.reshape(len(test_idx), -1) @ w + b
            n_params = n_linear
        elif name in ("TR", "L2TR", "GRTR"):
            if name == "TR":
                cfg, laps = tensor_config(0.0), None
            elif name == "L2TR":
                cfg, laps = tensor_config(hyper.l2tr_lambda), "identity"
            else:
                cfg, laps = tensor_config(hyper.grtr_lambdas), data.graphs
            factors, b, trace = fit_gd(X_train, y_train, cfg, laps)
            estimate = reconstruct(factors)
            yhat_tr = predict_batch(factors, b, X_train)
            yhat_te = predict_batch(factors, b, X_test)
            n_params = factors.n_params
        else:
            raise ValueError(f"unknown model name {name!r}")
        wall = time.perf_counter() - t0
        extra = {
            "weight_mse": weight_mse(estimate, data.weight),
            "seed": spec.seed,
            "wall_time_s": wall,
        }
        if trace is not None:
            extra["iterations"] = trace.iterations
            extra["converged"] = trace.converged
            if traces is not None:
                traces[(name, spec.seed)] = trace
        entries.append(
            _model_entry(
                name,
                n_params,
                n_params + 1,
                metrics(y_train, yhat_tr),
                metrics(y_test, yhat_te),
                **extra,
            )
        )
    return entries


def run_synthetic_experiment(
    spec: SyntheticSpec,
    models=SYNTHETIC_MODELS,
    hyper: SyntheticHyper | None = None,
    n_seeds: int = 1,
    traces: dict | None = None,
) -> dict:
    """Run the synthetic study over one or more seeds and assemble a report."""
    hyper = hyper or SyntheticHyper()
    models = list(models)
    per_seed = []
    for offset in range(n_seeds):
        seed_spec = SyntheticSpec(
            order=spec.order,
            dim=spec.dim,
            true_rank=spec.true_rank,
            samples=spec.samples,
            noise_ratio=spec.noise_ratio,
            beta=spec.beta,
            seed=spec.seed + offset,
        )
        per_seed.extend(run_synthetic_once(seed_spec, models, hyper, traces))

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "experiment": "synthetic",
        "config": {
            "order": spec.order,
            "dim": spec.dim,
            "true_rank": spec.true_rank,
            "samples": spec.samples,
            "noise_ratio": spec.noise_ratio,
            "beta": spec.beta,
            "seed": spec.seed,
            "n_seeds": n_seeds,
            "rank": hyper.rank,
            "learning_rate": hyper.learning_rate,
            "tolerance": hyper.tolerance,
            "max_steps": hyper.max_steps,
            "init_scale": hyper.init_scale,
            "l2lr_lambda": hyper.l2lr_lambda,
            "l2tr_lambda": hyper.l2tr_lambda,
            "grtr_lambdas": hyper.grtr_lambdas,
        },
        "models": per_seed,
    }
    if n_seeds > 1:
        medians = []
        for name in models:
            rows = [e for e in per_seed if e["name"] == name]
            medians.append(
                {
                    "name": name,
                    "params": rows[0]["params"],
                    "weight_mse": float(np.median([e["weight_mse"] for e in rows])),
                    "train_explained_variance": float(
                        np.median([e["train"]["explained_variance"] for e in rows])
                    ),
                    "test_explained_variance": float(
                        np.median([e["test"]["explained_variance"] for e in rows])
                    ),
                }
            )
        report["median"] = medians
    return report


@dataclass(frozen=True)
class FinanceHyper:
    """Model and search settings for the financial experiment."""

    ranks: tuple = (1, 2)
    lambdas: tuple = (0.0, 0.1, 1.0, 10.0)
    learning_rate: float = 3e-2
    tolerance: float = 0.0
    max_steps: int = 500
    init_scale: float = 0.1
    l2lr_lambda: float = 100.0


def run_finance_experiment(
    panel: PanelDataset,
    window: int = 5,
    models=SYNTHETIC_MODELS,
    hyper: FinanceHyper | None = None,
    seed: int = 0,
    index_ticker: str | None = None,
    volume_mode: str = "log_diff",
    traces: dict | None = None,
) -> tuple:
    """Windowing, grid search, final training and scoring on a price panel.

    Returns the report dict and the fitted GRTR model (factors, bias) when
    GRTR is among the requested models, else None.
    """
    hyper = hyper or FinanceHyper()
    data = build_windows(panel, window=window, index_ticker=index_ticker, volume_mode=volume_mode)
    laps = stock_mode_laplacians(data)
    X, y = data.inputs, data.labels
    tr, va, te = data.train_idx, data.val_idx, data.test_idx
    X_fit = X[np.concatenate([tr, va])]
    y_fit = y[np.concatenate([tr, va])]
    shape = X.shape[1:]
    n_linear = int(np.prod(shape))
    entries = []
    grids = {}
    fitted_grtr = None

    def score(yhat_tr_std, yhat_te_std):
        train_raw = metrics(data.labels_raw[tr], data.destandardize_labels(yhat_tr_std))
        test_raw = metrics(data.labels_raw[te], data.destandardize_labels(yhat_te_std))
        train_raw["standardized"] = metrics(y[tr], yhat_tr_std)
        test_raw["standardized"] = metrics(y[te], yhat_te_std)
        return train_raw, test_raw

    for name in models:
        t0 = time.perf_counter()
        extra = {"wall_time_s": None}
        trace = None
        if name == "LR":
            w, b = fit_linear(X[tr], y[tr], l2=0.0, on_singular="minnorm")
            yhat_tr = X[tr].reshape(len(tr), -1) @ w + b
            yhat_te = X[te].reshape(len(te), -1) @ w + b
            n_params = n_linear
        elif name == "L2LR":
            w, b = fit_linear(X[tr], y[tr], l2=hyper.l2lr_lambda)
            yhat_tr = X[tr].reshape(len(tr), -1) @ w + b
            yhat_te = X[te].reshape(len(te), -1) @ w + b
            n_params = n_linear
        elif name in ("TR", "L2TR", "GRTR"):
            base = GrtrConfig(
                rank=1,
                learning_rate=hyper.learning_rate,
                tolerance=hyper.tolerance,
                max_steps=hyper.max_steps,
                seed=seed,
                init_scale=hyper.init_scale,
            )
            if name == "TR":
                model_laps, lambdas = None, (0.0,)
            elif name == "L2TR":
                model_laps, lambdas = "identity", tuple(l for l in hyper.lambdas if l > 0) or (1.0,)
            else:
                model_laps, lambdas = laps, hyper.lambdas
            best, cells = grid_search(
                X[tr], y[tr], X[va], y[va], hyper.ranks, lambdas, base, model_laps
            )
            grids[name] = cells
            cfg = GrtrConfig(
                rank=best["rank"],
                lambdas=best["lambda"],
                learning_rate=hyper.learning_rate,
                tolerance=hyper.tolerance,
                max_steps=hyper.max_steps,
                seed=seed,
                init_scale=hyper.init_scale,
            )
            factors, b, trace = fit_gd(X_fit, y_fit, cfg, model_laps)
            yhat_tr = predict_batch(factors, b, X[tr])
            yhat_te = predict_batch(factors, b, X[te])
            n_params = factors.n_params
            extra["selected_rank"] = best["rank"]
            extra["selected_lambda"] = best["lambda"]
            if name == "GRTR":
                fitted_grtr = (factors, b, cfg)
        else:
            raise ValueError(f"unknown model name {name!r}")
        extra["wall_time_s"] = time.perf_counter() - t0
        if trace is not None:
            extra["iterations"] = trace.iterations
            extra["converged"] = trace.converged
            if traces is not None:
                traces[(name, seed)] = trace
        train_m, test_m = score(yhat_tr, yhat_te)
        entries.append(
            _model_entry(name, n_params, n_params + 1, train_m, test_m, **extra)
        )

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "experiment": "finance",
        "config": {
            "window": window,
            "seed": seed,
            "n_tickers": len(data.tickers),
            "n_windows": int(X.shape[0]),
            "split": [int(len(tr)), int(len(va)), int(len(te))],
            "volume_mode": volume_mode,
            "ranks": list(hyper.ranks),
            "lambdas": list(hyper.lambdas),
            "learning_rate": hyper.learning_rate,
            "max_steps": hyper.max_steps,
        },
        "models": entries,
        "grid": grids,
    }
    return report, fitted_grtr
