"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete. Criterion 2 retrains every model over ten seeds and
dominates the runtime (about a minute).
"""

import contextlib
import json
import math
import time

import numpy as np
import pytest

from grtr.cpd import (
    CpdFactors,
    cpd_vectorize,
    matricized,
    reconstruct,
)
from grtr.graph import (
    kernel_adjacency,
    laplacian_from_adjacency,
    sector_adjacency,
    smoothness,
)
from grtr.harness import (
    SyntheticSpec,
    build_windows,
    generate_financial_fixture,
    generate_synthetic,
    ingest_prices,
    run_finance_experiment,
    run_synthetic_experiment,
    split_synthetic,
)
from grtr.model import (
    GrtrConfig,
    fit_gd,
    grad_bias,
    grad_factor,
    loss,
    predict_factored,
    predict_materialized,
)
from grtr.tensor_ops import matricize, vectorize

from oracles import grad_matrix_fd, relative_gradient_error

# Regression bound for criterion 8, pinned from the oracle run of the bundled
# fixture (seed 0): GRTR reached 0.818 test directional accuracy.
FIXTURE_GRTR_ACCURACY_BOUND = 0.70


@contextlib.contextmanager
def criterion(number, name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number} ({name}): FAIL")
        raise
    print(f"ACCEPTANCE {number} ({name}): PASS")


def test_criterion_1_gradient_fidelity():
    with criterion(1, "gradient fidelity"):
        start = time.perf_counter()
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(50):
            order = int(rng.integers(2, 4))
            shape = tuple(int(s) for s in rng.integers(2, 5, size=order))
            rank = int(rng.integers(1, 4))
            m = int(rng.integers(2, 9))
            lam = [float(rng.choice([0.0, 0.5])) for _ in range(order)]
            factors = CpdFactors([rng.normal(size=(s, rank)) for s in shape])
            bias = float(rng.normal())
            X = rng.normal(size=(m,) + shape)
            y = rng.normal(size=m)
            laps = []
            for s in shape:
                a = rng.uniform(0, 1, size=(s, s))
                a = (a + a.T) / 2
                np.fill_diagonal(a, 0.0)
                laps.append(np.diag(a.sum(axis=1)) - a)

            h = 1e-6
            fd_b = (
                loss(factors, bias + h, X, y, lam, laps)
                - loss(factors, bias - h, X, y, lam, laps)
            ) / (2 * h)
            rel = relative_gradient_error(grad_bias(factors, bias, X, y), fd_b)
            worst = max(worst, rel)
            for n in range(1, order + 1):
                def loss_of(u, n=n):
                    mats = [w.copy() for w in factors.factors]
                    mats[n - 1] = u
                    return loss(CpdFactors(mats), bias, X, y, lam, laps)

                fd = grad_matrix_fd(loss_of, factors.factors[n - 1].copy(), step=h)
                an = grad_factor(factors, bias, X, y, n, lam, laps)
                rel = relative_gradient_error(an, fd)
                worst = max(worst, rel)
        elapsed = time.perf_counter() - start
        assert worst < 1e-4, f"worst gradient relative error {worst:.2e}"
        assert elapsed < 30.0, f"gradient suite took {elapsed:.1f}s"


def test_criterion_2_synthetic_reproduction():
    with criterion(2, "synthetic experiment reproduction"):
        start = time.perf_counter()
        report = run_synthetic_experiment(SyntheticSpec(seed=0), n_seeds=10)
        elapsed = time.perf_counter() - start
        med = {e["name"]: e for e in report["median"]}
        w = {name: med[name]["weight_mse"] for name in ("GRTR", "L2TR", "TR", "LR")}
        assert w["GRTR"] < w["L2TR"] < w["TR"] < w["LR"], f"median weight-MSE ordering violated: {w}"
        assert 0.01 <= w["GRTR"] <= 0.06, f"median GRTR weight-MSE {w['GRTR']:.4f} outside [0.01, 0.06]"
        evs = med["GRTR"]["test_explained_variance"]
        assert evs > 0.60, f"median GRTR test EVS {evs:.3f} <= 0.60"
        assert elapsed < 300.0, f"synthetic reproduction took {elapsed:.0f}s"


def test_criterion_3_parameter_counts():
    with criterion(3, "parameter counts"):
        synth_tensor = CpdFactors([np.zeros((10, 5))] * 4)
        assert synth_tensor.n_params == 200
        assert int(np.prod((10,) * 4)) == 10_000
        finance_tensor = CpdFactors([np.zeros((5, 1)), np.zeros((450, 1)), np.zeros((6, 1))])
        assert finance_tensor.n_params == 461
        assert int(np.prod((5, 450, 6))) == 13_500


def test_criterion_4_prediction_path_equivalence():
    with criterion(4, "prediction path equivalence"):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            order = int(rng.integers(1, 5))
            shape = tuple(int(s) for s in rng.integers(1, 5, size=order))
            rank = int(rng.integers(1, 4))
            factors = CpdFactors([rng.normal(size=(s, rank)) for s in shape])
            bias = float(rng.normal())
            x = rng.normal(size=shape)
            a = predict_factored(factors, bias, x)
            b = predict_materialized(factors, bias, x)
            assert abs(a - b) <= 1e-10 * (1 + abs(b))
            c = float(np.dot(cpd_vectorize(factors), vectorize(x))) + bias
            assert abs(c - b) <= 1e-10 * (1 + abs(b))


def test_criterion_5_cpd_identities():
    with criterion(5, "CPD identities"):
        rng = np.random.default_rng(12)
        for _ in range(100):
            order = int(rng.integers(1, 5))
            shape = tuple(int(s) for s in rng.integers(1, 5, size=order))
            rank = int(rng.integers(1, 4))
            f = CpdFactors([rng.normal(size=(s, rank)) for s in shape])
            dense = reconstruct(f)
            scale = max(1.0, float(np.max(np.abs(dense))))
            for n in range(1, order + 1):
                diff = np.max(np.abs(matricized(f, n) - matricize(dense, n)))
                assert diff <= 1e-12 * scale
            vdiff = np.max(np.abs(cpd_vectorize(f) - vectorize(dense)))
            assert vdiff <= 1e-12 * scale


def test_criterion_6_graph_invariants():
    with criterion(6, "graph invariants"):
        rng = np.random.default_rng(13)
        graphs = []
        for _ in range(10):
            size = int(rng.integers(2, 9))
            rows = rng.normal(size=(size, 3))
            graphs.append(laplacian_from_adjacency(kernel_adjacency(rows, beta=1.0)))
            labels = [str(l) for l in rng.integers(0, 3, size=size)]
            graphs.append(laplacian_from_adjacency(sector_adjacency(labels)))
        for g in graphs:
            lap = g.laplacian
            assert np.array_equal(lap, lap.T)
            assert np.max(np.abs(lap @ np.ones(g.size))) < 1e-10
            for _ in range(100):
                x = rng.normal(size=g.size)
                assert x @ lap @ x >= -1e-10
            assert abs(smoothness(np.ones((g.size, 2)), g)) <= 1e-12


def test_criterion_7_regularization_smoothness_effect():
    with criterion(7, "regularization effect"):
        spec = SyntheticSpec(order=3, dim=8, true_rank=2, samples=60, noise_ratio=0.5, seed=21)
        data = generate_synthetic(spec)
        laps = [data.graphs[0], None, None]  # single regularized mode
        common = dict(rank=2, learning_rate=1e-3, max_steps=300, seed=5, init_scale=0.5)
        f0, _, _ = fit_gd(data.inputs, data.labels, GrtrConfig(lambdas=0.0, **common), laps)
        f10, _, _ = fit_gd(data.inputs, data.labels, GrtrConfig(lambdas=10.0, **common), laps)
        s0 = smoothness(f0.factors[0], data.graphs[0])
        s10 = smoothness(f10.factors[0], data.graphs[0])
        assert s10 <= s0, f"smoothness at lambda=10 ({s10:.4f}) exceeds lambda=0 ({s0:.4f})"


def test_criterion_8_financial_pipeline(tmp_path):
    with criterion(8, "financial pipeline"):
        start = time.perf_counter()
        prices = tmp_path / "fixture_prices.csv"
        sectors = tmp_path / "fixture_sectors.csv"
        generate_financial_fixture(prices, sectors, n_stocks=20, n_sectors=4, n_dates=500, seed=0)
        panel = ingest_prices(prices, sectors)
        assert panel.values.shape == (20, 6, 500)

        data = build_windows(panel, window=5)
        train = data.inputs[data.train_idx]
        assert np.max(np.abs(train.mean(axis=(0, 1, 2)))) < 1e-10
        np.testing.assert_allclose(train.std(axis=(0, 1, 2)), 1.0, atol=1e-10)

        # leakage: perturbing the final date leaves every feature tensor and
        # all but the final label untouched
        bumped = ingest_prices(prices, sectors)
        bumped.values[:, :, -1] *= 1.25
        pert = build_windows(bumped, window=5)
        assert np.array_equal(data.inputs, pert.inputs)
        changed = np.nonzero(data.labels_raw != pert.labels_raw)[0]
        assert list(changed) == [data.inputs.shape[0] - 1]

        report, fitted = run_finance_experiment(panel, window=5, seed=0)
        grtr = next(e for e in report["models"] if e["name"] == "GRTR")
        acc = grtr["test"]["directional_accuracy"]
        assert acc > FIXTURE_GRTR_ACCURACY_BOUND, (
            f"GRTR test directional accuracy {acc:.3f} below pinned bound "
            f"{FIXTURE_GRTR_ACCURACY_BOUND}"
        )
        elapsed = time.perf_counter() - start
        assert elapsed < 120.0, f"financial pipeline took {elapsed:.0f}s"


def _scrub_wall_time(doc):
    if isinstance(doc, dict):
        return {k: (None if k == "wall_time_s" else _scrub_wall_time(v)) for k, v in doc.items()}
    if isinstance(doc, list):
        return [_scrub_wall_time(v) for v in doc]
    return doc


def test_criterion_9_determinism(tmp_path):
    with criterion(9, "determinism"):
        from grtr.cli import main

        outputs = []
        for sub in ("a", "b"):
            d = tmp_path / sub
            d.mkdir()
            out = d / "syn.json"
            rc = main([
                "synthetic", "--seed", "7", "--models", "grtr", "--order", "3",
                "--dim", "4", "--true-rank", "2", "--samples", "40", "--rank", "2",
                "--max-steps", "40", "--output", str(out),
            ])
            assert rc == 0
            outputs.append(out)
        docs = [
            json.dumps(_scrub_wall_time(json.loads(p.read_text())), sort_keys=True).encode()
            for p in outputs
        ]
        assert docs[0] == docs[1]

        outputs = []
        for sub in ("c", "d"):
            d = tmp_path / sub
            d.mkdir()
            out = d / "fin.json"
            rc = main([
                "finance", "--fixture", "--seed", "1", "--rank", "1", "--lambda",
                "0,1", "--max-steps", "60", "--output", str(out),
            ])
            assert rc == 0
            outputs.append(out)
        docs = [
            json.dumps(_scrub_wall_time(json.loads(p.read_text())), sort_keys=True).encode()
            for p in outputs
        ]
        assert docs[0] == docs[1]
