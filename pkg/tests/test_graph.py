import numpy as np
import pytest

from grtr.graph import (
    GraphSpec,
    kernel_adjacency,
    laplacian_from_adjacency,
    read_sector_file,
    sector_adjacency,
    smoothness,
    write_matrix_csv,
)


def random_graph(size, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 1, size=(size, size))
    a = (a + a.T) / 2
    np.fill_diagonal(a, 0.0)
    return laplacian_from_adjacency(a)


class TestLaplacianFromAdjacency:
    def test_empty_graph(self):
        g = laplacian_from_adjacency(np.zeros((3, 3)))
        np.testing.assert_array_equal(g.laplacian, np.zeros((3, 3)))

    def test_single_edge(self):
        g = laplacian_from_adjacency(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_array_equal(g.laplacian, [[1.0, -1.0], [-1.0, 1.0]])
        np.testing.assert_array_equal(g.degree, np.eye(2))

    def test_row_sums_zero_and_psd(self):
        g = random_graph(5, seed=1)
        rng = np.random.default_rng(2)
        np.testing.assert_allclose(g.laplacian @ np.ones(5), np.zeros(5), atol=1e-10)
        for _ in range(100):
            x = rng.normal(size=5)
            assert x @ g.laplacian @ x >= -1e-10

    def test_diagonal_zeroed_before_degree(self):
        a = np.array([[5.0, 1.0], [1.0, 7.0]])
        g = laplacian_from_adjacency(a)
        np.testing.assert_array_equal(g.adjacency, [[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_array_equal(g.degree, np.eye(2))

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError, match="square"):
            laplacian_from_adjacency(np.ones((2, 3)))

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="asymmetric"):
            laplacian_from_adjacency(np.array([[0.0, 1.0], [0.5, 0.0]]))

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="nonnegative"):
            laplacian_from_adjacency(np.array([[0.0, -1.0], [-1.0, 0.0]]))

    def test_absorbs_tiny_asymmetry(self):
        a = np.array([[0.0, 1.0], [1.0 + 1e-12, 0.0]])
        g = laplacian_from_adjacency(a)
        assert g.adjacency[0, 1] == g.adjacency[1, 0]


class TestSmoothness:
    def test_constant_signal_is_zero(self):
        g = random_graph(6, seed=3)
        assert smoothness(np.ones((6, 1)), g) == pytest.approx(0.0, abs=1e-12)

    def test_single_edge_hand_value(self):
        g = laplacian_from_adjacency(np.array([[0.0, 1.0], [1.0, 0.0]]))
        # u^T L u with u = [1, -1]: 1*1 + 1*1 - 2*(-1) = 4
        assert smoothness(np.array([1.0, -1.0]), g) == pytest.approx(4.0)

    def test_trace_form_equals_column_sum(self):
        g = random_graph(5, seed=4)
        u = np.random.default_rng(5).normal(size=(5, 3))
        per_column = sum(u[:, r] @ g.laplacian @ u[:, r] for r in range(3))
        assert smoothness(u, g) == pytest.approx(per_column, rel=1e-12)

    def test_column_permutation_invariance(self):
        g = random_graph(4, seed=6)
        u = np.random.default_rng(7).normal(size=(4, 3))
        assert smoothness(u, g) == pytest.approx(smoothness(u[:, [2, 0, 1]], g), rel=1e-12)

    def test_quadratic_scaling(self):
        g = random_graph(4, seed=8)
        u = np.random.default_rng(9).normal(size=(4, 2))
        c = 3.7
        assert smoothness(c * u, g) == pytest.approx(c**2 * smoothness(u, g), rel=1e-10)

    def test_dimension_mismatch(self):
        g = random_graph(4, seed=10)
        with pytest.raises(ValueError, match="graph size"):
            smoothness(np.ones((5, 2)), g)

    def test_accepts_raw_laplacian_matrix(self):
        g = random_graph(4, seed=11)
        u = np.random.default_rng(12).normal(size=(4, 2))
        assert smoothness(u, g.laplacian) == pytest.approx(smoothness(u, g), rel=1e-12)


class TestKernelAdjacency:
    def test_identical_rows_give_unit_weight(self):
        a = kernel_adjacency([[1.0, 2.0], [1.0, 2.0]], beta=1.0)
        assert a[0, 1] == pytest.approx(1.0)
        assert a[0, 0] == 0.0

    def test_distant_rows_decay(self):
        a = kernel_adjacency([[0.0], [20.0]], beta=1.0)
        assert a[0, 1] < 1e-8

    def test_hand_computed_distance(self):
        a = kernel_adjacency([[0.0, 0.0], [3.0, 4.0]], beta=1.0)
        assert a[0, 1] == pytest.approx(np.exp(-5.0), rel=1e-12)

    def test_symmetric_and_valid_for_laplacian(self):
        rows = np.random.default_rng(13).normal(size=(6, 3))
        a = kernel_adjacency(rows, beta=0.7)
        np.testing.assert_allclose(a, a.T, atol=1e-15)
        g = laplacian_from_adjacency(a)
        assert isinstance(g, GraphSpec)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            kernel_adjacency(np.empty((0, 2)), beta=1.0)
        with pytest.raises(ValueError, match="beta"):
            kernel_adjacency([[1.0], [2.0]], beta=0.0)


class TestSectorAdjacency:
    def test_all_distinct_gives_zero_matrix(self):
        np.testing.assert_array_equal(sector_adjacency(["a", "b", "c"]), np.zeros((3, 3)))

    def test_all_equal_gives_complete_graph(self):
        a = sector_adjacency(["x", "x", "x"])
        np.testing.assert_array_equal(a, np.ones((3, 3)) - np.eye(3))

    def test_block_structure(self):
        a = sector_adjacency(["A", "A", "B", "B", "B"])
        expected = np.zeros((5, 5))
        for i in range(5):
            for j in range(5):
                same = (i < 2) == (j < 2)
                expected[i, j] = 1.0 if same and i != j else 0.0
        np.testing.assert_array_equal(a, expected)

    def test_sector_constant_signal_has_zero_smoothness(self):
        labels = ["A", "A", "B", "B", "B"]
        g = laplacian_from_adjacency(sector_adjacency(labels))
        u = np.array([2.0, 2.0, -1.0, -1.0, -1.0])
        assert smoothness(u, g) == pytest.approx(0.0, abs=1e-12)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sector_adjacency([])


class TestGraphInvariants:
    @pytest.mark.parametrize("builder_seed", range(5))
    def test_constructed_laplacians(self, builder_seed):
        rng = np.random.default_rng(builder_seed)
        rows = rng.normal(size=(7, 4))
        g = laplacian_from_adjacency(kernel_adjacency(rows, beta=1.3))
        lap = g.laplacian
        np.testing.assert_allclose(lap, lap.T, atol=1e-12)
        assert np.max(np.abs(lap @ np.ones(7))) < 1e-10
        for _ in range(100):
            x = rng.normal(size=7)
            assert x @ lap @ x >= -1e-10


class TestFiles:
    def test_sector_file_round_trip(self, tmp_path):
        path = tmp_path / "sectors.csv"
        path.write_text("ticker,sector\nAAA,tech\nBBB,energy\n", encoding="utf-8")
        assert read_sector_file(path) == {"AAA": "tech", "BBB": "energy"}

    def test_sector_file_bad_header(self, tmp_path):
        path = tmp_path / "sectors.csv"
        path.write_text("symbol,group\nAAA,tech\n", encoding="utf-8")
        with pytest.raises(ValueError, match="header"):
            read_sector_file(path)

    def test_matrix_csv_round_trip(self, tmp_path):
        m = np.random.default_rng(14).normal(size=(3, 4))
        path = tmp_path / "m.csv"
        write_matrix_csv(path, m)
        back = np.loadtxt(path, delimiter=",")
        np.testing.assert_array_equal(back, m)
