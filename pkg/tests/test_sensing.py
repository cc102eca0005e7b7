import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fecgcs.sensing import (OpsCount, RankError, SparseBinaryMatrix, adjoint, compress,
                            compression_ops, compression_ratio, dump_columns, generate_matrix,
                            rows_for_cr)


def naive_compress(phi, x):
    """Dense-loop oracle summing in ascending column order."""
    dense = phi.to_dense()
    y = np.zeros(phi.M)
    for m in range(phi.M):
        for n in range(phi.N):
            if dense[m, n]:
                y[m] += x[n]
    return y


class TestGenerateMatrix:
    def test_column_structure(self):
        phi = generate_matrix(64, 128, 5, seed=11)
        dense = phi.to_dense()
        np.testing.assert_array_equal(dense.sum(axis=0), 5)
        assert set(np.unique(dense)) <= {0.0, 1.0}
        assert np.all(np.diff(phi.columns, axis=1) > 0)

    def test_full_row_rank(self):
        for d in (2, 12, 14):
            phi = generate_matrix(256, 512, d, seed=d)
            assert np.linalg.matrix_rank(phi.to_dense()) == 256

    def test_deterministic(self):
        assert generate_matrix(32, 64, 3, seed=9) == generate_matrix(32, 64, 3, seed=9)
        assert generate_matrix(32, 64, 3, seed=9) != generate_matrix(32, 64, 3, seed=10)

    def test_regenerates_from_accepted_seed(self):
        phi = generate_matrix(40, 80, 4, seed=123)
        again = generate_matrix(phi.M, phi.N, phi.d, phi.seed, max_retries=0)
        assert again == phi

    def test_invalid_dims(self):
        with pytest.raises(ValueError):
            generate_matrix(10, 8, 2, seed=0)
        with pytest.raises(ValueError):
            generate_matrix(10, 20, 11, seed=0)
        with pytest.raises(ValueError):
            generate_matrix(10, 20, 0, seed=0)

    def test_retry_budget_exhausted(self):
        # d = 1 with M close to N: some row is almost surely empty
        with pytest.raises(RankError):
            generate_matrix(60, 64, 1, seed=0, max_retries=3, method="independent")

    def test_rank_retry_records_seed(self):
        phi = None
        for s in range(500):
            cand = generate_matrix(8, 16, 2, seed=s, max_retries=50, method="independent")
            if cand.seed != cand.requested_seed:
                phi = cand
                break
        assert phi is not None
        assert np.linalg.matrix_rank(phi.to_dense()) == 8
        assert generate_matrix(8, 16, 2, phi.seed, max_retries=0, method="independent") == phi

    def test_square_allowed(self):
        phi = generate_matrix(16, 16, 3, seed=1)
        assert np.linalg.matrix_rank(phi.to_dense()) == 16

    def test_constructor_validation(self):
        with pytest.raises(ValueError):
            SparseBinaryMatrix(4, 3, 2, np.array([[0, 0], [1, 2], [0, 3]]), 0)
        with pytest.raises(ValueError):
            SparseBinaryMatrix(4, 3, 2, np.array([[0, 4], [1, 2], [0, 3]]), 0)

    def test_dump_columns(self):
        phi = generate_matrix(8, 10, 2, seed=4)
        lines = dump_columns(phi).splitlines()
        assert len(lines) == 10
        assert [int(v) for v in lines[0].split(",")] == list(phi.columns[0])


class TestCompress:
    def test_naive_oracle_exact(self, backend, rng):
        phi = generate_matrix(50, 120, 7, seed=3)
        x = rng.standard_normal(120) * 1e4
        assert np.array_equal(compress(phi, x), naive_compress(phi, x))

    def test_batched_windows(self, backend, rng):
        phi = generate_matrix(20, 40, 3, seed=8)
        X = rng.standard_normal((5, 40))
        Y = compress(phi, X)
        assert Y.shape == (5, 20)
        for w in range(5):
            assert np.array_equal(Y[w], naive_compress(phi, X[w]))

    def test_adjoint_identity(self, backend, rng):
        phi = generate_matrix(20, 40, 3, seed=8)
        x, z = rng.standard_normal(40), rng.standard_normal(20)
        assert abs(compress(phi, x) @ z - x @ adjoint(phi, z)) < 1e-10

    def test_shape_errors(self):
        phi = generate_matrix(20, 40, 3, seed=8)
        with pytest.raises(ValueError):
            compress(phi, np.zeros(39))
        with pytest.raises(ValueError):
            adjoint(phi, np.zeros(21))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 30), st.integers(0, 10), st.integers(1, 4), st.integers(0, 2**63))
    def test_linearity(self, M, extra, d, seed):
        d = min(d, M - 1)  # d = M gives the rank-1 all-ones matrix
        phi = generate_matrix(M, 2 * M + extra, d, seed=seed)
        r = np.random.default_rng(seed % 1000)
        a, b = r.standard_normal((2, phi.N))
        np.testing.assert_allclose(compress(phi, 2 * a - b), 2 * compress(phi, a) - compress(phi, b),
                                   atol=1e-10)


class TestOpsCount:
    def test_published_counts(self):
        assert compression_ops(generate_matrix(256, 512, 2, seed=0)) == OpsCount(768, 0)
        assert compression_ops(generate_matrix(256, 512, 12, seed=0)) == OpsCount(5888, 0)

    def test_formula(self):
        for d in (1, 3, 8):
            phi = generate_matrix(16, 64, d, seed=2)
            assert compression_ops(phi).additions == d * 64 - 16

    def test_dense_degenerate(self):
        # all-ones matrix: rank 1, so built directly rather than generated
        phi = SparseBinaryMatrix(6, 9, 6, np.tile(np.arange(6), (9, 1)), 0)
        assert compression_ops(phi).additions == 6 * 9 - 6

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            OpsCount(-1, 0)


class TestCompressionRatio:
    def test_values(self):
        assert compression_ratio(512, 256) == 50.0
        assert compression_ratio(250, 125) == 50.0
        assert compression_ratio(512, 512) == 0.0

    def test_rows_for_cr(self):
        assert rows_for_cr(512, 50) == 256
        assert rows_for_cr(512, 65) == 179  # 179.2
        assert rows_for_cr(512, 20) == 410  # 409.6
        assert rows_for_cr(512, 0) == 512

    def test_half_rounds_up(self):
        assert rows_for_cr(10, 25) == 8  # 7.5

    def test_invalid(self):
        with pytest.raises(ValueError):
            rows_for_cr(512, 100)
        with pytest.raises(ValueError):
            compression_ratio(10, 0)

    @given(st.integers(1, 2000), st.floats(0, 99))
    def test_round_trip_close(self, N, cr):
        M = rows_for_cr(N, cr)
        assert 1 <= M <= N
        if M > 1:
            assert abs(compression_ratio(N, M) - cr) <= 50.0 / N + 1e-9
