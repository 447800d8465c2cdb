"""Sparse containers: vector invariants and the column-major batch view."""

import numpy as np
import pytest

from polads.sparse import CscMatrix, SparseVector, concat


class TestSparseVector:
    def test_from_pairs_sorts_and_drops_zeros(self):
        v = SparseVector.from_pairs([(3, 2.0), (1, 0.0), (0, -1.0)], 5)
        assert v.indices.tolist() == [0, 3]
        assert v.values.tolist() == [-1.0, 2.0]
        assert v.dim == 5

    def test_duplicate_column_rejected(self):
        with pytest.raises(ValueError):
            SparseVector.from_pairs([(1, 2.0), (1, 3.0)], 4)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            SparseVector.from_pairs([(4, 1.0)], 4)

    def test_dense_round_trip(self):
        dense = np.array([0.0, 1.5, 0.0, -2.0])
        v = SparseVector.from_dense(dense)
        assert v.to_dense() == pytest.approx(dense)
        assert v.nnz == 2

    def test_get(self):
        v = SparseVector.from_pairs([(2, 7.0)], 4)
        assert v.get(2) == 7.0
        assert v.get(1) == 0.0

    def test_l2_normalized(self):
        v = SparseVector.from_pairs([(0, 3.0), (1, 4.0)], 2)
        assert v.l2_normalized().values == pytest.approx([0.6, 0.8])
        zero = SparseVector.from_pairs([], 2)
        assert zero.l2_normalized().nnz == 0

    def test_concat_offsets_columns(self):
        a = SparseVector.from_pairs([(1, 1.0)], 3)
        b = SparseVector.from_pairs([(0, 2.0)], 2)
        c = concat([a, b])
        assert c.dim == 5
        assert c.indices.tolist() == [1, 3]
        assert c.values.tolist() == [1.0, 2.0]


class TestCscMatrix:
    def test_matches_dense(self):
        rng = np.random.default_rng(4)
        dense = np.where(rng.random((10, 6)) < 0.4, rng.normal(size=(10, 6)), 0.0)
        vectors = [SparseVector.from_dense(row) for row in dense]
        csc = CscMatrix.from_vectors(vectors)
        assert csc.shape == (10, 6)
        for j in range(6):
            rows, vals = csc.column(j)
            rebuilt = np.zeros(10)
            rebuilt[rows] = vals
            assert rebuilt == pytest.approx(dense[:, j])
            assert rows.tolist() == sorted(rows.tolist())

    def test_densify_columns(self):
        vectors = [SparseVector.from_pairs([(0, 1.0)], 3),
                   SparseVector.from_pairs([(2, 5.0)], 3)]
        csc = CscMatrix.from_vectors(vectors)
        block = csc.densify_columns([2, 0])
        np.testing.assert_allclose(block, [[0.0, 1.0], [5.0, 0.0]])

    def test_empty(self):
        csc = CscMatrix.from_vectors([])
        assert csc.shape == (0, 0)

    def test_mixed_widths_rejected(self):
        with pytest.raises(ValueError):
            CscMatrix.from_vectors([SparseVector.from_pairs([], 2),
                                    SparseVector.from_pairs([], 3)])
