import numpy as np
import pytest

from stereonmf.nmf import (
    EPS,
    Dictionary,
    copy_to_train,
    factorize,
    infer_activations,
    kl_divergence,
    normalize_columns,
    pretrain_dictionary,
    update_activations,
)


class TestKlDivergence:
    def test_scalar_value(self):
        # D(1 || 2) = 1*log(1/2) - 1 + 2
        v = np.array([[1.0]])
        d = kl_divergence(v, np.array([[2.0]]), np.array([[1.0]]))
        assert abs(d - (1.0 - np.log(2.0))) < 1e-12

    def test_zero_entry_contributes_lambda_only(self):
        v = np.array([[0.0]])
        d = kl_divergence(v, np.array([[2.0]]), np.array([[1.0]]))
        assert abs(d - 2.0) < 1e-12

    def test_exact_factorization_scores_zero(self):
        rng = np.random.default_rng(3)
        w = 1.0 - rng.random((6, 2))
        h = 1.0 - rng.random((2, 9))
        assert kl_divergence(w @ h, w, h) < 1e-12

    def test_nonnegative(self):
        rng = np.random.default_rng(4)
        v = rng.random((5, 7))
        w = 1.0 - rng.random((5, 3))
        h = 1.0 - rng.random((3, 7))
        assert kl_divergence(v, w, h) >= 0.0


class TestUpdates:
    def test_scalar_activation_step(self):
        # v=4, w=2, h=1: lambda=2, so h <- 1 * (2*2)/2 = 2, giving wh = v.
        v = np.array([[4.0]])
        w = np.array([[2.0]])
        h = np.array([[1.0]])
        update_activations(v, w, h)
        assert abs(h[0, 0] - 2.0) < 1e-9

    def test_divergence_never_increases(self):
        rng = np.random.default_rng(5)
        for seed in range(8):
            v = rng.random((12, 30)) + 0.01
            _, _, trace = factorize(v, 4, iterations=60, seed=seed,
                                    return_divergence=True)
            diffs = np.diff(trace)
            # allow vanishing relative wobble from float rounding
            assert np.all(diffs <= 1e-9 * np.abs(trace[:-1]) + 1e-12)

    def test_rank_one_recovered(self):
        rng = np.random.default_rng(6)
        w_true = rng.random(16) + 0.1
        h_true = rng.random(40) + 0.1
        v = np.outer(w_true, h_true)
        w, h, trace = factorize(v, 1, iterations=200, seed=0,
                                return_divergence=True)
        assert trace[-1] < 1e-6
        assert np.allclose(w @ h, v, rtol=1e-3)

    def test_rejects_negative_input(self):
        v = np.array([[1.0, -0.5]])
        with pytest.raises(ValueError):
            factorize(v, 1)

    def test_trace_length(self):
        v = np.random.default_rng(7).random((4, 6)) + 0.1
        _, _, trace = factorize(v, 2, iterations=25, seed=0,
                                return_divergence=True)
        assert len(trace) == 26


class TestInference:
    def test_single_frame_matches_scaled_atom(self):
        rng = np.random.default_rng(8)
        w = normalize_columns(rng.random((10, 1)) + 0.1)
        v = 3.0 * w[:, 0]
        h = infer_activations(v, w, iterations=100, seed=1)
        assert h.shape == (1,)
        assert abs(h[0] - 3.0) < 1e-6

    def test_block_shape(self):
        rng = np.random.default_rng(9)
        w = normalize_columns(rng.random((10, 4)) + 0.1)
        v = rng.random((10, 7))
        h = infer_activations(v, w, iterations=20, seed=1)
        assert h.shape == (4, 7)
        assert np.all(h >= 0)

    def test_zero_iterations_returns_positive_start(self):
        w = np.ones((5, 3)) / 5.0
        h = infer_activations(np.ones(5), w, iterations=0, seed=2)
        assert np.all(h > 0) and np.all(h <= 1)

    def test_seed_reproducible(self):
        rng = np.random.default_rng(10)
        w = normalize_columns(rng.random((8, 3)) + 0.1)
        v = rng.random(8)
        a = infer_activations(v, w, iterations=5, seed=42)
        b = infer_activations(v, w, iterations=5, seed=42)
        assert np.array_equal(a, b)


class TestNormalization:
    def test_columns_sum_to_one(self):
        rng = np.random.default_rng(11)
        w = normalize_columns(rng.random((20, 6)) + 0.01)
        assert np.allclose(w.sum(axis=0), 1.0, atol=1e-12)

    def test_product_preserved_when_h_given(self):
        rng = np.random.default_rng(12)
        w = rng.random((9, 4)) + 0.01
        h = rng.random((4, 11)) + 0.01
        wn, hn = normalize_columns(w, h)
        assert np.allclose(wn @ hn, w @ h, atol=1e-12)

    def test_dead_column_reseeded(self):
        w = np.ones((5, 2))
        w[:, 1] = 0.0
        h = np.ones((2, 3))
        wn, hn = normalize_columns(w, h, rng=np.random.default_rng(0))
        assert np.all(wn[:, 1] > 0)
        assert abs(wn[:, 1].sum() - 1.0) < 1e-12
        assert np.all(hn[1] == 0.0)


class TestDictionary:
    def test_pretrain_unit_columns_float32(self):
        rng = np.random.default_rng(13)
        v = rng.random((17, 50)) + 0.01
        d = pretrain_dictionary(v, 5, fs=16000, frame_size=32, iterations=30)
        assert d.atoms.dtype == np.float32
        assert d.bins == 17 and d.n_atoms == 5
        assert np.allclose(d.atoms.sum(axis=0), 1.0, atol=1e-6)

    def test_pretrain_divergence_trace(self):
        rng = np.random.default_rng(14)
        v = rng.random((8, 20)) + 0.01
        d, trace = pretrain_dictionary(v, 3, fs=16000, frame_size=14,
                                       iterations=15, return_divergence=True)
        assert len(trace) == 16
        assert trace[-1] <= trace[0]

    def test_copy_to_train_atoms_are_input_frames(self):
        rng = np.random.default_rng(15)
        v = rng.random((12, 30)) + 0.01
        d = copy_to_train(v, 6, fs=16000, frame_size=22, seed=3)
        normalized = v / v.sum(axis=0)
        for j in range(6):
            dist = np.abs(normalized - d.atoms[:, j : j + 1]).sum(axis=0)
            assert dist.min() < 1e-6

    def test_copy_to_train_no_duplicates_when_possible(self):
        rng = np.random.default_rng(16)
        v = rng.random((4, 10)) + 0.01
        d = copy_to_train(v, 10, fs=16000, frame_size=6, seed=0)
        cols = {tuple(np.round(d.atoms[:, j], 7)) for j in range(10)}
        assert len(cols) == 10

    def test_rejects_negative_atoms(self):
        with pytest.raises(ValueError):
            Dictionary(atoms=np.array([[-1.0, 1.0]]), fs=16000, frame_size=2)

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            Dictionary(atoms=np.ones(4), fs=16000, frame_size=6)
