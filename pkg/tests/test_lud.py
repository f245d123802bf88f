import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cryosync.commonlines import CommonLineSet, corrupt, true_common_lines
from cryosync.errors import DimensionMismatch
from cryosync.lud import (
    block_subgradients,
    euclid_subgrad_block,
    objective_lud,
    objective_ls,
    pair_residuals,
    peer_counts,
    resync_step,
    riemannian_subgradients,
)
from cryosync.so3 import project_tangent, qr_retract, sample_uniform_so3

E1, E2 = np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]])


def two_view_example():
    return np.stack([np.eye(3), np.eye(3)]), CommonLineSet(2, None, E1, E2)


def naive_subgradient(r, lines, i, peers):
    g = np.zeros((3, 3))
    for p, (a, b) in enumerate(zip(*lines.pair_index)):
        if a == i and b in peers:
            c_own, c_other, other = lines.c_ij[p], lines.c_ji[p], b
        elif b == i and a in peers:
            c_own, c_other, other = lines.c_ji[p], lines.c_ij[p], a
        else:
            continue
        res = r[i] @ c_own - r[other] @ c_other
        norm = np.linalg.norm(res)
        if norm > 1e-12:
            g += np.outer(res / norm, c_own)
    return g


def noisy_instance(k, seed, p=0.5):
    truth = sample_uniform_so3(k, seed)
    return truth, corrupt(true_common_lines(truth, 360), p, seed + 1)


class TestObjectives:
    def test_two_view_values(self):
        r, lines = two_view_example()
        assert objective_lud(r, lines) == pytest.approx(2 * np.sqrt(2), abs=1e-15)
        assert objective_ls(r, lines) == pytest.approx(4.0, abs=1e-15)

    def test_zero_at_truth_on_exact_lines(self):
        truth = sample_uniform_so3(30, 0)
        lines = true_common_lines(truth)
        assert objective_lud(truth, lines) < 1e-10
        assert objective_ls(truth, lines) < 1e-20

    def test_global_rotation_invariance(self):
        truth, lines = noisy_instance(20, 1)
        r = sample_uniform_so3(20, 5)
        o = sample_uniform_so3(1, 6)[0]
        assert objective_lud(o @ r, lines) == pytest.approx(objective_lud(r, lines), abs=1e-10)

    def test_squared_bounded_by_twice_unsquared(self):
        _, lines = noisy_instance(15, 2, p=0.0)
        r = sample_uniform_so3(15, 3)
        assert np.all(np.linalg.norm(pair_residuals(r, lines), axis=1) <= 2 + 1e-12)
        assert objective_ls(r, lines) <= 2 * objective_lud(r, lines)

    def test_size_mismatch(self):
        _, lines = noisy_instance(5, 0)
        with pytest.raises(DimensionMismatch):
            objective_lud(sample_uniform_so3(4, 0), lines)


class TestSubgradient:
    def test_zero_residuals_give_zero(self):
        truth = sample_uniform_so3(10, 0)
        lines = true_common_lines(truth)
        g = block_subgradients(truth, lines, np.arange(10), np.arange(10))
        assert np.array_equal(g, np.zeros_like(g))

    def test_two_view_formula(self):
        r, lines = two_view_example()
        g = euclid_subgrad_block(r, lines, 0, [0, 1])
        expected = np.zeros((3, 3))
        expected[:, 0] = [1 / np.sqrt(2), -1 / np.sqrt(2), 0]
        np.testing.assert_allclose(g, expected, atol=1e-15)

    def test_matches_naive_loop(self):
        _, lines = noisy_instance(12, 3)
        r = sample_uniform_so3(12, 4)
        rng = np.random.default_rng(0)
        peers = np.sort(rng.choice(12, 7, replace=False))
        rows = np.arange(12)
        g = block_subgradients(r, lines, rows, peers)
        for i in rows:
            np.testing.assert_allclose(g[i], naive_subgradient(r, lines, i, peers), atol=1e-13)

    def test_chunked_evaluation_matches(self, monkeypatch):
        import cryosync.lud as lud

        _, lines = noisy_instance(40, 5)
        r = sample_uniform_so3(40, 6)
        everyone = np.arange(40)
        full = block_subgradients(r, lines, everyone, everyone)
        monkeypatch.setattr(lud, "_CHUNK_ELEMS", 100)
        np.testing.assert_allclose(block_subgradients(r, lines, everyone, everyone), full, atol=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 20))
    def test_norm_bounded_by_peer_count(self, seed, m):
        _, lines = noisy_instance(20, seed % 1000, p=0.3)
        r = sample_uniform_so3(20, seed)
        peers = np.random.default_rng(seed).choice(20, m, replace=False)
        g = block_subgradients(r, lines, np.arange(20), peers)
        assert np.all(np.linalg.norm(g, axis=(1, 2)) <= m + 1e-12)

    def test_directional_derivative_along_retraction(self):
        k = 15
        _, lines = noisy_instance(k, 7, p=0.5)
        rng = np.random.default_rng(1)
        x = sample_uniform_so3(k, 8)
        assert np.linalg.norm(pair_residuals(x, lines), axis=1).min() > 1e-3
        everyone = np.arange(k)
        # the subgradient sums each pair once; the objective counts it twice
        grad = project_tangent(x, 2 * block_subgradients(x, lines, everyone, everyone))
        h = 1e-6
        for _ in range(20):
            eta = project_tangent(x, rng.standard_normal((k, 3, 3)))
            eta /= np.linalg.norm(eta)
            fd = (objective_lud(qr_retract(x, eta, h), lines) - objective_lud(qr_retract(x, eta, -h), lines)) / (2 * h)
            exact = float(np.sum(grad * eta))
            assert fd == pytest.approx(exact, rel=1e-4, abs=1e-8)

    def test_riemannian_version_is_tangent(self):
        _, lines = noisy_instance(10, 9)
        r = sample_uniform_so3(10, 10)
        xi = riemannian_subgradients(r, lines, np.arange(10), np.arange(10))
        m = np.swapaxes(r, 1, 2) @ xi
        np.testing.assert_allclose(m, -np.swapaxes(m, 1, 2), atol=1e-12)

    def test_peer_counts(self):
        np.testing.assert_array_equal(peer_counts([0, 5], [0, 1, 2]), [2, 3])


class TestResyncStep:
    def test_zero_subgradient_keeps_iterate(self):
        truth = sample_uniform_so3(20, 0)
        lines = true_common_lines(truth)
        out = resync_step(truth, lines, np.arange(20), np.arange(20), 0.5)
        assert np.array_equal(out, truth)

    def test_jacobi_matches_blockwise_reference(self):
        _, lines = noisy_instance(15, 1)
        r = sample_uniform_so3(15, 2)
        d = np.array([1, 4, 6, 9])
        s = np.arange(15)
        out = resync_step(r, lines, d, s, 0.2)
        for i in range(15):
            if i in d:
                xi = project_tangent(r[i], naive_subgradient(r, lines, i, s)) / 14
                np.testing.assert_allclose(out[i], qr_retract(r[i], xi, -0.2), atol=1e-13)
            else:
                assert np.array_equal(out[i], r[i])

    def test_gauss_seidel_uses_fresh_blocks(self):
        _, lines = noisy_instance(10, 3)
        r = sample_uniform_so3(10, 4)
        d, s = np.array([2, 5, 7]), np.arange(10)
        out = resync_step(r, lines, d, s, 0.3, gauss_seidel=True)
        ref = r.copy()
        for i in d:
            xi = project_tangent(ref[i], naive_subgradient(ref, lines, i, s)) / 9
            ref[i] = qr_retract(ref[i], xi, -0.3)
        np.testing.assert_allclose(out, ref, atol=1e-13)
        assert not np.allclose(out, resync_step(r, lines, d, s, 0.3))

    def test_input_not_modified(self):
        _, lines = noisy_instance(8, 5)
        r = sample_uniform_so3(8, 6)
        before = r.copy()
        resync_step(r, lines, np.arange(8), np.arange(8), 0.1)
        assert np.array_equal(r, before)

    def test_rejects_bad_arguments(self):
        _, lines = noisy_instance(5, 0)
        r = sample_uniform_so3(5, 0)
        with pytest.raises(ValueError):
            resync_step(r, lines, [], [0, 1], 0.1)
        with pytest.raises(ValueError):
            resync_step(r, lines, [0], [0, 1], 0.0)
