import numpy as np
import pytest
from scipy.stats import ortho_group

from jointdr.baselines import PhdResult, phd_estimate, phd_matrix, phd_split_error
from jointdr.errors import DimensionError, InputError
from jointdr.estimator import SampleSet
from jointdr.synthetic import EmbeddingPair, FeatureDistribution, LinkModel, generate_samples, sample_problem


def phd_matrix_loop(x, y):
    m, n = x.shape
    ybar = sum(y) / m
    out = np.zeros((n, n))
    for i in range(m):
        out += (y[i] - ybar) * (np.outer(x[i], x[i]) - np.eye(n))
    return out / m


def mean_phd_error(kind, m, mode, seeds=range(5), n=10, r=2):
    errs = []
    for seed in seeds:
        truth = sample_problem(n, n, r, seed=seed)
        link = LinkModel(kind, r, sigma_z=1.0)
        s = generate_samples(truth, link, FeatureDistribution(), m, seed=100 + seed)
        errs.append(phd_split_error(phd_estimate(s, 2 * r, mode=mode), truth))
    return float(np.mean(errs))


class TestPhdMatrix:
    def test_matches_loop(self):
        rng = np.random.default_rng(0)
        x, y = rng.standard_normal((40, 5)), rng.standard_normal(40)
        np.testing.assert_allclose(phd_matrix(x, y), phd_matrix_loop(x, y), atol=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        mat = phd_matrix(rng.standard_normal((30, 6)), rng.standard_normal(30))
        np.testing.assert_array_equal(mat, mat.T)


class TestPhdEstimate:
    def samples(self, m=500, seed=0, kind="even_poly"):
        truth = sample_problem(6, 5, 2, seed=seed)
        return truth, generate_samples(truth, LinkModel(kind, 2), FeatureDistribution(), m, seed=seed + 1)

    def test_constant_response_is_degenerate(self):
        _, s = self.samples()
        flat = SampleSet(s.a, s.b, np.full(s.m, 3.0))
        res = phd_estimate(flat, 3)
        assert res.degenerate
        np.testing.assert_allclose(res.eigenvalues, 0, atol=1e-12)

    @pytest.mark.parametrize("mode", ["stacked", "blockwise"])
    def test_orthonormal_sorted(self, mode):
        _, s = self.samples()
        res = phd_estimate(s, 4, mode=mode)
        assert res.directions.shape == (11, 4) and res.mode == mode and not res.degenerate
        np.testing.assert_allclose(res.directions.T @ res.directions, np.eye(4), atol=1e-10)
        assert np.all(np.diff(np.abs(res.eigenvalues)) <= 1e-15)

    def test_eigen_residual(self):
        _, s = self.samples()
        res = phd_estimate(s, 6)
        mat = phd_matrix(np.hstack([s.a, s.b]), s.y)
        for lam, w in zip(res.eigenvalues, res.directions.T):
            assert np.linalg.norm(mat @ w - lam * w) <= 1e-8 * np.linalg.norm(mat, 2)

    def test_blockwise_directions_are_block_diagonal(self):
        _, s = self.samples()
        res = phd_estimate(s, 4, mode="blockwise")
        in_a = np.any(res.directions[:6] != 0, axis=0)
        in_b = np.any(res.directions[6:] != 0, axis=0)
        assert np.all(in_a ^ in_b) and in_a.sum() == 2

    @pytest.mark.parametrize("k,mode", [(0, "stacked"), (12, "stacked"), (3, "blockwise"), (12, "blockwise")])
    def test_k_out_of_range(self, k, mode):
        _, s = self.samples()
        with pytest.raises(InputError):
            phd_estimate(s, k, mode=mode)

    def test_unknown_mode(self):
        _, s = self.samples()
        with pytest.raises(InputError):
            phd_estimate(s, 2, mode="sliced")

    @pytest.mark.parametrize("mode", ["stacked", "blockwise"])
    def test_even_link_improves_with_m(self, mode):
        small, large = mean_phd_error("even_poly", 1000, mode), mean_phd_error("even_poly", 20000, mode)
        assert large < 0.6 * small

    def test_odd_link_blockwise_stays_flat(self):
        small, large = mean_phd_error("bilinear_gaussian", 1000, "blockwise"), mean_phd_error("bilinear_gaussian", 20000, "blockwise")
        assert large > 0.8 * small and large > 0.5

    def test_odd_link_stacked_sees_cross_block(self):
        # the off-diagonal block of the stacked matrix estimates U V^T
        small, large = mean_phd_error("bilinear_gaussian", 1000, "stacked"), mean_phd_error("bilinear_gaussian", 20000, "stacked")
        assert large < 0.6 * small


class TestSplitError:
    def truth(self, seed=0):
        return sample_problem(6, 5, 2, seed=seed)

    def blk(self, t):
        out = np.zeros((11, 4))
        out[:6, :2] = t.u
        out[6:, 2:] = t.v
        return out

    def test_exact_span(self):
        t = self.truth()
        d = self.blk(t) @ ortho_group.rvs(4, random_state=1)
        assert phd_split_error(PhdResult(d, np.ones(4)), t) == pytest.approx(0.0, abs=1e-7)

    def test_orthogonal(self):
        t = self.truth()
        q, _ = np.linalg.qr(np.hstack([self.blk(t), np.random.default_rng(0).standard_normal((11, 4))]))
        assert phd_split_error(PhdResult(q[:, 4:], np.ones(4)), t) == pytest.approx(1.0)

    def test_random_directions(self):
        n, r = 40, 2
        rng = np.random.default_rng(2)
        errs = []
        for seed in range(100):
            t = sample_problem(n, n, r, seed=seed)
            d = np.linalg.qr(rng.standard_normal((2 * n, 2 * r)))[0]
            errs.append(phd_split_error(PhdResult(d, np.ones(2 * r)), t))
        assert np.mean(errs) == pytest.approx(np.sqrt(1 - 2 * r / (2 * n)), abs=0.1)
        assert all(0 <= e <= 1 for e in errs)

    def test_rotation_invariance(self):
        t = self.truth()
        d = np.linalg.qr(np.random.default_rng(3).standard_normal((11, 4)))[0]
        base = phd_split_error(PhdResult(d, np.ones(4)), t)
        for seed in range(5):
            rot = ortho_group.rvs(4, random_state=seed) @ np.diag([1, -1, 1, -1])
            assert phd_split_error(PhdResult(d @ rot, np.ones(4)), t) == pytest.approx(base, abs=1e-12)

    def test_dimension_mismatch(self):
        t = self.truth()
        with pytest.raises(DimensionError):
            phd_split_error(PhdResult(np.eye(10)[:, :4], np.ones(4)), t)
        with pytest.raises(DimensionError):
            phd_split_error(PhdResult(np.eye(11)[:, :3], np.ones(3)), t)

    def test_metric_ignores_cross_terms(self):
        e = np.eye(4)
        t = EmbeddingPair(e[:2, :1], e[:2, :1])
        # a direction mixing the two blocks but inside the block span counts as correct
        d = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        d = d @ np.array([[np.cos(0.3), -np.sin(0.3)], [np.sin(0.3), np.cos(0.3)]])
        assert phd_split_error(PhdResult(d, np.ones(2)), t) == pytest.approx(0.0, abs=1e-12)
