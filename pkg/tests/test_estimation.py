import math

import numpy as np
import pytest
from conftest import brute_force_mcd, on_majority
from scipy.spatial import Delaunay

from robmon.estimation import (
    DataMatrix,
    DegenerateDataError,
    EstimationError,
    SubsetPool,
    bdp_to_h,
    cstep,
    deterministic_starts,
    exhaustive_subsets,
    generate_elemental_subsets,
    mcd_consistency_factor,
    mcd_estimate,
    mm_estimate,
    s_estimate,
    statistical_distances,
)
from robmon.rho import RhoSpec


@pytest.fixture(scope="module")
def gaussian500():
    rng = np.random.default_rng(11)
    return DataMatrix(rng.standard_normal((500, 2)))


@pytest.fixture(scope="module")
def gaussian_pool():
    return generate_elemental_subsets(500, 2, 300, 5)


class TestDataMatrix:
    def test_default_names_and_readonly(self):
        d = DataMatrix(np.zeros((3, 2)) + np.arange(3)[:, None])
        assert d.column_names == ("x1", "x2")
        with pytest.raises(ValueError):
            d.values[0, 0] = 1.0

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            DataMatrix(np.ones((2, 2)))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            DataMatrix(np.array([[1.0, np.nan], [2, 3], [4, 5]]))

    def test_name_count(self):
        with pytest.raises(ValueError):
            DataMatrix(np.ones((4, 2)), ("a",))


class TestDistances:
    def test_euclidean(self):
        assert statistical_distances(np.array([[3.0, 4.0]]), [0, 0], np.eye(2))[0] == 5.0

    def test_at_location(self):
        assert statistical_distances(np.array([[1.0, 2.0]]), [1, 2], np.eye(2))[0] == 0.0

    def test_diagonal_scatter(self):
        d = statistical_distances(np.array([[2.0, 0.0]]), [0, 0], np.diag([4.0, 1.0]))
        assert d[0] == pytest.approx(1.0, abs=1e-15)

    def test_matches_quadratic_form(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal((20, 3))
        a = rng.standard_normal((3, 3))
        c = a @ a.T + np.eye(3)
        t = rng.standard_normal(3)
        q = np.einsum("ij,jk,ik->i", y - t, np.linalg.inv(c), y - t)
        assert np.allclose(statistical_distances(y, t, c), np.sqrt(q), rtol=1e-12)

    def test_not_spd(self):
        with pytest.raises(np.linalg.LinAlgError):
            statistical_distances(np.ones((3, 2)), [0, 0], np.diag([1.0, -1.0]))


class TestSubsetPools:
    def test_reproducible(self):
        a = generate_elemental_subsets(5, 1, 3, 7)
        b = generate_elemental_subsets(5, 1, 3, 7)
        assert a.subsets.shape == (3, 2)
        assert np.array_equal(a.subsets, b.subsets)
        assert a.digest() == b.digest()

    def test_distinct_within_set(self):
        pool = generate_elemental_subsets(272, 2, 1000, 3)
        assert pool.subsets.shape == (1000, 3)
        assert all(len(set(s)) == 3 for s in pool.subsets.tolist())
        assert pool.subsets.min() >= 0 and pool.subsets.max() < 272

    def test_seed_changes_pool(self):
        assert generate_elemental_subsets(50, 2, 10, 1).digest() != generate_elemental_subsets(50, 2, 10, 2).digest()

    def test_too_small(self):
        with pytest.raises(ValueError):
            generate_elemental_subsets(2, 2, 5, 0)

    def test_index_range_checked(self):
        with pytest.raises(ValueError):
            SubsetPool(seed=0, n=3, p=1, subsets=[[0, 3]])

    def test_exhaustive(self):
        pool = exhaustive_subsets(6, 1, 3)
        assert len(pool) == math.comb(6, 3)


class TestDeterministicStarts:
    def test_count_and_determinism(self, gaussian500):
        a, b = deterministic_starts(gaussian500), deterministic_starts(gaussian500)
        assert 1 <= len(a) <= 6
        for (t1, c1), (t2, c2) in zip(a, b):
            assert np.array_equal(t1, t2) and np.array_equal(c1, c2)
            assert np.all(np.linalg.eigvalsh(c1) > 0)

    def test_identical_rows(self):
        with pytest.raises(DegenerateDataError):
            deterministic_starts(DataMatrix(np.ones((10, 2))))

    def test_usable_by_s(self, gaussian500):
        fit = s_estimate(gaussian500, RhoSpec.bisquare(2, bdp=0.5), deterministic_starts(gaussian500))
        assert abs(fit.constraint_residual()) < 1e-8


class TestSEstimate:
    def test_gaussian_sanity(self, gaussian500, gaussian_pool):
        fit = s_estimate(gaussian500, RhoSpec.bisquare(2, bdp=0.5), gaussian_pool)
        assert np.all(np.abs(fit.location) < 0.15)
        ev = np.linalg.eigvalsh(fit.scatter)
        assert np.all(np.abs(ev - 1) < 0.3)
        assert fit.method == "S" and fit.converged

    def test_constraint_and_spd(self, gaussian500, gaussian_pool):
        for spec in (RhoSpec.bisquare(2, bdp=0.3), RhoSpec.custom(2, 0.2), RhoSpec.custom(2, 1.0)):
            fit = s_estimate(gaussian500, spec, gaussian_pool)
            assert abs(fit.constraint_residual()) < 1e-8
            assert np.max(np.abs(fit.scatter - fit.scatter.T)) < 1e-10
            assert np.all(np.linalg.eigvalsh(fit.scatter) > 0)
            assert fit.objective == pytest.approx(np.linalg.det(fit.scatter))

    def test_custom_fits_majority(self, two_cluster, two_cluster_pool):
        data, mask = two_cluster
        fit = s_estimate(data, RhoSpec.custom(2, 0.2), two_cluster_pool)
        assert np.all(fit.weights[mask] == 0)
        hull = Delaunay(data.values[~mask])
        assert hull.find_simplex(fit.location) >= 0

    def test_bisquare_49_straddles(self, two_cluster, two_cluster_pool):
        data, mask = two_cluster
        fit = s_estimate(data, RhoSpec.bisquare(2, bdp=0.49), two_cluster_pool)
        assert fit.weights[mask].mean() > 0.1

    def test_bisquare_50_robust(self, two_cluster, two_cluster_pool):
        data, mask = two_cluster
        fit = s_estimate(data, RhoSpec.bisquare(2, bdp=0.5), two_cluster_pool)
        assert fit.weights[mask].mean() < 0.01

    def test_deterministic(self, gaussian500, gaussian_pool):
        spec = RhoSpec.custom(2, 0.2)
        a, b = s_estimate(gaussian500, spec, gaussian_pool), s_estimate(gaussian500, spec, gaussian_pool)
        assert np.array_equal(a.location, b.location) and np.array_equal(a.scatter, b.scatter)

    def test_dimension_mismatch(self, gaussian500, gaussian_pool):
        with pytest.raises(ValueError):
            s_estimate(gaussian500, RhoSpec.custom(3, 0.2), gaussian_pool)

    def test_all_starts_degenerate(self):
        # every elemental subset is collinear
        x = np.arange(10.0)
        data = DataMatrix(np.column_stack([x, 2 * x]) + np.r_[np.zeros(9), 1.0][:, None] * [0, 0.5])
        pool = SubsetPool(seed=None, n=10, p=2, subsets=[[0, 1, 2], [3, 4, 5]])
        with pytest.raises(EstimationError) as err:
            s_estimate(data, RhoSpec.bisquare(2, bdp=0.5), pool)
        assert len(err.value.diagnostics) == 2

    def test_singular_starts_are_skipped(self, gaussian500):
        pool = SubsetPool(seed=None, n=500, p=2, subsets=[[0, 0, 0], [1, 2, 3]])
        fit = s_estimate(gaussian500, RhoSpec.bisquare(2, bdp=0.5), pool)
        reasons = [d["start"] for d in fit.diagnostics["discarded"]]
        assert reasons == [0]


class TestMMEstimate:
    def test_fixed_point(self, gaussian500, gaussian_pool):
        spec = RhoSpec.bisquare(2, bdp=0.5)
        s = s_estimate(gaussian500, spec, gaussian_pool)
        mm = mm_estimate(gaussian500, s, spec)
        assert np.allclose(mm.location, s.location, atol=1e-8)
        assert np.allclose(mm.scatter, s.scatter, atol=1e-8)

    def test_determinant_preserved(self, gaussian500, gaussian_pool):
        s = s_estimate(gaussian500, RhoSpec.bisquare(2, bdp=0.5), gaussian_pool)
        mm = mm_estimate(gaussian500, s, RhoSpec.bisquare(2, bdp=0.2))
        assert abs(np.linalg.det(mm.scatter) - np.linalg.det(s.scatter)) < 1e-8
        assert mm.method == "MM" and mm.converged

    def test_start_dependence(self, geyser299, geyser_pool):
        data, mask = geyser299
        eff = RhoSpec.bisquare(2, bdp=0.45)
        good = mm_estimate(data, s_estimate(data, RhoSpec.bisquare(2, bdp=0.5), geyser_pool), eff)
        bad = mm_estimate(data, s_estimate(data, RhoSpec.bisquare(2, bdp=0.49), geyser_pool), eff)
        assert on_majority(good, data, mask)
        assert not on_majority(bad, data, mask)
        assert bad.weights[mask].mean() > 0.1

    def test_needs_s_fit(self, gaussian500, gaussian_pool):
        m = mcd_estimate(gaussian500, 260, gaussian_pool)
        with pytest.raises(ValueError):
            mm_estimate(gaussian500, m, RhoSpec.bisquare(2, bdp=0.3))

    def test_not_converged_flag(self, gaussian500, gaussian_pool):
        s = s_estimate(gaussian500, RhoSpec.bisquare(2, bdp=0.5), gaussian_pool)
        mm = mm_estimate(gaussian500, s, RhoSpec.bisquare(2, bdp=0.1), max_iter=1)
        assert not mm.converged and mm.iterations == 1


class TestMCD:
    TOY = np.array([0, 1, 2, 3, 4, 5, 6, 100.0])

    def test_toy_matches_brute_force(self):
        data = DataMatrix(self.TOY)
        # h = 5 is the smallest legal subset size for n = 8, p = 1
        fit = mcd_estimate(data, 5, exhaustive_subsets(8, 1, 5), reweight=False)
        logdet, sub = brute_force_mcd(self.TOY, 5)
        assert math.log(fit.objective) == pytest.approx(logdet, abs=1e-12)
        chosen = np.flatnonzero(fit.raw_weights)
        assert 7 not in chosen and np.all(np.diff(chosen) == 1)
        assert fit.raw_weights.sum() == 5
        assert tuple(chosen) == sub

    def test_toy_csteps_reach_inlier_window(self):
        subset = np.array([0, 1, 2, 3, 7])
        for _ in range(8):
            _, _, new = cstep(self.TOY[:, None], subset)
            if np.array_equal(new, subset):
                break
            subset = new
        assert 7 not in subset and np.all(np.diff(subset) == 1)

    def test_cstep_fixed_point_and_descent(self):
        rng = np.random.default_rng(2)
        y = rng.standard_normal((40, 2))
        for _ in range(20):
            subset = np.sort(rng.choice(40, 25, replace=False))
            prev = np.linalg.det(np.cov(y[subset].T, bias=True))
            for _ in range(30):
                _, cov, new = cstep(y, subset)
                det = np.linalg.det(np.cov(y[new].T, bias=True))
                assert det <= prev * (1 + 1e-12)
                if np.array_equal(new, subset):
                    break
                subset, prev = new, det
            _, _, again = cstep(y, subset)
            assert np.array_equal(again, subset)

    def test_h_equals_n_is_classical(self, gaussian500, gaussian_pool):
        fit = mcd_estimate(gaussian500, 500, gaussian_pool, reweight=False)
        assert np.allclose(fit.location, gaussian500.values.mean(axis=0))
        assert np.allclose(fit.scatter, np.cov(gaussian500.values.T, bias=True))
        assert mcd_consistency_factor(500, 500, 2) == 1.0

    def test_exactly_h_raw_weights(self, two_cluster, two_cluster_pool):
        data, mask = two_cluster
        h = bdp_to_h(data.n, data.p, 0.5)
        fit = mcd_estimate(data, h, two_cluster_pool)
        assert fit.raw_weights.sum() == h
        assert np.all(fit.weights[mask] == 0)

    def test_h_out_of_range(self, gaussian500, gaussian_pool):
        with pytest.raises(ValueError):
            mcd_estimate(gaussian500, 100, gaussian_pool)
        with pytest.raises(ValueError):
            mcd_estimate(gaussian500, 501, gaussian_pool)

    def test_bdp_to_h(self):
        assert bdp_to_h(300, 2, 0.5) == 152
        assert bdp_to_h(300, 2, 0.25) == 225
        assert bdp_to_h(300, 2, 0.0) == 300

    def test_consistency_factor_gaussian(self):
        # raw scatter of a large Gaussian sample should be close to identity
        rng = np.random.default_rng(4)
        data = DataMatrix(rng.standard_normal((4000, 2)))
        fit = mcd_estimate(data, 3000, generate_elemental_subsets(4000, 2, 50, 0), reweight=False)
        assert np.allclose(np.linalg.eigvalsh(fit.scatter), 1.0, atol=0.1)

    def test_with_location_scatter_starts(self, gaussian500):
        fit = mcd_estimate(gaussian500, 260, deterministic_starts(gaussian500))
        assert fit.raw_weights.sum() == 260
