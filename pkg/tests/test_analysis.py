import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from fracwishart.analysis import (
    empirical_measure,
    gap_stats,
    inverse_moment_scaling,
    joint_logdensity,
    ks_distance,
    structure_function,
    wasserstein1,
)
from fracwishart.errors import DomainError, PreconditionError, UsageError
from fracwishart.fbm import TimeGrid, sample_fbm_paths
from fracwishart.limit_law import DilatedMP
from fracwishart.matrix_process import SpectrumPath
from fracwishart.mc_harness import SimConfig, run_ensemble, sample_spectra

atoms = arrays(float, st.integers(1, 40), elements=st.floats(0, 20))


class TestEmpiricalMeasure:
    def test_two_atoms(self):
        e = empirical_measure([3.0, 1.0])
        assert e.integrate(lambda x: x) == 2.0
        assert e.cdf(2.0) == 0.5
        assert e.integrate(np.ones_like) == 1.0

    def test_empty(self):
        with pytest.raises(UsageError):
            empirical_measure([])


class TestDistances:
    def test_sampled_from_law(self):
        law = DilatedMP(2.0, 0.75, 1.0)
        e = empirical_measure(law.sample(seed=1, count=100_000))
        assert ks_distance(e, law) <= 0.01

    def test_point_mass_against_continuous_law(self):
        assert ks_distance(empirical_measure([0.0]), DilatedMP(1.0, 0.7, 1.0)) == 1.0

    @pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
    def test_quantile_discretisation(self, c):
        n = 1000
        law = DilatedMP(c, 0.7, 1.4)
        e = empirical_measure(law.quantile((np.arange(n) + 0.5) / n))
        assert ks_distance(e, law) <= 1 / n + 1e-6

    def test_identical_discretisations(self):
        e = empirical_measure([0.5, 1.0, 4.0])
        assert wasserstein1(e, e) <= 1e-10
        assert ks_distance(e, e) == 0.0

    def test_point_masses(self):
        assert wasserstein1(empirical_measure([1.0]), DilatedMP(1.0, 0.7, 0.0)) == 1.0
        assert ks_distance(empirical_measure([1.0]), DilatedMP(1.0, 0.7, 0.0)) == 1.0
        assert ks_distance(empirical_measure([0.0]), DilatedMP(1.0, 0.7, 0.0)) == 0.0

    @pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
    def test_wasserstein_against_sorted_pairs(self, c):
        law = DilatedMP(c, 0.7, 1.3)
        x = np.sort(law.sample(seed=9, count=1000)) * 1.05
        e = empirical_measure(x)
        M = 100_000
        q = (np.arange(M) + 0.5) / M
        brute = np.mean(np.abs(x[np.minimum((q * x.size).astype(int), x.size - 1)] - law.quantile(q)))
        assert wasserstein1(e, law) == pytest.approx(brute, abs=1e-3)

    @pytest.mark.parametrize("c", [0.5, 2.0])
    def test_atom_handled_in_ks(self, c):
        # all atoms at zero: the law's jump at zero is what is left
        law = DilatedMP(c, 0.7, 1.0)
        assert ks_distance(empirical_measure(np.zeros(10)), law) == pytest.approx(1 - law.atom)

    @settings(max_examples=50, deadline=None)
    @given(atoms, st.sampled_from([0.5, 1.0, 2.0]), st.floats(0.0, 3.0))
    def test_ranges(self, x, c, t):
        e = empirical_measure(x)
        law = DilatedMP(c, 0.7, t)
        ks = ks_distance(e, law)
        assert 0.0 <= ks <= 1.0
        assert wasserstein1(e, law) >= 0.0

    @settings(max_examples=30, deadline=None)
    @given(atoms)
    def test_ks_is_supremum(self, x):
        # a dense grid can only find a smaller discrepancy
        e = empirical_measure(x)
        law = DilatedMP(1.5, 0.6, 1.1)
        grid = np.linspace(-1, 25, 20001)
        dense = np.max(np.abs(e.cdf(grid) - law.cdf(grid)))
        assert dense <= ks_distance(e, law) + 1e-12


class TestGapStats:
    def path(self, rows, p=None):
        rows = np.asarray(rows, dtype=float)
        return SpectrumPath(grid=TimeGrid(1.0, rows.shape[0] - 1), eigenvalues=rows, scaled=False,
                            p=p or rows.shape[1])

    def test_constant_path(self):
        g = gap_stats(self.path([[3, 1], [3, 1], [3, 1]]))
        assert g.global_min == 2.0
        assert not g.has_tie

    def test_manufactured_tie(self):
        g = gap_stats(self.path([[0, 0, 0], [3, 2, 1], [2, 2, 1]]))
        assert g.has_tie and g.ties == 1
        assert (g.time_index, g.index, g.global_min) == (2, 0, 0.0)

    def test_start_excluded(self):
        g = gap_stats(self.path([[0, 0], [2, 1], [4, 1]]))
        assert g.global_min == 1.0 and g.time == 0.5

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, (5, 4), elements=st.floats(0, 10)))
    def test_reported_minimum_is_reproducible(self, raw):
        lam = -np.sort(-raw, axis=1)
        g = gap_stats(self.path(lam))
        assert g.global_min == lam[g.time_index, g.index] - lam[g.time_index, g.index + 1]
        assert np.all(g.per_time >= 0)

    def test_needs_two(self):
        with pytest.raises(UsageError):
            gap_stats(self.path([[1.0], [2.0]]))


class TestStructureFunction:
    lags = [2, 4, 8, 16, 32]

    def test_linear_path(self):
        t = np.linspace(0, 1, 65)
        ens = np.broadcast_to(t[None, :, None], (100, 65, 1))
        sf = structure_function(ens, self.lags, dt=1 / 64)
        assert sf.slope == pytest.approx(4.0, abs=1e-10)

    def test_constant_paths(self):
        with pytest.raises(DomainError, match="degenerate"):
            structure_function(np.ones((100, 65, 2)), self.lags)

    def test_too_few_replicas(self):
        with pytest.raises(UsageError):
            structure_function(np.random.rand(10, 65, 2), self.lags)

    @pytest.mark.parametrize("lags", [[2], [2, 4, 8], [0, 10]])
    def test_bad_lags(self, lags):
        with pytest.raises(UsageError):
            structure_function(np.random.rand(100, 65, 2), lags)

    @pytest.mark.parametrize("H", [0.6, 0.8])
    def test_scalar_fbm_squares(self, H):
        b = sample_fbm_paths(TimeGrid(1.0, 256), H, 21, 2000)
        sf = structure_function(b**2, self.lags)
        assert abs(sf.slope - 4 * H) <= 0.1 * 4 * H


def gaussian_draws(n, p, H, times, count, seed):
    cfg = SimConfig(n=n, p=p, H=H, T=max(times), m=round(max(times) / min(times)), replicas=count, seed=seed,
                    fbm_method="cholesky", scale=False)
    return sample_spectra(cfg, times)


class TestInverseMoment:
    def test_self_similar_ratio(self):
        H = 0.7
        d = gaussian_draws(5, 8, H, [1.0, 4.0], 4000, 3)
        fit = inverse_moment_scaling(1.0, [1.0, 4.0], [d[:, 0], d[:, 1]])
        ratio = fit.estimates[0] / fit.estimates[1]
        rel_se = np.hypot(*(fit.standard_errors / fit.estimates))
        assert abs(ratio / 4 ** (2 * H) - 1) <= 4 * rel_se
        assert fit.truncated == 0

    @pytest.mark.parametrize("r", [2.0, 3.5])
    def test_r_too_large(self, r):
        with pytest.raises(PreconditionError):
            inverse_moment_scaling(r, [1, 2], [np.ones((3, 2)), np.ones((3, 2))])

    def test_needs_two_eigenvalues(self):
        with pytest.raises(UsageError):
            inverse_moment_scaling(1.0, [1, 2], [np.ones((3, 1)), np.ones((3, 1))])

    def test_truncation_is_counted(self):
        d = np.array([[2.0, 1.0], [1.0, 1.0], [3.0, 1.0]])
        fit = inverse_moment_scaling(1.0, [1, 2], [d, d])
        assert fit.truncated == 2
        assert fit.estimates[0] == pytest.approx(0.75)


class TestJointLogDensity:
    def test_scalar_case_is_chi_square(self):
        lam = np.linspace(0.1, 8, 20)
        for s, H in [(1.0, 0.7), (2.5, 0.6)]:
            tau = s ** (2 * H)
            ours = np.array([joint_logdensity([x], s, H, 1) for x in lam])
            ref = stats.chi2.logpdf(lam / tau, 1) - np.log(tau)
            diff = ours - ref
            assert np.ptp(diff) <= 1e-12
            # the time factor carries the normalisation exactly
            assert diff[0] == pytest.approx(-stats.chi2.logpdf(1.0, 1) - 0.5, abs=1e-12)

    def test_simulated_scalar_matches_chi_square(self):
        x = gaussian_draws(1, 1, 0.75, [1.0], 10_000, 5)[:, 0, 0]
        assert stats.kstest(x, stats.chi2(1).cdf).statistic <= 0.02

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, 3, elements=st.floats(0.1, 10), unique=True), st.floats(0.1, 5), st.floats(0.55, 0.95))
    def test_self_similar_shape(self, mu, s, H):
        mu = np.sort(mu)[::-1]
        if np.min(-np.diff(mu)) < 1e-6:
            return
        tau = s ** (2 * H)
        shift = joint_logdensity(tau * mu, s, H, 5) - joint_logdensity(mu, 1.0, H, 5)
        # the Jacobian of mu -> tau mu cancels the density of tau mu, leaving a constant
        assert shift == pytest.approx(-3 * np.log(tau), abs=1e-9)

    def test_matches_wishart_density(self):
        # for p >= n the joint density integrates the Wishart density over the orthogonal group,
        # so ratios at two spectra agree with scipy's Wishart density at diagonal matrices
        n, p, s, H = 3, 5, 1.3, 0.7
        W = stats.wishart(df=p, scale=s ** (2 * H) * np.eye(n))
        a, b = np.array([4.0, 2.0, 0.5]), np.array([6.0, 1.5, 0.2])
        vdm = lambda l: np.sum(np.log([l[0] - l[1], l[0] - l[2], l[1] - l[2]]))
        expected = (W.logpdf(np.diag(a)) + vdm(a)) - (W.logpdf(np.diag(b)) + vdm(b))
        got = joint_logdensity(a, s, H, p) - joint_logdensity(b, s, H, p)
        assert got == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("lam", [[2.0, 2.0], [1.0, 2.0], [1.0, -1.0]])
    def test_invalid_spectrum(self, lam):
        with pytest.raises(DomainError):
            joint_logdensity(lam, 1.0, 0.7, 3)

    def test_needs_p_at_least_n(self):
        with pytest.raises(DomainError):
            joint_logdensity([2.0, 1.0], 1.0, 0.7, 1)


class TestLimitProxy:
    def test_ks_decreases_with_dimension(self):
        means = []
        for n in [25, 50, 100, 200]:
            cfg = SimConfig(n=n, p=2 * n, H=0.75, T=1.0, m=1, replicas=20, seed=8, fbm_method="cholesky")
            means.append(run_ensemble(cfg).distances["ks_mean"][0])
        assert all(a > b for a, b in zip(means, means[1:]))
