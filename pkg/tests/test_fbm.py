import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from fracwishart.errors import CirculantEmbeddingError, DomainError, UsageError
from fracwishart.fbm import (
    TimeGrid,
    check_hurst,
    circulant_sqrt_eigenvalues,
    cholesky_factor,
    fbm_covariance,
    increment_autocov,
    sample_fbm,
    sample_fbm_paths,
)

hurst = st.floats(0.05, 0.95)
times = st.floats(0.0, 10.0)


class TestCovariance:
    @pytest.mark.parametrize(
        "s,t,H,expected",
        [
            (1.0, 1.0, 0.8, 1.0),
            (2.0, 3.0, 0.5, 2.0),
            (1.0, 2.0, 0.75, 0.5 * 2**1.5),
        ],
    )
    def test_values(self, s, t, H, expected):
        assert fbm_covariance(s, t, H) == pytest.approx(expected, rel=1e-14)

    @given(times, times, hurst)
    def test_symmetric(self, s, t, H):
        assert fbm_covariance(s, t, H) == fbm_covariance(t, s, H)

    @given(times, hurst)
    def test_diagonal_is_variance(self, t, H):
        assert fbm_covariance(t, t, H) == pytest.approx(t ** (2 * H), rel=1e-12, abs=1e-300)

    def test_negative_time(self):
        with pytest.raises(DomainError):
            fbm_covariance(-1.0, 1.0, 0.7)

    @pytest.mark.parametrize("H", [0.0, 1.0, -0.2, 1.5])
    def test_hurst_domain(self, H):
        with pytest.raises(DomainError):
            fbm_covariance(1.0, 1.0, H)

    def test_long_memory_range(self):
        assert check_hurst(0.7, long_memory=True) == 0.7
        with pytest.raises(DomainError):
            check_hurst(0.4, long_memory=True)


class TestIncrementAutocov:
    @pytest.mark.parametrize(
        "k,dt,H,expected",
        [
            (0, 0.5, 0.6, 0.5**1.2),
            (3, 1.0, 0.5, 0.0),
            (1, 1.0, 0.75, 0.5 * (2**1.5 - 2)),
        ],
    )
    def test_values(self, k, dt, H, expected):
        assert increment_autocov(k, dt, H) == pytest.approx(expected, abs=1e-14)

    @pytest.mark.parametrize("m", [16, 256, 2048])
    @pytest.mark.parametrize("H", [0.51, 0.7, 0.95])
    def test_increment_covariance_is_pd(self, m, H):
        lags = np.arange(m)
        gamma = increment_autocov(lags, 1.0 / m, H)
        cov = gamma[np.abs(lags[:, None] - lags[None, :])]
        np.linalg.cholesky(cov)

    @given(st.integers(0, 50), hurst)
    def test_matches_covariance_differences(self, k, H):
        dt = 0.1
        j = 3
        cov = (
            fbm_covariance((j + k + 1) * dt, (j + 1) * dt, H)
            - fbm_covariance((j + k + 1) * dt, j * dt, H)
            - fbm_covariance((j + k) * dt, (j + 1) * dt, H)
            + fbm_covariance((j + k) * dt, j * dt, H)
        )
        assert increment_autocov(k, dt, H) == pytest.approx(cov, abs=1e-12)


class TestTimeGrid:
    def test_points(self):
        g = TimeGrid(2.0, 4)
        np.testing.assert_allclose(g.times, [0, 0.5, 1, 1.5, 2])
        assert g.dt == 0.5
        assert g.index_of(1.5) == 3

    def test_index_of_rejects_off_grid(self):
        with pytest.raises(UsageError):
            TimeGrid(1.0, 4).index_of(0.3)

    @pytest.mark.parametrize("T,m", [(0.0, 4), (-1.0, 4), (1.0, 0), (1.0, 2.5)])
    def test_invalid(self, T, m):
        with pytest.raises(DomainError):
            TimeGrid(T, m)


class TestSampling:
    @pytest.mark.parametrize("method", ["cholesky", "circulant"])
    @given(seed=st.integers(0, 2**63))
    @settings(max_examples=10, deadline=None)
    def test_starts_at_zero(self, method, seed):
        path = sample_fbm(TimeGrid(1.0, 32), 0.7, seed, method)
        assert path.values[0] == 0.0
        assert path.values.shape == (33,)

    @pytest.mark.parametrize("method", ["cholesky", "circulant"])
    def test_deterministic(self, method):
        g = TimeGrid(1.0, 64)
        a = sample_fbm_paths(g, 0.7, 11, 5, method)
        b = sample_fbm_paths(g, 0.7, 11, 5, method)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_allclose(sample_fbm(g, 0.7, 11, method).values, a[0], rtol=0, atol=1e-13)

    def test_circulant_needs_power_of_two(self):
        with pytest.raises(UsageError):
            sample_fbm(TimeGrid(1.0, 48), 0.7, 0, "circulant")

    def test_cholesky_size_guard(self):
        with pytest.raises(UsageError):
            cholesky_factor(TimeGrid(1.0, 5000), 0.7)

    def test_unknown_method(self):
        with pytest.raises(UsageError):
            sample_fbm(TimeGrid(1.0, 8), 0.7, 0, "wavelet")

    def test_cached_factors_are_read_only(self):
        g = TimeGrid(1.0, 16)
        with pytest.raises(ValueError):
            cholesky_factor(g, 0.7)[0, 0] = 1.0
        with pytest.raises(ValueError):
            circulant_sqrt_eigenvalues(g, 0.7)[0] = 1.0

    def test_embedding_error_signals_fallback(self):
        assert CirculantEmbeddingError.fallback == "cholesky"

    def test_terminal_variance(self):
        N = 20_000
        b = sample_fbm_paths(TimeGrid(1.0, 64), 0.6, 3, N)[:, -1]
        se = np.sqrt(2.0 / N)
        assert abs(b.var() - 1.0) <= 4 * se

    def test_brownian_increments_uncorrelated(self):
        N, m = 400, 256
        inc = np.diff(sample_fbm_paths(TimeGrid(1.0, m), 0.5, 4, N), axis=1)
        corr = np.mean(inc[:, 1:] * inc[:, :-1]) / np.mean(inc**2)
        assert abs(corr) <= 4 / np.sqrt(N * m)

    @pytest.mark.parametrize("H", [0.6, 0.8])
    def test_methods_agree_in_law(self, H):
        g = TimeGrid(1.0, 32)
        a = sample_fbm_paths(g, H, 1, 10_000, "cholesky")[:, -1]
        b = sample_fbm_paths(g, H, 2, 10_000, "circulant")[:, -1]
        assert stats.ks_2samp(a, b).statistic <= 0.03
