import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polycasc.env import (
    EnvironmentModel,
    EnvironmentSlab,
    cone_site_count,
    in_cone,
    log_mgf,
    normalized_weight,
    sample_energy,
)
from polycasc.errors import DomainError, ParameterError

from oracles import quad_log_mgf

ALL_MODELS = [
    EnvironmentModel.gaussian(0, 1),
    EnvironmentModel.gaussian(-0.7, 2.3),
    EnvironmentModel.bernoulli(0.5, 0, 1),
    EnvironmentModel.bernoulli(0.3, -1.0, 2.0),
    EnvironmentModel.uniform(0, 1),
    EnvironmentModel.uniform(-2.0, 0.5),
    EnvironmentModel.rademacher(),
]


class TestLogMgf:
    @pytest.mark.parametrize("model", ALL_MODELS)
    def test_zero_beta_is_zero(self, model):
        assert log_mgf(model, 0.0) == 0.0

    def test_standard_gaussian_closed_form(self):
        assert log_mgf(EnvironmentModel.gaussian(0, 1), 2.0) == pytest.approx(2.0, abs=1e-14)

    @pytest.mark.parametrize("model", ALL_MODELS)
    def test_matches_quadrature_on_beta_grid(self, model):
        # relative error of E e^{beta X} itself, not of its log
        for beta in np.linspace(-4, 4, 17):
            ours = np.exp(log_mgf(model, float(beta)))
            ref = np.exp(quad_log_mgf(model, float(beta)))
            assert abs(ours - ref) / ref <= 1e-10

    def test_uniform_tiny_beta_branch(self):
        model = EnvironmentModel.uniform(-3.0, 5.0)
        for beta in (1e-12, 1e-7, 1e-5, 9.9e-5, 1.1e-4, 1e-3):
            ref = quad_log_mgf(model, beta)
            assert log_mgf(model, beta) == pytest.approx(ref, abs=1e-13)
        assert log_mgf(model, 0.0) == 0.0

    def test_rademacher_large_beta_no_overflow(self):
        val = log_mgf(EnvironmentModel.rademacher(), 800.0)
        assert np.isfinite(val) and val == pytest.approx(800.0 - np.log(2.0))

    def test_uniform_large_beta_no_overflow(self):
        model = EnvironmentModel.uniform(0, 1)
        val = log_mgf(model, 400.0)
        assert np.isfinite(val)
        # E e^{bX} = (e^b - 1)/b -> lam ~ b - ln b
        assert val == pytest.approx(400.0 - np.log(400.0), rel=1e-10)


class TestModelValidation:
    def test_rejects_bad_parameters(self):
        with pytest.raises(ParameterError):
            EnvironmentModel.gaussian(0, 0)
        with pytest.raises(ParameterError):
            EnvironmentModel.bernoulli(0.0, 0, 1)
        with pytest.raises(ParameterError):
            EnvironmentModel.bernoulli(0.4, 1.0, 1.0)
        with pytest.raises(ParameterError):
            EnvironmentModel.uniform(2.0, 2.0)
        with pytest.raises(ParameterError):
            EnvironmentModel("cauchy", (0, 1))
        with pytest.raises(ParameterError):
            EnvironmentModel("gaussian", (0, 1, 2))
        with pytest.raises(ParameterError):
            EnvironmentModel("gaussian", (0, float("nan")))


class TestSlabDeterminism:
    def test_repeated_queries_identical(self):
        model = EnvironmentModel.gaussian(0, 1)
        slab = EnvironmentSlab(123, horizon=20)
        v = slab.value(model, 7, -3)
        assert slab.value(model, 7, -3) == v
        assert EnvironmentSlab(123, horizon=20).value(model, 7, -3) == v

    def test_row_matches_scalar_queries(self):
        model = EnvironmentModel.uniform(0, 1)
        slab = EnvironmentSlab(5, horizon=15)
        for j in (1, 4, 15):
            row = slab.row_values(model, j)
            scalars = [slab.value(model, j, x) for x in range(-j, j + 1, 2)]
            assert np.array_equal(row, scalars)

    def test_value_independent_of_query_order(self):
        model = EnvironmentModel.gaussian(0, 1)
        sites = [(j, x) for j in range(1, 9) for x in range(-j, j + 1, 2)]
        forward = {s: EnvironmentSlab(9, 8).value(model, *s) for s in sites}
        backward = {s: EnvironmentSlab(9, 8).value(model, *s) for s in reversed(sites)}
        assert forward == backward

    @settings(max_examples=50, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=2**64 - 1),
        j=st.integers(1, 50),
        k=st.integers(0, 50),
    )
    def test_sample_energy_pure(self, seed, j, k):
        model = EnvironmentModel.gaussian(0, 1)
        x = -j + 2 * (k % (j + 1))  # valid parity site in [-j, j]
        assert sample_energy(model, seed, j, x) == sample_energy(model, seed, j, x)

    def test_distinct_sites_distinct_values(self):
        # hash collisions across a row would show up as equal gaussians
        model = EnvironmentModel.gaussian(0, 1)
        row = EnvironmentSlab(1, 4000).row_values(model, 4000)
        assert np.unique(row).size == row.size


class TestConeGeometry:
    def test_out_of_cone_rejected(self):
        model = EnvironmentModel.gaussian(0, 1)
        slab = EnvironmentSlab(1, horizon=10)
        with pytest.raises(DomainError):
            slab.value(model, 3, 5)  # |x| > j
        with pytest.raises(DomainError):
            slab.value(model, 3, 2)  # wrong parity
        with pytest.raises(DomainError):
            slab.value(model, 11, 1)  # beyond horizon
        with pytest.raises(DomainError):
            sample_energy(model, 1, 0, 0)

    def test_in_cone_d2(self):
        assert in_cone(4, (2, 2), d=2)
        assert in_cone(4, (1, 1), d=2)  # coordinate sum 2 matches j=4 parity
        assert in_cone(3, (1, 1), d=2) is False  # parity
        assert in_cone(2, (2, 1), d=2) is False  # norm
        assert in_cone(3, (1, 0), d=2)

    def test_d2_slab_values_deterministic(self):
        model = EnvironmentModel.gaussian(0, 1)
        slab = EnvironmentSlab(3, horizon=6, dimension=2)
        v = slab.value(model, 4, (1, -1))
        assert slab.value(model, 4, (1, -1)) == v
        with pytest.raises(DomainError):
            slab.value(model, 4, (1, 0))

    def test_d2_cone_budget_guard(self):
        with pytest.raises(ParameterError):
            EnvironmentSlab(1, horizon=600, dimension=2)

    def test_cone_site_count_small_cases(self):
        assert cone_site_count(3, 1) == 2 + 3 + 4
        # d=2: |L_1|=4, |L_2|=9 (4 axis pairs at norm 2, 4 diagonal, origin)
        assert cone_site_count(2, 2) == 4 + 9


class TestSamplingMarginals:
    def test_gaussian_mean_clt(self):
        model = EnvironmentModel.gaussian(0, 1)
        slab = EnvironmentSlab(2024, horizon=2_000_000)
        vals = slab.row_values(model, 1_999_999)
        assert vals.size >= 10**6
        assert abs(vals[: 10**6].mean()) <= 4e-3

    def test_gaussian_variance(self):
        model = EnvironmentModel.gaussian(0.5, 2.0)
        vals = EnvironmentSlab(77, 300_000).row_values(model, 299_999)[:150_000]
        assert vals.mean() == pytest.approx(0.5, abs=4 * 2.0 / np.sqrt(150_000))
        assert vals.std() == pytest.approx(2.0, rel=0.01)

    def test_bernoulli_frequency(self):
        model = EnvironmentModel.bernoulli(0.3, 0.0, 1.0)
        vals = EnvironmentSlab(31, 200_001).row_values(model, 200_000)[:100_000]
        freq = (vals == 1.0).mean()
        se = np.sqrt(0.3 * 0.7 / 100_000)
        assert abs(freq - 0.3) <= 3 * se

    def test_uniform_and_rademacher_moments(self):
        n = 100_000
        u = EnvironmentSlab(9, 2 * n + 1).row_values(EnvironmentModel.uniform(-1, 3), 2 * n)[:n]
        assert u.mean() == pytest.approx(1.0, abs=5 * (4 / np.sqrt(12)) / np.sqrt(n))
        assert u.min() >= -1 and u.max() <= 3
        r = EnvironmentSlab(10, 2 * n + 1).row_values(EnvironmentModel.rademacher(), 2 * n)[:n]
        assert set(np.unique(r)) == {-1.0, 1.0}
        assert abs(r.mean()) <= 5 / np.sqrt(n)


class TestNormalizedWeight:
    def test_beta_zero_is_one(self):
        for model in ALL_MODELS:
            assert normalized_weight(model, 0.0, 1.7) == 1.0

    def test_gaussian_cancellation_point(self):
        model = EnvironmentModel.gaussian(0, 1)
        assert normalized_weight(model, 1.0, 0.5) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize(
        "model", [EnvironmentModel.gaussian(0, 1), EnvironmentModel.uniform(0, 1)]
    )
    def test_unit_mean_monte_carlo(self, model):
        n = 10**6
        slab = EnvironmentSlab(555, 2 * n + 1)
        eta = slab.row_values(model, 2 * n)[:n]
        w = normalized_weight(model, 1.0, eta)
        se = w.std(ddof=1) / np.sqrt(n)
        assert abs(w.mean() - 1.0) <= 5 * se


class TestOverrides:
    def test_override_changes_one_site_only(self):
        model = EnvironmentModel.gaussian(0, 1)
        slab = EnvironmentSlab(4, horizon=6)
        patched = slab.with_override(3, 1, 9.5)
        assert patched.value(model, 3, 1) == 9.5
        assert patched.value(model, 3, -1) == slab.value(model, 3, -1)
        row = patched.row_values(model, 3)
        assert row[(1 + 3) // 2] == 9.5
