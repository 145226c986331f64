from types import SimpleNamespace

import numpy as np
import pytest

from polycasc.diagnostics import (
    concentration_check,
    concentration_csv,
    influence_check,
    occupation_probabilities,
    overlap_series,
)
from polycasc.env import EnvironmentModel, EnvironmentSlab
from polycasc.errors import DomainError, UsageError

from oracles import enumerate_two_replica_overlap, srw_law

GAUSS = EnvironmentModel.gaussian(0, 1)
UNIF = EnvironmentModel.uniform(0, 1)


class TestOverlap:
    def test_free_walk_values_exact(self):
        series = overlap_series(EnvironmentSlab(4, 12), GAUSS, 0.0, 12)
        assert series.i_k[0] == pytest.approx(0.5, abs=1e-15)
        for k in range(1, 13):
            expect = sum(p * p for p in srw_law(k).values())
            assert series.i_k[k - 1] == pytest.approx(expect, abs=1e-13)
        # delocalized walk: overlaps decay
        assert series.i_k[-1] < 0.25

    def test_bounds_and_cesaro(self):
        series = overlap_series(EnvironmentSlab(8, 40), GAUSS, 1.5, 40)
        assert ((series.i_k > 0) & (series.i_k <= 1)).all()
        assert ((series.cesaro > 0) & (series.cesaro <= 1)).all()
        assert series.cesaro[0] == series.i_k[0]
        assert series.cesaro[-1] == pytest.approx(series.i_k.mean())

    @pytest.mark.parametrize("beta", [0.7, 1.8])
    def test_matches_two_replica_enumeration(self, beta):
        slab = EnvironmentSlab(123, 8)
        series = overlap_series(slab, GAUSS, beta, 8)
        for k in range(1, 9):
            expect = enumerate_two_replica_overlap(slab, GAUSS, beta, k)
            assert series.i_k[k - 1] == pytest.approx(expect, abs=1e-12)

    def test_localization_signal_at_strong_disorder(self):
        n, n_slabs = 256, 100
        base = overlap_series(EnvironmentSlab(0, n), GAUSS, 0.0, n).cesaro[-1]
        finals = np.array(
            [
                overlap_series(EnvironmentSlab(1000 + i, n), GAUSS, 2.0, n).cesaro[-1]
                for i in range(n_slabs)
            ]
        )
        se = finals.std(ddof=1) / np.sqrt(n_slabs)
        assert finals.mean() - base > 3 * se

    def test_horizon_guard(self):
        with pytest.raises(DomainError):
            overlap_series(EnvironmentSlab(1, 4), GAUSS, 1.0, 5)


class TestConcentration:
    def test_lambda_zero_row_trivial(self):
        rows = concentration_check(GAUSS, 1.0, 8, [0.0], 500, 1)
        assert rows[0].empirical == 0.0
        assert rows[0].bound == 0.0
        assert rows[0].passed

    def test_beta_zero_degenerate(self):
        rows = concentration_check(GAUSS, 0.0, 8, [0.5, 1.0], 500, 1)
        for row in rows:
            assert abs(row.empirical) <= 1e-12
            assert row.passed

    @pytest.mark.parametrize("model", [GAUSS, UNIF])
    @pytest.mark.parametrize("beta", [0.5, 1.0])
    def test_verdicts_pass(self, model, beta):
        rows = concentration_check(model, beta, 16, [0.25, 0.5, 1.0], 30_000, 9)
        assert all(r.passed for r in rows)

    def test_scaled_gaussian_bound(self):
        rows = concentration_check(
            EnvironmentModel.gaussian(0, 2.0), 0.5, 8, [0.5], 5000, 2
        )
        assert rows[0].bound == pytest.approx(0.5 * (2.0 * 0.5 * 0.5) ** 2 * 8)

    def test_bounded_families_supported(self):
        for model in (EnvironmentModel.bernoulli(0.5, 0, 1), EnvironmentModel.rademacher()):
            rows = concentration_check(model, 0.5, 4, [0.5], 2000, 3)
            assert rows and all(np.isfinite(r.empirical) for r in rows)

    def test_unsupported_family_usage_error(self):
        fake = SimpleNamespace(family="cauchy", support_width=lambda: None, params=())
        with pytest.raises(UsageError, match="gaussian or bounded"):
            concentration_check(fake, 1.0, 4, [0.5], 100, 1)

    def test_negative_lambda_rejected(self):
        with pytest.raises(UsageError):
            concentration_check(GAUSS, 1.0, 4, [-0.5], 100, 1)

    def test_csv_columns(self, tmp_path):
        rows = concentration_check(GAUSS, 0.5, 4, [0.25, 0.5], 500, 1)
        path = tmp_path / "conc.csv"
        concentration_csv(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "lambda,empirical,bound,verdict"
        assert len(lines) == 3
        assert lines[1].endswith(",pass")


class TestInfluence:
    def test_beta_zero_all_influences_vanish(self):
        report = influence_check(EnvironmentSlab(2, 6), GAUSS, 0.0, 6, sites=[(3, 1), (6, 0)])
        for row in report.rows:
            assert row.exact == 0.0
            assert abs(row.finite_diff) <= 1e-9
        assert report.gradient_norm == 0.0

    def test_finite_difference_oracle_hundred_cases(self):
        gen = np.random.default_rng(42)
        n = 12
        cases = 0
        while cases < 100:
            slab = EnvironmentSlab(int(gen.integers(0, 2**63)), n)
            beta = float(gen.uniform(0.3, 2.0))
            sites = []
            for _ in range(10):
                j = int(gen.integers(1, n + 1))
                x = int(-j + 2 * gen.integers(0, j + 1))
                sites.append((j, x))
            report = influence_check(slab, GAUSS, beta, n, sites=sites)
            for row in report.rows:
                assert row.abs_err <= 1e-6
                assert -1e-10 <= row.exact <= beta + 1e-10
            cases += len(sites)
            assert report.gradient_norm <= report.norm_bound + 1e-12

    def test_gradient_norm_bound_50_slabs(self):
        n = 12
        for i in range(50):
            report = influence_check(
                EnvironmentSlab(7000 + i, n), GAUSS, 1.5, n, sites=[(1, 1)]
            )
            assert report.gradient_norm <= report.norm_bound

    def test_occupation_rows_are_distributions(self):
        probs = occupation_probabilities(EnvironmentSlab(3, 10), GAUSS, 1.1, 10)
        for p in probs:
            assert p.sum() == pytest.approx(1.0, abs=1e-12)
            assert (p >= 0).all()

    def test_site_outside_cone_rejected(self):
        with pytest.raises(DomainError):
            influence_check(EnvironmentSlab(1, 6), GAUSS, 1.0, 6, sites=[(3, 2)])
