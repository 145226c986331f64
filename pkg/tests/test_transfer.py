import numpy as np
import pytest

from polycasc.env import EnvironmentModel, EnvironmentSlab
from polycasc.errors import BudgetError, DomainError, ParameterError
from polycasc.transfer import (
    forward_step,
    initial_weights,
    partition_log,
    path_oracle,
    replica_scan,
    replica_slab_seed,
    run_chain,
    step_distribution,
)

from oracles import srw_law

GAUSS = EnvironmentModel.gaussian(0, 1)


def slab(seed, horizon, d=1):
    return EnvironmentSlab(seed, horizon, d)


class TestFreeWalkLimit:
    def test_one_step(self):
        w = forward_step(initial_weights(0.0), slab(3, 4), GAUSS)
        assert w.as_dict() == {-1: pytest.approx(np.log(0.5)), 1: pytest.approx(np.log(0.5))}

    def test_two_steps_binomial(self):
        w = run_chain(slab(3, 4), GAUSS, 0.0, 2)
        got = {x: np.exp(lw) for x, lw in w.as_dict().items()}
        assert got == {
            -2: pytest.approx(0.25),
            0: pytest.approx(0.5),
            2: pytest.approx(0.25),
        }

    def test_partition_stays_zero(self):
        w = run_chain(slab(8, 300), GAUSS, 0.0, 300)
        assert abs(partition_log(w)) <= 1e-12

    def test_time_zero_partition(self):
        assert partition_log(initial_weights(0.0)) == 0.0
        assert partition_log(initial_weights(1.5)) == 0.0

    @pytest.mark.parametrize("n", [3, 7, 12])
    def test_oracle_reproduces_walk_law(self, n):
        res = path_oracle(slab(10, n), GAUSS, 0.0, n)
        law = srw_law(n)
        for x, p in law.items():
            assert np.exp(res.per_site[x]) == pytest.approx(p, rel=1e-12)


class TestOracleEquivalence:
    def test_single_step_formula(self):
        s = slab(21, 3)
        lam = 0.5  # log-MGF of the standard gaussian at beta=1
        res = path_oracle(s, GAUSS, 1.0, 1)
        for x in (-1, 1):
            expect = np.log(0.5) + s.value(GAUSS, 1, x) - lam
            assert res.per_site[x] == pytest.approx(expect, abs=1e-13)

    def test_transfer_matches_enumeration(self):
        gen = np.random.default_rng(42)
        worst = 0.0
        for _ in range(30):
            n = int(gen.integers(1, 11))
            beta = float(gen.uniform(0, 3))
            s = slab(int(gen.integers(0, 2**63)), n)
            w = run_chain(s, GAUSS, beta, n)
            res = path_oracle(s, GAUSS, beta, n)
            for x in w.sites():
                worst = max(worst, abs(w.log_weight(x) - res.per_site[x]))
            worst = max(worst, abs(partition_log(w) - res.log_partition))
        assert worst <= 1e-12

    def test_d2_transfer_matches_enumeration(self):
        s = slab(5, 5, d=2)
        w = run_chain(s, GAUSS, 0.9, 5)
        res = path_oracle(s, GAUSS, 0.9, 5)
        assert set(w.log_w) == set(res.per_site)
        for site, lw in res.per_site.items():
            assert w.log_weight(site) == pytest.approx(lw, abs=1e-12)

    def test_budget_refusal_names_limit(self):
        with pytest.raises(BudgetError, match="reduce n to 23"):
            path_oracle(slab(1, 30), GAUSS, 1.0, 30)


class TestSupportAndParity:
    def test_sites_follow_parity(self):
        w = run_chain(slab(4, 9), GAUSS, 1.0, 9)
        assert w.sites() == list(range(-9, 10, 2))
        with pytest.raises(DomainError):
            w.log_weight(4)
        with pytest.raises(DomainError):
            w.log_weight(11)

    def test_horizon_guard(self):
        w = run_chain(slab(4, 3), GAUSS, 1.0, 3)
        with pytest.raises(DomainError):
            forward_step(w, slab(4, 3), GAUSS)

    def test_negative_beta_rejected(self):
        with pytest.raises(ParameterError):
            initial_weights(-0.5)


class TestLogDomainStability:
    def test_no_overflow_large_beta_long_chain(self):
        w = run_chain(slab(5, 10_000), GAUSS, 10.0, 10_000)
        assert np.isfinite(w.log_w).all()
        assert np.isfinite(partition_log(w))

    def test_beta_zero_long_chain_accumulation(self):
        _, logz = replica_scan(GAUSS, 0.0, 512, 4, 77, logz_at=[512])
        assert np.abs(logz[512]).max() <= 1e-12


class TestStepDistribution:
    def test_uniform_at_beta_zero(self):
        dist = step_distribution(initial_weights(0.0), slab(6, 2), GAUSS)
        assert dist == {-1: pytest.approx(0.5), 1: pytest.approx(0.5)}

    def test_normalization_many_slabs(self):
        gen = np.random.default_rng(3)
        for _ in range(100):
            s = slab(int(gen.integers(0, 2**63)), 7)
            w = run_chain(s, GAUSS, float(gen.uniform(0, 2.5)), 5)
            dist = step_distribution(w, s, GAUSS)
            assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n", [2, 6, 9])
    def test_matches_enumerated_law(self, n):
        s = slab(14, n + 1)
        beta = 1.4
        w = run_chain(s, GAUSS, beta, n)
        dist = step_distribution(w, s, GAUSS)
        res = path_oracle(s, GAUSS, beta, n + 1)
        logp = np.array([res.per_site[x] for x in sorted(res.per_site)])
        probs = np.exp(logp - res.log_partition)
        for x, p in zip(sorted(res.per_site), probs):
            assert dist[x] == pytest.approx(p, abs=1e-12)


class TestMartingaleNormalization:
    @pytest.mark.parametrize("beta", [0.5, 1.0])
    def test_mean_weight_is_one(self, beta):
        replicas = 30_000
        _, logz = replica_scan(GAUSS, beta, 16, replicas, 2024, logz_at=[4, 8, 16])
        for n in (4, 8, 16):
            w = np.exp(logz[n])
            se = w.std(ddof=1) / np.sqrt(replicas)
            assert abs(w.mean() - 1.0) <= 5 * se


class TestReplicaScanConsistency:
    def test_matches_single_slab_bit_exact(self):
        rows, logz = replica_scan(GAUSS, 1.3, 9, 6, 314, rows_at=[5, 9], logz_at=[9])
        for r in range(6):
            s = EnvironmentSlab(replica_slab_seed(314, r), horizon=9)
            w5 = run_chain(s, GAUSS, 1.3, 5)
            w9 = run_chain(s, GAUSS, 1.3, 9)
            assert np.array_equal(rows[5][r], w5.log_w)
            assert np.array_equal(rows[9][r], w9.log_w)
            assert logz[9][r] == partition_log(w9)

    def test_chunking_invariance(self):
        a = replica_scan(GAUSS, 0.8, 6, 7, 99, rows_at=[6])[0][6]
        b = replica_scan(GAUSS, 0.8, 6, 7, 99, rows_at=[6], chunk=3)[0][6]
        assert np.array_equal(a, b)

    def test_key_start_slices_same_stream(self):
        whole = replica_scan(GAUSS, 0.8, 4, 10, 5, rows_at=[4])[0][4]
        tail = replica_scan(GAUSS, 0.8, 4, 6, 5, rows_at=[4], key_start=4)[0][4]
        assert np.array_equal(whole[4:], tail)

    def test_collection_time_validated(self):
        with pytest.raises(ParameterError):
            replica_scan(GAUSS, 1.0, 4, 3, 1, rows_at=[5])


class TestInfluenceIdentity:
    def test_finite_difference_matches_step_law(self):
        # d ln W_n / d eta(j,x) = beta * P(path through (j,x)), in [0, beta]
        from polycasc.diagnostics import occupation_probabilities

        beta, n = 1.2, 8
        s = slab(17, n)
        probs = occupation_probabilities(s, GAUSS, beta, n)
        h = 1e-5
        gen = np.random.default_rng(1)
        for _ in range(10):
            j = int(gen.integers(1, n + 1))
            x = int(-j + 2 * gen.integers(0, j + 1))
            base = s.value(GAUSS, j, x)
            up = partition_log(run_chain(s.with_override(j, x, base + h), GAUSS, beta, n))
            dn = partition_log(run_chain(s.with_override(j, x, base - h), GAUSS, beta, n))
            fd = (up - dn) / (2 * h)
            exact = beta * probs[j][(x + j) // 2]
            assert abs(fd - exact) <= 1e-6
            assert -1e-12 <= exact <= beta
