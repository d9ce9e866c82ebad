"""Sampler correctness, estimator statistics, and decay fits."""

import math

import numpy as np
import pytest
from scipy.special import iv

from latticehiggs.dec import Chain, DiffForm, PathChain, build_box, mf_geometry
from latticehiggs.errors import ConfigError, GuardError
from latticehiggs.gibbs import (
    ChainObservable,
    Estimate,
    GibbsSampler,
    LinkField,
    ModelParams,
    SamplerConfig,
    binned_estimate,
    bulk_edge,
    decay_fit,
    estimate_mf_ratio,
    estimate_wilson,
    ghs_product_bound,
    hamiltonian,
    jackknife_ratio,
    loop_placements,
    metropolis_sweep,
    mf_ratio_series,
    wilson_loop_scan,
)


@pytest.fixture(scope="module")
def box22():
    return build_box(2, 2)


class TestHamiltonian:
    def test_cold_configuration(self, box22):
        params = ModelParams(0.3, 0.4, 1, box22)
        expected = -2 * 0.3 * len(box22.plaquettes) - 2 * 0.4 * len(box22.edges)
        assert hamiltonian(LinkField(box22), params) == pytest.approx(expected)

    def test_charge_zero_matter_term_constant(self, box22):
        rng = np.random.default_rng(1)
        sigma = LinkField.random(box22, rng)
        p_gauge = ModelParams(0.3, 0.0, 0, box22)
        h_with = hamiltonian(sigma, ModelParams(0.3, 0.7, 0, box22))
        assert h_with == pytest.approx(hamiltonian(sigma, p_gauge) - 2 * 0.7 * len(box22.edges))

    def test_against_per_cell_summation(self):
        cx = build_box(2, 1)
        rng = np.random.default_rng(3)
        sigma = LinkField.random(cx, rng)
        params = ModelParams(0.3, 0.4, 2, cx)
        form = DiffForm(1, dict(zip(cx.edges, sigma.values)))
        d = cx.exterior_derivative(form)
        direct = -2 * 0.3 * sum(math.cos(d[p]) for p in cx.plaquettes)
        direct += -2 * 0.4 * sum(math.cos(2 * form[e]) for e in cx.edges)
        assert hamiltonian(sigma, params) == pytest.approx(direct, abs=1e-12)


class TestSweep:
    def test_flat_density_accepts_everything(self, box22):
        params = ModelParams(0.0, 0.0, 1, box22)
        s = GibbsSampler(params, SamplerConfig(sweeps=10, burn_in=2, seed=5))
        for _ in range(5):
            s.sweep()
        assert s.acceptance_rate() == 1.0

    def test_flat_density_angles_uniform(self, box22):
        params = ModelParams(0.0, 0.0, 1, box22)
        s = GibbsSampler(
            params,
            SamplerConfig(sweeps=10, burn_in=2, seed=5, proposal_width=math.pi),
        )
        for _ in range(20):
            s.sweep()
        # time-averaged circular moments vanish for the uniform stationary law
        m1 = m2 = 0.0
        n = 200
        for _ in range(n):
            s.sweep()
            m1 += np.mean(np.exp(1j * s.sigma))
            m2 += np.mean(np.exp(2j * s.sigma))
        assert abs(m1 / n) < 0.05
        assert abs(m2 / n) < 0.05

    def test_local_delta_matches_global(self, box22):
        params = ModelParams(0.5, 0.3, 2, box22)
        s = GibbsSampler(params, SamplerConfig(sweeps=10, burn_in=2, seed=9))
        for _ in range(5):
            s.sweep()
        rng = np.random.default_rng(11)
        for _ in range(25):
            e = int(rng.integers(len(box22.edges)))
            new = float(rng.uniform(-math.pi, math.pi))
            d = s.local_energy_delta(e, new)
            h1 = hamiltonian(s.field(), params)
            v = s.sigma.copy()
            v[e] = new
            h2 = hamiltonian(LinkField(box22, v), params)
            assert d == pytest.approx(h2 - h1, abs=1e-10)

    def test_detailed_balance_identity(self, box22):
        params = ModelParams(0.4, 0.6, 1, box22)
        s = GibbsSampler(params, SamplerConfig(sweeps=10, burn_in=2, seed=13))
        for _ in range(4):
            s.sweep()
        rng = np.random.default_rng(17)
        for _ in range(20):
            e = int(rng.integers(len(box22.edges)))
            new = float(rng.uniform(-math.pi, math.pi))
            d = s.local_energy_delta(e, new)
            h1 = hamiltonian(s.field(), params)
            v = s.sigma.copy()
            v[e] = new
            h2 = hamiltonian(LinkField(box22, v), params)
            lhs = -h1 + min(0.0, -d)
            rhs = -h2 + min(0.0, d)
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_fixed_seed_bit_identical(self, box22):
        params = ModelParams(0.3, 0.4, 1, box22)
        cfg = SamplerConfig(sweeps=30, burn_in=5, seed=77)
        runs = []
        for _ in range(2):
            s = GibbsSampler(params, cfg)
            for _ in range(20):
                s.sweep()
            runs.append(s.sigma.copy())
        assert np.array_equal(runs[0], runs[1])

    def test_functional_sweep_wrapper(self, box22):
        params = ModelParams(0.2, 0.3, 1, box22)
        cfg = SamplerConfig(sweeps=5, burn_in=1, seed=3)
        sigma = LinkField(box22)
        out1 = metropolis_sweep(sigma, params, cfg, np.random.default_rng(4))
        out2 = metropolis_sweep(sigma, params, cfg, np.random.default_rng(4))
        assert np.array_equal(out1.values, out2.values)
        assert not np.array_equal(out1.values, sigma.values)

    def test_width_tuning_targets_window(self, box22):
        params = ModelParams(1.5, 1.0, 1, box22)
        cfg = SamplerConfig(sweeps=400, burn_in=300, seed=21, proposal_width=math.pi)
        s = GibbsSampler(params, cfg)
        s.run(lambda sigma: 0.0)
        assert 0.25 <= s.acceptance_rate() <= 0.75


class TestEstimators:
    def test_binned_estimate_plain_sem_for_iid(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=4096)
        est = binned_estimate(x, 16)
        naive = x.std(ddof=1) / math.sqrt(len(x))
        assert est.stderr == pytest.approx(naive, rel=0.5)

    def test_insufficient_samples_rejected(self):
        with pytest.raises(ConfigError):
            binned_estimate(np.arange(5.0), 16)

    def test_jackknife_matches_propagation_when_uncorrelated(self):
        rng = np.random.default_rng(6)
        w1 = 0.5 + 0.01 * rng.normal(size=2048)
        w2 = 0.5 + 0.01 * rng.normal(size=2048)
        den = 0.25 + 0.01 * rng.normal(size=2048)
        val, err = jackknife_ratio(w1, w2, den, 16)
        assert val == pytest.approx(1.0, abs=0.02)
        assert 0 < err < 0.05

    def test_merge_independent_chains(self, box22):
        from latticehiggs.gibbs import merge_estimates

        params = ModelParams(0.0, 0.5, 1, box22)
        chains = [
            estimate_wilson(
                Chain(1, {((0, 0), (0,)): 1}), 1, params,
                SamplerConfig(sweeps=1500, burn_in=200, seed=s, bins=16),
            )
            for s in (31, 32, 33)
        ]
        merged = merge_estimates(chains)
        assert merged.stderr < min(c.stderr for c in chains)
        ref = float(iv(1, 1.0) / iv(0, 1.0))
        assert abs(merged.mean - ref) <= 4 * merged.stderr
        assert merged.n_samples == sum(c.n_samples for c in chains)

    def test_wilson_single_edge_beta_zero(self, box22):
        params = ModelParams(0.0, 0.5, 1, box22)
        cfg = SamplerConfig(sweeps=4000, burn_in=400, seed=7, bins=32)
        est = estimate_wilson(Chain(1, {((0, 0), (0,)): 1}), 1, params, cfg)
        ref = float(iv(1, 1.0) / iv(0, 1.0))
        assert abs(est.mean - ref) <= 3 * est.stderr
        assert abs(est.imag_mean) <= 4 * est.imag_stderr + 1e-12

    def test_open_path_pure_gauge_vanishes(self, box22):
        params = ModelParams(0.5, 0.0, 0, box22)
        cfg = SamplerConfig(sweeps=3000, burn_in=300, seed=8, bins=32)
        path = PathChain.from_sites(box22, [(0, 0), (1, 0), (1, 1)])
        est = estimate_wilson(path, 1, params, cfg)
        assert abs(est.mean) <= 4 * est.stderr

    def test_open_path_nondivisible_charge_vanishes(self, box22):
        params = ModelParams(0.4, 0.5, 2, box22)
        cfg = SamplerConfig(sweeps=3000, burn_in=300, seed=9, bins=32)
        path = PathChain.from_sites(box22, [(0, 0), (1, 0)])
        est = estimate_wilson(path, 1, params, cfg)
        assert abs(est.mean) <= 4 * est.stderr


class TestMFRatio:
    def test_beta_zero_ratio_one(self):
        cx = build_box(2, 3)
        params = ModelParams(0.0, 1.5, 1, cx)
        cfg = SamplerConfig(sweeps=4000, burn_in=300, seed=10, bins=32)
        r = estimate_mf_ratio(1, 1, 1, 1, params, cfg)
        assert r.status == "ok"
        assert abs(r.ratio - 1.0) <= 3 * r.stderr

    def test_nondivisible_charge_flagged(self):
        cx = build_box(2, 3)
        params = ModelParams(0.3, 0.4, 2, cx)
        cfg = SamplerConfig(sweeps=600, burn_in=100, seed=11, bins=16)
        r = estimate_mf_ratio(1, 1, 1, 1, params, cfg)
        assert r.status == "zero-numerator"
        assert math.isnan(r.ratio)
        assert abs(r.numerator_1.mean) <= 4 * r.numerator_1.stderr

    def test_undefined_when_denominator_noise(self):
        cx = build_box(2, 3)
        params = ModelParams(0.0, 0.05, 1, cx)  # tiny kappa: W_loop ~ 1e-8
        cfg = SamplerConfig(sweeps=500, burn_in=100, seed=12, bins=16)
        r = estimate_mf_ratio(1, 2, 2, 1, params, cfg)
        assert r.status == "undefined-ratio"
        assert math.isnan(r.ratio)

    def test_matches_current_expansion_on_minimal_complex(self):
        # two independent routes to the same ratio on the smallest complex
        # holding the n = 1 geometry; the truncated expansion's remaining
        # drift is estimated by budget doubling
        from latticehiggs.currents import charged_interactions, partition_sum
        from latticehiggs.dec import Complex

        cx = Complex.from_cells(2, plaquettes={((0, -1), (0, 1)), ((0, 0), (0, 1))})
        beta, kappa = 0.2, 0.6
        gamma, gamma_p = mf_geometry(cx, 1, 1, 1)
        loop = gamma + gamma_p
        inter = charged_interactions(cx, beta, kappa, 1)

        def truncated_ratio(budget):
            num = [
                partition_sum(inter, c, 1, budget, enum_limit=8192).value
                for c in (gamma, gamma_p, loop)
            ]
            den = partition_sum(inter, None, 0, budget, enum_limit=8192).value
            return num[0] * num[1] / (num[2] * den)

        r10, r12 = truncated_ratio(10), truncated_ratio(12)
        params = ModelParams(beta, kappa, 1, cx)
        cfg = SamplerConfig(sweeps=25000, burn_in=1000, seed=77, bins=64)
        mc = estimate_mf_ratio(1, 1, 1, 1, params, cfg)
        assert mc.status == "ok"
        assert abs(mc.ratio - r12) <= 3 * mc.stderr + 10 * abs(r12 - r10)

    def test_series_matches_single_run(self):
        # the measurement channels draw no randomness, so one shared chain
        # reproduces the single-geometry estimate bit for bit
        cx = build_box(2, 3)
        params = ModelParams(0.0, 1.5, 1, cx)
        cfg = SamplerConfig(sweeps=2000, burn_in=200, seed=13, bins=16)
        series = mf_ratio_series(1, 1, [1, 2], 1, params, cfg)
        assert [r.n for r in series] == [1, 2]
        single = estimate_mf_ratio(1, 1, 1, 1, params, cfg)
        assert series[0].denominator.mean == single.denominator.mean
        assert series[0].ratio == single.ratio


class TestGHSBound:
    def test_single_edge_equals_estimate(self, box22):
        params = ModelParams(0.0, 0.6, 1, box22)
        cfg = SamplerConfig(sweeps=2000, burn_in=200, seed=14, bins=16)
        edge_key = bulk_edge(box22)
        bound = ghs_product_bound(Chain(1, {edge_key: 1}), 1, params, cfg)
        single = estimate_wilson(Chain(1, {edge_key: 1}), 1, params, cfg)
        assert bound.mean == pytest.approx(single.mean)

    def test_beta_zero_closed_form(self, box22):
        params = ModelParams(0.0, 0.6, 1, box22)
        cfg = SamplerConfig(sweeps=6000, burn_in=400, seed=15, bins=32)
        path = PathChain.from_sites(box22, [(0, 0), (1, 0), (1, 1)])
        bound = ghs_product_bound(path, 1, params, cfg)
        ref = float(iv(1, 1.2) / iv(0, 1.2)) ** 2
        assert abs(bound.mean - ref) <= 4 * bound.stderr

    def test_lower_bounds_loop_estimate(self):
        cx = build_box(3, 2)
        params = ModelParams(0.5, 0.5, 1, cx)
        cfg = SamplerConfig(sweeps=3000, burn_in=400, seed=16, bins=32)
        loop_chain = PathChain.from_sites(
            cx, [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (0, 0, 0)]
        )
        bound = ghs_product_bound(loop_chain, 1, params, cfg)
        direct = estimate_wilson(loop_chain, 1, params, cfg)
        slack = 4 * (bound.stderr + direct.stderr)
        assert bound.mean <= direct.mean + slack

    def test_rejects_nondivisible(self, box22):
        params = ModelParams(0.3, 0.4, 2, box22)
        cfg = SamplerConfig(sweeps=200, burn_in=50, seed=17, bins=16)
        with pytest.raises(ConfigError):
            ghs_product_bound(Chain(1, {box22.edges[0]: 1}), 1, params, cfg)


class TestDecayFit:
    LOOPS = [(4, 1), (6, 2), (8, 3), (8, 4), (10, 6), (12, 9)]

    def _estimates(self, values):
        return [Estimate(v, max(1e-6, 0.005 * v), 1000) for v in values]

    def test_pure_perimeter_round_trip(self):
        values = [math.exp(-0.3 * p) for p, _ in self.LOOPS]
        fit = decay_fit(self.LOOPS, self._estimates(values))
        assert fit.perimeter_coefficient == pytest.approx(0.3, abs=1e-6)
        assert fit.area_coefficient == pytest.approx(0.0, abs=1e-6)

    def test_pure_area_round_trip(self):
        values = [math.exp(-0.2 * a) for _, a in self.LOOPS]
        fit = decay_fit(self.LOOPS, self._estimates(values))
        assert fit.area_coefficient == pytest.approx(0.2, abs=1e-6)
        assert fit.perimeter_coefficient == pytest.approx(0.0, abs=1e-6)

    def test_zero_consistent_loop_excluded(self):
        values = [math.exp(-0.3 * p) for p, _ in self.LOOPS]
        ests = self._estimates(values)
        ests[-1] = Estimate(1e-7, 1e-4, 1000)  # consistent with zero
        fit = decay_fit(self.LOOPS, ests)
        assert fit.excluded and fit.excluded[0][0] == len(self.LOOPS) - 1
        assert fit.perimeter_coefficient == pytest.approx(0.3, abs=1e-5)

    def test_too_few_loops_rejected(self):
        with pytest.raises(ConfigError):
            decay_fit(self.LOOPS[:3], self._estimates([0.1, 0.05, 0.02]))


class TestLoopPlacements:
    def test_counts_and_signs(self):
        cx = build_box(2, 3)
        idx, sgn = loop_placements(cx, (1, 1), margin=1)
        assert idx.shape[1] == 4
        assert set(np.unique(sgn)) == {-1.0, 1.0}

    def test_all_placements_are_loops(self):
        cx = build_box(3, 2)
        idx, sgn = loop_placements(cx, (2, 1), margin=0)
        # boundary of each placement's chain must vanish
        for row_idx, row_sgn in zip(idx[:10], sgn[:10]):
            chain = Chain(1, {})
            for e, s in zip(row_idx, row_sgn):
                chain = chain + Chain(1, {cx.edges[e]: int(s)})
            assert not cx.boundary(chain)

    def test_margin_too_large_guarded(self):
        cx = build_box(2, 2)
        with pytest.raises(GuardError):
            loop_placements(cx, (1, 3), margin=1)

    def test_scan_returns_all_requested(self):
        cx = build_box(2, 3)
        params = ModelParams(0.0, 1.0, 1, cx)
        cfg = SamplerConfig(sweeps=300, burn_in=50, seed=18, bins=16)
        out = wilson_loop_scan(params, cfg, [(1, 1), (1, 2)], [1, 2], margin=1)
        assert set(out) == {((1, 1), 1), ((1, 1), 2), ((1, 2), 1), ((1, 2), 2)}
