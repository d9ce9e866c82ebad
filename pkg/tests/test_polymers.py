"""Polymer weights, Bessel coefficients, partitions and smallness bounds."""

import math

import numpy as np
import pytest
from scipy.special import iv

from latticehiggs.dec import PathChain, build_box
from latticehiggs.errors import GuardError
from latticehiggs.oracle import single_plaquette_complex
from latticehiggs.polymers import (
    BesselTable,
    PlaquettePolymer,
    TwistedPolymer,
    bessel_i,
    charge_moment,
    check_bessel_table,
    g1_contour_beta,
    g1_smallness,
    holder_bound_charge1,
    holder_bound_charged,
    holder_plaquette_factor,
    plaquette_partition,
    polymer_weight_charge1,
    polymer_weight_charged,
    random_connected_plaquettes,
    random_twisted_polymer,
    smallness_scan,
)


class TestBessel:
    def test_frozen_reference_values(self):
        # independently computed high-precision series values
        assert bessel_i(0, 1.0)[0] == pytest.approx(1.2660658777520084, abs=1e-12)
        assert bessel_i(1, 1.0)[0] == pytest.approx(0.5651591039924851, abs=1e-12)

    def test_at_zero(self):
        assert bessel_i(0, 0.0) == (1.0, 0.0)
        assert bessel_i(1, 0.0) == (0.0, 0.0)

    def test_against_scipy_grid(self):
        for nu in range(5):
            for x in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0):
                val, err = bessel_i(nu, x)
                assert val == pytest.approx(float(iv(nu, x)), rel=1e-13)
                assert err <= 1e-13 * val + 1e-15

    def test_recurrence(self):
        for nu in range(1, 6):
            for x in (0.3, 1.0, 2.5, 7.0):
                lhs = bessel_i(nu - 1, x)[0] - bessel_i(nu + 1, x)[0]
                rhs = 2 * nu / x * bessel_i(nu, x)[0]
                assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))

    def test_guard(self):
        with pytest.raises(GuardError):
            bessel_i(0, 60.0)

    def test_table_build_and_check(self):
        table = BesselTable.build(0.7, 6)
        check_bessel_table(table)
        assert table[0] >= table[1] >= table[2] >= 0

    def test_corrupted_table_detected(self):
        table = BesselTable(kappa=0.7, values=[1.0, 1.5, 0.1], accuracy=0.0)
        with pytest.raises(AssertionError, match="bessel-table-monotone"):
            check_bessel_table(table)


class TestChargeMoment:
    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("kappa", [0.1, 0.5, 1.0])
    def test_endpoint_identities(self, k, kappa):
        assert charge_moment(0, k, kappa) == pytest.approx(float(iv(0, 2 * kappa)), abs=1e-10)
        assert charge_moment(k, k, kappa) == pytest.approx(float(iv(1, 2 * kappa)), abs=1e-10)

    def test_intermediate_value_closed_form(self):
        # (1/pi) * int_{-pi/2}^{pi/2} cos(theta) dtheta = 2/pi at kappa = 0
        assert charge_moment(1, 2, 0.0) == pytest.approx(2.0 / math.pi, abs=1e-12)

    def test_divisible_moments_match_full_circle(self):
        for k, j in [(2, 2), (2, 4), (3, 3)]:
            assert charge_moment(j, k, 0.4) == pytest.approx(
                float(iv(j // k, 0.8)), abs=1e-10
            )


class TestPlaquettePartition:
    def test_checkerboard_in_2d(self):
        classes = plaquette_partition(build_box(2, 2))
        assert len(classes) == 2

    def test_single_plaquette(self):
        cx, _ = single_plaquette_complex()
        assert len(plaquette_partition(cx)) == 1

    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_classes_edge_disjoint_and_bounded(self, m):
        cx = build_box(m, 1)
        classes = plaquette_partition(cx)  # raises internally if classes overlap
        max_degree = 4 * (2 * (m - 1) - 1)
        assert len(classes) <= 1 + max_degree
        assert sum(len(c) for c in classes) == len(cx.plaquettes)


class TestPolymerWeightCharge1:
    def test_beta_zero_vanishes(self):
        cx, _ = single_plaquette_complex()
        poly = PlaquettePolymer(cx, (cx.plaquettes[0],))
        assert polymer_weight_charge1(poly, None, 1, 0.0, 0.3).value == 0.0

    def test_single_plaquette_sign_and_bound(self):
        cx, _ = single_plaquette_complex()
        poly = PlaquettePolymer(cx, (cx.plaquettes[0],))
        w = polymer_weight_charge1(poly, None, 1, 0.2, 0.3)
        assert w.method == "quadrature"
        assert w.value < 0  # integrand is nonpositive for an untouched polymer
        hb = holder_bound_charge1(0.2, 0.3, 6.0, 1, 0, 1)
        assert abs(w.value) <= hb.bound

    def test_quadrature_matches_monte_carlo(self):
        cx, _ = single_plaquette_complex()
        poly = PlaquettePolymer(cx, (cx.plaquettes[0],))
        gamma = PathChain.from_sites(cx, [(0, 0), (1, 0)])
        quad = polymer_weight_charge1(poly, gamma, 1, 0.2, 0.3)
        from latticehiggs.polymers import _polymer_integral
        from latticehiggs.dec import plaquette_boundary_cells

        edges = [(c.key, c.sign) for c in plaquette_boundary_cells(cx.plaquettes[0])]
        mc = _polymer_integral(
            [(edges, 0.0)], {((0, 0), (0,)): 1}, 1, 0.2, 0.3, 1,
            mc_samples=400_000, seed=4,
        )
        b0, _ = bessel_i(0, 0.6)
        b1, _ = bessel_i(1, 0.6)
        assert quad.value == pytest.approx(mc.value * b0 / b1, abs=4 * mc.error * b0 / b1)

    def test_touched_prefactor_applied_once(self):
        cx, _ = single_plaquette_complex()
        poly = PlaquettePolymer(cx, (cx.plaquettes[0],))
        gamma = PathChain.from_sites(cx, [(0, 0), (1, 0)])
        w_touched = polymer_weight_charge1(poly, gamma, 1, 0.25, 0.4)
        w_plain = polymer_weight_charge1(poly, None, 1, 0.25, 0.4)
        assert w_touched.value != pytest.approx(w_plain.value)

    def test_disconnected_rejected(self):
        cx = build_box(2, 2)
        with pytest.raises(ValueError, match="connected"):
            PlaquettePolymer(cx, (((0, 0), (0, 1)), ((-2, -2), (0, 1))))


class TestHolderCharge1:
    def test_zero_at_beta_zero(self):
        hb = holder_bound_charge1(0.0, 0.4, 6.0, 1, 2, 1)
        assert hb.bound == 0.0 and hb.proxy == 0.0

    def test_proxy_closed_form(self):
        kappa, beta = 0.3, 0.1
        hb = holder_bound_charge1(beta, kappa, 6.0, 1, 0, 1)
        b0, b1 = float(iv(0, 0.6)), float(iv(1, 0.6))
        assert hb.proxy == pytest.approx((b0 / b1) ** 4 * (1 - math.exp(-4 * beta)), rel=1e-10)

    def test_factor_below_one_and_monotone_in_beta(self):
        factors = [
            holder_plaquette_factor(b, 0.5, 6.0) for b in (0.05, 0.1, 0.2, 0.3, 0.4)
        ]
        assert all(0 < f < 1 for f in factors)
        assert factors == sorted(factors)

    def test_factor_decreasing_in_kappa(self):
        factors = [
            holder_plaquette_factor(0.3, k, 6.0) for k in (0.0, 0.3, 0.7, 1.2, 2.0)
        ]
        assert all(a > b for a, b in zip(factors, factors[1:]))


class TestPolymerWeightCharged:
    def test_k1_untwisted_reduces_to_charge1(self):
        cx, _ = single_plaquette_complex()
        tp = TwistedPolymer(cx, (cx.plaquettes[0],), (), 1)
        pp = PlaquettePolymer(cx, (cx.plaquettes[0],))
        a = polymer_weight_charged(tp, None, 1, 0.2, 0.3)
        b = polymer_weight_charge1(pp, None, 1, 0.2, 0.3)
        assert a.value == pytest.approx(b.value, abs=1e-10)

    def test_beta_zero_untwisted_vanishes(self):
        cx, _ = single_plaquette_complex()
        tp = TwistedPolymer(cx, (cx.plaquettes[0],), (), 2)
        assert polymer_weight_charged(tp, None, 2, 0.0, 0.3).value == 0.0

    def test_twisted_prefactor(self):
        cx, _ = single_plaquette_complex()
        beta = 0.25
        tp = TwistedPolymer(cx, (cx.plaquettes[0],), ((cx.edges[0], 1),), 2)
        assert tp.curl_support() == [cx.plaquettes[0]]
        w = polymer_weight_charged(tp, None, 1, beta, 0.3)
        hb = holder_bound_charged(tp, None, 1, beta, 0.3, 6.0)
        assert hb.prefactor == pytest.approx(math.exp(-4 * beta), rel=1e-12)
        assert abs(w.value) <= hb.bound + 1e-12

    def test_twist_residues_mod_k(self):
        cx, _ = single_plaquette_complex()
        tp = TwistedPolymer(cx, (cx.plaquettes[0],), ((cx.edges[0], 5),), 2)
        assert dict(tp.twist)[cx.edges[0]] == 1


class TestHolderDomination:
    """|phi| <= bound must hold exactly on random polymers; the test only
    allows three Monte Carlo sigmas of slack on the phi estimate itself."""

    def test_charge1_random_polymers(self):
        cx = build_box(3, 1)
        rng = np.random.default_rng(20)
        a_m = float(len(plaquette_partition(cx)))
        for trial in range(12):
            beta, kappa = rng.uniform(0.05, 0.5, 2)
            poly = random_connected_plaquettes(cx, int(rng.integers(1, 4)), rng)
            w = polymer_weight_charge1(
                poly, None, 1, beta, kappa, mc_samples=60_000, seed=trial
            )
            hb = holder_bound_charge1(beta, kappa, a_m, 1, 0, len(poly))
            assert abs(w.value) - 3 * w.error <= hb.bound

    def test_charged_random_polymers(self):
        cx = build_box(3, 1)
        rng = np.random.default_rng(21)
        a_m = float(len(plaquette_partition(cx)))
        for trial in range(10):
            beta, kappa = rng.uniform(0.05, 0.5, 2)
            k = int(rng.integers(2, 4))
            poly = random_twisted_polymer(cx, int(rng.integers(1, 3)), k, rng)
            w = polymer_weight_charged(
                poly, None, k, beta, kappa, mc_samples=60_000, seed=100 + trial
            )
            hb = holder_bound_charged(poly, None, k, beta, kappa, a_m)
            assert abs(w.value) - 3 * w.error <= hb.bound


class TestSmallnessScan:
    def test_beta_zero_row_vanishes(self):
        rep = smallness_scan([0.0], [0.0, 0.2, 0.5], 1, 1, m=4, a_m=6.0)
        for beta, kappa, g1, a_conf, holder in rep.rows:
            assert g1 == 0.0 and a_conf == 0.0 and holder == 0.0

    def test_g1_pointwise_closed_form(self):
        rep = smallness_scan([0.0, 0.2, 0.44], [0.0, 0.3], 2, 2, m=4, a_m=6.0)
        for beta, kappa, g1, _, _ in rep.rows:
            assert g1 == pytest.approx(math.expm1(beta) * math.exp(4 * kappa), abs=1e-12)
        assert g1_smallness(0.44, 0.0) == pytest.approx(0.5527, abs=1e-4)

    def test_holder_column_decreasing_in_kappa(self):
        kappas = [0.0, 0.4, 0.8, 1.5]
        rep = smallness_scan([0.3], kappas, 1, 1, m=4, a_m=6.0)
        holders = [row[4] for row in rep.rows]
        assert all(a > b for a, b in zip(holders, holders[1:]))

    def test_contour_crossing(self):
        from scipy.optimize import brentq

        beta_star = g1_contour_beta(1.0, 0.0)
        assert beta_star == pytest.approx(math.log(2.0), abs=1e-12)
        root = brentq(lambda b: g1_smallness(b, 0.0) - 1.0, 0.1, 2.0, xtol=1e-12)
        assert abs(root - math.log(2.0)) < 1e-9
