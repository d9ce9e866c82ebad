"""Tensor-quadrature oracle: exactness, symmetries, cross-validation plumbing."""

import numpy as np
import pytest
from scipy.special import iv

from latticehiggs.currents import expectation_via_currents
from latticehiggs.dec import Chain, Complex
from latticehiggs.errors import ConfigError, GuardError
from latticehiggs.oracle import (
    OracleInstance,
    cross_validate,
    default_suite,
    oracle_expectation,
    plaquette_pendant_complex,
    quadrature_partition,
    single_edge_complex,
    single_plaquette_complex,
)
from latticehiggs.polymers import charge_moment


class TestQuadraturePartition:
    def test_normalization(self):
        cx, gamma = single_edge_complex()
        inst = OracleInstance(cx, None, 0, 1, 0.0, 0.0, 64, "edge")
        value, err = quadrature_partition(inst)
        assert value == pytest.approx(1.0, abs=1e-13)

    def test_single_edge_bessel(self):
        cx, gamma = single_edge_complex()
        inst = OracleInstance(cx, gamma, 1, 1, 0.0, 0.5, 64, "edge")
        value, err = quadrature_partition(inst)
        assert value == pytest.approx(float(iv(1, 1.0)), abs=1e-12)

    def test_plaquette_ratio(self):
        cx, loop = single_plaquette_complex()
        inst = OracleInstance(cx, loop, 1, 1, 0.4, 0.0, 64, "plaquette")
        val, err = oracle_expectation(inst)
        assert val == pytest.approx(float(iv(1, 0.8) / iv(0, 0.8)), abs=1e-10)

    def test_guard_on_link_count(self):
        edges = {((i, 0), (0,)) for i in range(6)}
        cx = Complex.from_cells(2, edges=edges)
        with pytest.raises(GuardError):
            OracleInstance(cx, None, 0, 1, 0.1, 0.1, 64, "six")

    def test_node_count_validated(self):
        cx, gamma = single_edge_complex()
        with pytest.raises(ConfigError):
            OracleInstance(cx, gamma, 1, 1, 0.1, 0.1, 48, "edge")

    def test_permutation_invariance(self):
        cx, path = plaquette_pendant_complex()
        inst = OracleInstance(cx, path, 1, 1, 0.3, 0.2, 64, "pendant")
        base, _ = quadrature_partition(inst)
        rng = np.random.default_rng(2)
        for _ in range(4):
            order = [int(x) for x in rng.permutation(len(cx.edges))]
            val, _ = quadrature_partition(inst, edge_order=order)
            assert val == pytest.approx(base, abs=1e-12 * max(1.0, abs(base)))

    def test_rejects_non_permutation_order(self):
        cx, gamma = single_edge_complex()
        inst = OracleInstance(cx, gamma, 1, 1, 0.1, 0.1, 64, "edge")
        with pytest.raises(ConfigError):
            quadrature_partition(inst, edge_order=[0, 0])


class TestOracleExpectation:
    def test_open_path_nondivisible_zero(self):
        cx, gamma = single_edge_complex()
        inst = OracleInstance(cx, gamma, 1, 2, 0.1, 0.5, 64, "edge")
        val, err = oracle_expectation(inst)
        assert abs(val) < 1e-10

    def test_doubled_charge_moment(self):
        cx, gamma = single_edge_complex()
        inst = OracleInstance(cx, gamma, 2, 2, 0.0, 0.5, 64, "edge")
        val, err = oracle_expectation(inst)
        assert val == pytest.approx(float(iv(1, 1.0) / iv(0, 1.0)), abs=1e-10)

    def test_gamma_reversal_invariance(self):
        cx, loop = single_plaquette_complex()
        inst = OracleInstance(cx, loop, 1, 1, 0.3, 0.2, 64, "plaquette")
        rev = OracleInstance(
            cx, Chain(1, {k: -c for k, c in loop.coeffs.items()}),
            1, 1, 0.3, 0.2, 64, "plaquette",
        )
        assert oracle_expectation(inst)[0] == pytest.approx(
            oracle_expectation(rev)[0], abs=1e-11
        )

    def test_beta_zero_factorizes_to_charge_moments(self):
        cx, path = plaquette_pendant_complex()
        for k, j in [(1, 1), (2, 2), (2, 4)]:
            inst = OracleInstance(cx, path, j, k, 0.0, 0.4, 64, "pendant")
            val, err = oracle_expectation(inst)
            per_edge = charge_moment(j, k, 0.4) / charge_moment(0, k, 0.4)
            assert val == pytest.approx(per_edge**2, abs=1e-9)

    def test_two_integrators_agree(self):
        cx, path = plaquette_pendant_complex()
        inst = OracleInstance(cx, path, 1, 1, 0.3, 0.2, 64, "pendant")
        gl, e1 = oracle_expectation(inst, "legendre")
        tr, e2 = oracle_expectation(inst, "trapezoid")
        assert abs(gl - tr) <= e1 + e2 + 1e-9

    def test_matches_currents_on_plaquette(self):
        cx, loop = single_plaquette_complex()
        for k in (1, 2):
            inst = OracleInstance(cx, loop, 1, k, 0.3, 0.2, 64, "plaquette")
            val, err = oracle_expectation(inst)
            route = expectation_via_currents(cx, loop, 1, k, 0.3, 0.2, budget=12)
            assert route.lo - err - 1e-12 <= val <= route.hi + err + 1e-12


class TestCrossValidate:
    def test_small_grid_passes(self):
        instances = [
            i for i in default_suite(betas=(0.0, 0.1), kappas=(0.1,), charges=(1, 2))
            if i.name == "edge"
        ]
        report = cross_validate(instances, budget=10)
        assert report.all_pass
        assert any(r.method_b == "quad-trapezoid" for r in report.rows)

    def test_underbudget_interval_widens_but_passes(self):
        cx, loop = single_plaquette_complex()
        inst = OracleInstance(cx, loop, 1, 1, 0.3, 0.3, 64, "plaquette")
        report = cross_validate([inst], budget=1, compare_integrators=False)
        row = report.rows[0]
        assert row.passed
        assert row.tolerance > 0.1  # honest tail: interval is wide, not wrong

    def test_mismatched_mc_params_rejected(self):
        cx, gamma = single_edge_complex()
        inst = OracleInstance(cx, gamma, 1, 1, 0.0, 0.5, 64, "edge")
        mc = {inst.instance_id: ({"kappa": 0.7}, 0.44, 0.01)}
        with pytest.raises(ConfigError, match="kappa"):
            cross_validate([inst], compare_integrators=False, mc_results=mc)

    def test_mc_rows_compared(self):
        cx, gamma = single_edge_complex()
        inst = OracleInstance(cx, gamma, 1, 1, 0.0, 0.5, 64, "edge")
        ref = float(iv(1, 1.0) / iv(0, 1.0))
        mc = {inst.instance_id: ({"kappa": 0.5, "k": 1, "j": 1}, ref + 0.005, 0.01)}
        report = cross_validate([inst], compare_integrators=False, mc_results=mc)
        mc_rows = [r for r in report.rows if r.method_b == "monte-carlo"]
        assert len(mc_rows) == 1 and mc_rows[0].passed

    def test_csv_schema(self, tmp_path):
        cx, gamma = single_edge_complex()
        inst = OracleInstance(cx, gamma, 1, 1, 0.0, 0.3, 64, "edge")
        report = cross_validate([inst], compare_integrators=False)
        out = tmp_path / "report.csv"
        report.write_csv(out)
        header = out.read_text().splitlines()[0]
        assert header == "instance_id,method_a,method_b,value_a,value_b,tolerance,pass"
