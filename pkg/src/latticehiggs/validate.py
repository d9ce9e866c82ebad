"""Named invariant checks behind the ``validate`` subcommand.

Each check is a small self-contained assertion bundle; the CLI prints one
line per check and exits nonzero if any fails.  The quick subset trims the
sampling-heavy checks to run in well under a minute.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import currents, dec, gibbs, oracle, polymers


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _dec_boundary_squared():
    rng = np.random.default_rng(101)
    for m in (2, 3, 4):
        cx = dec.build_box(m, 1)
        for _ in range(40):
            cells = cx.plaquettes
            c = dec.Chain(2, {cells[i]: int(rng.integers(-3, 4))
                              for i in rng.integers(0, len(cells), 5)})
            assert not cx.boundary(cx.boundary(c)), "boundary of boundary nonzero"


def _dec_adjointness():
    rng = np.random.default_rng(102)
    for m in (2, 3, 4):
        cx = dec.build_box(m, 1)
        for _ in range(40):
            a = dec.Chain(2, {cx.plaquettes[i]: int(rng.integers(-3, 4))
                              for i in rng.integers(0, len(cx.plaquettes), 4)})
            b = dec.Chain(1, {cx.edges[i]: int(rng.integers(-3, 4))
                              for i in rng.integers(0, len(cx.edges), 4)})
            assert cx.boundary(a).pairing(b) == a.pairing(cx.coboundary(b))


def _dec_dd_mod_2pi():
    rng = np.random.default_rng(103)
    cx = dec.build_box(3, 1)
    for _ in range(25):
        phi = dec.DiffForm(0, {k: rng.uniform(-math.pi, math.pi) for k in cx.cells(0)})
        dd = cx.exterior_derivative(cx.exterior_derivative(phi))
        assert all(abs(dec.wrap_angle(v)) < 1e-12 for v in dd.values.values())


def _dec_cell_counts():
    for m in (2, 3, 4):
        for N in (1, 2, 3):
            cx = dec.build_box(m, N)
            nv, ne, npl = dec.box_cell_counts(m, N)
            assert (len(cx.vertices), len(cx.edges), len(cx.plaquettes)) == (nv, ne, npl)


def _dec_mf_geometry():
    cx = dec.build_box(2, 3)
    for R, T, n in [(1, 1, 1), (1, 2, 1), (1, 1, 3)]:
        g, gp = dec.mf_geometry(cx, R, T, n)
        assert cx.boundary(g) == -cx.boundary(gp)
        assert not cx.boundary(g + gp)
        assert g.length == 2 * R * n + T * n


def _currents_enumeration_complete():
    cx, loop = oracle.single_plaquette_complex()
    inter = currents.charged_interactions(cx, 0.3, 0.4, 1)
    pruned = sorted(tuple(c.occ) for c in currents.enumerate_currents(inter, None, 0, 2))
    brute = sorted(tuple(c.occ) for c in currents.brute_force_currents(inter, None, 0, 2))
    assert pruned == brute and len(pruned) == 6


def _currents_witness_residuals():
    cx, loop = oracle.single_plaquette_complex()
    gamma = dec.PathChain.from_sites(cx, [(0, 0), (1, 0), (1, 1)])
    for k, j in [(1, 1), (2, 2), (2, 4)]:
        inter = currents.charged_interactions(cx, 0.3, 0.4, k)
        wit = currents.line_witness(inter, gamma, j)
        assert currents.is_valid(wit, j * gamma) and wit.weight() > 0
        swit = currents.surface_witness(inter, loop, j)
        assert currents.is_valid(swit, j * loop) and swit.weight() > 0


def _currents_partition_monotone():
    cx, loop = oracle.single_plaquette_complex()
    inter = currents.charged_interactions(cx, 0.2, 0.3, 1)
    prev = None
    for m in (2, 4, 6, 8):
        ps = currents.partition_sum(inter, loop, 1, m)
        if prev is not None:
            assert ps.value >= prev.value
            assert ps.value + ps.tail_bound <= prev.value + prev.tail_bound + 1e-15
        prev = ps


def _currents_bessel_identity():
    from scipy.special import iv

    cx, gamma = oracle.single_edge_complex()
    kappa = 0.5
    inter = currents.charged_interactions(cx, 0.0, kappa, 1)
    num = currents.partition_sum(inter, gamma, 1, 12)
    den = currents.partition_sum(inter, None, 0, 12)
    assert abs(num.value / den.value - iv(1, 1.0) / iv(0, 1.0)) < 1e-8


def _currents_certificate():
    cx, gamma = oracle.single_edge_complex()
    r = currents.expectation_via_currents(cx, gamma, 1, 2, 0.3, 0.4, 8)
    assert r.exact_zero and r.lo == r.hi == 0.0
    assert not list(
        currents.enumerate_currents(
            currents.charged_interactions(cx, 0.3, 0.4, 2), gamma, 1, 8
        )
    )


def _oracle_currents_agreement(quick: bool):
    if quick:
        instances = oracle.default_suite(betas=(0.0, 0.3), kappas=(0.3,), charges=(1, 2))
        instances = [i for i in instances if i.name != "plaquette-pendant"]
    else:
        instances = None
    report = oracle.cross_validate(instances, compare_integrators=False)
    bad = report.failures
    assert not bad, f"{len(bad)} oracle/current disagreements, first: {bad[0]}"


def _oracle_two_integrators(quick: bool):
    names = ("edge", "plaquette") if quick else ("edge", "plaquette", "plaquette-pendant")
    for name in names:
        cx, gamma = oracle.TINY_COMPLEXES[name]()
        inst = oracle.OracleInstance(cx, gamma, 1, 1, 0.25, 0.35, 64, name)
        gl, e1 = oracle.oracle_expectation(inst, "legendre")
        tr, e2 = oracle.oracle_expectation(inst, "trapezoid")
        assert abs(gl - tr) <= e1 + e2 + 1e-9


def _oracle_symmetries():
    cx, gamma = oracle.single_plaquette_complex()
    inst = oracle.OracleInstance(cx, gamma, 1, 1, 0.3, 0.2, 64, "plaquette")
    base, _ = oracle.quadrature_partition(inst)
    rng = np.random.default_rng(5)
    for _ in range(4):
        order = list(rng.permutation(len(cx.edges)))
        v, _ = oracle.quadrature_partition(inst, edge_order=order)
        assert abs(v - base) < 1e-12 * max(1.0, abs(base))
    neg = oracle.OracleInstance(
        cx, dec.Chain(1, {k: -c for k, c in gamma.coeffs.items()}),
        1, 1, 0.3, 0.2, 64, "plaquette-neg",
    )
    vneg, _ = oracle.quadrature_partition(neg)
    assert abs(vneg - base) < 1e-11


def _polymers_bessel():
    from scipy.special import iv

    for nu in range(4):
        for x in (0.2, 1.0, 3.0):
            val, err = polymers.bessel_i(nu, x)
            assert abs(val - float(iv(nu, x))) <= 1e-12 * max(1.0, val) + err
    for nu in (1, 2, 3):
        for x in (0.5, 2.0):
            lhs = polymers.bessel_i(nu - 1, x)[0] - polymers.bessel_i(nu + 1, x)[0]
            assert abs(lhs - 2 * nu / x * polymers.bessel_i(nu, x)[0]) < 1e-12


def _polymers_bessel_table():
    table = polymers.BesselTable.build(0.8, 8)
    polymers.check_bessel_table(table)


def _polymers_charge_moment():
    from scipy.special import iv

    for k in (1, 2, 3):
        for kappa in (0.1, 0.5, 1.0):
            assert abs(polymers.charge_moment(0, k, kappa) - iv(0, 2 * kappa)) < 1e-10
            assert abs(polymers.charge_moment(k, k, kappa) - iv(1, 2 * kappa)) < 1e-10


def _polymers_partition_disjoint():
    for m in (2, 3, 4):
        polymers.plaquette_partition(dec.build_box(m, 1))  # raises if not disjoint


def _polymers_holder_dominates(quick: bool):
    cx = dec.build_box(3, 1)
    rng = np.random.default_rng(55)
    a_m = float(len(polymers.plaquette_partition(cx)))
    trials = 4 if quick else 12
    for t in range(trials):
        beta, kappa = rng.uniform(0.05, 0.5, 2)
        poly = polymers.random_connected_plaquettes(cx, int(rng.integers(1, 4)), rng)
        w = polymers.polymer_weight_charge1(
            poly, None, 1, beta, kappa, mc_samples=40_000, seed=t
        )
        hb = polymers.holder_bound_charge1(beta, kappa, a_m, 1, 0, len(poly))
        assert abs(w.value) - 3 * w.error <= hb.bound


def _polymers_kk_reduction():
    cx, _ = oracle.single_plaquette_complex()
    tp = polymers.TwistedPolymer(cx, (cx.plaquettes[0],), (), 1)
    pp = polymers.PlaquettePolymer(cx, (cx.plaquettes[0],))
    a = polymers.polymer_weight_charged(tp, None, 1, 0.2, 0.3)
    b = polymers.polymer_weight_charge1(pp, None, 1, 0.2, 0.3)
    assert abs(a.value - b.value) < 1e-10


def _confinement_formula():
    rng = np.random.default_rng(77)
    for _ in range(50):
        beta, kappa = rng.uniform(0, 0.01), rng.uniform(0, 0.5)
        k = int(rng.integers(1, 4))
        j = k * int(rng.integers(1, 3))
        R, T, n = (int(x) for x in rng.integers(1, 5, 3))
        m = int(rng.integers(2, 6))
        rep = currents.confinement_lower_bound(beta, kappa, j, k, R, T, n, m)
        a = (1 + 16 * (m - 1)) ** 2 * (math.exp(j * beta / k) - 1.0) * math.exp(4 * kappa)
        assert abs(rep.a - a) < 1e-12 * max(1.0, a)
        if a < 1:
            ref = 1 - 2 * a / (1 - a) ** 2 - (T * n) * a ** (R * n) / (1 - a)
            assert rep.valid and abs(rep.lower_bound - ref) < 1e-12
        else:
            assert not rep.valid
    assert not currents.confinement_lower_bound(2.0, 1.0, 1, 1, 1, 1, 2, 4).valid


def _scan_g1():
    rep = polymers.smallness_scan([0.0, 0.2, 0.44], [0.0, 0.25], 1, 1, m=4, a_m=6.0)
    for beta, kappa, g1, _, _ in rep.rows:
        assert abs(g1 - (math.expm1(beta) * math.exp(4 * kappa))) < 1e-12
    assert abs(polymers.g1_contour_beta(1.0, 0.0) - math.log(2.0)) < 1e-12


def _gibbs_local_energy():
    cx = dec.build_box(2, 2)
    params = gibbs.ModelParams(0.4, 0.3, 2, cx)
    cfg = gibbs.SamplerConfig(sweeps=12, burn_in=4, seed=9)
    s = gibbs.GibbsSampler(params, cfg)
    for _ in range(6):
        s.sweep()
    rng = np.random.default_rng(13)
    for _ in range(15):
        e = int(rng.integers(len(cx.edges)))
        new = float(rng.uniform(-math.pi, math.pi))
        d_local = s.local_energy_delta(e, new)
        before = gibbs.hamiltonian(s.field(), params)
        v = s.sigma.copy()
        v[e] = new
        after = gibbs.hamiltonian(gibbs.LinkField(cx, v), params)
        assert abs((after - before) - d_local) < 1e-10


def _gibbs_detailed_balance():
    # pi(s) P(s -> s') = pi(s') P(s' -> s) in log space for the implemented rule
    cx = dec.build_box(2, 1)
    params = gibbs.ModelParams(0.5, 0.4, 1, cx)
    cfg = gibbs.SamplerConfig(sweeps=10, burn_in=2, seed=3)
    s = gibbs.GibbsSampler(params, cfg)
    for _ in range(4):
        s.sweep()
    rng = np.random.default_rng(31)
    for _ in range(20):
        e = int(rng.integers(len(cx.edges)))
        new = float(rng.uniform(-math.pi, math.pi))
        d = s.local_energy_delta(e, new)
        h1 = gibbs.hamiltonian(s.field(), params)
        v = s.sigma.copy()
        v[e] = new
        h2 = gibbs.hamiltonian(gibbs.LinkField(cx, v), params)
        lhs = -h1 + min(0.0, -d)
        rhs = -h2 + min(0.0, d)
        assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


def _gibbs_determinism():
    cx = dec.build_box(2, 2)
    params = gibbs.ModelParams(0.3, 0.4, 1, cx)
    cfg = gibbs.SamplerConfig(sweeps=40, burn_in=10, seed=2024, bins=8)
    edge = dec.Chain(1, {cx.edges[0]: 1})
    a = gibbs.estimate_wilson(edge, 1, params, cfg)
    b = gibbs.estimate_wilson(edge, 1, params, cfg)
    assert a.mean == b.mean and a.stderr == b.stderr


def _gibbs_beta0_edge():
    from scipy.special import iv

    cx = dec.build_box(2, 2)
    params = gibbs.ModelParams(0.0, 0.5, 1, cx)
    cfg = gibbs.SamplerConfig(sweeps=6000, burn_in=500, seed=100, bins=32)
    est = gibbs.estimate_wilson(dec.Chain(1, {((0, 0), (0,)): 1}), 1, params, cfg)
    ref = float(iv(1, 1.0) / iv(0, 1.0))
    assert abs(est.mean - ref) < 4 * est.stderr
    assert abs(est.imag_mean) < 4 * est.imag_stderr + 1e-12


def _gibbs_mc_oracle():
    cx, loop = oracle.single_plaquette_complex()
    inst = oracle.OracleInstance(cx, loop, 1, 1, 0.3, 0.2, 64, "plaquette")
    ref, _ = oracle.oracle_expectation(inst)
    params = gibbs.ModelParams(0.3, 0.2, 1, cx)
    cfg = gibbs.SamplerConfig(sweeps=8000, burn_in=500, seed=200, bins=32)
    est = gibbs.estimate_wilson(loop, 1, params, cfg)
    assert abs(est.mean - ref) < 4 * est.stderr


CHECKS = {
    "dec-boundary-squared": lambda quick: _dec_boundary_squared(),
    "dec-adjointness": lambda quick: _dec_adjointness(),
    "dec-dd-mod-2pi": lambda quick: _dec_dd_mod_2pi(),
    "dec-cell-counts": lambda quick: _dec_cell_counts(),
    "dec-mf-geometry": lambda quick: _dec_mf_geometry(),
    "currents-enumeration-complete": lambda quick: _currents_enumeration_complete(),
    "currents-witness-residuals": lambda quick: _currents_witness_residuals(),
    "currents-partition-monotone": lambda quick: _currents_partition_monotone(),
    "currents-bessel-identity": lambda quick: _currents_bessel_identity(),
    "currents-certificate": lambda quick: _currents_certificate(),
    "oracle-currents-agreement": _oracle_currents_agreement,
    "oracle-two-integrators": _oracle_two_integrators,
    "oracle-symmetries": lambda quick: _oracle_symmetries(),
    "polymers-bessel": lambda quick: _polymers_bessel(),
    "polymers-bessel-table": lambda quick: _polymers_bessel_table(),
    "polymers-charge-moment": lambda quick: _polymers_charge_moment(),
    "polymers-partition-disjoint": lambda quick: _polymers_partition_disjoint(),
    "polymers-holder-dominates": _polymers_holder_dominates,
    "polymers-kk-reduction": lambda quick: _polymers_kk_reduction(),
    "confinement-formula": lambda quick: _confinement_formula(),
    "scan-g1-closed-form": lambda quick: _scan_g1(),
    "gibbs-local-energy": lambda quick: _gibbs_local_energy(),
    "gibbs-detailed-balance": lambda quick: _gibbs_detailed_balance(),
    "gibbs-determinism": lambda quick: _gibbs_determinism(),
    "gibbs-beta0-edge": lambda quick: _gibbs_beta0_edge(),
    "gibbs-mc-oracle": lambda quick: _gibbs_mc_oracle(),
}

QUICK_SKIP = {"gibbs-beta0-edge", "gibbs-mc-oracle"}


def run_checks(names: list[str] | None = None, quick: bool = False) -> list[CheckResult]:
    selected = names if names is not None else list(CHECKS)
    results = []
    for name in selected:
        if quick and name in QUICK_SKIP:
            continue
        fn = CHECKS[name]
        t0 = time.time()
        try:
            fn(quick)
            results.append(CheckResult(name, True, "", time.time() - t0))
        except Exception as exc:  # noqa: BLE001 - report, do not crash the suite
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}", time.time() - t0))
    return results
