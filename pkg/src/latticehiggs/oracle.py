"""Direct quadrature ground truth on tiny complexes.

Evaluates the partition integral

    Z[gamma] = int cos(j sigma(gamma)) exp(2 beta sum_p cos(d sigma(p))
                                           + 2 kappa sum_e cos(k sigma(e)))
               prod_e d theta_e / (2 pi)

by full tensor quadrature over one angle per positive edge.  The guard of at
most five links keeps this unimpeachably independent of the expansions it
checks: no character or Fourier identities, just nested sums.  Two integrator
families (Gauss-Legendre and periodic trapezoid) are available so the oracle
can also be cross-checked against itself.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .currents import CurrentExpectation
from .dec import Chain, Complex, PathChain
from .errors import ConfigError, GuardError
from .quadrature import RULES, Block, contract

MAX_ORACLE_LINKS = 5


@dataclass
class OracleInstance:
    """A tiny model instance small enough for full tensor quadrature."""

    complex: Complex
    gamma: Chain | None
    j: int
    k: int
    beta: float
    kappa: float
    nodes: int = 64
    name: str = "instance"

    def __post_init__(self) -> None:
        L = len(self.complex.edges)
        if L > MAX_ORACLE_LINKS:
            raise GuardError(
                f"oracle guard: {L} links exceed the maximum of {MAX_ORACLE_LINKS}"
            )
        if self.nodes < 16 or self.nodes > 256 or self.nodes & (self.nodes - 1):
            raise ConfigError("nodes per angle must be a power of two in [16, 256]")
        if self.j < 0 or self.k < 0:
            raise ConfigError("charges must be nonnegative")
        if self.beta < 0 or self.kappa < 0:
            raise ConfigError("couplings must be nonnegative")
        if self.gamma is not None:
            self.complex.check_chain(self.gamma)

    @property
    def instance_id(self) -> str:
        return f"{self.name}:beta={self.beta:g}:kappa={self.kappa:g}:k={self.k}:j={self.j}"


def _evaluate(instance: OracleInstance, n: int, rule: str, edge_order) -> complex:
    cx = instance.complex
    edges = list(edge_order) if edge_order is not None else list(range(len(cx.edges)))
    if sorted(edges) != list(range(len(cx.edges))):
        raise ConfigError("edge_order must be a permutation of the edge indices")
    pos = {e: i for i, e in enumerate(edges)}

    nodes, weights = RULES[rule](n, -math.pi, math.pi)
    var_weights = []
    for e in edges:
        key = cx.edges[e]
        u = weights / (2.0 * math.pi) * np.exp(
            2.0 * instance.kappa * np.cos(instance.k * nodes)
        )
        coeff = instance.gamma[key] if instance.gamma is not None else 0
        if instance.j and coeff:
            u = u * np.exp(1j * instance.j * coeff * nodes)
        var_weights.append(u)

    blocks = []
    for edges_signs in cx.plaq_edges:
        variables = tuple(pos[ei] for ei, _ in edges_signs)
        signs = tuple(s for _, s in edges_signs)
        beta = instance.beta
        blocks.append(Block(variables, signs, lambda a, b2=2.0 * beta: np.exp(b2 * np.cos(a))))
    return contract(nodes, var_weights, blocks)


def quadrature_partition(
    instance: OracleInstance,
    rule: str = "legendre",
    edge_order: list[int] | None = None,
    rel_tol: float = 1e-8,
) -> tuple[float, float]:
    """Z[gamma] with a node-doubling error estimate.

    Node counts climb 16, 32, ... until two consecutive levels agree to
    ``rel_tol`` or ``instance.nodes`` is reached, whichever comes first; the
    returned error is the last inter-level difference.  The imaginary part
    must vanish by the sign-flip symmetry of the measure and is asserted
    below 1e-10 of scale.
    """
    n = 16
    prev = _evaluate(instance, n, rule, edge_order)
    while True:
        n *= 2
        cur = _evaluate(instance, n, rule, edge_order)
        err = abs(cur - prev)
        if err <= rel_tol * max(1.0, abs(cur)):
            break
        if n >= instance.nodes:
            raise GuardError(
                f"oracle quadrature did not converge under node doubling up to {n}"
            )
        prev = cur
    scale = max(1.0, abs(cur.real))
    if abs(cur.imag) > 1e-10 * scale:
        raise AssertionError(f"oracle integral has a nonvanishing imaginary part: {cur.imag}")
    return float(cur.real), float(err)


def _gamma_signature(instance: OracleInstance):
    if instance.gamma is None or instance.j == 0:
        return ()
    return tuple(sorted(instance.gamma.coeffs.items()))


def oracle_expectation(
    instance: OracleInstance,
    rule: str = "legendre",
    cache: dict | None = None,
) -> tuple[float, float]:
    """<W_{j gamma}> = Z[j gamma] / Z[0] with combined error.

    ``cache`` (optional) memoizes partition values across calls that share a
    complex; keys include couplings, charges and the path, so reuse is safe.
    """

    def Z(inst: OracleInstance) -> tuple[float, float]:
        if cache is None:
            return quadrature_partition(inst, rule)
        key = (inst.name, inst.beta, inst.kappa, inst.k, inst.j,
               _gamma_signature(inst), rule)
        if key not in cache:
            cache[key] = quadrature_partition(inst, rule)
        return cache[key]

    num, err_n = Z(instance)
    den, err_d = Z(
        OracleInstance(
            instance.complex, None, 0, instance.k, instance.beta, instance.kappa,
            instance.nodes, instance.name,
        )
    )
    value = num / den
    err = err_n / den + abs(num) * err_d / den**2
    return value, err


# -- canonical tiny complexes -------------------------------------------------


def single_edge_complex() -> tuple[Complex, PathChain]:
    cx = Complex.from_cells(2, edges={((0, 0), (0,))})
    return cx, PathChain(cx, {((0, 0), (0,)): 1})


def single_plaquette_complex() -> tuple[Complex, PathChain]:
    cx = Complex.from_cells(2, plaquettes={((0, 0), (0, 1))})
    gamma = PathChain.from_sites(cx, [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)])
    return cx, gamma

def plaquette_pendant_complex() -> tuple[Complex, PathChain]:
    """Unit plaquette plus a pendant edge; gamma is an open two-edge path."""
    cx = Complex.from_cells(
        2, plaquettes={((0, 0), (0, 1))}, edges={((1, 1), (0,))}
    )
    gamma = PathChain.from_sites(cx, [(0, 1), (1, 1), (2, 1)])
    return cx, gamma


TINY_COMPLEXES = {
    "edge": single_edge_complex,
    "plaquette": single_plaquette_complex,
    "plaquette-pendant": plaquette_pendant_complex,
}


def default_suite(
    betas=(0.0, 0.1, 0.3),
    kappas=(0.0, 0.1, 0.3),
    charges=(1, 2),
    nodes: int = 64,
) -> list[OracleInstance]:
    """The standard tiny-instance grid: every complex, coupling pair, k and j in {0,1,k,2k}."""
    out = []
    for name, builder in TINY_COMPLEXES.items():
        cx, gamma = builder()
        for beta in betas:
            for kappa in kappas:
                for k in charges:
                    for j in sorted({0, 1, k, 2 * k}):
                        out.append(
                            OracleInstance(cx, gamma, j, k, beta, kappa, nodes, name)
                        )
    return out


# -- cross validation ---------------------------------------------------------


@dataclass
class ValidationRow:
    instance_id: str
    method_a: str
    method_b: str
    value_a: float
    value_b: float
    tolerance: float
    passed: bool


@dataclass
class ValidationReport:
    rows: list[ValidationRow] = field(default_factory=list)

    @property
    def failures(self) -> list[ValidationRow]:
        return [r for r in self.rows if not r.passed]

    @property
    def all_pass(self) -> bool:
        return not self.failures

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["instance_id", "method_a", "method_b", "value_a", "value_b", "tolerance", "pass"]
            )
            for r in self.rows:
                writer.writerow(
                    [r.instance_id, r.method_a, r.method_b,
                     f"{r.value_a:.12g}", f"{r.value_b:.12g}", f"{r.tolerance:.6g}",
                     int(r.passed)]
                )


def cross_validate(
    instances: list[OracleInstance] | None = None,
    budget: int = 12,
    compare_integrators: bool = True,
    mc_results: dict[str, tuple[dict, float, float]] | None = None,
) -> ValidationReport:
    """Compare the quadrature oracle against the current expansion (and MC).

    ``mc_results`` maps instance ids to (params dict, estimate, stderr); the
    params must agree with the instance, otherwise the input is rejected.
    Widened intervals from small budgets are not failures: the comparison
    tolerance is the current tail plus the quadrature error by construction.
    """
    from .currents import (
        Chain as _Chain,
        charged_interactions,
        divisibility_certificate,
        partition_sum,
    )

    if instances is None:
        instances = default_suite()
    report = ValidationReport()
    z_cache: dict[tuple, tuple[float, float]] = {}
    oracle_cache: dict[tuple, tuple[float, float]] = {}
    inter_cache: dict[tuple, object] = {}
    sum_cache: dict[tuple, object] = {}

    def oracle_value(inst: OracleInstance, rule: str) -> tuple[float, float]:
        key = (inst.name, inst.beta, inst.kappa, inst.k, inst.j, rule)
        if key not in oracle_cache:
            oracle_cache[key] = oracle_expectation(inst, rule, cache=z_cache)
        return oracle_cache[key]

    def current_value(inst: OracleInstance) -> CurrentExpectation:
        if inst.j and divisibility_certificate(inst.gamma, inst.j, inst.k, inst.kappa):
            return CurrentExpectation(0.0, 0.0, None, None, exact_zero=True)
        ikey = (inst.name, inst.beta, inst.kappa, inst.k)
        if ikey not in inter_cache:
            inter_cache[ikey] = charged_interactions(
                inst.complex, inst.beta, inst.kappa, inst.k
            )
        inter = inter_cache[ikey]
        nkey = ikey + ("num", inst.j)
        if nkey not in sum_cache:
            gamma = inst.gamma if (inst.j and inst.gamma is not None) else _Chain(1)
            sum_cache[nkey] = partition_sum(inter, gamma, inst.j, budget, enum_limit=8192)
        dkey = ikey + ("den",)
        if dkey not in sum_cache:
            sum_cache[dkey] = partition_sum(inter, None, 0, budget, enum_limit=8192)
        num, den = sum_cache[nkey], sum_cache[dkey]
        return CurrentExpectation(
            num.value / (den.value + den.tail_bound),
            (num.value + num.tail_bound) / den.value,
            num, den,
        )

    for inst in instances:
        val_gl, err_gl = oracle_value(inst, "legendre")
        route = current_value(inst)
        tol = route.halfwidth + err_gl + 1e-12
        report.rows.append(
            ValidationRow(
                inst.instance_id, "oracle-quadrature", "current-expansion",
                val_gl, route.midpoint, tol,
                abs(val_gl - route.midpoint) <= tol,
            )
        )
        if compare_integrators:
            val_tr, err_tr = oracle_value(inst, "trapezoid")
            tol2 = err_gl + err_tr + 1e-9
            report.rows.append(
                ValidationRow(
                    inst.instance_id, "quad-legendre", "quad-trapezoid",
                    val_gl, val_tr, tol2, abs(val_gl - val_tr) <= tol2,
                )
            )
        if mc_results and inst.instance_id in mc_results:
            params, est, stderr = mc_results[inst.instance_id]
            for attr in ("beta", "kappa", "k", "j"):
                if attr in params and params[attr] != getattr(inst, attr):
                    raise ConfigError(
                        f"MC result for {inst.instance_id} was produced with "
                        f"{attr}={params[attr]}, instance has {getattr(inst, attr)}"
                    )
            tol3 = 4.0 * stderr + err_gl + 1e-12
            report.rows.append(
                ValidationRow(
                    inst.instance_id, "oracle-quadrature", "monte-carlo",
                    val_gl, est, tol3, abs(val_gl - est) <= tol3,
                )
            )
    return report
