"""Polymer-expansion ingredients: Bessel coefficients, cluster weights, smallness bounds.

The partition function rewrites as a sum over connected plaquette sets (charge
1) or plaquette sets decorated with a Z_k-valued 1-form (charge k >= 2), with
multiplicative weights phi.  Everything here is computed on explicit small
complexes: edge integrals that do not touch a polymer factor out exactly
against the normalized single-edge density, so a polymer embedded in a large
box costs only its own edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .currents import confinement_smallness
from .dec import CellKey, Chain, Complex, adjacency_components, plaquette_boundary_cells
from .errors import GuardError
from .quadrature import Block, contract, gauss_legendre_rule, von_mises_samples

TWO_PI = 2.0 * math.pi

BESSEL_X_GUARD = 50.0
QUADRATURE_MAX_VARS = 6
QUADRATURE_TOL = 1e-8


# -- modified Bessel functions of the first kind ------------------------------


def bessel_i(nu: int, x: float) -> tuple[float, float]:
    """I_nu(x) by power series, with a rigorous remainder bound.

    Terms t_r = (x/2)^(nu+2r) / (r! (r+nu)!) decrease geometrically once the
    step ratio (x/2)^2 / ((r+1)(r+nu+1)) drops below one, so the tail after the
    last summed term is dominated by a geometric series.
    """
    if nu < 0:
        raise ValueError("order must be a nonnegative integer")
    if x < 0 or x > BESSEL_X_GUARD:
        raise GuardError(f"series guard: need 0 <= x <= {BESSEL_X_GUARD}, got {x}")
    if x == 0.0:
        return (1.0 if nu == 0 else 0.0), 0.0
    half_sq = (0.5 * x) ** 2
    term = (0.5 * x) ** nu / math.factorial(nu)
    total = term
    r = 0
    while True:
        r += 1
        term *= half_sq / (r * (r + nu))
        total += term
        ratio = half_sq / ((r + 1) * (r + nu + 1))
        if ratio < 1.0:
            tail = term * ratio / (1.0 - ratio)
            if tail <= 1e-15 * total:
                return total, tail
        if r > 10_000:
            raise GuardError("Bessel series failed to converge")


@dataclass
class BesselTable:
    """b_i = I_i(2 kappa) for i = 0..i_max; monotone decreasing in i for kappa >= 0."""

    kappa: float
    values: list[float]
    accuracy: float

    @classmethod
    def build(cls, kappa: float, i_max: int) -> "BesselTable":
        vals, errs = zip(*(bessel_i(i, 2.0 * kappa) for i in range(i_max + 1)))
        return cls(kappa=kappa, values=list(vals), accuracy=max(errs))

    def __getitem__(self, i: int) -> float:
        return self.values[i]


def check_bessel_table(table: BesselTable) -> None:
    """Named invariant: entries are nonnegative and nonincreasing in the index."""
    vals = table.values
    if any(v < 0 for v in vals):
        raise AssertionError("bessel-table-nonnegative: negative entry")
    if any(a < b - 1e-14 for a, b in zip(vals, vals[1:])):
        raise AssertionError("bessel-table-monotone: values increase with the index")


def charge_moment(i: int, k: int, kappa: float, nodes: int = 64) -> float:
    """Single-edge moment over angles restricted to (-pi/k, pi/k).

    (k / 2 pi) * int_{-pi/k}^{pi/k} cos(i theta) exp(2 kappa cos(k theta)) d theta;
    equals I_0(2 kappa) at i = 0 and I_1(2 kappa) at i = k.
    """
    if k < 1:
        raise ValueError("charge must be >= 1")
    prev = None
    n = max(16, nodes // 4)
    while n <= 4 * nodes:
        x, w = gauss_legendre_rule(n, -math.pi / k, math.pi / k)
        val = float(
            np.sum(w * np.cos(i * x) * np.exp(2.0 * kappa * np.cos(k * x)))
            * k / TWO_PI
        )
        if prev is not None and abs(val - prev) <= 1e-12 * max(1.0, abs(val)):
            return val
        prev = val
        n *= 2
    return prev


# -- polymers -----------------------------------------------------------------


@dataclass(frozen=True)
class PlaquettePolymer:
    """A connected set of positive plaquettes (charge-1 polymer)."""

    complex: Complex
    plaquettes: tuple[CellKey, ...]

    def __post_init__(self) -> None:
        pset = set(self.plaquettes)
        if not pset:
            raise ValueError("polymer must contain at least one plaquette")
        comps = adjacency_components(self.complex, pset, dim=2)
        if len(comps) != 1:
            raise ValueError("polymer plaquettes are not connected")
        object.__setattr__(self, "plaquettes", tuple(sorted(pset)))

    @property
    def touched_edges(self) -> list[CellKey]:
        out = set()
        for p in self.plaquettes:
            out.update(c.key for c in plaquette_boundary_cells(p))
        return sorted(out)

    def __len__(self) -> int:
        return len(self.plaquettes)


@dataclass(frozen=True)
class TwistedPolymer:
    """Charge-k polymer: plaquette set P with a Z_k-valued 1-form twist.

    The twist is stored as integer residues mod k on positive edges.  The pair
    is connected in the sense that the plaquettes of P together with the
    plaquettes where the twist has nonzero curl form one component of the
    shared-boundary-edge graph.
    """

    complex: Complex
    plaquettes: tuple[CellKey, ...]
    twist: tuple[tuple[CellKey, int], ...]
    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("charge must be >= 1")
        twist = {e: r % self.k for e, r in dict(self.twist).items() if r % self.k}
        for e in twist:
            if not self.complex.contains(1, e):
                raise ValueError(f"twist references edge {e} outside the complex")
        object.__setattr__(self, "twist", tuple(sorted(twist.items())))
        support = set(self.plaquettes) | set(self.curl_support())
        if not support:
            raise ValueError("polymer must have nonempty support")
        comps = adjacency_components(self.complex, support, dim=2)
        if len(comps) != 1:
            raise ValueError("polymer pair (P, twist) is not connected")
        object.__setattr__(self, "plaquettes", tuple(sorted(set(self.plaquettes))))

    def curl(self, p: CellKey) -> int:
        """Twist residue around the plaquette boundary, mod k."""
        tw = dict(self.twist)
        total = sum(c.sign * tw.get(c.key, 0) for c in plaquette_boundary_cells(p))
        return total % self.k

    def curl_support(self) -> list[CellKey]:
        candidates = set()
        for e, _ in self.twist:
            for qi, _ in self.complex.edge_plaqs[self.complex.edge_index[e]]:
                candidates.add(self.complex.plaquettes[qi])
        return sorted(p for p in candidates if self.curl(p))

    @property
    def size(self) -> int:
        return len(set(self.plaquettes) | set(self.curl_support()))

    @property
    def touched_edges(self) -> list[CellKey]:
        out = set()
        for p in set(self.plaquettes) | set(self.curl_support()):
            out.update(c.key for c in plaquette_boundary_cells(p))
        return sorted(out)


@dataclass
class WeightEstimate:
    value: float
    error: float
    method: str


def _polymer_integral(
    plaq_specs: list[tuple[list[tuple[CellKey, int]], float]],
    gamma_phase: dict[CellKey, int],
    j: int,
    beta: float,
    kappa: float,
    k: int,
    mc_samples: int,
    seed: int,
) -> WeightEstimate:
    """Expectation of prod_p (exp(2 beta (cos(phi_p + Theta_p) - cos(phi_p))) - 1)
    times the charge-j phases, under iid restricted single-edge densities."""
    variables = sorted({e for edges, _ in plaq_specs for e, _ in edges} | set(gamma_phase))
    index = {e: i for i, e in enumerate(variables)}
    dim = len(variables)

    def block_fn(phi: float):
        return lambda a: np.expm1(2.0 * beta * (np.cos(phi + a) - math.cos(phi)))

    if dim <= QUADRATURE_MAX_VARS:
        node_cap = {1: 256, 2: 256, 3: 128, 4: 64, 5: 24, 6: 16}[max(dim, 1)]
        b0 = charge_moment(0, k, kappa)
        prev = None
        n = 8
        while True:
            x, w = gauss_legendre_rule(n, -math.pi / k, math.pi / k)
            dens = w * (k / TWO_PI) * np.exp(2.0 * kappa * np.cos(k * x)) / b0
            var_weights = []
            for e in variables:
                u = dens.astype(complex)
                if j and gamma_phase.get(e):
                    u = u * np.exp(1j * j * gamma_phase[e] * x)
                var_weights.append(u)
            blocks = [
                Block(
                    tuple(index[e] for e, _ in edges),
                    tuple(s for _, s in edges),
                    block_fn(phi),
                )
                for edges, phi in plaq_specs
            ]
            val = contract(x, var_weights, blocks)
            if prev is not None and abs(val - prev) <= QUADRATURE_TOL * max(1.0, abs(val)):
                return WeightEstimate(float(val.real), abs(val - prev) + 1e-15, "quadrature")
            if 2 * n > node_cap:
                if prev is None:
                    raise GuardError("polymer quadrature node cap too small")
                return WeightEstimate(float(val.real), abs(val - prev), "quadrature")
            prev = val
            n *= 2

    rng = np.random.default_rng(seed)
    theta = von_mises_samples(rng, 2.0 * kappa, (mc_samples, dim)) / k
    vals = np.ones(mc_samples, dtype=complex)
    for e, coeff in gamma_phase.items():
        if j and coeff:
            vals *= np.exp(1j * j * coeff * theta[:, index[e]])
    for edges, phi in plaq_specs:
        angle = np.zeros(mc_samples)
        for e, s in edges:
            angle += s * theta[:, index[e]]
        vals *= np.expm1(2.0 * beta * (np.cos(phi + angle) - math.cos(phi)))
    mean = vals.real.mean()
    err = vals.real.std(ddof=1) / math.sqrt(mc_samples)
    return WeightEstimate(float(mean), float(err), "monte-carlo")


def polymer_weight_charge1(
    polymer: PlaquettePolymer,
    gamma: Chain | None,
    j: int,
    beta: float,
    kappa: float,
    mc_samples: int = 200_000,
    seed: int = 0,
) -> WeightEstimate:
    """Cluster weight phi_gamma(P) of a charge-1 polymer.

    Tensor quadrature when at most six edges are coupled, importance-sampled
    Monte Carlo under the product single-edge density beyond that.
    """
    touched = polymer.touched_edges
    gamma_phase = {}
    if gamma is not None:
        gamma_phase = {e: gamma[e] for e in touched if gamma[e]}
    specs = []
    for p in polymer.plaquettes:
        edges = [(c.key, c.sign) for c in plaquette_boundary_cells(p)]
        specs.append((edges, 0.0))
    est = _polymer_integral(specs, gamma_phase, j, beta, kappa, 1, mc_samples, seed)
    if gamma_phase:
        b0, _ = bessel_i(0, 2.0 * kappa)
        bj, _ = bessel_i(j, 2.0 * kappa)
        scale = (b0 / bj) ** len(gamma_phase)
        return WeightEstimate(est.value * scale, est.error * scale, est.method)
    return est


def polymer_weight_charged(
    polymer: TwistedPolymer,
    gamma: Chain | None,
    j: int,
    beta: float,
    kappa: float,
    mc_samples: int = 200_000,
    seed: int = 0,
) -> WeightEstimate:
    """Cluster weight phi(P, twist) of a charge-k polymer.

    The Z_k part enters through an exact prefactor exp(2 beta (cos(2 pi r/k) - 1))
    per twisted plaquette and a phase offset inside each plaquette factor; the
    continuous part integrates over angles restricted to (-pi/k, pi/k).
    """
    k = polymer.k
    twisted = polymer.curl_support()
    prefactor = 1.0
    for p in twisted:
        phi = TWO_PI * polymer.curl(p) / k
        prefactor *= math.exp(2.0 * beta * (math.cos(phi) - 1.0))
    touched = polymer.touched_edges
    gamma_phase = {}
    if gamma is not None:
        gamma_phase = {e: gamma[e] for e in touched if gamma[e]}
    specs = []
    for p in polymer.plaquettes:
        edges = [(c.key, c.sign) for c in plaquette_boundary_cells(p)]
        specs.append((edges, TWO_PI * polymer.curl(p) / k))
    est = _polymer_integral(specs, gamma_phase, j, beta, kappa, k, mc_samples, seed)
    scale = prefactor
    if gamma_phase:
        b0k = charge_moment(0, k, kappa)
        bjk = charge_moment(j, k, kappa)
        scale *= (b0k / bjk) ** len(gamma_phase)
    return WeightEstimate(est.value * scale, est.error * scale, est.method)


# -- Hoelder smallness bounds --------------------------------------------------


def plaquette_partition(complex_: Complex) -> list[list[CellKey]]:
    """Partition the positive plaquettes into boundary-edge-disjoint classes.

    Greedy colouring of the shared-edge adjacency graph in canonical cell
    order; the class count is at most 1 + max degree.  Edge-disjointness of
    every class is verified before returning.
    """
    edge_sets = {
        p: {c.key for c in plaquette_boundary_cells(p)} for p in complex_.plaquettes
    }
    colour: dict[CellKey, int] = {}
    by_edge: dict[CellKey, list[CellKey]] = {}
    for p in complex_.plaquettes:
        forbidden = set()
        for e in edge_sets[p]:
            for q in by_edge.get(e, ()):
                forbidden.add(colour[q])
        c = 0
        while c in forbidden:
            c += 1
        colour[p] = c
        for e in edge_sets[p]:
            by_edge.setdefault(e, []).append(p)
    n_classes = max(colour.values()) + 1 if colour else 0
    classes = [[] for _ in range(n_classes)]
    for p in complex_.plaquettes:
        classes[colour[p]].append(p)
    for cls in classes:
        seen: set[CellKey] = set()
        for p in cls:
            if seen & edge_sets[p]:
                raise AssertionError("plaquette-partition-disjoint: classes share an edge")
            seen |= edge_sets[p]
    return classes


def holder_plaquette_factor(
    beta: float, kappa: float, a_m: float, k: int = 1, twist_residue: int = 0,
    nodes: int = 32,
) -> float:
    """(int |exp(2 beta (cos(phi + Theta) - cos(phi))) - 1|^a_m d density)^(1/a_m)
    over the four edges of one plaquette, phi = 2 pi twist_residue / k."""
    if a_m < 1:
        raise ValueError("Hoelder exponent must be >= 1")
    phi = TWO_PI * twist_residue / k
    b0 = charge_moment(0, k, kappa)
    prev = None
    n = 8
    while True:
        x, w = gauss_legendre_rule(n, -math.pi / k, math.pi / k)
        dens = w * (k / TWO_PI) * np.exp(2.0 * kappa * np.cos(k * x)) / b0
        block = Block(
            (0, 1, 2, 3), (1, 1, -1, -1),
            lambda a: np.abs(np.expm1(2.0 * beta * (np.cos(phi + a) - math.cos(phi))))
            ** a_m,
        )
        val = contract(x, [dens.astype(complex)] * 4, [block]).real
        if prev is not None and abs(val - prev) <= QUADRATURE_TOL * max(1.0, abs(val)):
            break
        if 2 * n > max(nodes, 8):
            break
        prev = val
        n *= 2
    return float(val ** (1.0 / a_m))


@dataclass
class HolderBound:
    bound: float
    factor: float
    prefactor: float
    proxy: float | None = None


def holder_bound_charge1(
    beta: float,
    kappa: float,
    a_m: float,
    j: int,
    touched_count: int,
    n_plaquettes: int,
    nodes: int = 32,
) -> HolderBound:
    """Upper bound for |phi_gamma(P)|: (b_0/b_j)^touched * factor^|P|.

    Also carries the closed-form proxy (b_0/b_j)^4 (1 - e^(-4 beta)) bounding
    sup_P |phi|^(1/|P|), which is what vanishes as beta -> 0.
    """
    factor = holder_plaquette_factor(beta, kappa, a_m, 1, 0, nodes)
    b0, _ = bessel_i(0, 2.0 * kappa)
    bj, _ = bessel_i(j, 2.0 * kappa)
    ratio = (b0 / bj) if bj > 0 else math.inf
    prefactor = ratio**touched_count if touched_count else 1.0
    proxy = (ratio**4 if math.isfinite(ratio) else math.inf) * (-math.expm1(-4.0 * beta))
    return HolderBound(
        bound=prefactor * factor**n_plaquettes,
        factor=factor,
        prefactor=prefactor,
        proxy=proxy,
    )


def holder_bound_charged(
    polymer: TwistedPolymer,
    gamma: Chain | None,
    j: int,
    beta: float,
    kappa: float,
    a_m: float,
    nodes: int = 32,
) -> HolderBound:
    """Upper bound for |phi(P, twist)|.

    The exact Z_k prefactor multiplies the touched-edge moment ratio and one
    twist-aware Hoelder factor per plaquette of P.  (Plaquettes that carry only
    twist curl contribute through the prefactor, not the integral.)
    """
    k = polymer.k
    prefactor = 1.0
    for p in polymer.curl_support():
        phi = TWO_PI * polymer.curl(p) / k
        prefactor *= math.exp(2.0 * beta * (math.cos(phi) - 1.0))
    touched = 0
    if gamma is not None:
        touched = sum(1 for e in polymer.touched_edges if gamma[e])
    if touched:
        b0k = charge_moment(0, k, kappa)
        bjk = charge_moment(j, k, kappa)
        prefactor *= (b0k / bjk) ** touched if bjk > 0 else math.inf
    factors = [
        holder_plaquette_factor(beta, kappa, a_m, k, polymer.curl(p), nodes)
        for p in polymer.plaquettes
    ]
    factor = max(factors) if factors else 0.0
    return HolderBound(
        bound=prefactor * math.prod(factors), factor=factor, prefactor=prefactor
    )


# -- smallness scans ----------------------------------------------------------


def g1_smallness(beta: float, kappa: float) -> float:
    """(e^beta - 1) e^(4 kappa): the level-set function of the current-expansion regime."""
    return math.expm1(beta) * math.exp(4.0 * kappa)


def g1_contour_beta(level: float, kappa: float) -> float:
    """beta at which g1(beta, kappa) crosses the given level."""
    return math.log1p(level * math.exp(-4.0 * kappa))


@dataclass
class SmallnessReport:
    """Per-grid-point smallness criteria; CSV-ready via the ``rows`` attribute."""

    betas: list[float]
    kappas: list[float]
    k: int
    j: int
    m: int
    a_m: float
    rows: list[tuple[float, float, float, float, float]] = field(default_factory=list)

    columns = ("beta", "kappa", "g1", "a_conf", "holder_factor")


def smallness_scan(
    betas,
    kappas,
    k: int,
    j: int,
    m: int = 4,
    a_m: float | None = None,
    nodes: int = 16,
) -> SmallnessReport:
    """Evaluate g1, the confinement smallness a, and the Hoelder factor on a grid.

    ``a_m`` defaults to the computed class count of a small box in dimension m.
    """
    if a_m is None:
        from .dec import build_box

        a_m = float(len(plaquette_partition(build_box(min(m, 3), 1))))
        if m >= 4:
            a_m = float(len(plaquette_partition(build_box(m, 1))))
    report = SmallnessReport(list(betas), list(kappas), k, j, m, a_m)
    for beta in report.betas:
        for kappa in report.kappas:
            g1 = g1_smallness(beta, kappa)
            a_conf = confinement_smallness(beta, kappa, j, k, m)
            holder = holder_plaquette_factor(beta, kappa, a_m, 1, 0, nodes)
            report.rows.append((beta, kappa, g1, a_conf, holder))
    return report


# -- random polymers (test and report sampling) --------------------------------


def random_connected_plaquettes(
    complex_: Complex, size: int, rng: np.random.Generator
) -> PlaquettePolymer:
    """Grow a connected plaquette set by repeatedly adding shared-edge neighbours."""
    start = complex_.plaquettes[rng.integers(len(complex_.plaquettes))]
    chosen = {start}
    while len(chosen) < size:
        frontier = set()
        for p in chosen:
            for ei, _ in complex_.plaq_edges[complex_.plaq_index[p]]:
                for qi, _ in complex_.edge_plaqs[ei]:
                    q = complex_.plaquettes[qi]
                    if q not in chosen:
                        frontier.add(q)
        if not frontier:
            break
        pick = sorted(frontier)[rng.integers(len(frontier))]
        chosen.add(pick)
    return PlaquettePolymer(complex_, tuple(sorted(chosen)))


def random_twisted_polymer(
    complex_: Complex, size: int, k: int, rng: np.random.Generator, twist_edges: int = 1
) -> TwistedPolymer:
    """A random connected charge-k polymer; the twist sits on edges of its plaquettes."""
    base = random_connected_plaquettes(complex_, size, rng)
    twist: dict[CellKey, int] = {}
    edges = base.touched_edges
    for _ in range(twist_edges):
        e = edges[rng.integers(len(edges))]
        twist[e] = int(rng.integers(1, k)) if k > 1 else 0
    twist = {e: r for e, r in twist.items() if r}
    return TwistedPolymer(complex_, base.plaquettes, tuple(sorted(twist.items())), k)
