"""Current expansion of the charged model: exact truncated sums with rigorous tails.

The partition integral of a ferromagnetic block-spin model expands into a sum
over nonnegative integer occupation numbers on its oriented interaction terms,
subject to one divergence constraint per lattice cell.  For the charge-k model
the terms are all oriented plaquette boundaries (coupling beta) and all
oriented edges taken with multiplicity k (coupling kappa), and the constraint
at an oriented edge e reads

    sum_p (dp)[e] * n[p]  +  k * (n[e] - n[-e])  +  j * gamma[e]  =  0.

Truncating at total occupancy M keeps a lower bound of the full sum; the
omitted mass is bounded by the Poisson tail of the summed couplings, which
turns every truncated value into a rigorous two-sided interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dec import CellKey, Chain, Complex, PathChain
from .errors import GuardError

TermCell = tuple[int, CellKey, int]  # (dim, positive cell key, orientation)

DEFAULT_ENUM_LIMIT = 4096
MAX_ENUM_NODES = 50_000_000


class InteractionSet:
    """Symmetric family of interaction-term chains with positive couplings.

    ``chains[t]`` is the ell-chain of term t and ``couplings[t]`` its weight
    in the Hamiltonian exponent; for every term the reversed chain must be
    present with the same coupling.  ``term_cells`` records, when each term
    corresponds to a single oriented cell construction (plaquette boundary or
    multiple of an edge), which cell that is -- this backs serialization.
    """

    def __init__(
        self,
        complex_: Complex,
        cell_dim: int,
        chains: list[Chain],
        couplings: list[float],
        term_cells: list[TermCell] | None = None,
        meta: dict | None = None,
    ):
        if len(chains) != len(couplings):
            raise ValueError("one coupling per term required")
        if any(b <= 0 or not math.isfinite(b) for b in couplings):
            raise ValueError("couplings must be positive and finite")
        self.complex = complex_
        self.cell_dim = cell_dim
        self.chains = chains
        self.couplings = np.asarray(couplings, dtype=float)
        self.term_cells = term_cells
        self.meta = meta or {}

        self.cells: list[CellKey] = complex_.cells(cell_dim)
        self.cell_index = {c: i for i, c in enumerate(self.cells)}
        # sparse incidence: per term [(cell index, coefficient)]
        self.term_coeffs: list[list[tuple[int, int]]] = []
        for ch in chains:
            if ch.dim != cell_dim:
                raise ValueError("term chain dimension does not match the interaction set")
            complex_.check_chain(ch)
            self.term_coeffs.append(
                sorted((self.cell_index[k], c) for k, c in ch.coeffs.items())
            )
        self._check_symmetry()

    def _check_symmetry(self) -> None:
        index = {}
        for t, ch in enumerate(self.chains):
            index[tuple(sorted(ch.coeffs.items()))] = t
        for t, ch in enumerate(self.chains):
            neg = tuple(sorted((-ch).coeffs.items()))
            s = index.get(neg)
            if s is None or self.couplings[s] != self.couplings[t]:
                raise ValueError("interaction terms are not closed under reversal")

    @property
    def n_terms(self) -> int:
        return len(self.chains)

    @property
    def coupling_sum(self) -> float:
        return float(self.couplings.sum())

    def coefficient_matrix(self) -> np.ndarray:
        """Dense (cells x terms) coefficient matrix; for guarded small systems."""
        A = np.zeros((len(self.cells), self.n_terms), dtype=np.int64)
        for t, entries in enumerate(self.term_coeffs):
            for ci, coeff in entries:
                A[ci, t] = coeff
        return A

    def term_for_cell(self, dim: int, key: CellKey, sign: int) -> int:
        if self.term_cells is None:
            raise ValueError("interaction set has no cell-to-term mapping")
        try:
            return self.term_cells.index((dim, key, sign))
        except ValueError:
            raise KeyError(f"no interaction term for cell ({dim}, {key}, {sign})") from None


def charged_interactions(
    complex_: Complex, beta: float, kappa: float, k: int
) -> InteractionSet:
    """Interaction terms of the charge-k model on a complex.

    Zero-coupling term families are omitted: currents occupying them carry
    weight exactly zero, so the expansion value is unchanged.  For k = 0 the
    edge term is the zero chain (the matter coupling is configuration
    independent) and is likewise omitted; partition values then exclude the
    constant factor exp(2*kappa*|C_1^+|), which cancels from every expectation.
    """
    if beta < 0 or kappa < 0:
        raise ValueError("couplings must be nonnegative")
    if k < 0:
        raise ValueError("charge must be a nonnegative integer")
    chains: list[Chain] = []
    couplings: list[float] = []
    cells: list[TermCell] = []
    if beta > 0:
        for p in complex_.plaquettes:
            dp = complex_.boundary(Chain(2, {p: 1}))
            for sign in (1, -1):
                chains.append(sign * dp)
                couplings.append(beta)
                cells.append((2, p, sign))
    if kappa > 0 and k >= 1:
        for e in complex_.edges:
            for sign in (1, -1):
                chains.append(Chain(1, {e: sign * k}))
                couplings.append(kappa)
                cells.append((1, e, sign))
    return InteractionSet(
        complex_, 1, chains, couplings, term_cells=cells,
        meta={"kind": "charged", "k": k, "beta": beta, "kappa": kappa},
    )


def xy_interactions(complex_: Complex, kappa: float) -> InteractionSet:
    """Unit edge terms only: the XY model as a special case of the same engine."""
    return charged_interactions(complex_, 0.0, kappa, 1)


def pure_gauge_interactions(complex_: Complex, beta: float) -> InteractionSet:
    """Plaquette boundary terms only."""
    return charged_interactions(complex_, beta, 0.0, 0)


@dataclass
class Current:
    """Occupation numbers on the oriented terms of an interaction set."""

    interactions: InteractionSet
    occ: np.ndarray

    def __post_init__(self) -> None:
        self.occ = np.asarray(self.occ, dtype=np.int64)
        if self.occ.shape != (self.interactions.n_terms,):
            raise ValueError("occupation vector length does not match the term count")
        if (self.occ < 0).any():
            raise ValueError("occupations must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.occ.sum())

    def weight(self) -> float:
        """prod over terms of coupling^n / n!; multiplicative over disjoint supports."""
        w = 1.0
        for t in np.nonzero(self.occ)[0]:
            n = int(self.occ[t])
            w *= self.interactions.couplings[t] ** n / math.factorial(n)
        return w

    def by_cell(self) -> dict[TermCell, int]:
        if self.interactions.term_cells is None:
            raise ValueError("interaction set has no cell-to-term mapping")
        return {
            self.interactions.term_cells[t]: int(n)
            for t, n in enumerate(self.occ)
            if n
        }

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Current)
            and self.interactions is other.interactions
            and np.array_equal(self.occ, other.occ)
        )


def residual(current: Current, gamma_eff: Chain | None, cell: CellKey) -> int:
    """Constraint residual at one positive cell for a generic interaction set."""
    inter = current.interactions
    ci = inter.cell_index[cell]
    total = 0
    for t, entries in enumerate(inter.term_coeffs):
        n = current.occ[t]
        if not n:
            continue
        for idx, coeff in entries:
            if idx == ci:
                total += coeff * int(n)
    if gamma_eff is not None:
        total += gamma_eff[cell]
    return total


def residual_vector(current: Current, gamma_eff: Chain | None) -> np.ndarray:
    """Residuals at every positive cell, in the interaction set's cell order."""
    inter = current.interactions
    r = np.zeros(len(inter.cells), dtype=np.int64)
    for t in np.nonzero(current.occ)[0]:
        n = int(current.occ[t])
        for ci, coeff in inter.term_coeffs[t]:
            r[ci] += coeff * n
    if gamma_eff is not None:
        for key, c in gamma_eff.coeffs.items():
            r[inter.cell_index[key]] += c
    return r


def constraint_residual(current: Current, gamma: Chain, j: int, edge: CellKey) -> int:
    """Charged-model residual at an oriented edge: plaquette flow + k*(edge flow) + j*gamma."""
    inter = current.interactions
    if inter.meta.get("kind") != "charged":
        raise ValueError("constraint_residual expects a charged interaction set")
    return residual(current, j * gamma, edge)


def is_valid(current: Current, gamma_eff: Chain | None) -> bool:
    return not residual_vector(current, gamma_eff).any()


# -- enumeration ----------------------------------------------------------


def enumerate_currents(
    interactions: InteractionSet,
    gamma: Chain | None,
    j: int,
    budget: int,
    enum_limit: int = DEFAULT_ENUM_LIMIT,
):
    """Yield every valid current with total occupancy <= budget, in lexicographic order.

    Branches are pruned when the residual at some cell can no longer be
    cancelled: future terms contribute integer multiples of their coefficient
    at that cell, so the partial residual must be divisible by the gcd of the
    remaining coefficients and reachable within the remaining budget.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    if interactions.n_terms * max(budget, 1) > enum_limit:
        raise GuardError(
            f"enumeration guard: {interactions.n_terms} terms x budget {budget} "
            f"exceeds the limit {enum_limit}"
        )
    gamma_eff = (j * gamma) if gamma is not None else None
    if gamma_eff is not None:
        interactions.complex.check_chain(gamma_eff)

    n_terms = interactions.n_terms
    n_cells = len(interactions.cells)
    A = interactions.coefficient_matrix()
    g = np.zeros(n_cells, dtype=np.int64)
    if gamma_eff is not None:
        for key, c in gamma_eff.coeffs.items():
            g[interactions.cell_index[key]] = c

    # suffix statistics over terms t..end, per cell
    suffix_max = np.zeros((n_cells, n_terms + 1), dtype=np.int64)
    suffix_gcd = np.zeros((n_cells, n_terms + 1), dtype=np.int64)
    for t in range(n_terms - 1, -1, -1):
        a = np.abs(A[:, t])
        suffix_max[:, t] = np.maximum(suffix_max[:, t + 1], a)
        suffix_gcd[:, t] = np.gcd(suffix_gcd[:, t + 1], a)

    occ = np.zeros(n_terms, dtype=np.int64)
    nodes = 0

    def feasible(r: np.ndarray, t: int, remaining: int) -> bool:
        absr = np.abs(r)
        if (absr > remaining * suffix_max[:, t]).any():
            return False
        gc = suffix_gcd[:, t]
        live = gc > 0
        if (r[~live] != 0).any():
            return False
        return not (absr[live] % gc[live]).any()

    def rec(t: int, r: np.ndarray, used: int):
        nonlocal nodes
        nodes += 1
        if nodes > MAX_ENUM_NODES:
            raise GuardError(f"enumeration aborted after {MAX_ENUM_NODES} nodes")
        if t == n_terms:
            if not r.any():
                yield Current(interactions, occ.copy())
            return
        col = A[:, t]
        cur = r.copy()
        for n in range(budget - used + 1):
            if n:
                cur = cur + col
            occ[t] = n
            if feasible(cur, t + 1, budget - used - n):
                yield from rec(t + 1, cur, used + n)
        occ[t] = 0

    yield from rec(0, g.copy(), 0)


def brute_force_currents(
    interactions: InteractionSet, gamma: Chain | None, j: int, budget: int
) -> list[Current]:
    """Unpruned reference enumeration; only for tiny term counts."""
    from itertools import product as iproduct

    if interactions.n_terms > 12:
        raise GuardError("brute force enumeration limited to 12 terms")
    gamma_eff = (j * gamma) if gamma is not None else None
    out = []
    for occ in iproduct(range(budget + 1), repeat=interactions.n_terms):
        if sum(occ) > budget:
            continue
        cur = Current(interactions, np.array(occ, dtype=np.int64))
        if is_valid(cur, gamma_eff):
            out.append(cur)
    return out


# -- truncated sums and intervals ------------------------------------------


@dataclass
class WeightedSum:
    """Truncated expansion value with a rigorous bound on the omitted mass."""

    value: float
    tail_bound: float
    budget: int

    def __post_init__(self) -> None:
        if self.value < 0 or self.tail_bound < 0:
            raise ValueError("value and tail bound must be nonnegative")

    @property
    def interval(self) -> tuple[float, float]:
        return (self.value, self.value + self.tail_bound)


def poisson_tail(budget: int, rate: float) -> float:
    """P[Poisson(rate) > budget]."""
    if rate == 0.0:
        return 0.0
    return float(stats.poisson.sf(budget, rate))


def partition_sum(
    interactions: InteractionSet,
    gamma: Chain | None,
    j: int,
    budget: int,
    enum_limit: int = DEFAULT_ENUM_LIMIT,
) -> WeightedSum:
    """Sum of current weights up to the occupancy budget, with Poissonized tail.

    The unconstrained mass above the budget is exp(Lambda) * P[Poisson(Lambda) > M]
    with Lambda the sum of all term couplings; dropping the constraints only
    increases the omitted mass, so this bounds the truncation error.
    """
    lam = interactions.coupling_sum
    branch_sums: dict[int, list[float]] = {}
    for cur in enumerate_currents(interactions, gamma, j, budget, enum_limit):
        first = int(cur.occ[0]) if interactions.n_terms else 0
        branch_sums.setdefault(first, []).append(cur.weight())
    value = math.fsum(math.fsum(branch_sums[b]) for b in sorted(branch_sums))
    tail = math.exp(lam) * poisson_tail(budget, lam)
    return WeightedSum(value=value, tail_bound=tail, budget=budget)


@dataclass
class CurrentExpectation:
    """Rigorous enclosure of a Wilson expectation from truncated current sums."""

    lo: float
    hi: float
    numerator: WeightedSum | None
    denominator: WeightedSum | None
    exact_zero: bool = False

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def halfwidth(self) -> float:
        return 0.5 * (self.hi - self.lo)


def divisibility_certificate(gamma: Chain, j: int, k: int, kappa: float) -> bool:
    """True when the constrained current set of j*gamma is provably empty.

    For an open path the constraint forces k * (edge divergence) to cancel the
    path boundary of weight j, which is impossible unless k >= 1 divides j and
    the edge terms are actually present (kappa > 0).
    """
    if j < 1 or not gamma or _is_closed(gamma):
        return False
    return kappa == 0.0 or k == 0 or j % k != 0


def _is_closed(gamma: Chain) -> bool:
    bdry: dict[CellKey, int] = {}
    from .dec import edge_boundary_cells

    for key, c in gamma.coeffs.items():
        for cell in edge_boundary_cells(key):
            bdry[cell.key] = bdry.get(cell.key, 0) + c * cell.sign
    return not any(bdry.values())


def expectation_via_currents(
    complex_: Complex,
    gamma: Chain,
    j: int,
    k: int,
    beta: float,
    kappa: float,
    budget: int,
    enum_limit: int = DEFAULT_ENUM_LIMIT,
) -> CurrentExpectation:
    """Enclose <W_{j gamma}> between truncated current sums and their tails."""
    if divisibility_certificate(gamma, j, k, kappa):
        return CurrentExpectation(0.0, 0.0, None, None, exact_zero=True)
    interactions = charged_interactions(complex_, beta, kappa, k)
    num = partition_sum(interactions, gamma, j, budget, enum_limit)
    den = partition_sum(interactions, None, 0, budget, enum_limit)
    if den.value <= 0.0:
        raise GuardError("denominator interval contains 0; increase the budget")
    lo = num.value / (den.value + den.tail_bound)
    hi = (num.value + num.tail_bound) / den.value
    return CurrentExpectation(lo, hi, num, den)


# -- explicit witnesses ------------------------------------------------------


def line_witness(interactions: InteractionSet, gamma: PathChain | Chain, j: int) -> Current:
    """Edge-only current cancelling j*gamma: occupation j/k on each reversed path edge.

    Its weight (kappa^(j/k) / (j/k)!)^|gamma| is positive, witnessing that the
    constrained set is nonempty whenever the charge divides j.
    """
    k = interactions.meta.get("k")
    if interactions.meta.get("kind") != "charged" or not interactions.meta.get("kappa"):
        raise ValueError("line witness needs a charged interaction set with kappa > 0")
    if k < 1 or j % k != 0:
        raise ValueError(f"charge {k} does not divide {j}")
    occ = np.zeros(interactions.n_terms, dtype=np.int64)
    for key, c in gamma.coeffs.items():
        sign = -1 if c > 0 else 1  # occupy the reversed orientation
        t = interactions.term_for_cell(1, key, sign)
        occ[t] = (j // k) * abs(c)
    return Current(interactions, occ)


def surface_witness(interactions: InteractionSet, loop: PathChain, j: int) -> Current:
    """Plaquette-only current filling a planar rectangular loop with multiplicity j.

    Occupies each spanning-disc plaquette against the disc orientation so that
    interior edge contributions cancel pairwise and the rim cancels j*loop;
    the weight is (beta^j / j!)^area.
    """
    if interactions.meta.get("kind") != "charged" or not interactions.meta.get("beta"):
        raise ValueError("surface witness needs a charged interaction set with beta > 0")
    if not loop.is_loop:
        raise ValueError("surface witness requires a closed loop")
    disc = _rectangle_disc(loop)
    complex_ = interactions.complex
    disc_chain = Chain(2, {p: 1 for p in disc})
    complex_.check_chain(disc_chain)
    rim = complex_.boundary(disc_chain)
    if rim == Chain(1, dict(loop.coeffs)):
        orientation = -1
    elif rim == -Chain(1, dict(loop.coeffs)):
        orientation = 1
    else:
        raise ValueError("loop is not the boundary of its spanning rectangle")
    occ = np.zeros(interactions.n_terms, dtype=np.int64)
    for p in disc:
        occ[interactions.term_for_cell(2, p, orientation)] = j
    return Current(interactions, occ)


def _rectangle_disc(loop: PathChain) -> list[CellKey]:
    """Plaquettes of the axis-aligned rectangle spanned by a rectangular loop."""
    axes: dict[int, set[int]] = {}
    anchors = []
    for (anchor, (axis,)) in loop.coeffs:
        axes.setdefault(axis, set()).update((anchor[axis], anchor[axis] + 1))
        anchors.append(anchor)
    if len(axes) != 2:
        raise ValueError("loop must span exactly two axes")
    (a, sa), (b, sb) = sorted(axes.items())
    base = list(anchors[0])
    fixed = [(ax, base[ax]) for ax in range(len(base)) if ax not in (a, b)]
    if any(anchor[ax] != v for anchor in anchors for ax, v in fixed):
        raise ValueError("loop is not planar")
    disc = []
    for u in range(min(sa), max(sa)):
        for v in range(min(sb), max(sb)):
            site = list(base)
            site[a], site[b] = u, v
            disc.append((tuple(site), (a, b)))
    expected = (max(sa) - min(sa)) * (max(sb) - min(sb))
    if loop.length != 2 * (max(sa) - min(sa)) + 2 * (max(sb) - min(sb)) or len(disc) != expected:
        raise ValueError("loop is not an axis-aligned rectangle")
    return disc


# -- analytic confinement bound ----------------------------------------------


@dataclass
class BoundReport:
    """Asymptotic-form analytic lower bound on the MF ratio in the small-beta regime."""

    a: float
    valid: bool
    lower_bound: float
    R_n: int = 0
    T_n: int = 0

    def __post_init__(self) -> None:
        if self.valid and not self.lower_bound <= 1.0:
            raise ValueError("a valid lower bound cannot exceed 1")


def confinement_smallness(beta: float, kappa: float, j: int, k: int, m: int) -> float:
    """a = (1 + 16(m-1))^2 * (e^(j*beta/k) - 1) * e^(4*kappa)."""
    if min(beta, kappa) < 0:
        raise ValueError("couplings must be nonnegative")
    if k < 1 or j < 1 or j % k != 0:
        raise ValueError(f"need k >= 1 dividing j >= 1, got k={k}, j={j}")
    if m < 2:
        raise ValueError("lattice dimension must be >= 2")
    return (1 + 16 * (m - 1)) ** 2 * math.expm1(j * beta / k) * math.exp(4 * kappa)


def confinement_lower_bound(
    beta: float, kappa: float, j: int, k: int, R: int, T: int, n: int, m: int
) -> BoundReport:
    """1 - 2a/(1-a)^2 - T_n a^{R_n}/(1-a) with T_n = T*n, R_n = R*n.

    Valid only when a < 1; the vanishing-in-n correction inside a is dropped
    (asymptotic form), and the report is returned as-is even when the bound is
    negative and therefore vacuous.
    """
    if min(R, T, n) < 1:
        raise ValueError("R, T, n must all be >= 1")
    a = confinement_smallness(beta, kappa, j, k, m)
    if not a < 1.0:
        return BoundReport(a=a, valid=False, lower_bound=float("-inf"), R_n=R * n, T_n=T * n)
    lb = 1.0 - 2.0 * a / (1.0 - a) ** 2 - (T * n) * a ** (R * n) / (1.0 - a)
    return BoundReport(a=a, valid=True, lower_bound=lb, R_n=R * n, T_n=T * n)


# -- serialization -----------------------------------------------------------


def current_to_text(current: Current) -> str:
    """One line per occupied oriented cell: ``dim anchor dirs sign count``."""
    lines = []
    for (dim, key, sign), count in sorted(current.by_cell().items()):
        anchor, dirs = key
        a = ",".join(str(x) for x in anchor)
        d = ",".join(str(x) for x in dirs)
        lines.append(f"{dim} {a} {d} {sign} {count}")
    return "\n".join(lines) + ("\n" if lines else "")


def current_from_text(text: str, interactions: InteractionSet) -> Current:
    occ = np.zeros(interactions.n_terms, dtype=np.int64)
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"malformed current line: {line!r}")
        dim, anchor_s, dirs_s, sign_s, count_s = parts
        anchor = tuple(int(x) for x in anchor_s.split(","))
        dirs = tuple(int(x) for x in dirs_s.split(",")) if dirs_s else ()
        t = interactions.term_for_cell(int(dim), (anchor, dirs), int(sign_s))
        occ[t] = int(count_s)
    return Current(interactions, occ)
