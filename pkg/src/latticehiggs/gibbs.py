"""Metropolis sampling of the charged Gibbs measure and Wilson estimators.

The energy of a link configuration sigma is

    H(sigma) = -2 beta sum_{p in C_2^+} cos(d sigma(p))
               -2 kappa sum_{e in C_1^+} cos(k sigma(e)),

the factor 2 folding both cell orientations into one cosine.  This rescales
(beta, kappa) by a factor of two relative to conventions that sum positive
cells only; all expansions in this package use the same convention.

Sweeps update every link exactly once with a symmetric uniform angle proposal
and the local energy difference, so detailed balance holds link by link.
Links are processed in colour classes (direction plus anchor parity) whose
members never share a plaquette; each class updates as one vectorized batch,
which equals performing its single-link updates in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dec import CellKey, Chain, Complex
from .errors import ConfigError, GuardError

TWO_PI = 2.0 * math.pi


@dataclass
class ModelParams:
    """Couplings and charge of the model on a fixed complex.

    k = 0 makes the matter term a constant (pure gauge theory up to an
    additive constant); kappa = 0 does the same.
    """

    beta: float
    kappa: float
    k: int
    complex: Complex

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ConfigError(f"beta must be finite and >= 0, got {self.beta}")
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise ConfigError(f"kappa must be finite and >= 0, got {self.kappa}")
        if self.k < 0 or int(self.k) != self.k:
            raise ConfigError(f"charge k must be a nonnegative integer, got {self.k}")


@dataclass
class SamplerConfig:
    sweeps: int
    burn_in: int
    thin: int = 1
    seed: int = 0
    proposal_width: float = 1.0
    bins: int = 16

    def __post_init__(self) -> None:
        if not (self.sweeps > self.burn_in >= 0):
            raise ConfigError("need sweeps > burn_in >= 0")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.bins < 8:
            raise ConfigError("bins must be >= 8")
        if not (0.0 < self.proposal_width <= math.pi):
            raise ConfigError("proposal width must lie in (0, pi]")


class LinkField:
    """One angle in [-pi, pi) per positive edge; sigma(-e) = -sigma(e)."""

    def __init__(self, complex_: Complex, values: np.ndarray | None = None):
        self.complex = complex_
        if values is None:
            values = np.zeros(len(complex_.edges))
        values = np.asarray(values, dtype=float)
        if values.shape != (len(complex_.edges),):
            raise ValueError("one angle per positive edge required")
        self.values = wrap(values)

    @classmethod
    def random(cls, complex_: Complex, rng: np.random.Generator) -> "LinkField":
        return cls(complex_, rng.uniform(-math.pi, math.pi, len(complex_.edges)))

    def angle(self, chain: Chain) -> float:
        """sigma evaluated on an edge chain (not wrapped)."""
        return float(
            sum(c * self.values[self.complex.edge_index[k]] for k, c in chain.coeffs.items())
        )

    def copy(self) -> "LinkField":
        return LinkField(self.complex, self.values.copy())


def wrap(x):
    return (np.asarray(x) + math.pi) % TWO_PI - math.pi


@dataclass
class Estimate:
    """Monte Carlo mean with binned standard error."""

    mean: float
    stderr: float
    n_samples: int
    autocorrelation_hint: float = 1.0

    def __post_init__(self) -> None:
        if self.stderr < 0 or self.n_samples < 1:
            raise ValueError("stderr must be >= 0 and n_samples >= 1")


@dataclass
class WilsonEstimate(Estimate):
    imag_mean: float = 0.0
    imag_stderr: float = 0.0


# -- lattice geometry for sweeps ----------------------------------------------


class _Geometry:
    """Incidence arrays and colour classes, computed once per complex."""

    def __init__(self, cx: Complex):
        n_e, n_p = len(cx.edges), len(cx.plaquettes)
        self.plaq_edge_idx = np.zeros((n_p, 4), dtype=np.int64)
        self.plaq_edge_sign = np.zeros((n_p, 4))
        for pi, row in enumerate(cx.plaq_edges):
            for slot, (ei, s) in enumerate(row):
                self.plaq_edge_idx[pi, slot] = ei
                self.plaq_edge_sign[pi, slot] = s
        max_deg = max((len(r) for r in cx.edge_plaqs), default=0)
        # scratch plaquette slot n_p absorbs the padding
        self.edge_plaq_idx = np.full((n_e, max_deg), n_p, dtype=np.int64)
        self.edge_plaq_sign = np.zeros((n_e, max_deg))
        for ei, row in enumerate(cx.edge_plaqs):
            for slot, (pi, s) in enumerate(row):
                self.edge_plaq_idx[ei, slot] = pi
                self.edge_plaq_sign[ei, slot] = s
        classes: dict[tuple, list[int]] = {}
        for ei, (anchor, (d,)) in enumerate(cx.edges):
            key = (d, tuple(a % 2 for a in anchor))
            classes.setdefault(key, []).append(ei)
        self.classes = [np.array(classes[k], dtype=np.int64) for k in sorted(classes)]
        self.n_plaq = n_p


def _geometry(cx: Complex) -> _Geometry:
    geo = getattr(cx, "_gibbs_geometry", None)
    if geo is None:
        geo = _Geometry(cx)
        cx._gibbs_geometry = geo
    return geo


def hamiltonian(sigma: LinkField, params: ModelParams) -> float:
    """-2 beta sum cos(d sigma(p)) - 2 kappa sum cos(k sigma(e)) over positive cells."""
    geo = _geometry(params.complex)
    plaq_theta = (sigma.values[geo.plaq_edge_idx] * geo.plaq_edge_sign).sum(axis=1)
    return float(
        -2.0 * params.beta * np.cos(plaq_theta).sum()
        - 2.0 * params.kappa * np.cos(params.k * sigma.values).sum()
    )


class GibbsSampler:
    """Stateful single-chain Metropolis sampler."""

    def __init__(
        self,
        params: ModelParams,
        config: SamplerConfig,
        rng: np.random.Generator | None = None,
        sigma: LinkField | None = None,
    ):
        self.params = params
        self.config = config
        self.geo = _geometry(params.complex)
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.sigma = sigma.values.copy() if sigma is not None else np.zeros(
            len(params.complex.edges)
        )
        self.width = config.proposal_width
        self.sweeps_done = 0
        self._proposed = 0
        self._accepted = 0
        self._refresh_plaq_theta()

    def _refresh_plaq_theta(self) -> None:
        pt = (self.sigma[self.geo.plaq_edge_idx] * self.geo.plaq_edge_sign).sum(axis=1)
        self.plaq_theta = np.append(pt, 0.0)  # scratch slot for padding

    def sweep(self) -> None:
        """One full sweep: every link proposed exactly once."""
        beta, kappa, k = self.params.beta, self.params.kappa, self.params.k
        for idx in self.geo.classes:
            theta = self.sigma[idx]
            prop = wrap(theta + self.rng.uniform(-self.width, self.width, idx.size))
            shift = (prop - theta)[:, None] * self.geo.edge_plaq_sign[idx]
            pt = self.plaq_theta[self.geo.edge_plaq_idx[idx]]
            d_energy = -2.0 * beta * (np.cos(pt + shift) - np.cos(pt)).sum(axis=1)
            d_energy -= 2.0 * kappa * (np.cos(k * prop) - np.cos(k * theta))
            u = self.rng.random(idx.size)
            accept = u < np.exp(np.minimum(-d_energy, 0.0))
            self.sigma[idx[accept]] = prop[accept]
            self.plaq_theta[self.geo.edge_plaq_idx[idx[accept]]] += shift[accept]
            self._proposed += idx.size
            self._accepted += int(accept.sum())
        self.sweeps_done += 1
        if self.sweeps_done % 128 == 0:
            self._refresh_plaq_theta()

    def local_energy_delta(self, edge: int, new_angle: float) -> float:
        """Energy change of setting one link, from local incidence only."""
        theta = self.sigma[edge]
        shift = (new_angle - theta) * self.geo.edge_plaq_sign[edge]
        pt = self.plaq_theta[self.geo.edge_plaq_idx[edge]]
        d = -2.0 * self.params.beta * (np.cos(pt + shift) - np.cos(pt)).sum()
        d -= 2.0 * self.params.kappa * (
            math.cos(self.params.k * new_angle) - math.cos(self.params.k * theta)
        )
        return float(d)

    def acceptance_rate(self) -> float:
        return self._accepted / self._proposed if self._proposed else 0.0

    def _tune(self) -> None:
        rate = self.acceptance_rate()
        if rate > 0.6:
            self.width = min(self.width * 1.25, math.pi)
        elif rate < 0.4:
            self.width = max(self.width / 1.25, 1e-3)
        self._proposed = self._accepted = 0

    def run(self, measure, tune: bool = True) -> np.ndarray:
        """Burn in (with width tuning), then record measure(sigma) every thin sweeps."""
        cfg = self.config
        for s in range(cfg.burn_in):
            self.sweep()
            if tune and s % 10 == 9:
                self._tune()
        self._proposed = self._accepted = 0
        rows = []
        for s in range(cfg.sweeps - cfg.burn_in):
            self.sweep()
            if s % cfg.thin == 0:
                rows.append(np.atleast_1d(measure(self.sigma)))
        return np.array(rows)

    def field(self) -> LinkField:
        return LinkField(self.params.complex, self.sigma.copy())


def metropolis_sweep(
    sigma: LinkField,
    params: ModelParams,
    config: SamplerConfig,
    rng: np.random.Generator,
) -> LinkField:
    """One Metropolis sweep as a pure-looking function: returns the updated field."""
    sampler = GibbsSampler(params, config, rng=rng, sigma=sigma)
    sampler.width = config.proposal_width
    sampler.sweep()
    return sampler.field()


# -- observables ---------------------------------------------------------------


@dataclass
class ChainObservable:
    """cos/sin of j * sigma(gamma) for one fixed edge chain."""

    name: str
    edge_idx: np.ndarray
    coeffs: np.ndarray
    j: int

    @classmethod
    def from_chain(cls, cx: Complex, gamma: Chain, j: int, name: str = "wilson"):
        cx.check_chain(gamma)
        keys = sorted(gamma.coeffs)
        idx = np.array([cx.edge_index[k] for k in keys], dtype=np.int64)
        coeffs = np.array([gamma.coeffs[k] for k in keys], dtype=float)
        return cls(name, idx, coeffs, j)

    def measure(self, sigma: np.ndarray) -> tuple[float, float]:
        angle = self.j * float(self.coeffs @ sigma[self.edge_idx])
        return math.cos(angle), math.sin(angle)


@dataclass
class LoopAverageObservable:
    """Average of cos/sin(j * loop angle) over many congruent loop placements."""

    name: str
    edge_idx: np.ndarray  # (placements, loop length)
    coeffs: np.ndarray
    j: int
    perimeter: int
    area: int

    def measure(self, sigma: np.ndarray) -> tuple[float, float]:
        angles = self.j * (sigma[self.edge_idx] * self.coeffs).sum(axis=1)
        return float(np.cos(angles).mean()), float(np.sin(angles).mean())


def loop_placements(
    cx: Complex, extent: tuple[int, int], margin: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Edge indices and signs of every axis-aligned (w x h) rectangle placement
    whose loop stays at least ``margin`` sites away from the box faces, over
    all coordinate planes (both side orders)."""
    from itertools import combinations, product

    lo, hi = cx.bbox
    m = cx.m
    w0, h0 = extent
    rows_idx, rows_sgn = [], []
    shapes = {(w0, h0), (h0, w0)}
    for a, b in combinations(range(m), 2):
        for w, h in shapes:
            ranges = []
            ok = True
            for axis in range(m):
                span = w if axis == a else h if axis == b else 0
                lo_c, hi_c = lo[axis] + margin, hi[axis] - margin - span
                if lo_c > hi_c:
                    ok = False
                    break
                ranges.append(range(lo_c, hi_c + 1))
            if not ok:
                continue
            for corner in product(*ranges):
                idx, sgn = [], []
                x = list(corner)
                for step_axis, step, count in ((a, 1, w), (b, 1, h), (a, -1, w), (b, -1, h)):
                    for _ in range(count):
                        if step == 1:
                            key = (tuple(x), (step_axis,))
                            x[step_axis] += 1
                        else:
                            x[step_axis] -= 1
                            key = (tuple(x), (step_axis,))
                        idx.append(cx.edge_index[key])
                        sgn.append(step)
                rows_idx.append(idx)
                rows_sgn.append(sgn)
    if not rows_idx:
        raise GuardError(
            f"no {w0}x{h0} placements with margin {margin} fit the box {lo}..{hi}"
        )
    return np.array(rows_idx, dtype=np.int64), np.array(rows_sgn, dtype=float)


def loop_average_observable(
    cx: Complex, extent: tuple[int, int], j: int, margin: int = 1
) -> LoopAverageObservable:
    idx, sgn = loop_placements(cx, extent, margin)
    w, h = extent
    return LoopAverageObservable(
        f"loop{w}x{h}:j{j}", idx, sgn, j, perimeter=2 * (w + h), area=w * h
    )


def run_observables(
    params: ModelParams, config: SamplerConfig, observables: list
) -> np.ndarray:
    """Sample all observables from one chain: array (n_meas, 2 * n_obs) of cos/sin."""

    def measure(sigma: np.ndarray) -> np.ndarray:
        out = np.empty(2 * len(observables))
        for i, obs in enumerate(observables):
            out[2 * i], out[2 * i + 1] = obs.measure(sigma)
        return out

    sampler = GibbsSampler(params, config)
    return sampler.run(measure)


# -- error analysis -------------------------------------------------------------


def binned_stderr(samples: np.ndarray, min_bins: int) -> tuple[float, float, int]:
    """Standard error from bin means, doubling the bin size while >= min_bins bins.

    Returns (stderr, autocorrelation hint, final bin size); the hint is the
    variance inflation relative to the naive independent-sample error.
    """
    n = len(samples)
    if n < min_bins:
        raise ConfigError(f"{n} samples cannot fill {min_bins} bins")
    naive = samples.std(ddof=1) / math.sqrt(n) if n > 1 else 0.0
    size = 1
    stderr = naive
    while n // (2 * size) >= min_bins:
        size *= 2
        nb = n // size
        means = samples[: nb * size].reshape(nb, size).mean(axis=1)
        stderr = means.std(ddof=1) / math.sqrt(nb)
    hint = (stderr / naive) ** 2 if naive > 0 else 1.0
    return float(stderr), float(hint), size


def binned_estimate(samples: np.ndarray, min_bins: int) -> Estimate:
    stderr, hint, _ = binned_stderr(samples, min_bins)
    return Estimate(float(samples.mean()), stderr, len(samples), hint)


def merge_estimates(estimates: list[Estimate]) -> Estimate:
    """Inverse-variance pooling of estimates from independent chains."""
    if not estimates:
        raise ValueError("nothing to merge")
    if len(estimates) == 1:
        return estimates[0]
    w = np.array([1.0 / e.stderr**2 for e in estimates])
    mean = float(sum(wi * e.mean for wi, e in zip(w, estimates)) / w.sum())
    return Estimate(
        mean,
        float(1.0 / math.sqrt(w.sum())),
        sum(e.n_samples for e in estimates),
        max(e.autocorrelation_hint for e in estimates),
    )


def jackknife_ratio(
    w1: np.ndarray, w2: np.ndarray, den: np.ndarray, min_bins: int
) -> tuple[float, float]:
    """Leave-one-bin-out error of (mean w1 * mean w2) / mean den on a joint chain."""
    n = len(w1)
    _, _, size = binned_stderr(den, min_bins)
    nb = n // size
    bins = [x[: nb * size].reshape(nb, size).mean(axis=1) for x in (w1, w2, den)]
    b1, b2, bd = bins
    full = b1.mean() * b2.mean() / bd.mean()
    jack = np.empty(nb)
    for i in range(nb):
        mask = np.arange(nb) != i
        jack[i] = b1[mask].mean() * b2[mask].mean() / bd[mask].mean()
    se = math.sqrt((nb - 1) / nb * ((jack - jack.mean()) ** 2).sum())
    return float(full), float(se)


# -- estimators ------------------------------------------------------------------


def _wilson_from_samples(cos_s: np.ndarray, sin_s: np.ndarray, bins: int) -> WilsonEstimate:
    re = binned_estimate(cos_s, bins)
    im = binned_estimate(sin_s, bins)
    return WilsonEstimate(
        re.mean, re.stderr, re.n_samples, re.autocorrelation_hint,
        imag_mean=im.mean, imag_stderr=im.stderr,
    )


def estimate_wilson(
    gamma: Chain, j: int, params: ModelParams, config: SamplerConfig
) -> WilsonEstimate:
    """<Re exp(i j sigma(gamma))> with binned errors; the imaginary part is
    recorded and must vanish within error by the sign-flip symmetry."""
    obs = ChainObservable.from_chain(params.complex, gamma, j)
    samples = run_observables(params, config, [obs])
    return _wilson_from_samples(samples[:, 0], samples[:, 1], config.bins)


@dataclass
class MFRatioResult:
    """Charged Marcu-Fredenhagen ratio from one jointly sampled chain."""

    ratio: float
    stderr: float
    status: str  # "ok", "undefined-ratio", or "zero-numerator"
    numerator_1: WilsonEstimate
    numerator_2: WilsonEstimate
    denominator: WilsonEstimate
    n: int
    R_n: int
    T_n: int

    @property
    def num(self) -> float:
        return self.numerator_1.mean * self.numerator_2.mean

    @property
    def num_err(self) -> float:
        return abs(self.numerator_1.mean) * self.numerator_2.stderr + abs(
            self.numerator_2.mean
        ) * self.numerator_1.stderr


def estimate_mf_ratio(
    R: int,
    T: int,
    n: int,
    j: int,
    params: ModelParams,
    config: SamplerConfig,
    plane: tuple[int, int] = (0, 1),
) -> MFRatioResult:
    """r = (W_path * W_path') / W_loop with jackknifed error.

    All three observables are measured on the same chain; the jackknife over
    bins absorbs their correlation.  When the charge does not divide j the
    numerators vanish identically (status "zero-numerator"); when the
    denominator estimate is consistent with zero at three sigma the ratio is
    reported as undefined rather than as a number.
    """
    from .dec import mf_geometry

    gamma, gamma_p = mf_geometry(params.complex, R, T, n, plane)
    loop = gamma + gamma_p
    samples, estimates = _mf_samples(params, config, [(gamma, gamma_p, loop)], j)
    return _mf_result(samples[0], estimates[0], j, params, config, n, R, T)


def _mf_samples(params, config, geometries, j):
    observables = []
    for gamma, gamma_p, loop in geometries:
        observables += [
            ChainObservable.from_chain(params.complex, gamma, j, "path"),
            ChainObservable.from_chain(params.complex, gamma_p, j, "path-mirror"),
            ChainObservable.from_chain(params.complex, loop, j, "loop"),
        ]
    data = run_observables(params, config, observables)
    groups, estimates = [], []
    for g in range(len(geometries)):
        cols = data[:, 6 * g : 6 * g + 6]
        groups.append(cols)
        estimates.append(
            tuple(
                _wilson_from_samples(cols[:, 2 * i], cols[:, 2 * i + 1], config.bins)
                for i in range(3)
            )
        )
    return groups, estimates


def _mf_result(cols, ests, j, params, config, n, R, T) -> MFRatioResult:
    w1, w2, wd = ests
    if params.k == 0 or (params.k >= 1 and j % params.k != 0):
        status, ratio, err = "zero-numerator", math.nan, math.nan
    elif wd.mean < 3.0 * wd.stderr:
        status, ratio, err = "undefined-ratio", math.nan, math.nan
    else:
        ratio, err = jackknife_ratio(cols[:, 0], cols[:, 2], cols[:, 4], config.bins)
        status = "ok"
    return MFRatioResult(ratio, err, status, w1, w2, wd, n, R * n, T * n)


def mf_ratio_series(
    R: int,
    T: int,
    n_values: list[int],
    j: int,
    params: ModelParams,
    config: SamplerConfig,
    plane: tuple[int, int] = (0, 1),
) -> list[MFRatioResult]:
    """All requested n from a single chain (the geometries share samples)."""
    from .dec import mf_geometry

    geometries = []
    for n in n_values:
        gamma, gamma_p = mf_geometry(params.complex, R, T, n, plane)
        geometries.append((gamma, gamma_p, gamma + gamma_p))
    groups, estimates = _mf_samples(params, config, geometries, j)
    return [
        _mf_result(groups[i], estimates[i], j, params, config, n, R, T)
        for i, n in enumerate(n_values)
    ]


def bulk_edge(cx: Complex, min_distance: int = 2) -> CellKey:
    """A positive edge as deep in the box as possible (prefer >= min_distance
    from every face); free boundaries break translation invariance near faces."""
    lo, hi = cx.bbox

    def depth(key: CellKey) -> int:
        (anchor, (d,)) = key
        vals = []
        for axis in range(cx.m):
            top = anchor[axis] + (1 if axis == d else 0)
            vals.append(min(anchor[axis] - lo[axis], hi[axis] - top))
        return min(vals)

    best = max(cx.edges, key=depth)
    return best


def ghs_product_bound(
    gamma: Chain, j: int, params: ModelParams, config: SamplerConfig
) -> Estimate:
    """Statistical lower bound prod_{e in gamma} <W_je> for <W_{j gamma}>, k | j.

    Estimates a single bulk edge once (translation invariance in the bulk) and
    raises it to the path length, with first-order error propagation.
    """
    if params.k < 1 or j % params.k != 0:
        raise ConfigError(f"charge {params.k} must divide j={j}")
    edge = bulk_edge(params.complex)
    single = estimate_wilson(Chain(1, {edge: 1}), j, params, config)
    if single.mean <= 3.0 * single.stderr:
        raise GuardError("single-edge estimate is consistent with zero")
    L = sum(abs(c) for c in gamma.coeffs.values())
    mean = single.mean**L
    stderr = L * single.mean ** (L - 1) * single.stderr
    return Estimate(mean, stderr, single.n_samples, single.autocorrelation_hint)


# -- decay-law fits ---------------------------------------------------------------


@dataclass
class DecayFit:
    perimeter_coefficient: float
    area_coefficient: float
    intercept: float
    perimeter_stderr: float
    area_stderr: float
    covariance: np.ndarray
    rms_residual: float
    residuals: np.ndarray
    excluded: list[tuple[int, str]]

    def separation_sigmas(self) -> float:
        """(area - perimeter coefficient) in combined standard deviations."""
        var = (
            self.covariance[2, 2]
            + self.covariance[1, 1]
            - 2.0 * self.covariance[1, 2]
        )
        return (self.area_coefficient - self.perimeter_coefficient) / math.sqrt(var)


def decay_fit(loops: list[tuple[int, int]], estimates: list[Estimate]) -> DecayFit:
    """Weighted least squares of -log W against (perimeter, area) with intercept.

    Loops whose estimate is consistent with zero at three sigma cannot enter
    the log and are excluded (and reported).  No claim beyond the fitted window.
    """
    if len(loops) != len(estimates):
        raise ValueError("one estimate per loop required")
    rows, y, w, excluded = [], [], [], []
    for i, ((perimeter, area), est) in enumerate(zip(loops, estimates)):
        if est.mean <= 3.0 * est.stderr:
            excluded.append((i, "estimate consistent with zero at 3 sigma"))
            continue
        rows.append([1.0, perimeter, area])
        y.append(-math.log(est.mean))
        w.append((est.mean / est.stderr) ** 2)  # 1/sigma_log^2
    if len(rows) < 4:
        raise ConfigError("need at least 4 usable loops with distinct (perimeter, area)")
    X = np.array(rows)
    if len({tuple(r[1:]) for r in rows}) < 4:
        raise ConfigError("loops must carry at least 4 distinct (perimeter, area) pairs")
    y, w = np.array(y), np.array(w)
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    coef = cov @ (XtW @ y)
    resid = y - X @ coef
    return DecayFit(
        perimeter_coefficient=float(coef[1]),
        area_coefficient=float(coef[2]),
        intercept=float(coef[0]),
        perimeter_stderr=float(math.sqrt(cov[1, 1])),
        area_stderr=float(math.sqrt(cov[2, 2])),
        covariance=cov,
        rms_residual=float(np.sqrt((resid**2).mean())),
        residuals=resid,
        excluded=excluded,
    )


def wilson_loop_scan(
    params: ModelParams,
    config: SamplerConfig,
    extents: list[tuple[int, int]],
    j_values: list[int],
    margin: int = 1,
) -> dict[tuple[tuple[int, int], int], WilsonEstimate]:
    """Translation-averaged loop estimates for several shapes and charges,
    all measured on one chain."""
    observables = []
    keys = []
    for extent in extents:
        idx, sgn = loop_placements(params.complex, extent, margin)
        for j in j_values:
            w, h = extent
            observables.append(
                LoopAverageObservable(
                    f"loop{w}x{h}:j{j}", idx, sgn, j, 2 * (w + h), w * h
                )
            )
            keys.append((extent, j))
    data = run_observables(params, config, observables)
    return {
        key: _wilson_from_samples(data[:, 2 * i], data[:, 2 * i + 1], config.bins)
        for i, key in enumerate(keys)
    }
