"""Discrete exterior calculus on finite cubical complexes.

Cells live on the integer lattice: a d-cell is keyed by its anchor site and
a strictly increasing tuple of spanned axes.  Only positively oriented cells
are stored; the reversed orientation appears transiently as ``sign=-1`` on an
:class:`OrientedCell` or as a negative coefficient in a :class:`Chain`.

A :class:`Complex` is any finite cell set closed under the boundary operator,
so single-plaquette and few-edge instances are first-class citizens next to
the full box ``[-N, N]^m``.  Free boundary conditions throughout: no cell
identification on the faces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product

Site = tuple[int, ...]
CellKey = tuple[Site, tuple[int, ...]]  # (anchor, spanned axes), positive orientation

TWO_PI = 2.0 * math.pi


def wrap_angle(x: float) -> float:
    """Reduce an angle to the fundamental domain [-pi, pi)."""
    y = math.fmod(x + math.pi, TWO_PI)
    if y < 0.0:
        y += TWO_PI
    return y - math.pi


@dataclass(frozen=True)
class OrientedCell:
    """A d-cell of Z^m with an orientation sign.

    ``anchor`` is the lexicographically smallest vertex of the cell and
    ``dirs`` the strictly increasing axes it spans; ``dim == len(dirs)``.
    """

    anchor: Site
    dirs: tuple[int, ...]
    sign: int = 1

    def __post_init__(self) -> None:
        if self.sign not in (-1, 1):
            raise ValueError(f"orientation sign must be +-1, got {self.sign}")
        if any(a >= b for a, b in zip(self.dirs, self.dirs[1:])):
            raise ValueError(f"dirs must be strictly increasing, got {self.dirs}")

    @property
    def dim(self) -> int:
        return len(self.dirs)

    @property
    def key(self) -> CellKey:
        return (self.anchor, self.dirs)

    def __neg__(self) -> "OrientedCell":
        return OrientedCell(self.anchor, self.dirs, -self.sign)

    def vertices(self) -> list[Site]:
        """All lattice sites spanned by the cell."""
        out = []
        for corner in product((0, 1), repeat=len(self.dirs)):
            v = list(self.anchor)
            for axis, step in zip(self.dirs, corner):
                v[axis] += step
            out.append(tuple(v))
        return out


class Chain:
    """Finitely supported integer combination of positively oriented cells.

    Coefficients are stored against positive cell keys; a negative coefficient
    encodes the reversed orientation.  Zero coefficients are dropped eagerly.
    """

    __slots__ = ("dim", "coeffs")

    def __init__(self, dim: int, coeffs: dict[CellKey, int] | None = None):
        self.dim = dim
        self.coeffs: dict[CellKey, int] = {}
        if coeffs:
            for key, c in coeffs.items():
                if c:
                    self.coeffs[key] = self.coeffs.get(key, 0) + c
            self.coeffs = {k: c for k, c in self.coeffs.items() if c}

    @classmethod
    def from_cells(cls, cells: list[OrientedCell]) -> "Chain":
        if not cells:
            raise ValueError("cannot infer dimension from an empty cell list")
        dim = cells[0].dim
        ch = cls(dim)
        for c in cells:
            if c.dim != dim:
                raise ValueError("mixed-dimension cell list")
            ch.coeffs[c.key] = ch.coeffs.get(c.key, 0) + c.sign
        ch.coeffs = {k: v for k, v in ch.coeffs.items() if v}
        return ch

    def __getitem__(self, key: CellKey) -> int:
        return self.coeffs.get(key, 0)

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __neg__(self) -> "Chain":
        return Chain(self.dim, {k: -c for k, c in self.coeffs.items()})

    def __add__(self, other: "Chain") -> "Chain":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch in chain addition")
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0) + c
        return Chain(self.dim, out)

    def __sub__(self, other: "Chain") -> "Chain":
        return self + (-other)

    def __rmul__(self, n: int) -> "Chain":
        return Chain(self.dim, {k: n * c for k, c in self.coeffs.items()})

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Chain)
            and self.dim == other.dim
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((self.dim, tuple(sorted(self.coeffs.items()))))

    def __repr__(self) -> str:
        terms = ", ".join(f"{c}*{k}" for k, c in sorted(self.coeffs.items()))
        return f"Chain(dim={self.dim}, {{{terms}}})"

    @property
    def support(self) -> set[CellKey]:
        return set(self.coeffs)

    def pairing(self, other: "Chain") -> int:
        """Coefficient pairing <a, b> = sum over positive cells of a[c]*b[c]."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch in pairing")
        small, big = sorted((self.coeffs, other.coeffs), key=len)
        return sum(c * big.get(k, 0) for k, c in small.items())


def plaquette_boundary_cells(key: CellKey) -> list[OrientedCell]:
    """Oriented boundary edges of a positive plaquette, in traversal order.

    For anchor x spanning (i, j) the square x -> x+e_i -> x+e_i+e_j -> x+e_j
    gives edge signs (+, +, -, -).
    """
    (anchor, (i, j)) = key
    xi = _shift(anchor, i)
    xj = _shift(anchor, j)
    return [
        OrientedCell(anchor, (i,), 1),
        OrientedCell(xi, (j,), 1),
        OrientedCell(xj, (i,), -1),
        OrientedCell(anchor, (j,), -1),
    ]


def edge_boundary_cells(key: CellKey) -> list[OrientedCell]:
    (anchor, (i,)) = key
    return [OrientedCell(_shift(anchor, i), (), 1), OrientedCell(anchor, (), -1)]


def _shift(site: Site, axis: int, step: int = 1) -> Site:
    v = list(site)
    v[axis] += step
    return tuple(v)


def cell_boundary(dim: int, key: CellKey) -> list[OrientedCell]:
    if dim == 2:
        return plaquette_boundary_cells(key)
    if dim == 1:
        return edge_boundary_cells(key)
    if dim == 0:
        return []
    raise ValueError(f"boundary not implemented for {dim}-cells")


class Complex:
    """A boundary-closed set of 0-, 1-, 2-cells of Z^m.

    Stores positively oriented cells only, in sorted order, with the full
    edge/plaquette incidence table.  Immutable after construction.
    """

    def __init__(
        self,
        m: int,
        vertices: set[Site],
        edges: set[CellKey],
        plaquettes: set[CellKey],
    ):
        if m < 1:
            raise ValueError(f"dimension must be >= 1, got {m}")
        self.m = m
        self.vertices: list[Site] = sorted(vertices)
        self.edges: list[CellKey] = sorted(edges)
        self.plaquettes: list[CellKey] = sorted(plaquettes)
        self.vertex_index = {v: i for i, v in enumerate(self.vertices)}
        self.edge_index = {e: i for i, e in enumerate(self.edges)}
        self.plaq_index = {p: i for i, p in enumerate(self.plaquettes)}
        self._validate_closure()

        # plaquette -> [(edge index, incidence sign)] in traversal order,
        # edge -> [(plaquette index, sign)]
        self.plaq_edges: list[list[tuple[int, int]]] = []
        self.edge_plaqs: list[list[tuple[int, int]]] = [[] for _ in self.edges]
        for pi, p in enumerate(self.plaquettes):
            row = []
            for cell in plaquette_boundary_cells(p):
                ei = self.edge_index[cell.key]
                row.append((ei, cell.sign))
                self.edge_plaqs[ei].append((pi, cell.sign))
            self.plaq_edges.append(row)

    def _validate_closure(self) -> None:
        for p in self.plaquettes:
            for cell in plaquette_boundary_cells(p):
                if cell.key not in self.edge_index:
                    raise ValueError(f"plaquette {p} has boundary edge {cell.key} missing")
        vset = set(self.vertex_index)
        for e in self.edges:
            for cell in edge_boundary_cells(e):
                if cell.anchor not in vset:
                    raise ValueError(f"edge {e} has endpoint {cell.anchor} missing")

    # -- constructors ---------------------------------------------------

    @classmethod
    def from_cells(
        cls,
        m: int,
        plaquettes: set[CellKey] = frozenset(),
        edges: set[CellKey] = frozenset(),
        vertices: set[Site] = frozenset(),
    ) -> "Complex":
        """Build the smallest complex containing the given cells."""
        plaqs = set(plaquettes)
        edge_set = set(edges)
        for p in plaqs:
            edge_set.update(c.key for c in plaquette_boundary_cells(p))
        verts = set(vertices)
        for e in edge_set:
            verts.update(c.anchor for c in edge_boundary_cells(e))
        return cls(m, verts, edge_set, plaqs)

    def contains(self, dim: int, key: CellKey) -> bool:
        if dim == 0:
            return key[0] in self.vertex_index
        if dim == 1:
            return key in self.edge_index
        if dim == 2:
            return key in self.plaq_index
        return False

    def check_chain(self, chain: Chain) -> None:
        for key in chain.coeffs:
            if not self.contains(chain.dim, key):
                raise ValueError(f"chain references {chain.dim}-cell {key} outside the complex")

    def cells(self, dim: int) -> list[CellKey]:
        if dim == 0:
            return [(v, ()) for v in self.vertices]
        if dim == 1:
            return list(self.edges)
        if dim == 2:
            return list(self.plaquettes)
        return []

    @property
    def bbox(self) -> tuple[Site, Site]:
        lo = tuple(min(v[a] for v in self.vertices) for a in range(self.m))
        hi = tuple(max(v[a] for v in self.vertices) for a in range(self.m))
        return lo, hi

    # -- operators ------------------------------------------------------

    def boundary(self, chain: Chain) -> Chain:
        """Oriented boundary, extended linearly; satisfies boundary(boundary(c)) = 0."""
        if chain.dim < 1:
            raise ValueError("boundary requires chain dimension >= 1")
        self.check_chain(chain)
        out: dict[CellKey, int] = {}
        for key, coeff in chain.coeffs.items():
            for cell in cell_boundary(chain.dim, key):
                out[cell.key] = out.get(cell.key, 0) + coeff * cell.sign
        return Chain(chain.dim - 1, out)

    def coboundary(self, chain: Chain) -> Chain:
        """Adjoint of the boundary under the coefficient pairing on positive cells."""
        if chain.dim > 1:
            raise ValueError("coboundary implemented for dimensions 0 and 1 only")
        self.check_chain(chain)
        out: dict[CellKey, int] = {}
        if chain.dim == 1:
            for key, coeff in chain.coeffs.items():
                for pi, sign in self.edge_plaqs[self.edge_index[key]]:
                    pkey = self.plaquettes[pi]
                    out[pkey] = out.get(pkey, 0) + coeff * sign
        else:
            for key, coeff in chain.coeffs.items():
                site = key[0]
                for e in self._edges_at(site):
                    # sign of `site` in the boundary of e
                    s = 1 if _shift(e[0], e[1][0]) == site else -1
                    out[e] = out.get(e, 0) + coeff * s
        return Chain(chain.dim + 1, out)

    def _edges_at(self, site: Site) -> list[CellKey]:
        out = []
        for axis in range(self.m):
            up = (site, (axis,))
            if up in self.edge_index:
                out.append(up)
            down = (_shift(site, axis, -1), (axis,))
            if down in self.edge_index:
                out.append(down)
        return out

    def exterior_derivative(self, form: "DiffForm") -> "DiffForm":
        """d(form)(c) = form(boundary c), wrapped to [-pi, pi)."""
        if form.degree > 1:
            raise ValueError("exterior derivative implemented for degrees 0 and 1")
        values = {}
        for key in self.cells(form.degree + 1):
            total = 0.0
            for cell in cell_boundary(form.degree + 1, key):
                total += cell.sign * form[cell.key]
            values[key] = wrap_angle(total)
        return DiffForm(form.degree + 1, values)


@dataclass
class DiffForm:
    """Real-angle valued form: antisymmetric by construction, values in [-pi, pi)."""

    degree: int
    values: dict[CellKey, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = {k: wrap_angle(v) for k, v in self.values.items()}

    def __getitem__(self, key: CellKey) -> float:
        return self.values.get(key, 0.0)

    def evaluate(self, cell: OrientedCell) -> float:
        return wrap_angle(cell.sign * self[cell.key])

    def evaluate_chain(self, chain: Chain) -> float:
        """Angle of the chain: sum of coefficient-weighted values, wrapped."""
        if chain.dim != self.degree:
            raise ValueError("form degree does not match chain dimension")
        return wrap_angle(sum(c * self[k] for k, c in chain.coeffs.items()))


class PathChain(Chain):
    """A {-1,0,1}-chain of edges with connected support and at most two endpoints.

    A path with empty boundary is a loop.
    """

    def __init__(self, complex_: Complex, coeffs: dict[CellKey, int]):
        super().__init__(1, coeffs)
        complex_.check_chain(self)
        bad = [c for c in self.coeffs.values() if c not in (-1, 1)]
        if bad:
            raise ValueError("path coefficients must lie in {-1, 0, 1}")
        if self.coeffs and len(edge_components(self.support)) != 1:
            raise ValueError("path support must be connected")
        b = complex_.boundary(self)
        if any(c not in (-1, 1) for c in b.coeffs.values()) or len(b.coeffs) > 2:
            raise ValueError("path boundary must be two unit-weight vertices or empty")
        self._boundary = b

    @property
    def endpoints(self) -> list[Site]:
        return sorted(k[0] for k in self._boundary.coeffs)

    @property
    def is_loop(self) -> bool:
        return not self._boundary

    @property
    def length(self) -> int:
        return len(self.coeffs)

    @classmethod
    def from_sites(cls, complex_: Complex, sites: list[Site]) -> "PathChain":
        """Path visiting consecutive lattice sites, each step one unit edge."""
        coeffs: dict[CellKey, int] = {}
        for a, b in zip(sites, sites[1:]):
            diff = [(axis, b[axis] - a[axis]) for axis in range(len(a)) if a[axis] != b[axis]]
            if len(diff) != 1 or abs(diff[0][1]) != 1:
                raise ValueError(f"sites {a} -> {b} are not nearest neighbours")
            axis, step = diff[0]
            key = (a, (axis,)) if step == 1 else (_shift(a, axis, -1), (axis,))
            coeffs[key] = coeffs.get(key, 0) + step
        return cls(complex_, coeffs)


def build_box(m: int, N: int) -> Complex:
    """Full cubical complex of [-N, N]^m up to dimension 2."""
    if m < 1 or N < 1:
        raise ValueError(f"need m >= 1 and N >= 1, got m={m}, N={N}")
    rng_full = range(-N, N + 1)
    rng_low = range(-N, N)
    vertices = {tuple(v) for v in product(rng_full, repeat=m)}
    edges: set[CellKey] = set()
    for axis in range(m):
        ranges = [rng_low if a == axis else rng_full for a in range(m)]
        edges.update((tuple(v), (axis,)) for v in product(*ranges))
    plaquettes: set[CellKey] = set()
    for i, j in combinations(range(m), 2):
        ranges = [rng_low if a in (i, j) else rng_full for a in range(m)]
        plaquettes.update((tuple(v), (i, j)) for v in product(*ranges))
    return Complex(m, vertices, edges, plaquettes)


def box_cell_counts(m: int, N: int) -> tuple[int, int, int]:
    """Closed-form (vertices, positive edges, positive plaquettes) of [-N, N]^m."""
    n_v = (2 * N + 1) ** m
    n_e = m * (2 * N) * (2 * N + 1) ** (m - 1)
    n_p = math.comb(m, 2) * (2 * N) ** 2 * (2 * N + 1) ** (m - 2)
    return n_v, n_e, n_p


def edge_components(edge_keys: set[CellKey]) -> list[list[CellKey]]:
    """Connected components of edges under shared endpoints."""
    by_vertex: dict[Site, list[CellKey]] = {}
    for e in edge_keys:
        for cell in edge_boundary_cells(e):
            by_vertex.setdefault(cell.anchor, []).append(e)
    return _components(edge_keys, lambda e: [n for c in edge_boundary_cells(e) for n in by_vertex[c.anchor]])


def adjacency_components(complex_: Complex, cells: set[CellKey], dim: int) -> list[list[CellKey]]:
    """Partition cells of one dimension by connectivity of the shared-boundary graph.

    Two cells are adjacent iff their boundary supports intersect (plaquettes
    meeting only at a vertex are *not* adjacent).  Components are returned in
    lexicographic order of their smallest cell, each sorted internally.
    """
    for key in cells:
        if not complex_.contains(dim, key):
            raise ValueError(f"{dim}-cell {key} not in the complex")
    by_bcell: dict[CellKey, list[CellKey]] = {}
    for c in cells:
        for b in cell_boundary(dim, c):
            by_bcell.setdefault(b.key, []).append(c)
    return _components(cells, lambda c: [n for b in cell_boundary(dim, c) for n in by_bcell[b.key]])


def _components(items: set[CellKey], neighbours) -> list[list[CellKey]]:
    seen: set[CellKey] = set()
    comps = []
    for start in sorted(items):
        if start in seen:
            continue
        stack, comp = [start], []
        seen.add(start)
        while stack:
            cur = stack.pop()
            comp.append(cur)
            for n in neighbours(cur):
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        comps.append(sorted(comp))
    return comps


def mf_geometry(
    complex_: Complex, R: int, T: int, n: int, plane: tuple[int, int] = (0, 1)
) -> tuple[PathChain, PathChain]:
    """The two half-rectangle paths of the Marcu-Fredenhagen ratio.

    Returns (gamma, gamma_prime): gamma runs from x_n down R*n, right T*n and
    up R*n to y_n; gamma_prime is the mirrored half above the x_n--y_n line,
    oriented so that gamma + gamma_prime is the closed T*n by 2*R*n rectangle
    and boundary(gamma) = y_n - x_n = -boundary(gamma_prime).  The rectangle
    is centred at the origin of the chosen coordinate plane.
    """
    if min(R, T, n) < 1:
        raise ValueError("R, T, n must all be >= 1")
    a, b = plane
    if a == b or not (0 <= a < complex_.m) or not (0 <= b < complex_.m):
        raise ValueError(f"invalid coordinate plane {plane} in dimension {complex_.m}")
    width, height = T * n, R * n
    x_left, x_right = -(width // 2), width - width // 2
    lo, hi = complex_.bbox

    def site(u: int, v: int) -> Site:
        s = [0] * complex_.m
        s[a], s[b] = u, v
        return tuple(s)

    for u, v in [(x_left, -height), (x_right, -height), (x_left, height), (x_right, height)]:
        if not (lo[a] <= u <= hi[a] and lo[b] <= v <= hi[b]):
            raise ValueError(
                f"rectangle {width}x{2 * height} exceeds the complex bounding box {lo}..{hi}"
            )

    x_n, y_n = site(x_left, 0), site(x_right, 0)
    down = [site(x_left, -v) for v in range(height + 1)]
    across = [site(u, -height) for u in range(x_left + 1, x_right + 1)]
    up = [site(x_right, -v) for v in range(height - 1, -1, -1)]
    gamma = PathChain.from_sites(complex_, down + across + up)

    up2 = [site(x_right, v) for v in range(height + 1)]
    back = [site(u, height) for u in range(x_right - 1, x_left - 1, -1)]
    down2 = [site(x_left, v) for v in range(height - 1, -1, -1)]
    gamma_prime = PathChain.from_sites(complex_, up2 + back + down2)

    assert complex_.boundary(gamma).coeffs == {(y_n, ()): 1, (x_n, ()): -1}
    return gamma, gamma_prime


def rectangle_loop(
    complex_: Complex,
    corner: Site,
    extent: tuple[int, int],
    plane: tuple[int, int] = (0, 1),
) -> PathChain:
    """Axis-aligned rectangular loop with the given corner and side lengths."""
    a, b = plane
    w, h = extent
    if w < 1 or h < 1:
        raise ValueError("rectangle sides must be >= 1")
    sites = [corner]
    cur = list(corner)
    for step_axis, step, count in ((a, 1, w), (b, 1, h), (a, -1, w), (b, -1, h)):
        for _ in range(count):
            cur[step_axis] += step
            sites.append(tuple(cur))
    return PathChain.from_sites(complex_, sites)


def loop_area(loop: PathChain) -> int:
    """Minimal-rectangle area of a planar rectangular loop (bounding box area)."""
    spans = {}
    for (anchor, (axis,)) in loop.coeffs:
        spans.setdefault(axis, set()).update((anchor[axis], anchor[axis] + 1))
    axes = sorted(spans)
    if len(axes) != 2:
        raise ValueError("loop does not span exactly two axes")
    sides = [max(spans[ax]) - min(spans[ax]) for ax in axes]
    return sides[0] * sides[1]
