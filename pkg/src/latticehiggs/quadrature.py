"""Tensor quadrature over products of angle variables.

Integrands here always take the factor-graph form

    prod_e u_e(theta_e) * prod_b f_b(s_1 theta_{v_1} + ... + s_r theta_{v_r})

with per-variable weights u_e and blocks f_b coupling at most a few variables
(one block per plaquette).  The full tensor sum is contracted group by group:
variables connected through blocks form one dense sub-tensor, everything else
factorizes into scalar one-dimensional sums.  The summation order changes
nothing but floating-point grouping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import GuardError

MAX_GROUP_POINTS = 2**27


def gauss_legendre_rule(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def trapezoid_rule(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Uniform nodes with equal weights: the periodic trapezoid rule on [a, b)."""
    x = a + (b - a) * np.arange(n) / n
    w = np.full(n, (b - a) / n)
    return x, w


RULES = {"legendre": gauss_legendre_rule, "trapezoid": trapezoid_rule}


@dataclass(frozen=True)
class Block:
    """A factor f(sum_i signs[i] * theta_{vars[i]}) coupling a few variables."""

    variables: tuple[int, ...]
    signs: tuple[int, ...]
    func: Callable[[np.ndarray], np.ndarray]


def contract(
    nodes: np.ndarray,
    var_weights: Sequence[np.ndarray],
    blocks: Sequence[Block],
) -> complex:
    """Full tensor sum of the factor-graph integrand.

    ``var_weights[v]`` must already contain the quadrature weights and any
    per-variable factor evaluated on ``nodes``.
    """
    n_vars = len(var_weights)
    parent = list(range(n_vars))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for b in blocks:
        root = find(b.variables[0])
        for v in b.variables[1:]:
            parent[find(v)] = root

    groups: dict[int, list[int]] = {}
    for v in range(n_vars):
        groups.setdefault(find(v), []).append(v)
    blocks_by_group: dict[int, list[Block]] = {}
    for b in blocks:
        blocks_by_group.setdefault(find(b.variables[0]), []).append(b)

    total = 1.0 + 0.0j
    for root, members in sorted(groups.items()):
        group_blocks = blocks_by_group.get(root, [])
        if not group_blocks:
            for v in members:
                total *= complex(np.sum(var_weights[v]))
            continue
        if len(nodes) ** len(members) > MAX_GROUP_POINTS:
            raise GuardError(
                f"quadrature group of {len(members)} coupled angles at "
                f"{len(nodes)} nodes exceeds the point budget"
            )
        axis = {v: i for i, v in enumerate(members)}
        shape = [len(nodes)] * len(members)

        def along(vec: np.ndarray, v: int) -> np.ndarray:
            s = [1] * len(members)
            s[axis[v]] = len(nodes)
            return vec.reshape(s)

        tensor = np.ones(shape, dtype=complex)
        for v in members:
            tensor = tensor * along(var_weights[v], v)
        for b in group_blocks:
            angle = np.zeros(shape)
            for v, s in zip(b.variables, b.signs):
                angle = angle + s * along(nodes, v)
            tensor = tensor * b.func(angle)
        total *= complex(tensor.sum())
    return total


def von_mises_samples(
    rng: np.random.Generator, concentration: float, size: tuple[int, ...] | int
) -> np.ndarray:
    """Samples from the density exp(c*cos(theta)) / (2 pi I_0(c)) on [-pi, pi)."""
    if concentration == 0.0:
        return rng.uniform(-math.pi, math.pi, size)
    return rng.vonmises(0.0, concentration, size)
