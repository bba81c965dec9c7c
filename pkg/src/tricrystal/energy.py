"""Hamiltonian evaluation, incremental energy differences for proposed moves,
and the exact decomposition of the energy gap over present triangles and
boundary edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .configuration import Configuration, EdgeClass, classify_edges
from .geometry import dist_so2
from .lattice import DIR_VECTORS, DOWN, TRIANGLE_AREA, TRI_EDGE_VECTORS, UP
from .potential import eval_v

DISPLACE = "displace"
CREATE = "create"
ANNIHILATE = "annihilate"


@dataclass
class Move:
    """A proposed single-site update.

    ``displacement`` is the new displacement for displace moves and the
    inserted particle's displacement for annihilate (hole -> particle) moves;
    create (particle -> hole) moves carry none.
    """

    kind: str
    site: tuple
    displacement: complex | None = None


@dataclass
class EnergyBreakdown:
    bond_sum: float
    defect_term: float
    total: float
    triangle_contributions: dict
    boundary_edge_sum: float


def standard_energy(config: Configuration) -> float:
    """Energy of the standard configuration: 3 N^2 V(l)."""
    return 3.0 * config.lattice.n_sites * eval_v(config.spec, config.spec.l)


def _present_bond_lengths(config: Configuration):
    """Lengths of present bonds plus the presence mask, one entry per edge."""
    lat = config.lattice
    u = config.ueff_array()
    ok = config.present_array()
    ends = lat.edge_endpoint_array
    both = ok[ends[:, 0]] & ok[ends[:, 1]]
    bond = config.spec.l * lat.edge_direction_vectors + u[ends[:, 1]] - u[ends[:, 0]]
    return np.abs(bond), both


def _triangle_sides(config: Configuration):
    """Side lengths (a1, a2, a3) of every image triangle, vectorized."""
    lat = config.lattice
    u = config.ueff_array()
    c = lat.tri_corner_array
    l = config.spec.l
    n = lat.n_sites
    a1 = np.empty(2 * n)
    a2 = np.empty(2 * n)
    a3 = np.empty(2 * n)
    for orient, sl in ((UP, slice(0, n)), (DOWN, slice(n, 2 * n))):
        d1, d2 = TRI_EDGE_VECTORS[orient]
        cc = c[sl]
        e1 = l * d1 + u[cc[:, 1]] - u[cc[:, 0]]
        e2 = l * d2 + u[cc[:, 2]] - u[cc[:, 0]]
        a1[sl] = np.abs(e2 - e1)
        a2[sl] = np.abs(e2)
        a3[sl] = np.abs(e1)
    return a1, a2, a3


def boundary_edge_term(config: Configuration) -> float:
    """Half-sum of V(bond) - V(l) over boundary edges."""
    spec = config.spec
    v_l = eval_v(spec, spec.l)
    r, _ = _present_bond_lengths(config)
    classes = classify_edges(config)
    lat = config.lattice
    total = 0.0
    for e in range(lat.n_edges):
        if classes[lat.edge_of_id(e)] is EdgeClass.BOUNDARY:
            total += eval_v(spec, float(r[e])) - v_l
    return 0.5 * total


def hamiltonian(config: Configuration) -> EnergyBreakdown:
    """Pair energy over present bonds plus m per defect, with the triangle
    and boundary-edge decomposition terms."""
    spec = config.spec
    lat = config.lattice
    r, both = _present_bond_lengths(config)
    out_of_domain = both & ((r < spec.r_min - 1e-12) | (r > spec.r_max + 1e-12))
    if np.any(out_of_domain):
        e = int(np.nonzero(out_of_domain)[0][0])
        raise ValueError(
            f"bond at edge {lat.edge_of_id(e)} has length {float(r[e]):.6g} "
            f"outside the potential domain [{spec.r_min:.6g}, {spec.r_max:.6g}]"
        )
    bond_sum = float(np.sum(eval_v(spec, r[both])))
    defect_term = spec.m * len(config.defects)

    v_l = eval_v(spec, spec.l)
    a1, a2, a3 = _triangle_sides(config)
    mask = config.present_triangle_mask()
    contribs = {}
    if np.any(mask):
        va = eval_v(spec, a1[mask]) + eval_v(spec, a2[mask]) + eval_v(spec, a3[mask])
        vals = 0.5 * (va - 3.0 * v_l)
        for t, val in zip(np.nonzero(mask)[0], vals):
            contribs[lat.triangle_of_id(int(t))] = float(val)

    return EnergyBreakdown(
        bond_sum=bond_sum,
        defect_term=defect_term,
        total=bond_sum + defect_term,
        triangle_contributions=contribs,
        boundary_edge_sum=boundary_edge_term(config),
    )


def energy_gap(config: Configuration) -> float:
    """H(config) - H(standard configuration)."""
    return hamiltonian(config).total - standard_energy(config)


def decomposition_sides(config: Configuration):
    """Both sides of the exact energy-gap identity.

    Left: gap + (6 V(l) - m) |defects|, from the bond sum.  Right: half the
    present-triangle side-length excess plus the boundary-edge half-sum.
    The two sides are computed along independent paths.
    """
    spec = config.spec
    breakdown = hamiltonian(config)
    v_l = eval_v(spec, spec.l)
    k = len(config.defects)
    lhs = breakdown.total - standard_energy(config) + (6.0 * v_l - spec.m) * k
    rhs = sum(breakdown.triangle_contributions.values()) + breakdown.boundary_edge_sum
    return lhs, rhs


def decomposition_residual(config: Configuration) -> float:
    lhs, rhs = decomposition_sides(config)
    return abs(lhs - rhs)


def rigidity_terms(config: Configuration):
    """(energy gap, area-weighted squared SO(2) distance of l^-1 grad, defects)."""
    gap = energy_gap(config)
    jac = config.jacobian_field() / config.spec.l
    rig = TRIANGLE_AREA * float(np.sum(dist_so2(jac) ** 2))
    return gap, rig, len(config.defects)


def mean_jacobian(config: Configuration) -> np.ndarray:
    """Average Jacobian over all triangles; exactly l*id for periodic states."""
    return config.jacobian_field().mean(axis=0)


# -- incremental differences ------------------------------------------------------


def _delta_displace(config: Configuration, i: int, u_new: complex) -> float:
    """Energy change from moving present site ``i``; +inf on a hard-core hit."""
    lat = config.lattice
    spec = config.spec
    l = spec.l
    r_lo, r_hi = spec.r_min, spec.r_max
    v = spec.scalar_v()
    u_old = config.disp[i]
    delta = 0.0
    for d, j in enumerate(lat.neighbor_ids[i]):
        if not config.present[j]:
            continue
        step = l * DIR_VECTORS[d] + config.disp[j]
        r_new = abs(step - u_new)
        if r_new <= r_lo or r_new >= r_hi:
            return math.inf
        delta += v(r_new) - v(abs(step - u_old))
    return delta


def _delta_create(config: Configuration, i: int) -> float:
    """Energy change from removing the particle at ``i`` (six bonds -> m)."""
    lat = config.lattice
    spec = config.spec
    v = spec.scalar_v()
    total = spec.m
    for d, j in enumerate(lat.neighbor_ids[i]):
        if not config.present[j]:
            return math.inf  # a hole neighbor: the move is invalid
        total -= v(abs(spec.l * DIR_VECTORS[d] + config.disp[j] - config.disp[i]))
    return total


def _delta_annihilate(config: Configuration, i: int, u_new: complex) -> float:
    """Energy change from inserting a particle at hole ``i`` with displacement
    ``u_new``; +inf when a new bond leaves the hard-core window."""
    lat = config.lattice
    spec = config.spec
    v = spec.scalar_v()
    r_lo, r_hi = spec.r_min, spec.r_max
    total = -spec.m
    for d, j in enumerate(lat.neighbor_ids[i]):
        if not config.present[j]:
            return math.inf
        r = abs(spec.l * DIR_VECTORS[d] + config.disp[j] - u_new)
        if r <= r_lo or r >= r_hi:
            return math.inf
        total += v(r)
    return total


def energy_delta(config: Configuration, move: Move) -> float:
    """H(after move) - H(before move) from the affected bonds only.

    Hard-core violations (a bond leaving the open window (1-alpha, 1+alpha))
    signal rejection through an infinite return value, not an exception.
    """
    i = config.lattice.site_id(*move.site)
    if move.kind == DISPLACE:
        if not config.present[i]:
            return math.inf
        return _delta_displace(config, i, move.displacement)
    if move.kind == CREATE:
        if not config.present[i]:
            return math.inf
        return _delta_create(config, i)
    if move.kind == ANNIHILATE:
        if config.present[i]:
            return math.inf
        return _delta_annihilate(config, i, move.displacement)
    raise ValueError(f"unknown move kind {move.kind!r}")


def apply_move(config: Configuration, move: Move):
    """Mutate ``config`` according to an accepted move."""
    i = config.lattice.site_id(*move.site)
    if move.kind == DISPLACE:
        config.set_displacement(i, move.displacement)
    elif move.kind == CREATE:
        config.make_hole(i)
    elif move.kind == ANNIHILATE:
        config.fill_site(i, move.displacement)
    else:
        raise ValueError(f"unknown move kind {move.kind!r}")
