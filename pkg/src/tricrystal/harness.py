"""Batch verification of the exact identities and inequality-type estimates
on constructed, sampled, and synthetic inputs, with empirical constants.

Identity checks must hold to floating-point accuracy on every valid
configuration.  Inequality checks never assert particular constants: they
report the extremal empirical ratios and fail only on sign violations or
non-finite values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import energy as energy_mod
from .configuration import (
    Configuration,
    EdgeClass,
    classify_edges,
    near_standard_sample,
    standard_config,
)
from .geometry import best_rotation, dist_so2, rotation
from .lattice import (
    DIR_VECTORS,
    SQRT3_HALF,
    TRIANGLE_AREA,
    LatticeTorus,
)
from .potential import eval_v, pressure_coefficient, with_params
from .version import VERSION

REPORT_SCHEMA = "tricrystal-verify-report-v1"


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    values: dict
    witness: dict | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {"name": self.name, "passed": self.passed, "values": self.values}
        if self.witness is not None:
            d["witness"] = self.witness
        return d


@dataclass
class Report:
    kind: str
    seed: int | None
    params: dict
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckOutcome:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "version": VERSION,
            "kind": self.kind,
            "seed": self.seed,
            "params": self.params,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


# -- exact identities -----------------------------------------------------------------


def total_signed_area(config: Configuration) -> float:
    """Sum of signed image-triangle areas; telescopes to the domain area."""
    return TRIANGLE_AREA * float(np.sum(config.jacobian_dets()))


def boundary_edge_count(config: Configuration) -> int:
    return sum(
        1 for cls in classify_edges(config).values() if cls is EdgeClass.BOUNDARY
    )


def verify_identities(configs, tol_rel: float = 1e-9, seed=None) -> Report:
    """Exact-identity suite: energy decomposition, signed-area telescoping,
    boundary-edge counting, and the mean-Jacobian identity."""
    worst_decomp = 0.0
    worst_area = 0.0
    worst_jac = 0.0
    count_ok = True
    witness = None
    for config in configs:
        lhs, rhs = energy_mod.decomposition_sides(config)
        rel = abs(lhs - rhs) / (1.0 + abs(lhs))
        if rel > worst_decomp:
            worst_decomp = rel
            witness = config.snapshot_dict() if rel > tol_rel else witness

        n, l = config.lattice.n, config.spec.l
        expected = (math.sqrt(3.0) / 2.0) * (l * n) ** 2
        worst_area = max(
            worst_area, abs(total_signed_area(config) - expected) / expected
        )

        mean_jac = energy_mod.mean_jacobian(config)
        dev = float(np.abs(mean_jac - l * np.eye(2)).max()) / l
        worst_jac = max(worst_jac, dev)

        if boundary_edge_count(config) != 6 * len(config.defects):
            count_ok = False
            witness = config.snapshot_dict()

    checks = [
        CheckOutcome(
            "energy-decomposition",
            worst_decomp <= tol_rel,
            {"max_rel_residual": worst_decomp, "tolerance": tol_rel},
            witness=witness,
        ),
        CheckOutcome(
            "area-telescoping",
            worst_area <= tol_rel,
            {"max_rel_residual": worst_area, "tolerance": tol_rel},
        ),
        CheckOutcome(
            "boundary-edge-count",
            count_ok,
            {"expected_per_defect": 6},
        ),
        CheckOutcome(
            "mean-jacobian",
            worst_jac <= tol_rel,
            {"max_rel_residual": worst_jac, "tolerance": tol_rel},
        ),
    ]
    return Report("identities", seed, {"n_configs": len(configs)}, checks)


# -- synthetic generators ----------------------------------------------------------------


def near_rotation_matrices(rng, count: int, spread: float) -> np.ndarray:
    """Random M = R(theta) (id + S), S symmetric with entries in +-spread."""
    theta = rng.uniform(-math.pi, math.pi, count)
    c, s = np.cos(theta), np.sin(theta)
    rot = np.empty((count, 2, 2))
    rot[:, 0, 0] = c
    rot[:, 0, 1] = -s
    rot[:, 1, 0] = s
    rot[:, 1, 1] = c
    sym = np.empty((count, 2, 2))
    sym[:, 0, 0] = 1.0 + rng.uniform(-spread, spread, count)
    sym[:, 1, 1] = 1.0 + rng.uniform(-spread, spread, count)
    off = rng.uniform(-spread, spread, count)
    sym[:, 0, 1] = off
    sym[:, 1, 0] = off
    return rot @ sym


_TRIANGLE_SIDE_DIRS = np.array(
    [
        [0.5, -SQRT3_HALF],  # corner2 - corner3 of the unit triangle (0, 1, tau)
        [0.5, SQRT3_HALF],   # corner3 - corner1
        [-1.0, 0.0],         # corner1 - corner2
    ]
)


def matrix_side_lengths(mats: np.ndarray) -> np.ndarray:
    """|M v_j| for the three unit side vectors of the reference triangle."""
    img = np.einsum("nij,kj->nki", mats, _TRIANGLE_SIDE_DIRS)
    return np.linalg.norm(img, axis=2)


def side_length_ratio_scan(rng, count: int, band: float = 0.05):
    """Ratio sum_j (a_j - 1)^2 / dist(M, SO(2))^2 over matrices whose side
    images stay in (1-band, 1+band); returns (min, max, kept)."""
    mats = near_rotation_matrices(rng, count, spread=0.8 * band)
    sides = matrix_side_lengths(mats)
    det = mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0]
    keep = (
        (det > 0.0)
        & np.all(sides > 1.0 - band, axis=1)
        & np.all(sides < 1.0 + band, axis=1)
    )
    mats, sides = mats[keep], sides[keep]
    num = np.sum((sides - 1.0) ** 2, axis=1)
    den = dist_so2(mats) ** 2
    ok = den > 1e-20
    ratio = num[ok] / den[ok]
    return float(ratio.min()), float(ratio.max()), int(ratio.size)


def random_triangle_placements(rng, spec, count: int):
    """Perturbed placements of the scaled reference triangle, filtered to the
    allowed side-length window and positive orientation."""
    l = spec.l
    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, SQRT3_HALF]])
    amp = rng.choice([0.1, 0.35, 0.85], size=count) * (spec.alpha / 2.0)
    noise = rng.normal(size=(count, 3, 2)) * amp[:, None, None] / math.sqrt(2.0)
    corners = l * ref[None, :, :] + noise
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    a3 = np.linalg.norm(e1, axis=1)
    a2 = np.linalg.norm(e2, axis=1)
    a1 = np.linalg.norm(corners[:, 2] - corners[:, 1], axis=1)
    keep = (cross > 0.0)
    for a in (a1, a2, a3):
        keep &= (a > spec.r_min) & (a < spec.r_max)
    return corners[keep], np.stack([a1, a2, a3], axis=1)[keep], cross[keep]


def triangle_jacobians(corners: np.ndarray) -> np.ndarray:
    """Vectorized linear parts against the unit reference triangle (0, 1, tau)."""
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    mats = np.empty((corners.shape[0], 2, 2))
    mats[:, 0, 0] = e1[:, 0]
    mats[:, 1, 0] = e1[:, 1]
    mats[:, 0, 1] = (e2[:, 0] - 0.5 * e1[:, 0]) / SQRT3_HALF
    mats[:, 1, 1] = (e2[:, 1] - 0.5 * e1[:, 1]) / SQRT3_HALF
    return mats


def single_triangle_ratio_scan(rng, spec, count: int):
    """Ratio of the pressure-corrected bond-energy excess of one placed
    triangle to dist(l^-1 grad, SO(2))^2; returns (min, max, kept)."""
    corners, sides, cross = random_triangle_placements(rng, spec, count)
    v_l = eval_v(spec, spec.l)
    p_l = pressure_coefficient(spec)
    area = 0.5 * cross
    ref_area = TRIANGLE_AREA * spec.l ** 2
    num = (
        eval_v(spec, sides[:, 0])
        + eval_v(spec, sides[:, 1])
        + eval_v(spec, sides[:, 2])
        - 3.0 * v_l
        - p_l * (area - ref_area)
    )
    mats = triangle_jacobians(corners) / spec.l
    den = dist_so2(mats) ** 2
    ok = den > 1e-18
    ratio = num[ok] / den[ok]
    return float(ratio.min()), float(ratio.max()), int(ratio.size)


def patch_rigidity_scan(spec, rng, count: int, n: int = 5):
    """Around an isolated defect: ratio of the first-layer to second-layer
    squared rotation distances; returns (max ratio, kept)."""
    lattice = LatticeTorus(n)
    center = (2, 2)
    cid = lattice.site_id(*center)
    u0 = [lattice.triangle_id(t) for t in lattice.layer_u0(center)]
    u1 = [lattice.triangle_id(t) for t in lattice.layer_u1(center)]
    worst = 0.0
    kept = 0
    for _ in range(count):
        r = spec.alpha * (1.0 / 16.0 + (3.0 / 16.0) * rng.random())
        config = near_standard_sample(lattice, spec, r, rng)
        config.make_hole(cid)
        d2 = dist_so2(config.jacobian_field()) ** 2
        den = float(np.sum(d2[u1]))
        if den <= 1e-24:
            continue
        kept += 1
        worst = max(worst, float(np.sum(d2[u0])) / den)
    return worst, kept


def present_domination_scan(configs):
    """Max ratio of the all-triangle to present-triangle squared rotation
    distances of l^-1 grad; equals 1 without defects."""
    worst = 1.0
    kept = 0
    for config in configs:
        d2 = dist_so2(config.jacobian_field() / config.spec.l) ** 2
        mask = config.present_triangle_mask()
        den = float(np.sum(d2[mask]))
        if den <= 1e-24:
            continue
        kept += 1
        worst = max(worst, float(np.sum(d2)) / den)
    return worst, kept


def energy_bound_constants(configs):
    """Empirical constants of the energy-gap lower bound.

    c3 is the min of gap/rigidity over defect-free configurations; c9 the
    smallest defect-cost offset making gap >= c3*rigidity + (m - c9)*k hold
    on every supplied defective configuration.
    """
    c3 = math.inf
    c9 = 0.0
    used3 = used9 = 0
    for config in configs:
        gap, rig, k = energy_mod.rigidity_terms(config)
        if k == 0:
            if rig > 1e-18:
                c3 = min(c3, gap / rig)
                used3 += 1
        else:
            used9 += 1
    if not math.isfinite(c3):
        c3 = 0.0
    for config in configs:
        gap, rig, k = energy_mod.rigidity_terms(config)
        if k > 0:
            c9 = max(c9, (c3 * rig + config.spec.m * k - gap) / k)
    return c3, c9, used3, used9


def global_rigidity_scan(configs, c9: float):
    """Min over configurations of (gap - (m - c9) k) / |l^-1 grad - id|_L2^2."""
    best = math.inf
    kept = 0
    witness = None
    for config in configs:
        gap, _, k = energy_mod.rigidity_terms(config)
        jac = config.jacobian_field() / config.spec.l
        diff = jac - np.eye(2)[None, :, :]
        den = TRIANGLE_AREA * float(np.sum(diff * diff))
        if den <= 1e-22:
            continue
        kept += 1
        val = (gap - (config.spec.m - c9) * k) / den
        if val < best:
            best = val
            witness = config.snapshot_dict()
    return best, kept, witness


def verify_inequalities(configs, spec, seed: int = 0, synthetic_samples: int = 100_000,
                        patch_samples: int = 10_000) -> Report:
    """Inequality suite: reports extremal ratios as empirical constants and
    fails only on sign violations or non-finite values."""
    rng = np.random.default_rng(seed)

    lo23, hi23, kept23 = side_length_ratio_scan(rng, synthetic_samples)
    lo24, hi24, kept24 = single_triangle_ratio_scan(rng, spec, synthetic_samples)
    patch_c, patch_kept = patch_rigidity_scan(spec, rng, patch_samples)
    dom_c, dom_kept = present_domination_scan(configs)
    c3, c9, used3, used9 = energy_bound_constants(configs)
    grig, grig_kept, witness = global_rigidity_scan(configs, c9)

    gap_ok = True
    for config in configs:
        gap, _, k = energy_mod.rigidity_terms(config)
        if gap - (config.spec.m - c9) * k < -1e-9:
            gap_ok = False

    checks = [
        CheckOutcome(
            "side-length-so2-equivalence",
            math.isfinite(hi23) and lo23 > 0.0,
            {"min_ratio": lo23, "max_ratio": hi23, "samples": kept23},
        ),
        CheckOutcome(
            "single-triangle-energy-equivalence",
            math.isfinite(hi24) and lo24 > 0.0,
            {"min_ratio": lo24, "max_ratio": hi24, "samples": kept24},
        ),
        CheckOutcome(
            "local-patch-rigidity",
            math.isfinite(patch_c),
            {"max_ratio": patch_c, "samples": patch_kept},
        ),
        CheckOutcome(
            "present-triangle-domination",
            math.isfinite(dom_c) and dom_c >= 1.0 - 1e-12,
            {"max_ratio": dom_c, "samples": dom_kept},
        ),
        CheckOutcome(
            "energy-lower-bound",
            c3 > 0.0 and math.isfinite(c9) and gap_ok,
            {"c3": c3, "c9": c9, "defect_free_used": used3, "defective_used": used9},
        ),
        CheckOutcome(
            "global-rigidity",
            grig > 0.0 and math.isfinite(grig),
            {"min_ratio": grig, "samples": grig_kept},
            witness=witness if grig <= 0.0 else None,
        ),
    ]
    return Report(
        "inequalities",
        seed,
        {
            "n_configs": len(configs),
            "synthetic_samples": synthetic_samples,
            "patch_samples": patch_samples,
        },
        checks,
    )


# -- rotation-fit rigidity constant ---------------------------------------------------------


def _synthetic_field(lattice: LatticeTorus, rng, style: int) -> list:
    """Periodic displacement fields probing local and global deformations."""
    n = lattice.n
    ps = np.array([s[0] for s in lattice.sites])
    qs = np.array([s[1] for s in lattice.sites])
    if style == 0:
        amp = rng.choice([0.01, 0.03, 0.06])
        radii = amp * np.sqrt(rng.random(lattice.n_sites))
        angles = 2.0 * math.pi * rng.random(lattice.n_sites)
        u = radii * np.exp(1j * angles)
    else:
        amp = rng.choice([0.02, 0.05])
        k1, k2 = ((1, 0), (0, 1), (1, 1))[int(rng.integers(3))]
        phase = 2.0 * math.pi * rng.random()
        direction = np.exp(1j * 2.0 * math.pi * rng.random())
        u = amp * direction * np.sin(2.0 * math.pi * (k1 * ps + k2 * qs) / n + phase)
        if style == 2:
            small = 0.01 * np.sqrt(rng.random(lattice.n_sites))
            u = u + small * np.exp(1j * 2.0 * math.pi * rng.random(lattice.n_sites))
    return u.tolist()


@dataclass
class RigidityEstimate:
    n: int
    max_ratio: float
    samples: int
    skipped: int


def estimate_rigidity_constant(n_values=(5, 8, 12), samples: int = 300,
                               seed: int = 0, spec=None) -> dict:
    """Empirical max of |grad v - R*|_L2 / |dist(grad v, SO(2))|_L2 over random
    periodic piecewise-affine fields, per torus size.

    R* is the best-fit rotation, so each ratio is the smallest witness for the
    rigidity constant of that field; samples with a vanishing denominator
    (perfect rotation fields) are skipped.
    """
    from . import potential as potential_mod

    if spec is None:
        spec = potential_mod.quadratic()
    out = {}
    for n in n_values:
        lattice = LatticeTorus(n)
        rng = np.random.default_rng(np.random.SeedSequence((seed, n)))
        worst = 0.0
        skipped = 0
        for s in range(samples):
            u = _synthetic_field(lattice, rng, style=s % 3)
            config = Configuration(lattice, spec, disp=u)
            jac = config.jacobian_field()
            d2 = dist_so2(jac) ** 2
            den = float(np.sum(d2))
            if den <= 1e-20:
                skipped += 1
                continue
            rstar = best_rotation([(jac.sum(axis=0), 1.0)])
            diff = jac - rstar[None, :, :]
            num = float(np.sum(diff * diff))
            worst = max(worst, math.sqrt(num / den))
        out[n] = RigidityEstimate(n=n, max_ratio=worst, samples=samples, skipped=skipped)
    return out


# -- defect energy probe -------------------------------------------------------------------


@dataclass
class ProbeRow:
    k: int
    gap: float
    boundary_edges: int
    decomposition_residual: float


@dataclass
class ProbeResult:
    rows: list
    fitted_cost: float
    expected_cost: float


def packed_defect_sites(n: int):
    """Deterministic isolated-defect positions on a spacing-3 sublattice."""
    return [(3 * a, 3 * b) for a in range(n // 3) for b in range(n // 3)]


def defect_energy_probe(spec, n: int, counts) -> ProbeResult:
    """Energy gap of k packed isolated defects in an otherwise standard
    configuration; the gap is exactly k (m - 6 V(l)) by disjointness."""
    if n < 5:
        raise ValueError("defect probe needs N >= 5")
    positions = packed_defect_sites(n)
    k_max = len(positions)
    lattice = LatticeTorus(n)
    rows = []
    for k in counts:
        if k > k_max:
            raise ValueError(
                f"cannot place {k} isolated defects on the {n}-torus; max {k_max}"
            )
        config = standard_config(lattice, spec)
        for site in positions[:k]:
            config.make_hole(lattice.site_id(*site))
        rows.append(
            ProbeRow(
                k=k,
                gap=energy_mod.energy_gap(config),
                boundary_edges=boundary_edge_count(config),
                decomposition_residual=energy_mod.decomposition_residual(config),
            )
        )
    ks = [r.k for r in rows]
    gaps = [r.gap for r in rows]
    if len(set(ks)) > 1:
        fitted = float(np.polyfit(ks, gaps, 1)[0])
    else:
        fitted = math.nan
    expected = spec.m - 6.0 * eval_v(spec, spec.l)
    return ProbeResult(rows=rows, fitted_cost=fitted, expected_cost=expected)


# -- harmonic crystal reference ---------------------------------------------------------------


@dataclass
class HarmonicReference:
    n: int
    coefficient: float  # E[bond_dev_sq] = coefficient / beta in the Gaussian model
    exact: dict         # beta -> exact Gaussian expectation
    sampled: dict       # beta -> (mean, stderr) from direct Gaussian sampling


def harmonic_reference(spec, n: int, betas, n_samples: int = 400, seed: int = 0) -> HarmonicReference:
    """Small-fluctuation Gaussian model of the defect-free crystal.

    Valid for the quadratic potential at l = 1, where the energy Hessian is
    kappa times the sum of bond-direction projectors.  Gives the exact
    harmonic value of bond_dev_sq and direct Gaussian samples of it.
    """
    from . import potential as potential_mod

    if spec.kind != potential_mod.QUADRATIC or spec.l != 1.0:
        raise ValueError("harmonic reference requires the quadratic kind at l = 1")
    lattice = LatticeTorus(n)
    ns = lattice.n_sites
    kmat = np.zeros((2 * ns, 2 * ns))
    edges = []
    for e in range(lattice.n_edges):
        i, j = lattice.edge_endpoint_ids[e]
        z = DIR_VECTORS[e % 3]
        proj = spec.kappa * np.outer((z.real, z.imag), (z.real, z.imag))
        si, sj = slice(2 * i, 2 * i + 2), slice(2 * j, 2 * j + 2)
        kmat[si, si] += proj
        kmat[sj, sj] += proj
        kmat[si, sj] -= proj
        kmat[sj, si] -= proj
        edges.append((i, j))
    w, q = np.linalg.eigh(kmat)
    tol = 1e-9 * w.max()
    pos = w > tol
    if int(np.sum(~pos)) != 2:
        raise RuntimeError(f"expected 2 zero modes, found {int(np.sum(~pos))}")
    k_pinv = (q[:, pos] / w[pos]) @ q[:, pos].T

    coeff = 0.0
    for i, j in edges:
        si, sj = slice(2 * i, 2 * i + 2), slice(2 * j, 2 * j + 2)
        block = k_pinv[si, si] + k_pinv[sj, sj] - k_pinv[si, sj] - k_pinv[sj, si]
        coeff += float(np.trace(block))
    coeff /= len(edges)

    rng = np.random.default_rng(seed)
    exact = {}
    sampled = {}
    qp = q[:, pos]
    wp = w[pos]
    ii = np.array([i for i, _ in edges])
    jj = np.array([j for _, j in edges])
    for beta in betas:
        exact[beta] = coeff / beta
        scale = 1.0 / np.sqrt(beta * wp)
        vals = np.empty(n_samples)
        for s in range(n_samples):
            u = qp @ (scale * rng.standard_normal(wp.size))
            ux, uy = u[0::2], u[1::2]
            dx = ux[jj] - ux[ii]
            dy = uy[jj] - uy[ii]
            vals[s] = float(np.mean(dx * dx + dy * dy))
        sampled[beta] = (float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples)))
    return HarmonicReference(n=n, coefficient=coeff, exact=exact, sampled=sampled)


# -- suite config builders ---------------------------------------------------------------------


def identity_suite_configs(spec, n_values=(5, 6, 8), per_n: int = 1000, seed: int = 0,
                           max_defects: int = 3):
    """Random valid configurations with 0..max_defects isolated holes."""
    from .configuration import random_valid_config

    configs = []
    for n in n_values:
        lattice = LatticeTorus(n)
        rng = np.random.default_rng(np.random.SeedSequence((seed, n)))
        for _ in range(per_n):
            configs.append(
                random_valid_config(lattice, spec, rng, max_defects=max_defects)
            )
    return configs
