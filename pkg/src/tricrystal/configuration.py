"""Configuration state: per-site position or hole, hole filling, per-triangle
Jacobians, hard-constraint checks, and edge classification.

Positions are stored as displacements u(x) = position(x) - l*embed(x), which
makes the periodic image rule exact by construction.  A hole carries no
position; its filled value is the mean of the six neighbor positions, cached
as the mean of the neighbor displacements.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .lattice import (
    DIR_VECTORS,
    DOWN,
    SQRT3_HALF,
    TRI_EDGE_VECTORS,
    UP,
    LatticeTorus,
)
from .potential import PotentialSpec, spec_from_dict, spec_to_dict

SNAPSHOT_FORMAT = "tricrystal-config-v1"


class EdgeClass(enum.Enum):
    INNER = "inner"
    BOUNDARY = "boundary"
    ABSENT = "absent"


class Configuration:
    """Mutable per-site state owned by a single chain.

    Mutators keep the hole-fill cache incremental; ``ueff_array`` and
    ``jacobian_field`` are lazy caches invalidated by a version counter.
    """

    def __init__(self, lattice: LatticeTorus, spec: PotentialSpec, disp=None, present=None):
        self.lattice = lattice
        self.spec = spec
        n = lattice.n_sites
        self.disp = list(disp) if disp is not None else [0j] * n
        self.present = list(present) if present is not None else [True] * n
        if len(self.disp) != n or len(self.present) != n:
            raise ValueError("state arrays must have one entry per site")
        self.fill = {}
        self.defects = set()
        for i, ok in enumerate(self.present):
            if not ok:
                self.defects.add(i)
        for i in self.defects:
            self.fill[i] = self._fill_mean(i)
        self._version = 0
        self._ueff_version = -1
        self._ueff = None
        self._jac_version = -1
        self._jac = None

    # -- basic accessors ---------------------------------------------------------

    @property
    def version(self) -> int:
        return self._version

    def _fill_mean(self, i: int) -> complex:
        nbrs = self.lattice.neighbor_ids[i]
        for j in nbrs:
            if not self.present[j]:
                raise ValueError(
                    f"hole at {self.lattice.site_of_id(i)} has hole neighbor "
                    f"{self.lattice.site_of_id(j)}; filling needs all six present"
                )
        return sum(self.disp[j] for j in nbrs) / 6.0

    def ueff(self, i: int) -> complex:
        """Displacement of the hole-filled extension at site id ``i``."""
        return self.disp[i] if self.present[i] else self.fill[i]

    def omega_hat(self, site) -> complex:
        """Position of the hole-filled extension at a (p, q) site."""
        i = self.lattice.site_id(*site)
        return self.spec.l * self.lattice.embed(self.lattice.site_of_id(i)) + self.ueff(i)

    def ueff_array(self) -> np.ndarray:
        """Complex (n_sites,) array of hole-filled displacements (cached)."""
        if self._ueff_version != self._version:
            arr = np.array(self.disp, dtype=complex)
            for i, u in self.fill.items():
                arr[i] = u
            self._ueff = arr
            self._ueff_version = self._version
        return self._ueff

    def present_array(self) -> np.ndarray:
        return np.array(self.present, dtype=bool)

    # -- mutators ----------------------------------------------------------------

    def set_displacement(self, i: int, u: complex):
        """Move a present site; updates fills of adjacent holes incrementally."""
        if not self.present[i]:
            raise ValueError("cannot displace a hole")
        delta = (u - self.disp[i]) / 6.0
        self.disp[i] = u
        for j in self.lattice.neighbor_ids[i]:
            if not self.present[j]:
                self.fill[j] += delta
        self._version += 1

    def make_hole(self, i: int):
        """Remove the particle at site id ``i``; all six neighbors must be present."""
        if not self.present[i]:
            raise ValueError("site is already a hole")
        self.present[i] = False
        try:
            self.fill[i] = self._fill_mean(i)
        except ValueError:
            self.present[i] = True
            raise
        self.defects.add(i)
        self._version += 1

    def fill_site(self, i: int, u: complex):
        """Insert a particle with displacement ``u`` at a hole."""
        if self.present[i]:
            raise ValueError("site already carries a particle")
        self.present[i] = True
        self.disp[i] = u
        self.defects.discard(i)
        del self.fill[i]
        self._version += 1

    def recompute_fills(self) -> dict:
        return {i: self._fill_mean(i) for i in self.defects}

    def fill_drift(self) -> float:
        """Max distance between cached and freshly recomputed hole fills."""
        fresh = self.recompute_fills()
        return max((abs(self.fill[i] - fresh[i]) for i in fresh), default=0.0)

    def resync_fills(self):
        fresh = self.recompute_fills()
        self.fill.update(fresh)
        self._version += 1

    # -- derived fields ------------------------------------------------------------

    def jacobian_field(self) -> np.ndarray:
        """(2*N^2, 2, 2) array of per-triangle Jacobians of the extension.

        The reference triangle is the unit lattice triangle, so the standard
        configuration gives l times the identity on every triangle.
        """
        if self._jac_version == self._version:
            return self._jac
        u = self.ueff_array()
        corners = self.lattice.tri_corner_array
        l = self.spec.l
        n = self.lattice.n_sites
        jac = np.empty((2 * n, 2, 2))
        for orient, sl in ((UP, slice(0, n)), (DOWN, slice(n, 2 * n))):
            d1, d2 = TRI_EDGE_VECTORS[orient]
            c = corners[sl]
            e1 = l * d1 + u[c[:, 1]] - u[c[:, 0]]
            e2 = l * d2 + u[c[:, 2]] - u[c[:, 0]]
            # M = [e1 e2] @ inv(reference edge matrix), expanded per orientation
            if orient == UP:
                jac[sl, 0, 0] = e1.real
                jac[sl, 1, 0] = e1.imag
                jac[sl, 0, 1] = (e2.real - 0.5 * e1.real) / SQRT3_HALF
                jac[sl, 1, 1] = (e2.imag - 0.5 * e1.imag) / SQRT3_HALF
            else:
                jac[sl, 0, 0] = e1.real - e2.real
                jac[sl, 1, 0] = e1.imag - e2.imag
                jac[sl, 0, 1] = 0.5 * (e1.real + e2.real) / SQRT3_HALF
                jac[sl, 1, 1] = 0.5 * (e1.imag + e2.imag) / SQRT3_HALF
        self._jac = jac
        self._jac_version = self._version
        return jac

    def jacobian_dets(self) -> np.ndarray:
        j = self.jacobian_field()
        return j[:, 0, 0] * j[:, 1, 1] - j[:, 0, 1] * j[:, 1, 0]

    def present_triangle_mask(self) -> np.ndarray:
        ok = self.present_array()
        c = self.lattice.tri_corner_array
        return ok[c[:, 0]] & ok[c[:, 1]] & ok[c[:, 2]]

    def copy(self) -> "Configuration":
        out = Configuration.__new__(Configuration)
        out.lattice = self.lattice
        out.spec = self.spec
        out.disp = self.disp.copy()
        out.present = self.present.copy()
        out.fill = self.fill.copy()
        out.defects = self.defects.copy()
        out._version = 0
        out._ueff_version = -1
        out._ueff = None
        out._jac_version = -1
        out._jac = None
        return out

    # -- serialization ---------------------------------------------------------------

    def snapshot_dict(self) -> dict:
        """JSON-able record; float round-trips are exact under json."""
        return {
            "format": SNAPSHOT_FORMAT,
            "n": self.lattice.n,
            "potential": spec_to_dict(self.spec),
            # holes carry a zeroed displacement slot; only presence matters
            "sites": [
                [bool(self.present[i]), self.disp[i].real, self.disp[i].imag]
                if self.present[i]
                else [False, 0.0, 0.0]
                for i in range(self.lattice.n_sites)
            ],
        }

    @staticmethod
    def from_snapshot(data: dict, lattice: LatticeTorus | None = None) -> "Configuration":
        if data.get("format") != SNAPSHOT_FORMAT:
            raise ValueError(f"unsupported snapshot format {data.get('format')!r}")
        if lattice is None:
            lattice = LatticeTorus(int(data["n"]))
        elif lattice.n != int(data["n"]):
            raise ValueError("snapshot size does not match the supplied lattice")
        spec = spec_from_dict(data["potential"])
        present = [bool(s[0]) for s in data["sites"]]
        disp = [complex(s[1], s[2]) for s in data["sites"]]
        return Configuration(lattice, spec, disp=disp, present=present)


# -- constructors ---------------------------------------------------------------------


def standard_config(lattice: LatticeTorus, spec: PotentialSpec) -> Configuration:
    """The defect-free crystal at spacing l: every displacement zero."""
    return Configuration(lattice, spec)


def near_standard_sample(lattice, spec, r: float, rng) -> Configuration:
    """Independent uniform-disk displacement of radius r < alpha/4 per site.

    Such configurations satisfy every hard constraint, so they serve as
    always-valid initializers.
    """
    if not 0.0 <= r < spec.alpha / 4.0:
        raise ValueError(f"disk radius must lie in [0, alpha/4), got {r}")
    n = lattice.n_sites
    radii = r * np.sqrt(rng.random(n))
    angles = 2.0 * np.pi * rng.random(n)
    disp = (radii * np.exp(1j * angles)).tolist()
    return Configuration(lattice, spec, disp=disp)


def random_valid_config(lattice, spec, rng, max_defects: int = 3, r: float | None = None) -> Configuration:
    """Near-standard sample with up to ``max_defects`` isolated holes."""
    if r is None:
        r = float(spec.alpha / 16.0 + (spec.alpha / 4.0 - spec.alpha / 16.0) * rng.random())
    config = near_standard_sample(lattice, spec, r, rng)
    want = int(rng.integers(0, max_defects + 1))
    if want == 0:
        return config
    order = rng.permutation(lattice.n_sites)
    placed = []
    for i in order:
        i = int(i)
        if len(placed) == want:
            break
        if all(i not in lattice.w2_ids[j] for j in placed):
            config.make_hole(i)
            placed.append(i)
    return config


# -- spec operations -------------------------------------------------------------------


def fill_hole_value(config: Configuration, site) -> complex:
    """Mean of the six neighbor positions of a hole, images unwrapped."""
    lat = config.lattice
    i = lat.site_id(*site)
    if config.present[i]:
        raise ValueError(f"site {tuple(site)} is not a hole")
    p, q = lat.site_of_id(i)
    total = 0j
    for d, j in enumerate(lat.neighbor_ids[i]):
        if not config.present[j]:
            raise ValueError(
                f"hole at {tuple(site)} has hole neighbor {lat.site_of_id(j)}"
            )
        total += config.spec.l * (lat.embed((p, q)) + DIR_VECTORS[d]) + config.disp[j]
    return total / 6.0


def extension_jacobians(config: Configuration) -> dict:
    """Map from public triangle id to its 2x2 Jacobian matrix."""
    field = config.jacobian_field()
    return {
        config.lattice.triangle_of_id(t): field[t].copy()
        for t in range(config.lattice.n_triangles)
    }


@dataclass
class ConstraintReport:
    omega1: bool
    omega2: bool
    omega4: bool
    violating_edges: list
    violating_pairs: list
    violating_triangles: list

    @property
    def ok(self) -> bool:
        return self.omega1 and self.omega2 and self.omega4


def check_constraints(config: Configuration) -> ConstraintReport:
    """Full scan of the hard constraints; lists every violating item."""
    lat = config.lattice
    spec = config.spec
    u = config.ueff_array()
    ok = config.present_array()

    ends = lat.edge_endpoint_array
    both = ok[ends[:, 0]] & ok[ends[:, 1]]
    bond = spec.l * lat.edge_direction_vectors + u[ends[:, 1]] - u[ends[:, 0]]
    r = np.abs(bond)
    bad1 = both & ((r <= spec.r_min) | (r >= spec.r_max))
    violating_edges = [lat.edge_of_id(int(e)) for e in np.nonzero(bad1)[0]]

    violating_pairs = []
    for i in sorted(config.defects):
        for j in lat.w2_ids[i]:
            if j in config.defects and i < j:
                violating_pairs.append((lat.site_of_id(i), lat.site_of_id(j)))

    dets = config.jacobian_dets()
    bad4 = dets <= 0.0
    violating_triangles = [lat.triangle_of_id(int(t)) for t in np.nonzero(bad4)[0]]

    return ConstraintReport(
        omega1=not violating_edges,
        omega2=not violating_pairs,
        omega4=not violating_triangles,
        violating_edges=violating_edges,
        violating_pairs=violating_pairs,
        violating_triangles=violating_triangles,
    )


def classify_edges(config: Configuration) -> dict:
    """Partition all edges into INNER / BOUNDARY / ABSENT.

    An edge is absent when an endpoint is a hole and boundary when both
    endpoints are present but an apex site of the edge is a hole.
    """
    lat = config.lattice
    out = {}
    for e in range(lat.n_edges):
        i, j = lat.edge_endpoint_ids[e]
        if not (config.present[i] and config.present[j]):
            cls = EdgeClass.ABSENT
        else:
            a1, a2 = lat.edge_apex_ids[e]
            if config.present[a1] and config.present[a2]:
                cls = EdgeClass.INNER
            else:
                cls = EdgeClass.BOUNDARY
        out[lat.edge_of_id(e)] = cls
    return out


def present_triangles(config: Configuration) -> set:
    """Triangles whose three corners all carry particles."""
    mask = config.present_triangle_mask()
    return {
        config.lattice.triangle_of_id(int(t)) for t in np.nonzero(mask)[0]
    }
