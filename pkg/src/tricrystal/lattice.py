"""Triangular torus lattice: sites, edges, triangles, defect neighborhoods.

Sites are integer pairs (p, q) in the basis (1, tau) with tau = exp(i*pi/3),
reduced modulo N into the fundamental set {0..N-1}^2.  The Euclidean embedding
is p*(1,0) + q*(1/2, sqrt(3)/2), handled throughout as a complex number.
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

SQRT3_HALF = math.sqrt(3.0) / 2.0
TRIANGLE_AREA = math.sqrt(3.0) / 4.0  # unit-spacing lattice triangle

# unit steps to the six nearest neighbors, counterclockwise starting at +1
DIR_VECTORS = (
    complex(1.0, 0.0),
    complex(0.5, SQRT3_HALF),
    complex(-0.5, SQRT3_HALF),
    complex(-1.0, 0.0),
    complex(-0.5, -SQRT3_HALF),
    complex(0.5, -SQRT3_HALF),
)
DIR_OFFSETS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))

UP, DOWN = 0, 1
# lattice-coordinate corner offsets of the two triangle orientations;
# both triples are positively oriented in the embedding
TRI_CORNER_OFFSETS = {
    UP: ((0, 0), (1, 0), (0, 1)),
    DOWN: ((0, 0), (0, 1), (-1, 1)),
}
# embedded edge vectors (corner1-corner0, corner2-corner0) per orientation
TRI_EDGE_VECTORS = {
    UP: (DIR_VECTORS[0], DIR_VECTORS[1]),
    DOWN: (DIR_VECTORS[1], DIR_VECTORS[2]),
}


def embed_offset(p: int, q: int) -> complex:
    return complex(p + 0.5 * q, SQRT3_HALF * q)


def _build_patch_offsets():
    """Offsets of the 19-site hexagonal patch: 0, the neighbors, and their sums."""
    patch = {(0, 0)}
    patch.update(DIR_OFFSETS)
    for a, b in DIR_OFFSETS:
        for c, d in DIR_OFFSETS:
            patch.add((a + c, b + d))
    return frozenset(patch)


PATCH_OFFSETS = _build_patch_offsets()

# triangles incident to the origin: one per orientation and corner
U0_OFFSETS = tuple(
    ((-cp, -cq), orient)
    for orient in (UP, DOWN)
    for (cp, cq) in TRI_CORNER_OFFSETS[orient]
)


def _build_u1_offsets():
    """Second-layer triangles: all corners inside the patch, origin not a corner."""
    out = []
    for orient in (UP, DOWN):
        corners = TRI_CORNER_OFFSETS[orient]
        for p in range(-4, 5):
            for q in range(-4, 5):
                cs = [(p + cp, q + cq) for cp, cq in corners]
                if all(c in PATCH_OFFSETS for c in cs) and (0, 0) not in cs:
                    out.append(((p, q), orient))
    return tuple(out)


U1_OFFSETS = _build_u1_offsets()
assert len(PATCH_OFFSETS) == 19
assert len(U1_OFFSETS) == 18

# offsets at torus-free Euclidean distance <= 2 from the origin (excluded: 0);
# with these all present, a defect at the origin is isolated
W2_OFFSETS = tuple(
    (p, q)
    for p in range(-2, 3)
    for q in range(-2, 3)
    if (p, q) != (0, 0) and abs(embed_offset(p, q)) <= 2.0 + 1e-12
)
assert len(W2_OFFSETS) == 18


class LatticeTorus:
    """Immutable combinatorics of the N-periodic triangular lattice.

    Precomputes neighbor, edge, triangle and neighborhood tables indexed by
    dense integer ids; the public methods speak (p, q) tuples.
    """

    def __init__(self, n: int):
        if n < 3:
            raise ValueError(f"torus size must be at least 3, got {n}")
        self.n = n
        self.n_sites = n * n
        self.n_edges = 3 * n * n
        self.n_triangles = 2 * n * n
        self.sites = [(p, q) for p in range(n) for q in range(n)]

        # six canonical neighbors per site, direction order fixed
        self.neighbor_ids = [
            tuple(self.site_id(p + dp, q + dq) for dp, dq in DIR_OFFSETS)
            for p, q in self.sites
        ]

        # undirected edges: (site, direction in {0,1,2}); id = 3*site_id + dir
        self.edge_endpoint_ids = []
        self.edge_apex_ids = []  # common neighbors of the two endpoints
        for i, (p, q) in enumerate(self.sites):
            for d in range(3):
                j = self.neighbor_ids[i][d]
                a1 = self.neighbor_ids[i][(d + 1) % 6]
                a2 = self.neighbor_ids[i][(d + 5) % 6]
                self.edge_endpoint_ids.append((i, j))
                self.edge_apex_ids.append((a1, a2))

        # triangles: id = orient * n_sites + site_id
        self.tri_corner_ids = []
        for orient in (UP, DOWN):
            corners = TRI_CORNER_OFFSETS[orient]
            for p, q in self.sites:
                self.tri_corner_ids.append(
                    tuple(self.site_id(p + cp, q + cq) for cp, cq in corners)
                )

        # first triangle layer around each site
        self.u0_tri_ids = [
            tuple(
                (orient * self.n_sites) + self.site_id(p + op, q + oq)
                for (op, oq), orient in U0_OFFSETS
            )
            for p, q in self.sites
        ]

        # sites within Euclidean torus distance 2 (isolation neighborhoods)
        self.w2_ids = [
            tuple(self.site_id(p + op, q + oq) for op, oq in W2_OFFSETS)
            for p, q in self.sites
        ]

    # -- canonical coordinates -------------------------------------------------

    def canon(self, site) -> tuple:
        p, q = site
        return (p % self.n, q % self.n)

    def site_id(self, p: int, q: int) -> int:
        return (p % self.n) * self.n + (q % self.n)

    def site_of_id(self, i: int) -> tuple:
        return self.sites[i]

    def embed(self, site) -> complex:
        """Euclidean embedding of integer coordinates (not canonicalized)."""
        p, q = site
        return embed_offset(p, q)

    # -- public operations -----------------------------------------------------

    def neighbors(self, site) -> tuple:
        """The six neighbor sites of ``site``, canonical, in fixed direction order."""
        i = self.site_id(*self.canon(site))
        return tuple(self.sites[j] for j in self.neighbor_ids[i])

    def triangle_corners(self, triangle) -> tuple:
        """Canonical, positively oriented corner triple of a triangle ((p,q), orient)."""
        (p, q), orient = triangle
        return tuple(
            self.canon((p + cp, q + cq)) for cp, cq in TRI_CORNER_OFFSETS[orient]
        )

    def triangle_id(self, triangle) -> int:
        (p, q), orient = triangle
        return orient * self.n_sites + self.site_id(p, q)

    def triangle_of_id(self, t: int) -> tuple:
        orient, sid = divmod(t, self.n_sites)
        return (self.sites[sid], orient)

    def layer_u0(self, site) -> set:
        """The six triangles having ``site`` as a corner."""
        i = self.site_id(*self.canon(site))
        return {self.triangle_of_id(t) for t in self.u0_tri_ids[i]}

    def layer_u1(self, site) -> set:
        """The 18-triangle second layer around ``site``; requires N >= 5."""
        if self.n < 5:
            raise ValueError(f"second layer needs N >= 5, got N = {self.n}")
        p, q = self.canon(site)
        return {
            (self.canon((p + op, q + oq)), orient) for (op, oq), orient in U1_OFFSETS
        }

    def torus_distance(self, s1, s2) -> float:
        """Minimum Euclidean distance over period images of two sites."""
        p1, q1 = self.canon(s1)
        p2, q2 = self.canon(s2)
        dp, dq = p2 - p1, q2 - q1
        best = math.inf
        for a in (-1, 0, 1):
            for b in (-1, 0, 1):
                d = abs(embed_offset(dp + a * self.n, dq + b * self.n))
                if d < best:
                    best = d
        return best

    def isolation_ok(self, s1, s2) -> bool:
        """True iff the two sites may both carry defects: equal or further than 2."""
        c1, c2 = self.canon(s1), self.canon(s2)
        if c1 == c2:
            return True
        return self.torus_distance(c1, c2) > 2.0

    def edge_of_id(self, e: int) -> tuple:
        sid, d = divmod(e, 3)
        return (self.sites[sid], d)

    def edge_id(self, edge) -> int:
        (p, q), d = edge
        return 3 * self.site_id(p, q) + d

    # -- dense index arrays for vectorized evaluation ---------------------------

    @cached_property
    def tri_corner_array(self) -> np.ndarray:
        """(2*N^2, 3) corner site ids, UP block then DOWN block."""
        return np.array(self.tri_corner_ids, dtype=np.intp)

    @cached_property
    def edge_endpoint_array(self) -> np.ndarray:
        return np.array(self.edge_endpoint_ids, dtype=np.intp)

    @cached_property
    def edge_apex_array(self) -> np.ndarray:
        return np.array(self.edge_apex_ids, dtype=np.intp)

    @cached_property
    def edge_direction_vectors(self) -> np.ndarray:
        """Complex unit bond vector per undirected edge (direction e mod 3)."""
        return np.tile(np.array(DIR_VECTORS[:3]), self.n_sites)
