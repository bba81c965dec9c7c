"""2x2 matrix and triangle utilities: rotation distance, rotation fits,
affine Jacobians, Heron areas.

All matrix distances use the Frobenius norm; rotation means an element of
SO(2).  Matrices are numpy arrays of shape (2, 2) or stacked (..., 2, 2).
"""

from __future__ import annotations

import math

import numpy as np

SQRT3 = math.sqrt(3.0)


def rotation(theta: float) -> np.ndarray:
    """Counterclockwise rotation matrix R(theta)."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def singular_values(m: np.ndarray):
    """Singular values (s1 >= s2 >= 0) of 2x2 matrices, closed form.

    Works on stacked input of shape (..., 2, 2).
    """
    m = np.asarray(m, dtype=float)
    a, b = m[..., 0, 0], m[..., 0, 1]
    c, d = m[..., 1, 0], m[..., 1, 1]
    q = np.hypot(a + d, c - b) / 2.0
    r = np.hypot(a - d, c + b) / 2.0
    return q + r, np.abs(q - r)


def dist_so2(m: np.ndarray):
    """Frobenius distance from a 2x2 matrix to SO(2).

    With singular values s1 >= s2 the distance is
    sqrt((s1-1)^2 + (s2-1)^2) when det(m) >= 0 and
    sqrt((s1-1)^2 + (s2+1)^2) when det(m) < 0.
    Accepts stacked input; returns a scalar for a single matrix.
    """
    m = np.asarray(m, dtype=float)
    s1, s2 = singular_values(m)
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    d_sq = (s1 - 1.0) ** 2 + np.where(det >= 0.0, (s2 - 1.0) ** 2, (s2 + 1.0) ** 2)
    out = np.sqrt(np.maximum(d_sq, 0.0))
    return float(out) if out.ndim == 0 else out


def best_rotation(jacobians) -> np.ndarray:
    """Rotation minimizing the weighted sum of squared Frobenius distances.

    ``jacobians`` is a sequence of (matrix, weight) with weights >= 0 and at
    least one positive.  The minimizer is the rotation of angle
    atan2(mbar10 - mbar01, mbar00 + mbar11) where mbar is the weighted sum;
    for det(mbar) > 0 this is the polar rotation factor of mbar.  A vanishing
    weighted sum yields the identity (all rotations tie).
    """
    mbar = np.zeros((2, 2))
    total = 0.0
    for m, w in jacobians:
        if w < 0.0:
            raise ValueError("weights must be nonnegative")
        mbar += w * np.asarray(m, dtype=float)
        total += w
    if total <= 0.0:
        raise ValueError("at least one weight must be positive")
    e = mbar[0, 0] + mbar[1, 1]
    h = mbar[1, 0] - mbar[0, 1]
    if math.hypot(e, h) < 1e-300:
        return np.eye(2)
    return rotation(math.atan2(h, e))


def jacobian_from_corners(reference: np.ndarray, image: np.ndarray) -> np.ndarray:
    """Linear part of the affine map sending one corner triple to another.

    Both arguments are (3, 2) corner arrays.  Returns the unique M with
    M @ (reference edge vectors) = (image edge vectors).
    """
    ref = np.asarray(reference, dtype=float)
    img = np.asarray(image, dtype=float)
    e_ref = np.column_stack((ref[1] - ref[0], ref[2] - ref[0]))
    e_img = np.column_stack((img[1] - img[0], img[2] - img[0]))
    det = e_ref[0, 0] * e_ref[1, 1] - e_ref[0, 1] * e_ref[1, 0]
    if det == 0.0:
        raise ValueError("reference triangle is degenerate")
    inv = np.array([[e_ref[1, 1], -e_ref[0, 1]], [-e_ref[1, 0], e_ref[0, 0]]]) / det
    return e_img @ inv


def heron_area(a1: float, a2: float, a3: float) -> float:
    """Triangle area from side lengths.

    Evaluates 1/4*sqrt((a1+a2-a3)(a2+a3-a1)(a3+a1-a2)(a1+a2+a3)) in the
    numerically stable sorted arrangement; degenerate triples give 0 and a
    violated triangle inequality raises ValueError.
    """
    a, b, c = sorted((a1, a2, a3), reverse=True)
    if c < 0.0:
        raise ValueError("side lengths must be nonnegative")
    gap = c - (a - b)
    if gap < 0.0:
        raise ValueError(f"triangle inequality violated: sides {a1}, {a2}, {a3}")
    prod = (a + (b + c)) * gap * (c + (a - b)) * (a + (b - c))
    return 0.25 * math.sqrt(max(prod, 0.0))


def heron_area_gradient(a1: float, a2: float, a3: float, step: float = 1e-6):
    """Central-difference gradient of the Heron area at (a1, a2, a3)."""
    sides = [a1, a2, a3]
    grad = []
    for j in range(3):
        hi = sides.copy()
        lo = sides.copy()
        hi[j] += step
        lo[j] -= step
        grad.append((heron_area(*hi) - heron_area(*lo)) / (2.0 * step))
    return tuple(grad)


def heron_gradient_error(spacing: float, step: float = 1e-6) -> float:
    """Max deviation of the numeric equilateral area gradient from l/(2*sqrt(3))."""
    if not 0.5 < spacing < 2.0:
        raise ValueError(f"spacing must lie in (1/2, 2), got {spacing}")
    exact = spacing / (2.0 * SQRT3)
    grad = heron_area_gradient(spacing, spacing, spacing, step=step)
    return max(abs(g - exact) for g in grad)


def signed_area(corners: np.ndarray) -> float:
    """Signed area of a corner triple (3, 2); positive for counterclockwise."""
    c = np.asarray(corners, dtype=float)
    u = c[1] - c[0]
    v = c[2] - c[0]
    return 0.5 * float(u[0] * v[1] - u[1] * v[0])
