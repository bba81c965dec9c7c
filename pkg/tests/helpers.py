"""Independent oracles shared by the test modules.

Everything here recomputes quantities along a different path than the
package: brute-force enumeration, grid minimization, or direct summation.
"""

import math

import numpy as np

SQRT3_HALF = math.sqrt(3.0) / 2.0

# neighbor steps in lattice coordinates, written out by hand
NBR_STEPS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


def embed(p, q):
    """Euclidean embedding used by the oracles, as an (x, y) pair."""
    return (p + 0.5 * q, SQRT3_HALF * q)


def brute_torus_distance(n, s1, s2):
    """Min Euclidean distance over the nine period images."""
    best = math.inf
    dp = s2[0] - s1[0]
    dq = s2[1] - s1[1]
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            x, y = embed(dp + a * n, dq + b * n)
            best = min(best, math.hypot(x, y))
    return best


def grid_dist_so2(m, n_grid=1_000_000):
    """Min over a theta grid of the Frobenius distance from m to R(theta)."""
    theta = np.linspace(0.0, 2.0 * math.pi, n_grid, endpoint=False)
    c, s = np.cos(theta), np.sin(theta)
    m = np.asarray(m, dtype=float)
    d = (
        (m[0, 0] - c) ** 2
        + (m[0, 1] + s) ** 2
        + (m[1, 0] - s) ** 2
        + (m[1, 1] - c) ** 2
    )
    return math.sqrt(float(d.min()))


def refined_grid_dist_so2(mats, coarse=8192, fine=8192):
    """Two-stage grid minimization of the distance to SO(2), vectorized over
    a stack of matrices.  The objective is a pure cosine in theta, so the
    coarse argmin brackets the true minimizer within one cell."""
    mats = np.asarray(mats, dtype=float)
    out = np.empty(mats.shape[0])
    theta = np.linspace(0.0, 2.0 * math.pi, coarse, endpoint=False)
    step = theta[1] - theta[0]
    c, s = np.cos(theta), np.sin(theta)
    for start in range(0, mats.shape[0], 256):
        chunk = mats[start : start + 256]
        d = (
            (chunk[:, None, 0, 0] - c) ** 2
            + (chunk[:, None, 0, 1] + s) ** 2
            + (chunk[:, None, 1, 0] - s) ** 2
            + (chunk[:, None, 1, 1] - c) ** 2
        )
        best = theta[np.argmin(d, axis=1)]
        for k in range(chunk.shape[0]):
            t = np.linspace(best[k] - 2 * step, best[k] + 2 * step, fine)
            cf, sf = np.cos(t), np.sin(t)
            m = chunk[k]
            df = (
                (m[0, 0] - cf) ** 2
                + (m[0, 1] + sf) ** 2
                + (m[1, 0] - sf) ** 2
                + (m[1, 1] - cf) ** 2
            )
            out[start + k] = math.sqrt(float(df.min()))
    return out


def grid_best_rotation_angle(pairs, coarse=8192, fine=8192):
    """Two-stage grid minimizer of the weighted squared Frobenius objective."""
    theta = np.linspace(0.0, 2.0 * math.pi, coarse, endpoint=False)
    step = theta[1] - theta[0]

    def objective(ts):
        c, s = np.cos(ts), np.sin(ts)
        total = np.zeros_like(ts)
        for m, w in pairs:
            m = np.asarray(m, dtype=float)
            total += w * (
                (m[0, 0] - c) ** 2
                + (m[0, 1] + s) ** 2
                + (m[1, 0] - s) ** 2
                + (m[1, 1] - c) ** 2
            )
        return total

    t0 = theta[int(np.argmin(objective(theta)))]
    ts = np.linspace(t0 - 2 * step, t0 + 2 * step, fine)
    vals = objective(ts)
    return float(ts[int(np.argmin(vals))]), float(vals.min())


def brute_hamiltonian(config):
    """Half double-sum over ordered site/neighbor pairs, with explicit
    unwrapped periodic images; plus m per defect."""
    lat = config.lattice
    spec = config.spec
    from tricrystal.potential import eval_v

    total = 0.0
    defects = 0
    for i, (p, q) in enumerate(lat.sites):
        if not config.present[i]:
            defects += 1
            continue
        xi = complex(*embed(p, q)) * spec.l + config.disp[i]
        for dp, dq in NBR_STEPS:
            j = lat.site_id(p + dp, q + dq)
            if not config.present[j]:
                continue
            xj = complex(*embed(p + dp, q + dq)) * spec.l + config.disp[j]
            total += 0.5 * eval_v(spec, abs(xi - xj))
    return total + spec.m * defects


def random_matrices(rng, count, scale=1.0):
    return rng.normal(scale=scale, size=(count, 2, 2))
