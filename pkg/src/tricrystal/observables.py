"""Per-sample observables of the deviation from the perfect crystal, plus
batch-means summaries with integrated autocorrelation times and the
temperature/chemical-potential scan driver."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import energy as energy_mod
from . import sampler as sampler_mod
from .configuration import Configuration, standard_config
from .geometry import dist_so2
from .lattice import TRIANGLE_AREA, LatticeTorus
from .potential import with_params


@dataclass
class ObservableRecord:
    """Scalars measured on one snapshot.

    ``bond_dev_sq`` averages |omega_hat(x+z) - omega_hat(x) - l z|^2 over all
    directed bonds; the present-bond variant restricts to bonds whose two
    endpoints carry particles.  ``origin_bond_dev`` keeps the six deviation
    vectors at a fixed site for direction-resolved estimates.
    """

    step: int
    bond_dev_sq: float
    present_bond_dev_sq: float
    jac_dev_sq: float
    rigidity_sum: float
    defect_count: int
    energy_gap: float
    origin_bond_dev: tuple

    def __post_init__(self):
        if min(self.bond_dev_sq, self.present_bond_dev_sq, self.jac_dev_sq,
               self.rigidity_sum) < 0.0:
            raise ValueError("squared observables must be nonnegative")


CSV_FIELDS = ("step", "bond_dev_sq", "jac_dev_sq", "rigidity_sum",
              "defect_count", "energy_gap")


def measure(config: Configuration, step: int = 0) -> ObservableRecord:
    lat = config.lattice
    spec = config.spec
    u = config.ueff_array()
    ends = lat.edge_endpoint_array
    dev = u[ends[:, 1]] - u[ends[:, 0]]
    dev_sq = np.abs(dev) ** 2
    bond_dev_sq = float(dev_sq.mean())

    ok = config.present_array()
    both = ok[ends[:, 0]] & ok[ends[:, 1]]
    present_bond_dev_sq = float(dev_sq[both].mean()) if np.any(both) else 0.0

    jac = config.jacobian_field()
    l = spec.l
    diff = jac.copy()
    diff[:, 0, 0] -= l
    diff[:, 1, 1] -= l
    jac_dev_sq = float(np.sum(diff * diff, axis=(1, 2)).mean())
    rigidity_sum = TRIANGLE_AREA * float(np.sum(dist_so2(jac / l) ** 2))

    origin = 0
    nbrs = lat.neighbor_ids[origin]
    origin_dev = tuple(complex(u[j] - u[origin]) for j in nbrs)

    return ObservableRecord(
        step=step,
        bond_dev_sq=bond_dev_sq,
        present_bond_dev_sq=present_bond_dev_sq,
        jac_dev_sq=jac_dev_sq,
        rigidity_sum=rigidity_sum,
        defect_count=len(config.defects),
        energy_gap=energy_mod.energy_gap(config),
        origin_bond_dev=origin_dev,
    )


@dataclass
class Summary:
    mean: float
    stderr: float
    tau_int: float
    n: int


def estimate(series, n_batches: int = 32) -> Summary:
    """Mean with batch-means standard error and integrated autocorrelation time.

    Needs at least 100 samples; a constant series reports stderr 0, tau 1.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 100:
        raise ValueError(f"need at least 100 samples, got {n}")
    b = n // n_batches
    used = x[: n_batches * b]
    mean = float(used.mean())
    batch_means = used.reshape(n_batches, b).mean(axis=1)
    # b * var(batch means) estimates the asymptotic variance of the series
    var_asym = b * float(np.sum((batch_means - mean) ** 2)) / (n_batches - 1)
    var_sample = float(used.var(ddof=1))
    stderr = math.sqrt(max(var_asym, 0.0) / used.size)
    tau = var_asym / var_sample if var_sample > 0.0 else 1.0
    return Summary(mean=mean, stderr=stderr, tau_int=tau, n=int(used.size))


SCALAR_FIELDS = ("bond_dev_sq", "present_bond_dev_sq", "jac_dev_sq",
                 "rigidity_sum", "defect_count", "energy_gap")


def summarize(records, fields=SCALAR_FIELDS) -> dict:
    return {
        f: estimate([getattr(r, f) for r in records]) for f in fields
    }


def origin_bond_summaries(records):
    """Per-direction, per-component summaries of the fixed-site bond deviation."""
    out = []
    for d in range(6):
        re = estimate([r.origin_bond_dev[d].real for r in records])
        im = estimate([r.origin_bond_dev[d].imag for r in records])
        out.append((re, im))
    return out


@dataclass
class ScanRow:
    beta: float
    m: float
    summaries: dict
    defect_density: Summary
    acceptance: dict
    n_samples: int


@dataclass
class ScanResult:
    n: int
    rows: list
    seed: int


def loglog_slope(xs, ys) -> float:
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


def strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def non_increasing(values) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


def symmetry_breaking_scan(n: int, spec, betas, ms=None, sweeps: int = 2000,
                           burn_in: int = 500, thin: int = 2, seed: int = 0,
                           params=None) -> ScanResult:
    """Run one chain per (beta, m) grid point and tabulate the observable
    summaries; rows come out in grid order (beta-major)."""
    if len(betas) < 1:
        raise ValueError("need at least one beta")
    ms = list(ms) if ms is not None else [spec.m]
    lattice = LatticeTorus(n)
    seeds = np.random.SeedSequence(seed).spawn(len(betas) * len(ms))
    rows = []
    idx = 0
    for beta in betas:
        for m in ms:
            point_spec = with_params(spec, beta=beta, m=m)
            chain = sampler_mod.Chain(
                standard_config(lattice, point_spec), params, seed=seeds[idx]
            )
            idx += 1
            chain.burn_in(burn_in)
            records = [
                measure(snap, step=sw) for sw, snap in chain.sample(sweeps, thin=thin)
            ]
            summaries = summarize(records)
            density = estimate([r.defect_count / lattice.n_sites for r in records])
            rows.append(
                ScanRow(
                    beta=beta,
                    m=m,
                    summaries=summaries,
                    defect_density=density,
                    acceptance=chain.acceptance_rates(),
                    n_samples=len(records),
                )
            )
    return ScanResult(n=n, rows=rows, seed=seed)
