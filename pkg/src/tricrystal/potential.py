"""Pair potential and model parameters, with validation of the standing
assumptions: V twice differentiable with V'' > 0 and V'(1) = 0 on
[1-alpha, 1+alpha], and spacing l inside (1-alpha/2, 1+alpha/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

SQRT3 = math.sqrt(3.0)

QUADRATIC = "quadratic"
TABULATED = "tabulated"


@dataclass(eq=False)
class PotentialSpec:
    """Pair potential V plus the model parameters (alpha, l, m, beta).

    ``quadratic`` uses V(r) = (kappa/2)(r-1)^2; ``tabulated`` interpolates
    (r, V) knots with a not-a-knot cubic spline.  Instances are treated as
    immutable after validation.
    """

    kind: str
    alpha: float = 0.1
    l: float = 1.0
    m: float = 20.0
    beta: float = 100.0
    kappa: float | None = None
    knots: np.ndarray | None = None
    _interp: CubicSpline | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == QUADRATIC:
            if self.kappa is None or self.kappa <= 0.0:
                raise ValueError("quadratic potential needs kappa > 0")
        elif self.kind == TABULATED:
            knots = np.asarray(self.knots, dtype=float)
            if knots.ndim != 2 or knots.shape[1] != 2 or knots.shape[0] < 4:
                raise ValueError("tabulated potential needs at least 4 (r, V) knots")
            if not np.all(np.diff(knots[:, 0]) > 0.0):
                raise ValueError("tabulated knots must have strictly increasing r")
            self.knots = knots
            self._interp = CubicSpline(knots[:, 0], knots[:, 1], bc_type="not-a-knot")
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")

    @property
    def r_min(self) -> float:
        return 1.0 - self.alpha

    @property
    def r_max(self) -> float:
        return 1.0 + self.alpha

    def scalar_v(self):
        """Fast scalar callable for the sampler hot loop (no domain check)."""
        if self.kind == QUADRATIC:
            half_kappa = 0.5 * self.kappa
            return lambda r: half_kappa * (r - 1.0) * (r - 1.0)
        interp = self._interp
        return lambda r: float(interp(r))


def quadratic(kappa: float = 100.0, **params) -> PotentialSpec:
    return PotentialSpec(kind=QUADRATIC, kappa=kappa, **params)


def tabulated(knots, **params) -> PotentialSpec:
    return PotentialSpec(kind=TABULATED, knots=knots, **params)


def tabulated_from_file(path, **params) -> PotentialSpec:
    """Load a two-column (r, V) text file with strictly increasing r."""
    knots = np.loadtxt(path, ndmin=2)
    if knots.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns (r, V)")
    return tabulated(knots, **params)


def spec_to_dict(spec: PotentialSpec) -> dict:
    d = {
        "kind": spec.kind,
        "alpha": spec.alpha,
        "l": spec.l,
        "m": spec.m,
        "beta": spec.beta,
    }
    if spec.kind == QUADRATIC:
        d["kappa"] = spec.kappa
    else:
        d["knots"] = [[float(r), float(v)] for r, v in spec.knots]
    return d


def spec_from_dict(d: dict) -> PotentialSpec:
    params = {k: d[k] for k in ("alpha", "l", "m", "beta")}
    if d["kind"] == QUADRATIC:
        return quadratic(kappa=d["kappa"], **params)
    return tabulated(np.array(d["knots"], dtype=float), **params)


def with_params(spec: PotentialSpec, **overrides) -> PotentialSpec:
    """Fresh spec with some of (alpha, l, m, beta, kappa) replaced."""
    d = spec_to_dict(spec)
    d.update(overrides)
    return spec_from_dict(d)


def eval_v(spec: PotentialSpec, r):
    """Evaluate V on [1-alpha, 1+alpha]; values outside the domain raise."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < spec.r_min - 1e-12) or np.any(arr > spec.r_max + 1e-12):
        bad = arr[(arr < spec.r_min - 1e-12) | (arr > spec.r_max + 1e-12)]
        raise ValueError(
            f"bond length {float(np.ravel(bad)[0]):.6g} outside potential domain "
            f"[{spec.r_min:.6g}, {spec.r_max:.6g}]"
        )
    if spec.kind == QUADRATIC:
        out = 0.5 * spec.kappa * (arr - 1.0) ** 2
    else:
        out = spec._interp(arr)
    return float(out) if out.ndim == 0 else out


def eval_v_prime(spec: PotentialSpec, r: float, step: float = 1e-6) -> float:
    """V'(r): exact for the quadratic kind, central difference otherwise."""
    if spec.kind == QUADRATIC:
        return spec.kappa * (r - 1.0)
    lo = max(r - step, spec.r_min)
    hi = min(r + step, spec.r_max)
    return (eval_v(spec, hi) - eval_v(spec, lo)) / (hi - lo)


def pressure_coefficient(spec: PotentialSpec) -> float:
    """p(l) = 2*sqrt(3)*V'(l)/l, the area-pressure coefficient at spacing l."""
    return 2.0 * SQRT3 * eval_v_prime(spec, spec.l) / spec.l


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def raise_if_invalid(self):
        if not self.passed:
            names = ", ".join(f"{c.name} ({c.detail})" for c in self.failures())
            raise ValueError(f"potential validation failed: {names}")


def validate(spec: PotentialSpec, grid_points: int = 1001) -> ValidationReport:
    """Check the three standing assumptions; report measured values.

    Convexity is a sampling heuristic: V'' > 0 is tested by central second
    differences on a grid over [1-alpha, 1+alpha], not proven.
    """
    checks = []

    # assumption 2 first: V must cover the constraint window
    if spec.kind == TABULATED:
        r_lo, r_hi = spec.knots[0, 0], spec.knots[-1, 0]
        covered = r_lo <= spec.r_min and r_hi >= spec.r_max
        checks.append(
            CheckResult(
                "domain-covers-alpha-window",
                covered,
                measured=min(spec.r_min - r_lo, r_hi - spec.r_max),
                detail=f"knots span [{r_lo:.6g}, {r_hi:.6g}]",
            )
        )
    else:
        checks.append(CheckResult("domain-covers-alpha-window", True, 0.0))
    domain_ok = checks[-1].passed

    if domain_ok:
        grid = np.linspace(spec.r_min, spec.r_max, grid_points)
        vals = eval_v(spec, grid)
        h = grid[1] - grid[0]
        second = (vals[2:] - 2.0 * vals[1:-1] + vals[:-2]) / (h * h)
        min_vpp = float(np.min(second))
        checks.append(
            CheckResult(
                "convexity",
                min_vpp > 0.0,
                measured=min_vpp,
                detail=f"min sampled V'' on {grid_points}-point grid",
            )
        )
        first = (vals[2:] - vals[:-2]) / (2.0 * h)
        lip = float(np.max(np.abs(first)))
        checks.append(
            CheckResult("lipschitz-bound", math.isfinite(lip), measured=lip)
        )
        vp1 = eval_v_prime(spec, 1.0)
        checks.append(
            CheckResult(
                "stationary-at-one",
                abs(vp1) <= 1e-8,
                measured=vp1,
                detail="V'(1) within 1e-8 of 0",
            )
        )
    else:
        checks.append(CheckResult("convexity", False, math.nan, "domain not covered"))
        checks.append(CheckResult("lipschitz-bound", False, math.nan))
        checks.append(CheckResult("stationary-at-one", False, math.nan))

    lo, hi = 1.0 - spec.alpha / 2.0, 1.0 + spec.alpha / 2.0
    checks.append(
        CheckResult(
            "spacing-in-window",
            lo < spec.l < hi,
            measured=spec.l,
            detail=f"l must lie in ({lo:.6g}, {hi:.6g})",
        )
    )
    return ValidationReport(checks)
