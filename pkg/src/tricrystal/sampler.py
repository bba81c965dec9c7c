"""Metropolis-Hastings chain targeting the Gibbs measure on allowed
configurations.

Moves: single-site displacement (symmetric disk proposal) and defect
creation/annihilation.  The dimension-changing pair works against the
per-site reference measure (Lebesgue + point mass at the hole state):
insertion draws the new position uniformly from a disk of radius rho around
the hole-fill point with density q = 1/(pi rho^2), giving acceptance factors
    particle -> hole:  min(1, exp(-beta dH) * q * p_annihilate/p_create)
    hole -> particle:  min(1, exp(-beta dH) / q * p_create/p_annihilate).
Proposals that violate a hard constraint are rejected outright.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import energy as energy_mod
from .configuration import Configuration, check_constraints
from .lattice import DIR_VECTORS, LatticeTorus
from .potential import eval_v, validate
from .version import VERSION

CHECKPOINT_FORMAT = "tricrystal-checkpoint-v1"

_MOVE_KINDS = (energy_mod.DISPLACE, energy_mod.CREATE, energy_mod.ANNIHILATE)


@dataclass
class MoveParams:
    """Move mix and proposal geometry; ``delta``/``rho`` default to
    alpha/8 and alpha/4 of the potential spec."""

    p_displace: float = 0.9
    p_create: float = 0.05
    p_annihilate: float = 0.05
    delta: float | None = None
    rho: float | None = None
    tune_interval: int = 25  # sweeps between burn-in step-size updates
    tune_low: float = 0.3
    tune_high: float = 0.5

    def __post_init__(self):
        total = self.p_displace + self.p_create + self.p_annihilate
        if abs(total - 1.0) > 1e-12:
            raise ValueError("move probabilities must sum to 1")
        if self.p_displace <= 0.0:
            raise ValueError("p_displace must be positive")
        if (self.p_create > 0.0) != (self.p_annihilate > 0.0):
            raise ValueError("create and annihilate must both be enabled or both disabled")


@dataclass
class Tally:
    proposed: int = 0
    accepted: int = 0
    hard_rejected: int = 0
    invalid_site: int = 0

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


class Chain:
    """One Markov chain exclusively owning its configuration and generator."""

    AUDIT_EVERY = 10_000  # accepted moves between cache/energy audits
    AUDIT_TOL = 1e-9

    def __init__(self, config: Configuration, params: MoveParams | None = None, seed=0):
        validate(config.spec).raise_if_invalid()
        report = check_constraints(config)
        if not report.ok:
            raise ValueError(f"initial configuration violates constraints: {report}")
        self.config = config
        self.params = params or MoveParams()
        spec = config.spec
        self.delta = self.params.delta if self.params.delta is not None else spec.alpha / 8.0
        self.rho = self.params.rho if self.params.rho is not None else spec.alpha / 4.0
        if not 0.0 < self.rho:
            raise ValueError("rho must be positive")
        self.rng = np.random.default_rng(seed)
        self.seed = seed
        self.sweeps_done = 0
        self.burned_in = False
        self.tallies = {kind: Tally() for kind in _MOVE_KINDS}
        self.energy = energy_mod.hamiltonian(config).total
        self._accepts_since_audit = 0
        self._window = [0, 0]  # displacement proposals, acceptances since tuning
        self._bind_tables()

    def _bind_tables(self):
        lat = self.config.lattice
        spec = self.config.spec
        self._n_sites = lat.n_sites
        self._nbr = lat.neighbor_ids
        self._w2 = lat.w2_ids
        self._u0 = lat.u0_tri_ids
        self._tri = lat.tri_corner_ids
        self._beta = spec.beta
        self._m = spec.m
        self._l = spec.l
        self._r_lo = spec.r_min
        self._r_hi = spec.r_max
        self._v = spec.scalar_v()
        self._ldir = tuple(spec.l * d for d in DIR_VECTORS)
        self._q_ins = 1.0 / (math.pi * self.rho * self.rho)
        if self.params.p_create > 0.0:
            create_factor = self._q_ins * self.params.p_annihilate / self.params.p_create
            self._log_create_factor = math.log(create_factor)
            self._log_annihilate_factor = -self._log_create_factor
        else:
            self._log_create_factor = self._log_annihilate_factor = -math.inf

    # -- geometry helpers -------------------------------------------------------

    def _disk(self, radius: float) -> complex:
        r = radius * math.sqrt(self.rng.random())
        phi = 2.0 * math.pi * self.rng.random()
        return complex(r * math.cos(phi), r * math.sin(phi))

    def _orientation_ok(self, tri_ids, override) -> bool:
        """Positive image orientation for the given triangles, with per-site
        displacement overrides applied."""
        cfg = self.config
        disp, fill, present = cfg.disp, cfg.fill, cfg.present
        n = self._n_sites
        l1u, l2u = self._ldir[0], self._ldir[1]
        l1d, l2d = self._ldir[1], self._ldir[2]

        def val(c):
            v = override.get(c)
            if v is not None:
                return v
            return disp[c] if present[c] else fill[c]

        for t in tri_ids:
            c0, c1, c2 = self._tri[t]
            u0 = val(c0)
            u1 = val(c1)
            u2 = val(c2)
            if t < n:
                e1 = l1u + u1 - u0
                e2 = l2u + u2 - u0
            else:
                e1 = l1d + u1 - u0
                e2 = l2d + u2 - u0
            if e1.real * e2.imag - e1.imag * e2.real <= 0.0:
                return False
        return True

    # -- elementary moves ---------------------------------------------------------

    def _metropolis(self, log_weight: float) -> bool:
        if log_weight >= 0.0:
            return True
        return self.rng.random() < math.exp(log_weight)

    def _move_displace(self, i: int):
        tally = self.tallies[energy_mod.DISPLACE]
        tally.proposed += 1
        cfg = self.config
        if not cfg.present[i]:
            tally.invalid_site += 1
            return
        self._window[0] += 1
        u_new = cfg.disp[i] + self._disk(self.delta)
        d_h = energy_mod._delta_displace(cfg, i, u_new)
        if d_h == math.inf:
            tally.hard_rejected += 1
            return
        override = {i: u_new}
        affected = list(self._u0[i])
        shift = (u_new - cfg.disp[i]) / 6.0
        for j in self._nbr[i]:
            if not cfg.present[j]:
                override[j] = cfg.fill[j] + shift
                affected.extend(self._u0[j])
        if not self._orientation_ok(affected, override):
            tally.hard_rejected += 1
            return
        if self._metropolis(-self._beta * d_h):
            cfg.set_displacement(i, u_new)
            self.energy += d_h
            tally.accepted += 1
            self._window[1] += 1
            self._after_accept()

    def _move_create(self, i: int):
        tally = self.tallies[energy_mod.CREATE]
        tally.proposed += 1
        cfg = self.config
        if not cfg.present[i]:
            tally.invalid_site += 1
            return
        for j in self._w2[i]:
            if not cfg.present[j]:
                tally.hard_rejected += 1
                return
        nbrs = self._nbr[i]
        u_fill = sum(cfg.disp[j] for j in nbrs) / 6.0
        if abs(cfg.disp[i] - u_fill) >= self.rho:
            # the reverse insertion could never propose this position
            tally.hard_rejected += 1
            return
        d_h = energy_mod._delta_create(cfg, i)
        if not self._orientation_ok(self._u0[i], {i: u_fill}):
            tally.hard_rejected += 1
            return
        if self._metropolis(-self._beta * d_h + self._log_create_factor):
            cfg.make_hole(i)
            self.energy += d_h
            tally.accepted += 1
            self._after_accept()

    def _move_annihilate(self, i: int):
        tally = self.tallies[energy_mod.ANNIHILATE]
        tally.proposed += 1
        cfg = self.config
        if cfg.present[i]:
            tally.invalid_site += 1
            return
        u_new = cfg.fill[i] + self._disk(self.rho)
        d_h = energy_mod._delta_annihilate(cfg, i, u_new)
        if d_h == math.inf:
            tally.hard_rejected += 1
            return
        if not self._orientation_ok(self._u0[i], {i: u_new}):
            tally.hard_rejected += 1
            return
        if self._metropolis(-self._beta * d_h + self._log_annihilate_factor):
            cfg.fill_site(i, u_new)
            self.energy += d_h
            tally.accepted += 1
            self._after_accept()

    def step(self):
        """One elementary Metropolis-Hastings update."""
        u = self.rng.random()
        i = int(self.rng.integers(self._n_sites))
        if u < self.params.p_displace:
            self._move_displace(i)
        elif u < self.params.p_displace + self.params.p_create:
            self._move_create(i)
        else:
            self._move_annihilate(i)

    def sweep(self):
        for _ in range(self._n_sites):
            self.step()
        self.sweeps_done += 1

    # -- audits -------------------------------------------------------------------

    def _after_accept(self):
        self._accepts_since_audit += 1
        if self._accepts_since_audit >= self.AUDIT_EVERY:
            self.audit()

    def audit(self):
        """Full recompute of energy and hole fills; abort on drift."""
        fresh = energy_mod.hamiltonian(self.config).total
        if abs(self.energy - fresh) > self.AUDIT_TOL * (1.0 + abs(fresh)):
            raise RuntimeError(
                f"energy cache drifted: running {self.energy!r} vs fresh {fresh!r}"
            )
        drift = self.config.fill_drift()
        if drift > self.AUDIT_TOL:
            raise RuntimeError(f"hole-fill cache drifted by {drift!r}")
        self.config.resync_fills()
        self.energy = fresh
        self._accepts_since_audit = 0

    # -- burn-in and sampling -------------------------------------------------------

    def burn_in(self, sweeps: int):
        """Run ``sweeps`` sweeps while tuning the displacement step size to a
        [tune_low, tune_high] acceptance window, then freeze it."""
        if self.burned_in:
            raise RuntimeError("chain already burned in; step size is frozen")
        interval = self.params.tune_interval
        self._window = [0, 0]
        for s in range(sweeps):
            self.sweep()
            if (s + 1) % interval == 0:
                self._tune()
        self.burned_in = True

    def _tune(self):
        proposed, accepted = self._window
        if proposed == 0:
            return
        rate = accepted / proposed
        alpha = self.config.spec.alpha
        if rate > self.params.tune_high:
            self.delta = min(self.delta * 1.25, alpha)
        elif rate < self.params.tune_low:
            self.delta = max(self.delta / 1.25, 1e-4 * alpha)
        self._window = [0, 0]

    def sample(self, sweeps: int, thin: int = 1):
        """Yield (sweep index, configuration snapshot) every ``thin`` sweeps."""
        if thin < 1:
            raise ValueError("thin must be at least 1")
        for s in range(sweeps):
            self.sweep()
            if (s + 1) % thin == 0:
                yield self.sweeps_done, self.config.copy()

    def acceptance_rates(self) -> dict:
        return {kind: self.tallies[kind].rate for kind in _MOVE_KINDS}

    # -- checkpointing ----------------------------------------------------------------

    def checkpoint_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": VERSION,
            "seed": self.seed,
            "config": self.config.snapshot_dict(),
            # cached hole fills are kept verbatim: recomputing them on load
            # could differ in the last bit and fork the resumed stream
            "fills": {
                str(i): [u.real, u.imag] for i, u in sorted(self.config.fill.items())
            },
            "rng_state": self.rng.bit_generator.state,
            "sweeps_done": self.sweeps_done,
            "burned_in": self.burned_in,
            "delta": self.delta,
            "rho": self.rho,
            "energy": self.energy,
            "accepts_since_audit": self._accepts_since_audit,
            "window": list(self._window),
            "move_params": {
                "p_displace": self.params.p_displace,
                "p_create": self.params.p_create,
                "p_annihilate": self.params.p_annihilate,
                "tune_interval": self.params.tune_interval,
                "tune_low": self.params.tune_low,
                "tune_high": self.params.tune_high,
            },
            "tallies": {
                kind: [t.proposed, t.accepted, t.hard_rejected, t.invalid_site]
                for kind, t in self.tallies.items()
            },
        }

    def save_checkpoint(self, path):
        with open(path, "w") as fh:
            json.dump(self.checkpoint_dict(), fh)
            fh.write("\n")

    @classmethod
    def from_checkpoint_dict(cls, data: dict) -> "Chain":
        if data.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {data.get('format')!r}")
        config = Configuration.from_snapshot(data["config"])
        mp = data["move_params"]
        params = MoveParams(
            p_displace=mp["p_displace"],
            p_create=mp["p_create"],
            p_annihilate=mp["p_annihilate"],
            delta=data["delta"],
            rho=data["rho"],
            tune_interval=mp["tune_interval"],
            tune_low=mp["tune_low"],
            tune_high=mp["tune_high"],
        )
        chain = cls(config, params, seed=data["seed"])
        for key, (re, im) in data["fills"].items():
            chain.config.fill[int(key)] = complex(re, im)
        chain.rng.bit_generator.state = data["rng_state"]
        chain.sweeps_done = data["sweeps_done"]
        chain.burned_in = data["burned_in"]
        chain.energy = data["energy"]
        chain._accepts_since_audit = data["accepts_since_audit"]
        chain._window = list(data["window"])
        for kind, (p, a, h, inv) in data["tallies"].items():
            t = chain.tallies[kind]
            t.proposed, t.accepted, t.hard_rejected, t.invalid_site = p, a, h, inv
        return chain

    @classmethod
    def load_checkpoint(cls, path) -> "Chain":
        with open(path) as fh:
            return cls.from_checkpoint_dict(json.load(fh))


def run(lattice: LatticeTorus, spec, sweeps: int, burn_in: int = 0, thin: int = 1,
        params: MoveParams | None = None, seed=0, initial: Configuration | None = None):
    """Build a chain and yield thinned post-burn-in snapshots; deterministic
    for a fixed seed.  Construct a Chain directly when tallies are needed."""
    from .configuration import standard_config

    config = initial if initial is not None else standard_config(lattice, spec)
    chain = Chain(config, params, seed=seed)
    chain.burn_in(burn_in)
    yield from chain.sample(sweeps, thin=thin)


# -- detailed-balance audit on a discretized single-site conditional ----------------


@dataclass
class AuditReport:
    tv_distance: float
    n_steps: int
    n_states: int
    n_disk: int
    hole_freq: float
    hole_prob_exact: float
    max_flow_asymmetry: float
    exact_probs: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)


def discretized_conditional(spec, grid_points: int = 21, span_factor: float = 2.0,
                            rho: float | None = None):
    """Exact single-site conditional on a displacement grid plus the hole state.

    One mobile site; the six neighbors are frozen at standard positions.  Grid
    cells carry weight h^2 exp(-beta E), the hole carries weight exp(-beta m).
    Returns (grid displacements, energies, weights, disk ids, h, rho).
    """
    if rho is None:
        rho = spec.alpha / 4.0
    half = span_factor * rho
    axis = np.linspace(-half, half, grid_points)
    h = axis[1] - axis[0]
    xs = (axis[None, :] + 1j * axis[:, None]).ravel()
    bonds = np.abs(spec.l * np.array(DIR_VECTORS)[None, :] - xs[:, None])
    if np.any(bonds <= spec.r_min) or np.any(bonds >= spec.r_max):
        raise ValueError("grid too wide: some states violate the bond window")
    energies = np.sum(
        np.reshape(eval_v(spec, bonds.ravel()), bonds.shape), axis=1
    )
    weights = np.exp(-spec.beta * energies) * h * h
    hole_weight = math.exp(-spec.beta * spec.m)
    disk_ids = np.nonzero(np.abs(xs) < rho)[0]
    return xs, energies, weights, hole_weight, disk_ids, h, rho


def detailed_balance_audit(spec=None, n_steps: int = 10_000_000,
                           grid_points: int = 21, params: MoveParams | None = None,
                           seed: int = 12345, batch: int = 1_000_000) -> AuditReport:
    """Drive the production acceptance rules on the discretized conditional and
    compare the empirical occupancy with the exactly normalized law."""
    from . import potential as potential_mod

    if spec is None:
        spec = potential_mod.quadratic(kappa=1.0, beta=1.0, m=5.0, alpha=0.1, l=1.0)
    params = params or MoveParams()
    xs, energies, weights, hole_weight, disk_ids, h, rho = discretized_conditional(
        spec, grid_points=grid_points
    )
    n_grid = len(xs)
    hole = n_grid
    q_d = 1.0 / (len(disk_ids) * h * h)
    p_d, p_c, p_a = params.p_displace, params.p_create, params.p_annihilate

    # exact stationary law
    probs = np.concatenate([weights, [hole_weight]])
    probs /= probs.sum()

    # acceptance tables mirroring the production factors with q -> q_d
    in_disk = np.zeros(n_grid, dtype=bool)
    in_disk[disk_ids] = True
    d_h_create = spec.m - energies
    acc_create = np.where(
        in_disk,
        np.minimum(1.0, np.exp(-spec.beta * d_h_create) * q_d * (p_a / p_c if p_c else 0.0)),
        0.0,
    )
    acc_annihilate = np.minimum(
        1.0, np.exp(-spec.beta * (-d_h_create)) * (p_c / p_a if p_a else 0.0) / q_d
    )

    # exact flow balance of the dimension-changing pair
    flow_in = probs[:n_grid] * p_c * acc_create
    flow_out = probs[hole] * p_a * acc_annihilate / len(disk_ids)
    flow_out = np.where(in_disk, flow_out, 0.0)
    scale = max(flow_in.max(), flow_out.max(), 1e-300)
    max_asym = float(np.max(np.abs(flow_in - flow_out)) / scale)

    # displacement flows are symmetric by the min() form; verify exactly
    w = weights
    ratio = np.minimum(1.0, w[None, :] / w[:, None])
    f = (probs[:n_grid, None] * ratio) * (p_d / n_grid)
    max_asym = max(max_asym, float(np.max(np.abs(f - f.T)) / f.max()))

    # table-driven chain
    ew = weights.tolist()
    acc_c = acc_create.tolist()
    acc_a = acc_annihilate.tolist()
    disk_list = disk_ids.tolist()
    n_disk = len(disk_list)
    counts_list = [0] * (n_grid + 1)
    rng = np.random.default_rng(seed)
    state = int(np.argmin(np.abs(xs)))  # start at the standard position
    p_dc = p_d + p_c
    done = 0
    while done < n_steps:
        todo = min(batch, n_steps - done)
        mu_l = rng.random(todo).tolist()
        jj_l = rng.integers(0, n_grid, todo).tolist()
        kk_l = rng.integers(0, n_disk, todo).tolist()
        au_l = rng.random(todo).tolist()
        for t in range(todo):
            u = mu_l[t]
            if u < p_d:
                if state != hole:
                    j = jj_l[t]
                    if au_l[t] * ew[state] < ew[j]:
                        state = j
            elif u < p_dc:
                if state != hole and au_l[t] < acc_c[state]:
                    state = hole
            else:
                if state == hole:
                    k = disk_list[kk_l[t]]
                    if au_l[t] < acc_a[k]:
                        state = k
            counts_list[state] += 1
        done += todo

    counts = np.array(counts_list, dtype=np.int64)
    emp = counts / n_steps
    tv = 0.5 * float(np.sum(np.abs(emp - probs)))
    return AuditReport(
        tv_distance=tv,
        n_steps=n_steps,
        n_states=n_grid + 1,
        n_disk=n_disk,
        hole_freq=float(emp[hole]),
        hole_prob_exact=float(probs[hole]),
        max_flow_asymmetry=max_asym,
        exact_probs=probs,
        counts=counts,
    )
