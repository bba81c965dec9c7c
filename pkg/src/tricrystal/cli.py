"""Batch front-end: run simulations, verification suites, and parameter scans
from a flat key=value config file; emit plot-ready CSV tables, JSON reports,
and checkpoints.

Exit codes: 0 success, 1 validation failure, 2 runtime failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import harness as harness_mod
from . import observables as observables_mod
from . import potential as potential_mod
from .configuration import random_valid_config, standard_config
from .lattice import LatticeTorus
from .observables import CSV_FIELDS, loglog_slope, measure, non_increasing, strictly_decreasing
from .sampler import Chain, MoveParams
from .version import VERSION

OUT_DIR_ENV = "TRICRYSTAL_OUT_DIR"


class ConfigError(Exception):
    pass


class VerificationFailure(Exception):
    pass


KNOWN_KEYS = {
    "sim.N", "sim.beta", "sim.m", "sim.l", "sim.alpha",
    "potential.kind", "potential.kappa", "potential.file",
    "moves.p_displace", "moves.p_create", "moves.p_annihilate",
    "moves.delta", "moves.rho",
    "run.sweeps", "run.burn_in", "run.thin", "run.seed",
    "run.checkpoint_every", "run.resume",
    "out.dir",
    "scan.betas", "scan.ms",
    "verify.identity_configs", "verify.synthetic_samples",
    "verify.patch_samples", "verify.chain_sweeps", "verify.rigidity_samples",
    "verify.seed",
}


def parse_config(path) -> dict:
    """Flat ``section.key = value`` lines; '#' starts a comment."""
    entries = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    for no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{path}:{no}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"{path}:{no}: duplicate key {key!r}")
        entries[key] = (value, no)
    return entries


def _get(entries, key, default=None):
    if key in entries:
        return entries[key][0]
    return default


def _get_typed(entries, key, cast, default, path):
    if key not in entries:
        return default
    value, no = entries[key]
    try:
        return cast(value)
    except ValueError as exc:
        raise ConfigError(f"{path}:{no}: bad value for {key}: {value!r}") from exc


def _float_list(text: str):
    return [float(tok) for tok in text.replace(",", " ").split()]


def build_spec(entries, path) -> potential_mod.PotentialSpec:
    kind = _get(entries, "potential.kind", "quadratic")
    params = {
        "alpha": _get_typed(entries, "sim.alpha", float, 0.1, path),
        "l": _get_typed(entries, "sim.l", float, 1.0, path),
        "m": _get_typed(entries, "sim.m", float, 20.0, path),
        "beta": _get_typed(entries, "sim.beta", float, 100.0, path),
    }
    if kind == "quadratic":
        spec = potential_mod.quadratic(
            kappa=_get_typed(entries, "potential.kappa", float, 100.0, path), **params
        )
    elif kind == "tabulated":
        file_ = _get(entries, "potential.file")
        if file_ is None:
            raise ConfigError(f"{path}: potential.kind=tabulated needs potential.file")
        spec = potential_mod.tabulated_from_file(file_, **params)
    else:
        raise ConfigError(f"{path}: unknown potential.kind {kind!r}")
    report = potential_mod.validate(spec)
    if not report.passed:
        names = ", ".join(f"{c.name} (measured {c.measured!r})" for c in report.failures())
        raise ConfigError(f"{path}: potential validation failed: {names}")
    return spec


def build_move_params(entries, path) -> MoveParams:
    return MoveParams(
        p_displace=_get_typed(entries, "moves.p_displace", float, 0.9, path),
        p_create=_get_typed(entries, "moves.p_create", float, 0.05, path),
        p_annihilate=_get_typed(entries, "moves.p_annihilate", float, 0.05, path),
        delta=_get_typed(entries, "moves.delta", float, None, path),
        rho=_get_typed(entries, "moves.rho", float, None, path),
    )


def resolve_out_dir(entries) -> Path:
    out = os.environ.get(OUT_DIR_ENV) or _get(entries, "out.dir", "out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _meta_lines(entries, seed) -> list:
    lines = [f"# schema=samples-v1", f"# version={VERSION}", f"# seed={seed}"]
    for key in sorted(entries):
        lines.append(f"# {key}={entries[key][0]}")
    lines.append(f"# walltime_utc={time.strftime('%Y-%m-%dT%H:%M:%SZ', time.gmtime())}")
    return lines


def cmd_simulate(path) -> int:
    entries = parse_config(path)
    spec = build_spec(entries, path)
    n = _get_typed(entries, "sim.N", int, 8, path)
    sweeps = _get_typed(entries, "run.sweeps", int, 1000, path)
    burn_in = _get_typed(entries, "run.burn_in", int, 200, path)
    thin = _get_typed(entries, "run.thin", int, 1, path)
    seed = _get_typed(entries, "run.seed", int, 1, path)
    checkpoint_every = _get_typed(entries, "run.checkpoint_every", int, 0, path)
    resume = _get(entries, "run.resume")
    move_params = build_move_params(entries, path)
    out_dir = resolve_out_dir(entries)

    if resume:
        chain = Chain.load_checkpoint(resume)
        if chain.config.lattice.n != n:
            raise ConfigError(f"{path}: checkpoint torus size {chain.config.lattice.n} != sim.N {n}")
        done = chain.sweeps_done - burn_in
        remaining = sweeps - done
        if remaining < 0:
            raise ConfigError(f"{path}: checkpoint already past run.sweeps")
    else:
        lattice = LatticeTorus(n)
        chain = Chain(standard_config(lattice, spec), move_params, seed=seed)
        chain.burn_in(burn_in)
        remaining = sweeps

    csv_path = out_dir / "samples.csv"
    ckpt_path = out_dir / "checkpoint.json"
    rows = 0
    with open(csv_path, "w") as fh:
        for line in _meta_lines(entries, seed):
            fh.write(line + "\n")
        fh.write(",".join(CSV_FIELDS) + "\n")
        for sweep, snap in chain.sample(remaining, thin=thin):
            rec = measure(snap, step=sweep - burn_in)
            fh.write(",".join(_fmt(getattr(rec, f)) for f in CSV_FIELDS) + "\n")
            rows += 1
            if checkpoint_every and rows % checkpoint_every == 0:
                chain.save_checkpoint(ckpt_path)
    chain.save_checkpoint(ckpt_path)

    summary = {
        "version": VERSION,
        "seed": seed,
        "rows": rows,
        "sweeps_done": chain.sweeps_done,
        "delta_frozen": chain.delta,
        "acceptance": chain.acceptance_rates(),
        "params": {k: v[0] for k, v in sorted(entries.items())},
        "walltime_s": None,
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(f"simulate: wrote {rows} rows to {csv_path}")
    return 0


def cmd_verify(path) -> int:
    entries = parse_config(path)
    spec = build_spec(entries, path)
    seed = _get_typed(entries, "verify.seed", int, 1, path)
    per_n = _get_typed(entries, "verify.identity_configs", int, 150, path)
    synthetic = _get_typed(entries, "verify.synthetic_samples", int, 30_000, path)
    patch = _get_typed(entries, "verify.patch_samples", int, 2_000, path)
    chain_sweeps = _get_typed(entries, "verify.chain_sweeps", int, 400, path)
    rig_samples = _get_typed(entries, "verify.rigidity_samples", int, 150, path)
    out_dir = resolve_out_dir(entries)

    configs = harness_mod.identity_suite_configs(spec, per_n=per_n, seed=seed)
    identities = harness_mod.verify_identities(configs, seed=seed)

    n = _get_typed(entries, "sim.N", int, 6, path)
    lattice = LatticeTorus(n)
    chain = Chain(standard_config(lattice, spec), seed=seed)
    chain.burn_in(200)
    sampled = [snap for _, snap in chain.sample(chain_sweeps, thin=2)]
    rng = np.random.default_rng(seed)
    defective = [
        random_valid_config(lattice, spec, rng, max_defects=3) for _ in range(60)
    ]
    inequalities = harness_mod.verify_inequalities(
        sampled + defective, spec, seed=seed,
        synthetic_samples=synthetic, patch_samples=patch,
    )
    rigidity = harness_mod.estimate_rigidity_constant(
        samples=rig_samples, seed=seed, spec=spec
    )
    probe = harness_mod.defect_energy_probe(spec, max(n, 6), range(0, 3))

    report = {
        "schema": harness_mod.REPORT_SCHEMA,
        "version": VERSION,
        "seed": seed,
        "params": {k: v[0] for k, v in sorted(entries.items())},
        "identities": identities.to_dict(),
        "inequalities": inequalities.to_dict(),
        "rotation_fit_constant": {
            str(nn): {"max_ratio": est.max_ratio, "samples": est.samples,
                      "skipped": est.skipped}
            for nn, est in rigidity.items()
        },
        "defect_probe": {
            "fitted_cost": probe.fitted_cost,
            "expected_cost": probe.expected_cost,
            "rows": [
                {"k": r.k, "gap": r.gap, "boundary_edges": r.boundary_edges,
                 "residual": r.decomposition_residual}
                for r in probe.rows
            ],
        },
    }
    with open(out_dir / "verify_report.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")

    for rep in (identities, inequalities):
        for check in rep.checks:
            status = "pass" if check.passed else "FAIL"
            print(f"verify: {check.name}: {status} {check.values}")
    if not (identities.passed and inequalities.passed):
        raise VerificationFailure("verification suite failed; see verify_report.json")
    print(f"verify: report written to {out_dir / 'verify_report.json'}")
    return 0


SCAN_FIELDS = ("bond_dev_sq", "jac_dev_sq", "rigidity_sum", "energy_gap")


def cmd_scan(path) -> int:
    entries = parse_config(path)
    spec = build_spec(entries, path)
    n = _get_typed(entries, "sim.N", int, 6, path)
    betas = _float_list(_get(entries, "scan.betas", "25 50 100 200"))
    ms_text = _get(entries, "scan.ms")
    ms = _float_list(ms_text) if ms_text else None
    sweeps = _get_typed(entries, "run.sweeps", int, 2000, path)
    burn_in = _get_typed(entries, "run.burn_in", int, 500, path)
    thin = _get_typed(entries, "run.thin", int, 2, path)
    seed = _get_typed(entries, "run.seed", int, 1, path)
    move_params = build_move_params(entries, path)
    out_dir = resolve_out_dir(entries)

    result = observables_mod.symmetry_breaking_scan(
        n, spec, betas, ms=ms, sweeps=sweeps, burn_in=burn_in, thin=thin,
        seed=seed, params=move_params,
    )

    csv_path = out_dir / "scan.csv"
    with open(csv_path, "w") as fh:
        for line in _meta_lines(entries, seed):
            fh.write(line + "\n")
        header = ["beta", "m"]
        for f in SCAN_FIELDS:
            header += [f + "_mean", f + "_stderr", f + "_tau"]
        header += ["defect_density_mean", "defect_density_stderr",
                   "acc_displace", "acc_create", "acc_annihilate", "n_samples"]
        fh.write(",".join(header) + "\n")
        for row in result.rows:
            cells = [_fmt(row.beta), _fmt(row.m)]
            for f in SCAN_FIELDS:
                s = row.summaries[f]
                cells += [_fmt(s.mean), _fmt(s.stderr), _fmt(s.tau_int)]
            cells += [_fmt(row.defect_density.mean), _fmt(row.defect_density.stderr)]
            acc = row.acceptance
            cells += [_fmt(acc["displace"]), _fmt(acc["create"]), _fmt(acc["annihilate"])]
            cells.append(str(row.n_samples))
            fh.write(",".join(cells) + "\n")

    first_m = result.rows[0].m
    beta_rows = [r for r in result.rows if r.m == first_m]
    bond_means = [r.summaries["bond_dev_sq"].mean for r in beta_rows]
    jac_means = [r.summaries["jac_dev_sq"].mean for r in beta_rows]
    summary = {
        "version": VERSION,
        "seed": seed,
        "betas": betas,
        "ms": ms,
        "bond_dev_sq_loglog_slope": loglog_slope(betas, bond_means) if len(betas) > 1 else None,
        "jac_dev_sq_loglog_slope": loglog_slope(betas, jac_means) if len(betas) > 1 else None,
        "bond_dev_sq_strictly_decreasing": strictly_decreasing(bond_means),
        "jac_dev_sq_strictly_decreasing": strictly_decreasing(jac_means),
    }
    if ms and len(ms) > 1:
        beta0 = betas[0]
        dens = [r.defect_density.mean for r in result.rows if r.beta == beta0]
        summary["defect_density_non_increasing_in_m"] = non_increasing(dens)
    with open(out_dir / "scan_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(f"scan: wrote {len(result.rows)} rows to {csv_path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tricrystal",
        description="Monte Carlo and verification tool for a triangular-lattice "
        "crystal with isolated vacancies",
    )
    parser.add_argument("--version", action="version", version=VERSION)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("simulate", "run a chain and write samples.csv"),
        ("verify", "run the identity and inequality suites"),
        ("scan", "run a beta (and optional m) grid scan"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="path to a key=value config file")
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config)
        if args.command == "verify":
            return cmd_verify(args.config)
        return cmd_scan(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except VerificationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - contract: runtime failures exit 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
