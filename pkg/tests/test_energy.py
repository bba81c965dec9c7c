import math

import numpy as np
import pytest

from tricrystal import quadratic
from tricrystal.configuration import (
    Configuration,
    near_standard_sample,
    random_valid_config,
    standard_config,
)
from tricrystal.energy import (
    ANNIHILATE,
    CREATE,
    DISPLACE,
    Move,
    apply_move,
    decomposition_residual,
    decomposition_sides,
    energy_delta,
    energy_gap,
    hamiltonian,
    mean_jacobian,
    rigidity_terms,
    standard_energy,
)
from tricrystal.lattice import LatticeTorus
from tricrystal.potential import eval_v

from helpers import brute_hamiltonian

SPEC = quadratic(kappa=100.0, alpha=0.1, l=1.02, m=20.0, beta=100.0)
SPEC1 = quadratic(kappa=100.0, alpha=0.1, l=1.0, m=20.0, beta=100.0)


class TestHamiltonian:
    def test_standard_value(self):
        lat = LatticeTorus(6)
        b = hamiltonian(standard_config(lat, SPEC))
        v_l = eval_v(SPEC, SPEC.l)
        assert b.total == pytest.approx(3 * 36 * v_l, rel=1e-12)
        assert b.defect_term == 0.0
        assert b.total == b.bond_sum + b.defect_term

    def test_one_defect_value(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        config.make_hole(lat.site_id(2, 2))
        b = hamiltonian(config)
        v_l = eval_v(SPEC, SPEC.l)
        assert b.total == pytest.approx(3 * 36 * v_l - 6 * v_l + SPEC.m, rel=1e-12)

    def test_against_brute_force_double_sum(self):
        rng = np.random.default_rng(0)
        for n in (5, 6):
            lat = LatticeTorus(n)
            for _ in range(40):
                config = random_valid_config(lat, SPEC, rng)
                mine = hamiltonian(config).total
                ref = brute_hamiltonian(config)
                assert mine == pytest.approx(ref, abs=1e-12 * (1 + abs(ref)))

    def test_out_of_domain_names_edge(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC1)
        config.disp[lat.site_id(0, 0)] = complex(0.3, 0.0)  # bypass guards
        with pytest.raises(ValueError, match="edge"):
            hamiltonian(config)


class TestEnergyGap:
    def test_standard_is_zero(self):
        lat = LatticeTorus(6)
        assert energy_gap(standard_config(lat, SPEC)) == pytest.approx(0.0, abs=1e-12)

    def test_single_defect(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        config.make_hole(lat.site_id(1, 4))
        v_l = eval_v(SPEC, SPEC.l)
        assert energy_gap(config) == pytest.approx(SPEC.m - 6 * v_l, rel=1e-12)

    def test_shift_invariance(self):
        lat = LatticeTorus(6)
        rng = np.random.default_rng(1)
        config = random_valid_config(lat, SPEC, rng)
        gap = energy_gap(config)
        shift = (2, 3)
        offset = SPEC.l * lat.embed(shift)
        disp = [0j] * lat.n_sites
        present = [True] * lat.n_sites
        for p, q in lat.sites:
            src = lat.site_id(p - shift[0], q - shift[1])
            dst = lat.site_id(p, q)
            present[dst] = config.present[src]
            disp[dst] = config.disp[src] - offset
        shifted = Configuration(lat, SPEC, disp=disp, present=present)
        assert energy_gap(shifted) == pytest.approx(gap, abs=1e-9 * (1 + abs(gap)))


class TestEnergyDelta:
    def test_null_displacement(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        move = Move(DISPLACE, (2, 2), displacement=0j)
        assert energy_delta(config, move) == 0.0

    def test_against_full_recompute(self):
        rng = np.random.default_rng(2)
        lat = LatticeTorus(6)
        checked = 0
        while checked < 400:
            config = random_valid_config(lat, SPEC, rng)
            site = (int(rng.integers(6)), int(rng.integers(6)))
            i = lat.site_id(*site)
            kind = rng.choice([DISPLACE, CREATE, ANNIHILATE])
            if kind == DISPLACE:
                if not config.present[i]:
                    continue
                u = config.disp[i] + complex(*rng.normal(scale=0.01, size=2))
                move = Move(DISPLACE, site, displacement=u)
            elif kind == CREATE:
                if not config.present[i] or any(
                    not config.present[j] for j in lat.w2_ids[i]
                ):
                    continue
                move = Move(CREATE, site)
            else:
                if config.present[i]:
                    continue
                u = config.fill[i] + complex(*rng.normal(scale=0.01, size=2))
                move = Move(ANNIHILATE, site, displacement=u)
            before = hamiltonian(config).total
            delta = energy_delta(config, move)
            if delta == math.inf:
                continue
            apply_move(config, move)
            after = hamiltonian(config).total
            assert delta == pytest.approx(after - before, abs=1e-12 * (1 + abs(after)))
            checked += 1

    def test_create_in_standard(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        v_l = eval_v(SPEC, SPEC.l)
        delta = energy_delta(config, Move(CREATE, (3, 3)))
        assert delta == pytest.approx(SPEC.m - 6 * v_l, rel=1e-12)

    def test_hard_core_signals_infinity(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC1)
        move = Move(DISPLACE, (0, 0), displacement=complex(0.2, 0.0))
        assert energy_delta(config, move) == math.inf

    def test_invalid_targets_are_infinite(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        config.make_hole(lat.site_id(0, 0))
        assert energy_delta(config, Move(DISPLACE, (0, 0), 0j)) == math.inf
        assert energy_delta(config, Move(CREATE, (0, 0))) == math.inf
        assert energy_delta(config, Move(ANNIHILATE, (3, 3), 0j)) == math.inf
        # creating next to the existing hole would strand its fill
        assert energy_delta(config, Move(CREATE, (1, 0))) == math.inf

    def test_unknown_kind(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        with pytest.raises(ValueError):
            energy_delta(config, Move("swap", (0, 0)))


class TestDecomposition:
    def test_standard_exact_zero(self):
        lat = LatticeTorus(6)
        # at l = 1 every bond length evaluates to exactly l
        assert decomposition_residual(standard_config(lat, SPEC1)) == 0.0
        assert decomposition_residual(standard_config(lat, SPEC)) <= 1e-13

    def test_single_defect_standard_zero(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        config.make_hole(lat.site_id(2, 2))
        lhs, rhs = decomposition_sides(config)
        assert lhs == pytest.approx(0.0, abs=1e-12)
        assert abs(lhs - rhs) <= 1e-12

    def test_random_configs(self):
        rng = np.random.default_rng(3)
        for n in (5, 6):
            lat = LatticeTorus(n)
            for _ in range(60):
                config = random_valid_config(lat, SPEC, rng)
                lhs, _ = decomposition_sides(config)
                assert decomposition_residual(config) <= 1e-10 * (1.0 + abs(lhs))

    def test_boundary_bond_at_window_edge(self):
        # adversarial: one bond within 1e-6 of the hard-core boundary
        lat = LatticeTorus(6)
        spec = SPEC1
        config = standard_config(lat, spec)
        config.set_displacement(
            lat.site_id(0, 0), complex(spec.alpha - 1e-6, 0.0)
        )
        report_lhs, report_rhs = decomposition_sides(config)
        assert abs(report_lhs - report_rhs) <= 1e-10 * (1.0 + abs(report_lhs))


class TestRigidityTerms:
    def test_standard(self):
        lat = LatticeTorus(6)
        gap, rig, k = rigidity_terms(standard_config(lat, SPEC))
        assert abs(gap) <= 1e-12 and rig <= 1e-20 and k == 0

    def test_near_standard_positive(self):
        lat = LatticeTorus(6)
        rng = np.random.default_rng(4)
        config = near_standard_sample(lat, SPEC, SPEC.alpha / 8.0, rng)
        gap, rig, k = rigidity_terms(config)
        assert gap > 0.0 and rig > 0.0 and k == 0

    def test_mean_jacobian_identity(self):
        lat = LatticeTorus(6)
        rng = np.random.default_rng(5)
        for _ in range(20):
            config = random_valid_config(lat, SPEC, rng)
            mean = mean_jacobian(config)
            assert np.abs(mean - SPEC.l * np.eye(2)).max() <= 1e-10 * SPEC.l

    def test_present_rotation_degenerate_case(self):
        # standard configuration with a hole: every Jacobian stays l*id,
        # so the all-triangle and present-triangle sums both vanish
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        config.make_hole(lat.site_id(3, 3))
        from tricrystal.geometry import dist_so2

        d2 = dist_so2(config.jacobian_field() / SPEC.l) ** 2
        assert float(d2.sum()) <= 1e-20


def test_standard_energy_helper():
    lat = LatticeTorus(5)
    config = standard_config(lat, SPEC)
    assert standard_energy(config) == pytest.approx(
        3 * 25 * eval_v(SPEC, SPEC.l), rel=1e-14
    )
