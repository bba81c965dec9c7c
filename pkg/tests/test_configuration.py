import json
import math

import numpy as np
import pytest

from tricrystal import quadratic
from tricrystal.configuration import (
    Configuration,
    EdgeClass,
    check_constraints,
    classify_edges,
    extension_jacobians,
    fill_hole_value,
    near_standard_sample,
    present_triangles,
    random_valid_config,
    standard_config,
)
from tricrystal.geometry import dist_so2, rotation
from tricrystal.lattice import LatticeTorus

from helpers import embed

SPEC = quadratic(kappa=100.0, alpha=0.1, l=1.0, m=20.0, beta=100.0)


def rotated_field_config(lattice, spec, theta):
    """Positions rotated rigidly about the origin (valid only patch-locally)."""
    factor = complex(math.cos(theta), math.sin(theta)) - 1.0
    disp = [
        factor * spec.l * complex(*embed(p, q)) for p, q in lattice.sites
    ]
    return Configuration(lattice, spec, disp=disp)


class TestStandardConfig:
    def test_all_jacobians_are_spacing_times_identity(self):
        lat = LatticeTorus(5)
        config = standard_config(lat, quadratic(kappa=100.0, l=1.02))
        jac = config.jacobian_field()
        assert jac.shape == (50, 2, 2)
        assert np.allclose(jac, 1.02 * np.eye(2)[None, :, :], atol=1e-14)
        assert float(np.max(dist_so2(jac / 1.02))) <= 1e-12

    def test_no_defects_all_inner(self):
        lat = LatticeTorus(5)
        config = standard_config(lat, SPEC)
        assert not config.defects
        assert set(classify_edges(config).values()) == {EdgeClass.INNER}


class TestFillHoleValue:
    def test_exact_lattice_neighbors(self):
        lat = LatticeTorus(6)
        spec = quadratic(kappa=100.0, l=1.02)
        config = standard_config(lat, spec)
        config.make_hole(lat.site_id(2, 3))
        value = fill_hole_value(config, (2, 3))
        assert value == pytest.approx(spec.l * lat.embed((2, 3)), abs=1e-14)

    def test_uniform_shift(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        shift = complex(0.01, -0.005)
        for i in range(lat.n_sites):
            config.set_displacement(i, shift)
        config.make_hole(lat.site_id(1, 1))
        value = fill_hole_value(config, (1, 1))
        assert value == pytest.approx(lat.embed((1, 1)) + shift, abs=1e-14)

    def test_against_brute_force_mean(self):
        lat = LatticeTorus(6)
        rng = np.random.default_rng(0)
        for _ in range(50):
            config = near_standard_sample(lat, SPEC, 0.02, rng)
            site = (int(rng.integers(6)), int(rng.integers(6)))
            i = lat.site_id(*site)
            config.make_hole(i)
            p, q = site
            total = 0j
            for (dp, dq), j in zip(
                [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)],
                lat.neighbor_ids[i],
            ):
                total += SPEC.l * complex(*embed(p + dp, q + dq)) + config.disp[j]
            assert fill_hole_value(config, site) == pytest.approx(total / 6.0, abs=1e-14)

    def test_errors(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        with pytest.raises(ValueError):
            fill_hole_value(config, (0, 0))  # not a hole
        config.make_hole(lat.site_id(0, 0))
        with pytest.raises(ValueError):
            config.make_hole(lat.site_id(1, 0))  # neighbor of a hole


class TestExtensionJacobians:
    def test_standard(self):
        lat = LatticeTorus(5)
        jacs = extension_jacobians(standard_config(lat, SPEC))
        assert len(jacs) == 50
        for m in jacs.values():
            assert np.allclose(m, np.eye(2), atol=1e-14)

    def test_global_rotation_on_interior_triangles(self):
        # wrap-free triangles of a rigidly rotated field carry the rotation
        lat = LatticeTorus(8)
        theta = 0.3
        config = rotated_field_config(lat, SPEC, theta)
        jacs = extension_jacobians(config)
        interior = [((3, 3), 0), ((3, 3), 1), ((4, 3), 0)]
        for tri in interior:
            assert np.allclose(jacs[tri], rotation(theta), atol=1e-12)

    def test_single_site_locality(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        before = config.jacobian_field().copy()
        i = lat.site_id(2, 2)
        config.set_displacement(i, complex(0.01, 0.004))
        after = config.jacobian_field()
        changed = {
            int(t) for t in np.nonzero(np.abs(after - before).max(axis=(1, 2)) > 0)[0]
        }
        assert changed == set(lat.u0_tri_ids[i])


class TestConstraints:
    def test_standard_passes(self):
        lat = LatticeTorus(6)
        report = check_constraints(standard_config(lat, SPEC))
        assert report.ok

    def test_stretched_bond_fails_omega1(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        config.set_displacement(lat.site_id(0, 0), complex(2 * SPEC.alpha, 0.0))
        report = check_constraints(config)
        assert not report.omega1
        assert report.violating_edges  # the stretched bond is named
        assert ((5, 0), 0) in report.violating_edges

    def test_close_defect_pair_fails_omega2(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        config.make_hole(lat.site_id(0, 0))
        config.present[lat.site_id(2, 0)] = False  # bypass mutator guard
        config.defects.add(lat.site_id(2, 0))
        config.fill[lat.site_id(2, 0)] = 0j
        report = check_constraints(config)
        assert not report.omega2
        assert ((0, 0), (2, 0)) in report.violating_pairs

    def test_flipped_triangle_fails_omega4(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        # push a site far past its +x neighbor: orientation flips
        config.set_displacement(lat.site_id(0, 0), complex(1.5, 0.0))
        report = check_constraints(config)
        assert not report.omega4
        assert report.violating_triangles


class TestClassifyEdges:
    def test_single_defect_counts(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        config.make_hole(lat.site_id(3, 3))
        classes = list(classify_edges(config).values())
        assert classes.count(EdgeClass.ABSENT) == 6
        assert classes.count(EdgeClass.BOUNDARY) == 6
        assert classes.count(EdgeClass.INNER) == lat.n_edges - 12

    def test_two_isolated_defects(self):
        lat = LatticeTorus(8)
        config = standard_config(lat, SPEC)
        config.make_hole(lat.site_id(0, 0))
        config.make_hole(lat.site_id(4, 0))
        classes = list(classify_edges(config).values())
        assert classes.count(EdgeClass.ABSENT) == 12
        assert classes.count(EdgeClass.BOUNDARY) == 12


class TestPresentTriangles:
    def test_counts(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        assert len(present_triangles(config)) == 72
        config.make_hole(lat.site_id(1, 1))
        assert len(present_triangles(config)) == 66
        config.make_hole(lat.site_id(4, 4))
        assert len(present_triangles(config)) == 60

    def test_complement_is_union_of_first_layers(self):
        lat = LatticeTorus(8)
        config = standard_config(lat, SPEC)
        for site in ((0, 0), (4, 1)):
            config.make_hole(lat.site_id(*site))
        missing = {
            lat.triangle_of_id(t) for t in range(lat.n_triangles)
        } - present_triangles(config)
        expected = lat.layer_u0((0, 0)) | lat.layer_u0((4, 1))
        assert missing == expected


class TestNearStandardSample:
    def test_zero_radius_is_standard(self):
        lat = LatticeTorus(5)
        rng = np.random.default_rng(1)
        config = near_standard_sample(lat, SPEC, 0.0, rng)
        assert all(u == 0j for u in config.disp)

    def test_radius_bound_enforced(self):
        lat = LatticeTorus(5)
        rng = np.random.default_rng(1)
        with pytest.raises(ValueError):
            near_standard_sample(lat, SPEC, SPEC.alpha / 4.0, rng)

    def test_always_valid(self):
        lat = LatticeTorus(5)
        rng = np.random.default_rng(2)
        for _ in range(1000):
            config = near_standard_sample(lat, SPEC, 0.024, rng)
            assert check_constraints(config).ok

    def test_bond_deviation_bounded(self):
        lat = LatticeTorus(5)
        rng = np.random.default_rng(3)
        r = 0.02
        config = near_standard_sample(lat, SPEC, r, rng)
        u = config.ueff_array()
        ends = lat.edge_endpoint_array
        bond = SPEC.l * lat.edge_direction_vectors + u[ends[:, 1]] - u[ends[:, 0]]
        assert float(np.max(np.abs(np.abs(bond) - SPEC.l))) <= 2.0 * r


class TestEquivariance:
    def test_translation_moves_fills(self):
        lat = LatticeTorus(6)
        rng = np.random.default_rng(4)
        config = near_standard_sample(lat, SPEC, 0.02, rng)
        config.make_hole(lat.site_id(2, 2))
        shift = complex(0.4, -0.2)
        shifted = Configuration(
            lat, SPEC,
            disp=[u + shift for u in config.disp],
            present=config.present,
        )
        assert fill_hole_value(shifted, (2, 2)) == pytest.approx(
            fill_hole_value(config, (2, 2)) + shift, abs=1e-12
        )

    def test_rotation_rotates_fills(self):
        lat = LatticeTorus(6)
        rng = np.random.default_rng(5)
        config = near_standard_sample(lat, SPEC, 0.02, rng)
        config.make_hole(lat.site_id(2, 2))
        theta = 0.7
        rot = complex(math.cos(theta), math.sin(theta))
        rotated = Configuration(
            lat, SPEC,
            disp=[
                rot * (SPEC.l * lat.embed(s) + u) - SPEC.l * lat.embed(s)
                for s, u in zip(lat.sites, config.disp)
            ],
            present=config.present,
        )
        assert fill_hole_value(rotated, (2, 2)) == pytest.approx(
            rot * fill_hole_value(config, (2, 2)), abs=1e-12
        )


class TestLocalityContract:
    def test_single_move_touches_only_first_layers(self):
        lat = LatticeTorus(7)
        rng = np.random.default_rng(6)
        config = near_standard_sample(lat, SPEC, 0.02, rng)
        hole = lat.site_id(3, 3)
        config.make_hole(hole)
        mover = lat.neighbor_ids[hole][0]

        ueff_before = config.ueff_array().copy()
        jac_before = config.jacobian_field().copy()
        config.set_displacement(mover, config.disp[mover] + complex(0.002, -0.001))

        # reference: rebuild from scratch
        fresh = Configuration(lat, SPEC, disp=config.disp, present=config.present)
        assert config.fill_drift() <= 1e-15
        ueff_after = fresh.ueff_array()
        jac_after = fresh.jacobian_field()

        changed_sites = set(np.nonzero(np.abs(ueff_after - ueff_before) > 0)[0])
        assert changed_sites == {mover, hole}
        changed_tris = set(
            np.nonzero(np.abs(jac_after - jac_before).max(axis=(1, 2)) > 0)[0]
        )
        assert changed_tris == set(lat.u0_tri_ids[mover]) | set(lat.u0_tri_ids[hole])


class TestPatchRigidityDegenerate:
    def test_rotation_patch_fills_rotate_exactly(self):
        # second layer carrying a pure rotation forces it on the first layer
        lat = LatticeTorus(8)
        theta = 0.4
        config = rotated_field_config(lat, SPEC, theta)
        center = (3, 3)
        config.make_hole(lat.site_id(*center))
        jac = config.jacobian_field()
        r = rotation(theta)
        for tri in lat.layer_u1(center):
            assert np.allclose(jac[lat.triangle_id(tri)], r, atol=1e-12)
        for tri in lat.layer_u0(center):
            assert np.allclose(jac[lat.triangle_id(tri)], r, atol=1e-12)


class TestSnapshot:
    def test_round_trip_bit_exact(self):
        lat = LatticeTorus(6)
        rng = np.random.default_rng(7)
        config = random_valid_config(lat, SPEC, rng)
        blob = json.dumps(config.snapshot_dict())
        clone = Configuration.from_snapshot(json.loads(blob))
        assert clone.present == config.present
        for i in range(lat.n_sites):
            if config.present[i]:
                assert clone.disp[i] == config.disp[i]
        assert clone.spec.beta == config.spec.beta
        assert clone.defects == config.defects

    def test_format_guard(self):
        with pytest.raises(ValueError):
            Configuration.from_snapshot({"format": "bogus"})


class TestMutators:
    def test_set_displacement_on_hole_raises(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        config.make_hole(lat.site_id(0, 0))
        with pytest.raises(ValueError):
            config.set_displacement(lat.site_id(0, 0), 0.01 + 0j)

    def test_fill_site_round_trip(self):
        lat = LatticeTorus(6)
        config = standard_config(lat, SPEC)
        i = lat.site_id(2, 2)
        config.make_hole(i)
        assert i in config.defects
        config.fill_site(i, complex(0.003, 0.001))
        assert i not in config.defects
        assert config.present[i]
        with pytest.raises(ValueError):
            config.fill_site(i, 0j)

    def test_random_valid_configs(self):
        lat = LatticeTorus(6)
        rng = np.random.default_rng(8)
        seen = set()
        for _ in range(60):
            config = random_valid_config(lat, SPEC, rng, max_defects=3)
            assert check_constraints(config).ok
            seen.add(len(config.defects))
        assert seen >= {0, 1, 2, 3}
