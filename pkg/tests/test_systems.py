import numpy as np
import pytest

from bishadow.systems import (
    AffineMap,
    ChartDomainError,
    PerturbedCatMap,
    Phase,
    ShiftedMap,
    cat_map,
    estimate_bounds,
    sup_distance,
)

from _oracles import CAT_EXPANDING, finite_difference_jacobian

TORUS = Phase("torus", 2)


class TestPhase:
    def test_canon_idempotent(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(-3, 3, size=(200, 2))
        once = TORUS.canon(pts)
        assert np.array_equal(TORUS.canon(once), once)
        assert np.all(once >= 0) and np.all(once < 1)

    def test_canon_edge_rounding(self):
        # tiny negative values round to 1.0 under mod; must land back at 0
        assert TORUS.canon(np.array([-1e-18, 0.5]))[0] == 0.0

    def test_wrap_half_open_interval(self):
        w = TORUS.wrap(np.array([0.5, -0.5]))
        assert w[0] == 0.5 and w[1] == 0.5

    def test_exp_translation_mod_one(self):
        q = TORUS.exp([0.9, 0.9], [0.2, 0.2])
        assert np.allclose(q, [0.1, 0.1], atol=1e-12)

    def test_exp_zero_vector(self):
        p = np.array([0.3, 0.7])
        assert np.array_equal(TORUS.exp(p, [0.0, 0.0]), p)

    def test_log_round_trip(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            p = rng.random(2)
            v = rng.uniform(-1, 1, 2)
            v *= 0.25 * rng.random() / np.linalg.norm(v)
            assert np.abs(TORUS.log(p, TORUS.exp(p, v)) - v).max() <= 1e-14

    def test_exp_of_log_returns_target(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            p, q = rng.random(2), rng.random(2)
            if TORUS.distance(p, q) >= 0.5:
                continue
            assert TORUS.distance(TORUS.exp(p, TORUS.log(p, q)), q) <= 1e-14

    def test_log_domain_error(self):
        with pytest.raises(ChartDomainError):
            TORUS.log([0.0, 0.0], [0.5, 0.0])

    def test_distance_examples(self):
        assert TORUS.distance([0.3, 0.4], [0.3, 0.4]) == 0.0
        assert np.isclose(TORUS.distance([0.95, 0.0], [0.05, 0.0]), 0.1)
        eu = Phase("euclidean", 2)
        assert eu.distance([0.0, 0.0], [3.0, 4.0]) == 5.0

    def test_distance_metric_properties(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            p, q, r = rng.random((3, 2))
            assert np.isclose(TORUS.distance(p, q), TORUS.distance(q, p))
            assert TORUS.distance(p, r) <= TORUS.distance(p, q) + TORUS.distance(q, r) + 1e-12

    def test_exp_norm_matches_distance_below_injectivity(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            p = rng.random(2)
            v = rng.uniform(-1, 1, 2)
            v *= 0.49 * rng.random() / np.linalg.norm(v)
            assert np.isclose(TORUS.distance(p, TORUS.exp(p, v)), np.linalg.norm(v))

    def test_dim_guard(self):
        with pytest.raises(ValueError):
            Phase("torus", 1)


class TestShippedSystems:
    def test_cat_map_fixed_point(self):
        f = cat_map()
        assert np.array_equal(f([0.0, 0.0]), [0.0, 0.0])

    def test_cat_map_half_half(self):
        f = cat_map()
        assert np.allclose(f([0.5, 0.5]), [0.5, 0.0], atol=1e-15)

    def test_cat_map_jacobian_constant(self):
        f = cat_map()
        rng = np.random.default_rng(0)
        j = f.jacobian(rng.random((5, 2)))
        assert np.array_equal(j[0], [[2.0, 1.0], [1.0, 1.0]])
        assert np.array_equal(j[3], j[0])

    def test_perturbed_zero_amplitude_matches_cat(self):
        f = PerturbedCatMap(0.0)
        rng = np.random.default_rng(2)
        pts = rng.random((20, 2))
        assert np.allclose(f(pts), cat_map()(pts))
        assert np.array_equal(f.jacobian(pts[0]), [[2.0, 1.0], [1.0, 1.0]])

    @pytest.mark.parametrize("make", [
        cat_map,
        lambda: PerturbedCatMap(0.02),
        lambda: AffineMap(np.diag([2.0, 0.5])),
        lambda: ShiftedMap(cat_map(), [0.01, 0.0]),
    ])
    def test_jacobian_matches_finite_differences(self, make):
        f = make()
        rng = np.random.default_rng(5)
        for _ in range(100):
            p = f.phase.random_point(rng)
            jac = f.jacobian(p)
            fd = finite_difference_jacobian(f, p)
            assert np.abs(jac - fd).max() <= 1e-6 * max(1.0, np.abs(jac).max())

    def test_forward_commutes_with_canonicalization(self):
        f = PerturbedCatMap(0.05)
        rng = np.random.default_rng(9)
        pts = rng.uniform(-2, 2, size=(50, 2))
        assert np.allclose(f(pts), f(f.phase.canon(pts)), atol=1e-12)

    def test_perturbed_inverse_round_trip(self):
        f = PerturbedCatMap(0.05)
        rng = np.random.default_rng(4)
        for _ in range(20):
            p = rng.random(2)
            assert f.phase.distance(f.inverse(f(p)), p) <= 1e-12

    def test_cat_inverse_exact(self):
        f = cat_map()
        rng = np.random.default_rng(6)
        p = rng.random((10, 2))
        assert np.allclose(f.inverse(f(p)), p, atol=1e-12)

    def test_affine_sequence_hooks(self):
        f = cat_map()
        assert f.at_step(3) is f


class TestBoundsAndSupDistance:
    def test_cat_bounds_exact(self):
        b = estimate_bounds(cat_map())
        assert np.isclose(b.R, CAT_EXPANDING, atol=1e-12)
        assert b.lip_modulus == 0.0

    def test_perturbed_bounds_sampled(self):
        f = PerturbedCatMap(0.02)
        b = estimate_bounds(f, grid_res=64, scale=0.1)
        assert b.R >= CAT_EXPANDING - 0.05
        # |Df(x + u) - Df(x)| <= amplitude * 2 pi |u|
        assert 0 < b.lip_modulus <= 0.02 * 2 * np.pi * 0.1 * 1.01

    def test_sup_distance_zero_and_shift(self):
        f = cat_map()
        assert sup_distance(f, f, 64) == 0.0
        g = ShiftedMap(f, [0.001, 0.0])
        assert np.isclose(sup_distance(f, g, 64), 0.001)

    def test_sup_distance_monotone_in_resolution(self):
        f = PerturbedCatMap(0.03)
        g = PerturbedCatMap(0.031)
        assert sup_distance(f, g, 128) >= sup_distance(f, g, 64)

    def test_sup_distance_euclidean_affine(self):
        f = AffineMap(np.diag([2.0, 0.5]))
        g = AffineMap(np.diag([2.0, 0.5]), [1e-3, 0.0])
        assert np.isclose(sup_distance(f, g), 1e-3)
