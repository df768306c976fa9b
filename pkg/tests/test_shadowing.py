import numpy as np
import pytest

from bishadow.oracle import bounded_orbit_closed_form
from bishadow.pseudo_orbit import assign_splittings, flatten, generate
from bishadow.shadowing import (
    apply_operator,
    build_problem,
    make_solver_config,
    shadowing_preconditions,
    solve_finite,
    solve_infinite,
    solve_periodic,
)
from bishadow.splitting import Splitting
from bishadow.systems import AffineMap, ShiftedMap, cat_map

from _oracles import random_affine_system

AXES = Splitting(np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]))


def cat_problem(lengths=(4,) * 5, jump=1e-4, seed=42, shift=(1e-4, 0.0),
                lam=0.4, lam_tilde=0.5, **cfg_kw):
    f = cat_map()
    po = generate(f, [0.13, 0.41], list(lengths), jump, seed)
    spl = assign_splittings(po, f, "eigen")
    g = ShiftedMap(f, list(shift)) if any(shift) else f
    cfg = make_solver_config(po, f, lam=lam, lam_tilde=lam_tilde, **cfg_kw)
    return f, g, po, spl, cfg


def bump_problem(delta=1e-3, n=8):
    f = AffineMap(np.diag([2.0, 0.5]))
    seeds = np.zeros((n + 1, 2))
    seeds[1] = [delta, delta]
    po = flatten(seeds, [1] * n, f)
    spl = assign_splittings(po, f, "user", splittings=AXES)
    cfg = make_solver_config(po, f, lam=0.55, lam_tilde=0.7, epsilon1=1.0)
    return f, po, spl, cfg


class TestLocalMaps:
    def test_genuine_orbit_charts_vanish_at_zero(self):
        f, g, po, spl, cfg = cat_problem(jump=0.0, shift=(0.0, 0.0))
        problem = build_problem(po, spl, f, f, cfg)
        z = np.zeros(2)
        for j in range(po.n_steps):
            assert np.allclose(problem.F(j, z), 0.0, atol=1e-15)

    def test_chart_offset_at_joins_is_residual(self):
        f, g, po, spl, cfg = cat_problem(jump=1e-4, shift=(0.0, 0.0))
        problem = build_problem(po, spl, f, f, cfg)
        z = np.zeros(2)
        for i, seg in enumerate(po.segments()):
            j_end = seg.start + seg.length - 1
            assert np.isclose(np.linalg.norm(problem.F(j_end, z)), po.residuals[i])
            for t in range(seg.length - 1):
                assert np.allclose(problem.F(seg.start + t, z), 0.0, atol=1e-15)

    def test_shift_offset_constant_in_charts(self):
        f, g, po, spl, cfg = cat_problem(shift=(1e-4, 0.0))
        problem = build_problem(po, spl, f, g, cfg)
        rng = np.random.default_rng(0)
        for _ in range(20):
            j = int(rng.integers(0, po.n_steps))
            v = 1e-3 * rng.standard_normal(2)
            diff = problem.G(j, v) - problem.F(j, v)
            assert np.allclose(diff, [1e-4, 0.0], atol=1e-15)

    def test_linearization_error_quadratic(self):
        from bishadow.systems import PerturbedCatMap

        f = PerturbedCatMap(0.05)
        po = generate(f, [0.3, 0.8], [3, 3], 0.0, 1)
        spl = assign_splittings(po, f, "power")
        cfg = make_solver_config(po, f, lam=0.45, lam_tilde=0.55, grid_res=64)
        problem = build_problem(po, spl, f, f, cfg)
        lip = 0.05 * 2 * np.pi  # derivative Lipschitz constant of the shear
        rng = np.random.default_rng(2)
        for _ in range(40):
            j = int(rng.integers(0, po.n_steps))
            v = 0.05 * rng.standard_normal(2)
            lin = problem.chart_jacobian(j, np.zeros(2)) @ v + problem.F(j, np.zeros(2))
            err = np.linalg.norm(problem.F(j, v) - lin)
            assert err <= 0.5 * lip * np.linalg.norm(v) ** 2 * 1.05


class TestUnstableComponent:
    def test_zero_maps_to_zero(self):
        f, g, po, spl, cfg = cat_problem()
        problem = build_problem(po, spl, f, g, cfg)
        out = problem.expand_unstable(2, np.zeros(2), np.zeros(1))
        assert np.allclose(out, 0.0, atol=1e-15)

    def test_linear_diagonal_doubles(self):
        f, po, spl, cfg = bump_problem()
        problem = build_problem(po, spl, f, f, cfg)
        w = np.array([0.01])
        out = problem.expand_unstable(0, np.zeros(2), w)
        assert np.allclose(out, 2.0 * w)
        back = problem.invert_unstable(0, np.zeros(2), out)
        assert np.allclose(back, w, atol=1e-14)

    def test_sampled_expansion_factor(self):
        f, g, po, spl, cfg = cat_problem()
        problem = build_problem(po, spl, f, g, cfg)
        rng = np.random.default_rng(3)
        for _ in range(1000):
            j = int(rng.integers(0, po.n_steps))
            v = np.zeros(2)
            w1 = cfg.eta * problem.l[j] * rng.uniform(-1, 1, 1)
            w2 = cfg.eta * problem.l[j] * rng.uniform(-1, 1, 1)
            d_out = problem.expand_unstable(j, v, w1) - problem.expand_unstable(j, v, w2)
            lhs = np.linalg.norm(d_out) / problem.l[j + 1]
            rhs = np.linalg.norm(w1 - w2) / problem.l[j]
            assert lhs >= rhs / cfg.lam_tilde * (1 - 1e-9)

    def test_newton_round_trip(self):
        f, g, po, spl, cfg = cat_problem()
        problem = build_problem(po, spl, f, g, cfg)
        rng = np.random.default_rng(4)
        for _ in range(1000):
            j = int(rng.integers(0, po.n_steps))
            v = 1e-3 * rng.standard_normal(2)
            w = 1e-2 * rng.uniform(-1, 1, 1)
            t = problem.expand_unstable(j, v, w)
            assert np.abs(problem.invert_unstable(j, v, t) - w).max() <= 1e-12


class TestOperator:
    def test_genuine_orbit_zero_fixed(self):
        f, g, po, spl, cfg = cat_problem(jump=0.0, shift=(0.0, 0.0))
        problem = build_problem(po, spl, f, f, cfg)
        v = np.zeros((po.n_steps + 1, 2))
        assert np.allclose(apply_operator(problem, v), 0.0, atol=1e-15)

    def test_ball_invariance_sampled(self):
        f, g, po, spl, cfg = cat_problem()
        problem = build_problem(po, spl, f, g, cfg)
        rng = np.random.default_rng(5)
        eta = cfg.eta
        for _ in range(100):
            v = np.empty((po.n_steps + 1, 2))
            for j in range(po.n_steps + 1):
                sp = spl[j]
                a = eta * problem.l[j] * rng.uniform(-1, 1, 1)
                b = eta * problem.l[j] * rng.uniform(-1, 1, 1)
                v[j] = sp.assemble(a, b)
            w = apply_operator(problem, v)
            for j in range(po.n_steps + 1):
                assert problem.ball_norm_n(j, w[j]) <= eta * (1 + 1e-9)

    def test_affine_single_application_matches_green_sums(self):
        # one application from zero reproduces the depth-one truncated sums
        f = AffineMap(np.diag([2.0, 0.5]))
        seeds = np.zeros((5, 2))
        seeds[2] = [1e-3, 1e-3]
        po = flatten(seeds, [1] * 4, f)
        spl = assign_splittings(po, f, "user", splittings=AXES)
        cfg = make_solver_config(po, f, lam=0.55, lam_tilde=0.7, epsilon1=1.0)
        problem = build_problem(po, spl, f, f, cfg)
        w = apply_operator(problem, np.zeros((5, 2)))
        for j in range(4):
            r = problem.F(j, np.zeros(2))
            assert np.isclose(w[j + 1][1], r[1] + 0.0, atol=1e-15)   # stable row
            assert np.isclose(w[j][0], -r[0] / 2.0, atol=1e-15)      # unstable row


class TestSolveFinite:
    def test_genuine_orbit_gives_zero(self):
        f, g, po, spl, cfg = cat_problem(jump=0.0, shift=(0.0, 0.0))
        res = solve_finite(po, spl, f, f, cfg)
        assert res.converged
        assert np.abs(res.v).max() == 0.0
        assert res.max_distance == 0.0
        assert np.array_equal(res.shadow_point, po.points[0])

    def test_bump_oracle_shadow_point(self):
        f, po, spl, cfg = bump_problem(delta=1e-3)
        res = solve_finite(po, spl, f, f, cfg)
        assert res.converged
        assert np.linalg.norm(res.shadow_point) <= 1e-10
        assert np.isclose(res.max_distance, np.sqrt(2) * 1e-3, atol=1e-12)

    def test_cat_jump_and_shift_run(self):
        f, g, po, spl, cfg = cat_problem()
        res = solve_finite(po, spl, f, g, cfg)
        assert res.converged
        assert res.max_distance <= cfg.epsilon1
        assert res.max_distance <= 5 * (1e-4 + 1e-4) / (1 - cfg.lam_tilde)
        assert res.residual_max <= 10 * cfg.tol_fix
        assert res.ball_margin <= 1.0

    def test_distance_identity(self):
        f, g, po, spl, cfg = cat_problem()
        res = solve_finite(po, spl, f, g, cfg)
        for j in range(po.n_steps + 1):
            n_norm = np.linalg.norm(res.v[j]) / res.scale[j]
            assert abs(res.distances[j] - res.scale[j] * n_norm) <= 1e-12

    def test_orbit_drift_stays_small(self):
        f, g, po, spl, cfg = cat_problem()
        res = solve_finite(po, spl, f, g, cfg)
        assert res.orbit_drift <= 1e-6

    def test_fixed_point_is_true_orbit_of_g(self):
        f, g, po, spl, cfg = cat_problem()
        problem = build_problem(po, spl, f, g, cfg)
        res = solve_finite(po, spl, f, g, cfg)
        for j in range(po.n_steps):
            gap = res.v[j + 1] - problem.G(j, res.v[j])
            assert np.linalg.norm(gap) <= 10 * cfg.tol_fix

    def test_oracle_equivalence_random_affine(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            sysm, sp = random_affine_system(rng)
            po = sysm.zero_pseudo_orbit()
            spl = assign_splittings(po, sysm, "user", splittings=sp)
            cfg = make_solver_config(po, sysm, lam=0.75, lam_tilde=0.8, epsilon1=1.0)
            res = solve_finite(po, spl, sysm, sysm, cfg)
            oracle = bounded_orbit_closed_form(sysm)
            assert res.converged
            assert np.abs(res.v - oracle).max() <= 1e-8

    def test_swapped_direction_also_converges(self):
        # certify the perturbed map's own pseudo-orbit and shadow with f
        f = cat_map()
        g = ShiftedMap(f, [1e-4, 0.0])
        po = generate(g, [0.13, 0.41], [3, 3, 3], 1e-4, 6)
        spl = assign_splittings(po, g, "eigen")
        cfg = make_solver_config(po, g, lam=0.4, lam_tilde=0.5)
        res = solve_finite(po, spl, g, f, cfg)
        assert res.converged and res.max_distance <= cfg.epsilon1


class TestSolveInfinite:
    @staticmethod
    def _master(jump=1e-4, lengths_each=2, k_max=10, shift=(5e-5, 5e-5)):
        f = cat_map()
        master = generate(f, [0.2, 0.6], [lengths_each] * (2 * k_max + 1),
                          jump, 11, i_min=-k_max)
        g = ShiftedMap(f, list(shift)) if any(shift) else f
        cfg = make_solver_config(master, f, lam=0.4, lam_tilde=0.5, tol_fix=1e-13)

        def window_problem(k):
            w = master.window(-k, k)
            return w, assign_splittings(w, f, "eigen"), f, g

        return window_problem, cfg

    def test_boundary_influence_decays_geometrically(self):
        window_problem, cfg = self._master()
        _, table = solve_infinite(window_problem, [2, 4, 6, 8, 10], cfg)
        d = table.diffs()
        assert all(d[i] / d[i + 1] >= 1.5 for i in range(len(d) - 1))

    def test_genuine_orbit_all_windows_zero(self):
        window_problem, cfg = self._master(jump=0.0, shift=(0.0, 0.0))
        res, table = solve_infinite(window_problem, [2, 4, 6], cfg)
        assert all(np.allclose(r.v0, 0.0, atol=1e-15) for r in table.rows)
        assert table.converged

    def test_declares_convergence_when_diffs_settle(self):
        window_problem, cfg = self._master()
        _, table = solve_infinite(window_problem, [2, 4, 6, 8, 9, 10], cfg)
        assert table.rows[-1].diff < 1e-10


class TestSolvePeriodic:
    def test_cat_fixed_point(self):
        f = cat_map()
        seeds = np.zeros((2, 2))
        po = flatten(seeds, [1], f)
        spl = assign_splittings(po, f, "eigen")
        cfg = make_solver_config(po, f, lam=0.4, lam_tilde=0.5)
        res = solve_periodic(po, spl, f, f, cfg)
        assert res.converged
        assert np.array_equal(res.shadow_point, [0.0, 0.0])
        assert res.periodic_closure == 0.0

    def test_period_two_cycle_recovered(self):
        from bishadow.oracle import cat_map_periodic_points

        f = cat_map()
        cycle = [p for p in cat_map_periodic_points(2) if p != (0, 0)][0]
        x0 = np.array([float(v) for v in cycle])
        orbit = f.orbit(x0, 1)
        seeds = np.array([orbit[0], orbit[1], orbit[0]])
        po = flatten(seeds, [1, 1], f)
        spl = assign_splittings(po, f, "eigen")
        cfg = make_solver_config(po, f, lam=0.4, lam_tilde=0.5)
        res = solve_periodic(po, spl, f, f, cfg)
        assert res.converged
        assert np.linalg.norm(res.shadow_point - x0) <= 1e-12
        assert res.periodic_closure <= 1e-10
        assert res.periodic_closure_polished <= 1e-12

    def test_perturbed_three_segment_cycle(self):
        from bishadow.oracle import cat_map_periodic_points

        f = cat_map()
        cyc = [p for p in cat_map_periodic_points(3) if p != (0, 0)][0]
        orb = f.orbit(np.array([float(v) for v in cyc]), 3)
        rng = np.random.default_rng(5)
        jit = [f.phase.canon(orb[i] + 1e-4 * rng.standard_normal(2)) for i in range(3)]
        po = flatten(np.array(jit + [jit[0]]), [1, 1, 1], f)
        spl = assign_splittings(po, f, "eigen")
        g = ShiftedMap(f, [1e-4, 0.0])
        cfg = make_solver_config(po, f, lam=0.4, lam_tilde=0.5)
        res = solve_periodic(po, spl, f, g, cfg)
        assert res.converged
        assert res.seam_gap <= 1e-10
        assert res.periodic_closure_polished <= 1e-10
        assert res.max_distance <= cfg.epsilon1

    def test_translation_invariance_over_repeated_periods(self):
        # q copies of the cycle give the same anchor tangent vector
        from bishadow.oracle import cat_map_periodic_points

        f = cat_map()
        cyc = [p for p in cat_map_periodic_points(2) if p != (0, 0)][0]
        orb = f.orbit(np.array([float(v) for v in cyc]), 1)
        rng = np.random.default_rng(9)
        jit = [f.phase.canon(orb[i] + 5e-5 * rng.standard_normal(2)) for i in range(2)]
        g = ShiftedMap(f, [5e-5, 0.0])
        anchors = []
        for q in (1, 2, 3):
            seeds = np.array((jit * q) + [jit[0]])
            po = flatten(seeds, [1] * (2 * q), f)
            spl = assign_splittings(po, f, "eigen")
            cfg = make_solver_config(po, f, lam=0.4, lam_tilde=0.5)
            res = solve_periodic(po, spl, f, g, cfg)
            assert res.converged
            anchors.append(res.v[0])
        assert np.abs(anchors[0] - anchors[1]).max() <= 1e-11
        assert np.abs(anchors[0] - anchors[2]).max() <= 1e-11

    def test_periodicity_guard(self):
        f, g, po, spl, cfg = cat_problem(lengths=(2, 2), jump=1e-4)
        with pytest.raises(ValueError):
            solve_periodic(po, spl, f, g, cfg)


class TestPreconditions:
    def test_margins_nonnegative_for_admissible_run(self):
        f, g, po, spl, cfg = cat_problem()
        cert, margins = shadowing_preconditions(po, spl, f, g, cfg, grid_res=64)
        assert cert.passed
        assert min(margins.values()) >= 0

    def test_margins_flag_oversized_jump(self):
        f, g, po, spl, cfg = cat_problem(jump=5e-3)
        cert, margins = shadowing_preconditions(po, spl, f, g, cfg, grid_res=64)
        assert margins["delta"] < 0
