"""Fixed-point solves, eigenpair conversions, rescaling, and the
multi-start uniqueness probe."""

import numpy as np
import pytest

from treegibbs import (
    CLUSTERING_TOL,
    ConstantKernel,
    ExponentialKernel,
    GridFunction,
    PolynomialKernel,
    SolveOptions,
    apply_hammerstein,
    discretize,
    extend_fixed_point,
    fixed_point_envelope,
    hammerstein_envelope,
    kernel_bounds,
    make_grid,
    uniqueness_probe,
)
from treegibbs.solver import (
    eigenpair_to_fixed_point,
    fixed_point_to_eigenpair,
    rescale_eigenpair,
    solve_fixed_point,
    solve_hammerstein_fixed_point,
    solve_linear,
)
from tests.conftest import separable_kernel

POLY_PASS = PolynomialKernel(coeffs=[(1, 1, 0.1)], a=1.0)


def eigen_residual(dk, pair, k):
    hk = apply_hammerstein(dk, pair.h, k)
    return float(np.max(np.abs(hk.all_samples - pair.lam * pair.h.all_samples)))


def bruteforce_fine_solution(spec, k, points, panels, n_iter=400):
    """Independent check: plain undamped iteration of the defining formula
    f <- (sum_j w_j K(t_i,u_j) f_j / sum_j w_j K(0,u_j) f_j)^k on a finer
    grid, with its own Nystrom evaluation at arbitrary points."""
    g = make_grid(points, panels)
    Kmat = spec.evaluate(g.nodes[:, None], g.nodes[None, :])
    row0 = spec.evaluate(0.0, g.nodes)
    f = np.ones(g.n)
    for _ in range(n_iter):
        wf = Kmat @ (g.weights * f)
        f = (wf / (row0 @ (g.weights * f))) ** k

    def at(ts):
        wf = spec.evaluate(np.asarray(ts)[:, None], g.nodes[None, :]) @ (g.weights * f)
        return (wf / (row0 @ (g.weights * f))) ** k

    return at


class TestSolveFixedPoint:
    def test_constant_kernel_converges_immediately(self, grid96):
        dk = discretize(ConstantKernel(2.0), grid96)
        rep = solve_fixed_point(dk, 3)
        assert rep.converged and rep.iterations == 1
        assert np.all(rep.solution.all_samples == 1.0)
        assert rep.omega_value == pytest.approx(2.0, abs=1e-14)

    def test_polynomial_certificate_passing(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        rep = solve_fixed_point(dk, 2)
        assert rep.converged and rep.residual <= 1e-12
        assert rep.solution.value_at_zero == 1.0
        # kernel increases in t, so the solution does too
        assert rep.solution.values[-1] > 1.0

    def test_against_finer_grid_bruteforce(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        rep = solve_fixed_point(dk, 2)
        oracle_at = bruteforce_fine_solution(POLY_PASS, 2, 12, 32)
        probes = np.linspace(0.0, 1.0, 101)
        mine = extend_fixed_point(dk, rep.solution, 2, probes)
        assert np.max(np.abs(mine - oracle_at(probes))) < 1e-6

    def test_restarting_from_solution_stops_at_once(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        first = solve_fixed_point(dk, 2)
        opts = SolveOptions(init="given", init_function=first.solution)
        again = solve_fixed_point(dk, 2, opts)
        assert again.converged and again.iterations == 1
        assert again.residual <= first.residual + 1e-15

    def test_random_init_is_seed_deterministic(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        a = solve_fixed_point(dk, 2, SolveOptions(init="random", seed=4))
        b = solve_fixed_point(dk, 2, SolveOptions(init="random", seed=4))
        assert a.iterations == b.iterations
        assert np.array_equal(a.solution.values, b.solution.values)

    def test_solution_inside_envelope(self, grid96, corpus):
        for name, spec, k in corpus:
            dk = discretize(spec, grid96)
            rep = solve_fixed_point(dk, k)
            assert rep.converged, name
            lo, hi = fixed_point_envelope(kernel_bounds(spec), k)
            assert np.all(rep.solution.all_samples >= lo - 1e-9), name
            assert np.all(rep.solution.all_samples <= hi + 1e-9), name

    def test_non_convergence_is_flagged_not_raised(self, grid96):
        dk = discretize(PolynomialKernel(coeffs=[(1, 1, 0.5)], a=1.0), grid96)
        rep = solve_fixed_point(dk, 2, SolveOptions(max_iter=3))
        assert not rep.converged and rep.residual > 1e-12

    def test_rejects_nonpositive_init(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        bad = GridFunction(grid96, np.zeros(grid96.n), 0.0)
        with pytest.raises(ValueError):
            solve_fixed_point(dk, 2, SolveOptions(init="given", init_function=bad))

    def test_options_validation(self):
        with pytest.raises(ValueError):
            SolveOptions(tol=0.0)
        with pytest.raises(ValueError):
            SolveOptions(damping=1.5)
        with pytest.raises(ValueError):
            SolveOptions(init="given")
        with pytest.raises(ValueError):
            SolveOptions(init="bogus")


class TestSolveLinear:
    def test_constant(self, grid96):
        dk = discretize(ConstantKernel(2.0), grid96)
        rep = solve_linear(dk)
        assert rep.converged
        assert np.all(rep.solution.all_samples == 1.0)
        assert rep.omega_value == pytest.approx(2.0, abs=1e-14)

    def test_separable_kernel_exact_eigenfunction(self, grid96):
        # K(t,u) = (1+t)(1+u) is rank one: f(t) = 1+t, omega = 7/3
        dk = discretize(separable_kernel(), grid96)
        rep = solve_linear(dk)
        assert rep.converged
        assert np.max(np.abs(rep.solution.values - (1.0 + grid96.nodes))) < 1e-13
        assert rep.solution.value_at_zero == pytest.approx(1.0, abs=1e-14)
        assert rep.omega_value == pytest.approx(7.0 / 3.0, abs=1e-13)

    def test_agrees_with_general_solver_at_order_one(self, grid96):
        dk = discretize(separable_kernel(), grid96)
        a = solve_linear(dk)
        b = solve_fixed_point(dk, 1)
        assert np.max(np.abs(a.solution.all_samples - b.solution.all_samples)) < 1e-10

    def test_power_iteration_converges_for_positive_kernels(self, grid96, corpus):
        for name, spec, _ in corpus:
            rep = solve_linear(discretize(spec, grid96))
            assert rep.converged, name
            assert np.all(rep.solution.all_samples > 0.0), name


class TestEigenpairConversion:
    def test_constant_kernel(self, grid96):
        dk = discretize(ConstantKernel(2.0), grid96)
        rep = solve_fixed_point(dk, 2)
        pair = fixed_point_to_eigenpair(rep.solution, dk, 2)
        assert pair.lam == pytest.approx(2.0, abs=1e-14)
        assert np.all(pair.h.all_samples == 1.0)

    def test_polynomial_eigen_residual(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        rep = solve_fixed_point(dk, 2)
        pair = fixed_point_to_eigenpair(rep.solution, dk, 2)
        assert pair.h.value_at_zero == 1.0
        assert eigen_residual(dk, pair, 2) <= 1e-9

    def test_round_trip(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        rep = solve_fixed_point(dk, 2)
        pair = fixed_point_to_eigenpair(rep.solution, dk, 2)
        back = eigenpair_to_fixed_point(pair, 2)
        assert np.max(np.abs(back.all_samples - rep.solution.all_samples)) < 1e-12

    def test_inverse_conversion_residual(self, grid96):
        from treegibbs import apply_fixed_point_map

        dk = discretize(POLY_PASS, grid96)
        rep = solve_fixed_point(dk, 2)
        pair = fixed_point_to_eigenpair(rep.solution, dk, 2)
        f = eigenpair_to_fixed_point(pair, 2)
        mapped = apply_fixed_point_map(dk, f, 2)
        assert np.max(np.abs(mapped.all_samples - f.all_samples)) <= 1e-9

    def test_rescaled_pair_maps_to_same_fixed_point(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        rep = solve_fixed_point(dk, 2)
        pair = fixed_point_to_eigenpair(rep.solution, dk, 2)
        moved = rescale_eigenpair(pair, 5.0, 2)
        back = eigenpair_to_fixed_point(moved, 2)
        assert np.max(np.abs(back.all_samples - rep.solution.all_samples)) < 1e-12

    def test_rejects_order_one(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        rep = solve_fixed_point(dk, 2)
        with pytest.raises(ValueError):
            fixed_point_to_eigenpair(rep.solution, dk, 1)

    def test_rejects_nonpositive_fixed_point(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        with pytest.raises(ValueError):
            fixed_point_to_eigenpair(GridFunction(grid96, np.zeros(grid96.n), 0.0), dk, 2)


class TestRescaleEigenpair:
    def test_identity_at_own_eigenvalue(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        pair = fixed_point_to_eigenpair(solve_fixed_point(dk, 2).solution, dk, 2)
        same = rescale_eigenpair(pair, pair.lam, 2)
        assert np.array_equal(same.h.values, pair.h.values)

    def test_hand_derived_constant_case(self, grid96):
        # c = 2, k = 2: pair (2, h = 1); target 8 scales h to 4 and
        # H h0 = int 2 * 16 du = 32 = 8 * 4
        dk = discretize(ConstantKernel(2.0), grid96)
        pair = fixed_point_to_eigenpair(solve_fixed_point(dk, 2).solution, dk, 2)
        moved = rescale_eigenpair(pair, 8.0, 2)
        assert np.all(moved.h.all_samples == 4.0)
        hk = apply_hammerstein(dk, moved.h, 2)
        assert np.max(np.abs(hk.all_samples - 32.0)) < 1e-12
        assert np.max(np.abs(hk.all_samples - 8.0 * moved.h.all_samples)) < 1e-12

    def test_random_targets_keep_small_residual(self, grid96, rng):
        dk = discretize(POLY_PASS, grid96)
        pair = fixed_point_to_eigenpair(solve_fixed_point(dk, 2).solution, dk, 2)
        for _ in range(10):
            lam = float(rng.uniform(0.1, 10.0))
            moved = rescale_eigenpair(pair, lam, 2)
            assert eigen_residual(dk, moved, 2) <= 1e-9 * max(1.0, lam)

    def test_rejects_order_one_and_bad_targets(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        pair = fixed_point_to_eigenpair(solve_fixed_point(dk, 2).solution, dk, 2)
        with pytest.raises(ValueError):
            rescale_eigenpair(pair, 1.0, 1)
        with pytest.raises(ValueError):
            rescale_eigenpair(pair, 0.0, 2)
        with pytest.raises(ValueError):
            rescale_eigenpair(pair, -3.0, 2)


class TestHammersteinFixedPoint:
    def test_constant_kernel_scalar_oracle(self, grid96):
        # c * g^2 = g has the positive solution g = 1/c
        dk = discretize(ConstantKernel(2.0), grid96)
        rep = solve_hammerstein_fixed_point(dk, 2)
        assert rep.converged
        assert np.max(np.abs(rep.solution.all_samples - 0.5)) < 1e-12

    def test_residual_and_envelope(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        rep = solve_hammerstein_fixed_point(dk, 2)
        assert rep.converged and rep.residual <= 1e-10
        lo, hi = hammerstein_envelope(kernel_bounds(POLY_PASS), 2)
        assert np.all(rep.solution.all_samples >= lo - 1e-9)
        assert np.all(rep.solution.all_samples <= hi + 1e-9)

    def test_rejects_order_one(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        with pytest.raises(ValueError):
            solve_hammerstein_fixed_point(dk, 1)


class TestUniquenessProbe:
    def test_constant_kernel_all_starts_identical(self, grid96):
        dk = discretize(ConstantKernel(1.5), grid96)
        probe = uniqueness_probe(dk, 3, n_starts=10, seed=3)
        assert probe.certificate.passed
        assert probe.all_converged
        assert probe.max_pairwise_distance == 0.0
        assert probe.unique_within_tol

    def test_certificate_passing_kernel_clusters(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        probe = uniqueness_probe(dk, 2, n_starts=20, seed=11)
        assert probe.certificate.passed
        assert probe.all_converged
        assert probe.max_pairwise_distance <= CLUSTERING_TOL

    def test_certificate_failing_kernel_still_runs(self, grid96):
        dk = discretize(PolynomialKernel(coeffs=[(1, 1, 5.0)], a=1.0), grid96)
        probe = uniqueness_probe(dk, 2, n_starts=3, seed=2, opts=SolveOptions(max_iter=600))
        assert not probe.certificate.passed
        assert probe.max_pairwise_distance >= 0.0  # observation only, no claim

    def test_probe_is_seed_deterministic(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        a = uniqueness_probe(dk, 2, n_starts=4, seed=9)
        b = uniqueness_probe(dk, 2, n_starts=4, seed=9)
        assert a.max_pairwise_distance == b.max_pairwise_distance

    def test_rejects_single_start(self, grid96):
        dk = discretize(POLY_PASS, grid96)
        with pytest.raises(ValueError):
            uniqueness_probe(dk, 2, n_starts=1, seed=0)


class TestGridConvergenceRate:
    def test_observed_order_at_least_four(self):
        # low-order panels expose the quadrature error; halving the panel
        # width must shrink the solution error at 4th order or better
        spec = ExponentialKernel(J=1.0, beta=0.5, interaction=[(1, 1, 1.0)])
        probes = np.linspace(0.0, 1.0, 65)
        ref_grid = make_grid(12, 8)
        ref_dk = discretize(spec, ref_grid)
        ref = extend_fixed_point(ref_dk, solve_fixed_point(ref_dk, 2).solution, 2, probes)
        errors = []
        for panels in (2, 4, 8):
            g = make_grid(3, panels)
            dk = discretize(spec, g)
            rep = solve_fixed_point(dk, 2)
            errors.append(np.max(np.abs(extend_fixed_point(dk, rep.solution, 2, probes) - ref)))
        rates = [np.log2(a / b) for a, b in zip(errors, errors[1:])]
        print(f"grid-convergence errors={errors} observed orders={rates}")
        assert min(rates) >= 4.0
