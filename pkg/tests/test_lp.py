import numpy as np
import pytest

from lvgm.lp import OPT_TOL, LinearProgram, LpStatus, solve_lp
from oracles import random_bounded_lp, vertex_enumeration


def _solve(c, G, h, **kw):
    return solve_lp(LinearProgram(np.asarray(c, float), np.asarray(G, float), np.asarray(h, float), **kw))


class TestExamples:
    def test_one_variable(self):
        sol = _solve([1.0], [[-1.0], [1.0]], [-1.0, 3.0])
        assert sol.status is LpStatus.OPTIMAL
        assert sol.x[0] == pytest.approx(1.0, abs=1e-12)
        assert sol.objective_value == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_corner(self):
        sol = _solve([1.0, 1.0], [[-1, 0], [0, -1], [-1, -1]], [0, 0, -2])
        assert sol.status is LpStatus.OPTIMAL
        assert sol.objective_value == pytest.approx(2.0, abs=1e-12)

    def test_infeasible(self):
        sol = _solve([1.0], [[1.0], [-1.0]], [1.0, -2.0])
        assert sol.status is LpStatus.INFEASIBLE
        assert sol.x is None

    def test_unbounded(self):
        sol = _solve([-1.0], [[-1.0]], [0.0])
        assert sol.status is LpStatus.UNBOUNDED

    def test_nonnegative_flag(self):
        # x >= 0 implied; max x1 + x2 on the simplex x1 + 2 x2 <= 4, 3 x1 + x2 <= 6
        sol = _solve([-1.0, -1.0], [[1, 2], [3, 1]], [4, 6], nonnegative=True)
        assert sol.status is LpStatus.OPTIMAL
        np.testing.assert_allclose(sol.x, [1.6, 1.2], atol=1e-12)


class TestValidation:
    @pytest.mark.parametrize("c,G,h", [
        ([1.0, 2.0], [[1.0]], [1.0]),
        ([np.inf], [[1.0]], [1.0]),
        ([1.0], [[1.0]], [np.nan]),
        ([], np.zeros((1, 0)), [1.0]),
    ])
    def test_rejects(self, c, G, h):
        with pytest.raises(ValueError):
            LinearProgram(np.asarray(c, float), np.asarray(G, float), np.asarray(h, float))


class TestOracle:
    def test_random_bounded_programs(self, rng):
        for _ in range(150):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(n + 1, 9))
            c, G, h = random_bounded_lp(rng, n, m)
            sol = _solve(c, G, h)
            ref, _ = vertex_enumeration(c, G, h)
            if not np.isfinite(ref):
                # feasible set has no vertex; still bounded, optimum finite
                assert sol.status is LpStatus.OPTIMAL
                continue
            assert sol.status is LpStatus.OPTIMAL
            assert abs(sol.objective_value - ref) <= 1e-7 * max(1.0, abs(ref))
            assert np.all(G @ sol.x <= h + 1e-9)

    def test_reduced_cost_certificate(self, rng):
        for _ in range(50):
            c, G, h = random_bounded_lp(rng, 3, 7)
            sol = _solve(c, G, h)
            assert sol.status is LpStatus.OPTIMAL
            scale = max(1.0, np.abs(c).max())
            assert sol.reduced_costs.min() >= -OPT_TOL * scale


class TestScaling:
    @pytest.mark.parametrize("lam", [0.25, 2.0, 8.0])
    def test_objective_scaling(self, rng, lam):
        # powers of two keep the arithmetic exact, so the pivot path is identical
        for _ in range(20):
            c, G, h = random_bounded_lp(rng, 3, 6)
            a = _solve(c, G, h)
            b = _solve(lam * c, G, h)
            np.testing.assert_array_equal(a.x, b.x)
            assert b.objective_value == pytest.approx(lam * a.objective_value, rel=1e-12, abs=1e-12)

    def test_deterministic(self, rng):
        c, G, h = random_bounded_lp(rng, 4, 8)
        a, b = _solve(c, G, h), _solve(c, G, h)
        np.testing.assert_array_equal(a.x, b.x)
        assert a.iterations == b.iterations
