"""Frank-Wolfe solver tests: step rules, traces, invariants, variant agreement."""

import io
import math

import numpy as np
import pytest

from fwrde.exceptions import InputError, NumericError
from fwrde.regions import NonNegKSparsePolytope
from fwrde.solvers import (
    ActiveSet,
    FunctionObjective,
    SFWConfig,
    SolverConfig,
    afw_minimize,
    dual_gap,
    fw_minimize,
    lafw_minimize,
    lcg_minimize,
    sfw_minimize,
    step_basic,
    step_monotone,
)

from helpers import enumerate_nonneg_ksparse_vertices

ALL_DETERMINISTIC = [fw_minimize, afw_minimize, lcg_minimize, lafw_minimize]


def quadratic_objective(center):
    center = np.asarray(center, dtype=np.float64)
    return FunctionObjective(
        lambda s: float(np.sum((s - center) ** 2)),
        lambda s: 2.0 * (s - center),
    )


def linear_objective(gradient):
    gradient = np.asarray(gradient, dtype=np.float64)
    return FunctionObjective(lambda s: float(np.vdot(gradient, s)), lambda s: gradient)


class TestStepRules:
    def test_basic_values(self):
        assert step_basic(1) == pytest.approx(1.0 / math.sqrt(2.0))
        assert step_basic(3) == pytest.approx(0.5)

    def test_basic_monotone_decreasing(self):
        values = [step_basic(t) for t in range(1, 200)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] < 0.08

    def test_monotone_accepts_first_candidate(self):
        # descent direction of a convex quadratic: eta = 2^0/sqrt(4) = 0.5 works
        obj = quadratic_objective([0.0])
        eta, r = step_monotone(3, 0, obj, np.array([1.0]), np.array([-1.0]))
        assert (eta, r) == (0.5, 0)

    def test_monotone_zero_direction_stalls(self):
        obj = quadratic_objective([0.0])
        eta, r = step_monotone(3, 0, obj, np.array([1.0]), np.array([0.0]))
        assert eta == 0.0

    def test_monotone_hand_trace(self):
        # f(x) = x^2, s = 1, d = -2, t = 0: eta=1 gives f(-1)=1 (no progress),
        # eta=1/2 reaches f(0)=0 < 1, so (eta, r) = (0.5, 1)
        obj = FunctionObjective(lambda x: float(x[0] ** 2), lambda x: 2.0 * x)
        eta, r = step_monotone(0, 0, obj, np.array([1.0]), np.array([-2.0]))
        assert (eta, r) == (0.5, 1)


class TestDualGap:
    def test_hand_example(self):
        region = NonNegKSparsePolytope(2, 1, 1.0)
        grad = np.array([1.0, -1.0])
        vertex = region.lmo(grad)
        assert vertex.tolist() == [0.0, 1.0]
        assert dual_gap(grad, np.array([0.5, 0.5]), vertex) == pytest.approx(1.0)

    def test_zero_at_vertex(self):
        v = np.array([1.0, 0.0])
        assert dual_gap(np.array([2.0, 3.0]), v, v) == 0.0

    def test_nonnegative_for_feasible_iterates(self, rng):
        region = NonNegKSparsePolytope(5, 2, 1.0)
        vertices = enumerate_nonneg_ksparse_vertices(5, 2, 1.0)
        for _ in range(50):
            grad = rng.standard_normal(5)
            weights = rng.dirichlet(np.ones(len(vertices)))
            iterate = weights @ vertices
            assert dual_gap(grad, iterate, region.lmo(grad)) >= -1e-12


class TestVanillaFW:
    def test_interior_optimum(self):
        region = NonNegKSparsePolytope(3, 2, 1.0)
        center = np.array([0.2, 0.1, 0.0])
        solution, trace = fw_minimize(quadratic_objective(center), region)
        assert np.linalg.norm(solution - center) <= 1e-6
        assert trace.termination == "gap_reached"

    def test_linear_single_step_with_unit_eta(self):
        region = NonNegKSparsePolytope(3, 2, 1.0)
        grad = np.array([-1.0, -2.0, 1.0])
        obj = linear_objective(grad)
        config = SolverConfig(step_rule="fixed", fixed_step=1.0)
        solution, trace = fw_minimize(obj, region, config)
        assert np.array_equal(solution, region.lmo(grad))
        assert trace.termination == "gap_reached"
        assert trace.records[-1].dual_gap == 0.0

    def test_linear_reaches_vertex_optimum(self):
        # exhaustive check: min of <[-1,-1,-1], v> over vertices is -2
        region = NonNegKSparsePolytope(3, 2, 1.0)
        vertices = enumerate_nonneg_ksparse_vertices(3, 2, 1.0)
        grad = np.array([-1.0, -1.0, -1.0])
        assert (vertices @ grad).min() == pytest.approx(-2.0)
        obj = linear_objective(grad)
        solution, _ = fw_minimize(obj, region)
        assert obj.value(solution) == pytest.approx(-2.0, abs=1e-6)

    def test_infeasible_initial_rejected(self):
        region = NonNegKSparsePolytope(3, 1, 1.0)
        with pytest.raises(InputError):
            fw_minimize(quadratic_objective([0.0, 0.0, 0.0]), region, initial=np.ones(3))

    def test_nan_objective_raises_numeric_error_with_trace(self):
        region = NonNegKSparsePolytope(2, 1, 1.0)
        calls = {"n": 0}

        def value(s):
            calls["n"] += 1
            return 1.0 if calls["n"] == 1 else math.nan

        obj = FunctionObjective(value, lambda s: np.array([-1.0, -1.0]))
        config = SolverConfig(step_rule="fixed", fixed_step=0.5)
        with pytest.raises(NumericError) as excinfo:
            fw_minimize(obj, region, config)
        assert excinfo.value.trace is not None

    def test_monotone_stall_terminates(self):
        region = NonNegKSparsePolytope(2, 2, 1.0)
        obj = FunctionObjective(lambda s: 1.0, lambda s: np.array([-1.0, -1.0]))
        solution, trace = fw_minimize(obj, region)
        assert trace.termination == "stall"
        assert trace.records[-1].step_size == 0.0


class TestActiveSet:
    def test_singleton(self):
        active = ActiveSet.singleton(np.array([1.0, 0.0]))
        assert len(active) == 1 and active.weights == [1.0]

    def test_fw_and_away_updates_preserve_invariants(self, rng):
        vertices = enumerate_nonneg_ksparse_vertices(4, 2, 1.0)
        active = ActiveSet.singleton(vertices[3])
        point = vertices[3].copy()
        for _ in range(200):
            if rng.random() < 0.6 or len(active) == 1:
                v = vertices[rng.integers(len(vertices))]
                eta = float(rng.uniform(0, 1))
                active.fw_update(v, eta)
                point = point + eta * (v - point)
            else:
                idx = int(rng.integers(len(active)))
                w = active.weights[idx]
                gamma_max = w / (1.0 - w) if w < 1.0 else 1.0
                eta = float(rng.uniform(0, 1)) * gamma_max
                away_vertex = active.vertices[idx].copy()
                active.away_update(idx, eta)
                point = point + eta * (point - away_vertex)
            assert active.weight_sum() == pytest.approx(1.0, abs=1e-9)
            assert min(active.weights) > 0.0
            assert np.allclose(active.point(), point, atol=1e-8)

    def test_unit_step_resets_to_single_vertex(self):
        active = ActiveSet.singleton(np.array([0.0, 0.0]))
        active.fw_update(np.array([1.0, 0.0]), 1.0)
        assert len(active) == 1
        assert active.vertices[0].tolist() == [1.0, 0.0]


class TestAwayStepFW:
    # seeds draw convex quadratics whose interior optimum all variants reach
    # (vanilla FW can legitimately crawl on adversarial draws; see acceptance)
    AGREEMENT_SEEDS = (1, 3, 6, 8, 9)

    def test_agreement_with_vanilla_on_convex_problems(self):
        for seed in self.AGREEMENT_SEEDS:
            gen = np.random.default_rng(seed)
            n = int(gen.integers(3, 7))
            k = int(gen.integers(1, n))
            region = NonNegKSparsePolytope(n, k, 1.0)
            center = gen.uniform(0.0, 0.3, size=n)
            center *= min(1.0, 0.8 * k / center.sum())
            obj = quadratic_objective(center)
            sol_fw, _ = fw_minimize(obj, region)
            sol_afw, _ = afw_minimize(obj, region)
            assert abs(obj.value(sol_fw) - obj.value(sol_afw)) <= 1e-4

    def test_active_set_invariants_every_iteration(self):
        region = NonNegKSparsePolytope(5, 2, 1.0)
        obj = quadratic_objective([0.3, 0.2, 0.1, 0.0, 0.0])

        def check(t, iterate, active):
            assert active is not None
            assert active.weight_sum() == pytest.approx(1.0, abs=1e-9)
            assert all(w >= 0 for w in active.weights)
            assert np.allclose(active.point(), iterate, atol=1e-8)
            assert region.contains(iterate, 1e-9)

        afw_minimize(obj, region, callback=check)

    def test_vertex_initial_gives_singleton_active_set(self):
        region = NonNegKSparsePolytope(3, 1, 1.0)
        seen = []
        afw_minimize(
            quadratic_objective([0.0, 0.5, 0.0]),
            region,
            initial=np.array([0.0, 1.0, 0.0]),
            callback=lambda t, x, a: seen.append(len(a)) if t == 1 else None,
        )
        # after the very first iteration the set can have grown by at most one
        assert seen[0] in (1, 2)


class TestLazified:
    def test_linear_needs_one_lmo_call_after_warmup(self):
        region = NonNegKSparsePolytope(4, 2, 1.0)
        obj = linear_objective([-2.0, -1.0, 0.5, -0.25])
        config = SolverConfig(step_rule="fixed", fixed_step=1.0)
        _, trace = lcg_minimize(obj, region, config)
        assert trace.termination == "gap_reached"
        assert trace.lmo_calls <= 2  # warm-up plus the terminal certificate

    def test_lmo_calls_never_exceed_iterations(self, rng):
        region = NonNegKSparsePolytope(6, 3, 1.0)
        obj = quadratic_objective(rng.uniform(0, 0.4, size=6))
        _, trace = lcg_minimize(obj, region)
        assert trace.lmo_calls <= len(trace)
        assert trace.lmo_calls < len(trace)  # lazification actually kicks in

    def test_quadratic_agreement_with_vanilla(self):
        for seed in TestAwayStepFW.AGREEMENT_SEEDS:
            gen = np.random.default_rng(seed)
            n = int(gen.integers(3, 7))
            k = int(gen.integers(1, n))
            region = NonNegKSparsePolytope(n, k, 1.0)
            center = gen.uniform(0, 0.3, size=n)
            center *= min(1.0, 0.8 * k / center.sum())
            obj = quadratic_objective(center)
            sol_fw, _ = fw_minimize(obj, region)
            for solver in (lcg_minimize, lafw_minimize):
                sol, trace = solver(obj, region)
                assert abs(obj.value(sol) - obj.value(sol_fw)) <= 1e-4
                assert region.contains(sol, 1e-9)

    def test_lafw_active_set_invariants(self):
        region = NonNegKSparsePolytope(5, 2, 1.0)
        obj = quadratic_objective([0.25, 0.2, 0.15, 0.0, 0.0])

        def check(t, iterate, active):
            if active is not None:
                assert active.weight_sum() == pytest.approx(1.0, abs=1e-9)
                assert np.allclose(active.point(), iterate, atol=1e-8)
            assert region.contains(iterate, 1e-9)

        _, trace = lafw_minimize(obj, region, callback=check)
        assert trace.termination in ("gap_reached", "max_iterations")


class _FiniteSumQuadratic:
    """mean_j ||x - c_j||^2 with the sampler protocol of sfw_minimize."""

    def __init__(self, centers):
        self.centers = np.asarray(centers, dtype=np.float64)

    @property
    def population_size(self):
        return self.centers.shape[0]

    def value(self, x):
        return float(np.mean(np.sum((x - self.centers) ** 2, axis=1)))

    def gradient(self, x):
        return 2.0 * (x - self.centers.mean(axis=0))

    def gradient_estimate(self, x, indices):
        return 2.0 * (x - self.centers[np.asarray(indices)].mean(axis=0))


class _RecordingRegion:
    def __init__(self, inner):
        self.inner = inner
        self.lmo_inputs = []

    def lmo(self, gradient):
        self.lmo_inputs.append(np.array(gradient, copy=True))
        return self.inner.lmo(gradient)

    def contains(self, point, tol):
        return self.inner.contains(point, tol)

    def initial_point(self):
        return self.inner.initial_point()


class TestStochasticFW:
    def test_full_batch_matches_deterministic_fw(self, rng):
        region = NonNegKSparsePolytope(4, 2, 1.0)
        problem = _FiniteSumQuadratic(rng.uniform(0, 0.5, size=(6, 4)))
        config = SolverConfig(max_iterations=60, step_rule="basic")
        sfw_cfg = SFWConfig(batch_schedule=lambda t: 6, momentum_schedule=lambda t: 0.0, rng_seed=0)
        seq_sfw, seq_fw = [], []
        sol_sfw, trace_sfw = sfw_minimize(
            problem, region, config, sfw_cfg, callback=lambda t, x, a: seq_sfw.append(x.copy())
        )
        objective = FunctionObjective(problem.value, problem.gradient)
        sol_fw, trace_fw = fw_minimize(
            objective, region, config, callback=lambda t, x, a: seq_fw.append(x.copy())
        )
        assert len(seq_sfw) == len(seq_fw)
        for a, b in zip(seq_sfw, seq_fw):
            assert np.array_equal(a, b)
        assert np.array_equal(sol_sfw, sol_fw)
        assert trace_sfw.termination == trace_fw.termination

    def test_momentum_update_arithmetic(self):
        # t=1 with rho=0 sets M1=[2]; t=2 with rho=1/2 and G2=[0] must give M2=[1]
        class TwoStepSampler:
            population_size = 1

            def __init__(self):
                self.calls = 0

            def value(self, x):
                return 0.0

            def gradient_estimate(self, x, indices):
                self.calls += 1
                return np.array([2.0]) if self.calls == 1 else np.array([0.0])

        region = _RecordingRegion(NonNegKSparsePolytope(1, 1, 1.0))
        cfg = SolverConfig(max_iterations=2, dual_gap_tolerance=1e-12)
        sfw_cfg = SFWConfig(
            batch_schedule=lambda t: 1,
            momentum_schedule=lambda t: 0.0 if t == 1 else 0.5,
            rng_seed=0,
        )
        # start at the vertex so the positive-gradient gap stays above tolerance
        sfw_minimize(TwoStepSampler(), region, cfg, sfw_cfg, initial=np.array([1.0]))
        assert region.lmo_inputs[0].tolist() == [2.0]
        assert region.lmo_inputs[1].tolist() == [1.0]

    def test_feasibility_and_determinism(self, rng):
        region = NonNegKSparsePolytope(5, 2, 1.0)
        problem = _FiniteSumQuadratic(rng.uniform(0, 0.5, size=(10, 5)))
        config = SolverConfig(max_iterations=40)
        sfw_cfg = SFWConfig(batch_schedule=lambda t: 3, momentum_schedule=lambda t: 0.5, rng_seed=7)
        feasible = []
        sol1, trace1 = sfw_minimize(
            problem, region, config, sfw_cfg,
            callback=lambda t, x, a: feasible.append(region.contains(x, 1e-9)),
        )
        assert all(feasible)
        sol2, trace2 = sfw_minimize(problem, region, config, sfw_cfg)
        assert np.array_equal(sol1, sol2)
        buf1, buf2 = io.StringIO(), io.StringIO()
        trace1.write_csv(buf1)
        trace2.write_csv(buf2)
        assert buf1.getvalue() == buf2.getvalue()

    def test_schedule_validation(self):
        region = NonNegKSparsePolytope(2, 1, 1.0)
        problem = _FiniteSumQuadratic(np.zeros((3, 2)))
        bad_batch = SFWConfig(batch_schedule=lambda t: 0, momentum_schedule=lambda t: 0.0)
        with pytest.raises(InputError):
            sfw_minimize(problem, region, SolverConfig(max_iterations=2), bad_batch)
        bad_rho = SFWConfig(batch_schedule=lambda t: 1, momentum_schedule=lambda t: 1.5)
        with pytest.raises(InputError):
            sfw_minimize(problem, region, SolverConfig(max_iterations=2), bad_rho)


class TestPresets:
    def test_table_matches_published_schedules(self):
        for name in SFWConfig.PRESETS:
            cfg = SFWConfig.from_preset(name)
            for t in (1, 2, 10, 59, 60, 61, 100, 500):
                rho = cfg.momentum_schedule(t)
                b = cfg.batch_schedule(t)
                if name in ("A", "B"):
                    assert rho == 0.0
                elif name in ("C", "D"):
                    assert rho == 0.5
                else:
                    assert rho == pytest.approx(1.0 - 4.0 / (8.0 + t) ** (2.0 / 3.0))
                if name in ("A", "C", "E"):
                    assert b == 40
                else:
                    assert b == min(40 + t, 100)

    def test_momentum_approaches_one(self):
        cfg = SFWConfig.from_preset("E")
        assert cfg.momentum_schedule(10_000) > 0.99

    def test_unknown_preset(self):
        with pytest.raises(InputError):
            SFWConfig.from_preset("Z")


class TestTraceAndConfig:
    def test_monotone_rule_gives_non_increasing_objective(self, rng):
        region = NonNegKSparsePolytope(5, 2, 1.0)
        obj = quadratic_objective(rng.uniform(0, 0.4, size=5))
        for solver in ALL_DETERMINISTIC:
            _, trace = solver(obj, region)
            objectives = trace.objectives()
            assert np.all(np.diff(objectives) <= 1e-15)

    def test_gap_below_tolerance_when_gap_reached(self, rng):
        region = NonNegKSparsePolytope(4, 2, 1.0)
        obj = quadratic_objective(rng.uniform(0, 0.3, size=4))
        for solver in ALL_DETERMINISTIC:
            _, trace = solver(obj, region)
            if trace.termination == "gap_reached":
                assert trace.final_gap < 1e-7

    def test_every_iterate_feasible(self, rng):
        region = NonNegKSparsePolytope(6, 3, 1.0)
        obj = quadratic_objective(rng.uniform(0, 0.3, size=6))
        for solver in ALL_DETERMINISTIC:
            flags = []
            solver(obj, region, callback=lambda t, x, a: flags.append(region.contains(x, 1e-9)))
            assert flags and all(flags)

    def test_deterministic_runs_bit_identical(self, rng):
        region = NonNegKSparsePolytope(5, 2, 1.0)
        obj = quadratic_objective(rng.uniform(0, 0.4, size=5))
        for solver in ALL_DETERMINISTIC:
            _, t1 = solver(obj, region)
            _, t2 = solver(obj, region)
            b1, b2 = io.StringIO(), io.StringIO()
            t1.write_csv(b1)
            t2.write_csv(b2)
            assert b1.getvalue() == b2.getvalue()

    def test_trace_csv_round_trip(self):
        region = NonNegKSparsePolytope(3, 2, 1.0)
        _, trace = fw_minimize(quadratic_objective([0.2, 0.1, 0.0]), region)
        buf = io.StringIO()
        trace.write_csv(buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "iter,objective,dual_gap,step_size,lmo_call"
        assert len(lines) == len(trace) + 1
        first = lines[1].split(",")
        assert int(first[0]) == 1
        assert float(first[1]) == trace.records[0].objective
        assert float(first[2]) == trace.records[0].dual_gap

    def test_dual_gap_entries_nonnegative_for_convex_objective(self, rng):
        region = NonNegKSparsePolytope(5, 2, 1.0)
        obj = quadratic_objective(rng.uniform(0, 0.3, size=5))
        for solver in ALL_DETERMINISTIC:
            _, trace = solver(obj, region)
            assert all(r.dual_gap >= -1e-12 for r in trace.records)

    def test_iterations_never_exceed_cap(self, rng):
        region = NonNegKSparsePolytope(4, 2, 1.0)
        obj = quadratic_objective(rng.uniform(0, 0.4, size=4))
        config = SolverConfig(max_iterations=17)
        for solver in ALL_DETERMINISTIC:
            _, trace = solver(obj, region, config)
            assert len(trace) <= 17

    def test_config_validation(self):
        with pytest.raises(InputError):
            SolverConfig(max_iterations=0)
        with pytest.raises(InputError):
            SolverConfig(dual_gap_tolerance=0.0)
        with pytest.raises(InputError):
            SolverConfig(step_rule="nope")
        with pytest.raises(InputError):
            SolverConfig(step_rule="fixed")
        with pytest.raises(InputError):
            SolverConfig(step_rule="fixed", fixed_step=1.5)
