"""Solver tests: exact condition arithmetic, the forward integrator
against closed forms, and the integral operator against telescoping /
contraction / equivariance oracles."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyap.coefficients import (
    CoefficientSet,
    CoefficientTerm,
    QuasiPeriodicSignal,
    example41_coefficients,
    galerkin_heat_coefficients,
    ou_forced_coefficients,
)
from levyap.dichotomy import DichotomousSystem
from levyap.noise import (
    JumpComponent,
    LevyProcessSpec,
    WienerSpec,
    events_in_steps,
    uniform_interval_mark,
)
from levyap.solver import (
    ConditionReport,
    NoiseSample,
    PathEnsemble,
    SolverError,
    apply_S,
    check_conditions,
    l2_increment,
    picard_solve,
    simulate_mild,
    sup_second_moment,
)

# ---------------------------------------------------------------------------
# shared fixtures
# ---------------------------------------------------------------------------


def benchmark_system() -> DichotomousSystem:
    return DichotomousSystem.create(
        np.diag([8.0, -6.0]), np.diag([0.0, 1.0]), k=1.0, omega=6.0
    )


def benchmark_spec() -> LevyProcessSpec:
    return LevyProcessSpec(
        dim=1,
        wiener=WienerSpec(1, np.eye(1)),
        jumps=(
            JumpComponent(rate=1.5, region="small", marks=uniform_interval_mark(-0.9, 0.9)),
            JumpComponent(rate=1.0, region="large", marks=uniform_interval_mark(1.0, 1.5)),
        ),
    )


def zero_coefficients(d: int, q: int) -> CoefficientSet:
    empty = tuple(() for _ in range(d))
    return CoefficientSet(
        dim_state=d,
        dim_noise=q,
        drift=empty,
        diffusion=tuple(tuple(() for _ in range(q)) for _ in range(d)),
        jump_small=empty,
        jump_large=empty,
        lipschitz=Fraction(1, 64),
    )


def constant_drift_coefficients(c1: float, c2: float) -> CoefficientSet:
    return CoefficientSet(
        dim_state=2,
        dim_noise=1,
        drift=(
            (CoefficientTerm(c1, "const"),),
            (CoefficientTerm(c2, "const"),),
        ),
        diffusion=(((),), ((),)),
        jump_small=((), ()),
        jump_large=((), ()),
        lipschitz=Fraction(1, 64),
    )


def scalar_system(rate: float = 1.0) -> DichotomousSystem:
    return DichotomousSystem.create(
        np.array([[-rate]]), np.eye(1), k=1.0, omega=rate
    )


def wiener_only_spec(dim: int = 1) -> LevyProcessSpec:
    return LevyProcessSpec(dim=dim, wiener=WienerSpec(dim, np.eye(dim)))


# ---------------------------------------------------------------------------
# condition arithmetic
# ---------------------------------------------------------------------------


class TestCheckConditions:
    def test_benchmark_constants_exact(self):
        rep = check_conditions(1, 6, Fraction(1, 64), 1)
        assert rep.lhs == Fraction(5, 12)
        assert rep.threshold_existence == 4
        assert rep.threshold_distribution == 2
        assert rep.eta == Fraction(5, 48)
        assert rep.verdict_existence and rep.verdict_distribution
        assert rep.eta_below_one

    def test_verdict_flips_exactly_at_critical_jump_bound(self):
        crit = Fraction(59, 2)
        below = check_conditions(1, 6, Fraction(1, 64), crit - Fraction(1, 10**12))
        at = check_conditions(1, 6, Fraction(1, 64), crit)
        above = check_conditions(1, 6, Fraction(1, 64), 30)
        assert below.verdict_existence
        assert not at.verdict_existence
        assert not above.verdict_existence
        # the weak inequality (contraction alone) still holds at b = 30
        assert above.eta_below_one
        assert above.lhs == Fraction(73, 36)

    def test_floats_convert_exactly(self):
        rep = check_conditions(1.0, 6.0, 0.015625, 1.0)
        assert rep.eta == Fraction(5, 48)
        assert rep.lhs == Fraction(5, 12)

    def test_report_dict(self):
        d = check_conditions(1, 6, Fraction(1, 64), 1).as_dict()
        assert d["lhs"] == "5/12"
        assert d["eta"] == "5/48"
        assert d["threshold_existence"] == "4"
        assert d["threshold_distribution"] == "2"
        assert d["verdict_existence"] is True
        assert abs(d["eta_float"] - 5.0 / 48.0) < 1e-15

    @pytest.mark.parametrize(
        "args",
        [
            (0, 6, Fraction(1, 64), 1),
            (1, 0, Fraction(1, 64), 1),
            (1, 6, 0, 1),
            (1, 6, Fraction(1, 64), -1),
            (float("nan"), 6, Fraction(1, 64), 1),
        ],
    )
    def test_rejects_bad_inputs(self, args):
        with pytest.raises(SolverError):
            check_conditions(*args)

    @given(
        k=st.fractions(Fraction(1, 100), Fraction(10)),
        omega=st.fractions(Fraction(1, 100), Fraction(20)),
        lip=st.fractions(Fraction(1, 10**6), Fraction(1, 2)),
        b=st.fractions(Fraction(0), Fraction(100)),
    )
    @settings(max_examples=60, deadline=None)
    def test_identities(self, k, omega, lip, b):
        rep = check_conditions(k, omega, lip, b)
        # eta is the lhs rescaled by the weak threshold
        assert rep.eta == rep.lhs / rep.threshold_existence
        assert rep.eta_below_one == (rep.lhs < rep.threshold_existence)
        assert rep.threshold_existence == 2 * rep.threshold_distribution
        # the strong inequality implies the weak one, so the joint
        # existence verdict coincides with the distribution verdict
        assert rep.verdict_existence == rep.verdict_distribution


# ---------------------------------------------------------------------------
# ensembles and moments
# ---------------------------------------------------------------------------


class TestPathEnsemble:
    def test_grid_and_index(self):
        ens = PathEnsemble(h=0.25, k_lo=-2, values=np.zeros((3, 5, 2)))
        assert ens.n_paths == 3 and ens.n_steps == 4 and ens.dim == 2
        assert ens.t_lo == -0.5 and ens.t_hi == 0.5
        np.testing.assert_allclose(ens.grid, [-0.5, -0.25, 0.0, 0.25, 0.5])
        assert ens.index_of(0.25) == 3
        assert ens.index_of(-0.5) == 0

    def test_index_off_grid_raises(self):
        ens = PathEnsemble(h=0.25, k_lo=0, values=np.zeros((1, 3, 1)))
        with pytest.raises(SolverError):
            ens.index_of(0.1)
        with pytest.raises(SolverError):
            ens.index_of(2.0)

    @pytest.mark.parametrize(
        "values",
        [np.zeros((2, 3)), np.zeros((0, 3, 1)), np.zeros((2, 1, 1))],
    )
    def test_bad_shapes_raise(self, values):
        with pytest.raises(SolverError):
            PathEnsemble(h=0.1, k_lo=0, values=values)

    def test_non_finite_raises(self):
        v = np.zeros((1, 3, 1))
        v[0, 1, 0] = np.inf
        with pytest.raises(SolverError):
            PathEnsemble(h=0.1, k_lo=0, values=v)

    def test_moments_by_hand(self):
        v = np.zeros((2, 3, 2))
        v[0, 1] = [3.0, 4.0]  # |.|^2 = 25
        v[1, 1] = [0.0, 1.0]  # |.|^2 = 1
        v[0, 2] = [1.0, 0.0]
        ens = PathEnsemble(h=1.0, k_lo=0, values=v)
        assert sup_second_moment(ens) == pytest.approx(13.0)  # (25 + 1) / 2
        assert l2_increment(ens, 1.0, 1.0) == 0.0
        # increments: path0 (3,4)->(1,0): 20; path1 (0,1)->(0,0): 1
        assert l2_increment(ens, 2.0, 1.0) == pytest.approx(10.5)


class TestNoiseSample:
    def test_requires_paths(self):
        with pytest.raises(SolverError):
            NoiseSample(benchmark_spec(), ())

    def test_requires_shared_grid(self):
        spec = wiener_only_spec()
        a = NoiseSample.sample(spec, (0.0, 1.0), 0.25, 1, seed=1).paths[0]
        b = NoiseSample.sample(spec, (0.0, 2.0), 0.25, 1, seed=1).paths[0]
        with pytest.raises(SolverError):
            NoiseSample(spec, (a, b))

    def test_shifted_all_paths(self):
        spec = benchmark_spec()
        sample = NoiseSample.sample(spec, (-1.0, 2.0), 0.25, 3, seed=9)
        shifted = sample.shifted(1.0)
        assert shifted.n_paths == 3
        assert shifted.paths[0].t_lo == -2.0
        assert shifted.paths[0].t_hi == 1.0
        np.testing.assert_array_equal(shifted.paths[1].dW, sample.paths[1].dW)


# ---------------------------------------------------------------------------
# forward integrator
# ---------------------------------------------------------------------------


class TestSimulateMild:
    def test_zero_coefficients_reproduce_linear_flow(self):
        sysd = scalar_system(1.0)
        noise = NoiseSample.sample(wiener_only_spec(), (0.0, 2.0), 1.0 / 64, 3, seed=5)
        ens = simulate_mild(sysd, zero_coefficients(1, 1), noise, np.array([2.0]))
        expected = 2.0 * np.exp(-noise.grid)
        assert np.abs(ens.values[:, :, 0] - expected).max() < 1e-12

    def test_matches_handrolled_recursion(self):
        """Lock the update rule: full linear flow applied to state plus
        drift, Wiener, compensated-small-jump and large-jump increments,
        with coefficients at the pre-jump grid state."""
        from levyap.coefficients import eval_drift, eval_diffusion, eval_jump_small
        from levyap.coefficients import eval_jump_large, small_jump_compensator
        from levyap.dichotomy import matrix_exp

        sysd = scalar_system(2.0)
        spec = LevyProcessSpec(
            dim=1,
            wiener=WienerSpec(1, np.eye(1)),
            jumps=(
                JumpComponent(rate=30.0, region="small", marks=uniform_interval_mark(-0.5, 0.5)),
                JumpComponent(rate=20.0, region="large", marks=uniform_interval_mark(1.0, 2.0)),
            ),
        )
        cs = CoefficientSet(
            dim_state=1,
            dim_noise=1,
            drift=((CoefficientTerm(0.4, "bounded_ratio"),),),
            diffusion=(((CoefficientTerm(0.2, "const"),),),),
            jump_small=((CoefficientTerm(0.3, "linear", mark_weights=(1.0,)),),),
            jump_large=((CoefficientTerm(0.1, "const", mark_weights=(1.0,)),),),
            lipschitz=Fraction(1, 2),
        )
        h = 1.0 / 16
        noise = NoiseSample.sample(spec, (0.0, 0.5), h, 2, seed=3)
        ens = simulate_mild(sysd, cs, noise, np.array([0.7]))

        exp_ah = matrix_exp(sysd.a, h)
        for p, r in enumerate(noise.paths):
            y = np.array([[0.7]])
            steps = events_in_steps(r)
            for k in range(r.n_steps):
                t = r.grid[k]
                inc = eval_drift(cs, t, y) * h
                inc += eval_diffusion(cs, t, y)[:, :, 0] * r.dW[k]
                inc -= h * small_jump_compensator(cs, spec, t, y)
                for e in np.nonzero(steps == k)[0]:
                    x = r.jump_marks[e : e + 1]
                    if r.jump_regions[e] == 0:
                        inc += eval_jump_small(cs, np.array([t]), y, x)
                    else:
                        inc += eval_jump_large(cs, np.array([t]), y, x)
                y = (y + inc) @ exp_ah.T
                np.testing.assert_array_equal(ens.values[p, k + 1], y[0])

    def test_blow_up_reports_path_and_time(self):
        sysd = scalar_system(1.0)
        noise = NoiseSample.sample(wiener_only_spec(), (0.0, 1.0), 0.25, 2, seed=1)
        cs = constant_drift_coefficients(0.0, 0.0)
        huge = CoefficientSet(
            dim_state=1,
            dim_noise=1,
            drift=((CoefficientTerm(1e12, "const"),),),
            diffusion=(((),),),
            jump_small=((),),
            jump_large=((),),
            lipschitz=Fraction(1, 64),
        )
        with pytest.raises(SolverError, match="blew up at t = 0.25 on path 0"):
            simulate_mild(sysd, huge, noise, np.zeros(1))

    def test_shape_validation(self):
        sysd = scalar_system(1.0)
        noise = NoiseSample.sample(wiener_only_spec(), (0.0, 1.0), 0.25, 2, seed=1)
        with pytest.raises(SolverError):
            simulate_mild(sysd, zero_coefficients(1, 1), noise, np.zeros(3))
        with pytest.raises(SolverError):
            simulate_mild(benchmark_system(), zero_coefficients(1, 1), noise, np.zeros(1))

    def test_ou_mean_against_exact_recursion_and_closed_form(self):
        """Two-layer oracle: the Monte-Carlo mean must match the exact
        deterministic mean recursion to MC accuracy, and that recursion
        must match the convolution closed form to O(h)."""
        a, sigma, m_paths = 1.0, 0.3, 2000
        h = 1.0 / 64
        sysd = scalar_system(a)
        cs = ou_forced_coefficients(amplitude=1.0, sigma=sigma)
        noise = NoiseSample.sample(wiener_only_spec(), (0.0, 16.0), h, m_paths, seed=21)
        ens = simulate_mild(sysd, cs, noise, np.zeros(1))

        grid = ens.grid
        m_rec = np.zeros(len(grid))
        decay = math.exp(-a * h)
        for k in range(len(grid) - 1):
            m_rec[k + 1] = decay * (m_rec[k] + h * math.sin(math.sqrt(2.0) * grid[k]))
        emp_mean = ens.values[:, :, 0].mean(axis=0)
        mc_sd = sigma / math.sqrt(2 * a) / math.sqrt(m_paths)
        assert np.abs(emp_mean - m_rec).max() < 5 * mc_sd

        s2 = math.sqrt(2.0)
        closed = (np.sin(s2 * grid) - s2 * np.cos(s2 * grid) + s2 * np.exp(-grid)) / 3.0
        assert np.abs(m_rec - closed).max() < 2.0 * h

        tail = grid >= 8.0
        emp_var = ens.values[:, tail, 0].var(axis=0).mean()
        assert emp_var == pytest.approx(sigma**2 / (2 * a), rel=0.15)


# ---------------------------------------------------------------------------
# the integral operator
# ---------------------------------------------------------------------------


def _random_ensemble(noise: NoiseSample, dim: int, seed: int, scale=1.0) -> PathEnsemble:
    gen = np.random.default_rng(seed)
    r = noise.paths[0]
    vals = scale * gen.normal(size=(noise.n_paths, r.n_steps + 1, dim))
    return PathEnsemble(h=r.h, k_lo=r.k_lo, values=vals)


class TestApplyS:
    def test_zero_coefficients_map_to_zero(self):
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-2.0, 2.0), 1.0 / 64, 4, seed=2)
        ens = _random_ensemble(noise, 2, seed=0)
        out, report = apply_S(sysd, zero_coefficients(2, 1), noise, ens, truncation=1.0)
        assert np.abs(out.values).max() == 0.0
        assert report["truncation"] == 1.0
        assert report["tail_factor"] == pytest.approx(np.exp(-6.0) / 6.0)

    def test_constant_drift_recovers_closed_form(self):
        """For drift (c1, c2) and the block-diagonal benchmark system the
        bounded solution is the constant (-c1/8, c2/6); the one-step
        kernel telescopes exactly, so the only interior error is the
        truncation tail."""
        c1, c2 = 0.7, -1.3
        sysd = benchmark_system()
        t_c = 1.5
        noise = NoiseSample.sample(benchmark_spec(), (-2.0, 4.0), 1.0 / 64, 3, seed=4)
        res = picard_solve(
            sysd, constant_drift_coefficients(c1, c2), noise, tol=1e-26, truncation=t_c
        )
        assert res.converged
        grid = res.ensemble.grid
        interior = (grid >= grid[0] + t_c) & (grid <= grid[-1] - t_c)
        target = np.array([-c1 / 8.0, c2 / 6.0])
        err = np.abs(res.ensemble.values[:, interior, :] - target).max()
        tail = abs(c2) * math.exp(-6.0 * t_c) / 6.0 + abs(c1) * math.exp(-8.0 * t_c) / 8.0
        assert err <= tail + 1e-8

    def test_larger_truncation_tightens_constant_drift_error(self):
        c1, c2 = 1.0, 1.0
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-4.0, 4.0), 1.0 / 32, 2, seed=4)
        errs = []
        for t_c in (0.5, 1.0, 2.0):
            res = picard_solve(
                sysd, constant_drift_coefficients(c1, c2), noise, tol=1e-26, truncation=t_c
            )
            grid = res.ensemble.grid
            interior = (grid >= grid[0] + 2.0) & (grid <= grid[-1] - 2.0)
            target = np.array([-c1 / 8.0, c2 / 6.0])
            errs.append(np.abs(res.ensemble.values[:, interior, :] - target).max())
        assert errs[0] > errs[1] > errs[2]
        # each extra 0.5 of window shaves at least a factor e^{-6*0.5} ~ 0.05
        assert errs[2] < 0.01 * errs[0]

    def test_contraction_on_random_ensemble_pairs(self):
        """The mean-square contraction factor of the benchmark preset is
        eta = 5/48; the discrete operator must respect it."""
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-2.0, 2.0), 1.0 / 128, 32, seed=8)
        eta = float(check_conditions(1, 6, Fraction(1, 64), 1).eta)
        for seed in (1, 2):
            y1 = _random_ensemble(noise, 2, seed=10 + seed)
            y2 = _random_ensemble(noise, 2, seed=20 + seed, scale=0.5)
            s1, _ = apply_S(sysd, example41_coefficients(), noise, y1, truncation=1.0)
            s2, _ = apply_S(sysd, example41_coefficients(), noise, y2, truncation=1.0)
            num = np.mean(np.sum((s1.values - s2.values) ** 2, axis=2), axis=0).max()
            den = np.mean(np.sum((y1.values - y2.values) ** 2, axis=2), axis=0).max()
            assert num <= eta * den

    def test_shift_equivariance_bitwise_for_autonomous_coefficients(self):
        """Shifting the noise window and the ensemble together re-indexes
        the same increments, so time-constant coefficients give
        bit-identical output values."""
        sysd = benchmark_system()
        cs = CoefficientSet(
            dim_state=2,
            dim_noise=1,
            drift=((CoefficientTerm(0.5, "bounded_ratio", coord=1),), ()),
            diffusion=(((CoefficientTerm(0.1, "const"),),), ((),)),
            jump_small=((), (CoefficientTerm(0.1, "linear", coord=1),)),
            jump_large=((CoefficientTerm(0.05, "const", mark_weights=(1.0,)),), ()),
            lipschitz=Fraction(1, 2),
        )
        noise = NoiseSample.sample(benchmark_spec(), (-2.0, 4.0), 1.0 / 32, 5, seed=14)
        ens = _random_ensemble(noise, 2, seed=3)
        out, _ = apply_S(sysd, cs, noise, ens, truncation=1.0)

        shifted_noise = noise.shifted(1.0)
        shifted_ens = PathEnsemble(
            h=ens.h, k_lo=ens.k_lo - 32, values=ens.values
        )
        out_shift, _ = apply_S(sysd, cs, shifted_noise, shifted_ens, truncation=1.0)
        np.testing.assert_array_equal(out_shift.values, out.values)
        assert out_shift.t_lo == out.t_lo - 1.0

    def test_shift_equivariance_with_time_dependent_drift(self):
        """Shifting quasi-periodic coefficients by s in time must commute
        with the operator up to float round-off of the signal algebra."""
        s = 0.5
        root2 = math.sqrt(2.0)
        sysd = scalar_system(1.0)
        base = ou_forced_coefficients(amplitude=1.0, sigma=0.3)
        cos_s, sin_s = math.cos(root2 * s), math.sin(root2 * s)
        shifted_sig = QuasiPeriodicSignal.parse(
            f"{cos_s!r} * s1 + {sin_s!r} * c1", (root2,)
        )
        shifted_cs = CoefficientSet(
            dim_state=1,
            dim_noise=1,
            drift=((CoefficientTerm(1.0, "const", outer=shifted_sig),),),
            diffusion=base.diffusion,
            jump_small=((),),
            jump_large=((),),
            lipschitz=base.lipschitz,
        )
        noise = NoiseSample.sample(wiener_only_spec(), (-4.0, 4.0), 1.0 / 32, 4, seed=6)
        ens = _random_ensemble(noise, 1, seed=5)
        out, _ = apply_S(sysd, base, noise, ens, truncation=2.0)

        shifted_noise = noise.shifted(s)
        shifted_ens = PathEnsemble(h=ens.h, k_lo=ens.k_lo - 16, values=ens.values)
        out_shift, _ = apply_S(sysd, shifted_cs, shifted_noise, shifted_ens, truncation=2.0)
        assert np.abs(out_shift.values - out.values).max() < 1e-12

    def test_chunking_is_bit_identical(self):
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-1.0, 2.0), 1.0 / 64, 7, seed=11)
        ens = _random_ensemble(noise, 2, seed=1)
        cs = example41_coefficients()
        full, _ = apply_S(sysd, cs, noise, ens, truncation=0.5)
        for chunk in (1, 2, 3, 7):
            part, _ = apply_S(sysd, cs, noise, ens, truncation=0.5, chunk_paths=chunk)
            np.testing.assert_array_equal(part.values, full.values)

    def test_validation_errors(self):
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-1.0, 1.0), 1.0 / 32, 2, seed=0)
        ens = _random_ensemble(noise, 2, seed=0)
        cs = example41_coefficients()
        with pytest.raises(SolverError, match="too narrow"):
            apply_S(sysd, cs, noise, ens, truncation=1.5)
        with pytest.raises(SolverError, match="multiple of the step"):
            apply_S(sysd, cs, noise, ens, truncation=0.52)
        other = NoiseSample.sample(benchmark_spec(), (-1.0, 2.0), 1.0 / 32, 2, seed=0)
        with pytest.raises(SolverError, match="grids do not match"):
            apply_S(sysd, cs, other, ens, truncation=0.5)
        three = NoiseSample.sample(benchmark_spec(), (-1.0, 1.0), 1.0 / 32, 3, seed=0)
        with pytest.raises(SolverError, match="path counts"):
            apply_S(sysd, cs, three, ens, truncation=0.5)

    def test_multidimensional_noise_runs(self):
        n_modes = 4
        sysd = DichotomousSystem.create(
            np.diag(-np.arange(1.0, n_modes + 1)), np.eye(n_modes), k=1.0, omega=1.0
        )
        cs = galerkin_heat_coefficients(n_modes=n_modes)
        from levyap.noise import uniform_annulus_mark

        spec = LevyProcessSpec(
            dim=n_modes,
            wiener=WienerSpec(n_modes, np.eye(n_modes)),
            jumps=(
                JumpComponent(
                    rate=2.0, region="small", marks=uniform_annulus_mark(0.1, 0.5, n_modes)
                ),
            ),
        )
        noise = NoiseSample.sample(spec, (-2.0, 2.0), 1.0 / 32, 3, seed=17)
        res = picard_solve(sysd, cs, noise, tol=1e-18, truncation=1.0)
        assert res.converged
        assert res.ensemble.values.shape == (3, 129, n_modes)
        assert np.all(np.isfinite(res.ensemble.values))


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------


class TestPicard:
    def test_zero_coefficients_converge_immediately(self):
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-1.0, 1.0), 1.0 / 32, 3, seed=1)
        res = picard_solve(sysd, zero_coefficients(2, 1), noise, truncation=0.5)
        assert res.converged and res.iterations == 1
        assert res.gap_trace[0]["gap"] == 0.0
        assert np.abs(res.ensemble.values).max() == 0.0

    def test_trace_record_shape(self):
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-1.0, 2.0), 1.0 / 64, 8, seed=3)
        res = picard_solve(
            sysd, example41_coefficients(), noise, tol=1e-20, truncation=1.0
        )
        assert res.converged
        assert res.iterations == len(res.gap_trace)
        for i, rec in enumerate(res.gap_trace):
            assert set(rec) == {"k", "gap", "sup_second_moment", "wall_ms"}
            assert rec["k"] == i + 1
            assert rec["gap"] >= 0.0 and rec["wall_ms"] >= 0.0
        assert res.gap_trace[-1]["gap"] <= 1e-20

    def test_gap_ratios_below_contraction_factor(self):
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-2.0, 3.0), 1.0 / 128, 48, seed=7)
        res = picard_solve(
            sysd, example41_coefficients(), noise, tol=1e-24, truncation=1.5
        )
        gaps = res.gaps()
        eta = 5.0 / 48.0
        floor = 1e-26
        for a, b in zip(gaps[:-1], gaps[1:]):
            if a > 10 * floor and b > 0:
                assert b / a <= eta + 0.1

    def test_max_iter_returns_unconverged(self):
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-1.0, 2.0), 1.0 / 64, 4, seed=3)
        res = picard_solve(
            sysd, example41_coefficients(), noise, tol=1e-30, max_iter=2, truncation=1.0
        )
        assert not res.converged
        assert res.iterations == 2

    def test_fixed_point_self_consistency(self):
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-2.0, 2.0), 1.0 / 64, 16, seed=9)
        res = picard_solve(
            sysd, example41_coefficients(), noise, tol=1e-24, truncation=1.0
        )
        again, _ = apply_S(
            sysd, example41_coefficients(), noise, res.ensemble, truncation=1.0
        )
        gap = np.mean(np.sum((again.values - res.ensemble.values) ** 2, axis=2), axis=0).max()
        assert gap <= 1e-23

    def test_default_truncation_is_twelve_over_omega(self):
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-2.0, 3.0), 1.0 / 32, 2, seed=2)
        res = picard_solve(sysd, example41_coefficients(), noise, tol=1e-12)
        assert res.tail_report["truncation"] == pytest.approx(2.0)
        narrow = NoiseSample.sample(benchmark_spec(), (-1.0, 1.0), 1.0 / 32, 2, seed=2)
        with pytest.raises(SolverError, match="too narrow"):
            picard_solve(sysd, example41_coefficients(), narrow, tol=1e-12)

    def test_noise_determinism_and_sensitivity(self):
        sysd = benchmark_system()
        cs = example41_coefficients()
        a = NoiseSample.sample(benchmark_spec(), (-1.0, 2.0), 1.0 / 64, 6, seed=5)
        b = NoiseSample.sample(benchmark_spec(), (-1.0, 2.0), 1.0 / 64, 6, seed=5)
        c = NoiseSample.sample(benchmark_spec(), (-1.0, 2.0), 1.0 / 64, 6, seed=6)
        ra = picard_solve(sysd, cs, a, tol=1e-18, truncation=1.0)
        rb = picard_solve(sysd, cs, b, tol=1e-18, truncation=1.0)
        rc = picard_solve(sysd, cs, c, tol=1e-18, truncation=1.0)
        np.testing.assert_array_equal(ra.ensemble.values, rb.ensemble.values)
        assert not np.array_equal(ra.ensemble.values, rc.ensemble.values)

    def test_chunked_solve_is_bit_identical(self):
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-1.0, 2.0), 1.0 / 64, 5, seed=13)
        cs = example41_coefficients()
        full = picard_solve(sysd, cs, noise, tol=1e-18, truncation=1.0)
        part = picard_solve(sysd, cs, noise, tol=1e-18, truncation=1.0, chunk_paths=2)
        np.testing.assert_array_equal(full.ensemble.values, part.ensemble.values)
        assert [r["gap"] for r in full.gap_trace] == [r["gap"] for r in part.gap_trace]

    def test_invalid_arguments(self):
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-1.0, 1.0), 1.0 / 32, 2, seed=1)
        with pytest.raises(SolverError):
            picard_solve(sysd, example41_coefficients(), noise, tol=0.0, truncation=0.5)
        with pytest.raises(SolverError):
            picard_solve(
                sysd, example41_coefficients(), noise, max_iter=0, truncation=0.5
            )

    def test_l2_increments_shrink_linearly_near_zero_lag(self):
        """Mean-square continuity of the fixed point: increments over lag
        delta are bounded by C * delta and trend monotonically."""
        sysd = benchmark_system()
        noise = NoiseSample.sample(benchmark_spec(), (-2.0, 2.0), 1.0 / 128, 64, seed=15)
        res = picard_solve(
            sysd, example41_coefficients(), noise, tol=1e-20, truncation=1.0
        )
        ens = res.ensemble
        h = ens.h
        lags = [h, 2 * h, 4 * h, 8 * h, 16 * h]
        t0 = 0.0
        incs = [l2_increment(ens, t0 + lag, t0) for lag in lags]
        c_fit = max(inc / lag for inc, lag in zip(incs, lags))
        assert all(inc <= c_fit * lag * (1 + 1e-9) for inc, lag in zip(incs, lags))
        # averaged over several anchors the trend must be nondecreasing
        anchors = [-1.0, -0.5, 0.0, 0.5, 1.0]
        avg = [
            float(np.mean([l2_increment(ens, t + lag, t) for t in anchors]))
            for lag in lags
        ]
        assert all(a <= b * (1 + 0.25) for a, b in zip(avg[:-1], avg[1:]))
