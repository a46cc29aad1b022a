"""Dichotomy module tests.

Closed-form oracles:

- rotation generator [[0, -w], [w, 0]] exponentiates to the rotation
  matrix [[cos wt, -sin wt], [sin wt, cos wt]];
- nilpotent [[0, 1], [0, 0]] exponentiates to [[1, t], [0, 1]] and its
  integral over [0, t] is [[t, t^2/2], [0, t]];
- diag(8, -6) with P = diag(0, 1) decays like e^{-6t} forward on range(P)
  and like e^{-8t} backward on range(I - P);
- an oblique projection built from eigenvectors V = [[1, 1], [0, 1]] with
  eigenvalues (-1, 2) satisfies e^{At}P = e^{-t} P, so the tight envelope
  constants are K = sqrt(2), omega = 1.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyap.dichotomy import (
    DichotomousSystem,
    DichotomyError,
    MatrixExpOverflowError,
    NoDichotomyError,
    estimate_constants,
    evolve_stable,
    evolve_unstable,
    integrated_exp,
    matrix_exp,
    spot_check_dichotomy,
)


def example_system():
    return DichotomousSystem.create(
        np.diag([8.0, -6.0]), np.diag([0.0, 1.0]), 1.0, 6.0
    )


def oblique_system():
    v = np.array([[1.0, 1.0], [0.0, 1.0]])
    vinv = np.linalg.inv(v)
    a = v @ np.diag([-1.0, 2.0]) @ vinv
    p = v @ np.diag([1.0, 0.0]) @ vinv
    return DichotomousSystem.create(a, p, 2.0, 1.0)


# ---------------------------------------------------------------------------
# matrix exponential
# ---------------------------------------------------------------------------


def test_matrix_exp_rotation_oracle():
    w = 0.7
    a = np.array([[0.0, -w], [w, 0.0]])
    for t in (0.0, 0.3, 2.1, -1.4):
        expected = np.array(
            [[np.cos(w * t), -np.sin(w * t)], [np.sin(w * t), np.cos(w * t)]]
        )
        assert np.allclose(matrix_exp(a, t), expected, atol=1e-12)


def test_matrix_exp_nilpotent_oracle():
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    t = 0.37
    assert np.allclose(matrix_exp(a, t), [[1.0, t], [0.0, 1.0]], atol=1e-15)
    assert np.allclose(
        integrated_exp(a, t), [[t, t**2 / 2], [0.0, t]], atol=1e-15
    )


def test_integrated_exp_zero_generator():
    t = 1.3
    assert np.allclose(integrated_exp(np.zeros((3, 3)), t), t * np.eye(3))


def test_integrated_exp_matches_derivative_relation():
    # A @ Phi(t) = e^{At} - I for invertible and singular A alike
    gen = np.random.default_rng(0)
    for _ in range(5):
        a = gen.standard_normal((3, 3))
        a[2] = a[0] + a[1]  # force singularity
        t = 0.8
        phi = integrated_exp(a, t)
        assert np.allclose(a @ phi, matrix_exp(a, t) - np.eye(3), atol=1e-12)


def test_matrix_exp_overflow_guard():
    with pytest.raises(MatrixExpOverflowError, match="overflow"):
        matrix_exp(np.diag([100.0, -1.0]), 10.0)
    with pytest.raises(MatrixExpOverflowError, match="non-finite"):
        matrix_exp(np.array([[np.nan]]), 1.0)


@given(t=st.floats(min_value=-3.0, max_value=3.0))
@settings(max_examples=25, deadline=None)
def test_matrix_exp_group_inverse(t):
    a = np.array([[0.2, 1.0], [-0.5, -0.3]])
    prod = matrix_exp(a, t) @ matrix_exp(a, -t)
    assert np.allclose(prod, np.eye(2), atol=1e-12)


# ---------------------------------------------------------------------------
# construction and validation
# ---------------------------------------------------------------------------


def test_create_rejects_non_idempotent_projection():
    with pytest.raises(DichotomyError, match="idempotent"):
        DichotomousSystem.create(np.eye(2), np.array([[1.0, 0.1], [0.0, 1.0]]), 1.0, 1.0)


def test_create_rejects_non_commuting_projection():
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    p = np.diag([1.0, 0.0])
    with pytest.raises(DichotomyError, match="commute"):
        DichotomousSystem.create(a, p, 1.0, 1.0)


def test_create_rejects_bad_constants():
    a, p = np.diag([-1.0, -1.0]), np.eye(2)
    with pytest.raises(DichotomyError, match="K"):
        DichotomousSystem.create(a, p, 0.0, 1.0)
    with pytest.raises(DichotomyError, match="omega"):
        DichotomousSystem.create(a, p, 1.0, -2.0)


def test_create_rejects_too_tight_constants():
    # declared decay 7 but the true stable rate is 6
    with pytest.raises(DichotomyError, match="violated"):
        DichotomousSystem.create(np.diag([8.0, -6.0]), np.diag([0.0, 1.0]), 1.0, 7.0)


def test_spot_check_within_declared_bounds():
    assert spot_check_dichotomy(example_system()) <= 1.0 + 1e-9
    assert spot_check_dichotomy(oblique_system()) <= 1.0 + 1e-9


# ---------------------------------------------------------------------------
# propagators
# ---------------------------------------------------------------------------


def test_projected_propagators_match_direct_formula():
    sys = example_system()
    t = 0.5
    assert np.allclose(
        sys.stable_matrix(t), matrix_exp(sys.a, t) @ sys.p, atol=1e-12
    )
    assert np.allclose(
        sys.unstable_matrix(-t), matrix_exp(sys.a, -t) @ sys.j, atol=1e-12
    )


def test_unstable_propagator_avoids_overflow():
    # direct e^{At} at t = -120 overflows through the stable block;
    # the subspace route stays finite
    sys = DichotomousSystem.create(
        np.diag([1.0, -8.0]), np.diag([0.0, 1.0]), 1.0, 1.0
    )
    m = sys.unstable_matrix(-120.0)
    assert np.all(np.isfinite(m))
    assert m[0, 0] == pytest.approx(np.exp(-120.0))


def test_propagator_time_domain_checks():
    sys = example_system()
    with pytest.raises(DichotomyError):
        sys.stable_matrix(-0.1)
    with pytest.raises(DichotomyError):
        sys.unstable_matrix(0.1)
    with pytest.raises(DichotomyError):
        evolve_stable(sys, -1.0, np.ones(2))
    with pytest.raises(DichotomyError):
        evolve_unstable(sys, 1.0, np.ones(2))


@given(
    s=st.floats(min_value=0.0, max_value=1.5),
    t=st.floats(min_value=0.0, max_value=1.5),
)
@settings(max_examples=25, deadline=None)
def test_semigroup_law_on_both_ranges(s, t):
    sys = oblique_system()
    lhs = sys.stable_matrix(s + t)
    rhs = sys.stable_matrix(s) @ sys.stable_matrix(t)
    assert np.allclose(lhs, rhs, atol=1e-10)
    lhs_u = sys.unstable_matrix(-(s + t))
    rhs_u = sys.unstable_matrix(-s) @ sys.unstable_matrix(-t)
    assert np.allclose(lhs_u, rhs_u, atol=1e-10)


def test_propagators_commute_with_projection():
    sys = oblique_system()
    m = sys.stable_matrix(0.7)
    assert np.allclose(m @ sys.p, sys.p @ m, atol=1e-12)
    assert np.allclose(m, sys.p @ m, atol=1e-12)


def test_decay_bounds_on_random_vectors():
    sys = example_system()
    gen = np.random.default_rng(4)
    for t in np.linspace(0.0, 1.5, 7):
        for _ in range(5):
            v = gen.standard_normal(2)
            assert np.linalg.norm(evolve_stable(sys, t, v)) <= (
                sys.k * np.exp(-sys.omega * t) * np.linalg.norm(v) + 1e-12
            )
            assert np.linalg.norm(evolve_unstable(sys, -t, v)) <= (
                sys.k * np.exp(-sys.omega * t) * np.linalg.norm(v) + 1e-12
            )


def test_kernel_matrices_match_closed_forms():
    sys = example_system()
    h = 0.01
    km = sys.stable_kernel_matrix(h)
    assert km[1, 1] == pytest.approx((1 - np.exp(-6 * h)) / 6, rel=1e-12)
    assert km[0, 0] == 0.0
    ku = sys.unstable_kernel_matrix(-h)
    assert ku[0, 0] == pytest.approx((1 - np.exp(-8 * h)) / 8, rel=1e-12)


def test_degenerate_projections():
    # P = I: no unstable range, backward propagator vanishes
    sys = DichotomousSystem.create(np.diag([-2.0, -3.0]), np.eye(2), 1.0, 2.0)
    assert sys.rank_unstable == 0
    assert np.allclose(sys.unstable_matrix(-1.0), 0.0)
    # P = 0: no stable range
    sys0 = DichotomousSystem.create(np.diag([2.0, 3.0]), np.zeros((2, 2)), 1.0, 2.0)
    assert sys0.rank_stable == 0
    assert np.allclose(sys0.stable_matrix(1.0), 0.0)


# ---------------------------------------------------------------------------
# constant estimation
# ---------------------------------------------------------------------------


def test_estimate_constants_recovers_example_values():
    est = estimate_constants(example_system(), np.linspace(0.0, 2.0, 50))
    assert abs(est.k_hat - 1.0) <= 0.01
    assert abs(est.omega_hat - 6.0) <= 0.05
    assert est.max_residual < 1e-9


def test_estimate_constants_full_stable_system():
    sys = DichotomousSystem.create(np.diag([-2.0, -3.0]), np.eye(2), 1.0, 2.0)
    est = estimate_constants(sys, np.linspace(0.0, 3.0, 40))
    assert est.omega_hat == pytest.approx(2.0, abs=1e-6)
    assert est.k_hat == pytest.approx(1.0, abs=1e-6)


def test_estimate_constants_oblique_envelope():
    est = estimate_constants(oblique_system(), np.linspace(0.0, 2.0, 30))
    assert est.omega_hat == pytest.approx(1.0, abs=1e-6)
    assert est.k_hat == pytest.approx(np.sqrt(2.0), abs=1e-6)


def test_estimate_envelope_dominates_samples():
    sys = oblique_system()
    grid = np.linspace(0.0, 2.0, 30)
    est = estimate_constants(sys, grid)
    for t in grid:
        norm = max(
            np.linalg.norm(sys.stable_matrix(t), 2),
            np.linalg.norm(sys.unstable_matrix(-t), 2),
        )
        assert norm <= est.k_hat * np.exp(-est.omega_hat * t) * (1 + 1e-9)


def test_estimate_detects_missing_dichotomy():
    sys = DichotomousSystem.create(np.diag([0.0, -1.0]), np.eye(2), 1.1, 0.1, check=False)
    with pytest.raises(NoDichotomyError, match="no dichotomy"):
        estimate_constants(sys, np.linspace(0.0, 5.0, 20))


def test_estimate_with_trial_vectors():
    sys = example_system()
    probes = np.eye(2)
    est = estimate_constants(sys, np.linspace(0.0, 1.0, 20), trial_vectors=probes)
    assert est.omega_hat == pytest.approx(6.0, abs=1e-9)
