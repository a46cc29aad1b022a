"""Linear systems with an exponential dichotomy.

A system pairs a generator matrix A with a projection P commuting with A
and constants K, omega such that the semigroup e^{At} contracts like
K e^{-omega t} on range(P) forward in time and like K e^{omega t} on
range(I - P) backward in time.  Forward evolution restricted to the
unstable range is inverted through the subspace, never through a full
matrix exponential, so stiff stable directions cannot overflow and
round-off from the complementary subspace cannot contaminate the result:
both projected propagators are computed as U e^{Bt} U^T Proj where U is
an orthonormal basis of the invariant range and B the compression of A
to it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

__all__ = [
    "DichotomyError",
    "NoDichotomyError",
    "MatrixExpOverflowError",
    "DichotomousSystem",
    "DichotomyEstimate",
    "matrix_exp",
    "integrated_exp",
    "evolve_stable",
    "evolve_unstable",
    "estimate_constants",
    "spot_check_dichotomy",
]

_EXP_NORM_LIMIT = 700.0  # e^700 is the edge of double range


class DichotomyError(ValueError):
    """Raised when a declared dichotomous system is inconsistent."""


class NoDichotomyError(DichotomyError):
    """Raised when no exponential decay is detectable for a projection."""


class MatrixExpOverflowError(ArithmeticError):
    """Raised when a matrix exponential would overflow double range."""


def matrix_exp(a: np.ndarray, t: float) -> np.ndarray:
    """e^{A t} with an overflow guard on the scaled spectral norm."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)) or not np.isfinite(t):
        raise MatrixExpOverflowError("matrix exponential of non-finite input")
    if a.size == 0:
        return np.zeros_like(a)
    scale = float(np.linalg.norm(a, 2)) * abs(t)
    if scale > _EXP_NORM_LIMIT:
        raise MatrixExpOverflowError(
            f"matrix exponential overflow risk: ||A||*|t| = {scale:.3g} > {_EXP_NORM_LIMIT}"
        )
    return expm(a * t)


def integrated_exp(a: np.ndarray, t: float) -> np.ndarray:
    """The integral of e^{A s} ds over [0, t].

    Computed from one exponential of the augmented block matrix
    [[A, I], [0, 0]]; exact also when A is singular.
    """
    a = np.asarray(a, dtype=float)
    d = a.shape[0]
    if d == 0:
        return np.zeros((0, 0))
    aug = np.zeros((2 * d, 2 * d))
    aug[:d, :d] = a
    aug[:d, d:] = np.eye(d)
    return matrix_exp(aug, t)[:d, d:]


def _orthonormal_range(m: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the range of a projection matrix."""
    u, s, _ = np.linalg.svd(m)
    rank = int(np.sum(s > 1e-9 * max(1.0, s[0] if len(s) else 0.0)))
    return u[:, :rank]


@dataclass(frozen=True, eq=False)
class DichotomousSystem:
    """Generator, projection and dichotomy constants, with derived bases.

    Use :meth:`create` to construct; it validates the projection algebra
    and optionally spot-checks the declared decay bounds.
    """

    dim: int
    a: np.ndarray
    p: np.ndarray
    k: float
    omega: float
    j: np.ndarray
    basis_stable: np.ndarray      # orthonormal basis of range(P)
    gen_stable: np.ndarray        # A compressed to range(P)
    basis_unstable: np.ndarray    # orthonormal basis of range(I - P)
    gen_unstable: np.ndarray      # A compressed to range(I - P)

    @classmethod
    def create(
        cls,
        a: np.ndarray,
        p: np.ndarray,
        k: float,
        omega: float,
        check: bool = True,
    ) -> "DichotomousSystem":
        a = np.asarray(a, dtype=float)
        p = np.asarray(p, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DichotomyError("generator must be square")
        d = a.shape[0]
        if p.shape != (d, d):
            raise DichotomyError("projection shape must match the generator")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(p))):
            raise DichotomyError("generator and projection must be finite")
        scale = max(1.0, float(np.abs(a).max()), float(np.abs(p).max()) ** 2)
        if np.abs(p @ p - p).max() > 1e-10 * scale:
            raise DichotomyError("projection is not idempotent within 1e-10")
        if np.abs(a @ p - p @ a).max() > 1e-10 * scale:
            raise DichotomyError("projection does not commute with the generator within 1e-10")
        if not (k > 0 and np.isfinite(k)):
            raise DichotomyError("constant K must be positive and finite")
        if not (omega > 0 and np.isfinite(omega)):
            raise DichotomyError("constant omega must be positive and finite")
        j = np.eye(d) - p
        u_p = _orthonormal_range(p)
        u_j = _orthonormal_range(j)
        if u_p.shape[1] + u_j.shape[1] != d:
            raise DichotomyError("ranges of P and I - P do not span the space")
        sys = cls(
            dim=d,
            a=a,
            p=p,
            k=float(k),
            omega=float(omega),
            j=j,
            basis_stable=u_p,
            gen_stable=u_p.T @ a @ u_p,
            basis_unstable=u_j,
            gen_unstable=u_j.T @ a @ u_j,
        )
        if check:
            worst = spot_check_dichotomy(sys)
            if worst > 1.0 + 1e-9:
                raise DichotomyError(
                    f"declared bounds K={k}, omega={omega} violated by factor {worst:.6g}"
                )
        return sys

    @property
    def rank_stable(self) -> int:
        return self.basis_stable.shape[1]

    @property
    def rank_unstable(self) -> int:
        return self.basis_unstable.shape[1]

    def stable_matrix(self, t: float) -> np.ndarray:
        """e^{At} P as a matrix, for t >= 0."""
        if t < 0:
            raise DichotomyError("stable propagator is defined for t >= 0")
        if self.rank_stable == 0:
            return np.zeros((self.dim, self.dim))
        u = self.basis_stable
        return u @ matrix_exp(self.gen_stable, t) @ (u.T @ self.p)

    def unstable_matrix(self, t: float) -> np.ndarray:
        """e^{At} (I - P) as a matrix, for t <= 0.

        Realized through the unstable invariant subspace, where the
        semigroup is invertible backward in time.
        """
        if t > 0:
            raise DichotomyError("unstable propagator is defined for t <= 0")
        if self.rank_unstable == 0:
            return np.zeros((self.dim, self.dim))
        u = self.basis_unstable
        return u @ matrix_exp(self.gen_unstable, t) @ (u.T @ self.j)

    def stable_kernel_matrix(self, t: float) -> np.ndarray:
        """Integral of e^{Au} P du over [0, t], for t >= 0."""
        if t < 0:
            raise DichotomyError("stable kernel is defined for t >= 0")
        if self.rank_stable == 0:
            return np.zeros((self.dim, self.dim))
        u = self.basis_stable
        return u @ integrated_exp(self.gen_stable, t) @ (u.T @ self.p)

    def unstable_kernel_matrix(self, t: float) -> np.ndarray:
        """Integral of e^{Au} (I - P) du over [t, 0], for t <= 0."""
        if t > 0:
            raise DichotomyError("unstable kernel is defined for t <= 0")
        if self.rank_unstable == 0:
            return np.zeros((self.dim, self.dim))
        u = self.basis_unstable
        return u @ (-integrated_exp(self.gen_unstable, t)) @ (u.T @ self.j)


def evolve_stable(sys: DichotomousSystem, t: float, v: np.ndarray) -> np.ndarray:
    """Propagate the stable component forward: e^{At} P v for t >= 0."""
    return sys.stable_matrix(t) @ np.asarray(v, dtype=float)


def evolve_unstable(sys: DichotomousSystem, t: float, v: np.ndarray) -> np.ndarray:
    """Propagate the unstable component backward: e^{At} (I-P) v for t <= 0."""
    return sys.unstable_matrix(t) @ np.asarray(v, dtype=float)


def spot_check_dichotomy(
    sys: DichotomousSystem,
    t_grid: np.ndarray | None = None,
    n_vectors: int = 16,
    seed: int = 0,
) -> float:
    """Worst ratio of observed to declared decay over a grid of times and
    random probe vectors.  At most 1 (up to round-off) for a valid system."""
    if t_grid is None:
        t_grid = np.linspace(0.0, 4.0 / sys.omega, 9)
    gen = np.random.default_rng(seed)
    probes = gen.standard_normal((sys.dim, n_vectors))
    probes /= np.linalg.norm(probes, axis=0, keepdims=True)
    worst = 0.0
    for t in np.asarray(t_grid, dtype=float):
        if t < 0:
            raise DichotomyError("spot check grid must be nonnegative")
        bound = sys.k * np.exp(-sys.omega * t)
        if sys.rank_stable:
            norms = np.linalg.norm(sys.stable_matrix(t) @ probes, axis=0)
            worst = max(worst, float(norms.max()) / bound)
        if sys.rank_unstable:
            norms = np.linalg.norm(sys.unstable_matrix(-t) @ probes, axis=0)
            worst = max(worst, float(norms.max()) / bound)
    return worst


@dataclass(frozen=True)
class DichotomyEstimate:
    """Envelope fit of dichotomy constants from sampled propagator norms."""

    k_hat: float
    omega_hat: float
    max_residual: float

    def as_dict(self) -> dict:
        return {
            "k_hat": self.k_hat,
            "omega_hat": self.omega_hat,
            "max_residual": self.max_residual,
        }


def estimate_constants(
    sys: DichotomousSystem,
    t_grid: np.ndarray,
    trial_vectors: np.ndarray | None = None,
) -> DichotomyEstimate:
    """Fit (K, omega) so that K e^{-omega t} envelopes both projected
    propagator norms on the grid.

    The decay rate comes from a least-squares line through the log of the
    pointwise norm envelope; K is then inflated until the bound covers
    every grid point, and the largest log gap to the envelope is reported.
    With ``trial_vectors`` the operator norms are replaced by the largest
    amplification among the given probes.

    Raises NoDichotomyError when the fitted slope shows no decay.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2:
        raise DichotomyError("need a grid of at least two times")
    if np.any(t_grid < 0):
        raise DichotomyError("estimation grid must be nonnegative")
    if sys.rank_stable == 0 and sys.rank_unstable == 0:
        raise DichotomyError("system has no directions to estimate from")

    def probe_norm(mat: np.ndarray) -> float:
        if trial_vectors is None:
            return float(np.linalg.norm(mat, 2))
        v = np.asarray(trial_vectors, dtype=float)
        return float(
            np.max(np.linalg.norm(mat @ v, axis=0) / np.linalg.norm(v, axis=0))
        )

    envelope = np.zeros(len(t_grid))
    for i, t in enumerate(t_grid):
        m = 0.0
        if sys.rank_stable:
            m = max(m, probe_norm(sys.stable_matrix(t)))
        if sys.rank_unstable:
            m = max(m, probe_norm(sys.unstable_matrix(-t)))
        envelope[i] = m
    if np.any(envelope <= 0.0):
        raise DichotomyError("propagator norm vanished on the grid")

    log_env = np.log(envelope)
    slope, intercept = np.polyfit(t_grid, log_env, 1)
    if slope >= 0:
        raise NoDichotomyError(
            f"no dichotomy at this projection: fitted decay rate {-slope:.3g} <= 0"
        )
    omega_hat = -float(slope)
    log_k = float(np.max(log_env + omega_hat * t_grid))
    max_residual = float(np.max(np.abs(log_env - (log_k - omega_hat * t_grid))))
    return DichotomyEstimate(
        k_hat=float(np.exp(log_k)),
        omega_hat=omega_hat,
        max_residual=max_residual,
    )
