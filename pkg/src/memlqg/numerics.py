"""Dense real-matrix kernels: steady Lyapunov, Riccati marching, CARE.

Matrices are plain float64 numpy arrays throughout. Covariance-like results
are re-symmetrized after every update and verified against their defining
equation before being returned, so callers can rely on the residual bounds
stated in each docstring.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg


class UnstableDriftError(ValueError):
    """The drift matrix has an eigenvalue with a nonnegative real part."""


class ConvergenceError(RuntimeError):
    """An iterative or factorization-based solve missed its tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def symmetrize(M: np.ndarray) -> np.ndarray:
    """(M + M.T)/2 — covariance hygiene after any linear-algebra step."""
    return 0.5 * (M + M.T)


def min_eigenvalue(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(symmetrize(M)).min())


def is_psd(M: np.ndarray, tol: float = 1e-10) -> bool:
    """True when the minimum eigenvalue of sym(M) is >= -tol."""
    return min_eigenvalue(M) >= -tol


def _check_square(M: np.ndarray, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {M.shape}")
    return M


def _check_symmetric(M: np.ndarray, name: str) -> np.ndarray:
    M = _check_square(M, name)
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > 1e-10 * scale:
        raise ValueError(f"{name} must be symmetric")
    return symmetrize(M)


def solve_lyapunov_steady(A: np.ndarray, Qn: np.ndarray) -> np.ndarray:
    """Solve A X + X A^T + Qn = 0 for symmetric X, A strictly Hurwitz.

    Backed by the dense Bartels-Stewart solver; the result is re-symmetrized
    and checked to satisfy the equation to 1e-10 relative to ||Qn||.
    """
    A = _check_square(A, "A")
    Qn = _check_symmetric(Qn, "Qn")
    if A.shape != Qn.shape:
        raise ValueError(f"shape mismatch: A {A.shape} vs Qn {Qn.shape}")
    eigs = np.linalg.eigvals(A)
    worst = eigs[np.argmax(eigs.real)]
    if worst.real >= 0.0:
        raise UnstableDriftError(f"unstable drift: eigenvalue {worst} has Re >= 0")

    qscale = float(np.linalg.norm(Qn))
    if qscale == 0.0:
        return np.zeros_like(Qn)
    X = symmetrize(scipy.linalg.solve_continuous_lyapunov(A, -Qn))
    residual = float(np.linalg.norm(A @ X + X @ A.T + Qn)) / qscale
    if residual > 1e-10:
        raise ConvergenceError("Lyapunov solve inaccurate", residual)
    return X


@dataclass(frozen=True)
class SteadySolveOptions:
    """Knobs for the RK4 time-marcher.

    `step` is the initial time step, `max_time` the total simulated horizon,
    and `convergence_tol` the bound on ||rhs(X)|| / max(1, ||X||).
    """

    step: float
    convergence_tol: float = 1e-10
    max_time: float = 50.0

    def __post_init__(self):
        if self.step <= 0 or self.max_time <= 0 or self.convergence_tol <= 0:
            raise ValueError("SteadySolveOptions fields must be positive")

    @classmethod
    def for_rate(cls, rate: float) -> "SteadySolveOptions":
        """Defaults scaled to a system whose slowest relaxation rate is `rate`."""
        if rate <= 0:
            raise ValueError("rate must be positive")
        return cls(step=1e-3 / rate, convergence_tol=1e-10, max_time=50.0 / rate)


def _rk4_step(rhs: Callable[[np.ndarray], np.ndarray], X: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(X)
    k2 = rhs(X + 0.5 * h * k1)
    k3 = rhs(X + 0.5 * h * k2)
    k4 = rhs(X + h * k3)
    return X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_to_steady(
    rhs: Callable[[np.ndarray], np.ndarray],
    X0: np.ndarray,
    opts: SteadySolveOptions,
) -> np.ndarray:
    """March dX/dt = rhs(X) with classical RK4 until the flow vanishes.

    Every accepted iterate is re-symmetrized. If a step increases the flow
    norm it is discarded and the step size halved. Raises ConvergenceError
    (carrying the final residual) if the horizon `opts.max_time` is exhausted
    or the step collapses before ||rhs(X)|| / max(1, ||X||) < convergence_tol.
    """
    X = symmetrize(_check_symmetric(np.array(X0, dtype=float), "X0"))

    def measure(M: np.ndarray) -> float:
        return float(np.linalg.norm(rhs(M))) / max(1.0, float(np.linalg.norm(M)))

    res = measure(X)
    if res < opts.convergence_tol:
        return X

    h = opts.step
    h_floor = opts.step * 2.0**-60
    t = 0.0
    flow_prev = float(np.linalg.norm(rhs(X)))
    while t < opts.max_time:
        Xn = symmetrize(_rk4_step(rhs, X, h))
        flow_new = float(np.linalg.norm(rhs(Xn)))
        if not np.isfinite(flow_new) or flow_new > flow_prev * (1.0 + 1e-12):
            h *= 0.5
            if h < h_floor:
                raise ConvergenceError("steady state not reached: step size collapsed", measure(X))
            continue
        X = Xn
        flow_prev = flow_new
        t += h
        if flow_new / max(1.0, float(np.linalg.norm(X))) < opts.convergence_tol:
            return X
    raise ConvergenceError("steady state not reached within max_time", measure(X))


def _care_residual(A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray, P: np.ndarray) -> np.ndarray:
    return A.T @ P + P @ A + Q - P @ B @ np.linalg.solve(R, B.T @ P)


def solve_care(Atil: np.ndarray, Btil: np.ndarray, Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Stabilizing solution of Atil^T P + P Atil + Q - P Btil R^-1 Btil^T P = 0.

    R must be symmetric positive definite; Q symmetric PSD. Backed by the
    scipy CARE solver with a Newton-Kleinman polish; the returned P satisfies
    the equation to 1e-8 relative to ||Q||.
    """
    Atil = _check_square(Atil, "Atil")
    Q = _check_symmetric(Q, "Q")
    R = _check_symmetric(R, "R")
    Btil = np.asarray(Btil, dtype=float)
    if Btil.ndim != 2 or Btil.shape[0] != Atil.shape[0] or Btil.shape[1] != R.shape[0]:
        raise ValueError(
            f"shape mismatch: Atil {Atil.shape}, Btil {Btil.shape}, R {R.shape}"
        )
    if Atil.shape != Q.shape:
        raise ValueError(f"shape mismatch: Atil {Atil.shape} vs Q {Q.shape}")
    try:
        np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise ValueError("R must be positive definite") from None
    if min_eigenvalue(Q) < -1e-10 * max(1.0, float(np.abs(Q).max())):
        raise ValueError("Q must be positive semidefinite")

    qscale = float(np.linalg.norm(Q))
    if qscale == 0.0:
        return np.zeros_like(Q)

    try:
        P = symmetrize(scipy.linalg.solve_continuous_are(Atil, Btil, Q, R))
    except Exception as exc:  # scipy raises LinAlgError or ValueError
        raise ConvergenceError(f"CARE solver failed: {exc}") from exc

    # Newton-Kleinman polish: each pass solves the closed-loop Lyapunov
    # equation exactly, squaring the error of the QZ-based seed.
    for _ in range(8):
        residual = float(np.linalg.norm(_care_residual(Atil, Btil, Q, R, P))) / qscale
        if residual < 1e-12:
            break
        G = np.linalg.solve(R, Btil.T @ P)
        Acl = Atil - Btil @ G
        if np.linalg.eigvals(Acl).real.max() >= 0.0:
            break
        P = solve_lyapunov_steady(Acl.T, Q + G.T @ R @ G)

    residual = float(np.linalg.norm(_care_residual(Atil, Btil, Q, R, P))) / qscale
    if residual > 1e-8:
        raise ConvergenceError("CARE residual above tolerance", residual)
    return P
