"""Dense matrix kernels shared by the analysis and synthesis modules.

Sizes here are desk scale (n up to a few dozen), so the algorithms favour
auditability over asymptotic speed: cyclic Jacobi for symmetric
eigenproblems, Kronecker vectorization for Lyapunov equations,
Newton-Kleinman for Riccati equations and a Pade scaling-and-squaring
matrix exponential.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .errors import NoConvergence, NonSymmetric, NotStabilizable, SingularLyapunov

__all__ = [
    "as_matrix",
    "sym_eig",
    "solve_lyapunov",
    "solve_riccati",
    "riccati_residual",
    "is_hurwitz",
    "expm",
    "default_eps",
    "max_abs",
]

SYMMETRY_TOL = 1e-12
JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100
NEWTON_MAX_ITER = 100


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float array (scalars become 1x1)."""
    m = np.array(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(-1, 1)
    elif m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def default_eps(Q: np.ndarray) -> float:
    """Strictness shift used to turn strict inequalities into equalities."""
    return 1e-6 * max(1.0, max_abs(Q))


def _check_square(a: np.ndarray, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")


def sym_eig(S, tol: float = SYMMETRY_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, V)`` with ``w`` ascending and ``V`` orthogonal such that
    ``V @ diag(w) @ V.T == S``.

    Raises
    ------
    NonSymmetric
        If ``|S - S.T|`` exceeds ``tol * max(1, max|S|)`` anywhere.
    NoConvergence
        If the off-diagonal mass is still above threshold after
        ``JACOBI_MAX_SWEEPS`` sweeps.
    """
    S = as_matrix(S, "S")
    _check_square(S, "S")
    asym = max_abs(S - S.T)
    if asym > tol * max(1.0, max_abs(S)):
        raise NonSymmetric(f"matrix is not symmetric (max |S - S^T| = {asym:.3e})")

    n = S.shape[0]
    a = 0.5 * (S + S.T)
    v = np.eye(n)
    target = JACOBI_TOL * np.linalg.norm(a)

    def off_mass() -> float:
        off = a - np.diag(np.diag(a))
        return float(np.linalg.norm(off))

    sweeps = 0
    while off_mass() > target:
        if sweeps == JACOBI_MAX_SWEEPS:
            raise NoConvergence(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                h = a[q, q] - a[p, p]
                if abs(h) + 100.0 * abs(apq) == abs(h):
                    # rotation angle below resolution; avoids overflow in theta
                    t = apq / h
                else:
                    theta = h / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                # a <- J^T a J with J the (p, q) plane rotation
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def solve_lyapunov(Abar, Q) -> np.ndarray:
    """Solve ``Abar^T Y + Y Abar + Q = 0`` for symmetric ``Y``.

    The equation is vectorized into an ``n^2 x n^2`` linear system and solved
    by LU with partial pivoting.

    Raises
    ------
    SingularLyapunov
        If the vectorized operator is numerically singular, which happens
        when two eigenvalues of ``Abar`` sum to (nearly) zero.
    """
    A = as_matrix(Abar, "Abar")
    Q = as_matrix(Q, "Q")
    _check_square(A, "Abar")
    n = A.shape[0]
    if Q.shape != (n, n):
        raise ValueError(f"Q must be {n}x{n}, got {Q.shape}")

    eye = np.eye(n)
    # column-major vec: vec(A^T Y) = (I kron A^T) vec Y, vec(Y A) = (A^T kron I) vec Y
    op = np.kron(eye, A.T) + np.kron(A.T, eye)
    with warnings.catch_warnings():
        # exact singularity is reported through the pivot check below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(op, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= op.shape[0] * np.finfo(float).eps * max(pivots.max(), 1e-300):
        raise SingularLyapunov("Lyapunov operator is singular (eigenvalue pair sums to ~0)")
    y = lu_solve((lu, piv), -Q.reshape(-1, order="F"), check_finite=False)
    Y = y.reshape(n, n, order="F")
    Y = 0.5 * (Y + Y.T)
    if not np.all(np.isfinite(Y)):
        raise SingularLyapunov("Lyapunov solution is not finite")

    resid = A.T @ Y + Y @ A + Q
    if max_abs(resid) > 1e-12 * max(1.0, max_abs(Q)):
        # one step of iterative refinement on the same factorization
        dy = lu_solve((lu, piv), -resid.reshape(-1, order="F"), check_finite=False)
        Y = Y + 0.5 * (dy.reshape(n, n, order="F") + dy.reshape(n, n, order="F").T)
        resid = A.T @ Y + Y @ A + Q

    err = max_abs(resid)
    # roundoff in forming A^T Y + Y A scales with |A| |Y| on badly scaled inputs
    if err > 1e-9 * max(1.0, max_abs(Q), max_abs(A) * max_abs(Y)):
        raise SingularLyapunov(f"Lyapunov system ill-conditioned (residual {err:.3e})")
    return Y


def is_hurwitz(A) -> bool:
    """True iff every eigenvalue of ``A`` has negative real part.

    Decided through the Lyapunov characterization: ``A^T Y + Y A + I = 0``
    has a positive definite solution exactly when ``A`` is Hurwitz.
    """
    A = as_matrix(A, "A")
    _check_square(A, "A")
    try:
        Y = solve_lyapunov(A, np.eye(A.shape[0]))
        w, _ = sym_eig(Y)
    except (SingularLyapunov, NonSymmetric, NoConvergence):
        return False
    scale = float(np.max(np.abs(w)))
    return bool(w[0] > 1e-10 * scale)


def riccati_residual(A, Bt, Q, P, eps: float = 0.0) -> np.ndarray:
    """``A^T P + P A - P Bt Bt^T P + Q + eps I``."""
    PB = P @ Bt
    R = A.T @ P + P @ A - PB @ PB.T + Q + eps * np.eye(A.shape[0])
    return 0.5 * (R + R.T)


def _bass_gain(A: np.ndarray, Bt: np.ndarray) -> np.ndarray:
    """Stabilizing gain ``G`` (closed loop ``A - Bt G``) by the shifted Lyapunov trick."""
    n = A.shape[0]
    beta = float(np.max(np.sum(np.abs(A), axis=1))) + 1.0
    F = A + beta * np.eye(n)
    # F Z + Z F^T = 2 Bt Bt^T, written in solve_lyapunov's form with Abar = F^T
    try:
        Z = solve_lyapunov(F.T, -2.0 * Bt @ Bt.T)
        w, _ = sym_eig(Z)
    except (SingularLyapunov, NonSymmetric, NoConvergence) as exc:
        raise NotStabilizable(f"shifted Lyapunov construction failed: {exc}") from exc
    if w[0] <= 1e-12 * max(abs(w[-1]), 1e-300):
        raise NotStabilizable("(A, B) is not controllable; shifted Lyapunov Gramian is singular")
    G = np.linalg.solve(Z, Bt).T
    if not is_hurwitz(A - Bt @ G):
        raise NotStabilizable("shifted Lyapunov gain does not stabilize A")
    return G


def solve_riccati(A, Bt, Q, eps: float | None = None) -> np.ndarray:
    """Stabilizing solution of ``A^T P + P A - P Bt Bt^T P + Q + eps I = 0``.

    With ``eps > 0`` the returned ``P`` satisfies the strict Riccati
    inequality ``A^T P + P A - P Bt Bt^T P + Q < 0`` with margin ``eps``.
    ``eps=None`` uses :func:`default_eps`.

    Newton-Kleinman iteration: each step solves one Lyapunov equation for
    the current closed loop. The first gain is zero when ``A`` is already
    Hurwitz, otherwise it comes from :func:`_bass_gain`.

    Raises
    ------
    NotStabilizable
        No stabilizing initial gain could be found.
    NoConvergence
        The iteration did not reach the residual tolerance, or the result
        is not stabilizing (typically a detectability failure).
    """
    A = as_matrix(A, "A")
    Bt = as_matrix(Bt, "Bt")
    Q = as_matrix(Q, "Q")
    _check_square(A, "A")
    n = A.shape[0]
    if Bt.shape[0] != n or Q.shape != (n, n):
        raise ValueError("inconsistent Riccati dimensions")
    if eps is None:
        eps = default_eps(Q)
    if eps < 0:
        raise ValueError("eps must be nonnegative")

    Qe = 0.5 * (Q + Q.T) + eps * np.eye(n)
    base = max(1.0, max_abs(Qe))

    G = np.zeros((Bt.shape[1], n)) if is_hurwitz(A) else _bass_gain(A, Bt)

    # residuals are measured against the size of the individual terms, so a
    # large P from a weakly controllable pair is judged by its backward error
    best_P, best_res, loose = None, math.inf, 1e-9 * base
    for _ in range(NEWTON_MAX_ITER):
        try:
            P = solve_lyapunov(A - Bt @ G, Qe + G.T @ G)
        except SingularLyapunov as exc:
            raise NoConvergence(f"Newton step lost stability: {exc}") from exc
        res = max_abs(riccati_residual(A, Bt, Qe, P))
        G = Bt.T @ P
        terms = max(base, max_abs(A.T @ P), max_abs(G.T @ G))
        tight = 1e-12 * terms
        if res < best_res:
            best_P, best_res, loose = P, res, 1e-9 * terms
        elif best_res <= loose:
            # roundoff floor reached
            break
        if res <= tight:
            break
    else:
        if best_res > loose:
            raise NoConvergence(
                f"Newton-Kleinman stalled at residual {best_res:.3e} after {NEWTON_MAX_ITER} steps"
            )

    if best_res > loose:
        raise NoConvergence(f"Newton-Kleinman residual {best_res:.3e} above tolerance")
    if not is_hurwitz(A - Bt @ Bt.T @ best_P):
        raise NoConvergence("Riccati solution is not stabilizing")
    return best_P


def _pade_coefficients(q: int) -> list[float]:
    f = math.factorial
    return [f(2 * q - k) * f(q) / (f(2 * q) * f(k) * f(q - k)) for k in range(q + 1)]


_PADE6 = _pade_coefficients(6)


def expm(A, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``exp(A t)``.

    Scaling and squaring around a diagonal (6, 6) Pade approximant; the
    scaled argument is kept below 0.5 in infinity norm, where the Pade
    truncation error is below unit roundoff.
    """
    X = as_matrix(A, "A") * float(t)
    _check_square(X, "A")
    n = X.shape[0]
    norm = float(np.max(np.sum(np.abs(X), axis=1))) if n else 0.0
    s = 0 if norm <= 0.5 else int(math.ceil(math.log2(norm / 0.5)))
    X = X / (2.0 ** s)

    eye = np.eye(n)
    num = _PADE6[0] * eye
    den = _PADE6[0] * eye
    power = eye
    for k in range(1, 7):
        power = power @ X
        term = _PADE6[k] * power
        num = num + term
        den = den + term if k % 2 == 0 else den - term
    R = np.linalg.solve(den, num)
    for _ in range(s):
        R = R @ R
    return R
