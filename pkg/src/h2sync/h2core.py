"""H2 performance of LTI systems and single-system suboptimal feedback.

A stable triple ``(Abar, Cbar, Ebar)`` has impulse response
``T(t) = Cbar exp(Abar t) Ebar`` and cost ``J = int_0^inf tr(T^T T) dt``.
``J`` is computed exactly from a Lyapunov equation, and independently by
Simpson quadrature of the impulse response energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    GammaInfeasible,
    NotStable,
    NotStandardForm,
    RejectedLyapunov,
    RejectedTrace,
    SingularLyapunov,
)
from .matkernel import (
    as_matrix,
    expm,
    is_hurwitz,
    max_abs,
    solve_lyapunov,
    solve_riccati,
    sym_eig,
)

__all__ = [
    "PerformanceTriple",
    "CostCertificate",
    "exact_cost",
    "cost_upper_bound",
    "quadrature_cost",
    "impulse_energy_simpson",
    "adaptive_impulse_energy",
    "state_energy_gramian",
    "gramian_tail_bound",
    "simpson_weights",
    "default_horizon",
    "default_steps",
    "certify_cost",
    "check_standard_form",
    "suboptimal_feedback_single",
]

STANDARD_FORM_TOL = 1e-12
MAX_STEP_NORM = 4.0


@dataclass(frozen=True)
class PerformanceTriple:
    Abar: np.ndarray
    Cbar: np.ndarray
    Ebar: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.Abar, "Abar")
        C = as_matrix(self.Cbar, "Cbar")
        E = as_matrix(self.Ebar, "Ebar")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"Abar must be square, got {A.shape}")
        if C.shape[1] != n:
            raise DimensionMismatch(f"Cbar has {C.shape[1]} columns, expected {n}")
        if E.shape[0] != n:
            raise DimensionMismatch(f"Ebar has {E.shape[0]} rows, expected {n}")
        object.__setattr__(self, "Abar", A)
        object.__setattr__(self, "Cbar", C)
        object.__setattr__(self, "Ebar", E)

    @property
    def order(self) -> int:
        return self.Abar.shape[0]


@dataclass(frozen=True)
class CostCertificate:
    """Evidence that a triple is stable with cost below ``gamma``.

    ``lyap_margin`` is the largest eigenvalue of
    ``Abar^T P + P Abar + Cbar^T Cbar`` and ``slack`` is
    ``gamma - tr(Ebar^T P Ebar)``.
    """

    P: np.ndarray
    gamma: float
    slack: float
    lyap_margin: float

    @property
    def trace(self) -> float:
        return self.gamma - self.slack


def _require_stable(sys: PerformanceTriple) -> None:
    if not is_hurwitz(sys.Abar):
        raise NotStable("Abar is not Hurwitz; the H2 cost is infinite")


def exact_cost(sys: PerformanceTriple) -> float:
    """``tr(Ebar^T Y Ebar)`` with ``Abar^T Y + Y Abar + Cbar^T Cbar = 0``."""
    _require_stable(sys)
    Y = solve_lyapunov(sys.Abar, sys.Cbar.T @ sys.Cbar)
    return max(0.0, float(np.trace(sys.Ebar.T @ Y @ sys.Ebar)))


def cost_upper_bound(sys: PerformanceTriple, eps: float) -> float:
    """``tr(Ebar^T P Ebar)`` for the Lyapunov solution with ``Q = Cbar^T Cbar + eps I``.

    Decreases to :func:`exact_cost` as ``eps`` goes to 0.
    """
    _require_stable(sys)
    n = sys.order
    P = solve_lyapunov(sys.Abar, sys.Cbar.T @ sys.Cbar + eps * np.eye(n))
    return float(np.trace(sys.Ebar.T @ P @ sys.Ebar))


def simpson_weights(steps: int, h: float) -> np.ndarray:
    """Composite Simpson weights on ``steps + 1`` nodes (``steps`` even)."""
    if steps < 2 or steps % 2:
        raise ValueError("Simpson needs a positive even number of panels")
    w = np.ones(steps + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def impulse_energy_simpson(Abar, Cbar, Ebar, horizon: float, steps: int, project=None) -> float:
    """Simpson quadrature of ``||Cbar exp(Abar t) Ebar||_F^2`` over ``[0, horizon]``.

    The response is advanced by the exact one-step propagator
    ``exp(Abar h)``. ``project``, if given, is applied to the propagated
    columns after every step; it must commute with ``Abar`` and leave the
    output unchanged, and serves to keep unobservable drift at zero.
    An odd ``steps`` is rounded up to the next even number.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    steps = int(steps)
    steps += steps % 2
    h = horizon / steps
    Phi = expm(Abar, h)
    X = np.array(Ebar, dtype=float)
    if project is not None:
        X = project @ X
    values = np.empty(steps + 1)
    for k in range(steps + 1):
        Z = Cbar @ X
        values[k] = float(np.sum(Z * Z))
        X = Phi @ X
        if project is not None:
            X = project @ X
    return float(simpson_weights(steps, h) @ values)


def adaptive_impulse_energy(Abar, Cbar, Ebar, horizon: float, rtol: float = 1e-10, project=None,
                            tail_bound=None, block: int = 32) -> float:
    """Simpson quadrature of ``||Cbar exp(Abar t) Ebar||_F^2`` with step-size control.

    The interval is covered by blocks of ``2 * block`` panels. Each block is
    integrated with step ``h`` and ``2h`` on the same samples; the block is
    accepted when the two differ by at most ``15 * rtol`` times the running
    total, and ``h`` doubles after blocks that are far inside tolerance.
    The first step satisfies ``h * ||Abar||_2 <= 0.05`` and no step exceeds
    ``MAX_STEP_NORM / ||Abar||_2``, which keeps ``exp(Abar h)`` well scaled
    even along a growing direction removed by ``project``. Responses are
    advanced with exact propagators ``exp(Abar h)``; ``project`` has the same
    meaning as in :func:`impulse_energy_simpson`.

    ``tail_bound(X)``, if given, must bound the energy still to come from the
    current response columns ``X``; integration stops before ``horizon``
    once that bound falls below ``rtol`` times the total.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    A = as_matrix(Abar, "Abar")
    C = as_matrix(Cbar, "Cbar")
    X = as_matrix(Ebar, "Ebar").copy()
    if project is not None:
        X = project @ X
    rho = float(np.linalg.norm(A, 2))
    h = 0.05 / rho if rho > 0 else horizon / (2 * block)
    panels = 2 * block
    propagators: dict[float, np.ndarray] = {}

    def energy(Y) -> float:
        Z = C @ Y
        return float(np.sum(Z * Z))

    t, total, f0 = 0.0, 0.0, energy(X)
    while horizon - t > 1e-12 * horizon:
        h = min(h, (horizon - t) / panels)
        Phi = propagators.get(h)
        if Phi is None:
            Phi = propagators[h] = expm(A, h)
        f = np.empty(panels + 1)
        f[0] = f0
        Y = X
        for k in range(1, panels + 1):
            Y = Phi @ Y
            if project is not None:
                Y = project @ Y
            f[k] = energy(Y)
        fine = float(simpson_weights(panels, h) @ f)
        coarse = float(simpson_weights(block, 2 * h) @ f[::2])
        err = abs(fine - coarse) / 15.0
        allowed = rtol * max(total + fine, 1e-300)
        if err > allowed and h * rho > 1e-6:
            h *= 0.5
            continue
        total += fine
        t += panels * h
        X, f0 = Y, f[-1]
        if tail_bound is not None and tail_bound(X) <= rtol * total:
            break
        if err < allowed / 64.0 and 2.0 * h * rho <= MAX_STEP_NORM:
            h *= 2.0
    return total


def state_energy_gramian(Abar) -> np.ndarray:
    """``Y`` with ``Abar^T Y + Y Abar + I = 0``, so ``int_t^inf ||x||^2 = x(t)^T Y x(t)``."""
    A = as_matrix(Abar, "Abar")
    try:
        Y = solve_lyapunov(A, np.eye(A.shape[0]))
    except SingularLyapunov as exc:
        raise NotStable(str(exc)) from exc
    if sym_eig(Y)[0][0] <= 0:
        raise NotStable("Abar is not Hurwitz")
    return Y


def gramian_tail_bound(Cbar, Y):
    """Bound ``X -> ||Cbar||_2^2 tr(X^T Y X)`` on the output energy still to come."""
    c2 = float(np.linalg.norm(as_matrix(Cbar, "Cbar"), 2)) ** 2
    return lambda X: c2 * float(np.sum(X * (Y @ X)))


def default_horizon(Abar) -> float:
    """``40 / r`` with decay-rate estimate ``r = 1 / (2 ||Y||)`` from :func:`state_energy_gramian`.

    For normal matrices ``r`` is exactly the slowest decay rate; otherwise
    it underestimates it, so the horizon errs long.
    """
    return 80.0 * float(sym_eig(state_energy_gramian(Abar))[0][-1])


def default_steps(Abar, horizon: float, minimum: int = 2000) -> int:
    """Panel count keeping ``h * ||Abar||_2 <= 0.05``."""
    rho = float(np.linalg.norm(as_matrix(Abar), 2))
    steps = max(minimum, int(math.ceil(horizon * rho / 0.05)))
    return steps + steps % 2


def quadrature_cost(sys: PerformanceTriple, horizon: float | None = None, steps: int | None = None) -> float:
    """Independent quadrature estimate of the H2 cost.

    The horizon defaults to :func:`default_horizon`. With ``steps`` given the
    rule is fixed-step Simpson, otherwise :func:`adaptive_impulse_energy`,
    stopped early by the state-energy tail bound. Only the ``Q = I``
    Lyapunov solution enters, as a bound; the value is pure quadrature.
    """
    _require_stable(sys)
    if not np.any(sys.Ebar) or not np.any(sys.Cbar):
        return 0.0
    if steps is None:
        Y = state_energy_gramian(sys.Abar)
        if horizon is None:
            horizon = 80.0 * float(sym_eig(Y)[0][-1])
        return adaptive_impulse_energy(sys.Abar, sys.Cbar, sys.Ebar, horizon,
                                       tail_bound=gramian_tail_bound(sys.Cbar, Y))
    if horizon is None:
        horizon = default_horizon(sys.Abar)
    return impulse_energy_simpson(sys.Abar, sys.Cbar, sys.Ebar, horizon, steps)


def certify_cost(sys: PerformanceTriple, P, gamma: float) -> CostCertificate:
    """Check ``P`` against the strict Lyapunov and trace inequalities.

    Acceptance proves ``Abar`` Hurwitz and ``exact_cost(sys) < gamma``.
    Strictness uses explicit margins: the Lyapunov form must have largest
    eigenvalue below ``-1e-12 * max|Cbar^T Cbar|`` and the slack must exceed
    ``1e-12 * gamma``.
    """
    P = as_matrix(P, "P")
    n = sys.order
    if P.shape != (n, n):
        raise DimensionMismatch(f"P must be {n}x{n}, got {P.shape}")
    if max_abs(P - P.T) > 1e-12 * max(1.0, max_abs(P)):
        raise ValueError("certificate matrix P must be symmetric")
    P = 0.5 * (P + P.T)
    wP, _ = sym_eig(P)
    if wP[0] < -1e-10:
        raise ValueError(f"certificate matrix P is not positive semidefinite (min eig {wP[0]:.3e})")

    CtC = sys.Cbar.T @ sys.Cbar
    form = sys.Abar.T @ P + P @ sys.Abar + CtC
    w, _ = sym_eig(0.5 * (form + form.T))
    margin = float(w[-1])
    if not margin < -1e-12 * max_abs(CtC):
        raise RejectedLyapunov(
            f"Lyapunov inequality not strict: largest eigenvalue {margin:.6g}", margin
        )
    trace = float(np.trace(sys.Ebar.T @ P @ sys.Ebar))
    slack = gamma - trace
    if not slack > 1e-12 * gamma:
        raise RejectedTrace(f"trace {trace:.12g} is not below gamma {gamma:.12g}", trace)
    return CostCertificate(P=P, gamma=float(gamma), slack=slack, lyap_margin=margin)


def check_standard_form(C, D, tol: float = STANDARD_FORM_TOL) -> None:
    """Raise :class:`NotStandardForm` unless ``D^T C = 0`` and ``D^T D = I``."""
    C = as_matrix(C, "C")
    D = as_matrix(D, "D")
    if C.shape[0] != D.shape[0]:
        raise DimensionMismatch("C and D must have the same number of rows")
    cross = max_abs(D.T @ C)
    if cross > tol:
        raise NotStandardForm(f"D^T C != 0 (max entry {cross:.3e})")
    gram = max_abs(D.T @ D - np.eye(D.shape[1]))
    if gram > tol:
        raise NotStandardForm(f"D^T D != I (max deviation {gram:.3e})")


def suboptimal_feedback_single(A, B, C, D, E, gamma: float, eps: float | None = None):
    """State feedback ``K = -B^T P`` with ``A + B K`` Hurwitz and ``J(K) < gamma``.

    ``P`` solves the Riccati equation with ``Q = C^T C`` shifted by ``eps``,
    so it satisfies the strict Riccati inequality. Returns ``(K, certificate)``
    where the certificate is checked on the closed loop
    ``(A + B K, C + D K, E)``.

    Raises
    ------
    NotStandardForm
    GammaInfeasible
        ``tr(E^T P E) >= gamma``; ``achieved`` holds that trace.
    """
    A, B, C, D, E = (as_matrix(M, name) for M, name in zip((A, B, C, D, E), "ABCDE"))
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    check_standard_form(C, D)
    P = solve_riccati(A, B, C.T @ C, eps)
    trace = float(np.trace(E.T @ P @ E))
    if not trace < gamma:
        raise GammaInfeasible(trace, gamma)
    K = -B.T @ P
    closed = PerformanceTriple(A + B @ K, C + D @ K, E)
    return K, certify_cost(closed, P, gamma)
