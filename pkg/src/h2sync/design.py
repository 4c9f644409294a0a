"""Distributed suboptimal protocol synthesis from a single Riccati equation.

Both recipes pick a coupling strength ``c``, solve one n-dimensional
Riccati inequality

    A^T P + P A + f(lambda*) P B B^T P + lambda_N C^T C < 0,
    f(lambda) = c^2 lambda^3 - 2 c lambda,

and set ``K = -c B^T P``. The "low" recipe takes ``c`` up to
``2 / (l2^2 + l2 lN + lN^2)`` and evaluates ``f`` at ``lambda_2``; the
"high" recipe takes ``c`` above that point and below ``2 / lN^2`` and
evaluates ``f`` at ``lambda_N``. In both cases ``f(lambda*)`` dominates
``f(lambda_i)`` for every mode, so ``P`` certifies each modal system and
``tr(E^T P E) < gamma / (N - 1)`` bounds the network cost by ``gamma``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    COutOfRange,
    GammaInfeasible,
    InvalidSpectrum,
    NoConvergence,
    NotStabilizable,
    RiccatiFailure,
)
from .matkernel import solve_riccati
from .network import AgentDynamics, nonzero_modes

__all__ = [
    "Method",
    "CouplingRange",
    "ProtocolGain",
    "coupling_range",
    "riccati_coefficient",
    "default_coupling",
    "design_protocol",
    "sweep_feasibility",
]


class Method(str, enum.Enum):
    THM4 = "thm4"
    THM5 = "thm5"


@dataclass(frozen=True)
class CouplingRange:
    """Interval of admissible coupling strengths; the lower end is always open."""

    lower: float
    upper: float
    upper_inclusive: bool

    def __contains__(self, c: float) -> bool:
        if not c > self.lower:
            return False
        return c <= self.upper if self.upper_inclusive else c < self.upper

    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True)
class ProtocolGain:
    K: np.ndarray
    c: float
    P: np.ndarray
    method: Method
    trace_value: float
    gamma: float
    lambda2: float
    lambdaN: float
    N: int

    @property
    def min_gamma(self) -> float:
        """Smallest gamma this design certifies: ``(N - 1) tr(E^T P E)``."""
        return (self.N - 1) * self.trace_value


def _eigs(spec) -> tuple[float, float, int]:
    lam = nonzero_modes(spec)
    return float(np.min(lam)), float(np.max(lam)), int(lam.size) + 1


def coupling_range(method, lambda2: float, lambdaN: float) -> CouplingRange:
    method = Method(method)
    if not lambda2 > 0 or lambdaN < lambda2:
        raise InvalidSpectrum(f"need 0 < lambda_2 <= lambda_N, got {lambda2}, {lambdaN}")
    split = 2.0 / (lambda2**2 + lambda2 * lambdaN + lambdaN**2)
    if method is Method.THM4:
        return CouplingRange(0.0, split, True)
    return CouplingRange(split, 2.0 / lambdaN**2, False)


def riccati_coefficient(c: float, lam: float) -> float:
    """``c^2 lam^3 - 2 c lam``, the quadratic-term coefficient for mode ``lam``."""
    return c * c * lam**3 - 2.0 * c * lam


def default_coupling(method, lambda2: float, lambdaN: float) -> float:
    """Upper endpoint for the low recipe, interval midpoint for the high one."""
    rng = coupling_range(method, lambda2, lambdaN)
    return rng.upper if Method(method) is Method.THM4 else rng.midpoint()


def _design_riccati(agent: AgentDynamics, method: Method, c: float, l2: float, lN: float,
                    eps: float | None) -> np.ndarray:
    lam = l2 if method is Method.THM4 else lN
    coef = riccati_coefficient(c, lam)
    if not coef < 0:
        raise COutOfRange(f"Riccati coefficient {coef} is not negative at c={c}")
    Bt = math.sqrt(-coef) * agent.B
    try:
        return solve_riccati(agent.A, Bt, lN * agent.C.T @ agent.C, eps)
    except (NotStabilizable, NoConvergence) as exc:
        raise RiccatiFailure(str(exc)) from exc


def design_protocol(agent: AgentDynamics, spec, gamma: float, method="thm4", c: float | None = None,
                    eps: float | None = None) -> ProtocolGain:
    """Synthesize ``K = -c B^T P`` guaranteeing synchronization and ``J(K) < gamma``.

    Parameters
    ----------
    agent : AgentDynamics
        Must be in standard form.
    spec : LaplacianSpectrum or sequence of float
        Laplacian eigenvalues of a connected graph, full or nonzero only.
    gamma : float
        Requested cost bound.
    method : {"thm4", "thm5"}
    c : float, optional
        Coupling strength; defaults to :func:`default_coupling`.
    eps : float, optional
        Riccati strictness shift, see :func:`h2sync.matkernel.solve_riccati`.

    Raises
    ------
    NotStandardForm, InvalidSpectrum, COutOfRange, RiccatiFailure
    GammaInfeasible
        ``achieved`` is ``(N - 1) tr(E^T P E)``; ``gain`` holds the design.
    """
    method = Method(method)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    agent.check_standard_form()
    l2, lN, N = _eigs(spec)
    rng = coupling_range(method, l2, lN)
    if c is None:
        c = default_coupling(method, l2, lN)
    c = float(c)
    if c not in rng:
        bracket = "]" if rng.upper_inclusive else ")"
        raise COutOfRange(f"c={c} outside ({rng.lower:.12g}, {rng.upper:.12g}{bracket}")

    P = _design_riccati(agent, method, c, l2, lN, eps)
    trace = float(np.trace(agent.E.T @ P @ agent.E))
    gain = ProtocolGain(
        K=-c * agent.B.T @ P, c=c, P=P, method=method, trace_value=trace, gamma=float(gamma),
        lambda2=l2, lambdaN=lN, N=N,
    )
    if not trace < gamma / (N - 1):
        raise GammaInfeasible(gain.min_gamma, gamma, gain=gain)
    return gain


def sweep_feasibility(agent: AgentDynamics, spec, gamma: float, method="thm4", grid_points: int = 11,
                      eps: float | None = None) -> list[tuple[float, float, bool]]:
    """Trace ``tr(E^T P E)`` on a uniform grid over the admissible ``c`` interval.

    The open lower end is excluded; the upper end is included only when the
    interval is closed there. Riccati failures give ``(c, nan, False)``.
    """
    method = Method(method)
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    agent.check_standard_form()
    l2, lN, N = _eigs(spec)
    rng = coupling_range(method, l2, lN)
    width = rng.upper - rng.lower
    if rng.upper_inclusive:
        cs = [rng.lower + width * k / grid_points for k in range(1, grid_points)] + [rng.upper]
    else:
        cs = [rng.lower + width * k / (grid_points + 1) for k in range(1, grid_points + 1)]

    rows = []
    for c in cs:
        try:
            P = _design_riccati(agent, method, c, l2, lN, eps)
        except (RiccatiFailure, COutOfRange):
            rows.append((c, math.nan, False))
            continue
        trace = float(np.trace(agent.E.T @ P @ agent.E))
        rows.append((c, trace, trace < gamma / (N - 1)))
    return rows
