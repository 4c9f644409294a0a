"""Closed-loop multi-agent network under the diffusive protocol ``u = (L kron K) x``.

The network cost splits over the nonzero Laplacian eigenvalues: mode ``i``
is the n-dimensional system

    Abar_i = A + lambda_i B K
    Cbar_i = sqrt(lambda_i) C + lambda_i sqrt(lambda_i) D K
    Ebar_i = E

and the global cost is the sum of the modal costs. Everything here is
computed two ways so the decomposition can be checked: modally, and on
the full ``nN``-dimensional realization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    Disconnected,
    GammaInfeasible,
    InvalidInput,
    InvalidSpectrum,
    NotSynchronizing,
)
from .graph import ZERO_EIG_TOL, LaplacianSpectrum, WeightedGraph, incidence, is_connected, laplacian, spectrum
from .h2core import (
    CostCertificate,
    PerformanceTriple,
    certify_cost,
    check_standard_form,
    adaptive_impulse_energy,
    gramian_tail_bound,
    state_energy_gramian,
    exact_cost,
    impulse_energy_simpson,
)
from .matkernel import as_matrix, is_hurwitz, max_abs, solve_lyapunov, sym_eig

__all__ = [
    "AgentDynamics",
    "NetworkRealization",
    "ModalSystem",
    "CostReport",
    "build_closed_loop",
    "modal_system",
    "modal_costs",
    "global_cost",
    "reduced_cost",
    "full_quadrature_cost",
    "check_synchronization",
    "slowest_modal_rate",
    "certify_network",
    "agent_from_dict",
    "load_agent",
]


@dataclass(frozen=True)
class AgentDynamics:
    """Agent model ``x' = A x + B u + E d``, ``z = C x + D u``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        mats = {k: as_matrix(getattr(self, k), k) for k in "ABCDE"}
        A, B, C, D, E = (mats[k] for k in "ABCDE")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise DimensionMismatch(f"C has {C.shape[1]} columns, expected {n}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch(f"D must be {C.shape[0]}x{B.shape[1]}, got {D.shape}")
        if E.shape[0] != n:
            raise DimensionMismatch(f"E has {E.shape[0]} rows, expected {n}")
        for k, v in mats.items():
            object.__setattr__(self, k, v)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def q(self) -> int:
        return self.E.shape[1]

    def check_standard_form(self) -> None:
        check_standard_form(self.C, self.D)

    def check_gain(self, K) -> np.ndarray:
        K = as_matrix(K, "K")
        if K.shape != (self.m, self.n):
            raise DimensionMismatch(f"K must be {self.m}x{self.n}, got {K.shape}")
        return K


@dataclass(frozen=True)
class NetworkRealization:
    Atilde: np.ndarray
    Ctilde: np.ndarray
    Etilde: np.ndarray
    agent: AgentDynamics
    graph: WeightedGraph
    K: np.ndarray

    @property
    def N(self) -> int:
        return self.graph.node_count

    def spectrum(self) -> LaplacianSpectrum:
        return spectrum(laplacian(self.graph))

    def disagreement_projector(self) -> np.ndarray:
        """``(I - 11^T / N) kron I_n``; commutes with Atilde, kernel is the consensus subspace."""
        N = self.N
        return np.kron(np.eye(N) - np.full((N, N), 1.0 / N), np.eye(self.agent.n))


@dataclass(frozen=True)
class ModalSystem:
    lambda_i: float
    Abar: np.ndarray
    Cbar: np.ndarray
    Ebar: np.ndarray

    def triple(self) -> PerformanceTriple:
        return PerformanceTriple(self.Abar, self.Cbar, self.Ebar)


@dataclass
class CostReport:
    J_global: float
    J_modal: list[float]
    decomposition_gap: float
    certified: bool
    per_mode_certificates: list[CostCertificate]
    gamma: float
    trace_sum: float = math.nan
    eps: float = 0.0
    eigenvalues: list[float] = field(default_factory=list)


def build_closed_loop(agent: AgentDynamics, g: WeightedGraph, K) -> NetworkRealization:
    """Kronecker assembly of the controlled network.

    ``Atilde = I kron A + L kron B K``, ``Etilde = I kron E`` and
    ``Ctilde = W^{1/2} R^T kron C + W^{1/2} R^T L kron D K``.
    """
    K = agent.check_gain(K)
    if not is_connected(g):
        raise Disconnected("communication graph is not connected")
    L = laplacian(g)
    inc = incidence(g)
    S = inc.sqrt_weights() @ inc.R.T
    N = g.node_count
    BK = agent.B @ K
    DK = agent.D @ K
    Atilde = np.kron(np.eye(N), agent.A) + np.kron(L, BK)
    Ctilde = np.kron(S, agent.C) + np.kron(S @ L, DK)
    Etilde = np.kron(np.eye(N), agent.E)
    return NetworkRealization(Atilde, Ctilde, Etilde, agent, g, K)


def nonzero_modes(spec) -> np.ndarray:
    """Eigenvalues ``lambda_2..lambda_N`` in the order given.

    ``spec`` is a :class:`LaplacianSpectrum` or a plain sequence. A plain
    sequence may be the full spectrum, in which case its single zero
    eigenvalue is dropped, or just the nonzero eigenvalues.
    """
    if isinstance(spec, LaplacianSpectrum):
        lam = spec.nonzero
    else:
        lam = np.atleast_1d(np.asarray(spec, dtype=float)).reshape(-1)
        if lam.size and np.all(np.isfinite(lam)):
            k = int(np.argmin(np.abs(lam)))
            if abs(lam[k]) <= ZERO_EIG_TOL * max(1.0, float(np.max(np.abs(lam)))):
                lam = np.delete(lam, k)
    if lam.size == 0:
        raise InvalidSpectrum("network needs at least two agents")
    if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
        raise InvalidSpectrum("mode eigenvalues must be positive (is the graph connected?)")
    return lam


def modal_system(agent: AgentDynamics, lam: float, K) -> ModalSystem:
    K = agent.check_gain(K)
    r = math.sqrt(lam)
    return ModalSystem(
        lambda_i=float(lam),
        Abar=agent.A + lam * agent.B @ K,
        Cbar=r * agent.C + lam * r * agent.D @ K,
        Ebar=agent.E,
    )


def check_synchronization(agent: AgentDynamics, spec, K) -> tuple[bool, list[bool]]:
    """Whether every mode ``A + lambda_i B K`` (i = 2..N) is Hurwitz."""
    K = agent.check_gain(K)
    stable = [is_hurwitz(agent.A + lam * agent.B @ K) for lam in nonzero_modes(spec)]
    return all(stable), stable


def require_synchronization(agent, lams, K) -> None:
    for i, lam in enumerate(lams, start=2):
        if not is_hurwitz(agent.A + lam * agent.B @ K):
            raise NotSynchronizing(i, float(lam))


def modal_costs(agent: AgentDynamics, spec, K) -> list[float]:
    """Costs ``J_i`` of modes 2..N in the order the eigenvalues are given."""
    K = agent.check_gain(K)
    lams = nonzero_modes(spec)
    require_synchronization(agent, lams, K)
    return [exact_cost(modal_system(agent, lam, K).triple()) for lam in lams]


def global_cost(net: NetworkRealization) -> float:
    """Network H2 cost from the disturbance to the disagreement output, summed over modes."""
    return float(sum(modal_costs(net.agent, net.spectrum(), net.K)))


def _disagreement_basis(N: int) -> np.ndarray:
    """Orthonormal basis of the complement of the all-ones vector (N x N-1)."""
    M = np.column_stack([np.ones(N), np.eye(N)[:, : N - 1]])
    Q, _ = np.linalg.qr(M)
    return Q[:, 1:]


def reduced_cost(net: NetworkRealization) -> float:
    """Global cost from one Lyapunov solve on the disagreement-reduced network.

    Restricts ``(Atilde, Ctilde, Etilde)`` to the orthogonal complement of
    the consensus subspace, which is invariant and carries all of the
    output. Uses no Laplacian eigenvectors, so it checks the modal sum.
    """
    n = net.agent.n
    V = np.kron(_disagreement_basis(net.N), np.eye(n))
    Ar = V.T @ net.Atilde @ V
    if not is_hurwitz(Ar):
        require_synchronization(net.agent, nonzero_modes(net.spectrum()), net.K)
    return exact_cost(PerformanceTriple(Ar, net.Ctilde @ V, V.T @ net.Etilde))


def slowest_modal_rate(agent: AgentDynamics, spec, K) -> float:
    """Largest real part over the eigenvalues of all modes ``A + lambda_i B K``."""
    K = agent.check_gain(K)
    return float(max(np.max(np.linalg.eigvals(agent.A + lam * agent.B @ K).real) for lam in nonzero_modes(spec)))


def full_quadrature_cost(net: NetworkRealization, horizon: float | None = None, steps: int | None = None) -> float:
    """Simpson quadrature of ``||Ctilde exp(Atilde t) Etilde||_F^2`` on the full realization.

    Atilde keeps the consensus mode, so the propagated response is
    re-projected onto the disagreement subspace after every step; this is
    exact in exact arithmetic and stops round-off in an unstable consensus
    direction from leaking into the output. Without ``steps`` the step size
    is adaptive and integration stops once the state-energy tail bound of
    the disagreement dynamics is negligible.
    """
    require_synchronization(net.agent, nonzero_modes(net.spectrum()), net.K)
    if not np.any(net.Etilde) or not np.any(net.Ctilde):
        return 0.0
    V = np.kron(_disagreement_basis(net.N), np.eye(net.agent.n))
    Y = state_energy_gramian(V.T @ net.Atilde @ V)
    if horizon is None:
        horizon = 80.0 * float(sym_eig(Y)[0][-1])
    project = net.disagreement_projector()
    if steps is None:
        bound = gramian_tail_bound(net.Ctilde @ V, Y)
        return adaptive_impulse_energy(net.Atilde, net.Ctilde, net.Etilde, horizon, project=project,
                                       tail_bound=lambda X: bound(V.T @ X))
    return impulse_energy_simpson(net.Atilde, net.Ctilde, net.Etilde, horizon, steps, project=project)


def certify_network(agent: AgentDynamics, spec, K, gamma: float, *, graph: WeightedGraph | None = None,
                    eps: float | None = None) -> CostReport:
    """Certify synchronization and ``J(K) < gamma`` mode by mode.

    Each mode gets ``P_i`` from its Lyapunov equation with
    ``Q_i = Cbar_i^T Cbar_i + eps I``, which makes the Lyapunov inequality
    strict; the certificate holds when ``sum_i tr(E^T P_i E) < gamma``. The
    remaining slack is split evenly so every mode carries its own accepted
    :class:`CostCertificate`.

    With ``graph`` given, ``J_global`` comes from :func:`reduced_cost` and
    ``decomposition_gap`` compares it with the modal sum; otherwise
    ``J_global`` is the modal sum and the gap is 0.

    Raises
    ------
    NotStandardForm
    NotSynchronizing
    GammaInfeasible
        ``achieved`` is the certified sum of traces.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    agent.check_standard_form()
    K = agent.check_gain(K)
    lams = nonzero_modes(spec)
    require_synchronization(agent, lams, K)

    modes = [modal_system(agent, lam, K) for lam in lams]
    Qs = [md.Cbar.T @ md.Cbar for md in modes]
    if eps is None:
        eps = 1e-6 * max(1.0, max(max_abs(Q) for Q in Qs))
    eye = np.eye(agent.n)
    Ps = [solve_lyapunov(md.Abar, Q + eps * eye) for md, Q in zip(modes, Qs)]
    traces = [float(np.trace(agent.E.T @ P @ agent.E)) for P in Ps]
    trace_sum = float(sum(traces))
    if not trace_sum < gamma:
        raise GammaInfeasible(trace_sum, gamma)

    share = (gamma - trace_sum) / len(modes)
    certs = [certify_cost(md.triple(), P, tr + share) for md, P, tr in zip(modes, Ps, traces)]
    J_modal = [exact_cost(md.triple()) for md in modes]
    modal_sum = float(sum(J_modal))
    if graph is not None:
        J_global = reduced_cost(build_closed_loop(agent, graph, K))
        gap = abs(J_global - modal_sum)
    else:
        J_global, gap = modal_sum, 0.0
    return CostReport(
        J_global=J_global,
        J_modal=J_modal,
        decomposition_gap=gap,
        certified=True,
        per_mode_certificates=certs,
        gamma=float(gamma),
        trace_sum=trace_sum,
        eps=eps,
        eigenvalues=[float(x) for x in lams],
    )


def agent_from_dict(doc) -> AgentDynamics:
    """Agent from ``{"A": [[...]], "B": ..., "C": ..., "D": ..., "E": ...}`` row arrays."""
    if not isinstance(doc, dict):
        raise InvalidInput("agent document must be a JSON object")
    mats = {}
    for key in "ABCDE":
        if key not in doc:
            raise InvalidInput(f"agent: missing matrix '{key}'")
        rows = doc[key]
        if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
            raise InvalidInput(f"agent.{key}: expected a nonempty array of rows")
        width = len(rows[0])
        for r, row in enumerate(rows, start=1):
            if len(row) != width:
                raise InvalidInput(f"agent.{key}: row {r} has {len(row)} entries, expected {width}")
            for v in row:
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise InvalidInput(f"agent.{key}: row {r} has a non-numeric or non-finite entry")
        mats[key] = np.array(rows, dtype=float)
    return AgentDynamics(**mats)


def load_agent(path) -> AgentDynamics:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise InvalidInput(f"{path}: {exc.strerror}") from exc
    return agent_from_dict(doc)
