"""Distributed suboptimal H2 control for homogeneous multi-agent networks.

Synthesizes diffusive static protocols ``u = (L kron K) x`` that make the
network synchronize with H2 cost below a given bound, certifies the result,
and cross-checks every certificate against independent numerical oracles.
"""

__version__ = "0.1.0"

from .design import CouplingRange, Method, ProtocolGain, coupling_range, design_protocol, sweep_feasibility
from .graph import (
    IncidenceForm,
    LaplacianSpectrum,
    WeightedGraph,
    incidence,
    is_connected,
    laplacian,
    spectrum,
)
from .h2core import (
    CostCertificate,
    PerformanceTriple,
    certify_cost,
    exact_cost,
    quadrature_cost,
    suboptimal_feedback_single,
)
from .network import (
    AgentDynamics,
    CostReport,
    ModalSystem,
    NetworkRealization,
    build_closed_loop,
    certify_network,
    check_synchronization,
    global_cost,
    modal_costs,
)
from .sim import DisturbanceSpec, Trajectory, impulse_energy, simulate, sync_metrics

__all__ = [
    "AgentDynamics",
    "CostCertificate",
    "CostReport",
    "CouplingRange",
    "DisturbanceSpec",
    "IncidenceForm",
    "LaplacianSpectrum",
    "Method",
    "ModalSystem",
    "NetworkRealization",
    "PerformanceTriple",
    "ProtocolGain",
    "Trajectory",
    "WeightedGraph",
    "build_closed_loop",
    "certify_cost",
    "certify_network",
    "check_synchronization",
    "coupling_range",
    "design_protocol",
    "exact_cost",
    "global_cost",
    "impulse_energy",
    "incidence",
    "is_connected",
    "laplacian",
    "modal_costs",
    "quadrature_cost",
    "simulate",
    "spectrum",
    "suboptimal_feedback_single",
    "sweep_feasibility",
    "sync_metrics",
]
