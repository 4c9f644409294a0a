"""Exception types raised across the package.

Every failure a caller might want to branch on has its own class; they all
derive from :class:`H2SyncError` so a CLI or script can catch the family.
"""

from __future__ import annotations


class H2SyncError(Exception):
    """Base class for all package errors."""


# input layer

class InvalidInput(H2SyncError, ValueError):
    """A problem file or document is malformed."""


class InvalidGraph(InvalidInput):
    """Graph data violates a structural invariant (self-loop, bad weight...)."""


class Disconnected(H2SyncError):
    """The communication graph is not connected."""


class DimensionMismatch(H2SyncError, ValueError):
    """Matrix shapes do not fit together."""


# matrix kernels

class NonSymmetric(H2SyncError, ValueError):
    """A matrix required to be symmetric is not, within tolerance."""


class NoConvergence(H2SyncError):
    """An iterative solver hit its iteration cap."""


class SingularLyapunov(H2SyncError):
    """The vectorized Lyapunov system is numerically singular."""


class NotStabilizable(H2SyncError):
    """No stabilizing initial gain could be constructed."""


# analysis and certification

class NotStable(H2SyncError):
    """A state matrix that must be Hurwitz is not."""


class NotStandardForm(H2SyncError, ValueError):
    """Output matrices violate D^T C = 0 or D^T D = I."""


class CertificateRejected(H2SyncError):
    """A candidate certificate fails one of its strict inequalities."""

    def __init__(self, message: str, value: float):
        super().__init__(message)
        self.value = value


class RejectedLyapunov(CertificateRejected):
    """The Lyapunov inequality is not strictly negative definite."""


class RejectedTrace(CertificateRejected):
    """The trace bound is not strictly below gamma."""


class GammaInfeasible(H2SyncError):
    """The certified cost bound is not below the requested gamma.

    ``achieved`` is the smallest gamma the computed certificate supports, so
    callers can retry with any larger value. ``gain`` optionally carries the
    design that produced it.
    """

    def __init__(self, achieved: float, gamma: float, gain=None):
        super().__init__(
            f"certified bound {achieved:.12g} is not below gamma={gamma:.12g}"
        )
        self.achieved = achieved
        self.gamma = gamma
        self.gain = gain


class NotSynchronizing(H2SyncError):
    """Some modal closed loop A + lambda_i B K is not Hurwitz."""

    def __init__(self, mode: int, eigenvalue: float):
        super().__init__(
            f"mode {mode} (laplacian eigenvalue {eigenvalue:.12g}) is not stable"
        )
        self.mode = mode
        self.eigenvalue = eigenvalue


# design layer

class InvalidSpectrum(H2SyncError, ValueError):
    """Laplacian eigenvalues unusable for design (lambda_2 <= 0, N < 2)."""


class COutOfRange(H2SyncError, ValueError):
    """The coupling strength lies outside the admissible interval."""


class RiccatiFailure(H2SyncError):
    """The design Riccati equation could not be solved."""


# simulation

class DegenerateTrajectory(H2SyncError):
    """Disagreement is numerically zero throughout; no decay rate exists."""
