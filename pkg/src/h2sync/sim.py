"""Time-domain simulation of the controlled network.

Stepping is exact for LTI dynamics: ``x_{k+1} = exp(Atilde dt) x_k`` plus a
zero-order-hold term for sampled disturbances. Impulses enter as an
initial-state jump ``x0 += scale * Etilde e_channel``.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateTrajectory, DimensionMismatch, InvalidInput
from .h2core import simpson_weights
from .matkernel import expm
from .network import NetworkRealization, nonzero_modes, require_synchronization

__all__ = [
    "DisturbanceKind",
    "DisturbanceSpec",
    "Trajectory",
    "simulate",
    "sync_metrics",
    "impulse_energy",
    "trajectory_csv",
    "write_trajectory_csv",
    "load_samples",
]

# disagreement below this fraction of the state scale is round-off
DEGENERATE_TOL = 1e-10


class DisturbanceKind(str, enum.Enum):
    ZERO = "zero"
    IMPULSE = "impulse"
    SAMPLES = "samples"


@dataclass(frozen=True)
class DisturbanceSpec:
    """Disturbance applied during a simulation.

    ``channel`` is 1-based over the ``qN`` stacked disturbance inputs.
    ``samples`` is a ``(k, qN)`` array; row ``j`` is held on
    ``[j dt, (j + 1) dt)`` and the input is zero after the last row.
    """

    kind: DisturbanceKind = DisturbanceKind.ZERO
    channel: int | None = None
    samples: np.ndarray | None = None
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DisturbanceKind(self.kind))
        if self.kind is DisturbanceKind.IMPULSE and self.channel is None:
            raise InvalidInput("impulse disturbance needs a channel")
        if self.kind is DisturbanceKind.SAMPLES:
            if self.samples is None:
                raise InvalidInput("sampled disturbance needs samples")
            s = np.atleast_2d(np.asarray(self.samples, dtype=float))
            if not np.all(np.isfinite(s)):
                raise InvalidInput("disturbance samples must be finite")
            object.__setattr__(self, "samples", s)
        if not math.isfinite(self.scale):
            raise InvalidInput("disturbance scale must be finite")

    @classmethod
    def zero(cls) -> "DisturbanceSpec":
        return cls(DisturbanceKind.ZERO)

    @classmethod
    def impulse(cls, channel: int, scale: float = 1.0) -> "DisturbanceSpec":
        return cls(DisturbanceKind.IMPULSE, channel=channel, scale=scale)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    zeta: np.ndarray
    disagreement: np.ndarray
    n: int
    N: int


def _disagreement(states: np.ndarray, N: int, n: int) -> np.ndarray:
    """``max_{i,j} ||x_i - x_j||_inf`` per sample (all pairs, not only edges)."""
    x = states.reshape(states.shape[0], N, n)
    spread = x.max(axis=1) - x.min(axis=1)
    return spread.max(axis=1)


def _steps(T: float, dt: float) -> int:
    if not dt > 0:
        raise InvalidInput("dt must be positive")
    if not T >= dt:
        raise InvalidInput("T must be at least dt")
    return int(round(T / dt))


def _channel_vector(net: NetworkRealization, channel: int) -> np.ndarray:
    width = net.Etilde.shape[1]
    if not 1 <= channel <= width:
        raise InvalidInput(f"disturbance channel {channel} outside 1..{width}")
    return net.Etilde[:, channel - 1]


def simulate(net: NetworkRealization, x0, dist: DisturbanceSpec | None, T: float, dt: float) -> Trajectory:
    """Simulate the network from ``x0`` on the uniform grid ``0, dt, ..., round(T/dt) dt``."""
    dim = net.Atilde.shape[0]
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    if x.size != dim:
        raise DimensionMismatch(f"x0 has {x.size} entries, expected {dim}")
    dist = dist or DisturbanceSpec.zero()
    steps = _steps(T, dt)

    if dist.kind is DisturbanceKind.IMPULSE:
        x += dist.scale * _channel_vector(net, dist.channel)

    gamma_zoh = None
    samples = None
    if dist.kind is DisturbanceKind.SAMPLES:
        samples = dist.scale * dist.samples
        if samples.shape[1] != net.Etilde.shape[1]:
            raise DimensionMismatch(
                f"disturbance samples have {samples.shape[1]} columns, expected {net.Etilde.shape[1]}"
            )
        # exp([[A, E], [0, 0]] dt) = [[Phi, int_0^dt exp(A s) ds E], [0, I]]
        w = samples.shape[1]
        aug = np.zeros((dim + w, dim + w))
        aug[:dim, :dim] = net.Atilde
        aug[:dim, dim:] = net.Etilde
        big = expm(aug, dt)
        Phi = big[:dim, :dim]
        gamma_zoh = big[:dim, dim:]
    else:
        Phi = expm(net.Atilde, dt)

    states = np.empty((steps + 1, dim))
    states[0] = x
    for k in range(steps):
        x = Phi @ x
        if samples is not None and k < samples.shape[0]:
            x = x + gamma_zoh @ samples[k]
        states[k + 1] = x

    zeta = states @ net.Ctilde.T
    return Trajectory(
        times=np.arange(steps + 1) * dt,
        states=states,
        zeta=zeta,
        disagreement=_disagreement(states, net.N, net.agent.n),
        n=net.agent.n,
        N=net.N,
    )


def sync_metrics(traj: Trajectory) -> tuple[float, float]:
    """Final disagreement and the fitted exponential rate of its decay.

    The rate is the least-squares slope of ``log(disagreement)`` over the
    final half of the horizon: negative for synchronizing networks,
    positive when the disagreement grows. Samples below the round-off
    floor ``DEGENERATE_TOL * max(1, max|x|)`` are left out of the fit.
    """
    d = traj.disagreement
    if d.size < 10:
        raise ValueError("sync_metrics needs at least 10 samples")
    floor = DEGENERATE_TOL * max(1.0, float(np.max(np.abs(traj.states))))
    if np.all(d <= floor):
        raise DegenerateTrajectory("disagreement is numerically zero throughout")
    half = d.size // 2
    t, y = traj.times[half:], d[half:]
    keep = y > floor
    if keep.sum() < 2:
        raise DegenerateTrajectory("disagreement vanishes over the fitting window")
    slope, _ = np.polyfit(t[keep], np.log(y[keep]), 1)
    return float(d[-1]), float(slope)


def impulse_energy(net: NetworkRealization, channel: int, T: float, dt: float) -> float:
    """Simpson quadrature of ``||zeta(t)||^2`` after a unit impulse in ``channel`` (1-based).

    Summed over all channels this reproduces the network H2 cost. The
    impulse is started from its disagreement component, which carries all
    of ``zeta``, and that subspace is re-imposed every step so that round-off
    in an unstable consensus direction cannot leak into the output.
    """
    require_synchronization(net.agent, nonzero_modes(net.spectrum()), net.K)
    v = _channel_vector(net, channel)
    steps = _steps(T, dt)
    steps += steps % 2
    proj = net.disagreement_projector()
    Phi = expm(net.Atilde, dt)
    x = proj @ v
    energy = np.empty(steps + 1)
    for k in range(steps + 1):
        z = net.Ctilde @ x
        energy[k] = float(z @ z)
        x = proj @ (Phi @ x)
    return float(simpson_weights(steps, dt) @ energy)


def _header(traj: Trajectory, zeta_width: int) -> list[str]:
    cols = ["t"]
    cols += [f"x_{i}_{j}" for i in range(1, traj.N + 1) for j in range(1, traj.n + 1)]
    cols += [f"zeta_{k}" for k in range(1, zeta_width + 1)]
    cols.append("disagreement")
    return cols


def trajectory_csv(traj: Trajectory) -> str:
    """CSV text with 17 significant digits, so values round-trip exactly."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_header(traj, traj.zeta.shape[1]))
    for k in range(traj.times.size):
        row = [traj.times[k], *traj.states[k], *traj.zeta[k], traj.disagreement[k]]
        writer.writerow([format(float(v), ".17g") for v in row])
    return buf.getvalue()


def write_trajectory_csv(traj: Trajectory, path) -> None:
    Path(path).write_text(trajectory_csv(traj))


def load_samples(path) -> np.ndarray:
    """Read a disturbance sample file: one row per step, comma-separated, ``#`` comments allowed."""
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError as exc:
        raise InvalidInput(f"{path}: {exc}") from exc
    if not np.all(np.isfinite(data)):
        raise InvalidInput(f"{path}: non-finite disturbance sample")
    return data
