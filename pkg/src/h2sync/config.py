"""Problem configuration files.

One JSON document describes a problem instance::

    {
      "agent": "agent.json",            # path (relative to this file) or inline {A, B, C, D, E}
      "graph": {"nodes": 2, "edges": [[1, 2, 1.0]]},
      "gamma": 2.5,
      "method": "thm4",                 # or "thm5"
      "c": 0.1666,                      # optional coupling strength
      "simulation": {                   # optional, used by ``simulate``
        "T": 1.0, "dt": 0.001,
        "x0": [1.0, -1.0],              # optional, zeros by default
        "K": [[-0.5]],                  # optional gain; otherwise the design gain
        "disturbance": {"kind": "impulse", "channel": 1, "scale": 1.0}
      }
    }

Sampled disturbances use ``{"kind": "samples", "file": "d.csv"}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .design import Method
from .errors import InvalidInput
from .graph import WeightedGraph, graph_from_dict
from .network import AgentDynamics, agent_from_dict
from .sim import DisturbanceKind, DisturbanceSpec, load_samples

__all__ = ["SimulationConfig", "ProblemConfig", "load_config", "load_json", "load_gain"]


@dataclass(frozen=True)
class SimulationConfig:
    T: float
    dt: float
    x0: np.ndarray | None
    disturbance: DisturbanceSpec
    K: np.ndarray | None = None


@dataclass(frozen=True)
class ProblemConfig:
    graph: WeightedGraph
    agent: AgentDynamics | None = None
    gamma: float | None = None
    method: Method = Method.THM4
    c: float | None = None
    simulation: SimulationConfig | None = None
    source: Path | None = None

    def require_agent(self) -> AgentDynamics:
        if self.agent is None:
            raise InvalidInput("config: missing field 'agent'")
        return self.agent

    def require_gamma(self) -> float:
        if self.gamma is None:
            raise InvalidInput("config: missing field 'gamma'")
        return self.gamma


def load_json(path):
    """Parse a JSON file, turning decode errors into line/column diagnostics."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidInput(f"{path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _number(doc, key, where, required=True):
    if key not in doc or doc[key] is None:
        if required:
            raise InvalidInput(f"{where}: missing field '{key}'")
        return None
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise InvalidInput(f"{where}.{key}: expected a finite number")
    return float(v)


def _sub_document(value, base: Path, where: str):
    if isinstance(value, str):
        return load_json(base / value)
    if isinstance(value, dict):
        return value
    raise InvalidInput(f"config.{where}: expected a file path or an object")


def _matrix(value, where: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise InvalidInput(f"{where}: expected a nonempty array of rows")
    try:
        m = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"{where}: {exc}") from exc
    if m.ndim != 2 or not np.all(np.isfinite(m)):
        raise InvalidInput(f"{where}: rows must have equal length and finite entries")
    return m


def _disturbance(doc, base: Path) -> DisturbanceSpec:
    if doc is None:
        return DisturbanceSpec.zero()
    if not isinstance(doc, dict):
        raise InvalidInput("simulation.disturbance: expected an object")
    try:
        kind = DisturbanceKind(doc.get("kind", "zero"))
    except ValueError:
        raise InvalidInput(f"simulation.disturbance.kind: unknown kind {doc.get('kind')!r}") from None
    scale = _number(doc, "scale", "simulation.disturbance", required=False)
    scale = 1.0 if scale is None else scale
    if kind is DisturbanceKind.IMPULSE:
        ch = doc.get("channel")
        if isinstance(ch, bool) or not isinstance(ch, int):
            raise InvalidInput("simulation.disturbance.channel: expected an integer")
        return DisturbanceSpec(kind, channel=ch, scale=scale)
    if kind is DisturbanceKind.SAMPLES:
        f = doc.get("file")
        if not isinstance(f, str):
            raise InvalidInput("simulation.disturbance.file: expected a path")
        return DisturbanceSpec(kind, samples=load_samples(base / f), scale=scale)
    return DisturbanceSpec(kind, scale=scale)


def _simulation(doc, base: Path) -> SimulationConfig:
    if not isinstance(doc, dict):
        raise InvalidInput("config.simulation: expected an object")
    T = _number(doc, "T", "simulation")
    dt = _number(doc, "dt", "simulation")
    if not dt > 0:
        raise InvalidInput("simulation.dt: must be positive")
    if not T >= dt:
        raise InvalidInput("simulation.T: must be at least dt")
    x0 = None
    if doc.get("x0") is not None:
        x0 = np.array(doc["x0"], dtype=float) if isinstance(doc["x0"], list) else None
        if x0 is None or x0.ndim != 1 or not np.all(np.isfinite(x0)):
            raise InvalidInput("simulation.x0: expected a flat array of finite numbers")
    K = _matrix(doc["K"], "simulation.K") if doc.get("K") is not None else None
    return SimulationConfig(T=T, dt=dt, x0=x0, disturbance=_disturbance(doc.get("disturbance"), base), K=K)


def load_config(path) -> ProblemConfig:
    path = Path(path)
    doc = load_json(path)
    if not isinstance(doc, dict):
        raise InvalidInput(f"{path}: top level must be an object")
    base = path.parent
    if "graph" not in doc:
        raise InvalidInput("config: missing field 'graph'")
    graph = graph_from_dict(_sub_document(doc["graph"], base, "graph"))
    agent = agent_from_dict(_sub_document(doc["agent"], base, "agent")) if "agent" in doc else None

    gamma = _number(doc, "gamma", "config", required=False)
    if gamma is not None and not gamma > 0:
        raise InvalidInput("config.gamma: must be positive")
    try:
        method = Method(doc.get("method", "thm4"))
    except ValueError:
        raise InvalidInput(f"config.method: expected 'thm4' or 'thm5', got {doc.get('method')!r}") from None
    c = _number(doc, "c", "config", required=False)
    simulation = _simulation(doc["simulation"], base) if doc.get("simulation") is not None else None
    return ProblemConfig(graph=graph, agent=agent, gamma=gamma, method=method, c=c,
                         simulation=simulation, source=path)


def load_gain(path) -> np.ndarray:
    """Gain file: ``{"K": [[...]]}`` (a design report qualifies)."""
    doc = load_json(path)
    if not isinstance(doc, dict) or "K" not in doc:
        raise InvalidInput(f"{path}: missing field 'K'")
    return _matrix(doc["K"], f"{path}: K")
