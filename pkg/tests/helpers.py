"""Random instance generators and independent oracles shared by the tests."""

from __future__ import annotations

import math

import mpmath
import numpy as np

from h2sync.graph import WeightedGraph
from h2sync.network import AgentDynamics

# PASS/FAIL lines from the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LOG: list[str] = []


def random_graph(
    rng: np.random.Generator, N: int, connected: bool = True, extra: float = 0.4, dyadic: bool = False
) -> WeightedGraph:
    """Random weighted graph; a random spanning tree guarantees connectivity.

    With ``dyadic`` the weights are multiples of 1/64, so every degree sum is
    exact in binary floating point whatever the summation order.
    """
    edges = {}
    draw = (lambda: float(rng.integers(32, 129)) / 64.0) if dyadic else (lambda: float(rng.uniform(0.5, 2.0)))
    nodes = list(rng.permutation(N) + 1)
    if connected:
        for k in range(1, N):
            i, j = int(nodes[k]), int(nodes[rng.integers(0, k)])
            edges[(min(i, j), max(i, j))] = draw()
    for i in range(1, N + 1):
        for j in range(i + 1, N + 1):
            if (i, j) not in edges and rng.random() < extra:
                edges[(i, j)] = draw()
    items = list(edges.items())
    order = rng.permutation(len(items)) if items else []
    return WeightedGraph(N, tuple((i, j, w) for (i, j), w in (items[k] for k in order)))


def random_standard_agent(rng: np.random.Generator, n: int, spread: float = 0.6) -> AgentDynamics:
    """n states, m = q = 1, p = 2, in standard form (D^T C = 0, D^T D = 1)."""
    A = spread * rng.standard_normal((n, n))
    B = rng.standard_normal((n, 1))
    C = np.vstack([rng.standard_normal((1, n)), np.zeros((1, n))])
    D = np.array([[0.0], [1.0]])
    E = rng.standard_normal((n, 1))
    return AgentDynamics(A, B, C, D, E)


def random_hurwitz(rng: np.random.Generator, n: int) -> np.ndarray:
    M = rng.standard_normal((n, n))
    shift = np.max(np.linalg.eigvals(M).real) + rng.uniform(0.2, 1.5)
    return M - shift * np.eye(n)


def charpoly_roots(M) -> np.ndarray:
    """Eigenvalues as characteristic polynomial roots (brute force oracle)."""
    return np.sort(np.roots(np.poly(np.asarray(M, dtype=float))).real)


def expm_series(A, t: float, digits: int = 60) -> np.ndarray:
    """exp(A t) by Taylor series summation in extended precision."""
    with mpmath.workdps(digits):
        X = mpmath.matrix(np.asarray(A, dtype=float).tolist()) * mpmath.mpf(t)
        n = X.rows
        term = mpmath.eye(n)
        total = mpmath.eye(n)
        k = 0
        while True:
            k += 1
            term = term * X / k
            total += term
            if mpmath.mnorm(term, 1) < mpmath.mpf(10) ** (-digits + 5) and k > 5:
                break
        return np.array(total.tolist(), dtype=float)


def rk4_adaptive(A, x0, t_end: float, tol: float = 1e-13) -> np.ndarray:
    """Integrate x' = A x over [0, t_end] by RK4 with step-doubling error control."""
    A = np.asarray(A, dtype=float)
    x = np.asarray(x0, dtype=float).copy()

    def step(y, h):
        k1 = A @ y
        k2 = A @ (y + 0.5 * h * k1)
        k3 = A @ (y + 0.5 * h * k2)
        k4 = A @ (y + h * k3)
        return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    t, h = 0.0, 1e-3
    while t < t_end:
        h = min(h, t_end - t)
        full = step(x, h)
        half = step(step(x, h / 2), h / 2)
        err = np.max(np.abs(full - half)) / max(1.0, np.max(np.abs(half)))
        if err <= tol or h < 1e-9:
            x = half + (half - full) / 15.0
            t += h
            h *= min(2.0, 0.9 * (tol / max(err, 1e-300)) ** 0.2)
        else:
            h *= max(0.2, 0.9 * (tol / err) ** 0.2)
    return x


def closed_scalar_cost(a: float, ctc: float, e: float = 1.0) -> float:
    """H2 cost of x' = a x + e d, |z|^2 = ctc x^2, a < 0."""
    return ctc * e * e / (-2.0 * a)


SQRT2 = math.sqrt(2.0)
