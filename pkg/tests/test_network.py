import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from h2sync.design import design_protocol
from h2sync.errors import (
    DimensionMismatch,
    Disconnected,
    GammaInfeasible,
    InvalidInput,
    InvalidSpectrum,
    NotStandardForm,
    NotSynchronizing,
)
from h2sync.graph import WeightedGraph, incidence, laplacian, spectrum
from h2sync.h2core import quadrature_cost
from h2sync.network import (
    AgentDynamics,
    build_closed_loop,
    certify_network,
    check_synchronization,
    full_quadrature_cost,
    global_cost,
    load_agent,
    modal_costs,
    modal_system,
    nonzero_modes,
    reduced_cost,
    slowest_modal_rate,
)
from helpers import SQRT2, random_graph, random_standard_agent

seeds = st.integers(min_value=0, max_value=2**32 - 1)
K_WORKED = -1.0 / (2.0 * SQRT2)  # -c P with c = 1/6, P = 3/sqrt(2)


def designed_instance(seed, n_max=3, N_max=5):
    """Random standard-form agent, connected graph and a synchronizing designed gain."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, n_max + 1))
    N = int(rng.integers(2, N_max + 1))
    agent = random_standard_agent(rng, n)
    g = random_graph(rng, N)
    gain = design_protocol(agent, spectrum(laplacian(g)), np.inf)
    return agent, g, gain


class TestAgentDynamics:
    def test_dimensions(self, scalar_agent):
        assert (scalar_agent.n, scalar_agent.m, scalar_agent.p, scalar_agent.q) == (1, 1, 2, 1)

    def test_bad_d(self):
        with pytest.raises(DimensionMismatch):
            AgentDynamics([[0.0]], [[1.0]], [[1.0], [0.0]], [[0.0]], [[1.0]])

    def test_gain_shape(self, scalar_agent):
        with pytest.raises(DimensionMismatch):
            scalar_agent.check_gain(np.zeros((2, 1)))

    def test_load(self, tmp_path):
        path = tmp_path / "agent.json"
        path.write_text(json.dumps({"A": [[0]], "B": [[1]], "C": [[1], [0]], "D": [[0], [1]], "E": [[1]]}))
        agent = load_agent(path)
        assert agent.C.shape == (2, 1)

    def test_load_missing_field(self, tmp_path):
        path = tmp_path / "agent.json"
        path.write_text(json.dumps({"A": [[0]], "B": [[1]]}))
        with pytest.raises(InvalidInput, match="'C'"):
            load_agent(path)

    def test_load_ragged(self, tmp_path):
        path = tmp_path / "agent.json"
        path.write_text(json.dumps({"A": [[0, 1], [0]], "B": [[1]], "C": [[1]], "D": [[0]], "E": [[1]]}))
        with pytest.raises(InvalidInput, match="row 2"):
            load_agent(path)

    def test_load_malformed_json(self, tmp_path):
        path = tmp_path / "agent.json"
        path.write_text("{")
        with pytest.raises(InvalidInput, match="line 1"):
            load_agent(path)


class TestClosedLoop:
    def test_scalar_p2(self, scalar_agent, p2):
        net = build_closed_loop(scalar_agent, p2, [[-0.5]])
        np.testing.assert_array_equal(net.Atilde, [[-0.5, 0.5], [0.5, -0.5]])

    def test_zero_gain(self, rng, p3):
        agent = random_standard_agent(rng, 2)
        net = build_closed_loop(agent, p3, np.zeros((1, 2)))
        np.testing.assert_array_equal(net.Atilde, np.kron(np.eye(3), agent.A))

    def test_etilde(self, scalar_agent, p3):
        np.testing.assert_array_equal(build_closed_loop(scalar_agent, p3, [[-1.0]]).Etilde, np.eye(3))

    def test_ctilde_scalar_p2(self, scalar_agent, p2):
        # R^T = [-1, 1] and R^T L = [-2, 2]
        k = -0.5
        net = build_closed_loop(scalar_agent, p2, [[k]])
        np.testing.assert_allclose(net.Ctilde, [[-1.0, 1.0], [-2 * k, 2 * k]])

    def test_disconnected(self, scalar_agent):
        with pytest.raises(Disconnected):
            build_closed_loop(scalar_agent, WeightedGraph(3, ((1, 2, 1.0),)), [[-1.0]])

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds)
    def test_kronecker_blocks(self, seed):
        rng = np.random.default_rng(seed)
        n, N = int(rng.integers(1, 4)), int(rng.integers(2, 6))
        agent = random_standard_agent(rng, n)
        g = random_graph(rng, N)
        K = rng.standard_normal((1, n))
        net = build_closed_loop(agent, g, K)
        L = laplacian(g)
        inc = incidence(g)
        S = np.sqrt(inc.W) @ inc.R.T
        p = agent.p
        for _ in range(5):
            i, j = rng.integers(0, N, size=2)
            block = net.Atilde[i * n:(i + 1) * n, j * n:(j + 1) * n]
            np.testing.assert_allclose(block, (i == j) * agent.A + L[i, j] * agent.B @ K, atol=1e-14)
            e = int(rng.integers(0, g.edge_count))
            cblock = net.Ctilde[e * p:(e + 1) * p, j * n:(j + 1) * n]
            expected = S[e, j] * agent.C + (S @ L)[e, j] * agent.D @ K
            np.testing.assert_allclose(cblock, expected, atol=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds)
    def test_consensus_annihilated(self, seed):
        rng = np.random.default_rng(seed)
        n, N = int(rng.integers(1, 4)), int(rng.integers(2, 7))
        agent = random_standard_agent(rng, n)
        net = build_closed_loop(agent, random_graph(rng, N), rng.standard_normal((1, n)))
        v = rng.standard_normal(n)
        assert np.linalg.norm(net.Ctilde @ np.kron(np.ones(N), v)) <= 1e-12 * max(1.0, np.abs(net.Ctilde).max())


class TestModes:
    def test_nonzero_modes_forms(self, p3_spectrum):
        np.testing.assert_allclose(nonzero_modes(p3_spectrum), [1.0, 3.0], atol=1e-12)
        np.testing.assert_array_equal(nonzero_modes([1.0, 3.0]), [1.0, 3.0])
        np.testing.assert_array_equal(nonzero_modes([0.0, 1.0, 3.0]), [1.0, 3.0])

    @pytest.mark.parametrize("bad", [[], [0.0], [0.0, 0.0, 1.0], [-1.0, 2.0]])
    def test_invalid(self, bad):
        with pytest.raises(InvalidSpectrum):
            nonzero_modes(bad)

    def test_modal_matrices(self, scalar_agent):
        md = modal_system(scalar_agent, 4.0, [[-0.5]])
        np.testing.assert_allclose(md.Abar, [[-2.0]])
        np.testing.assert_allclose(md.Cbar, [[2.0], [-4.0]])

    def test_worked_cost(self, scalar_agent, p2, p2_spectrum):
        assert modal_costs(scalar_agent, p2_spectrum, [[K_WORKED]]) == pytest.approx([3.0 / SQRT2], abs=1e-12)
        net = build_closed_loop(scalar_agent, p2, [[K_WORKED]])
        assert global_cost(net) == pytest.approx(2.12132, abs=1e-5)
        assert full_quadrature_cost(net) == pytest.approx(3.0 / SQRT2, rel=1e-6)

    def test_p3_modal_costs(self, scalar_agent, p3, p3_spectrum):
        costs = modal_costs(scalar_agent, p3_spectrum, [[-1.0]])
        assert costs == pytest.approx([1.0, 5.0], abs=1e-12)
        for lam, J in zip((1.0, 3.0), costs):
            assert quadrature_cost(modal_system(scalar_agent, lam, [[-1.0]]).triple()) == pytest.approx(J, rel=1e-6)
        assert full_quadrature_cost(build_closed_loop(scalar_agent, p3, [[-1.0]])) == pytest.approx(6.0, rel=1e-6)

    def test_zero_disturbance(self, p3):
        agent = AgentDynamics([[0.0]], [[1.0]], [[1.0], [0.0]], [[0.0], [1.0]], [[0.0]])
        net = build_closed_loop(agent, p3, [[-1.0]])
        assert modal_costs(agent, net.spectrum(), net.K) == [0.0, 0.0]
        assert global_cost(net) == 0.0
        assert full_quadrature_cost(net) == 0.0

    def test_mode_order_irrelevant(self, rng):
        agent = random_standard_agent(rng, 2)
        K = design_protocol(agent, [0.7, 1.5, 2.5], np.inf).K
        forward = modal_costs(agent, [0.7, 1.5, 2.5], K)
        backward = modal_costs(agent, [2.5, 1.5, 0.7], K)
        assert backward == forward[::-1]
        assert sum(backward) == pytest.approx(sum(forward), rel=1e-15)


class TestSynchronization:
    def test_stable(self, scalar_agent):
        assert check_synchronization(scalar_agent, [2.0], [[-0.5]]) == (True, [True])

    def test_zero_gain(self, scalar_agent):
        assert check_synchronization(scalar_agent, [2.0], [[0.0]]) == (False, [False])

    def test_marginal_mode(self):
        agent = AgentDynamics([[1.0]], [[1.0]], [[1.0], [0.0]], [[0.0], [1.0]], [[1.0]])
        assert check_synchronization(agent, [1.0, 3.0], [[-1.0]]) == (False, [False, True])

    def test_modal_costs_require_sync(self, scalar_agent):
        with pytest.raises(NotSynchronizing) as info:
            modal_costs(scalar_agent, [2.0], [[0.5]])
        assert info.value.mode == 2

    def test_slowest_rate(self, scalar_agent, p3_spectrum):
        assert slowest_modal_rate(scalar_agent, p3_spectrum, [[-1.0]]) == pytest.approx(-1.0, abs=1e-12)


class TestCertifyNetwork:
    def test_worked_accept(self, scalar_agent, p2, p2_spectrum):
        rep = certify_network(scalar_agent, p2_spectrum, [[K_WORKED]], 2.5, graph=p2)
        assert rep.certified
        assert rep.trace_sum == pytest.approx(3.0 / SQRT2, abs=1e-4)
        assert rep.trace_sum < 2.5
        assert rep.J_global == pytest.approx(3.0 / SQRT2, abs=1e-10)
        assert rep.decomposition_gap <= 1e-8
        assert len(rep.per_mode_certificates) == 1

    def test_worked_infeasible(self, scalar_agent, p2_spectrum):
        with pytest.raises(GammaInfeasible) as info:
            certify_network(scalar_agent, p2_spectrum, [[K_WORKED]], 2.0)
        assert info.value.achieved == pytest.approx(2.12132, abs=1e-4)

    def test_unstable(self, scalar_agent, p2_spectrum):
        with pytest.raises(NotSynchronizing):
            certify_network(scalar_agent, p2_spectrum, [[0.5]], 10.0)

    def test_not_standard_form(self, p2_spectrum):
        agent = AgentDynamics([[0.0]], [[1.0]], [[1.0], [1.0]], [[0.0], [1.0]], [[1.0]])
        with pytest.raises(NotStandardForm):
            certify_network(agent, p2_spectrum, [[-1.0]], 10.0)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, frac=st.floats(0.5, 2.0))
    def test_soundness(self, seed, frac):
        agent, g, gain = designed_instance(seed)
        net = build_closed_loop(agent, g, gain.K)
        J = global_cost(net)
        gamma = frac * J
        try:
            rep = certify_network(agent, net.spectrum(), gain.K, gamma, graph=g)
        except GammaInfeasible:
            return
        assert J < gamma
        assert sum(c.gamma for c in rep.per_mode_certificates) == pytest.approx(gamma, rel=1e-12)


class TestDecomposition:
    @settings(max_examples=25, deadline=None)
    @given(seed=seeds)
    def test_modal_sum_matches_reduced_and_quadrature(self, seed):
        agent, g, gain = designed_instance(seed)
        net = build_closed_loop(agent, g, gain.K)
        J = global_cost(net)
        assert abs(reduced_cost(net) - J) <= 1e-8 * max(1.0, J)
        assert abs(full_quadrature_cost(net) - J) <= 1e-4 * max(1.0, J)
