"""Command-line front end.

Usage::

    h2sync spectrum --config problem.json
    h2sync design   --config problem.json [--out report.json]
    h2sync verify   --config problem.json --gain gain.json
    h2sync simulate --config problem.json [--format csv --out traj.csv]

Exit codes: 0 ok, 1 input error, 2 disconnected graph, 3 infeasible or not
synchronizing, 4 not in standard form, 5 oracle disagreement.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ProblemConfig, load_config, load_gain
from .design import coupling_range, design_protocol
from .errors import (
    COutOfRange,
    DegenerateTrajectory,
    DimensionMismatch,
    Disconnected,
    GammaInfeasible,
    InvalidInput,
    InvalidSpectrum,
    NotStandardForm,
    NotSynchronizing,
    RiccatiFailure,
)
from .graph import is_connected, laplacian, spectrum
from .network import (
    build_closed_loop,
    certify_network,
    check_synchronization,
    full_quadrature_cost,
    global_cost,
)
from .report import dumps, new_report
from .sim import simulate, sync_metrics, trajectory_csv

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DISCONNECTED = 2
EXIT_INFEASIBLE = 3
EXIT_NOT_STANDARD = 4
EXIT_ORACLE = 5

ORACLE_RTOL = 1e-4


class _Exit(Exception):
    def __init__(self, code: int, report: dict | None = None, message: str = ""):
        super().__init__(message)
        self.code = code
        self.report = report
        self.message = message


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _connected_spectrum(cfg: ProblemConfig, command: str):
    g = cfg.graph
    if not is_connected(g):
        raise _Exit(EXIT_DISCONNECTED, new_report(command, status="disconnected"),
                    "communication graph is not connected")
    return spectrum(laplacian(g))


def _certificate_block(rep) -> dict:
    return {
        "trace_sum": rep.trace_sum,
        "eps": rep.eps,
        "modes": [
            {
                "lambda": lam,
                "lyap_margin": cert.lyap_margin,
                "trace": cert.trace,
                "gamma_share": cert.gamma,
                "slack": cert.slack,
            }
            for lam, cert in zip(rep.eigenvalues, rep.per_mode_certificates)
        ],
    }


def cmd_spectrum(cfg: ProblemConfig, args) -> int:
    g = cfg.graph
    spec = spectrum(laplacian(g))
    connected = is_connected(g)
    report = new_report(
        "spectrum",
        nodes=g.node_count,
        edges=g.edge_count,
        connected=connected,
        lambda2=spec.lambda2,
        lambdaN=spec.lambdaN,
        eigenvalues=spec.eigenvalues,
    )
    _emit(dumps(report), args.out)
    return EXIT_OK if connected else EXIT_DISCONNECTED


def _gain_fields(gain) -> dict:
    rng = coupling_range(gain.method, gain.lambda2, gain.lambdaN)
    return {
        "method": gain.method.value,
        "c": gain.c,
        "coupling_range": {"lower": rng.lower, "upper": rng.upper, "upper_inclusive": rng.upper_inclusive},
        "lambda2": gain.lambda2,
        "lambdaN": gain.lambdaN,
        "K": gain.K,
        "P": gain.P,
        "trace_value": gain.trace_value,
        "min_gamma": gain.min_gamma,
    }


def cmd_design(cfg: ProblemConfig, args) -> int:
    agent = cfg.require_agent()
    gamma = cfg.require_gamma()
    spec = _connected_spectrum(cfg, "design")
    try:
        gain = design_protocol(agent, spec, gamma, cfg.method, cfg.c)
    except GammaInfeasible as exc:
        fields = _gain_fields(exc.gain) if exc.gain is not None else {}
        report = new_report("design", status="gamma_infeasible", gamma=gamma,
                            minimal_gamma=exc.achieved, **fields)
        raise _Exit(EXIT_INFEASIBLE, report, str(exc)) from exc

    rep = certify_network(agent, spec, gain.K, gamma, graph=cfg.graph)
    J = global_cost(build_closed_loop(agent, cfg.graph, gain.K))
    report = new_report(
        "design",
        status="certified",
        gamma=gamma,
        **_gain_fields(gain),
        modal_costs=rep.J_modal,
        J=J,
        J_reduced=rep.J_global,
        decomposition_gap=rep.decomposition_gap,
        certificate=_certificate_block(rep),
    )
    _emit(dumps(report), args.out)
    return EXIT_OK


def cmd_verify(cfg: ProblemConfig, args) -> int:
    agent = cfg.require_agent()
    gamma = cfg.require_gamma()
    if not args.gain:
        raise InvalidInput("verify needs --gain")
    K = agent.check_gain(load_gain(args.gain))
    spec = _connected_spectrum(cfg, "verify")

    ok, per_mode = check_synchronization(agent, spec, K)
    if not ok:
        report = new_report("verify", status="not_synchronizing", K=K,
                            mode_stable=per_mode, eigenvalues=spec.nonzero)
        raise _Exit(EXIT_INFEASIBLE, report, "gain does not synchronize the network")
    try:
        rep = certify_network(agent, spec, K, gamma, graph=cfg.graph)
    except GammaInfeasible as exc:
        report = new_report("verify", status="gamma_infeasible", K=K, gamma=gamma, minimal_gamma=exc.achieved)
        raise _Exit(EXIT_INFEASIBLE, report, str(exc)) from exc

    net = build_closed_loop(agent, cfg.graph, K)
    J = global_cost(net)
    J_quad = full_quadrature_cost(net)
    rel = abs(J_quad - J) / max(1.0, abs(J))
    agree = rel <= ORACLE_RTOL
    report = new_report(
        "verify",
        status="certified" if agree else "oracle_disagreement",
        gamma=gamma,
        K=K,
        modal_costs=rep.J_modal,
        J=J,
        J_reduced=rep.J_global,
        J_quadrature=J_quad,
        oracle_relative_gap=rel,
        oracle_tolerance=ORACLE_RTOL,
        decomposition_gap=rep.decomposition_gap,
        certificate=_certificate_block(rep),
    )
    if not agree:
        raise _Exit(EXIT_ORACLE, report, f"oracle disagreement {rel:.3e} > {ORACLE_RTOL}")
    _emit(dumps(report), args.out)
    return EXIT_OK


def _simulation_gain(cfg: ProblemConfig, args, agent, spec):
    if args.gain:
        return agent.check_gain(load_gain(args.gain)), "gain_file"
    if cfg.simulation.K is not None:
        return agent.check_gain(cfg.simulation.K), "config"
    gamma = cfg.gamma if cfg.gamma is not None else np.inf
    try:
        return design_protocol(agent, spec, gamma, cfg.method, cfg.c).K, "design"
    except GammaInfeasible as exc:
        return exc.gain.K, "design"


def cmd_simulate(cfg: ProblemConfig, args) -> int:
    if cfg.simulation is None:
        raise InvalidInput("config: missing 'simulation' block")
    if args.format == "csv" and not args.out:
        raise InvalidInput("simulate --format csv needs --out")
    sim = cfg.simulation
    agent = cfg.require_agent()
    spec = _connected_spectrum(cfg, "simulate")
    K, source = _simulation_gain(cfg, args, agent, spec)
    net = build_closed_loop(agent, cfg.graph, K)
    x0 = sim.x0 if sim.x0 is not None else np.zeros(net.Atilde.shape[0])
    traj = simulate(net, x0, sim.disturbance, sim.T, sim.dt)

    metrics: dict = {"final_disagreement": float(traj.disagreement[-1])}
    try:
        final, rate = sync_metrics(traj)
        metrics["fitted_decay_rate"] = rate
    except DegenerateTrajectory as exc:
        metrics["fitted_decay_rate"] = None
        metrics["note"] = f"DegenerateTrajectory: {exc}"

    report = new_report(
        "simulate",
        status="ok",
        gain_source=source,
        K=K,
        T=float(traj.times[-1]),
        dt=sim.dt,
        samples=int(traj.times.size),
        disturbance=sim.disturbance.kind.value,
        **metrics,
    )
    if args.format == "csv":
        Path(args.out).write_text(trajectory_csv(traj))
        sys.stdout.write(dumps(report))
    else:
        _emit(dumps(report), args.out)
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "design": cmd_design,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="h2sync",
        description="Distributed suboptimal H2 protocols for multi-agent networks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="problem configuration (JSON)")
    parser.add_argument("--gain", help="gain file with field K (verify, optionally simulate)")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), default="json",
                        help="csv writes the simulated trajectory to --out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.format == "csv" and args.command != "simulate":
        print("error: --format csv applies to simulate only", file=sys.stderr)
        return EXIT_INPUT

    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except _Exit as exc:
        if exc.report is not None:
            _emit(dumps(exc.report), args.out)
        if exc.message:
            print(f"error: {exc.message}", file=sys.stderr)
        return exc.code
    except NotStandardForm as exc:
        print(f"error: not in standard form: {exc}", file=sys.stderr)
        return EXIT_NOT_STANDARD
    except Disconnected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DISCONNECTED
    except (GammaInfeasible, NotSynchronizing, RiccatiFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InvalidInput, DimensionMismatch, COutOfRange, InvalidSpectrum, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
