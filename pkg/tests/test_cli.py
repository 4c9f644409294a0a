import json
import math
import subprocess
import sys

import pytest

from h2sync.cli import main
from helpers import SQRT2

SCALAR_AGENT = {"A": [[0]], "B": [[1]], "C": [[1], [0]], "D": [[0], [1]], "E": [[1]]}
P2 = {"nodes": 2, "edges": [[1, 2, 1.0]]}
P3 = {"nodes": 3, "edges": [[1, 2, 1.0], [2, 3, 1.0]]}


@pytest.fixture
def write(tmp_path):
    def _write(name, doc):
        path = tmp_path / name
        path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
        return str(path)

    return _write


@pytest.fixture
def run(capsys):
    def _run(*argv):
        code = main(list(argv))
        out, err = capsys.readouterr()
        return code, out, err

    return _run


def worked_config(**extra):
    doc = {"agent": SCALAR_AGENT, "graph": P2, "gamma": 2.5, "method": "thm4"}
    doc.update(extra)
    return doc


class TestSpectrum:
    def test_p3(self, write, run):
        code, out, _ = run("spectrum", "--config", write("c.json", {"graph": P3}))
        rep = json.loads(out)
        assert code == 0
        assert rep["schema_version"] == "1" and rep["command"] == "spectrum"
        assert rep["lambda2"] == pytest.approx(1.0, abs=1e-12)
        assert rep["lambdaN"] == pytest.approx(3.0, abs=1e-12)
        assert rep["connected"] is True

    def test_disconnected(self, write, run):
        code, out, _ = run("spectrum", "--config", write("c.json", {"graph": {"nodes": 3, "edges": [[1, 2, 1]]}}))
        assert code == 2
        assert json.loads(out)["connected"] is False

    def test_malformed_json(self, write, run):
        code, _, err = run("spectrum", "--config", write("c.json", '{"graph": '))
        assert code == 1
        assert "line 1" in err

    def test_graph_file_reference(self, write, run):
        write("g.json", P3)
        code, out, _ = run("spectrum", "--config", write("c.json", {"graph": "g.json"}))
        assert code == 0 and json.loads(out)["nodes"] == 3

    def test_missing_config(self, run, tmp_path):
        assert run("spectrum", "--config", str(tmp_path / "nope.json"))[0] == 1

    def test_unknown_command(self, run):
        assert run("optimize", "--config", "x.json")[0] == 1

    def test_csv_only_for_simulate(self, write, run):
        assert run("spectrum", "--config", write("c.json", {"graph": P3}), "--format", "csv")[0] == 1


class TestDesign:
    def test_worked(self, write, run):
        code, out, _ = run("design", "--config", write("c.json", worked_config()))
        rep = json.loads(out)
        assert code == 0
        assert rep["status"] == "certified"
        assert rep["K"][0][0] == pytest.approx(-0.35355, abs=1e-4)
        assert rep["J"] == pytest.approx(3.0 / SQRT2, abs=1e-4)
        assert rep["c"] == pytest.approx(1.0 / 6.0, rel=1e-14)
        assert rep["certificate"]["trace_sum"] < 2.5

    def test_infeasible(self, write, run):
        code, out, _ = run("design", "--config", write("c.json", worked_config(gamma=2.0)))
        rep = json.loads(out)
        assert code == 3
        assert rep["status"] == "gamma_infeasible"
        assert rep["minimal_gamma"] == pytest.approx(2.12132, abs=1e-3)
        assert rep["minimal_gamma"] > 3.0 / SQRT2

    def test_not_standard_form(self, write, run):
        agent = dict(SCALAR_AGENT, C=[[1], [1]])
        assert run("design", "--config", write("c.json", worked_config(agent=agent)))[0] == 4

    def test_c_out_of_range(self, write, run):
        assert run("design", "--config", write("c.json", worked_config(c=0.2)))[0] == 1

    def test_missing_gamma(self, write, run):
        doc = worked_config()
        del doc["gamma"]
        assert run("design", "--config", write("c.json", doc))[0] == 1

    def test_disconnected(self, write, run):
        doc = worked_config(graph={"nodes": 3, "edges": [[1, 2, 1]]})
        assert run("design", "--config", write("c.json", doc))[0] == 2

    def test_out_file(self, write, run, tmp_path):
        out = tmp_path / "rep.json"
        code, stdout, _ = run("design", "--config", write("c.json", worked_config()), "--out", str(out))
        assert code == 0 and stdout == ""
        assert json.loads(out.read_text())["status"] == "certified"

    def test_deterministic_bytes(self, write, run):
        cfg = write("c.json", worked_config(graph=P3, method="thm5", gamma=50.0))
        first = run("design", "--config", cfg)[1]
        second = run("design", "--config", cfg)[1]
        assert first == second

    def test_seventeen_digits(self, write, run):
        out = run("design", "--config", write("c.json", worked_config()))[1]
        assert '"c": 0.16666666666666666' in out or '"c": 0.1666666666666667' in out


class TestVerify:
    def test_roundtrip(self, write, run, tmp_path):
        cfg = write("c.json", worked_config())
        gain = tmp_path / "gain.json"
        assert run("design", "--config", cfg, "--out", str(gain))[0] == 0
        code, out, _ = run("verify", "--config", cfg, "--gain", str(gain))
        rep = json.loads(out)
        assert code == 0
        assert rep["status"] == "certified"
        assert abs(rep["J_quadrature"] - rep["J"]) <= 1e-4 * rep["J"]
        assert rep["decomposition_gap"] <= 1e-8

    def test_destabilizing(self, write, run):
        code, out, _ = run("verify", "--config", write("c.json", worked_config()),
                           "--gain", write("k.json", {"K": [[0.5]]}))
        assert code == 3
        assert json.loads(out)["status"] == "not_synchronizing"

    def test_wrong_shape(self, write, run):
        code = run("verify", "--config", write("c.json", worked_config()),
                   "--gain", write("k.json", {"K": [[-1.0, 0.0]]}))[0]
        assert code == 1

    def test_infeasible_gamma(self, write, run):
        code, out, _ = run("verify", "--config", write("c.json", worked_config(gamma=1.0)),
                           "--gain", write("k.json", {"K": [[-0.5]]}))
        assert code == 3
        assert json.loads(out)["status"] == "gamma_infeasible"

    def test_missing_gain(self, write, run):
        assert run("verify", "--config", write("c.json", worked_config()))[0] == 1


class TestSimulate:
    sim = {"T": 1.0, "dt": 0.001, "x0": [1.0, -1.0], "K": [[-0.5]]}

    def test_worked(self, write, run):
        code, out, _ = run("simulate", "--config", write("c.json", worked_config(simulation=self.sim)))
        rep = json.loads(out)
        assert code == 0
        assert rep["final_disagreement"] == pytest.approx(2.0 * math.exp(-1.0), abs=1e-6)
        assert rep["fitted_decay_rate"] == pytest.approx(-1.0, abs=0.05)
        assert rep["gain_source"] == "config"

    def test_design_gain_default(self, write, run):
        sim = {k: v for k, v in self.sim.items() if k != "K"}
        rep = json.loads(run("simulate", "--config", write("c.json", worked_config(simulation=sim)))[1])
        assert rep["gain_source"] == "design"
        assert rep["K"][0][0] == pytest.approx(-0.35355, abs=1e-4)

    def test_gain_file_wins(self, write, run):
        cfg = write("c.json", worked_config(simulation=self.sim))
        rep = json.loads(run("simulate", "--config", cfg, "--gain", write("k.json", {"K": [[-1.0]]}))[1])
        assert rep["gain_source"] == "gain_file"
        assert rep["final_disagreement"] == pytest.approx(2.0 * math.exp(-2.0), abs=1e-6)

    def test_consensus_degenerate(self, write, run):
        sim = dict(self.sim, x0=[1.0, 1.0])
        code, out, _ = run("simulate", "--config", write("c.json", worked_config(simulation=sim)))
        rep = json.loads(out)
        assert code == 0
        assert rep["fitted_decay_rate"] is None
        assert "DegenerateTrajectory" in rep["note"]

    @pytest.mark.parametrize("dt", [0.0, -0.001])
    def test_bad_dt(self, write, run, dt):
        sim = dict(self.sim, dt=dt)
        assert run("simulate", "--config", write("c.json", worked_config(simulation=sim)))[0] == 1

    def test_missing_block(self, write, run):
        assert run("simulate", "--config", write("c.json", worked_config()))[0] == 1

    def test_csv(self, write, run, tmp_path):
        out = tmp_path / "traj.csv"
        code, stdout, _ = run("simulate", "--config", write("c.json", worked_config(simulation=self.sim)),
                              "--format", "csv", "--out", str(out))
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "t,x_1_1,x_2_1,zeta_1,zeta_2,disagreement"
        assert len(lines) == 1002
        assert float(lines[-1].split(",")[-1]) == pytest.approx(2.0 * math.exp(-1.0), abs=1e-6)
        assert json.loads(stdout)["status"] == "ok"

    def test_csv_needs_out(self, write, run):
        cfg = write("c.json", worked_config(simulation=self.sim))
        assert run("simulate", "--config", cfg, "--format", "csv")[0] == 1

    def test_impulse(self, write, run):
        sim = dict(self.sim, x0=None, disturbance={"kind": "impulse", "channel": 2, "scale": 2.0})
        rep = json.loads(run("simulate", "--config", write("c.json", worked_config(simulation=sim)))[1])
        assert rep["disturbance"] == "impulse"
        assert rep["final_disagreement"] == pytest.approx(2.0 * math.exp(-1.0), abs=1e-6)

    def test_samples_file(self, write, run):
        write("d.csv", "# d1,d2\n" + "1.0,0.0\n" * 1000)
        sim = dict(self.sim, x0=None, disturbance={"kind": "samples", "file": "d.csv"})
        code, out, _ = run("simulate", "--config", write("c.json", worked_config(simulation=sim)))
        assert code == 0
        assert json.loads(out)["final_disagreement"] == pytest.approx(1.0 - math.exp(-1.0), abs=1e-9)


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"graph": P3}))
    proc = subprocess.run([sys.executable, "-m", "h2sync", "spectrum", "--config", str(cfg)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["lambdaN"] == pytest.approx(3.0, abs=1e-12)
