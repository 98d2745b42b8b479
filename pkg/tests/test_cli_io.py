import json

import numpy as np
import pytest

from hystnet.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from hystnet.continuation import ParameterSpec, continue_equilibria
from hystnet.errors import ValidationError
from hystnet.io import (
    config_network,
    forcing_vector,
    parse_config,
    read_branch,
    read_csv,
    trace_header,
    write_branch,
)
from hystnet.network import load_network
from hystnet.report import design_report
from hystnet.simulator import Outcome


def small_config(tmp_path, **sections):
    cfg = {"network": "four_node", "epsilon": 0.1,
           "simulate": {"t_end": 2.0, "tau": 1.0, "burst": {"node": 4, "amplitude": 3.0}}}
    cfg.update(sections)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def run(argv):
    return main([str(a) for a in argv])


def test_parse_config_defaults():
    cfg = parse_config('{"network": "fifteen_node", "Q": 5}')
    assert cfg["seed"] == 0
    assert cfg["simulate"]["delta"] == 0.1
    assert cfg["simulate"]["noise"] == 1e-3
    assert cfg["bifurcate"]["free"] == "mu"
    net = config_network(cfg)
    assert (net.n_nodes, net.q) == (15, 5)


@pytest.mark.parametrize("text, fragment", [
    ("{}", "'network' is a required property"),
    ('{"network": "four_node", "colour": 1}', "colour"),
    ('{"network": "four_node", "simulate": {"delta": -1}}', "simulate/delta"),
    ('{"network": {"n": 2, "edges": [[1, 2]]}}', "'Q'"),
    ("{not json", "not valid JSON"),
])
def test_parse_config_errors(text, fragment):
    with pytest.raises(ValidationError) as info:
        parse_config(text)
    assert fragment in str(info.value)


def test_inline_network_and_forcing():
    cfg = parse_config({"network": {"n": 3, "edges": [[1, 2], [2, 3]], "Q": 2}})
    net = config_network(cfg)
    assert net.eta == 10.0 and net.degrees.tolist() == [1, 2, 1]
    np.testing.assert_array_equal(forcing_vector({"node": 3, "amplitude": 2.0}, 3, 1), [0, 0, 2])
    with pytest.raises(ValidationError):
        forcing_vector({"f": [1.0]}, 3, 1)


def test_trace_columns_fifteen():
    header = trace_header(15)
    assert len(header) == 61
    assert header[:2] == ["t", "u_1"] and header[-1] == "A_15"


def test_simulate_replay_is_byte_identical(tmp_path):
    cfg = small_config(tmp_path)
    first = tmp_path / "first"
    assert run(["simulate", "--config", cfg, "--out-dir", first, "--svg"]) == EXIT_OK
    manifest = first / "simulate.manifest.json"
    data = json.loads(manifest.read_text())
    assert data["seed"] == 0 and "trace.csv" in data["outputs"]
    second = tmp_path / "second"
    assert run(["simulate", "--config", manifest, "--out-dir", second, "--svg"]) == EXIT_OK
    for name in ("trace.csv", "trace.json", "trace_phase.svg", "trace_phase_history.svg"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    header, rows = read_csv(first / "trace.csv")
    assert len(header) == 17 and all(len(r) == 17 for r in rows)
    side = json.loads((first / "trace.json").read_text())
    assert side["outcome"] in {o.value for o in Outcome}


def test_seed_override_changes_noise(tmp_path):
    cfg = small_config(tmp_path)
    run(["simulate", "--config", cfg, "--out-dir", tmp_path / "a", "--seed", "1"])
    run(["simulate", "--config", cfg, "--out-dir", tmp_path / "b", "--seed", "2"])
    assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "b" / "trace.csv").read_bytes()
    assert json.loads((tmp_path / "a" / "simulate.manifest.json").read_text())["seed"] == 1


def test_branch_round_trip(tmp_path):
    net = load_network("four_node", epsilon=0.1)
    spec = ParameterSpec("node", node=4, template=(0.0, 1.1, 1.1, 1.0))
    br = continue_equilibria(net, spec, (0.5, 3.0), n_grid=30)
    path = write_branch(br, tmp_path / "eq.csv", 4)
    cols = read_branch(path)
    np.testing.assert_array_equal(cols["param"], br.params)
    np.testing.assert_array_equal(cols["stable"].astype(bool), br.stable)
    assert cols["event"].count("Hopf") == len(br.events)


def test_bifurcate_and_slowflow_commands(tmp_path):
    cfg = small_config(tmp_path, bifurcate={"free": "zeta_4", "template": [0, 1.1, 1.1, 1.0],
                                            "n_grid": 40, "periodic": False})
    assert run(["bifurcate", "--config", cfg, "--range", "0.5:3", "--out-dir", tmp_path]) == EXIT_OK
    header, rows = read_csv(tmp_path / "events.csv")
    assert header == ["kind", "eps", "mu", "freq"] and rows
    assert run(["slowflow", "--config", cfg, "--out-dir", tmp_path]) == EXIT_OK
    summary = json.loads((tmp_path / "slowflow.json").read_text())
    assert summary["zeta_hb"] == pytest.approx(0.5)


def test_design_mirror_rows():
    rows = {r.q: r.as_list() for r in design_report(load_network("four_node"))}
    # nodes 1 and 4 are exchanged by a graph automorphism
    np.testing.assert_allclose(rows[1][2:8], rows[4][2:8], rtol=1e-12)
    assert rows[1][1] == rows[4][1]


def test_exit_codes(tmp_path, capsys):
    assert run(["design", "--network", "nowhere.json", "--out-dir", tmp_path]) == EXIT_VALIDATION
    bad = tmp_path / "bad.json"
    bad.write_text('{"network": "four_node", "trigger": {"delta": 50}}')
    assert run(["trigger", "--config", bad, "--out-dir", tmp_path]) == EXIT_NUMERICAL
    err = capsys.readouterr().err
    assert "NoThreshold" in err
    with pytest.raises(SystemExit):
        main(["simulate", "--range", "1:2"])
