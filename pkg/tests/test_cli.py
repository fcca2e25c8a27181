import json

import numpy as np
import pytest

import nashalloc as na
from nashalloc.cli import main


@pytest.fixture
def net_file(tmp_path, two_bank_net):
    path = tmp_path / "net.json"
    na.save_network(two_bank_net, path)
    return str(path)


@pytest.fixture
def scen_file(tmp_path, two_bank_net):
    scen = na.gaussian_copula_sample(
        np.array([[1.0, 0.5], [0.5, 1.0]]), two_bank_net.total_obligations, 60, 7
    )
    path = tmp_path / "scen.csv"
    na.save_scenarios(scen, path)
    return str(path)


def test_clear_partial_payments(net_file, capsys):
    assert main(["clear", "--network", net_file, "--assets", "1,0"]) == 0
    out = capsys.readouterr().out
    assert "1.200000" in out and "0.600000" in out


def test_clear_full_payments(net_file, capsys):
    assert main(["clear", "--network", net_file, "--assets", "2,2"]) == 0
    out = capsys.readouterr().out
    assert "2.000000" in out and "1.500000" in out and "False" in out


def test_clear_malformed_network(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"society": [1.0], "interbank": [[0.0, 1.0]]}')
    assert main(["clear", "--network", str(bad), "--assets", "1"]) == 2
    assert "error" in capsys.readouterr().err


def test_nash_en_deterministic(net_file, capsys, tmp_path):
    out_json = tmp_path / "run.json"
    code = main([
        "nash", "--network", net_file, "--deterministic", "0,0",
        "--gamma", "0.95", "--json", str(out_json), "--precision", "6",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "1.425000" in out and "0.475000" in out
    doc = json.loads(out_json.read_text())
    assert doc["rows"][0]["m"] == [1.425, 0.475]
    assert doc["rows"][0]["system_acceptable"] is True


def test_nash_mean_field_shorthand(capsys):
    code = main([
        "nash", "--aggregator", "mean_field", "--deterministic", "0,0", "--eps", "0.1",
    ])
    assert code == 0
    assert "0.900000" in capsys.readouterr().out


def test_nash_insensitive_closed_form(net_file, capsys):
    code = main([
        "nash", "--network", net_file, "--deterministic", "1.0,0.2",
        "--lift", "insensitive",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "insensitive" in out
    # residuals are exactly zero for the closed form
    assert "0.00e+00" in out


def test_nash_lp_method_with_dump(net_file, tmp_path, capsys):
    dump = tmp_path / "program.lp"
    code = main([
        "nash", "--network", net_file, "--deterministic", "0,0",
        "--method", "lp", "--dump-lp", str(dump),
    ])
    assert code == 0
    text = dump.read_text()
    assert "m_1" in text and "p_w1_b1" in text


def test_nash_entropic_needs_flag(net_file, scen_file, capsys):
    code = main([
        "nash", "--network", net_file, "--scenarios", scen_file,
        "--risk", "entropic:1.0",
    ])
    assert code == 2
    assert "allow-noncoherent" in capsys.readouterr().err


def test_noncoherent_demo(tmp_path, capsys):
    scen = na.ScenarioSet(
        values=np.array([[-0.5, 2.0], [-0.5, 2.0]]), probs=np.array([0.5, 0.5])
    )
    path = tmp_path / "two_point.csv"
    na.save_scenarios(scen, path)
    code = main([
        "nash", "--scenarios", str(path), "--risk", "entropic:1.0",
        "--allow-noncoherent", "--precision", "4",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "bank_1: rho=-0.1143 acceptable=True" in out
    assert "system: rho=0.3136 acceptable=False" in out


def test_compare_ordering_and_csv(net_file, scen_file, tmp_path, capsys):
    csv_path = tmp_path / "table.csv"
    json_path = tmp_path / "table.json"
    code = main([
        "compare", "--network", net_file, "--scenarios", scen_file,
        "--risk", "avar:0.1", "--gamma", "0.95",
        "--csv", str(csv_path), "--json", str(json_path),
    ])
    assert code == 0
    doc = json.loads(json_path.read_text())
    rows = {(r["lift"], r["method"]): r for r in doc["rows"]}
    for lift in ("insensitive", "sensitive"):
        assert rows[(lift, "minimal")]["total"] <= rows[(lift, "nash")]["total"] + 1e-6
        assert rows[(lift, "nash")]["total"] <= rows[(lift, "comonotonic")]["total"] + 1e-6
        for method in ("minimal", "nash", "comonotonic"):
            assert rows[(lift, method)]["system_acceptable"] is True
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "lift,method,bank_1,bank_2,total,system_acceptable"
    assert len(lines) == 7
    # table and JSON agree to printed precision
    out = capsys.readouterr().out
    nash_total = rows[("sensitive", "nash")]["total"]
    assert f"{nash_total:.6f}" in out


def test_compare_deterministic_copula_is_identity(net_file, capsys):
    code = main([
        "compare", "--network", net_file, "--deterministic", "0.5,0.5",
        "--risk", "expectation", "--lift", "sensitive",
    ])
    assert code == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if "sensitive" in l]
    nash_line = next(l for l in lines if " nash" in l)
    com_line = next(l for l in lines if "comonotonic" in l)
    assert nash_line.split()[2:5] == com_line.split()[2:5]


def test_sample_reproducible(net_file, tmp_path, capsys):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    for path in (a, b):
        code = main([
            "sample", "--network", net_file, "--corr", "0.5",
            "--n", "100", "--seed", "7", "--out", str(path),
        ])
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    scen = na.load_scenarios(a)
    assert scen.n_scenarios == 100
    assert np.all(scen.values >= 0.0)
    assert np.all(scen.values <= np.array([2.0, 1.5])[:, None])


def test_sample_rejects_bad_inputs(net_file, tmp_path, capsys):
    code = main([
        "sample", "--network", net_file, "--corr", "0.5", "--n", "0",
        "--seed", "1", "--out", str(tmp_path / "x.csv"),
    ])
    assert code == 2
    code = main([
        "sample", "--network", net_file, "--corr", "1.5", "--n", "10",
        "--seed", "1", "--out", str(tmp_path / "x.csv"),
    ])
    assert code == 2


def test_check_command(net_file, capsys):
    code = main([
        "check", "--network", net_file, "--deterministic", "0,0",
        "--capital", "1.425,0.475",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "max residual" in out


def test_solver_failure_exit_code(net_file, capsys):
    code = main([
        "nash", "--network", net_file, "--deterministic", "0,0",
        "--method", "fixed-point", "--outer-tol", "1e-15", "--max-outer", "2",
    ])
    assert code == 3
    assert "solver error" in capsys.readouterr().err
