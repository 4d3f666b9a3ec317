import json

import pytest

from dronenet import cli, io


@pytest.fixture
def fixture_path():
    return cli.bundled_fixture()


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_matches_frozen_oracle(fixture_path, capsys):
    frozen = json.load(open(fixture_path))["oracle"]
    code, out, _ = run(["solve", "--instance", fixture_path, "--mode", "oa_bc"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["report"]["status"] == "OPTIMAL"
    assert data["report"]["objective"] == pytest.approx(frozen["avg_resp"], rel=1e-6)
    assert data["design"]["K"] == frozen["design"]["K"]


def test_oracle_command(fixture_path, tmp_path, capsys):
    out = tmp_path / "o.json"
    assert run(["oracle", "--instance", fixture_path, "--out", str(out)], capsys)[0] == 0
    assert json.load(open(out))["avg_resp"] == pytest.approx(703.399516193611, rel=1e-12)
    code, _, err = run(["oracle", "--instance", fixture_path, "--max-designs", "2"], capsys)
    assert code == 3 and "data error" in err


def limit_config(tmp_path, fixture_path, nodes):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"instance": {"instance_json": fixture_path}, "solver": {"node_limit": nodes}}))
    return str(path)


def test_limit_exit_codes(fixture_path, tmp_path, capsys):
    code, out, _ = run(["solve", "--config", limit_config(tmp_path, fixture_path, 200)], capsys)
    assert code == 5 and json.loads(out)["design"] is not None
    code, out, _ = run(["solve", "--config", limit_config(tmp_path, fixture_path, 50)], capsys)
    assert code == 1 and json.loads(out)["design"] is None
    code, _, _ = run(["solve", "--instance", fixture_path, "--time-limit", "1e-9"], capsys)
    assert code == 1


def test_config_error_exit(capsys, tmp_path):
    assert run(["solve"], capsys)[0] == 2
    assert run(["solve", "--mode", "fastest"], capsys)[0] == 2
    bad = tmp_path / "c.json"
    bad.write_text("[1]")
    assert run(["solve", "--config", str(bad)], capsys)[0] == 2


def test_malformed_csv_exit(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("timestamp,latitude,longitude\n0,36.85,-76.0\n1,36.85\n")
    (tmp_path / "b.csv").write_text("id,latitude,longitude\nB0,36.85,-76.0\n")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"instance": {"demands_csv": "d.csv", "bases_csv": "b.csv", "p": 1, "q": 1}}))
    code, _, err = run(["solve", "--config", str(cfg)], capsys)
    assert code == 3 and "line 3" in err


def test_csv_pipeline_and_infeasible(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("timestamp,latitude,longitude\n0,36.85,-76.0\n60,36.86,-76.0\n")
    (tmp_path / "b.csv").write_text("id,latitude,longitude\nB0,36.85,-76.0\nB1,36.90,-76.0\n")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"instance": {"demands_csv": "d.csv", "bases_csv": "b.csv", "p": 1, "q": 1,
                                            "horizon_seconds": 86400.0}}))
    code, out, _ = run(["solve", "--config", str(cfg)], capsys)
    assert code == 0 and json.loads(out)["design"]["K"] == [1, 0]
    # the only base near the demands is overloaded at this horizon
    cfg.write_text(json.dumps({"instance": {"demands_csv": "d.csv", "bases_csv": "b.csv", "p": 1, "q": 1,
                                            "horizon_seconds": 1000.0}}))
    assert run(["solve", "--config", str(cfg)], capsys)[0] == 4
    # a demand outside every catchment is a data error
    (tmp_path / "d.csv").write_text("timestamp,latitude,longitude\n0,37.5,-76.0\n")
    assert run(["solve", "--config", str(cfg)], capsys)[0] == 3


def test_simulate_and_heuristic(fixture_path, tmp_path, capsys):
    design = tmp_path / "design.json"
    json.loads(run(["solve", "--instance", fixture_path, "--out", str(design)], capsys)[1] or "{}")
    out = tmp_path / "sim.json"
    code, _, _ = run(["simulate", "--instance", fixture_path, "--design", str(design), "--out", str(out)], capsys)
    assert code == 0
    data = json.load(open(out))
    assert data["design_source"] == "file" and len(data["replications"]) == 1
    assert (tmp_path / "sim_requests_0.csv").exists()
    code, out, _ = run(["simulate", "--instance", fixture_path, "--design", str(design), "--validate"], capsys)
    assert code == 0 and "analytic_response" in json.loads(out)
    assert run(["heuristic", "--instance", fixture_path], capsys)[0] == 4


def test_analyze_tables(capsys):
    code, out, _ = run(["analyze", "--drone-minutes", "2.04", "--ems-minutes", "9.32"], capsys)
    assert code == 0
    table = json.loads(out)
    assert set(table) == {"inputs", "survivors", "qaly", "cost", "t_qaly"}
    for key in ("survivors", "qaly", "cost"):
        assert [r["survival_function"] for r in table[key]] == ["BANDARA", "DEMAIO", "CHANTA"]
    assert table["qaly"][0]["additional_survivors_per_year"] == 34
    assert table["cost"][0]["cost_per_qaly"] == pytest.approx(250, abs=10)
    assert run(["analyze"], capsys)[0] == 2


def test_analyze_ems_from_history(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("timestamp,latitude,longitude,response_time_seconds\n"
                                    "0,36.85,-76.0,540\n60,36.86,-76.0,600\n")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"instance": {"demands_csv": "d.csv"}}))
    code, out, _ = run(["analyze", "--config", str(cfg), "--drone-minutes", "2.0"], capsys)
    assert code == 0
    assert json.loads(out)["inputs"]["ems_response_minutes"] == pytest.approx(9.5)


def test_bench_command(tmp_path, capsys):
    out = tmp_path / "p.csv"
    code, text, _ = run(["bench", "--sizes", "20", "--total", "1", "--modes", "OA_BC",
                         "--time-limit", "2", "--out", str(out)], capsys)
    assert code == 0 and out.exists() and "OA_BC" in text
