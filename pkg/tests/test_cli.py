import csv
import io

import pytest

from remote_track import experiments
from remote_track.cli import main
from remote_track.config import parse_config_text


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_analyze_writes_csv(tmp_path, capsys):
    out = tmp_path / "a.csv"
    code = main(["analyze", "--n-states", "3", "--p", "0.1", "--p-s", "0.922",
                 "--policy", "sa,ca,rs,uniform", "--p-sample", "0.7", "-o", str(out)])
    assert code == 0
    rows = read_csv(out)
    assert [r["policy"] for r in rows] == ["semantics_aware", "change_aware", "randomized_stationary", "uniform"]
    assert all(r["method"] == "closed-form" for r in rows)
    assert float(rows[2]["p_error"]) == pytest.approx(0.09433610896804923, abs=1e-15)
    assert rows[3]["p_error"] == ""
    assert "no closed form" in rows[3]["note"]
    assert "wrote 4 rows" in capsys.readouterr().out


def test_csv_uses_full_precision(tmp_path):
    out = tmp_path / "a.csv"
    main(["analyze", "--n-states", "2", "--p", "0.3", "--p-s", "0.7", "--policy", "rs",
          "--p-sample", "0.3", "-o", str(out)])
    text = out.read_text(encoding="utf-8")
    value = read_csv(out)[0]["p_error"]
    assert float(value) == float(repr(float(value)))
    assert len(value.split(".")[1]) > 10
    assert text.splitlines()[0].startswith("n_states,p,q")


def test_config_file_drives_simulation(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("n_states = 2\np = 0.1\np_s = 0.5\npolicy = rs\np_sample = 0.5\nhorizon = 20000\n"
                   f"seed = 4\noutput = {tmp_path / 'sim.csv'}\n")
    assert main(["simulate", "-c", str(cfg)]) == 0
    rows = read_csv(tmp_path / "sim.csv")
    assert len(rows) == 1
    assert rows[0]["method"] == "simulated"
    assert "seed=" in rows[0]["provenance"]


def test_sweep_rows_are_grid_times_replications(tmp_path):
    out = tmp_path / "s.csv"
    code = main(["sweep", "--n-states", "2,3", "--p", "0.2,0.7", "--p-s", "0.8", "--policy", "rs,sa",
                 "--p-sample", "0.5", "--replications", "2", "--horizon", "3000", "-o", str(out)])
    assert code == 0
    rows = read_csv(out)
    assert len(rows) == 2 * 2 * 2 * 2
    bad = [r for r in rows if r["n_states"] == "3" and r["p"] == "0.7"]
    assert len(bad) == 4
    assert all(r["feasible"] == "false" and "invalid point" in r["note"] for r in bad)


def test_simulate_invalid_point_is_fatal(capsys):
    code = main(["simulate", "--n-states", "3", "--p", "0.7", "--p-s", "0.5", "--horizon", "100"])
    assert code != 0
    assert "error" in capsys.readouterr().err


def test_optimize_command(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["optimize", "--p", "0.1,0.7", "--p-s", "0.5", "--eta", "0.5", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert float(rows[0]["p_error_star"]) == pytest.approx(0.1875)
    assert rows[1]["feasible_sa"] == "false" and rows[1]["feasible_ca"] == "false"


def test_unknown_flag_and_command(capsys):
    assert main(["analyze", "--bogus"]) != 0
    assert main(["frobnicate"]) != 0


def test_unreadable_config_exit_code(tmp_path, capsys):
    assert main(["analyze", "-c", str(tmp_path / "nope.cfg")]) != 0
    assert "cannot read" in capsys.readouterr().err


def test_gamma_flag_uses_physical_channel(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["analyze", "--n-states", "3", "--p", "0.1", "--gamma-db", "0,10",
                 "--policy", "ca", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert [round(float(r["p_s"]), 3) for r in rows] == [0.922, 0.445]


def test_reproduce_table2_shape(tmp_path):
    out = tmp_path / "t2.csv"
    assert main(["reproduce-table2", "--horizon", "20000", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert [float(r["p"]) for r in rows] == [0.1, 0.3, 0.5, 0.7, 0.9]
    assert [r["feasible_semantics_aware"] for r in rows] == ["true"] * 3 + ["false"] * 2
    assert [r["feasible_change_aware"] for r in rows] == ["true"] * 3 + ["false"] * 2
    assert all(r["feasible_rs"] == "false" for r in rows)
    assert all(r["method_uniform"] == "simulated" for r in rows)


def test_reproduce_table1_shape(tmp_path):
    out = tmp_path / "t1.csv"
    assert main(["reproduce-table1", "--horizon", "20000", "--seed", "3", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 4
    for col in ("semantics_aware", "change_aware", "uniform", "randomized_stationary"):
        assert all(r[col] for r in rows)
    assert all(r["method_uniform"] == "simulated" and r["uniform_seed"] for r in rows)
    assert all(r["method_randomized_stationary"] == "closed-form" for r in rows)


def test_reproduce_fig3_small(tmp_path):
    out = tmp_path / "f3.csv"
    code = main(["reproduce-fig3", "--kappa", "2", "--n", "10", "--p-sample", "0.7", "--horizon", "5000",
                 "--replications", "2", "--gamma-db", "0,10", "-o", str(out)])
    assert code == 0
    rows = read_csv(out)
    assert len(rows) == 2 * 2 * 4
    rs = [r for r in rows if r["policy"] == "randomized_stationary"]
    assert all(r["cost_memory_error_closed_form"] for r in rs)


def test_sweep_parallel_matches_serial(monkeypatch):
    spec = parse_config_text("n_states = 2, 3\np = 0.2\np_s = 0.7\npolicy = ca\nhorizon = 2000\nreplications = 2\n")
    serial = experiments.to_csv(experiments.sweep(spec))
    monkeypatch.setenv("REMOTE_TRACK_THREADS", "2")
    monkeypatch.setattr(experiments.os, "cpu_count", lambda: 2)
    assert experiments.worker_count() == 2
    assert experiments.to_csv(experiments.sweep(spec)) == serial
