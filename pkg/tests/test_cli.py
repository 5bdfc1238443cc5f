import json
import os

import pytest

from loopfair.cli import main

from conftest import DATA_DIR

TABLE_PATH = os.path.join(DATA_DIR, "income_synthetic.csv")
BERNOULLI_SPEC = os.path.join(DATA_DIR, "bernoulli_convolution.ifs")
TWO_CYCLE_SPEC = os.path.join(DATA_DIR, "two_cycle.ifs")


def write_config(tmp_path, users=100, trials=2, seed=5, table=TABLE_PATH):
    p = tmp_path / "run.ini"
    p.write_text(
        "[simulation]\n"
        f"users = {users}\n"
        f"trials = {trials}\n"
        f"seed = {seed}\n"
        "[paths]\n"
        f"income_table = {table}\n"
    )
    return str(p)


def read_files(outdir):
    out = {}
    for name in ("users.csv", "groups.csv", "summary.csv", "density.csv", "report.json"):
        with open(os.path.join(outdir, name), "rb") as fh:
            out[name] = fh.read()
    return out


class TestSimulate:
    def test_fixed_seed_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path)
        out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(["simulate", "--config", cfg, "--out", out_a]) == 0
        assert main(["simulate", "--config", cfg, "--out", out_b]) == 0
        assert read_files(out_a) == read_files(out_b)

    def test_missing_income_table_exits_2_without_partial_files(self, tmp_path, capsys):
        cfg = write_config(tmp_path, table=str(tmp_path / "nope.csv"))
        out = str(tmp_path / "out")
        assert main(["simulate", "--config", cfg, "--out", out]) == 2
        assert "error" in capsys.readouterr().err
        assert not os.path.exists(out)

    def test_summary_row_count(self, tmp_path):
        cfg = write_config(tmp_path)
        out = str(tmp_path / "out")
        main(["simulate", "--config", cfg, "--out", out])
        with open(os.path.join(out, "summary.csv")) as fh:
            lines = fh.read().splitlines()
        # metadata line + header + (19 years x 3 races)
        assert len(lines) == 2 + 19 * 3

    def test_seed_flag_changes_outputs(self, tmp_path):
        cfg = write_config(tmp_path, users=500)
        out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
        main(["simulate", "--config", cfg, "--out", out_a])
        main(["simulate", "--config", cfg, "--seed", "99", "--out", out_b])
        ra = json.load(open(os.path.join(out_a, "report.json")))
        rb = json.load(open(os.path.join(out_b, "report.json")))
        assert ra["config_hash"] != rb["config_hash"]
        for race, finals in ra["group_final_adr"].items():
            mean_a = sum(finals) / len(finals)
            mean_b = sum(rb["group_final_adr"][race]) / len(rb["group_final_adr"][race])
            assert abs(mean_a - mean_b) < 0.05


class TestErgodicity:
    def test_bernoulli_convolution_verdict(self, capsys):
        rc = main(["ergodicity", "--spec", BERNOULLI_SPEC, "--steps", "100000",
                   "--starts", "0,1", "--seed", "3", "--json"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["verdict"] == "unique-ergodic-sufficient"
        means = payload["cesaro_means"]
        assert abs(means[0] - 0.5) < 0.02 and abs(means[1] - 0.5) < 0.02
        assert abs(means[0] - means[1]) < 0.02

    def test_two_cycle_not_primitive(self, capsys):
        rc = main(["ergodicity", "--spec", TWO_CYCLE_SPEC, "--steps", "10",
                   "--starts", "0.5", "--json"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["strongly_connected"] is True
        assert payload["primitive"] is False
        assert payload["verdict"] == "invariant-exists-sufficient"

    def test_malformed_edge_line_number(self, tmp_path, capsys):
        p = tmp_path / "bad.ifs"
        p.write_text("VERTEX 0 1\nREGION 0 0 1\nEDGE 0 0 1.0 A B\n")
        rc = main(["ergodicity", "--spec", str(p), "--starts", "0"])
        assert rc == 3
        assert "bad.ifs:3" in capsys.readouterr().err

    def test_invalid_probabilities_listed(self, tmp_path, capsys):
        p = tmp_path / "invalid.ifs"
        p.write_text("VERTEX 0 1\nREGION 0 0 1\n"
                     "EDGE 0 0 0.6 A 0.5 B 0\nEDGE 0 0 0.6 A 0.5 B 0.5\n")
        rc = main(["ergodicity", "--spec", str(p), "--starts", "0"])
        assert rc == 3
        assert "violation" in capsys.readouterr().err


class TestAnalyze:
    @pytest.fixture
    def sim_out(self, tmp_path):
        cfg = write_config(tmp_path, users=60, trials=2)
        out = str(tmp_path / "out")
        main(["simulate", "--config", cfg, "--out", out])
        return out

    def test_cross_check_passes(self, sim_out):
        assert main(["analyze", "--in", sim_out]) == 0
        analysis = json.load(open(os.path.join(sim_out, "analysis.json")))
        assert "impact" in analysis and "treatment" in analysis

    def test_idempotent(self, sim_out):
        main(["analyze", "--in", sim_out])
        first = open(os.path.join(sim_out, "analysis.json"), "rb").read()
        main(["analyze", "--in", sim_out])
        second = open(os.path.join(sim_out, "analysis.json"), "rb").read()
        assert first == second

    def test_corrupted_cell_detected(self, sim_out, capsys):
        path = os.path.join(sim_out, "groups.csv")
        lines = open(path).read().splitlines()
        cols = lines[-1].split(",")
        cols[-1] = "0.123456789"
        lines[-1] = ",".join(cols)
        open(path, "w").write("\n".join(lines) + "\n")
        assert main(["analyze", "--in", sim_out]) == 3
        assert "corruption" in capsys.readouterr().err

    def test_mixed_hashes_refused(self, sim_out, tmp_path, capsys):
        other_cfg = write_config(tmp_path, users=60, trials=2, seed=777)
        other = str(tmp_path / "other")
        main(["simulate", "--config", other_cfg, "--out", other])
        os.replace(os.path.join(other, "groups.csv"), os.path.join(sim_out, "groups.csv"))
        assert main(["analyze", "--in", sim_out]) == 3
        assert "mixed" in capsys.readouterr().err

    def test_vacuous_epsilon_converges(self, sim_out):
        main(["analyze", "--in", sim_out, "--epsilon", "1"])
        analysis = json.load(open(os.path.join(sim_out, "analysis.json")))
        assert analysis["impact"]["converged"] is True
