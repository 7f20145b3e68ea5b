import json
import subprocess
import sys

import pytest

from welfarium.cli import main
from welfarium.oracle import VerificationSummary

WORKED_CONFIG = """
[system]
kind = "table"
cells = 1
states = 2
neighborhoods = [[0]]

[system.table]
"0" = 0
"1" = 1

[run]
initial = "1"
horizon = 1
beta = 1.0

[states]
alive = "1"
dead = "0"

[spaces]
family = "explicit"
spaces = [[0]]

[hypotheses]
exprs = ["(const 0.5)", "(alive 0 1)"]
prior = "uniform"

[posterior]
space = [0]
time = 0

[compare]
state_a = "alive"
state_b = "dead"

[verify]
instances = 5
seed = 1
"""

SIMULATE_CONFIG = """
[system]
kind = "elementary"
rule = 204
width = 2

[run]
initial = "01"
horizon = 2
"""


def write_config(tmp_path, text=WORKED_CONFIG):
    path = tmp_path / "cfg.toml"
    path.write_text(text, encoding="utf-8")
    return str(path)


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestSimulate:
    def test_identity_rule_history(self, tmp_path):
        config = write_config(tmp_path, SIMULATE_CONFIG)
        out = tmp_path / "out"
        assert main(["simulate", "-c", config, "--out", str(out)]) == 0
        report = read_json(out / "simulate.json")
        assert report["states"] == ["01", "01", "01"]
        assert report["initial"] == "01"
        assert report["policy"]["horizon"] == 2

    def test_horizon_override(self, tmp_path):
        config = write_config(tmp_path, SIMULATE_CONFIG)
        out = tmp_path / "out"
        assert main(["simulate", "-c", config, "--out", str(out), "--horizon", "4"]) == 0
        report = read_json(out / "simulate.json")
        assert len(report["states"]) == 5


class TestWelfare:
    def test_worked_values_and_policy_echo(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["welfare", "-c", config, "--out", str(out)]) == 0
        report = read_json(out / "welfare.json")
        assert report["total"] == pytest.approx(1.5938454849513095, abs=1e-12)
        assert report["per_step"] == pytest.approx([0.7969227424756548] * 2, abs=1e-12)
        assert report["per_space"]["{0}"] == pytest.approx(1.5938454849513095, abs=1e-12)
        assert report["policy"]["beta"] == 1.0
        assert report["policy"]["spaces"] == ["{0}"]
        assert report["policy"]["hypotheses"][0] == {"expr": "(const 0.5)", "prior": 0.5}
        assert report["canonical_order"]
        assert report["tool"]["name"] == "welfarium"

    def test_csv_format(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["welfare", "-c", config, "--out", str(out), "--format", "both"]) == 0
        lines = (out / "welfare.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "i,space,subtotal"
        assert len(lines) == 3
        assert lines[1].startswith("0,{0},0.796922742475654")
        assert lines[2].startswith("1,{0},0.796922742475654")

    def test_csv_only_skips_json(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["welfare", "-c", config, "--out", str(out), "--format", "csv"]) == 0
        assert (out / "welfare.csv").exists()
        assert not (out / "welfare.json").exists()

    def test_byte_identical_reruns(self, tmp_path):
        config = write_config(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["welfare", "-c", config, "--out", str(out_a), "--format", "both"]) == 0
        assert main(["welfare", "-c", config, "--out", str(out_b), "--format", "both"]) == 0
        assert (out_a / "welfare.json").read_bytes() == (out_b / "welfare.json").read_bytes()
        assert (out_a / "welfare.csv").read_bytes() == (out_b / "welfare.csv").read_bytes()

    def test_threads_do_not_change_bytes(self, tmp_path):
        config = write_config(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["welfare", "-c", config, "--out", str(out_a)]) == 0
        assert main(["welfare", "-c", config, "--out", str(out_b), "--threads", "4"]) == 0
        assert (out_a / "welfare.json").read_bytes() == (out_b / "welfare.json").read_bytes()

    def test_beta_override_changes_policy_echo(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["welfare", "-c", config, "--out", str(out), "--beta", "0.0"]) == 0
        report = read_json(out / "welfare.json")
        assert report["policy"]["beta"] == 0.0
        # beta = 0 collapses the posterior to the prior
        assert report["total"] == pytest.approx(2 * (0.5 * 0.5 + 0.5 * 1.0), abs=1e-12)


class TestPosterior:
    def test_worked_table(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["posterior", "-c", config, "--out", str(out)]) == 0
        report = read_json(out / "posterior.json")
        assert report["event"] == {"space": "{0}", "structure": "{0:1}", "time": 0}
        assert report["evidence"] == pytest.approx(0.6155292893150024, abs=1e-12)
        rows = report["rows"]
        assert rows[0]["posterior"] == pytest.approx(0.4061545150486907, abs=1e-12)
        assert rows[1]["posterior"] == pytest.approx(0.5938454849513094, abs=1e-12)
        assert rows[1]["likelihood"] == pytest.approx(0.7310585786300049, abs=1e-12)


class TestCompare:
    def test_named_states_via_flags(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        code = main(
            ["compare", "-c", config, "--out", str(out), "--state-a", "alive", "--state-b", "dead"]
        )
        assert code == 0
        report = read_json(out / "compare.json")
        assert report["verdict"] == "better"
        assert report["difference"] == pytest.approx(0.9436008940055283, abs=1e-9)
        assert report["welfare_a"] == pytest.approx(1.5938454849513095, abs=1e-12)
        assert report["welfare_b"] == pytest.approx(0.6502445909457811, abs=1e-9)

    def test_literal_states_from_config(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["compare", "-c", config, "--out", str(out)]) == 0
        report = read_json(out / "compare.json")
        assert report["state_a"] == "alive"
        assert report["verdict"] == "better"

    def test_swapped_states_flip_verdict(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        code = main(
            ["compare", "-c", config, "--out", str(out), "--state-a", "dead", "--state-b", "alive"]
        )
        assert code == 0
        assert read_json(out / "compare.json")["verdict"] == "worse"

    def test_trace_included_when_configured(self, tmp_path):
        config = write_config(
            tmp_path, WORKED_CONFIG.replace('state_b = "dead"', 'state_b = "dead"\ntrace = true')
        )
        out = tmp_path / "out"
        assert main(["compare", "-c", config, "--out", str(out)]) == 0
        report = read_json(out / "compare.json")
        assert report["partial_sums"][-1] == report["difference"]


class TestEnumerateHypotheses:
    def test_enumerated_list_with_priors(self, tmp_path):
        config = write_config(
            tmp_path,
            WORKED_CONFIG.replace(
                'exprs = ["(const 0.5)", "(alive 0 1)"]\nprior = "uniform"',
                'source = "enumerate"\nmax_nodes = 1\noperators = ["const", "alive"]\n'
                "const_values = [0.0, 0.5, 1.0]\n"
                'prior = "uniform"',
            ),
        )
        out = tmp_path / "out"
        assert main(["enumerate-hypotheses", "-c", config, "--out", str(out)]) == 0
        report = read_json(out / "enumerate-hypotheses.json")
        assert report["count"] == 5
        assert [h["expr"] for h in report["hypotheses"]] == [
            "(alive 0 0)",
            "(alive 0 1)",
            "(const 0)",
            "(const 0.5)",
            "(const 1)",
        ]
        assert all(h["prior"] == pytest.approx(0.2) for h in report["hypotheses"])
        assert all(h["description_length"] == 1 for h in report["hypotheses"])


class TestVerify:
    def test_small_suite_passes(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["verify", "-c", config, "--out", str(out)]) == 0
        report = read_json(out / "verify.json")
        assert report["passed"] is True
        assert report["instances"] == 5
        assert report["max_posterior_deviation"] <= 1e-10

    def test_mismatch_exit_code(self, tmp_path, monkeypatch):
        import welfarium.cli as cli_module

        def fake_verification(instances, seed):
            return VerificationSummary(
                instances=instances,
                posterior_tolerance=1e-10,
                welfare_tolerance=1e-9,
                max_posterior_deviation=1.0,
                failures=["instance 0: posterior deviation 1.0e0 exceeds 1e-10"],
            )

        monkeypatch.setattr(cli_module, "run_verification", fake_verification)
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["verify", "-c", config, "--out", str(out)]) == 3
        assert read_json(out / "verify.json")["passed"] is False

    def test_seed_override_changes_report(self, tmp_path):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["verify", "-c", config, "--out", str(out), "--seed", "42"]) == 0
        assert read_json(out / "verify.json")["seed"] == 42


class TestErrors:
    def test_unknown_top_level_key(self, tmp_path, capsys):
        config = write_config(tmp_path, SIMULATE_CONFIG + "\n[banana]\nx = 1\n")
        assert main(["simulate", "-c", config, "--out", str(tmp_path)]) == 1
        assert "banana" in capsys.readouterr().err

    def test_unknown_section_key(self, tmp_path, capsys):
        config = write_config(tmp_path, SIMULATE_CONFIG + "\n[output]\nfrmt = \"json\"\n")
        assert main(["simulate", "-c", config, "--out", str(tmp_path)]) == 1
        assert "output.frmt" in capsys.readouterr().err

    def test_missing_required_key(self, tmp_path, capsys):
        text = '[system]\nkind = "elementary"\nrule = 204\n\n[run]\nhorizon = 1\ninitial = "0"\n'
        config = write_config(tmp_path, text)
        assert main(["simulate", "-c", config, "--out", str(tmp_path)]) == 1
        err = capsys.readouterr().err
        assert "system.width" in err

    def test_bad_rule_number(self, tmp_path, capsys):
        config = write_config(tmp_path, SIMULATE_CONFIG.replace("rule = 204", "rule = 300"))
        assert main(["simulate", "-c", config, "--out", str(tmp_path)]) == 1
        assert "0..255" in capsys.readouterr().err

    def test_bad_expression_names_key(self, tmp_path, capsys):
        config = write_config(tmp_path, WORKED_CONFIG.replace("(const 0.5)", "(const 2.5)"))
        assert main(["welfare", "-c", config, "--out", str(tmp_path)]) == 1
        err = capsys.readouterr().err
        assert "hypotheses.exprs[0]" in err

    def test_expression_beyond_horizon_names_key(self, tmp_path, capsys):
        config = write_config(tmp_path, WORKED_CONFIG.replace("(alive 0 1)", "(alive 0 9)"))
        assert main(["welfare", "-c", config, "--out", str(tmp_path)]) == 1
        assert "hypotheses.exprs[1]" in capsys.readouterr().err

    def test_bad_initial_state(self, tmp_path, capsys):
        config = write_config(tmp_path, SIMULATE_CONFIG.replace('initial = "01"', 'initial = "0X"'))
        assert main(["simulate", "-c", config, "--out", str(tmp_path)]) == 1
        assert "run.initial" in capsys.readouterr().err

    def test_missing_section_for_command(self, tmp_path, capsys):
        config = write_config(tmp_path, SIMULATE_CONFIG)
        assert main(["welfare", "-c", config, "--out", str(tmp_path)]) == 1
        assert "spaces" in capsys.readouterr().err

    def test_cap_error_is_a_runtime_error(self, tmp_path, capsys):
        text = """
[system]
kind = "elementary"
rule = 204
width = 8

[run]
initial = "10000000"
horizon = 1

[spaces]
family = "all_up_to_size"
k = 5

[hypotheses]
exprs = ["(const 0.5)"]
"""
        config = write_config(tmp_path, text)
        assert main(["welfare", "-c", config, "--out", str(tmp_path)]) == 2
        assert "cap" in capsys.readouterr().err.lower()

    def test_unreadable_config(self, tmp_path, capsys):
        assert main(["simulate", "-c", str(tmp_path / "missing.toml")]) == 1
        assert "cannot read" in capsys.readouterr().err

    def test_invalid_toml(self, tmp_path, capsys):
        config = write_config(tmp_path, "not [valid toml")
        assert main(["simulate", "-c", config]) == 1
        assert "invalid TOML" in capsys.readouterr().err


def test_module_entry_point_reports_version():
    result = subprocess.run(
        [sys.executable, "-m", "welfarium", "--version"], capture_output=True, text=True
    )
    assert result.returncode == 0
    assert result.stdout.strip() == "welfarium 0.1.0"
