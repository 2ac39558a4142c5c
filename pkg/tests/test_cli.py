"""End-to-end command line tests, run in process through main()."""

import json
from pathlib import Path

import pytest

from psolve.cli import main
from psolve.oracle import CheckLine
from psolve.parser import parse_program
from psolve.program import validate

DATA = Path(__file__).resolve().parent.parent / "data"

ALARM = str(DATA / "alarm.json")
ASIA = str(DATA / "asia.json")
UMBRELLA_PSL = str(DATA / "umbrella.psl")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestAnalyze:
    def test_closed_form(self, capsys):
        code, out, _ = run(capsys, "analyze", UMBRELLA_PSL, "--goal", "R")
        assert code == 0
        assert "goal: E[R]" in out
        assert "closed_form:" in out
        assert "(2/5)^n" in out

    def test_at_step(self, capsys):
        code, out, _ = run(capsys, "analyze", UMBRELLA_PSL, "--goal", "R",
                           "--at", "0")
        assert code == 0
        assert "exact: 1" in out

    def test_limit(self, capsys):
        code, out, _ = run(capsys, "analyze", UMBRELLA_PSL, "--goal", "R",
                           "--limit")
        assert code == 0
        assert "exact: 1/2" in out
        assert "decimal: 0.500000" in out

    def test_second_moment_of_indicator(self, capsys):
        # R is 0/1 so the second moment equals the first
        _, first, _ = run(capsys, "analyze", UMBRELLA_PSL, "--goal", "R",
                          "--limit")
        _, second, _ = run(capsys, "analyze", UMBRELLA_PSL, "--goal", "R",
                           "--k", "2", "--limit")
        assert "exact: 1/2" in second
        assert "E[(R)^2]" in second

    def test_param_binding(self, capsys, tmp_path):
        prog = tmp_path / "sens.psl"
        prog.write_text(
            "param r in (3/10, 1);\n"
            "support R 2;\n"
            "R := 1;\n"
            "while true {\n"
            "    R := bern(r)*R + bern(3/10)*(-R + 1);\n"
            "}\n"
        )
        code, out, _ = run(capsys, "analyze", str(prog), "--goal", "R",
                           "--limit", "--param", "r=1/2")
        assert code == 0
        assert "exact: 3/8" in out
        assert "decimal: 0.375000" in out

    def test_at_and_limit_conflict(self, capsys):
        code, _, err = run(capsys, "analyze", UMBRELLA_PSL, "--goal", "R",
                           "--at", "3", "--limit")
        assert code == 1
        assert "mutually exclusive" in err

    def test_bad_moment_order(self, capsys):
        code, _, err = run(capsys, "analyze", UMBRELLA_PSL, "--goal", "R",
                           "--k", "0")
        assert code == 1
        assert "positive" in err

    def test_unknown_goal_variable(self, capsys):
        code, _, err = run(capsys, "analyze", UMBRELLA_PSL, "--goal", "Z")
        assert code == 1
        assert "error:" in err

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "analyze", "no_such.psl", "--goal", "R")
        assert code == 1
        assert "cannot read" in err

    def test_bad_param_syntax(self, capsys):
        code, _, err = run(capsys, "analyze", UMBRELLA_PSL, "--goal", "R",
                           "--param", "r")
        assert code == 1
        assert "NAME=VALUE" in err


class TestCompile:
    def test_stdout_program_is_valid(self, capsys):
        code, out, _ = run(capsys, "compile-bn", ALARM)
        assert code == 0
        validate(parse_program(out))

    def test_output_file(self, capsys, tmp_path):
        target = tmp_path / "alarm.psl"
        code, out, _ = run(capsys, "compile-bn", ALARM, "-o", str(target))
        assert code == 0
        assert out == ""
        validate(parse_program(target.read_text()))

    def test_cyclic_network(self, capsys):
        code, _, err = run(capsys, "compile-bn", str(DATA / "bad_cycle.json"))
        assert code == 1
        assert "cycle" in err

    def test_missing_network(self, capsys):
        code, _, err = run(capsys, "compile-bn", "no_such.json")
        assert code == 1
        assert "cannot read" in err


class TestQuery:
    SPEC = '{"query": "conditional", "target": "B", "evidence": {"A": 1}}'

    def test_inline_spec(self, capsys):
        code, out, _ = run(capsys, "query", ALARM, "--spec", self.SPEC)
        assert code == 0
        assert "decimal: 0.373551" in out

    def test_spec_from_file(self, capsys, tmp_path):
        spec = tmp_path / "q.json"
        spec.write_text(self.SPEC)
        code, out, _ = run(capsys, "query", ALARM, "--spec", str(spec))
        assert code == 0
        assert "exact: 156670/419407" in out

    def test_json_output(self, capsys):
        code, out, _ = run(capsys, "query", ALARM, "--spec", self.SPEC,
                           "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["query"] == "conditional"
        assert doc["decimal"] == "0.373551"
        assert doc["assumptions"] == []

    def test_digits_flag(self, capsys):
        code, out, _ = run(capsys, "query", ALARM, "--spec", self.SPEC,
                           "--digits", "3")
        assert code == 0
        assert "decimal: 0.374" in out

    def test_param_binding(self, capsys):
        code, out, _ = run(
            capsys, "query", str(DATA / "alarm_sens.json"),
            "--spec", self.SPEC, "--param", "b=1/1000", "--param", "q=1/500")
        assert code == 0
        assert "decimal: 0.373551" in out

    def test_invalid_spec_json(self, capsys):
        code, _, err = run(capsys, "query", ALARM, "--spec", "{not json")
        assert code == 1
        assert "not valid JSON" in err

    def test_unknown_query_kind(self, capsys):
        code, _, err = run(capsys, "query", ALARM, "--spec",
                           '{"query": "marginalize"}')
        assert code == 1
        assert "unknown query kind" in err


class TestSamples:
    def test_conjunction_evidence(self, capsys):
        code, out, _ = run(capsys, "samples", ASIA,
                           "--evidence", "Asia=1,Lung=1", "--digits", "4")
        assert code == 0
        assert "exact: 20000/11" in out
        assert "decimal: 1818.1818" in out

    def test_json_evidence(self, capsys):
        code, out, _ = run(capsys, "samples", ASIA,
                           "--evidence", '{"Asia": 1, "Lung": 1}')
        assert code == 0
        assert "probability: 11/20000" in out

    def test_bad_evidence_item(self, capsys):
        code, _, err = run(capsys, "samples", ASIA, "--evidence", "Asia")
        assert code == 1
        assert "NAME=VALUE" in err


class TestFilter:
    def test_two_observations(self, capsys):
        code, out, _ = run(capsys, "filter", str(DATA / "umbrella_filter.json"),
                           "--obs", "U=1; U=1")
        assert code == 0
        assert "step 1:" in out
        assert "0.818182" in out
        assert "0.883357" in out

    def test_json_obs_list(self, capsys):
        code, out, _ = run(capsys, "filter", str(DATA / "umbrella_filter.json"),
                           "--obs", '[{"U": 1}, {"U": 1}]', "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["query"] == "filter"
        assert len(doc["steps"]) == 2

    def test_static_network_rejected(self, capsys):
        code, _, err = run(capsys, "filter", ALARM, "--obs", "U=1")
        assert code == 1
        assert "not a dynamic network" in err


class TestCheck:
    def test_alarm_passes(self, capsys):
        code, out, _ = run(capsys, "check", ALARM)
        assert code == 0
        assert "failed: 0" in out
        assert "FAIL" not in out

    def test_monte_carlo_lines(self, capsys):
        code, out, _ = run(capsys, "check", ALARM, "--mc", "2000", "--seed", "7")
        assert code == 0
        assert "MC E[" in out

    def test_bad_mc_count(self, capsys):
        code, _, err = run(capsys, "check", ALARM, "--mc", "0")
        assert code == 1
        assert "positive" in err

    def test_internal_failure_exits_2(self, capsys, monkeypatch):
        def broken(bn, mc_samples=None, seed=0, cap=None):
            return [CheckLine("E[B]", "1/2", "1/3", False)]

        monkeypatch.setattr("psolve.oracle.differential_check", broken)
        code, out, err = run(capsys, "check", ALARM)
        assert code == 2
        assert "FAIL" in out
        assert "internal check failed" in err


class TestTopLevel:
    def test_no_subcommand(self, capsys):
        code, _, err = run(capsys)
        assert code == 1
        assert "subcommand" in err

    def test_unknown_subcommand(self, capsys):
        code, _, err = run(capsys, "solve", ALARM)
        assert code == 1
        assert "error:" in err
