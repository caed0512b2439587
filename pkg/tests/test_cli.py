import json

import pytest

from shillproof.cli import EXIT_CAP, EXIT_CONFIG, EXIT_MISMATCH, EXIT_OK, main, parse_range, parse_shill_sets
from shillproof.config import ConfigError


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def english_report(tmp_path, capsys):
    path = tmp_path / "w.json"
    code, _, _ = run(capsys, "check", "--dist", "uniform3", "--auction", "english", "--strong-sp", "--json", "--out", str(path))
    assert code == EXIT_OK
    return path


class TestParsers:
    def test_ranges(self):
        assert parse_range("3..5") == [3, 4, 5]
        assert parse_range("3,7") == [3, 7]
        with pytest.raises(ConfigError):
            parse_range("three")

    def test_shill_sets(self):
        assert parse_shill_sets("all") == "all"
        assert parse_shill_sets("1;0,1") == [[1], [0, 1]]


class TestCheck:
    def test_table_output(self, capsys):
        code, out, _ = run(capsys, "check", "--dist", "uniform3", "--auction", "dutch", "--strong-sp", "--weak-sp")
        assert code == EXIT_OK and "strong-sp" in out

    def test_expectation_mismatch(self, capsys):
        code, _, _ = run(capsys, "check", "--dist", "uniform3", "--auction", "english", "--weak-sp", "--expect", "fail")
        assert code == EXIT_MISMATCH

    def test_expectation_met(self, capsys):
        code, _, _ = run(capsys, "check", "--dist", "uniform3", "--auction", "english", "--strong-sp", "--expect", "fail")
        assert code == EXIT_OK

    def test_state_cap(self, capsys):
        code, _, err = run(capsys, "check", "--dist", "uniform4", "--auction", "english", "-n", "3", "--weak-sp", "--state-cap", "10")
        assert code == EXIT_CAP and "exceeded" in err

    def test_malformed_pmf(self, tmp_path, capsys):
        bad = tmp_path / "d.json"
        bad.write_text(json.dumps({"atoms": ["0", "1"], "pmf": ["1/2", "2/5"]}))
        code, _, err = run(capsys, "check", "--dist", str(bad), "--auction", "dutch")
        assert code == EXIT_CONFIG and "9/10" in err

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"distribution": "uniform3", "auction": "dutch", "colour": "red"}))
        code, _, err = run(capsys, "check", "--config", str(cfg))
        assert code == EXIT_CONFIG and "run config" in err

    def test_bad_shill_set(self, capsys):
        code, _, _ = run(capsys, "check", "--dist", "uniform3", "--auction", "dutch", "--weak-sp", "--shill-set", "5")
        assert code == EXIT_CONFIG

    def test_csv(self, capsys):
        code, out, _ = run(capsys, "check", "--dist", "uniform3", "--auction", "dutch", "--revenue", "--csv")
        assert code == EXIT_OK and out.splitlines()[0].count(",") >= 2

    def test_config_file_with_output(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        dest = tmp_path / "report.json"
        cfg.write_text(json.dumps({
            "distribution": "F2", "auction": "hybrid", "checks": ["weak-sp"], "shill_sets": [[1]],
            "expect": "fail", "output": {"format": "json", "path": str(dest)},
        }))
        code, _, _ = run(capsys, "check", "--config", str(cfg))
        report = json.loads(dest.read_text())
        assert code == EXIT_OK and report["results"][0]["verdict"]["holds"] is False


class TestReplay:
    def test_round_trip(self, english_report, capsys):
        code, out, _ = run(capsys, "replay", str(english_report))
        assert code == EXIT_OK
        assert "deviation revenue 2 vs truthful 1" in out and "replayed gap 1 matches" in out

    def test_no_witness(self, tmp_path, capsys):
        path = tmp_path / "d.json"
        run(capsys, "check", "--dist", "uniform3", "--auction", "dutch", "--strong-sp", "--json", "--out", str(path))
        code, out, _ = run(capsys, "replay", str(path))
        assert code == EXIT_OK and "no witness exists" in out

    def test_stale_hash(self, english_report, capsys):
        obj = json.loads(english_report.read_text())
        obj["config"]["auction"]["reserve_index"] = 0
        english_report.write_text(json.dumps(obj))
        code, _, err = run(capsys, "replay", str(english_report))
        assert code == EXIT_CONFIG and "stale" in err

    def test_tampered_gap(self, english_report, capsys):
        obj = json.loads(english_report.read_text())
        obj["results"][0]["verdict"]["gap"] = "5"
        english_report.write_text(json.dumps(obj))
        code, out, _ = run(capsys, "replay", str(english_report))
        assert code == EXIT_MISMATCH and "differs" in out

    def test_not_a_report(self, tmp_path, capsys):
        path = tmp_path / "x.json"
        path.write_text("[]")
        code, _, _ = run(capsys, "replay", str(path))
        assert code == EXIT_CONFIG


class TestReproduce:
    def test_qratio(self, capsys):
        code, out, _ = run(capsys, "reproduce", "qratio", "--m", "3..8")
        assert code == EXIT_OK and "2/7" in out

    def test_unknown_id(self, capsys):
        code, _, err = run(capsys, "reproduce", "nope")
        assert code == EXIT_CONFIG and "unknown scenario" in err

    def test_json(self, capsys):
        code, out, _ = run(capsys, "reproduce", "uniform-revenue-split", "--json")
        assert code == EXIT_OK and json.loads(out)


class TestSuite:
    def test_filter(self, capsys):
        code, out, _ = run(capsys, "suite", "--filter", "negative-witnesses", "--json")
        data = json.loads(out)
        assert code == EXIT_OK and [s["id"] for s in data["scenarios"]] == ["negative-witnesses"]
