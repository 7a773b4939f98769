import subprocess
import sys

import pytest
from conftest import ROOT

from labbench.cli import main
from labbench.scenario import ScenarioSpec, run_scenario
from labbench.stats import read_csv

FIG5 = ROOT / "scenarios" / "figure5"
CORPUS = ROOT / "scenarios" / "corpus"
GOLDEN = ROOT / "tests" / "golden" / "poisson_rate2_seed42.txt"


def fig5_args(out, *extra):
    return ["run", "--topology", str(FIG5 / "topology.cfg"), "--workload", str(FIG5 / "workload.txt"),
            "--until", "60", "--out", str(out), *extra]


def test_run_writes_three_artifacts(tmp_path, capsys):
    assert main(fig5_args(tmp_path / "out")) == 0
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["events.log", "stats.csv", "summary.txt"]
    out = capsys.readouterr().out
    assert out.startswith("conservation: PASS")
    summary = (tmp_path / "out" / "summary.txt").read_text()
    assert "flow:*" in summary and summary.rstrip().endswith(out.strip())


def test_run_missing_topology_exits_1(tmp_path, capsys):
    missing = tmp_path / "nope.cfg"
    code = main(["run", "--topology", str(missing), "--workload", str(FIG5 / "workload.txt"),
                 "--until", "1", "--out", str(tmp_path / "o")])
    assert code == 1
    assert str(missing) in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_run_bad_until_exits_1(tmp_path):
    assert main(fig5_args(tmp_path / "o")[:-4] + ["--until", "0", "--out", str(tmp_path / "o")]) == 1


def test_bad_flag_exits_1(capsys):
    assert main(["gen", "--fixed", "10", "--interval", "1", "--count", "-1"]) == 1
    assert "--count" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bogus"])
    assert exc.value.code == 1


def test_gen_fixed_lines(capsys):
    assert main(["gen", "--fixed", "1000", "--interval", "1", "--count", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3
    assert [line.split()[0] for line in lines] == ["t=0.0", "t=1.0", "t=2.0"]
    assert all("size=1000" in line for line in lines)


def test_gen_matches_frozen_golden(tmp_path):
    out = tmp_path / "w.txt"
    code = main(["gen", "--empirical", str(FIG5 / "sizes.txt"), "--poisson", "2.0",
                 "--count", "100", "--seed", "42", "--out", str(out)])
    assert code == 0
    assert out.read_text() == GOLDEN.read_text()


def test_validate_prints_routing_tables(capsys):
    assert main(["validate", str(FIG5 / "topology.cfg")]) == 0
    out = capsys.readouterr().out
    assert "R1" in out and "192.168.100.0/24" in out


def test_validate_duplicate_ip(capsys):
    assert main(["validate", str(CORPUS / "dup_ip.cfg")]) == 1
    err = capsys.readouterr()
    text = err.out + err.err
    assert "R1:" in text and "R2:" in text


def test_validate_empty_warns(capsys):
    assert main(["validate", str(CORPUS / "empty.cfg")]) == 0
    captured = capsys.readouterr()
    assert "empty model" in captured.out + captured.err


def test_cli_matches_library_and_is_deterministic(tmp_path):
    assert main(fig5_args(tmp_path / "a", "--seed", "3")) == 0
    result = run_scenario(ScenarioSpec(FIG5 / "topology.cfg", FIG5 / "workload.txt", 60.0, tmp_path / "b", seed=3))
    assert result.status == 0
    for name in ("stats.csv", "events.log", "summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    exported = read_csv(tmp_path / "a" / "stats.csv")
    expected = [(round(s.time, 6), s.object, s.metric, round(s.value, 6)) for s in result.engine.stats.samples]
    assert [tuple(s) for s in exported] == expected


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "labbench", "gen", "--fixed", "10", "--interval", "1", "--count", "2"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and len(proc.stdout.splitlines()) == 2
