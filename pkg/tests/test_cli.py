import json

import pytest

from bogotool.cli import main
from bogotool.report import read_jsonl


def run(tmp_path, *argv, name="out.jsonl"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, (read_jsonl(out) if out.exists() else [])


def test_young_passes(tmp_path):
    code, recs = run(tmp_path, "verify", "young", "--p", "1.5", "--delta", "0.1", "--samples", "2000")
    assert code == 0 and recs and all(r["pass"] for r in recs)
    assert all(r["schema"] == 1 for r in recs)


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["verify", "young", "--p", "abc"]) == 2
    assert main(["verify", "young", "--p", "0.5"]) == 2
    assert main(["nonsense"]) == 2
    assert main(["bogovskii", "solve", "--f", "no-such-preset", "--grid", "8"]) == 2


def test_failing_check_exits_1(tmp_path):
    code, recs = run(tmp_path, "cz", "check", "--kernel", "noncancel", "--triples", "2000")
    assert code == 1
    cz2 = next(r for r in recs if r["check"] == "cz2")
    assert not cz2["pass"]


def test_reports_are_deterministic(tmp_path):
    argv = ("verify", "hammer", "--p", "1.5", "--samples", "1000", "--seed", "7")
    run(tmp_path, *argv, name="a.jsonl")
    run(tmp_path, *argv, name="b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_timing_is_opt_in(tmp_path):
    _, recs = run(tmp_path, "verify", "young", "--samples", "500", "--timing")
    assert all("runtime_s" in r for r in recs) or all("runtime" in json.dumps(r) for r in recs)
    _, recs = run(tmp_path, "verify", "young", "--samples", "500", name="plain.jsonl")
    assert all("runtime" not in json.dumps(r) for r in recs)


def test_config_file_sets_defaults(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[whitney]\nshape = square\nmin-level = -6\nsamples = 2000\n")
    code, recs = run(tmp_path, "whitney", "--config", str(cfg), "--min-coverage", "0.9")
    assert code == 0
    assert any("square" in json.dumps(r) for r in recs)
    # the command line still wins
    code, recs = run(tmp_path, "whitney", "--config", str(cfg), "--shape", "ball", "--min-coverage", "0.9",
                     name="b.jsonl")
    assert any("ball" in json.dumps(r) for r in recs)


@pytest.mark.parametrize("text", ["[nope]\nx = 1\n", "[whitney]\nbogus = 1\n", "[whitney]\nmin-level = 5\n"])
def test_bad_config_exits_2(tmp_path, text):
    cfg = tmp_path / "c.ini"
    cfg.write_text(text)
    assert main(["whitney", "--config", str(cfg)]) == 2


def test_whitney_csv(tmp_path):
    csv_path = tmp_path / "cubes.csv"
    code, _ = run(tmp_path, "whitney", "--min-level", "-5", "--samples", "1000", "--min-coverage", "0.5",
                  "--csv", str(csv_path))
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert len(lines) > 10 and len(lines[1].split(",")) == 3


def test_bogovskii_and_pstokes_commands(tmp_path):
    save = tmp_path / "bf.csv"
    code, recs = run(tmp_path, "bogovskii", "solve", "--grid", "16", "--f", "dx", "--save", str(save))
    assert code == 0 and save.exists()
    code, recs = run(tmp_path, "pstokes", "solve", "--p", "1.8", "--grid", "12", name="ps.jsonl")
    assert code == 0 and recs
    code = main(["pstokes", "solve", "--p", "1.8", "--grid", "12", "--report", str(tmp_path / "r.jsonl")])
    assert code == 0 and (tmp_path / "r.jsonl").exists()
