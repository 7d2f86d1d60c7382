import json
import subprocess
import sys

import pytest

from abctorus.cli import main
from abctorus.pipeline import (ConfigError, RunConfig, compare_runs,
                               load_config, run_build, verify_paths,
                               worker_count, write_artifacts)


def small_config(**kw):
    base = dict(out_dir="unused", plots=False, mc_samples=2000,
                orbit_samples=100, jacobian_points=200)
    base.update(kw)
    return RunConfig(**base)


def test_config_file_with_overrides(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text(
        'stages = 1\nsigma_size = 2\nk_schedule = [2]\n'
        'l_schedule = [4]\ns_schedule = [2, 2]\nrho = 0.2  # strip width\n'
        'out_dir = "somewhere"\n', encoding="utf-8")
    cfg = load_config(cfg_file)
    assert cfg.stages == 1 and cfg.rho == 0.2 and cfg.l_schedule == (4,)
    cfg = load_config(cfg_file, {"rho": 0.3})
    assert cfg.rho == 0.3


def test_config_rejects_unknown_keys(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("stagez = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(cfg_file)


def test_config_rejects_bad_schedules():
    with pytest.raises(ConfigError):
        RunConfig(stages=2, k_schedule=(2,), l_schedule=(2, 2),
                  s_schedule=(2, 2, 2))
    with pytest.raises(ConfigError):
        RunConfig(l_schedule=(1, 2))


def test_default_build_passes(tmp_path):
    res = run_build(small_config(out_dir=str(tmp_path)))
    assert res.report["all_pass"]
    assert res.report["stages"][0]["roundtrip"]["ok"]
    assert res.report["requirements"]["all_pass"]


def test_auto_build_reports_l_star(tmp_path):
    res = run_build(small_config(l_schedule=("auto", "auto")))
    assert res.report["all_pass"]
    for sr in res.report["stages"]:
        assert sr["l_star"] is not None
        assert sr["l_star"]["found"]
        assert sr["analytic"]["cauchy_ok"]


def test_minimal_config_all_verdicts_pass(tmp_path):
    cfg = RunConfig(stages=1, sigma_size=2, k_schedule=(2,), l_schedule=(2,),
                    s_schedule=(2, 2), out_dir=str(tmp_path), plots=False)
    res = run_build(cfg)
    assert res.report["all_pass"]


def test_artifacts_and_determinism(tmp_path):
    cfg = small_config(out_dir=str(tmp_path / "a"), plots=False)
    write_artifacts(run_build(cfg), tmp_path / "a")
    write_artifacts(run_build(cfg), tmp_path / "b")
    for name in ("report.json", "analytic_stage2.json", "params.json"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()
    for name in ("params.json", "words_stage2.txt", "stage1.json",
                 "analytic_stage2.json", "trace_stage1.csv"):
        assert (tmp_path / "a" / name).exists()


def test_verify_round_trip(tmp_path):
    cfg = small_config(out_dir=str(tmp_path))
    write_artifacts(run_build(cfg), tmp_path)
    report = verify_paths([str(tmp_path)])
    assert report["all_pass"]


def test_verify_locates_corruption(tmp_path):
    cfg = small_config(out_dir=str(tmp_path))
    write_artifacts(run_build(cfg), tmp_path)
    wf = tmp_path / "words_stage2.txt"
    lines = wf.read_text(encoding="utf-8").splitlines()
    parts = lines[1].split()
    parts[37] = "e" if parts[37] != "e" else "b"
    lines[1] = " ".join(parts)
    wf.write_text("\n".join(lines) + "\n", encoding="utf-8")
    report = verify_paths([str(tmp_path)])
    assert not report["all_pass"]
    stage2 = [s for s in report["results"][0]["stages"] if s["n"] == 2][0]
    assert not stage2["name_match"]["ok"]
    assert stage2["name_match"]["witnesses"][0] == [0, 37]


def test_compare_identical_runs(tmp_path):
    cfg = small_config(out_dir=str(tmp_path / "a"))
    write_artifacts(run_build(cfg), tmp_path / "a")
    write_artifacts(run_build(cfg), tmp_path / "b")
    rep = compare_runs(tmp_path / "a", tmp_path / "b")
    assert rep["shared_prefix"] == 3
    assert rep["d_rho"] == 0.0
    assert rep["ok"]


def test_compare_disjoint_sequences(tmp_path):
    write_artifacts(run_build(small_config(out_dir="x", seed=0)),
                    tmp_path / "a")
    write_artifacts(run_build(small_config(out_dir="x", seed=9,
                                           k_schedule=(4, 2),
                                           s_schedule=(2, 2, 2))),
                    tmp_path / "b")
    rep = compare_runs(tmp_path / "a", tmp_path / "b")
    assert rep["shared_prefix"] >= 1  # stage 0 always shared (the alphabet)
    assert "d_rho" in rep


def test_cli_build_verify_exit_codes(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["build", "--out", str(out), "--l", "2,4"])
    assert code == 0
    code = main(["verify", str(out)])
    assert code == 0
    code = main(["verify", str(tmp_path / "missing")])
    assert code == 2


def test_cli_usage_error_exit_code(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("stages = 2\nk_schedule = [2]\n", encoding="utf-8")
    assert main(["build", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("ABC_THREADS", "3")
    assert 1 <= worker_count() <= 3
    monkeypatch.setenv("ABC_THREADS", "junk")
    assert worker_count() == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "abctorus.cli", "build", "--out",
         str(tmp_path / "o"), "--stages", "1", "--l", "3"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "PASS" in proc.stdout
