import json
import shutil
import subprocess
import sys

import pytest

from simbridge.bus import Message
from simbridge.cli import main
from simbridge.replay import ReplayStream, save

FREE_FALL_Z = -9.81 * 1e-6 * 1000 * 1001 / 2  # semi-implicit Euler after 1000 steps of 1 ms


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run_cli(capsys, "--json", *argv)
    return code, json.loads(out) if out.strip() else None, err


@pytest.fixture
def sphere_xml(tmp_path, fixtures, cache_env, capsys):
    code, _, _ = run_cli(capsys, "compile", fixtures / "sphere_drop.json", tmp_path / "sd")
    assert code == 0
    return tmp_path / "sd" / "scene.xml"


def bench_cfg(tmp_path, **kw):
    p = tmp_path / "bench.json"
    p.write_text(json.dumps({"tracked_body": "ball", "sample_interval_s": 0.5, **kw}))
    return p


# -- compile ---------------------------------------------------------------------

def test_compile_warehouse(tmp_path, fixtures, cache_env, capsys):
    code, res, _ = run_json(capsys, "compile", fixtures / "warehouse.json", tmp_path / "out")
    assert code == 0 and len(res["assets"]) == 2 and res["bodies"] == 2
    assert (tmp_path / "out" / "scene.xml").is_file()
    assert all((tmp_path / "out" / a).is_file() for a in res["assets"])


def test_compile_empty_scene(tmp_path, cache_env, capsys):
    (tmp_path / "e.json").write_text('{"actors": []}')
    code, _, _ = run_cli(capsys, "compile", tmp_path / "e.json", tmp_path / "o")
    assert code == 0
    assert "<worldbody />" in (tmp_path / "o" / "scene.xml").read_text()


def test_compile_bad_json_exit_2(tmp_path, cache_env, capsys):
    (tmp_path / "bad.json").write_text('{"actors": [\n')
    code, out, err = run_cli(capsys, "compile", tmp_path / "bad.json", tmp_path / "o")
    assert code == 2 and "bad.json:2" in err
    code, res, _ = run_json(capsys, "compile", tmp_path / "bad.json", tmp_path / "o")
    assert code == 2 and res["error"]["exit_code"] == 2


def test_compile_warm_cache_does_no_decompositions(tmp_path, fixtures, cache_env, capsys):
    shutil.copy(fixtures / "lprism.obj", tmp_path)
    (tmp_path / "s.json").write_text(json.dumps(
        {"actors": [{"id": "lp", "mesh": "lprism.obj", "physics": {"complexity": "Complex", "mobility": "Static"}}]}))
    _, first, _ = run_json(capsys, "compile", tmp_path / "s.json", tmp_path / "a")
    _, second, _ = run_json(capsys, "compile", tmp_path / "s.json", tmp_path / "b")
    assert first["decompositions"] == 1
    assert second["decompositions"] == 0 and second["cache_hits"] == 1
    assert (tmp_path / "a" / "scene.xml").read_text() == (tmp_path / "b" / "scene.xml").read_text()


def test_missing_file_is_io_error(tmp_path, cache_env, capsys):
    code, _, err = run_cli(capsys, "compile", tmp_path / "nope.json", tmp_path / "o")
    assert code == 4 and "nope.json" in err


# -- run -------------------------------------------------------------------------

def test_run_sphere_drop_final_z(tmp_path, sphere_xml, capsys):
    code, res, _ = run_json(capsys, "run", sphere_xml, "--duration", 1, "--bench", bench_cfg(tmp_path), "--out", tmp_path / "r")
    assert code == 0 and res["steps"] == 1000
    assert sorted(p.split("/")[-1] for p in res["bench_files"]) == [
        "Collisions.csv", "DistanceToGoal.csv", "GlobalPose.csv", "TimeToGoal.csv"]
    last = (tmp_path / "r" / "GlobalPose.csv").read_text().splitlines()[-1].split(",")
    assert float(last[0]) == 1.0
    assert abs(float(last[3]) - FREE_FALL_Z) <= 1e-9
    summary = json.loads((tmp_path / "r" / "summary.json").read_text())
    assert abs(summary["bodies"]["ball"]["pos"][2] - (-4.909905)) <= 1e-9


def test_run_duration_zero(tmp_path, sphere_xml, capsys):
    code, res, _ = run_json(capsys, "run", sphere_xml, "--duration", 0, "--out", tmp_path / "r")
    assert code == 0 and res["steps"] == 0


def test_run_records_streams(tmp_path, fixtures, capsys):
    code, res, _ = run_json(capsys, "run", fixtures / "rover.xml", "--duration", 0.2, "--record", tmp_path / "rec",
                            "--out", tmp_path / "r")
    assert code == 0 and res["replay_files"]
    code, rep, _ = run_json(capsys, "replay", tmp_path / "rec", "--flat-out")
    assert code == 0 and rep["total"] == sum(rep["counts"].values())
    # 1 kHz sensors give 201 samples over 0.2 s; the 200 Hz imu gives 41
    assert rep["counts"] == {"/sensors/bump": 201, "/sensors/imu0": 41, "/sensors/pose": 201}


def test_run_divergence_exit_3(tmp_path, fixtures, cache_env, capsys):
    scene = json.loads((fixtures / "sphere_drop.json").read_text())
    scene["gravity"] = [0, 0, -1e308]
    (tmp_path / "div.json").write_text(json.dumps(scene))
    assert run_cli(capsys, "compile", tmp_path / "div.json", tmp_path / "d")[0] == 0
    with pytest.warns(RuntimeWarning):
        code, res, err = run_json(capsys, "run", tmp_path / "d" / "scene.xml", "--duration", 3, "--out", tmp_path / "r")
    assert code == 3 and res["error"]["body"] == "ball" and "ball" in err


def test_run_bad_bench_body(tmp_path, sphere_xml, capsys):
    cfg = tmp_path / "b.json"
    cfg.write_text('{"tracked_body": "ghost"}')
    code, _, err = run_cli(capsys, "run", sphere_xml, "--bench", cfg, "--out", tmp_path / "r")
    assert code == 2 and "ghost" in err


def test_config_file_defaults_and_flag_precedence(tmp_path, sphere_xml, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"duration": 0.25, "out": str(tmp_path / "r")}))
    code, res, _ = run_json(capsys, "--config", cfg, "run", sphere_xml)
    assert code == 0 and res["steps"] == 250
    code, res, _ = run_json(capsys, "--config", cfg, "run", sphere_xml, "--duration", 0.1)
    assert res["steps"] == 100
    cfg.write_text('{"durration": 1}')
    assert run_cli(capsys, "--config", cfg, "run", sphere_xml)[0] == 2


# -- decompose ---------------------------------------------------------------------

def test_decompose_lprism_and_cube(tmp_path, fixtures, capsys):
    code, res, _ = run_json(capsys, "decompose", fixtures / "lprism.obj", tmp_path / "lp")
    assert code == 0 and res["parts"] >= 2 and res["converged"]
    assert len(list((tmp_path / "lp").glob("part_*.obj"))) == res["parts"]
    assert json.loads((tmp_path / "lp" / "report.json").read_text())["parts"] == res["parts"]
    code, res, _ = run_json(capsys, "decompose", fixtures / "cube.obj", tmp_path / "cube")
    assert code == 0 and res["parts"] == 1


def test_decompose_open_box_exit_2(tmp_path, fixtures, capsys):
    code, _, err = run_cli(capsys, "decompose", fixtures / "open_box.obj", tmp_path / "o")
    assert code == 2 and "boundary" in err.lower()


# -- replay and eval ------------------------------------------------------------------

def test_replay_counts(tmp_path, capsys):
    data = Message.make("/s", 0, "Imu", [0, 0, 9.81, 0, 0, 0]).data
    save([ReplayStream("/sensors/a", "Imu", [(i, data) for i in range(7)]),
          ReplayStream("/sensors/b", "Imu", [(i, data) for i in range(3)])], tmp_path)
    code, out, _ = run_cli(capsys, "replay", tmp_path, "--flat-out")
    assert code == 0
    assert "counts./sensors/a: 7" in out and "counts./sensors/b: 3" in out and "total: 10" in out


def test_replay_bad_speed(tmp_path, capsys):
    assert run_cli(capsys, "replay", tmp_path, "--speed", 0)[0] == 2


def test_eval_sc(tmp_path, capsys):
    p = tmp_path / "e.json"
    p.write_text('[{"success": 1, "collisions": 0}, {"success": 1, "collisions": 1}]')
    code, res, _ = run_json(capsys, "eval", "sc", "--episodes", p)
    assert code == 0 and res["sc"] == 0.75 and res["episodes"] == 2


def test_eval_ate_identical_files(tmp_path, sphere_xml, capsys):
    run_cli(capsys, "run", sphere_xml, "--bench", bench_cfg(tmp_path, sample_interval_s=0.1), "--out", tmp_path / "r")
    csv = tmp_path / "r" / "GlobalPose.csv"
    # a vertical drop is collinear, so compare without similarity alignment
    code, res, _ = run_json(capsys, "eval", "ate", "--gt", csv, "--est", csv, "--no-align")
    assert code == 0 and res["ate"] == 0.0 and res["coverage"] == 1.0 and res["pairs"] == 11
    code, _, err = run_cli(capsys, "eval", "ate", "--gt", csv, "--est", csv)
    assert code == 2 and "collinear" in err


def test_eval_imgstats(tmp_path, capsys):
    (tmp_path / "a.hist").write_text("1 1\n")
    (tmp_path / "b.hist").write_text("1 3\n")
    code, res, _ = run_json(capsys, "eval", "imgstats", "--a", tmp_path / "a.hist", "--b", tmp_path / "b.hist")
    assert code == 0 and res["kl"] == pytest.approx(0.143841, abs=1e-6)
    assert res["cosine"] == pytest.approx(4 / (2**0.5 * 10**0.5), abs=1e-12)


def test_console_script_entry_point(tmp_path):
    p = tmp_path / "e.json"
    p.write_text('[{"success": 1, "collisions": 1}]')
    r = subprocess.run([sys.executable, "-m", "simbridge.cli", "--json", "eval", "sc", "--episodes", str(p)],
                       capture_output=True, text=True, timeout=60)
    assert r.returncode == 0 and json.loads(r.stdout)["sc"] == 0.5
