import json
import subprocess
import sys
from pathlib import Path


def run_cli(*args: str):
    cmd = [sys.executable, "-m", "csmaopt", *args]
    return subprocess.run(cmd, capture_output=True, text=True)


def test_help():
    cp = run_cli("--help")
    assert cp.returncode == 0, cp.stderr
    assert "carrier-sensing threshold" in cp.stdout


def test_tau_table_analytic_matches_reference():
    cp = run_cli("tau-table", "--skip-sim", "--seed", "1")
    assert cp.returncode == 0, cp.stderr
    lines = cp.stdout.strip().splitlines()
    assert lines[0] == "lambda,is_dbm,beta_c_db,tau_analytic,tau_sim,tau_sim_ci95"
    assert len(lines) == 13
    reference = {
        ("0.0001", "-40.0", "3.0"): 0.053,
        ("0.0001", "-40.0", "10.0"): 0.047,
        ("0.0001", "-10.0", "3.0"): 0.055,
        ("0.0001", "-10.0", "10.0"): 0.048,
        ("0.001", "-40.0", "3.0"): 0.025,
        ("0.001", "-40.0", "10.0"): 0.017,
        ("0.001", "-10.0", "3.0"): 0.028,
        ("0.001", "-10.0", "10.0"): 0.018,
        ("0.01", "-40.0", "3.0"): 0.006,
        ("0.01", "-40.0", "10.0"): 0.004,
        ("0.01", "-10.0", "3.0"): 0.007,
        ("0.01", "-10.0", "10.0"): 0.004,
    }
    for line in lines[1:]:
        lam, is_dbm, bc, tau, sim, ci = line.split(",")
        assert sim == "" and ci == ""
        assert abs(float(tau) - reference[(lam, is_dbm, bc)]) < 0.0015


def test_ase_sweep_columns_and_roundtrip(tmp_path: Path):
    out = tmp_path / "sweep.csv"
    cp = run_cli(
        "ase-sweep", "--is-min-dbm", "-50", "--is-max-dbm", "-46",
        "--step-db", "2", "--seed", "3", "--out", str(out), "--no-plot",
    )
    assert cp.returncode == 0, cp.stderr
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "is_dbm,tau,r_s_m,lambda_t,p_s,eta_analytic"
    assert len(lines) == 4
    values = [float(v) for v in lines[1].split(",")]
    # repr round-trip: parsing and re-printing reproduces the file exactly
    assert ",".join(repr(v) for v in values) == lines[1]
    etas = [float(line.split(",")[5]) for line in lines[1:]]
    assert all(e > 0 for e in etas)


def test_seeded_runs_are_byte_identical(tmp_path: Path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ("ase-sweep", "--is-min-dbm", "-52", "--is-max-dbm", "-48",
            "--step-db", "2", "--with-sim", "--replications", "30",
            "--seed", "42")
    assert run_cli(*args, "--out", str(a)).returncode == 0
    assert run_cli(*args, "--out", str(b), "--jobs", "2").returncode == 0
    assert a.read_bytes() == b.read_bytes()


def test_figures_rendered_alongside_output(tmp_path: Path):
    out = tmp_path / "sweep.csv"
    args = ("ase-sweep", "--is-min-dbm", "-50", "--is-max-dbm", "-45",
            "--step-db", "1", "--seed", "5", "--out", str(out))
    assert run_cli(*args).returncode == 0
    png = tmp_path / "sweep.png"
    assert png.exists()
    first = png.read_bytes()
    assert first[:8] == b"\x89PNG\r\n\x1a\n"
    assert run_cli(*args).returncode == 0
    assert png.read_bytes() == first  # byte-stable figure

    out2 = tmp_path / "quiet.csv"
    assert run_cli(
        "ase-sweep", "--is-min-dbm", "-50", "--is-max-dbm", "-49",
        "--step-db", "1", "--seed", "5", "--out", str(out2), "--no-plot",
    ).returncode == 0
    assert not (tmp_path / "quiet.png").exists()


def test_optimize_json_structure(tmp_path: Path):
    out = tmp_path / "opt.json"
    cp = run_cli("optimize", "--beta-list-db", "6,10", "--seed", "1",
                 "--out", str(out), "--no-plot")
    assert cp.returncode == 0, cp.stderr
    entries = json.loads(out.read_text())
    assert [e["beta_db"] for e in entries] == [6.0, 10.0]
    for entry in entries:
        assert entry["grid"]["agrees_within_cell"]
        assert entry["no_beb"]["r_s_star_m"] > 0
        assert 0.0 < entry["tau"] < 1.0
        assert entry["trace"]
    assert entries[0]["is_star_dbm"] >= entries[1]["is_star_dbm"]


def test_optimize_methods_agree():
    newton = run_cli("optimize", "--beta-list-db", "10", "--method", "newton",
                     "--seed", "1")
    grid = run_cli("optimize", "--beta-list-db", "10", "--method", "grid",
                   "--seed", "1")
    assert newton.returncode == 0 and grid.returncode == 0
    n = json.loads(newton.stdout)[0]["is_star_dbm"]
    g = json.loads(grid.stdout)[0]["is_star_dbm"]
    assert abs(n - g) <= 0.1


def test_mac_sim_smoke():
    cp = run_cli("mac-sim", "--lambda", "0.0001", "--slots", "1500",
                 "--seed", "2")
    assert cp.returncode == 0, cp.stderr
    payload = json.loads(cp.stdout)
    assert 0.0 <= payload["tau_hat"] <= 1.0
    assert payload["seed"] == 2
    again = run_cli("mac-sim", "--lambda", "0.0001", "--slots", "1500",
                    "--seed", "2")
    assert again.stdout == cp.stdout


def test_geo_sim_smoke():
    cp = run_cli("geo-sim", "--replications", "30", "--seed", "6",
                 "--busy-replications", "4000")
    assert cp.returncode == 0, cp.stderr
    payload = json.loads(cp.stdout)
    assert 0.0 < payload["p_s_sim"] <= 1.0
    assert payload["p_b_analytic"] > 0.0


def test_tau_table_sim_deterministic_across_jobs(tmp_path: Path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ("tau-table", "--lambdas", "0.0001,0.001", "--is-dbms", "-40",
            "--beta-c-dbs", "3", "--seeds", "2", "--slots", "1200",
            "--seed", "3")
    assert run_cli(*args, "--out", str(a), "--jobs", "1").returncode == 0
    assert run_cli(*args, "--out", str(b), "--jobs", "2").returncode == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".png").read_bytes() == b.with_suffix(".png").read_bytes()


def test_tau_table_skip_sim_renders_figure(tmp_path: Path):
    out = tmp_path / "table.csv"
    cp = run_cli("tau-table", "--skip-sim", "--seed", "1", "--out", str(out))
    assert cp.returncode == 0, cp.stderr
    assert out.with_suffix(".png").exists()


def test_missing_seed_is_drawn_and_printed():
    cp = run_cli("ase-sweep", "--is-min-dbm", "-50", "--is-max-dbm", "-50",
                 "--step-db", "1")
    assert cp.returncode == 0
    assert "seed:" in cp.stderr


def test_config_file_with_flag_override(tmp_path: Path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep settings\nis-min-dbm = -50\nis_max_dbm = -48\n"
                   "step-db = 1\nseed = 9\n")
    base = run_cli("ase-sweep", "--config", str(cfg))
    assert base.returncode == 0, base.stderr
    assert len(base.stdout.strip().splitlines()) == 4  # header + 3 points
    narrowed = run_cli("ase-sweep", "--config", str(cfg), "--is-max-dbm", "-50")
    assert narrowed.returncode == 0
    assert len(narrowed.stdout.strip().splitlines()) == 2  # flag overrides file


def test_config_errors_exit_2(tmp_path: Path):
    assert run_cli("ase-sweep", "--step-db", "0").returncode == 2
    assert run_cli("optimize", "--beta-list-db", "").returncode == 2
    assert run_cli("ase-sweep", "--alpha", "3").returncode == 2
    missing = tmp_path / "nope.cfg"
    assert run_cli("ase-sweep", "--config", str(missing)).returncode == 2
