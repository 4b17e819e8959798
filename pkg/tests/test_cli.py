"""End-to-end command checks: exit codes, file layout, reproducibility."""

import csv
import json

import pytest

import kacmix.cli as cli
from kacmix.chaos import ChaosReport, ChaosRow
from kacmix.cli import BUILTIN_LAWS, main

TOY_LAWS = [
    {"kind": "symmetric_k", "k": 1, "d": 1},
    {"kind": "kac_toy"},
]
TOY_MIXTURE = {"laws": TOY_LAWS, "beta": [0.0, 1.0]}


@pytest.fixture(autouse=True)
def _no_worker_env(monkeypatch):
    monkeypatch.delenv("KAC_WORKERS", raising=False)


def write_config(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=1))
    return str(path)


def run_cli(args):
    return main(list(args))


def csv_lines(path):
    return path.read_text().splitlines()


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def simulate_doc(**sim):
    body = {"N": 8, "t_end": 0.25, "replicas": 2, "times": [0.0, 0.25]}
    body.update(sim)
    return {"mixture": TOY_MIXTURE, "sim": body, "seed": 5}


def test_simulate_writes_manifest_and_table(tmp_path):
    cfg = write_config(tmp_path, simulate_doc())
    out = tmp_path / "out"
    code = run_cli(["simulate", "--config", cfg, "--output-dir", str(out), "--workers", "1"])
    assert code == 0
    lines = csv_lines(out / "simulate.csv")
    assert lines[0] == "time,observable,mean,stderr,N,replicas,seed"
    assert len(lines) == 1 + 2 * 8  # two sample times, eight moment channels
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 5
    assert manifest["row_counts"] == {"simulate.csv": 16}
    assert manifest["config"]["sim"]["N"] == 8
    first = lines[1].split(",")
    assert first[0] == "0" and first[4] == "8" and first[6] == "5"


def test_simulate_reruns_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, simulate_doc())
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(["simulate", "--config", cfg, "--output-dir", str(a), "--workers", "1"]) == 0
    assert run_cli(["simulate", "--config", cfg, "--output-dir", str(b), "--workers", "2"]) == 0
    assert (a / "simulate.csv").read_bytes() == (b / "simulate.csv").read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    # only the clock and the deliberately different output_dir may vary
    for m in (ma, mb):
        m.pop("wall_clock_utc")
        m["config"].pop("output_dir")
    assert ma == mb


def test_simulate_seed_flag_overrides_config(tmp_path):
    cfg = write_config(tmp_path, simulate_doc())
    base, reseeded, explicit = tmp_path / "s5", tmp_path / "s9", tmp_path / "e9"
    run_cli(["simulate", "--config", cfg, "--output-dir", str(base), "--workers", "1"])
    run_cli(["simulate", "--config", cfg, "--output-dir", str(reseeded), "--seed", "9", "--workers", "1"])
    doc9 = simulate_doc()
    doc9["seed"] = 9
    cfg9 = write_config(tmp_path, doc9, name="run9.json")
    run_cli(["simulate", "--config", cfg9, "--output-dir", str(explicit), "--workers", "1"])
    assert (reseeded / "simulate.csv").read_bytes() != (base / "simulate.csv").read_bytes()
    assert (reseeded / "simulate.csv").read_bytes() == (explicit / "simulate.csv").read_bytes()


def test_simulate_set_overrides_and_observables(tmp_path):
    doc = simulate_doc()
    doc["observables"] = [{"kind": "tanh", "s": 2}]
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "out"
    code = run_cli(
        ["simulate", "--config", cfg, "--output-dir", str(out),
         "--set", "sim.N=12", "--set", "sim.times=[0.25]", "--workers", "1"]
    )
    assert code == 0
    lines = csv_lines(out / "simulate.csv")
    assert len(lines) == 1 + 8 + 1  # moment channels plus the product observable
    assert any("tanh[1]*tanh[1]" in line for line in lines[1:])
    assert all(line.split(",")[4] == "12" for line in lines[1:])


def test_simulate_without_config_is_a_config_error(tmp_path, capsys):
    assert run_cli(["simulate", "--output-dir", str(tmp_path), "--workers", "1"]) == 2
    err = capsys.readouterr().err
    assert "config error" in err and "mixture" in err


def test_simulate_rejects_system_smaller_than_max_order(tmp_path, capsys):
    cfg = write_config(tmp_path, simulate_doc(N=1))
    assert run_cli(["simulate", "--config", cfg, "--output-dir", str(tmp_path / "o"), "--workers", "1"]) == 2
    assert "N >= " in capsys.readouterr().err


def test_nested_output_dir_is_created(tmp_path):
    doc = simulate_doc(t_end=0.0, times=[0.0])
    doc["output_dir"] = str(tmp_path / "deep" / "runs")
    cfg = write_config(tmp_path, doc)
    assert run_cli(["simulate", "--config", cfg, "--workers", "1"]) == 0
    assert (tmp_path / "deep" / "runs" / "simulate.csv").exists()


# ---------------------------------------------------------------------------
# config / argument failure modes
# ---------------------------------------------------------------------------


def test_missing_config_file(tmp_path, capsys):
    assert run_cli(["simulate", "--config", str(tmp_path / "nope.json"), "--workers", "1"]) == 2
    assert "cannot read config file" in capsys.readouterr().err


def test_malformed_override(tmp_path, capsys):
    cfg = write_config(tmp_path, simulate_doc())
    assert run_cli(["simulate", "--config", cfg, "--set", "sim.N", "--workers", "1"]) == 2
    assert "section.key=value" in capsys.readouterr().err


def test_duplicate_config_key(tmp_path, capsys):
    path = tmp_path / "dup.json"
    path.write_text('{\n "seed": 1,\n "seed": 2\n}')
    assert run_cli(["laws-check", "--config", str(path), "--output-dir", str(tmp_path / "o")]) == 2
    assert "duplicate key" in capsys.readouterr().err


def test_unknown_law_kind_exits_2(tmp_path, capsys):
    doc = {"mixture": {"laws": [{"kind": "billiard"}], "beta": [1.0]}, "sim": {"N": 4, "t_end": 0.0}}
    cfg = write_config(tmp_path, doc)
    assert run_cli(["simulate", "--config", cfg, "--output-dir", str(tmp_path / "o"), "--workers", "1"]) == 2
    assert "unknown law kind 'billiard'" in capsys.readouterr().err


def test_bad_worker_configurations(tmp_path, capsys, monkeypatch):
    cfg = write_config(tmp_path, simulate_doc())
    assert run_cli(["simulate", "--config", cfg, "--workers", "0"]) == 2
    assert "workers must be >= 1" in capsys.readouterr().err
    monkeypatch.setenv("KAC_WORKERS", "many")
    assert run_cli(["simulate", "--config", cfg]) == 2
    assert "KAC_WORKERS" in capsys.readouterr().err


def test_env_worker_count_is_honored(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, simulate_doc())
    out = tmp_path / "env_out"
    monkeypatch.setenv("KAC_WORKERS", "2")
    assert run_cli(["simulate", "--config", cfg, "--output-dir", str(out)]) == 0
    assert (out / "simulate.csv").exists()


# ---------------------------------------------------------------------------
# hierarchy
# ---------------------------------------------------------------------------


def hierarchy_doc(epsilon=0.0, **extra):
    hier = {"epsilon": epsilon}
    hier.update(extra)
    return {
        "mixture": {"laws": TOY_LAWS, "beta": [0.5, 0.5]},
        "hierarchy": hier,
    }


def test_hierarchy_emits_frozen_constants(tmp_path):
    cfg = write_config(tmp_path, hierarchy_doc())
    out = tmp_path / "out"
    assert run_cli(["hierarchy", "--config", cfg, "--output-dir", str(out), "--workers", "1"]) == 0

    constants = csv_lines(out / "hierarchy_constants.csv")
    assert constants[0] == "k,R_k,rho_k,C_k"
    assert constants[1] == "0,2,1,0.5"
    assert constants[2] == "1,2,2,0"

    horizon = csv_lines(out / "hierarchy_horizon.csv")
    assert horizon[0] == "M,epsilon,T_star,T_max,T,theta1,theta2"
    cells = horizon[1].split(",")
    assert cells[0] == "2" and cells[2] == "0.13447071068499755"
    assert cells[2] == cells[3]  # T_max = T_star when M - 1 = 1
    assert cells[5] == "0.49999999999999994"

    sweep = csv_lines(out / "hierarchy_sweep.csv")
    manifest = json.loads((out / "manifest.json").read_text())
    # default grids: 7 sizes x 4 orders x k in {0, 1}
    assert len(sweep) - 1 == 7 * 4 * 2 == manifest["row_counts"]["hierarchy_sweep.csv"]
    assert sweep[0] == "N,s,k,lambda,abs_gap"
    single = [line for line in sweep[1:] if line.startswith("10,1,0,")]
    assert single == ["10,1,0,1,0"]  # s = 1 rows are exactly 1


def test_hierarchy_epsilon_domain_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, hierarchy_doc(epsilon=1.0))
    assert run_cli(["hierarchy", "--config", cfg, "--output-dir", str(tmp_path / "o"), "--workers", "1"]) == 2
    assert "tail weight epsilon" in capsys.readouterr().err


def test_hierarchy_respects_explicit_grids(tmp_path):
    cfg = write_config(
        tmp_path, hierarchy_doc(N_grid=[10, 100], s_list=[2], k_list=[1], T=0.01)
    )
    out = tmp_path / "out"
    assert run_cli(["hierarchy", "--config", cfg, "--output-dir", str(out), "--workers", "1"]) == 0
    sweep = csv_lines(out / "hierarchy_sweep.csv")
    assert len(sweep) - 1 == 2
    assert sweep[1].startswith("10,2,1,")


# ---------------------------------------------------------------------------
# chaos
# ---------------------------------------------------------------------------


def chaos_doc():
    return {
        "mixture": TOY_MIXTURE,
        "chaos": {
            "N_grid": [8, 16],
            "t_list": [0.0],
            "budget": {
                "samples_per_point": 800,
                "min_replicas": 4,
                "ref_factor": 2,
                "ref_replicas": 4,
            },
            "pass_threshold": 0.5,
        },
        "seed": 13,
    }


def test_chaos_writes_report_and_summary(tmp_path):
    cfg = write_config(tmp_path, chaos_doc())
    out = tmp_path / "out"
    assert run_cli(["chaos", "--config", cfg, "--output-dir", str(out), "--workers", "1"]) == 0
    lines = csv_lines(out / "chaos.csv")
    # 2 sizes x default s {1,2} x 1 time x default factors {tanh, cos}
    assert len(lines) - 1 == 8
    assert lines[0].startswith("N,s,t,observable,")
    summary = json.loads((out / "chaos_summary.json").read_text())
    assert summary["n_rows"] == 8
    assert summary["pass_fraction"] >= 0.75
    assert summary["n_ref"] == 32
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["row_counts"]["chaos.csv"] == 8


def test_chaos_below_threshold_exits_1(tmp_path, capsys, monkeypatch):
    failing_row = ChaosRow(
        N=8, s=1, t=0.0, observable="g", kac_mean=1.0, kac_stderr=1e-4,
        mf_mean=0.0, mf_stderr=1e-4, delta=1.0, pass_3sigma=False, underpowered=False,
    )
    fake = ChaosReport(rows=(failing_row,), slopes=(), seed=13, n_ref=32, ref_replicas=4)
    monkeypatch.setattr(cli, "run_chaos_sweep", lambda *a, **k: fake)
    cfg = write_config(tmp_path, chaos_doc())
    out = tmp_path / "out"
    assert run_cli(["chaos", "--config", cfg, "--output-dir", str(out), "--workers", "1"]) == 1
    assert "below threshold" in capsys.readouterr().err
    # the report files are still written for post-mortems
    assert (out / "chaos.csv").exists() and (out / "chaos_summary.json").exists()


def test_chaos_missing_grid_exits_2(tmp_path, capsys):
    doc = chaos_doc()
    del doc["chaos"]["N_grid"]
    cfg = write_config(tmp_path, doc)
    assert run_cli(["chaos", "--config", cfg, "--output-dir", str(tmp_path / "o"), "--workers", "1"]) == 2
    assert "missing required key 'N_grid'" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# boltzmann
# ---------------------------------------------------------------------------


def test_boltzmann_meanfield_rows_carry_solver_column(tmp_path):
    doc = {
        "mixture": TOY_MIXTURE,
        "meanfield": {"n": 64, "t_end": 0.2, "replicas": 2},
        "seed": 3,
    }
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "out"
    assert run_cli(["boltzmann", "--config", cfg, "--output-dir", str(out), "--workers", "1"]) == 0
    lines = csv_lines(out / "boltzmann.csv")
    assert lines[0] == "time,observable,mean,stderr,N,replicas,seed,solver"
    assert len(lines) - 1 == 8
    assert all(line.endswith(",meanfield") for line in lines[1:])
    assert not (out / "boltzmann_density.csv").exists()


def test_boltzmann_picard_emits_density(tmp_path):
    doc = {
        "mixture": TOY_MIXTURE,
        "meanfield": {
            "n": 4,
            "t_end": 0.05,
            "solver": "picard",
            "grid": {"n_v": 65, "n_theta": 16, "n_time": 8, "n_iter": 5},
        },
    }
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "out"
    assert run_cli(["boltzmann", "--config", cfg, "--output-dir", str(out), "--workers", "1"]) == 0
    lines = csv_lines(out / "boltzmann.csv")
    assert len(lines) - 1 == 3  # mass, m2, m4 from the grid solver
    names = {line.split(",")[1] for line in lines[1:]}
    assert names == {"mass", "m2", "m4"}
    assert all(line.endswith(",picard") for line in lines[1:])
    mass = float([line for line in lines[1:] if ",mass," in line][0].split(",")[2])
    assert abs(mass - 1.0) < 1e-3
    density = csv_lines(out / "boltzmann_density.csv")
    assert density[0] == "v,f" and len(density) - 1 == 65
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["row_counts"]["boltzmann_density.csv"] == 65


def test_boltzmann_picard_requires_pure_toy_mixture(tmp_path, capsys):
    doc = {
        "mixture": {
            "laws": [{"kind": "symmetric_k", "k": 1, "d": 1}, {"kind": "binary_maxwell", "d": 1}],
            "beta": [0.0, 1.0],
        },
        "meanfield": {"n": 4, "t_end": 0.05, "solver": "picard"},
    }
    cfg = write_config(tmp_path, doc)
    assert run_cli(["boltzmann", "--config", cfg, "--output-dir", str(tmp_path / "o"), "--workers", "1"]) == 2
    assert "toy rotation law" in capsys.readouterr().err


def test_boltzmann_picard_rejects_unsupported_initial(tmp_path, capsys):
    doc = {
        "mixture": TOY_MIXTURE,
        "initial": {"kind": "two_point", "a": 1.0},
        "meanfield": {"n": 4, "t_end": 0.05, "solver": "picard"},
    }
    cfg = write_config(tmp_path, doc)
    assert run_cli(["boltzmann", "--config", cfg, "--output-dir", str(tmp_path / "o"), "--workers", "1"]) == 2
    assert "gaussian or uniform" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# laws-check
# ---------------------------------------------------------------------------


def test_laws_check_builtin_catalog_passes(tmp_path):
    out = tmp_path / "out"
    assert run_cli(["laws-check", "--output-dir", str(out), "--workers", "1"]) == 0
    with open(out / "laws_check.csv", newline="") as fh:
        table = list(csv.reader(fh))
    assert table[0] == ["law", "test", "value", "stderr", "n_samples", "result"]
    body = table[1:]
    assert len(body) == 3 * len(BUILTIN_LAWS)
    assert all(row[5] == "PASS" for row in body)
    # pointwise involutions report their H2 defect as an exact zero
    h2 = {row[0]: row for row in body if row[1] == "H2"}
    assert h2["binary_maxwell"][2] == "0" and h2["binary_maxwell"][3] == "0"
    assert h2["symmetric_k"][2] == "0"
    # the H1 rows carry fully parameterized law labels
    h1_laws = [row[0] for row in body if row[1] == "H1"]
    assert "symmetric_k(k=2,d=1)" in h1_laws and "kac_toy(kernel=uniform)" in h1_laws
    assert len(set(h1_laws)) == len(BUILTIN_LAWS)


def test_laws_check_uses_config_mixture(tmp_path):
    cfg = write_config(tmp_path, {"mixture": TOY_MIXTURE})
    out = tmp_path / "out"
    assert run_cli(["laws-check", "--config", cfg, "--output-dir", str(out), "--workers", "1"]) == 0
    lines = csv_lines(out / "laws_check.csv")
    assert len(lines) - 1 == 3 * 2
