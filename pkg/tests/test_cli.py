import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from occfluct import cli, verification
from occfluct.config import ConfigError, ScenarioConfig, dumps_config, loads_config
from occfluct.config import TestFunctionSpec as TFSpec

DEMO = Path(__file__).resolve().parents[1] / "demos" / "configs"

SMALL = """\
[model]
d = 5
alpha = 2.0
beta = 0.5
V = 1.0

[domain]
L = 4

[schedule]
T = 5
tau_w = 1
replicas = 3
grid = 6

[test_functions]
phi0 = gaussian width=1.0
phi1 = bump width=1.5 amplitude=2

[limit]
mode = eta
times = 0, 0.5, 1
z = 1
samples = 50

[run]
seed = 99
"""


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL)
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


def rows(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    return lines[0], list(csv.reader(lines[1:]))


# ---------------------------------------------------------------------------
# configuration files


configs = st.builds(
    ScenarioConfig,
    d=st.integers(1, 12), alpha=st.floats(0.05, 2.0), beta=st.floats(0.01, 0.99), V=st.floats(0, 10),
    L=st.floats(0.5, 100), torus=st.booleans(),
    T=st.lists(st.floats(0.1, 1e4), min_size=1, max_size=3).map(tuple),
    tau_w=st.one_of(st.none(), st.floats(0, 1e3)), h=st.floats(0.01, 5),
    replicas=st.integers(0, 1000), grid=st.integers(2, 200),
    test_functions=st.lists(st.builds(TFSpec, name=st.sampled_from(["a", "b", "phi_3"]),
                                      kind=st.sampled_from(["gaussian", "bump"]), width=st.floats(0.01, 10),
                                      amplitude=st.floats(-5, 5)),
                            min_size=1, max_size=3, unique_by=lambda t: t.name).map(tuple),
    mode=st.sampled_from(["eta", "eta1", "eta2", "xi", "sdsm"]),
    times=st.lists(st.floats(0, 10), min_size=1, max_size=4).map(tuple),
    z=st.lists(st.floats(-5, 5), min_size=1, max_size=3).map(tuple),
    seed=st.integers(0, 2**64 - 1), workers=st.integers(1, 8),
)


@settings(max_examples=60, deadline=None)
@given(cfg=configs)
def test_config_round_trip(cfg):
    again = loads_config(dumps_config(cfg))
    assert again == cfg
    assert again.config_hash == cfg.config_hash


def test_hash_ignores_outputs_and_workers():
    cfg = loads_config(SMALL)
    assert cfg.with_overrides(directory="elsewhere", workers=4, formats=("csv",)).config_hash == cfg.config_hash
    assert cfg.with_overrides(seed=100).config_hash != cfg.config_hash


@pytest.mark.parametrize("edit,fragment", [
    (("V = 1.0", "V = 1.0\nfoo = 3"), ":6: unknown key 'foo' in [model]"),
    (("beta = 0.5", "beta = 1.5"), ":4: [model] beta"),
    (("[run]", "[runs]"), "unknown section"),
    (("replicas = 3", "replicas = three"), ":13: [schedule] replicas"),
])
def test_config_errors_carry_line_numbers(edit, fragment):
    with pytest.raises(ConfigError) as exc:
        loads_config(SMALL.replace(*edit), source="bad.ini")
    assert "bad.ini" in str(exc.value) and fragment in str(exc.value)


def test_demo_configs_load():
    from occfluct.config import load_config
    for path in sorted(DEMO.glob("*.ini")):
        load_config(path)


# ---------------------------------------------------------------------------
# simulate-system


def test_simulate_system_outputs_and_determinism(small, tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert run("simulate-system", "--config", small, "--out", a) == 0
    assert run("simulate-system", "--config", small, "--out", b, "--workers", 2) == 0
    assert run("simulate-system", "--config", small, "--out", c, "--seed", 100) == 0
    for name in ("trajectory.csv", "fluctuation.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
        assert (a / name).read_bytes() != (c / name).read_bytes()
    head, body = rows(a / "fluctuation.csv")
    h = loads_config(SMALL).config_hash
    assert head == f"# config_hash={h}"
    assert body[0] == ["T", "replica", "t", "phi_id", "X_value", "regime", "F_T"]
    assert len(body) == 1 + 3 * 2 * 6
    assert {r[5] for r in body[1:]} == {"intermediate"}
    assert all(float(r[4]) == 0.0 for r in body[1:] if float(r[2]) == 0.0)
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["config_hash"] == h and manifest["seed"] == 99 and manifest["partial"] is False
    assert manifest["replicas_complete"] == 3
    assert set(manifest["files"]) == {"trajectory.csv", "fluctuation.csv", "summary.json"}
    assert cli.check_consistent_hashes([a / "trajectory.csv", b / "fluctuation.csv"]) == h


def test_zero_replicas_write_headers_only(small, tmp_path):
    assert run("simulate-system", "--config", small, "--out", tmp_path, "--replicas", 0) == 0
    for name in ("trajectory.csv", "fluctuation.csv"):
        _, body = rows(tmp_path / name)
        assert len(body) == 1


def test_particle_cap_gives_resource_exit_and_partial_manifest(small, tmp_path):
    cfg = tmp_path / "cap.ini"
    cfg.write_text(SMALL.replace("seed = 99", "seed = 99\nmax_particles = 300"))
    assert run("simulate-system", "--config", cfg, "--out", tmp_path / "o") == cli.EXIT_RESOURCE
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["partial"] is True and "error" in manifest


@pytest.mark.parametrize("edit", [("d = 5", "d = 3"), ("beta = 0.5", "beta = 0"), ("T = 5", "T = -1")])
def test_invalid_scenarios_exit_2(small, tmp_path, edit, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(SMALL.replace(*edit))
    assert run("simulate-system", "--config", cfg, "--out", tmp_path / "o") == cli.EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_missing_config_file_exit_2(tmp_path):
    assert run("simulate-system", "--config", tmp_path / "nope.ini") == cli.EXIT_CONFIG


# ---------------------------------------------------------------------------
# simulate-limit


def test_simulate_limit_eta(small, tmp_path):
    assert run("simulate-limit", "--config", small, "--out", tmp_path) == 0
    head, body = rows(tmp_path / "paths.csv")
    assert body[0] == list(cli.PATH_COLUMNS)
    assert len(body) == 1 + 50 * 3
    assert all(float(r[3]) == 0.0 for r in body[1:] if float(r[1]) == 0.0)
    table = json.loads((tmp_path / "charfn.json").read_text())
    assert table["regime"] == "intermediate" and table["K"] == pytest.approx(0.60571, abs=1e-5)
    first = table["entries"][0]
    assert (first["t"], first["re"], first["im"]) == (0.0, 1.0, 0.0)


def limit_config(tmp_path, d, mode):
    path = tmp_path / f"{mode}{d}.ini"
    path.write_text(SMALL.replace("d = 5", f"d = {d}").replace("mode = eta", f"mode = {mode}"))
    return path


def test_simulate_limit_xi_closed_form(tmp_path):
    assert run("simulate-limit", "--config", limit_config(tmp_path, 6, "xi"), "--out", tmp_path) == 0
    entries = json.loads((tmp_path / "charfn.json").read_text())["entries"]
    e = next(e for e in entries if e["t"] == 1.0 and e["z"] == 1.0)
    assert complex(e["re"], e["im"]) == pytest.approx(np.exp(-1 - 1j), rel=1e-14)


def test_limit_modes_check_regime(tmp_path):
    assert run("simulate-limit", "--config", limit_config(tmp_path, 5, "xi"), "--out", tmp_path) == 2
    assert run("simulate-limit", "--config", limit_config(tmp_path, 6, "sdsm"), "--out", tmp_path) == 2
    assert run("simulate-limit", "--config", limit_config(tmp_path, 6, "eta"), "--out", tmp_path) == 2


# ---------------------------------------------------------------------------
# regimes and verify


def test_regimes_formats(capsys, tmp_path, small):
    assert run("regimes", "--format", "json") == 0
    table = json.loads(capsys.readouterr().out)
    assert [r["regime"] for r in table] == ["intermediate", "critical", "large"]
    assert run("regimes", "--format", "csv", "--out", tmp_path) == 0
    assert (tmp_path / "regimes.csv").read_text() == capsys.readouterr().out
    assert run("regimes", "--config", small) == 0
    assert "-> intermediate, T=5" in capsys.readouterr().out


def test_verify_unit_writes_reports(capsys, tmp_path):
    assert run("verify", "unit", "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert out.count("criterion ") == 3 and "suite unit: 3/3 passed" in out
    report = json.loads((tmp_path / "verify_unit.json").read_text())
    assert [c["status"] for c in report["criteria"]] == [verification.PASS] * 3


def test_verify_rejects_mismatched_inputs(small, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run("simulate-system", "--config", small, "--out", a, "--replicas", 0)
    run("simulate-system", "--config", small, "--out", b, "--replicas", 0, "--seed", 1)
    assert run("verify", "unit", "--inputs", a / "trajectory.csv", b / "trajectory.csv") == cli.EXIT_CONFIG
    assert run("verify", "unit", "--replicas-factor", 0) == cli.EXIT_CONFIG


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "occfluct.cli", "regimes"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("intermediate")
    res = subprocess.run([sys.executable, "-m", "occfluct.cli", "simulate-system"], capture_output=True, text=True)
    assert res.returncode == 2 and "needs --config" in res.stderr
