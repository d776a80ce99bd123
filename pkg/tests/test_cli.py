import json
import os

import numpy as np
import pytest

import geolcs as g
from geolcs import cli
from geolcs.fileio import sha256_file

from conftest import GOLDEN_DIR, PROD_CFG

SADDLE_CFG = """
[manifold]
id = plane2

[flow]
id = saddle
a = 1.0

[window]
T = 1.0

[grid]
lo = -1.0, -1.0
hi = 1.0, 1.0
resolution = 24, 24
"""

ROTATION_CFG = """
[manifold]
id = plane2

[flow]
id = rotation
omega = 1.0

[window]
T = 3.141592653589793

[grid]
lo = -1.0, -1.0
hi = 1.0, 1.0
resolution = 16, 16
"""


@pytest.fixture
def saddle_cfg_path(tmp_path):
    p = tmp_path / "saddle.cfg"
    p.write_text(SADDLE_CFG)
    return str(p)


@pytest.fixture
def rotation_cfg_path(tmp_path):
    p = tmp_path / "rotation.cfg"
    p.write_text(ROTATION_CFG)
    return str(p)


class TestFtleCommand:
    def test_saddle_field_written_with_unit_exponent(self, saddle_cfg_path,
                                                     tmp_path, capsys):
        out = tmp_path / "out"
        rc = cli.main(["ftle", saddle_cfg_path, "--out", str(out),
                       "--threads", "1"])
        assert rc == 0
        vals = np.loadtxt(out / "ftle.csv")
        assert np.abs(vals - 1.0).max() <= 1e-6
        for name in ("lambda1.csv", "gap.csv", "xi1_0.csv", "xi1_1.csv",
                     "meta.json", "ftle.png"):
            assert (out / name).exists()

    def test_no_plots_flag(self, saddle_cfg_path, tmp_path):
        out = tmp_path / "out"
        rc = cli.main(["ftle", saddle_cfg_path, "--out", str(out),
                       "--threads", "1", "--no-plots"])
        assert rc == 0
        assert not (out / "ftle.png").exists()

    def test_env_var_default_outdir(self, saddle_cfg_path, tmp_path,
                                    monkeypatch):
        target = tmp_path / "from_env"
        monkeypatch.setenv("GEOLCS_OUTDIR", str(target))
        rc = cli.main(["ftle", saddle_cfg_path, "--threads", "1",
                       "--no-plots"])
        assert rc == 0
        assert (target / "ftle.csv").exists()


class TestLcsCommand:
    def test_rotation_degenerate_reports(self, rotation_cfg_path, tmp_path):
        out = tmp_path / "out"
        rc = cli.main(["lcs", rotation_cfg_path, "--out", str(out),
                       "--threads", "1", "--no-plots"])
        assert rc == 0
        reports = json.loads((out / "reports.json").read_text())
        assert reports["alignment"]["degenerate_empty"]
        assert reports["invariance"]["degenerate_empty"]

    def test_hypercomplex_exports_fields_without_extraction(self, tmp_path):
        cfgp = tmp_path / "quat.cfg"
        cfgp.write_text("""
[manifold]
id = quat_torus4

[flow]
id = quat_torus_flow
omega3 = 1.0

[window]
T = 2.0

[grid]
resolution = 8, 8, 8, 8
""")
        out = tmp_path / "out"
        rc = cli.main(["lcs", str(cfgp), "--out", str(out), "--threads", "1"])
        assert rc == 0
        reports = json.loads((out / "reports.json").read_text())
        assert reports["eigen_stats"]["lambda1_max"] == pytest.approx(3.0,
                                                                      abs=1e-7)
        assert not (out / "ridges.json").exists()
        assert (out / "spectrum.png").exists()
        for i in range(4):
            assert (out / f"xi1_{i}.csv").exists()


class TestFlowmapCommand:
    def test_json_dump_matches_library(self, saddle_cfg_path, capsys):
        rc = cli.main(["flowmap", saddle_cfg_path, "--at", "1.0,1.0"])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["endpoint"][0] == pytest.approx(np.e, rel=1e-8)
        assert doc["endpoint"][1] == pytest.approx(1 / np.e, rel=1e-8)
        jac = np.array(doc["jacobian"])
        assert np.abs(jac - np.diag([np.e, 1 / np.e])).max() < 1e-8
        assert doc["det"] == pytest.approx(1.0, abs=1e-6)
        assert doc["method_tag"] == "rk45-variational"

    def test_bad_point_is_config_error(self, saddle_cfg_path):
        assert cli.main(["flowmap", saddle_cfg_path, "--at", "1.0"]) == 2
        assert cli.main(["flowmap", saddle_cfg_path, "--at", "a,b"]) == 2


class TestValidateCommand:
    def test_rotation_isometry_invariants_pass(self, rotation_cfg_path,
                                               capsys):
        rc = cli.main(["validate", rotation_cfg_path, "--threads", "1"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "FAIL" not in out
        assert "PASS" in out

    def test_randers_scenario_passes(self, tmp_path, capsys):
        cfgp = tmp_path / "randers.cfg"
        cfgp.write_text("""
[manifold]
id = randers_torus2

[flow]
id = torus_shear

[window]
T = 2.0

[grid]
resolution = 16, 16
""")
        rc = cli.main(["validate", str(cfgp), "--threads", "1"])
        out = capsys.readouterr().out
        assert rc == 0, out
        assert "finsler norm 1-homogeneous" in out

    def test_quat_scenario_passes(self, tmp_path, capsys):
        cfgp = tmp_path / "quat.cfg"
        cfgp.write_text("""
[manifold]
id = quat_torus4

[flow]
id = quat_torus_flow
omega3 = 1.0

[window]
T = 2.0

[grid]
resolution = 8, 8, 8, 8
""")
        rc = cli.main(["validate", str(cfgp), "--threads", "1"])
        out = capsys.readouterr().out
        assert rc == 0, out
        assert "hypercomplex quaternion identities" in out
        assert "commutation proxy" in out


class TestErrorPaths:
    def test_missing_config_file(self, capsys):
        rc = cli.main(["ftle", "/nonexistent/path.cfg"])
        assert rc in (1, 2)

    def test_config_error_exit_code_two(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text(SADDLE_CFG + "\n[extract]\nquantile = 1.5\n")
        assert cli.main(["ftle", str(p)]) == 2

    def test_runtime_error_exit_code_one(self, tmp_path):
        # every trajectory leaves the chart: empty field
        p = tmp_path / "exit.cfg"
        p.write_text("""
[manifold]
id = plane2

[flow]
id = saddle
a = 1.0

[window]
T = 3.0

[grid]
lo = 7.0, -0.5
hi = 7.9, 0.5
resolution = 8, 8
""")
        assert cli.main(["ftle", str(p), "--out",
                         str(tmp_path / "o"), "--threads", "1"]) == 1


class TestGoldenHashes:
    def test_production_run_matches_committed_hashes(self, dg_cli_run):
        with open(os.path.join(GOLDEN_DIR, "prod_hashes.json")) as fh:
            expected = json.load(fh)
        for name, digest in expected.items():
            assert sha256_file(os.path.join(dg_cli_run, name)) == digest, name

    def test_meta_config_hash_matches_recomputation(self, dg_cli_run):
        from geolcs.config import config_hash, parse_config_file
        meta = json.loads(open(os.path.join(dg_cli_run, "meta.json")).read())
        assert meta["config_hash"] == config_hash(parse_config_file(PROD_CFG))
