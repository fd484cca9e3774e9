import json
from pathlib import Path

import pytest

from khep.cli import main
from khep.io import Catalog, parse_trajectory_binary, parse_trajectory_csv


def run(tmp_path, *argv):
    return main(["--config", str(tmp_path / "missing.cfg")]
                if False else list(argv))


def entry_dirs(root: Path, kind: str):
    base = root / kind
    return sorted(p for p in base.iterdir() if p.is_dir()) if base.is_dir() else []


class TestIntegrateCommand:
    def test_writes_catalog_entry(self, tmp_path, capsys):
        cat = tmp_path / "cat"
        rc = main(["integrate", "--ptheta", "0.164", "--tmax", "2.0",
                   "--catalog", str(cat)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "max |dH|" in out
        (entry,) = entry_dirs(cat, "trajectory")
        times, states = parse_trajectory_csv(
            (entry / "trajectory.csv").read_text())
        blob = parse_trajectory_binary((entry / "trajectory.bin").read_bytes())
        assert len(times) == len(blob["times"]) == 2001
        assert (entry / "summary.txt").exists()
        assert (entry / "params.json").exists()

    def test_missing_seed_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["integrate", "--catalog", str(tmp_path / "c")])
        assert exc.value.code == 2

    def test_conflicting_seeds_rejected(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["integrate", "--ptheta", "0.1", "--zaxis-j", "0.2",
                  "--catalog", str(tmp_path / "c")])
        assert exc.value.code == 2

    def test_collision_failure_saves_partial_data(self, tmp_path, capsys):
        cat = tmp_path / "cat"
        # planar radial infall hits the singularity before tmax
        rc = main(["integrate", "--state", "1,0,0,0.1,0,0", "--tmax", "10",
                   "--catalog", str(cat)])
        assert rc == 1
        assert "partial trajectory saved" in capsys.readouterr().out
        (entry,) = entry_dirs(cat, "trajectory")
        assert "PARTIAL" in (entry / "summary.txt").read_text()

    def test_reruns_reproduce_the_same_hash(self, tmp_path):
        cat = tmp_path / "cat"
        for _ in range(2):
            assert main(["integrate", "--ptheta", "0.1", "--tmax", "1.0",
                         "--catalog", str(cat)]) == 0
        assert len(entry_dirs(cat, "trajectory")) == 1


class TestSearchCommand:
    def test_finds_and_stores_an_orbit(self, tmp_path, capsys):
        cat = tmp_path / "cat"
        rc = main(["search", "--ptheta", "0.164377", "--tmax", "95",
                   "--catalog", str(cat)])
        assert rc == 0
        assert "rotation number   1/2" in capsys.readouterr().out
        (entry,) = entry_dirs(cat, "orbit")
        record = json.loads((entry / "record.json").read_text())
        assert record["rotation"]["j"] == 1
        assert record["rotation"]["k"] == 2
        assert abs(record["H"]) <= 1e-9
        assert (entry / "trajectory.csv").exists()

    def test_hopeless_seed_fails_with_code_1(self, tmp_path, capsys):
        rc = main(["search", "--ptheta", "0.15", "--tmax", "95",
                   "--catalog", str(tmp_path / "cat")])
        assert rc == 1
        assert "search failed" in capsys.readouterr().err


class TestSelfsimCommand:
    def test_contracting_orbit_overlay(self, tmp_path, capsys):
        cat = tmp_path / "cat"
        rc = main(["selfsim", "--j-dil", "-0.05", "--tmax", "50",
                   "--catalog", str(cat)])
        assert rc == 0
        (entry,) = entry_dirs(cat, "domain")
        dom = json.loads((entry / "domain.json").read_text())
        assert dom["lambda"] < 1
        assert dom["stratum"] == "future-collision"
        assert dom["max_relative_extension_error"] < 1e-4
        overlay = (entry / "overlay.csv").read_text().splitlines()
        assert overlay[0].startswith("t,x,y,z,px,py,pz,rx,ry,rz")
        assert (entry / "segment.csv").exists()


class TestExperimentCommand:
    def test_conics(self, tmp_path, capsys):
        rc = main(["experiment", "conics", "--sign", "zero",
                   "--catalog", str(tmp_path / "cat")])
        assert rc == 0
        assert "parabola" in capsys.readouterr().out

    def test_zaxis_family(self, tmp_path):
        cat = tmp_path / "cat"
        rc = main(["experiment", "zaxis-family", "--z0", "2",
                   "--catalog", str(cat)])
        assert rc == 0
        (entry,) = entry_dirs(cat, "report")
        report = json.loads((entry / "report.json").read_text())
        assert report["verdict"] == "consistent"

    def test_kepler3_needs_orbit(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["experiment", "kepler3", "--catalog", str(tmp_path / "c")])
        assert exc.value.code == 2


class TestCatalogCommand:
    def test_lists_entries(self, tmp_path, capsys):
        cat = tmp_path / "cat"
        Catalog(cat).put("report", {"command": "x"}, {}, "s")
        assert main(["catalog", "--catalog", str(cat)]) == 0
        out = capsys.readouterr().out
        assert "report" in out

    def test_empty_catalog(self, tmp_path, capsys):
        assert main(["catalog", "--catalog", str(tmp_path / "none")]) == 0
        assert "empty" in capsys.readouterr().out


class TestConfigFile:
    def test_file_sets_defaults_flags_override(self, tmp_path, capsys):
        cfg = tmp_path / "khep.cfg"
        cfg.write_text("tmax = 1.0\nstep_size = 2e-3  # comment\n")
        cat = tmp_path / "cat"
        rc = main(["--config", str(cfg), "integrate", "--ptheta", "0.1",
                   "--catalog", str(cat)])
        assert rc == 0
        (entry,) = entry_dirs(cat, "trajectory")
        params = json.loads((entry / "params.json").read_text())
        assert params["tmax"] == 1.0
        assert params["step_size"] == 2e-3
        # explicit flag beats the file
        rc = main(["--config", str(cfg), "integrate", "--ptheta", "0.1",
                   "--tmax", "0.5", "--catalog", str(cat)])
        assert rc == 0
        entries = entry_dirs(cat, "trajectory")
        tmaxes = sorted(json.loads((e / "params.json").read_text())["tmax"]
                        for e in entries)
        assert tmaxes == [0.5, 1.0]

    def test_bad_key_is_usage_error(self, tmp_path):
        cfg = tmp_path / "khep.cfg"
        cfg.write_text("bogus = 1\n")
        with pytest.raises(SystemExit) as exc:
            main(["--config", str(cfg), "catalog"])
        assert exc.value.code == 2
