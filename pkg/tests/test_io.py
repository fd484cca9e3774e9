import json

import numpy as np
import numpy.testing as npt
import pytest

from khep.dynamics import PhaseState
from khep.integrator import IntegratorConfig, integrate
from khep.io import (Catalog, orbit_record_json, parse_orbit_record_json,
                     parse_trajectory_binary, parse_trajectory_csv,
                     trajectory_binary, trajectory_csv)


@pytest.fixture(scope="module")
def short_traj():
    return integrate(PhaseState(1, 0, 0, 0.05, 0.15, 0.1),
                     IntegratorConfig(step_size=1e-3, max_time=0.5))


class TestCsv:
    def test_round_trip_is_exact(self, short_traj):
        text = trajectory_csv(short_traj)
        times, states = parse_trajectory_csv(text)
        npt.assert_array_equal(times, short_traj.times)
        npt.assert_array_equal(states, short_traj.states)

    def test_header_and_width(self, short_traj):
        lines = trajectory_csv(short_traj).splitlines()
        assert lines[0] == "t,x,y,z,px,py,pz,H,ptheta,J"
        assert all(len(ln.split(",")) == 10 for ln in lines[1:])

    def test_malformed_rows_name_the_line(self):
        good = "t,x,y,z,px,py,pz,H,ptheta,J\n0,1,0,0,0,0,0,-0.03,0,0\n"
        with pytest.raises(ValueError, match="line 3"):
            parse_trajectory_csv(good + "0.1,nope,0,0,0,0,0,0,0,0\n")
        with pytest.raises(ValueError, match="line 1"):
            parse_trajectory_csv("wrong,header\n")
        with pytest.raises(ValueError, match="line 2"):
            parse_trajectory_csv("t,x,y,z,px,py,pz,H,ptheta,J\n1,2,3\n")


class TestBinary:
    def test_round_trip_bit_identical(self, short_traj):
        blob = trajectory_binary(short_traj)
        assert blob[:4] == b"KHEP"
        data = parse_trajectory_binary(blob)
        npt.assert_array_equal(data["times"], short_traj.times)
        npt.assert_array_equal(data["states"], short_traj.states)
        assert trajectory_binary(short_traj) == blob

    def test_bad_magic_rejected(self):
        with pytest.raises(ValueError, match="magic"):
            parse_trajectory_binary(b"NOPE" + b"\0" * 32)


class TestOrbitRecordJson:
    def test_round_trip(self, orbit_half):
        text = orbit_record_json(orbit_half)
        back = parse_orbit_record_json(text)
        npt.assert_array_equal(back.initial_state.as_array(),
                               orbit_half.initial_state.as_array())
        assert back.period == orbit_half.period
        assert (back.rotation.j, back.rotation.k) \
            == (orbit_half.rotation.j, orbit_half.rotation.k)
        assert back.provenance == orbit_half.provenance


class TestCatalog:
    def test_put_get_round_trip(self, tmp_path):
        cat = Catalog(tmp_path / "cat")
        entry = cat.put("report", {"command": "test", "x": 1},
                        {"data.csv": "a,b\n1,2\n"}, "summary here\n")
        got = cat.get("report", entry.hash)
        assert got.params == {"command": "test", "x": 1}
        assert got.read_file("data.csv") == b"a,b\n1,2\n"
        assert got.read_file("summary.txt") == b"summary here\n"

    def test_identical_content_identical_hash(self, tmp_path):
        cat = Catalog(tmp_path / "cat")
        a = cat.put("report", {"p": 2}, {"f.txt": "hello"}, "s")
        b = cat.put("report", {"p": 2}, {"f.txt": "hello"}, "s")
        assert a.hash == b.hash
        assert len(list(cat.entries())) == 1

    def test_different_content_different_hash(self, tmp_path):
        cat = Catalog(tmp_path / "cat")
        a = cat.put("report", {"p": 2}, {"f.txt": "hello"}, "s")
        b = cat.put("report", {"p": 3}, {"f.txt": "hello"}, "s")
        assert a.hash != b.hash

    def test_prefix_lookup_and_find(self, tmp_path):
        cat = Catalog(tmp_path / "cat")
        entry = cat.put("domain", {"p": 1}, {"d.json": "{}"}, "s")
        assert cat.get("domain", entry.hash[:6]).hash == entry.hash
        assert cat.find(entry.hash).kind == "domain"
        with pytest.raises(FileNotFoundError):
            cat.get("domain", "ffffffff")

    def test_env_var_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("KHEP_CATALOG", str(tmp_path / "envcat"))
        cat = Catalog()
        assert cat.root == tmp_path / "envcat"

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            Catalog(tmp_path).put("blob", {}, {}, "")
