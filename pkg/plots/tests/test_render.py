import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from khep_plots.artifacts import ArtifactError, DomainInfo, read_csv_columns
from khep_plots.cli import main
from khep_plots.render import PlotSpec, gallery_grid, render

DATA = Path(__file__).parent / "data"
GALLERY = sorted((DATA / "gallery").glob("orbit_*.csv"))


def svg_ok(path: Path):
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")
    assert path.stat().st_size > 5000


class TestRenderKinds:
    def test_projection(self, tmp_path):
        out = tmp_path / "proj.svg"
        render(PlotSpec("projection", (DATA / "gallery" / "orbit_1_4.csv",),
                        out))
        svg_ok(out)

    def test_ztrace_with_domain_shading(self, tmp_path):
        out = tmp_path / "z.svg"
        render(PlotSpec("ztrace", (DATA / "trajectory.csv",), out,
                        domain_json=DATA / "domain.json"))
        svg_ok(out)

    def test_ztrace_without_domain(self, tmp_path):
        out = tmp_path / "z2.svg"
        render(PlotSpec("ztrace", (DATA / "trajectory.csv",), out))
        svg_ok(out)

    def test_overlay(self, tmp_path):
        out = tmp_path / "overlay.svg"
        render(PlotSpec("overlay",
                        (DATA / "overlay.csv", DATA / "segment.csv"),
                        out, domain_json=DATA / "domain.json"))
        svg_ok(out)

    def test_gallery_ten_panels(self, tmp_path):
        assert len(GALLERY) == 10
        out = tmp_path / "gallery.svg"
        render(PlotSpec("gallery", tuple(GALLERY), out,
                        title="periodic orbits, k <= 5"))
        svg_ok(out)

    def test_png_output_works(self, tmp_path):
        out = tmp_path / "proj.png"
        render(PlotSpec("projection", (DATA / "trajectory.csv",), out))
        assert out.stat().st_size > 1000


class TestDeterminism:
    @pytest.mark.parametrize("kind,inputs,dom", [
        ("projection", ("gallery/orbit_1_2.csv",), None),
        ("overlay", ("overlay.csv", "segment.csv"), "domain.json"),
        ("gallery", tuple(f"gallery/{p.name}" for p in GALLERY), None),
    ])
    def test_byte_stable_across_reruns(self, tmp_path, kind, inputs, dom):
        blobs = []
        for i in (1, 2):
            out = tmp_path / f"{kind}{i}.svg"
            render(PlotSpec(kind, tuple(DATA / p for p in inputs), out,
                            domain_json=DATA / dom if dom else None))
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]


class TestGalleryLayout:
    def test_ten_panel_grid_matches_reference_shape(self):
        assert gallery_grid(10) == [2, 4, 4]

    def test_generic_grids(self):
        assert gallery_grid(1) == [1]
        assert gallery_grid(4) == [2, 2]
        assert sum(gallery_grid(7)) == 7


class TestArtifacts:
    def test_read_columns(self):
        data = read_csv_columns(DATA / "trajectory.csv",
                                ("t", "x", "y", "z"))
        assert len(data["t"]) > 100
        assert set("txyz") <= set(data)

    def test_missing_column_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        with pytest.raises(ArtifactError, match="line 1"):
            read_csv_columns(bad, ("t", "x"))

    def test_bad_row_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,x,y,z,px,py,pz\n0,1,0,0,0,0,0\n0.1,oops,0,0,0,0,0\n")
        with pytest.raises(ArtifactError, match="line 3"):
            read_csv_columns(bad, ("t", "x"))

    def test_empty_file_is_parse_error(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        with pytest.raises(ArtifactError, match="line 1"):
            read_csv_columns(empty, ("t",))

    def test_header_only_is_parse_error(self, tmp_path):
        f = tmp_path / "h.csv"
        f.write_text("t,x,y,z,px,py,pz\n")
        with pytest.raises(ArtifactError, match="line 2"):
            read_csv_columns(f, ("t",))

    def test_domain_info(self):
        dom = DomainInfo.load(DATA / "domain.json")
        assert dom.t0 < dom.t1 < dom.t2
        assert 0 < dom.lam < 1
        assert dom.collision_time is not None


class TestCli:
    def test_render_via_cli(self, tmp_path, capsys):
        out = tmp_path / "p.svg"
        rc = main(["projection", str(DATA / "trajectory.csv"),
                   "-o", str(out)])
        assert rc == 0
        assert "wrote" in capsys.readouterr().out
        svg_ok(out)

    def test_malformed_input_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("not,a,trajectory\n1,2,3\n")
        rc = main(["projection", str(bad), "-o", str(tmp_path / "x.svg")])
        assert rc == 1
        assert "line 1" in capsys.readouterr().err

    def test_usage_error_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["projection"])  # no inputs, no -o
        assert exc.value.code == 2

    def test_unknown_kind_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["sculpture", str(DATA / "trajectory.csv"),
                  "-o", str(tmp_path / "x.svg")])
        assert exc.value.code == 2
