"""SVG figure output: valid XML, CSV siblings, deterministic bytes."""

import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from ditchkit.rng import Rng
from ditchkit.svgplot import heatmap_svg, line_svg


def parse_svg(path):
    tree = ET.parse(path)
    root = tree.getroot()
    assert root.tag.endswith("svg")
    return root


class TestHeatmap:
    def test_writes_valid_svg_with_one_rect_per_cell(self, tmp_path):
        grid = Rng(0).normal(size=(5, 7))
        path = tmp_path / "map.svg"
        heatmap_svg(grid, str(path), title="loads")
        root = parse_svg(path)
        rects = [e for e in root.iter() if e.tag.endswith("rect")]
        assert len(rects) == 5 * 7 + 1  # cells plus background
        texts = [e.text for e in root.iter() if e.tag.endswith("text")]
        assert "loads" in texts

    def test_csv_sibling_holds_plotted_numbers(self, tmp_path):
        grid = np.array([[1.5, 2.0], [-3.0, 0.25]])
        path = tmp_path / "map.svg"
        heatmap_svg(grid, str(path))
        with open(tmp_path / "map.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        got = np.array([[float(v) for v in row] for row in rows])
        np.testing.assert_array_equal(got, grid)

    def test_output_bytes_deterministic(self, tmp_path):
        grid = Rng(1).normal(size=(4, 4))
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        heatmap_svg(grid, str(a), title="t")
        heatmap_svg(grid, str(b), title="t")
        assert a.read_bytes() == b.read_bytes()

    def test_constant_grid_does_not_divide_by_zero(self, tmp_path):
        path = tmp_path / "flat.svg"
        heatmap_svg(np.full((3, 3), 2.0), str(path))
        parse_svg(path)

    def test_rejects_non_2d(self, tmp_path):
        with pytest.raises(ValueError, match="2-D"):
            heatmap_svg(np.zeros(5), str(tmp_path / "x.svg"))


class TestLinePlot:
    def series(self):
        return {"cjm": np.array([0.3, 0.2, 0.1]),
                "kae": np.array([0.4, 0.35, 0.3, 0.25])}

    def test_writes_valid_svg_with_one_polyline_per_series(self, tmp_path):
        path = tmp_path / "lines.svg"
        line_svg(self.series(), str(path), title="errors", y_label="rmse")
        root = parse_svg(path)
        polys = [e for e in root.iter() if e.tag.endswith("polyline")]
        assert len(polys) == 2
        texts = [e.text for e in root.iter() if e.tag.endswith("text")]
        assert "cjm" in texts and "kae" in texts and "errors" in texts

    def test_csv_sibling_matches_series(self, tmp_path):
        path = tmp_path / "lines.svg"
        line_svg(self.series(), str(path), dt=0.5, x_label="t")
        with open(tmp_path / "lines.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "cjm", "kae"]
        assert rows[1] == ["0", "0.3", "0.4"]
        assert rows[4][1] == ""  # shorter series padded
        assert float(rows[4][2]) == pytest.approx(0.25)

    def test_output_bytes_deterministic(self, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        line_svg(self.series(), str(a), title="t")
        line_svg(self.series(), str(b), title="t")
        assert a.read_bytes() == b.read_bytes()

    def test_single_point_series_renders(self, tmp_path):
        path = tmp_path / "one.svg"
        line_svg({"only": np.array([1.0])}, str(path))
        parse_svg(path)

    def test_rejects_empty_series_dict(self, tmp_path):
        with pytest.raises(ValueError, match="no series"):
            line_svg({}, str(tmp_path / "x.svg"))
