import re

import numpy as np
import pytest

from gkl.plotting import NoPlottablePoints, Series, emit_plot


def _polylines(svg):
    out = []
    for pts in re.findall(r'<polyline[^>]*points="([^"]+)"', svg):
        out.append(np.array([[float(v) for v in p.split(",")] for p in pts.split()]))
    return out


def test_single_power_law_is_straight_line(tmp_path):
    n = np.arange(1, 101)
    path = tmp_path / "p.svg"
    text, dropped = emit_plot([("n^-1", n, 1.0 / n)], path=path)
    assert dropped == 0 and path.read_text() == text
    assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
    (line,) = _polylines(text)
    assert len(line) == 100
    slope, _ = np.polyfit(line[:, 0], line[:, 1], 1)
    resid = line[:, 1] - np.polyval(np.polyfit(line[:, 0], line[:, 1], 1), line[:, 0])
    assert np.abs(resid).max() < 0.01
    # both axes span two decades; the y axis carries 3% padding per side
    from gkl.plotting import HEIGHT, MARGIN_B, MARGIN_L, MARGIN_R, MARGIN_T, WIDTH
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B
    data_slope = -slope * (pw / 2) / (ph / (2 * 1.06))
    assert data_slope == pytest.approx(-1.0, abs=1e-4)


def test_zero_value_dropped(caplog):
    n = np.arange(1, 101)
    v = 1.0 / n
    v[39] = 0.0
    with caplog.at_level("WARNING"):
        _, dropped = emit_plot([Series("s", n, v)])
    assert dropped == 1
    assert "dropped 1" in caplog.text


def test_no_plottable_points_writes_nothing(tmp_path):
    path = tmp_path / "none.svg"
    with pytest.raises(NoPlottablePoints):
        emit_plot([("zero", [1, 2, 3], [0, 0, -1])], path=path)
    assert not path.exists()


def test_references_are_dashed():
    n = np.arange(1, 50)
    text, _ = emit_plot([("a", n, n**-0.5), ("b", n, n**-2.0)], [("n^-1/2", -0.5), -2.0])
    assert len(_polylines(text)) == 2
    assert len(re.findall(r'<line clip-path="url\(#plotarea\)"[^>]*stroke-dasharray', text)) == 2


def test_labels_escaped():
    text, _ = emit_plot([("a<b & c", [1, 2, 3], [1, 2, 3])])
    assert "a&lt;b &amp; c" in text
