import re

import numpy as np
import pytest

from evolab.engine import Trajectory
from evolab.svg import HEIGHT, WIDTH, emit_simplex_svg, to_canvas


def test_empty_list_draws_triangle_only():
    text = emit_simplex_svg([])
    assert f'width="{WIDTH}" height="{HEIGHT}"' in text
    assert 'id="simplex"' in text
    assert "polyline" not in text and "circle" not in text


def test_vertices_and_centroid_on_canvas():
    u, v = to_canvas(np.eye(3))
    np.testing.assert_allclose(u, [50, 750, 400])
    np.testing.assert_allclose(v, [650, 650, 650 - 700 * np.sqrt(3) / 2])
    cx, cy = to_canvas(np.full(3, 1 / 3))
    assert cx == pytest.approx(50 + 700 * 0.5)
    assert cy == pytest.approx(650 - 700 * np.sqrt(3) / 6)


def test_constant_trajectory_is_a_dot():
    text = emit_simplex_svg([np.full((5, 3), 1 / 3)])
    m = re.search(r'<circle id="traj-0" cx="([\d.]+)" cy="([\d.]+)"', text)
    assert m
    assert float(m.group(1)) == pytest.approx(400.0, abs=1e-3)
    assert float(m.group(2)) == pytest.approx(650 - 700 * np.sqrt(3) / 6, abs=1e-3)


def test_two_trajectories_two_polylines():
    t = np.linspace(0, 1, 50)[:, None]
    a = np.hstack([0.2 + 0.3 * t, 0.5 - 0.3 * t, np.full_like(t, 0.3)])
    b = np.hstack([np.full_like(t, 0.3), 0.2 + 0.3 * t, 0.5 - 0.3 * t])
    traj = Trajectory(t[:, 0], b, np.zeros_like(b), np.zeros_like(b))
    text = emit_simplex_svg([a, traj], markers=[np.full(3, 1 / 3)], title="a & b")
    assert text.count("<polyline") == 2
    assert 'id="traj-0"' in text and 'id="traj-1"' in text and 'id="marker-0"' in text
    strokes = re.findall(r'<polyline id="traj-\d" points="[^"]*" fill="none" stroke="([^"]+)"', text)
    assert len(set(strokes)) == 2
    assert "a &amp; b" in text


def test_long_trajectories_are_downsampled():
    t = np.linspace(0, 20, 10_000)
    x = np.stack([1 / 3 + 0.1 * np.cos(t), 1 / 3 + 0.1 * np.sin(t), 1 / 3 - 0.1 * (np.cos(t) + np.sin(t))], axis=1)
    text = emit_simplex_svg([x], max_points=500)
    points = re.search(r'<polyline id="traj-0" points="([^"]*)"', text).group(1).split()
    assert len(points) == 500


def test_output_is_byte_stable(tmp_path):
    rng = np.random.default_rng(0)
    trajs = [rng.dirichlet(np.ones(3), size=30) for _ in range(3)]
    a = emit_simplex_svg(trajs, path=tmp_path / "a.svg")
    b = emit_simplex_svg([t.copy() for t in trajs], path=tmp_path / "b.svg")
    assert a == b
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_wrong_dimension_rejected():
    with pytest.raises(ValueError):
        emit_simplex_svg([np.full((3, 4), 0.25)])
    with pytest.raises(ValueError):
        emit_simplex_svg([], markers=[np.full(4, 0.25)])
