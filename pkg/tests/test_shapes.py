import math
import warnings

import numpy as np
import pytest

from moebius_energy import io, shapes
from moebius_energy.errors import InvalidShapeError
from moebius_energy.geom import angle_defects, curve_min_gap, sphericity
from moebius_energy.surface_energy import conformality_error, conformalize, surface_e0


def test_circle_equal_gaps():
    c = shapes.make_curve("circle", 64)
    assert np.allclose(np.linalg.norm(c.points, axis=1), 1.0, atol=1e-15)
    s = c.segment_lengths
    assert np.ptp(s) <= 1e-12


def test_torus_knot_is_simple():
    gap, _ = curve_min_gap(shapes.make_curve("torus_knot", 512))
    assert gap > 1e-3


def test_perturbed_circle_deterministic():
    a = shapes.make_curve("perturbed_circle", 100, amp=0.05, mode=3, seed=1)
    b = shapes.make_curve("perturbed-circle", 100, amp=0.05, mode=3, seed=1)
    assert np.array_equal(a.points, b.points)
    c = shapes.make_curve("perturbed_circle", 100, amp=0.05, mode=3, seed=2)
    assert not np.array_equal(a.points, c.points)


@pytest.mark.parametrize("kind, kw", [("torus_knot", {"p": 2, "q": 4}), ("ellipse", {"a": -1.0}), ("square", {})])
def test_make_curve_rejects(kind, kw):
    with pytest.raises(InvalidShapeError):
        shapes.make_curve(kind, 64, **kw)


@pytest.mark.parametrize("sd", range(5))
def test_icosphere_counts(sd):
    m = shapes.icosphere(sd)
    assert m.n_vertices == 10 * 4**sd + 2
    assert len(m.faces) == 20 * 4**sd


def test_ellipsoid_axis_ratio():
    m = shapes.ellipsoid(2, 1, 1, 3)
    r = np.linalg.norm(m.image - m.image.mean(axis=0), axis=1)
    assert abs(r.max() / r.min() - 2.0) <= 1e-10


def test_padded_ambient():
    m = shapes.icosphere(2, n_ambient=4)
    assert m.n == 4 and np.all(m.image[:, 3] == 0)


@pytest.mark.parametrize("gap", [0.4, 0.1, 0.05])
def test_pinch_neck_width_and_conformality(gap):
    m = shapes.pinch(gap, 3)
    on_axis = np.linalg.norm(m.image[:, :2], axis=1) < 1e-12
    z = np.sort(np.abs(m.image[on_axis, 2]))
    # the two poles sit on the axis at height +-gap/2
    assert z[0] == pytest.approx(gap / 2, rel=1e-12)
    assert conformality_error(m).max() <= 1.1
    assert abs(math.fsum(angle_defects(m)) - 4 * math.pi) <= 1e-9


@pytest.mark.parametrize("gap", [0.0, -0.1, 2.5])
def test_pinch_rejects_gap(gap):
    with pytest.raises(InvalidShapeError):
        shapes.pinch(gap)


def test_spun_knot_embedded_in_r4():
    m = shapes.spun_knot(3)
    assert m.n == 4
    p = m.image
    d = np.linalg.norm(p[:, None] - p[None], axis=2)
    adj = m.adjacency.toarray() > 0
    np.fill_diagonal(adj, True)
    assert d[~adj].min() > 1e-3
    assert conformality_error(m).max() < 1.3


def test_spun_knot_costs_energy():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        knot = surface_e0(conformalize(shapes.spun_knot(3)))
    assert knot > 100 * max(surface_e0(shapes.icosphere(3, n_ambient=4)), 1e-12)


def test_make_sphere_mesh_dispatch():
    assert shapes.make_sphere_mesh("icosphere", 2).n_vertices == 162
    e = shapes.make_sphere_mesh("ellipsoid", 2, a=3.0, b=1.0, c=1.0)
    assert np.ptp(e.image[:, 0]) == pytest.approx(6.0)
    p = shapes.make_sphere_mesh("pinch", 2, gap=0.2)
    assert sphericity(p.image) > 0.1
    with pytest.raises(InvalidShapeError):
        shapes.make_sphere_mesh("torus", 2)


def test_annulus_structure():
    a = shapes.annulus(math.e, k=64)
    r = np.linalg.norm(a.points[:, :2], axis=1)
    assert np.allclose(r[a.loops["loop0"]], 1.0)
    assert np.allclose(r[a.loops["loop1"]], math.e)
    assert len(shapes.annulus().faces) > 10_000


@pytest.mark.parametrize(
    "make",
    [
        lambda: shapes.make_curve("torus_knot", 64),
        lambda: shapes.pinch(0.1, 2),
        lambda: shapes.spun_knot(2),
        lambda: shapes.annulus(k=32),
    ],
)
def test_generators_bytewise_deterministic(make, tmp_path):
    io.write_shape(tmp_path / "a.json", make())
    io.write_shape(tmp_path / "b.json", make())
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
