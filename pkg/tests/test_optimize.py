import math
import warnings

import numpy as np
import pytest

from moebius_energy import shapes
from moebius_energy.errors import ParameterError
from moebius_energy.geom import ClosedCurve, curve_normalize, sphericity
from moebius_energy.optimize import (
    coords,
    curve_objective,
    descend,
    fd_gradient,
    minimize_shape,
    sobolev_direction,
    with_coords,
)
from moebius_energy.surface_energy import surface_e0


def test_fd_gradient_quadratic():
    c = shapes.make_curve("circle", 16)

    def energy(s):
        return float(np.sum(s.points[3] ** 2))

    g = fd_gradient(energy, c, 1e-4)
    expect = np.zeros_like(c.points)
    expect[3] = 2 * c.points[3]
    assert np.max(np.abs(g - expect)) <= 1e-6


def test_fd_gradient_one_sided_fallback():
    c = shapes.make_curve("circle", 16)

    def energy(s):
        return math.inf if s.points[0, 0] > 1.0 else float(s.points[0, 0])

    with pytest.warns(RuntimeWarning, match="one-sided"):
        g = fd_gradient(energy, c, 1e-4)
    assert g[0, 0] == pytest.approx(1.0)


def test_fd_gradient_rejects_bad_step():
    with pytest.raises(ParameterError):
        fd_gradient(lambda s: 0.0, shapes.make_curve("circle", 16), 0.0)


def test_fd_gradient_vanishes_at_round_sphere():
    e = lambda s: surface_e0(s, check=False)
    round_g = fd_gradient(e, shapes.icosphere(1), 1e-5)
    bumpy = shapes.icosphere(1)
    img = bumpy.image * (1 + 0.1 * np.random.default_rng(0).normal(size=(bumpy.n_vertices, 1)))
    other_g = fd_gradient(e, bumpy.with_image(img), 1e-5)
    assert np.linalg.norm(round_g) <= 1e-3 * np.linalg.norm(other_g)


def test_richardson_componentwise_on_random_curve():
    rng = np.random.default_rng(1)
    c = curve_normalize(ClosedCurve(shapes.make_curve("circle", 16).points + 0.05 * rng.normal(size=(16, 3))))
    f = curve_objective("curve-e0")
    h = 1e-2
    g1, g2, g4 = (fd_gradient(f, c, h / k) for k in (1, 2, 4))
    # the ratio tends to 4 from above at rate h^2, so allow 1% over the limit
    ratio = np.abs(g1 - g2) / np.maximum(np.abs(g2 - g4), 1e-12)
    assert np.all(ratio <= 4.0 * 1.01)
    assert np.median(ratio) == pytest.approx(4.0, rel=1e-3)


def test_coords_roundtrip():
    m = shapes.icosphere(1)
    assert np.array_equal(coords(with_coords(m, coords(m) * 2)), 2 * m.image)
    c = shapes.make_curve("circle", 12)
    assert np.array_equal(coords(with_coords(c, coords(c) + 1)), c.points + 1)


def test_sobolev_direction_is_descent_direction():
    c = curve_normalize(shapes.make_curve("perturbed_circle", 32, amp=0.1, seed=0))
    f = curve_objective("curve-elambda", 0.1)
    g = fd_gradient(f, c)
    d = sobolev_direction(c, g)
    assert np.sum(g * d) > 0
    m = shapes.ellipsoid(1.3, 1, 1, 1)
    g = np.random.default_rng(0).normal(size=m.image.shape)
    assert np.sum(g * sobolev_direction(m, g)) > 0


def test_descend_quadratic_bowl():
    c = shapes.make_curve("circle", 8, radius=2.0)

    def energy(s):
        return float(np.sum(s.points**2))

    res = descend(energy, c, steps=100, step0=0.1)
    assert res.energies[-1] < 1e-6 * res.energies[0]
    assert np.all(np.diff(res.energies) <= 0)
    assert res.status == "converged"


def test_descend_curve_to_round():
    rng = np.random.default_rng(4)
    base = shapes.make_curve("circle", 48)
    noisy = ClosedCurve(base.points * (1 + 0.05 * rng.uniform(-1, 1, size=(48, 1))))
    res = minimize_shape(curve_normalize(noisy), "curve-elambda", lam=0.1, steps=200)
    final = res.records[-1].total
    assert np.all(np.diff(res.energies) <= 0)
    assert final == pytest.approx(0.1 * 2 * math.pi, rel=0.05)


def test_descend_round_sphere_is_stationary():
    res = minimize_shape(shapes.icosphere(2), "surface-e0", steps=5)
    assert np.all(np.abs(np.diff(res.energies)) < 1e-9)


def test_descend_rejects_infinite_start():
    with pytest.raises(ParameterError):
        descend(lambda s: math.inf, shapes.make_curve("circle", 8))


def test_minimize_shape_kind_checks():
    with pytest.raises(ParameterError):
        minimize_shape(shapes.icosphere(1), "curve-e0")
    with pytest.raises(ParameterError):
        minimize_shape(shapes.make_curve("circle", 8), "surface-e0")
    with pytest.raises(ParameterError):
        minimize_shape(shapes.icosphere(1), "nope")


def test_surface_descent_short_run_regression():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from conftest import conformal_ellipsoid

        m = conformal_ellipsoid(1.3, 1.0, 1.0, 2)
    res = minimize_shape(m, "surface-e0", steps=10)
    assert np.all(np.diff(res.energies) <= 0)
    assert res.energies[-1] < res.energies[0]
    assert sphericity(res.shape.image) < sphericity(m.image)
