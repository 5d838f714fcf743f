"""Finite-difference gradients and backtracking gradient descent over embeddings."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import curve_energy, surface_energy
from .curve_energy import EnergyBreakdown
from .errors import EnergyError, ParameterError
from .geom import ClosedCurve, SphereMesh, curve_normalize, curve_resample, sphericity

Shape = Union[ClosedCurve, SphereMesh]
EnergyFn = Callable[[Shape], Union[float, EnergyBreakdown]]

ARMIJO = 1e-4
MIN_STEP = 1e-12


def coords(shape: Shape) -> np.ndarray:
    return shape.points if isinstance(shape, ClosedCurve) else shape.image


def with_coords(shape: Shape, x: np.ndarray) -> Shape:
    if isinstance(shape, ClosedCurve):
        return ClosedCurve(x)
    return shape.with_image(x)


def _total(value) -> float:
    return value.total if isinstance(value, EnergyBreakdown) else float(value)


def _safe_eval(energy: EnergyFn, shape: Shape, x: np.ndarray):
    """Energy at modified coordinates; degenerate shapes count as +inf."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return energy(with_coords(shape, x))
    except EnergyError:
        return math.inf


def fd_gradient(energy: EnergyFn, shape: Shape, h: float = 1e-5) -> np.ndarray:
    """Central differences in every vertex coordinate.

    Falls back to a one-sided difference (with a warning) where a probe hits
    the +inf sentinel.
    """
    if not h > 0:
        raise ParameterError("h must be positive")
    x0 = coords(shape)
    e0 = _total(_safe_eval(energy, shape, x0))
    if not math.isfinite(e0):
        raise ParameterError("energy is not finite at the starting shape")
    grad = np.zeros_like(x0)
    one_sided = 0
    for idx in np.ndindex(*x0.shape):
        xp = x0.copy()
        xp[idx] += h
        xm = x0.copy()
        xm[idx] -= h
        ep = _total(_safe_eval(energy, shape, xp))
        em = _total(_safe_eval(energy, shape, xm))
        if math.isfinite(ep) and math.isfinite(em):
            grad[idx] = (ep - em) / (2.0 * h)
        elif math.isfinite(ep):
            grad[idx] = (ep - e0) / h
            one_sided += 1
        elif math.isfinite(em):
            grad[idx] = (e0 - em) / h
            one_sided += 1
    if one_sided:
        warnings.warn(f"{one_sided} coordinates used one-sided differences", RuntimeWarning, stacklevel=2)
    return grad


@dataclass
class Record:
    iteration: int
    e0: float
    regularizer: float
    total: float
    step_size: float
    sphericity: float
    kind: str = "step"


@dataclass
class DescentResult:
    shape: Shape
    records: list[Record]
    status: str
    snapshots: dict[int, Shape] = field(default_factory=dict)

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.total for r in self.records])


def _record(it: int, value, shape: Shape, step: float, kind: str = "step") -> Record:
    if isinstance(value, EnergyBreakdown):
        e0, reg, tot = value.e0, value.regularizer, value.total
    else:
        e0, reg, tot = float(value), 0.0, float(value)
    return Record(it, e0, reg, tot, step, sphericity(coords(shape)), kind)


def descend(
    energy: EnergyFn,
    shape: Shape,
    steps: int = 200,
    step0: float = 1e-2,
    gradient: Callable[[Shape], np.ndarray] | None = None,
    gauge: Callable[[Shape], Shape] | None = None,
    gauge_every: int = 10,
    snapshot_every: int = 0,
    rel_tol: float = 1e-9,
    fd_h: float = 1e-5,
    precondition: Callable[[Shape, np.ndarray], np.ndarray] | None = None,
) -> DescentResult:
    """Gradient descent with Armijo backtracking.

    ``precondition(shape, g)`` may map the gradient to a descent direction
    in another metric (see :func:`sobolev_direction`). Every ``gauge_every``
    steps the optional ``gauge`` re-parametrizes the shape; the result is
    kept only if the energy does not go up, so the logged energies never
    increase.
    """
    value = energy(shape)
    if not math.isfinite(_total(value)):
        raise ParameterError("energy is not finite at the starting shape")
    records = [_record(0, value, shape, 0.0, "start")]
    snapshots = {0: shape} if snapshot_every else {}
    step = step0
    status = "max-steps"
    grad_fn = gradient or (lambda s: fd_gradient(energy, s, fd_h))
    for it in range(1, steps + 1):
        x = coords(shape)
        g = grad_fn(shape)
        direction = precondition(shape, g) if precondition is not None else g
        gg = float(np.sum(g * direction))
        if not gg > 0.0:
            status = "converged"
            break
        e_cur = _total(value)
        while step >= MIN_STEP:
            trial = _safe_eval(energy, shape, x - step * direction)
            if _total(trial) <= e_cur - ARMIJO * step * gg:
                break
            step *= 0.5
        else:
            status = "converged"
            break
        shape = with_coords(shape, x - step * direction)
        value = trial
        records.append(_record(it, value, shape, step))
        if snapshot_every and it % snapshot_every == 0:
            snapshots[it] = shape
        step *= 2.0
        if gauge is not None and gauge_every and it % gauge_every == 0:
            try:
                gauged = gauge(shape)
                g_value = energy(gauged)
            except EnergyError:
                g_value = None
            if g_value is not None and _total(g_value) <= _total(value):
                shape, value = gauged, g_value
                records.append(_record(it, value, shape, 0.0, "gauge"))
        if e_cur - _total(value) < rel_tol * abs(e_cur):
            status = "converged"
            break
    return DescentResult(shape, records, status, snapshots)


def _curve_stiffness(c: ClosedCurve):
    from scipy import sparse

    n = len(c)
    inv = 1.0 / c.segment_lengths
    i = np.arange(n)
    j = (i + 1) % n
    W = sparse.coo_matrix((np.concatenate([inv, inv]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
    return c.weights, sparse.diags(np.asarray(W.sum(axis=1)).ravel()) - W


def sobolev_direction(shape: Shape, g: np.ndarray, length2: float | None = None) -> np.ndarray:
    """Solve (M + s L) v = g: the gradient in an H^1 metric on the image.

    M holds vertex weights (curve) or barycentric image areas (mesh), L is the
    matching stiffness matrix, and s (a squared length, default the mean
    squared distance to the centroid) sets how strongly short-wavelength
    components are damped.
    """
    from scipy import sparse
    from scipy.sparse.linalg import spsolve

    x = coords(shape)
    if isinstance(shape, ClosedCurve):
        mass, L = _curve_stiffness(shape)
    else:
        from .geom import cotangent_laplacian, dual_areas

        _, mass = dual_areas(shape)
        L = cotangent_laplacian(shape.image, shape.faces, shape.n_vertices)
    if length2 is None:
        length2 = float(np.mean(np.sum((x - x.mean(axis=0)) ** 2, axis=1)))
    scale = mass.mean()
    S = (sparse.diags(mass / scale) + length2 * L / scale).tocsc()
    return np.asarray(spsolve(S, g)).reshape(g.shape)


# ---------------------------------------------------------------------------
# ready-made energies for the CLI and tests


def curve_objective(kind: str, lam: float = 1.0) -> EnergyFn:
    """Energy of the length-normalized copy of a curve (scale-free objective)."""

    def fn(c: ClosedCurve):
        cn = curve_normalize(c)
        if kind == "curve-e0":
            return curve_energy.curve_e0(cn, check_embedded=False)
        return curve_energy.curve_e_lambda(cn, lam, check_embedded=False)

    return fn


def curve_gauge(c: ClosedCurve) -> ClosedCurve:
    return curve_normalize(curve_resample(curve_normalize(c)))


def surface_objective(kind: str, lam: float = 1.0, p: float = 2.0) -> EnergyFn:
    def fn(m: SphereMesh):
        if kind == "surface-e0":
            return surface_energy.surface_e0(m, check=False)
        return surface_energy.surface_e_lambda(m, lam, p, check=False)

    return fn


def surface_gradient(kind: str, lam: float = 1.0, p: float = 2.0):
    """Analytic gradient for surface-e0; None (use finite differences) otherwise."""
    if kind == "surface-e0":
        return surface_energy.surface_e0_gradient
    return None


def surface_gauge(m: SphereMesh) -> SphereMesh:
    return surface_energy.conformalize(m.with_image(m.image, validate=False), max_iters=10)


def minimize_shape(shape: Shape, kind: str, lam: float = 1.0, p: float = 2.0, steps: int = 200, step0: float | None = None) -> DescentResult:
    """Dispatch used by the CLI ``minimize`` subcommand."""
    if kind in ("curve-e0", "curve-elambda"):
        if not isinstance(shape, ClosedCurve):
            raise ParameterError(f"{kind} needs a curve input")
        return descend(
            curve_objective(kind, lam),
            shape,
            steps,
            step0 or 1e-3,
            gauge=curve_gauge,
            precondition=sobolev_direction,
        )
    if kind in ("surface-e0", "surface-elambda"):
        if not isinstance(shape, SphereMesh):
            raise ParameterError(f"{kind} needs a mesh input")
        return descend(
            surface_objective(kind, lam, p),
            shape,
            steps,
            step0 or 1e-2,
            gradient=surface_gradient(kind, lam, p),
            gauge=surface_gauge,
            precondition=sobolev_direction,
        )
    raise ParameterError(f"unknown energy {kind!r}")
