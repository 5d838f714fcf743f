"""Regularized knot energy, its curvature-penalized variant, and the link term.

The knot energy is evaluated on curves scaled to length 2*pi, with domain
points placed by arclength on the circle (see ``ClosedCurve.domain_points``).
Pair sums use a vertex midpoint rule that drops cyclically adjacent pairs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ParameterError, PreconditionError, SingularityWarning
from .geom import TWO_PI, ClosedCurve, curve_curvature, curve_min_gap, curves_min_gap
from .parallel import block_sum

SELF_INTERSECTION_TOL = 1e-6


@dataclass
class EnergyBreakdown:
    e0: float
    regularizer: float
    lam: float
    p: float | None = None
    q: float | None = None
    total: float = field(init=False)
    density: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.p is not None and self.q is None:
            self.q = self.p / (self.p - 1.0)
        self.total = self.e0 + self.regularizer

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("density")
        d["lambda"] = d.pop("lam")
        return d


def _check_curve(c: ClosedCurve, check_embedded: bool = True) -> None:
    if not c.is_normalized():
        raise PreconditionError(f"curve must be normalized to length 2*pi (length is {c.length:.12g})")
    if check_embedded:
        gap, (i, j) = curve_min_gap(c)
        if gap <= SELF_INTERSECTION_TOL:
            raise PreconditionError(f"curve is not embedded: segments {i} and {j} are {gap:.3g} apart")


def _pair_mask(n: int, start: int, stop: int) -> np.ndarray:
    rows = np.arange(start, stop)[:, None]
    gap = np.abs(rows - np.arange(n)[None])
    return np.minimum(gap, n - gap) >= 2


def curve_e0(c: ClosedCurve, diag_correction: bool = False, check_embedded: bool = True) -> float:
    """Double sum of (1/|f(x)-f(y)|^2 - 1/|x-y|^2) w_x w_y over non-adjacent vertex pairs.

    The embedding term comes first so that the energy is small on round
    curves and grows without bound as two arcs approach each other. With
    ``diag_correction`` the dropped near-diagonal cells are filled in with
    the diagonal limit of the integrand, (kappa^2 - 1)/12.
    """
    _check_curve(c, check_embedded)
    f = c.points
    x = c.domain_points()
    w = c.weights
    n = len(c)
    floor = SELF_INTERSECTION_TOL**2
    hit: list[tuple[int, int]] = []

    def rows(s: int, e: int) -> float:
        dx = np.zeros((e - s, n))
        df = np.zeros((e - s, n))
        for k in range(x.shape[1]):
            dx += (x[s:e, k, None] - x[None, :, k]) ** 2
        for k in range(f.shape[1]):
            df += (f[s:e, k, None] - f[None, :, k]) ** 2
        mask = _pair_mask(n, s, e)
        if np.any(mask & (df <= floor)):
            i, j = np.argwhere(mask & (df <= floor))[0]
            hit.append((s + int(i), int(j)))
            return math.inf
        with np.errstate(divide="ignore"):
            term = np.where(mask, 1.0 / np.where(mask, df, 1.0) - 1.0 / np.where(mask, dx, 1.0), 0.0)
        return float(np.sum((term * w[None]).sum(axis=1) * w[s:e]))

    total = block_sum(rows, n)
    if math.isinf(total):
        warnings.warn(f"coincident curve vertices {hit[0]}; energy is +inf", SingularityWarning, stacklevel=2)
        return math.inf
    if diag_correction:
        kappa = curve_curvature(c)
        near = w + np.roll(w, 1) + np.roll(w, -1)
        total += math.fsum((kappa**2 - 1.0) / 12.0 * w * near)
    return total


def curve_e_lambda(c: ClosedCurve, lam: float, diag_correction: bool = False, check_embedded: bool = True) -> EnergyBreakdown:
    """Knot energy plus lam * sum(kappa_i^2 w_i)."""
    if not lam > 0:
        raise ParameterError("lambda must be positive")
    e0 = curve_e0(c, diag_correction=diag_correction, check_embedded=check_embedded)
    kappa = curve_curvature(c)
    density = kappa**2 * c.weights
    return EnergyBreakdown(e0=e0, regularizer=lam * math.fsum(density), lam=lam, density=density)


def link_energy_u(c1: ClosedCurve, c2: ClosedCurve, min_gap: float = SELF_INTERSECTION_TOL) -> float:
    """Unregularized cross term sum w_i v_j / |f_i - g_j|^2 on the raw geometry."""
    gap, (i, j) = curves_min_gap(c1, c2)
    if gap <= min_gap:
        warnings.warn(
            f"curves touch: segment {i} of the first and {j} of the second are {gap:.3g} apart",
            SingularityWarning,
            stacklevel=2,
        )
        return math.inf
    f, g = c1.points, c2.points
    w, v = c1.weights, c2.weights

    def rows(s: int, e: int) -> float:
        d = np.zeros((e - s, len(g)))
        for k in range(f.shape[1]):
            d += (f[s:e, k, None] - g[None, :, k]) ** 2
        return float(np.sum((v[None] / d).sum(axis=1) * w[s:e]))

    return block_sum(rows, len(f))


def link_energy_total(c1: ClosedCurve, c2: ClosedCurve) -> float:
    """E(f + g) = E0(f) + E0(g) + E_u(f; g) for two normalized, disjoint components."""
    return curve_e0(c1) + curve_e0(c2) + link_energy_u(c1, c2)
