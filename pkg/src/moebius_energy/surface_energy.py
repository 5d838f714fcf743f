"""Surface energies on conformally parametrized sphere meshes.

``surface_e0`` is the squared-integrand pair energy built from the conformal
factor d_i = sqrt(A_i / a_i). Curvature terms use the mixed-area curvature
operators from :mod:`geom`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .curve_energy import EnergyBreakdown
from .errors import ConformalityError, ConvergenceWarning, ParameterError, SingularityWarning
from .geom import (
    SphereMesh,
    _triangle_areas,
    cotangent_laplacian,
    dual_areas,
    mixed_areas,
    second_form_norm,
)
from .moebius import inverse_stereographic
from .parallel import block_sum, block_sum_arrays

CONFORMALITY_GATE = 1.2
CONFORMALITY_HARD = 2.0


# ---------------------------------------------------------------------------
# conformality


def conformality_error(m: SphereMesh) -> np.ndarray:
    """Per-face ratio of the singular values of the affine domain -> image map."""
    return _distortion(m.domain, m.image, m.faces)


def _distortion(dom: np.ndarray, img: np.ndarray, faces: np.ndarray) -> np.ndarray:
    e1 = dom[faces[:, 1]] - dom[faces[:, 0]]
    e2 = dom[faces[:, 2]] - dom[faces[:, 0]]
    E1 = img[faces[:, 1]] - img[faces[:, 0]]
    E2 = img[faces[:, 2]] - img[faces[:, 0]]
    g11, g12, g22 = (e1 * e1).sum(1), (e1 * e2).sum(1), (e2 * e2).sum(1)
    h11, h12, h22 = (E1 * E1).sum(1), (E1 * E2).sum(1), (E2 * E2).sum(1)
    a = g11 * g22 - g12 * g12
    b = g11 * h22 + g22 * h11 - 2.0 * g12 * h12
    c = h11 * h22 - h12 * h12
    if np.any(a <= 0.0) or np.any(c <= 0.0):
        from .errors import InvalidShapeError

        raise InvalidShapeError("degenerate triangle in distortion")
    root = np.sqrt(np.maximum(b * b - 4.0 * a * c, 0.0))
    big = (b + root) / (2.0 * a)
    small = (2.0 * c) / (b + root)
    return np.sqrt(big / small)


@dataclass
class DistortionSummary:
    max: float
    mean: float

    @classmethod
    def of(cls, m: SphereMesh) -> "DistortionSummary":
        d = conformality_error(m)
        w = m.face_areas("image")
        return cls(float(d.max()), float(np.sum(d * w) / np.sum(w)))


def _ball_automorphism(u: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Moebius map of the unit ball sending a to 0, applied to points of S^2."""
    aa = a @ a
    d = u - a
    num = (1.0 - aa) * d - np.sum(d * d, axis=1)[:, None] * a
    den = 1.0 - 2.0 * (u @ a) + aa
    v = num / den[:, None]
    return v / np.linalg.norm(v, axis=1)[:, None]


def moebius_center(u: np.ndarray, faces: np.ndarray, tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
    """Drive the area-weighted centroid of the domain to the origin by Moebius maps of S^2."""
    for _ in range(max_iter):
        area = _triangle_areas(u, faces)
        w = np.zeros(len(u))
        for k in range(3):
            np.add.at(w, faces[:, k], area / 3.0)
        c = (w[:, None] * u).sum(axis=0) / w.sum()
        if np.linalg.norm(c) < tol:
            break
        u = _ball_automorphism(u, c)
    return u


def _tangent_frames(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.where(np.abs(u[:, :1]) < 0.9, np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
    t1 = np.cross(u, ref)
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    return t1, np.cross(u, t1)


def _harmonic_iterations(m: SphereMesh, u: np.ndarray, L: sparse.csr_matrix, max_iters: int, tol: float, damping: float):
    """Damped tangent-space Gauss-Newton on the Dirichlet energy; yields each iterate."""
    V = m.n_vertices
    L3 = sparse.kron(L, sparse.identity(3)).tocsr()
    idx = np.arange(V)
    rows = np.concatenate([3 * idx + k for k in range(3)] * 2)
    cols = np.concatenate([idx] * 3 + [idx + V] * 3)
    scale = L.diagonal().mean()
    for _ in range(max_iters):
        t1, t2 = _tangent_frames(u)
        vals = np.concatenate([t1[:, k] for k in range(3)] + [t2[:, k] for k in range(3)])
        T = sparse.csr_matrix((vals, (rows, cols)), shape=(3 * V, 2 * V))
        grad = T.T @ (L3 @ u.ravel())
        H = (T.T @ L3 @ T + damping * scale * sparse.identity(2 * V)).tocsc()
        step = (T @ spsolve(H, -grad)).reshape(V, 3)
        u = u + step
        u /= np.linalg.norm(u, axis=1)[:, None]
        u = moebius_center(u, m.faces)
        yield u
        if np.abs(step).max() < tol:
            return


def conformalize(m: SphereMesh, max_iters: int = 40, tol: float = 1e-7, damping: float = 1e-3) -> SphereMesh:
    """Replace the domain by a discrete harmonic map of the image onto S^2.

    Minimizes the Dirichlet energy of the domain map (cotangent weights from
    the image metric) with reprojection onto the sphere and Moebius centering.
    Two starts are tried: the current domain and the radial projection of
    the image about its centroid. The iterate with the smallest maximum
    distortion wins, the input included, so distortion never increases.
    """
    L = cotangent_laplacian(m.image, m.faces, m.n_vertices)
    best_u = m.domain
    best = DistortionSummary.of(m)
    start_best = best
    centered = m.image - m.image.mean(axis=0)
    radial = centered[:, :3] if m.n == 3 else _radial_start(m)
    starts = [m.domain.copy()]
    if radial is not None:
        starts.append(radial / np.linalg.norm(radial, axis=1)[:, None])
    converged = False
    for u0 in starts:
        try:
            u0 = moebius_center(u0, m.faces)
        except FloatingPointError:
            continue
        n_iter = 0
        for u in _harmonic_iterations(m, u0, L, max_iters, tol, damping):
            n_iter += 1
            try:
                d = _distortion(u, m.image, m.faces)
            except ValueError:
                continue
            w = m.face_areas("image")
            cand = DistortionSummary(float(d.max()), float(np.sum(d * w) / np.sum(w)))
            if (cand.max, cand.mean) < (best.max, best.mean):
                best, best_u = cand, u
        converged = converged or n_iter < max_iters
    if not converged and best.max > start_best.max * (1 - 1e-9) and best.max > 1.0 + 1e-9:
        warnings.warn("conformalize did not converge; returning the best iterate", ConvergenceWarning, stacklevel=2)
    out = m.with_domain(_renormalize(best_u))
    return out


def _radial_start(m: SphereMesh) -> np.ndarray | None:
    """Starting domain for n > 3: the three principal directions of the image."""
    centered = m.image - m.image.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    proj = centered @ vt[:3].T
    if np.any(np.linalg.norm(proj, axis=1) < 1e-12):
        return None
    return proj


def _renormalize(u: np.ndarray) -> np.ndarray:
    u = u / np.linalg.norm(u, axis=1)[:, None]
    return u / np.linalg.norm(u, axis=1)[:, None]


def check_conformal(m: SphereMesh, gate: float = CONFORMALITY_GATE, hard: float = CONFORMALITY_HARD) -> float:
    """Enforce the conformality precondition; returns the max distortion."""
    dmax = float(conformality_error(m).max())
    if dmax > hard:
        raise ConformalityError(f"max distortion {dmax:.4g} exceeds {hard:g}; run conformalize first")
    if dmax > gate:
        warnings.warn(f"max distortion {dmax:.4g} is above the {gate:g} gate", ConvergenceWarning, stacklevel=3)
    return dmax


# ---------------------------------------------------------------------------
# pair energies


def _excluded(adj: sparse.csr_matrix, s: int, e: int) -> tuple[np.ndarray, np.ndarray]:
    """Local row / column indices of the diagonal and 1-ring pairs for rows s..e."""
    sub = adj[s:e]
    r = np.repeat(np.arange(e - s), np.diff(sub.indptr))
    rows = np.concatenate([r, np.arange(e - s)])
    cols = np.concatenate([sub.indices, np.arange(s, e)])
    return rows, cols


def _sqdist(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    out = np.zeros((len(P), len(Q)))
    for k in range(P.shape[1]):
        out += (P[:, k, None] - Q[None, :, k]) ** 2
    return out


def _ambient_image(m: SphereMesh, ambient: str) -> SphereMesh:
    if ambient == "euclidean":
        return m
    if ambient == "chordal":
        return m.with_image(inverse_stereographic(m.image))
    raise ParameterError(f"ambient must be 'euclidean' or 'chordal', not {ambient!r}")


def surface_e0(
    m: SphereMesh,
    check: bool = True,
    gate: float = CONFORMALITY_GATE,
    ambient: str = "euclidean",
    embed_tol: float = 1e-6,
) -> float:
    """sum (1/|x_i-x_j|^2 - d_i d_j/|f_i-f_j|^2)^2 a_i a_j over pairs not sharing a face.

    ``ambient='chordal'`` measures the image on S^n through inverse
    stereographic projection instead of in R^n.
    """
    if check:
        check_conformal(m, gate)
    m = _ambient_image(m, ambient)
    x, f = m.domain, m.image
    a, A = dual_areas(m)
    d = np.sqrt(A / a)
    adj = m.adjacency
    diam = float(np.max(np.ptp(f, axis=0)))
    floor = (embed_tol * diam) ** 2
    hit: list[tuple[int, int]] = []

    def rows(s: int, e: int) -> float:
        dx = _sqdist(x[s:e], x)
        df = _sqdist(f[s:e], f)
        r, c = _excluded(adj, s, e)
        dx[r, c] = np.inf
        df[r, c] = np.inf
        if np.any(df <= floor):
            i, j = np.argwhere(df <= floor)[0]
            hit.append((s + int(i), int(j)))
            return math.inf
        t = 1.0 / dx - (d[s:e, None] * d[None]) / df
        return float(np.sum((t * t) @ a * a[s:e]))

    total = block_sum(rows, len(x))
    if math.isinf(total):
        warnings.warn(f"coincident image vertices {hit[0]}; energy is +inf", SingularityWarning, stacklevel=2)
    return total


def _area_gradients(pts: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """d(area_t)/d(p_k) for each face corner, shape (F, 3, n)."""
    out = np.empty((len(faces), 3, pts.shape[1]))
    areas = _triangle_areas(pts, faces)
    for k in range(3):
        p = pts[faces[:, k]]
        q = pts[faces[:, (k + 1) % 3]]
        r = pts[faces[:, (k + 2) % 3]]
        e = r - q
        h = p - q
        ee = np.einsum("ij,ij->i", e, e)
        eh = np.einsum("ij,ij->i", e, h)
        out[:, k] = (ee[:, None] * h - eh[:, None] * e) / (4.0 * areas[:, None])
    return out


def surface_e0_gradient(m: SphereMesh) -> np.ndarray:
    """Gradient of :func:`surface_e0` with respect to the image vertices (domain fixed)."""
    x, f = m.domain, m.image
    a, A = dual_areas(m)
    d = np.sqrt(A / a)
    adj = m.adjacency
    V, n = f.shape

    def rows(s: int, e: int) -> np.ndarray:
        dx = _sqdist(x[s:e], x)
        df = _sqdist(f[s:e], f)
        r, c = _excluded(adj, s, e)
        dx[r, c] = np.inf
        df[r, c] = np.inf
        t = 1.0 / dx - (d[s:e, None] * d[None]) / df
        w = t * (a * d)[None] / (df * df)
        g_pos = 8.0 * (a * d)[s:e, None] * (w.sum(axis=1)[:, None] * f[s:e] - w @ f)
        dd = -4.0 * a[s:e] * ((t / df) @ (a * d))
        out = np.zeros((V, n + 1))
        out[s:e, :n] = g_pos
        out[s:e, n] = dd
        return out

    acc = block_sum_arrays(rows, V)
    grad = acc[:, :n]
    dE_dA = acc[:, n] / (2.0 * a * d)
    face_weight = dE_dA[m.faces].sum(axis=1) / 3.0
    ga = _area_gradients(f, m.faces) * face_weight[:, None, None]
    for k in range(3):
        np.add.at(grad, m.faces[:, k], ga[:, k])
    return grad


def willmore_term(m: SphereMesh) -> float:
    """sum (|H_i|^2 - 2 K_i) A_i with mixed Voronoi areas."""
    g = second_form_norm(m)
    return math.fsum(g * mixed_areas(m))


def _check_lp(lam: float, p: float) -> None:
    if not lam > 0:
        raise ParameterError("lambda must be positive")
    if not p > 1:
        raise ParameterError("p must be > 1")


def _holder_sides(m: SphereMesh, p: float) -> tuple[float, float]:
    g = second_form_norm(m)
    A = mixed_areas(m)
    q = p / (p - 1.0)
    lhs = math.fsum(g**p * A) ** (1.0 / p) * math.fsum(A) ** (1.0 / q)
    return lhs, math.fsum(g * A)


def regularizer(m: SphereMesh, lam: float, p: float) -> float:
    """lam * (sum g^p A)^(1/p) * (sum A)^(1/q), g = |H|^2 - 2K clamped at 0."""
    _check_lp(lam, p)
    return lam * _holder_sides(m, p)[0]


def surface_e_lambda(m: SphereMesh, lam: float, p: float = 2.0, **e0_kwargs) -> EnergyBreakdown:
    _check_lp(lam, p)
    e0 = surface_e0(m, **e0_kwargs)
    return EnergyBreakdown(e0=e0, regularizer=regularizer(m, lam, p), lam=lam, p=p)


def schwarz_check(m: SphereMesh, lam: float = 1.0, p: float = 2.0) -> tuple[float, float, bool]:
    """Both sides of the Hoelder lower bound for the regularizer; exact on discrete sums."""
    _check_lp(lam, p)
    lhs, rhs = _holder_sides(m, p)
    return lhs, rhs, lhs >= rhs - 1e-12 * abs(rhs)


def surface_link_u(m1: SphereMesh, m2: SphereMesh, embed_tol: float = 1e-6) -> float:
    """sum (d_i d'_j / |f_i - g_j|^2)^2 a_i a'_j over all cross pairs."""
    a1, A1 = dual_areas(m1)
    a2, A2 = dual_areas(m2)
    d1, d2 = np.sqrt(A1 / a1), np.sqrt(A2 / a2)
    f, g = m1.image, m2.image
    floor = embed_tol**2
    hit: list[tuple[int, int]] = []

    def rows(s: int, e: int) -> float:
        dfg = _sqdist(f[s:e], g)
        if np.any(dfg <= floor):
            i, j = np.argwhere(dfg <= floor)[0]
            hit.append((s + int(i), int(j)))
            return math.inf
        t = (d1[s:e, None] * d2[None]) / dfg
        return float(np.sum((t * t) @ a2 * a1[s:e]))

    total = block_sum(rows, len(f))
    if math.isinf(total):
        warnings.warn(f"images touch near vertices {hit[0]}; energy is +inf", SingularityWarning, stacklevel=2)
    return total
