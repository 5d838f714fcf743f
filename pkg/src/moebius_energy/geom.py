"""Shape containers and discrete curvature operators.

Curves are closed polylines in R^n. Sphere meshes carry two vertex arrays
over a shared triangulation: ``domain`` (unit vectors on S^2) and ``image``
(the embedding in R^n). Every quantity here is computed with plain numpy on
flat (chord) triangles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import GeometryWarning, InvalidShapeError

TWO_PI = 2.0 * math.pi
COT_CLAMP = 1.0e4


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True, eq=False)
class ClosedCurve:
    """Closed polyline; the last vertex connects back to the first."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 8 or pts.shape[1] < 2:
            raise InvalidShapeError(f"curve needs >= 8 points in R^n, n >= 2; got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidShapeError("curve has non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if np.any(self.segment_lengths <= 0.0):
            bad = np.flatnonzero(self.segment_lengths <= 0.0)
            raise InvalidShapeError(f"zero-length segments at {bad.tolist()}")

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @cached_property
    def segment_lengths(self) -> np.ndarray:
        """Length of segment i, which joins vertex i to vertex i+1."""
        return np.linalg.norm(np.roll(self.points, -1, axis=0) - self.points, axis=1)

    @property
    def length(self) -> float:
        return float(math.fsum(self.segment_lengths))

    @cached_property
    def arclength(self) -> np.ndarray:
        """Cumulative arclength s_i at vertex i (s_0 = 0)."""
        return np.concatenate([[0.0], np.cumsum(self.segment_lengths)[:-1]])

    @cached_property
    def angles(self) -> np.ndarray:
        return TWO_PI * self.arclength / self.length

    @cached_property
    def weights(self) -> np.ndarray:
        """Vertex quadrature weights: mean of the two adjacent segment lengths."""
        seg = self.segment_lengths
        return 0.5 * (seg + np.roll(seg, 1))

    def is_normalized(self, tol: float = 1e-9) -> bool:
        return abs(self.length - TWO_PI) <= tol

    def domain_points(self) -> np.ndarray:
        """Domain positions on the circle whose inscribed polygon has perimeter 2*pi.

        The radius is 1 + O(N^-2); using it makes a normalized regular polygon
        coincide with its own domain, so the regularized energy vanishes on
        round circles at every resolution.
        """
        th = self.angles
        dth = np.diff(np.concatenate([th, [TWO_PI]]))
        radius = TWO_PI / math.fsum(2.0 * np.sin(0.5 * dth))
        return radius * np.column_stack([np.cos(th), np.sin(th)])

    def to_dict(self) -> dict:
        return {"n": self.n, "points": self.points.tolist()}


def curve_normalize(c: ClosedCurve) -> ClosedCurve:
    """Uniformly scale about the centroid so that the total length is 2*pi."""
    centroid = c.points.mean(axis=0)
    scale = TWO_PI / c.length
    return ClosedCurve(centroid + scale * (c.points - centroid))


def curve_resample(c: ClosedCurve, n_points: int | None = None) -> ClosedCurve:
    """Resample to vertices equally spaced in arclength (linear interpolation)."""
    n_points = n_points or len(c)
    pts = np.vstack([c.points, c.points[:1]])
    s = np.concatenate([[0.0], np.cumsum(c.segment_lengths)])
    target = np.linspace(0.0, s[-1], n_points, endpoint=False)
    out = np.column_stack([np.interp(target, s, pts[:, k]) for k in range(c.n)])
    return ClosedCurve(out)


def curve_curvature(c: ClosedCurve) -> np.ndarray:
    """Turning angle at each vertex divided by the vertex weight."""
    pts = c.points
    t_in = pts - np.roll(pts, 1, axis=0)
    t_out = np.roll(pts, -1, axis=0) - pts
    cosang = np.einsum("ij,ij->i", t_in, t_out) / (
        np.linalg.norm(t_in, axis=1) * np.linalg.norm(t_out, axis=1)
    )
    turning = np.arccos(np.clip(cosang, -1.0, 1.0))
    return turning / c.weights


def _segment_distances(p0, p1, q0, q1):
    """Distances between segment batches [p0,p1] and [q0,q1] (broadcasting)."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.sum(d1 * d1, axis=-1)
    e = np.sum(d2 * d2, axis=-1)
    b = np.sum(d1 * d2, axis=-1)
    c = np.sum(d1 * r, axis=-1)
    f = np.sum(d2 * r, axis=-1)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-300, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = (b * s + f) / e
    t_clip = np.clip(t, 0.0, 1.0)
    s = np.where(t != t_clip, np.clip((b * t_clip - c) / a, 0.0, 1.0), s)
    diff = (p0 + s[..., None] * d1) - (q0 + t_clip[..., None] * d2)
    return np.linalg.norm(diff, axis=-1)


def curve_min_gap(c: ClosedCurve) -> tuple[float, tuple[int, int]]:
    """Smallest distance between non-adjacent segments and the segment pair realizing it."""
    p0 = c.points
    p1 = np.roll(p0, -1, axis=0)
    n = len(c)
    d = _segment_distances(p0[:, None], p1[:, None], p0[None], p1[None])
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None])
    gap = np.minimum(gap, n - gap)
    d[gap < 2] = np.inf
    k = int(np.argmin(d))
    i, j = divmod(k, n)
    return float(d[i, j]), (i, j)


def curves_min_gap(c1: ClosedCurve, c2: ClosedCurve) -> tuple[float, tuple[int, int]]:
    a0, b0 = c1.points, c2.points
    a1, b1 = np.roll(a0, -1, axis=0), np.roll(b0, -1, axis=0)
    d = _segment_distances(a0[:, None], a1[:, None], b0[None], b1[None])
    k = int(np.argmin(d))
    i, j = divmod(k, len(c2))
    return float(d[i, j]), (i, j)


# ---------------------------------------------------------------------------
# sphere meshes


def _triangle_areas(pts: np.ndarray, faces: np.ndarray) -> np.ndarray:
    u = pts[faces[:, 1]] - pts[faces[:, 0]]
    v = pts[faces[:, 2]] - pts[faces[:, 0]]
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    uv = np.einsum("ij,ij->i", u, v)
    return 0.5 * np.sqrt(np.maximum(uu * vv - uv * uv, 0.0))


@dataclass(frozen=True, eq=False)
class SphereMesh:
    """Triangulated 2-sphere with paired domain (on S^2) and image (in R^n) vertices."""

    domain: np.ndarray
    image: np.ndarray
    faces: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        dom = np.array(self.domain, dtype=float)
        img = np.array(self.image, dtype=float)
        fac = np.array(self.faces, dtype=np.int64)
        if dom.ndim != 2 or dom.shape[1] != 3:
            raise InvalidShapeError("domain must be a (V, 3) array")
        if img.ndim != 2 or img.shape[0] != dom.shape[0] or img.shape[1] < 3:
            raise InvalidShapeError("image must be a (V, n) array with n >= 3 and V matching the domain")
        if fac.ndim != 2 or fac.shape[1] != 3:
            raise InvalidShapeError("faces must be a (F, 3) integer array")
        for arr in (dom, img, fac):
            arr.setflags(write=False)
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "image", img)
        object.__setattr__(self, "faces", fac)
        if self.validate:
            self.check()

    @property
    def n(self) -> int:
        return self.image.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.domain.shape[0]

    def check(self) -> None:
        V, F = self.n_vertices, len(self.faces)
        if F == 0 or self.faces.min() < 0 or self.faces.max() >= V:
            raise InvalidShapeError("face indices out of range")
        if not (np.all(np.isfinite(self.domain)) and np.all(np.isfinite(self.image))):
            raise InvalidShapeError("non-finite vertex coordinates")
        directed = self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        keys = directed[:, 0] * V + directed[:, 1]
        if len(np.unique(keys)) != len(keys):
            raise InvalidShapeError("faces are not consistently oriented (repeated directed edge)")
        rev = directed[:, 1] * V + directed[:, 0]
        if not np.all(np.isin(rev, keys)):
            raise InvalidShapeError("mesh is not closed: some edge borders only one face")
        E = len(keys) // 2
        if V - E + F != 2:
            raise InvalidShapeError(f"Euler characteristic is {V - E + F}, expected 2")
        norms = np.linalg.norm(self.domain, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise InvalidShapeError("domain vertices must lie on the unit sphere")
        if np.any(_triangle_areas(self.domain, self.faces) <= 0.0):
            raise InvalidShapeError("degenerate domain triangle")
        if np.any(_triangle_areas(self.image, self.faces) <= 0.0):
            bad = np.flatnonzero(_triangle_areas(self.image, self.faces) <= 0.0)
            raise InvalidShapeError(f"degenerate image triangles {bad[:10].tolist()}")

    def with_image(self, image: np.ndarray, validate: bool = True) -> "SphereMesh":
        return SphereMesh(self.domain, image, self.faces, validate=validate)

    def with_domain(self, domain: np.ndarray, validate: bool = True) -> "SphereMesh":
        return SphereMesh(domain, self.image, self.faces, validate=validate)

    @cached_property
    def edges(self) -> np.ndarray:
        """Undirected edges as sorted (i, j) pairs, i < j."""
        e = self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        V = self.n_vertices
        e = self.edges
        data = np.ones(2 * len(e))
        A = sparse.csr_matrix(
            (data, (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
            shape=(V, V),
        )
        A.sort_indices()
        return A

    def face_areas(self, which: str = "image") -> np.ndarray:
        pts = self.image if which == "image" else self.domain
        return _triangle_areas(pts, self.faces)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "domain": self.domain.tolist(),
            "image": self.image.tolist(),
            "faces": self.faces.tolist(),
        }


def _vertex_sum(faces: np.ndarray, per_face: np.ndarray, V: int) -> np.ndarray:
    out = np.zeros(V)
    for k in range(3):
        np.add.at(out, faces[:, k], per_face)
    return out


def dual_areas(m: SphereMesh) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric (one-third) dual cell areas of the domain and the image."""
    ta = m.face_areas("domain")
    tA = m.face_areas("image")
    if np.any(ta <= 0.0) or np.any(tA <= 0.0):
        raise InvalidShapeError("zero-area triangle")
    V = m.n_vertices
    return _vertex_sum(m.faces, ta / 3.0, V), _vertex_sum(m.faces, tA / 3.0, V)


def conformal_factor(m: SphereMesh) -> np.ndarray:
    """Per-vertex length stretch sqrt(A_i / a_i)."""
    a, A = dual_areas(m)
    if np.any(a <= 0.0):
        raise InvalidShapeError("zero domain dual area")
    return np.sqrt(A / a)


def corner_cotangents(pts: np.ndarray, faces: np.ndarray, clamp: float = COT_CLAMP) -> np.ndarray:
    """Cotangent of the angle at each corner, shape (F, 3); works in any R^n."""
    cots = np.empty((len(faces), 3))
    for k in range(3):
        p = pts[faces[:, k]]
        u = pts[faces[:, (k + 1) % 3]] - p
        v = pts[faces[:, (k + 2) % 3]] - p
        uv = np.einsum("ij,ij->i", u, v)
        cross = np.sqrt(np.maximum(np.einsum("ij,ij->i", u, u) * np.einsum("ij,ij->i", v, v) - uv * uv, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            cots[:, k] = uv / cross
    bad = ~np.isfinite(cots) | (np.abs(cots) > clamp)
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} cotangent weights clamped to +-{clamp:g}", GeometryWarning, stacklevel=2)
        cots = np.clip(np.nan_to_num(cots, nan=clamp, posinf=clamp, neginf=-clamp), -clamp, clamp)
    return cots


def cotangent_weights(pts: np.ndarray, faces: np.ndarray, V: int) -> sparse.csr_matrix:
    """Symmetric matrix W with W_ij = (cot alpha + cot beta) / 2 on edges, zero diagonal."""
    cots = corner_cotangents(pts, faces)
    rows, cols, vals = [], [], []
    for k in range(3):
        i = faces[:, (k + 1) % 3]
        j = faces[:, (k + 2) % 3]
        w = 0.5 * cots[:, k]
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    W = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(V, V))
    W.sum_duplicates()
    return W


def cotangent_laplacian(pts: np.ndarray, faces: np.ndarray, V: int) -> sparse.csr_matrix:
    """Positive semi-definite stiffness matrix L = D - W."""
    W = cotangent_weights(pts, faces, V)
    return (sparse.diags(np.asarray(W.sum(axis=1)).ravel()) - W).tocsr()


def mixed_areas(m: SphereMesh) -> np.ndarray:
    """Mixed Voronoi image areas (Voronoi cells, with the obtuse-triangle fallback).

    Positive on any mesh and summing to the total image area. Used to turn
    integrated curvature into pointwise curvature.
    """
    faces, pts = m.faces, m.image
    cots = corner_cotangents(pts, faces)
    area = _triangle_areas(pts, faces)
    sq = np.empty((len(faces), 3))
    for k in range(3):
        e = pts[faces[:, (k + 2) % 3]] - pts[faces[:, (k + 1) % 3]]
        sq[:, k] = np.einsum("ij,ij->i", e, e)
    obtuse = cots < 0.0
    any_obtuse = obtuse.any(axis=1)
    out = np.zeros(m.n_vertices)
    for k in range(3):
        j, l = (k + 1) % 3, (k + 2) % 3
        voronoi = (sq[:, l] * cots[:, l] + sq[:, j] * cots[:, j]) / 8.0
        share = np.where(any_obtuse, np.where(obtuse[:, k], 0.5 * area, 0.25 * area), voronoi)
        np.add.at(out, faces[:, k], share)
    return out


def mean_curvature_vector(m: SphereMesh) -> np.ndarray:
    """Mean curvature vector with |H| = k1 + k2 (trace convention), per vertex."""
    L = cotangent_laplacian(m.image, m.faces, m.n_vertices)
    return -(L @ m.image) / mixed_areas(m)[:, None]


def angle_defects(m: SphereMesh) -> np.ndarray:
    V = m.n_vertices
    angles = np.empty((len(m.faces), 3))
    pts = m.image
    for k in range(3):
        p = pts[m.faces[:, k]]
        u = pts[m.faces[:, (k + 1) % 3]] - p
        v = pts[m.faces[:, (k + 2) % 3]] - p
        uv = np.einsum("ij,ij->i", u, v)
        cross = np.sqrt(np.maximum(np.einsum("ij,ij->i", u, u) * np.einsum("ij,ij->i", v, v) - uv * uv, 0.0))
        angles[:, k] = np.arctan2(cross, uv)
    total = np.zeros(V)
    for k in range(3):
        np.add.at(total, m.faces[:, k], angles[:, k])
    return TWO_PI - total


def gaussian_curvature(m: SphereMesh) -> np.ndarray:
    """Angle defect over the mixed Voronoi area."""
    return angle_defects(m) / mixed_areas(m)


def second_form_norm(m: SphereMesh, tol_frac: float = 0.05) -> np.ndarray:
    """|H|^2 - 2K per vertex (the squared norm of the second fundamental form)."""
    H = mean_curvature_vector(m)
    K = gaussian_curvature(m)
    val = np.einsum("ij,ij->i", H, H) - 2.0 * K
    low = val.min()
    if low < 0.0:
        if -low > tol_frac * max(val.max(), 0.0):
            warnings.warn(
                f"|H|^2-2K reached {low:.3g}, beyond {tol_frac:g} of the maximum; clamped to 0",
                GeometryWarning,
                stacklevel=2,
            )
        val = np.maximum(val, 0.0)
    return val


def gauss_map(m: SphereMesh) -> np.ndarray:
    """Per-face orthogonal projector onto the image tangent plane, shape (F, n, n)."""
    if np.any(m.face_areas("image") <= 0.0):
        raise InvalidShapeError("degenerate face in gauss_map")
    return gauss_map_faces(m.image, m.faces)


def grassmann_distance(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Frobenius norm of the projector difference (broadcasts over leading axes)."""
    d = P - Q
    return np.sqrt(np.sum(d * d, axis=(-2, -1)))


def vertex_tangent_projector(m: SphereMesh, i: int) -> np.ndarray:
    """Rank-2 projector at vertex i from the area-weighted incident face projectors."""
    inc = np.flatnonzero(np.any(m.faces == i, axis=1))
    P = gauss_map_faces(m.image, m.faces[inc])
    w = _triangle_areas(m.image, m.faces[inc])
    S = np.einsum("f,fij->ij", w, P)
    vals, vecs = np.linalg.eigh(S)
    B = vecs[:, -2:]
    return B @ B.T


def gauss_map_faces(image: np.ndarray, faces: np.ndarray) -> np.ndarray:
    p = image[faces]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    u = e1 / np.linalg.norm(e1, axis=1)[:, None]
    w = e2 - np.einsum("ij,ij->i", e2, u)[:, None] * u
    v = w / np.linalg.norm(w, axis=1)[:, None]
    return np.einsum("fi,fj->fij", u, u) + np.einsum("fi,fj->fij", v, v)


def sphericity(points: np.ndarray) -> float:
    """Coefficient of variation (std / mean) of distances to the centroid."""
    r = np.linalg.norm(points - points.mean(axis=0), axis=1)
    return float(r.std() / r.mean())


@dataclass(frozen=True, eq=False)
class SurfacePatch:
    """Triangulated surface with boundary, plus named vertex loops on it.

    Used for annuli, whose two boundary loops are stored under ``loops``.
    """

    points: np.ndarray
    faces: np.ndarray
    loops: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        fac = np.array(self.faces, dtype=np.int64)
        if pts.ndim != 2 or fac.ndim != 2 or fac.shape[1] != 3:
            raise InvalidShapeError("patch needs (V, n) points and (F, 3) faces")
        if fac.size and (fac.min() < 0 or fac.max() >= len(pts)):
            raise InvalidShapeError("face indices out of range")
        if np.any(_triangle_areas(pts, fac) <= 0.0):
            raise InvalidShapeError("degenerate patch triangle")
        loops = {str(k): np.array(v, dtype=np.int64) for k, v in dict(self.loops).items()}
        for k, v in loops.items():
            if v.ndim != 1 or len(v) < 3 or v.min() < 0 or v.max() >= len(pts):
                raise InvalidShapeError(f"loop {k!r} needs at least 3 vertex indices in range")
        for arr in (pts, fac, *loops.values()):
            arr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "faces", fac)
        object.__setattr__(self, "loops", loops)

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    def with_points(self, points: np.ndarray) -> "SurfacePatch":
        return SurfacePatch(points, self.faces, self.loops)

    def to_dict(self) -> dict:
        return {
            "n": self.points.shape[1],
            "points": self.points.tolist(),
            "faces": self.faces.tolist(),
            "loops": {k: v.tolist() for k, v in self.loops.items()},
        }
