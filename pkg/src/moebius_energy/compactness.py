"""Measurable ingredients of the finiteness argument: Gauss-map Hoelder quotients,
sheet-counting ball covers, the divergent disk-pair integral, annulus moduli and
a normalized self-distance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve

from .errors import ConvergenceWarning, ParameterError, TopologyError, UndefinedResultError
from .geom import SphereMesh, SurfacePatch, cotangent_laplacian, gauss_map_faces, vertex_tangent_projector
from .parallel import map_blocks

ALL_PAIRS_FACES = 10_000
SAMPLED_PAIRS = 100_000
SOURCE_BLOCK = 256


# ---------------------------------------------------------------------------
# graphs


def _edge_graph(points: np.ndarray, faces: np.ndarray) -> sparse.csr_matrix:
    e = np.sort(faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    e = np.unique(e, axis=0)
    w = np.linalg.norm(points[e[:, 0]] - points[e[:, 1]], axis=1)
    V = len(points)
    return sparse.csr_matrix((np.concatenate([w, w]), (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))), shape=(V, V))


def _dual_graph(points: np.ndarray, faces: np.ndarray) -> tuple[sparse.csr_matrix, np.ndarray]:
    """Face adjacency across shared edges, weighted by barycenter distance."""
    F = len(faces)
    bary = points[faces].mean(axis=1)
    e = np.sort(faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    owner = np.repeat(np.arange(F), 3)
    order = np.lexsort((e[:, 1], e[:, 0]))
    e, owner = e[order], owner[order]
    same = np.all(e[1:] == e[:-1], axis=1)
    a, b = owner[:-1][same], owner[1:][same]
    w = np.linalg.norm(bary[a] - bary[b], axis=1)
    G = sparse.csr_matrix((np.concatenate([w, w]), (np.concatenate([a, b]), np.concatenate([b, a]))), shape=(F, F))
    return G, bary


# ---------------------------------------------------------------------------
# Gauss map regularity


def gauss_holder_quotient(m: SphereMesh | SurfacePatch, q_exp: float, seed: int = 0, n_pairs: int = SAMPLED_PAIRS) -> float:
    """max |T(a) - T(b)| / dist(a, b)^q_exp over face pairs.

    T is the per-face tangent projector and dist the shortest path between
    face barycenters through the dual graph. Meshes with fewer than 10^4
    faces use every pair; larger ones use ``n_pairs`` seeded random pairs.
    """
    if not 0.0 < q_exp < 1.0:
        raise ParameterError("q_exp must lie in (0, 1)")
    pts = m.image if isinstance(m, SphereMesh) else m.points
    G, _ = _dual_graph(pts, m.faces)
    T = gauss_map_faces(pts, m.faces).reshape(len(m.faces), -1)
    F = len(m.faces)
    sq = np.sum(T * T, axis=1)

    def quotient(src: np.ndarray, dist: np.ndarray, tgt: np.ndarray | None) -> float:
        Tt = T if tgt is None else T[tgt]
        sqt = sq if tgt is None else sq[tgt]
        if tgt is None:
            d2 = sq[src, None] + sqt[None] - 2.0 * T[src] @ Tt.T
        else:
            d2 = sq[src] + sqt - 2.0 * np.einsum("ij,ij->i", T[src], Tt)
        num = np.sqrt(np.maximum(d2, 0.0))
        ok = np.isfinite(dist) & (dist > 0.0)
        if not np.any(ok):
            return 0.0
        return float(np.max(num[ok] / dist[ok] ** q_exp))

    if F < ALL_PAIRS_FACES:

        def block(s: int, e: int) -> float:
            src = np.arange(s, e)
            return quotient(src, csgraph.dijkstra(G, indices=src), None)

        return max(map_blocks(block, F, SOURCE_BLOCK))
    rng = np.random.default_rng(seed)
    n_src = max(1, int(math.sqrt(n_pairs)))
    per = -(-n_pairs // n_src)
    sources = rng.choice(F, size=min(n_src, F), replace=False)
    targets = rng.integers(0, F, size=(len(sources), per))
    dist = csgraph.dijkstra(G, indices=sources)
    best = 0.0
    for r, s in enumerate(sources):
        tg = targets[r]
        best = max(best, quotient(np.full(per, s), dist[r, tg], tg))
    return best


# ---------------------------------------------------------------------------
# sheets and covers


def _inside(m: SphereMesh, center: np.ndarray, radius: float) -> np.ndarray:
    return np.linalg.norm(m.image - np.asarray(center, dtype=float), axis=1) < radius


def _sheets(m: SphereMesh, inside: np.ndarray) -> list[np.ndarray]:
    idx = np.flatnonzero(inside)
    if idx.size == 0:
        return []
    sub = m.adjacency[idx][:, idx]
    n, labels = csgraph.connected_components(sub, directed=False)
    return [idx[labels == c] for c in range(n)]


def sheet_count(m: SphereMesh, center: np.ndarray, radius: float) -> int:
    """Connected components of the sub-mesh spanned by image vertices in the ball."""
    if not radius > 0:
        raise ParameterError("radius must be positive")
    return len(_sheets(m, _inside(m, center, radius)))


def _sheet_bilip(m: SphereMesh, verts: np.ndarray, center: np.ndarray) -> float:
    """Edgewise biLipschitz constant of projecting a sheet to its tangent plane.

    Returns +inf when the projection is not injective on vertices or folds a
    triangle over.
    """
    if len(verts) < 2:
        return 1.0
    near = verts[np.argmin(np.linalg.norm(m.image[verts] - center, axis=1))]
    P = vertex_tangent_projector(m, int(near))
    vals, vecs = np.linalg.eigh(P)
    B = vecs[:, -2:]
    uv = (m.image[verts] - m.image[near]) @ B
    local = -np.ones(m.n_vertices, dtype=np.int64)
    local[verts] = np.arange(len(verts))
    e = m.edges
    e = e[(local[e[:, 0]] >= 0) & (local[e[:, 1]] >= 0)]
    if len(e) == 0:
        return 1.0
    full = np.linalg.norm(m.image[e[:, 0]] - m.image[e[:, 1]], axis=1)
    flat = np.linalg.norm(uv[local[e[:, 0]]] - uv[local[e[:, 1]]], axis=1)
    if np.any(flat <= 1e-12 * full):
        return math.inf
    # folds: projected faces of the sheet must share one orientation
    f = m.faces[np.all(local[m.faces] >= 0, axis=1)]
    if len(f):
        p = uv[local[f]]
        u, w = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        signed = u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]
        if not (np.all(signed > 0) or np.all(signed < 0)):
            return math.inf
    # distinct vertices must not land on the same point
    if len(np.unique(np.round(uv / (1e-9 * max(full.max(), 1e-300))), axis=0)) < len(uv):
        return math.inf
    return float(np.max(full / flat))


@dataclass
class Ball:
    center: np.ndarray
    radius: float
    sheet_count: int
    max_bilip: float
    vertex: int

    def to_dict(self) -> dict:
        return {
            "center": np.asarray(self.center).tolist(),
            "radius": self.radius,
            "sheet_count": self.sheet_count,
            "max_bilip": self.max_bilip,
            "vertex": self.vertex,
        }


@dataclass
class CoverReport:
    balls: list[Ball]
    delta: float
    total_balls: int = field(init=False)

    def __post_init__(self):
        self.total_balls = len(self.balls)

    def to_dict(self) -> dict:
        return {"delta": self.delta, "total_balls": self.total_balls, "balls": [b.to_dict() for b in self.balls]}


def ball_cover(m: SphereMesh, delta: float, r0: float | None = None, max_halvings: int = 30) -> CoverReport:
    """Greedy farthest-point cover of the image by balls on which every sheet is a graph.

    Each new center is the uncovered vertex farthest from the centers so far.
    Its radius starts at ``r0`` (default a quarter of the bounding-box
    diagonal) and is halved until every sheet inside projects injectively to
    its tangent plane with edge biLipschitz constant <= 1 + delta/2.
    """
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta must lie in (0, 1)")
    pts = m.image
    if r0 is None:
        r0 = 0.25 * float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    bound = 1.0 + 0.5 * delta
    covered = np.zeros(m.n_vertices, dtype=bool)
    nearest = np.full(m.n_vertices, np.inf)
    balls: list[Ball] = []
    v = int(np.argmax(np.linalg.norm(pts - pts.mean(axis=0), axis=1)))
    while True:
        c = pts[v]
        radius = r0
        for _ in range(max_halvings + 1):
            inside = _inside(m, c, radius)
            sheets = _sheets(m, inside)
            bilip = [_sheet_bilip(m, s, c) for s in sheets]
            if max(bilip, default=1.0) <= bound:
                break
            radius *= 0.5
        else:
            warnings.warn(f"ball at vertex {v} never met the biLipschitz bound", ConvergenceWarning, stacklevel=2)
        balls.append(Ball(c.copy(), radius, len(sheets), max(bilip, default=1.0), v))
        covered |= inside
        covered[v] = True
        nearest = np.minimum(nearest, np.linalg.norm(pts - c, axis=1))
        if covered.all():
            break
        cand = np.flatnonzero(~covered)
        v = int(cand[np.argmax(nearest[cand])])
    return CoverReport(balls, delta)


# ---------------------------------------------------------------------------
# the divergent disk-pair integral


def _lens_area(t: np.ndarray, r: float) -> np.ndarray:
    """Overlap area of two radius-r disks whose centers are t apart (t <= 2r)."""
    x = np.clip(t / (2.0 * r), 0.0, 1.0)
    return 2.0 * r * r * np.arccos(x) - 0.5 * t * np.sqrt(np.maximum(4.0 * r * r - t * t, 0.0))


def disk_pair_integrand(t: np.ndarray, r: float, eps: float) -> np.ndarray:
    """Radial integrand 2 pi t K(t) / (t^2 + eps^2)^2, K the lens area."""
    return 2.0 * math.pi * t * _lens_area(t, r) / (t * t + eps * eps) ** 2


def disk_pair_midpoint(r: float, eps: float, resolution: int) -> float:
    """Midpoint rule with ``resolution`` cells for the disk-pair integral.

    With w = xi - eta the four-dimensional integral over two parallel disks
    at separation eps is exactly the radial integral
    int_0^{2r} 2 pi t K(t) / (t^2 + eps^2)^2 dt, K the lens area.
    """
    h = 2.0 * r / resolution
    t = (np.arange(resolution) + 0.5) * h
    return float(h * np.sum(disk_pair_integrand(t, r, eps)))


@dataclass
class Quadrature:
    value: float
    resolution: int
    rel_change: float


def disk_pair_quadrature(r: float, eps: float, resolution: int = 32, rtol: float = 0.01, max_resolution: int = 1 << 22) -> Quadrature:
    """Double the resolution until two successive values agree to ``rtol``."""
    if not (r > 0 and eps > 0):
        raise ParameterError("r and eps must be positive")
    if resolution < 32:
        raise ParameterError("resolution must be at least 32")
    n = resolution
    prev = disk_pair_midpoint(r, eps, n)
    while True:
        n *= 2
        cur = disk_pair_midpoint(r, eps, n)
        change = abs(cur - prev) / abs(cur)
        if change <= rtol:
            return Quadrature(cur, n, change)
        if n >= max_resolution:
            warnings.warn(f"disk-pair quadrature not converged (change {change:.3g})", ConvergenceWarning, stacklevel=2)
            return Quadrature(cur, n, change)
        prev = cur


def disk_pair_integral(r: float, eps: float, resolution: int = 32) -> float:
    """int int |xi - eta|^-4 over two parallel radius-r disks eps apart in R^4."""
    return disk_pair_quadrature(r, eps, resolution).value


# ---------------------------------------------------------------------------
# conformal modulus


def _boundary_edges(faces: np.ndarray) -> np.ndarray:
    e = np.sort(faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    u, c = np.unique(e, axis=0, return_counts=True)
    return u[c == 1]


def _loop_edges(loop: np.ndarray) -> set[tuple[int, int]]:
    loop = np.asarray(loop, dtype=np.int64)
    return {tuple(sorted((int(a), int(b)))) for a, b in zip(loop, np.roll(loop, -1))}


def _annular_region(points: np.ndarray, faces: np.ndarray, inner: np.ndarray, outer: np.ndarray) -> np.ndarray:
    """Faces of the region bounded by the two loops; raises TopologyError otherwise."""
    cut = _loop_edges(inner) | _loop_edges(outer)
    F = len(faces)
    e = np.sort(faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    owner = np.repeat(np.arange(F), 3)
    order = np.lexsort((e[:, 1], e[:, 0]))
    e, owner = e[order], owner[order]
    same = np.all(e[1:] == e[:-1], axis=1)
    keep = same & np.array([tuple(x) not in cut for x in e[:-1].tolist()])
    a, b = owner[:-1][keep], owner[1:][keep]
    G = sparse.csr_matrix((np.ones(len(a)), (a, b)), shape=(F, F))
    n, labels = csgraph.connected_components(G, directed=False)
    for c in range(n):
        f = faces[labels == c]
        bnd = {tuple(x) for x in _boundary_edges(f).tolist()}
        if bnd == cut:
            verts = np.unique(f)
            n_edges = len(np.unique(np.sort(f[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1), axis=0))
            if len(verts) - n_edges + len(f) != 0:
                raise TopologyError("region between the loops is not an annulus (Euler characteristic != 0)")
            return f
    raise TopologyError("the two loops do not bound a common region")


def annulus_modulus(mesh: SurfacePatch | SphereMesh, inner, outer) -> float:
    """Conformal modulus 1 / D(u) of the region between two vertex loops.

    u is the discrete harmonic function (image cotangent weights) equal to 0
    on ``inner`` and 1 on ``outer``; for a round annulus the value tends to
    log(R/r) / (2 pi). Loops may be index arrays or names stored on a patch.
    """
    pts = mesh.points if isinstance(mesh, SurfacePatch) else mesh.image
    if isinstance(inner, str):
        inner = mesh.loops[inner]
    if isinstance(outer, str):
        outer = mesh.loops[outer]
    inner = np.asarray(inner, dtype=np.int64)
    outer = np.asarray(outer, dtype=np.int64)
    if len(inner) < 3 or len(outer) < 3 or np.intersect1d(inner, outer).size:
        raise TopologyError("loops must be disjoint cycles of at least 3 vertices")
    faces = _annular_region(pts, mesh.faces, inner, outer)
    V = len(pts)
    L = cotangent_laplacian(pts, faces, V).tocsr()
    u = np.zeros(V)
    u[outer] = 1.0
    fixed = np.zeros(V, dtype=bool)
    fixed[inner] = fixed[outer] = True
    used = np.zeros(V, dtype=bool)
    used[np.unique(faces)] = True
    free = np.flatnonzero(used & ~fixed)
    if free.size:
        A = L[free][:, free].tocsc()
        rhs = -L[free][:, np.flatnonzero(fixed)] @ u[fixed]
        u[free] = spsolve(A, rhs)
    energy = float(u @ (L @ u))
    if not energy > 0:
        raise UndefinedResultError("harmonic potential has zero energy")
    return 1.0 / energy


# ---------------------------------------------------------------------------
# self-distance


def kuiper_selfdistance(m: SphereMesh, rho: float) -> float:
    """min |f(p) - f(q)| over vertex pairs at graph distance >= rho, over the image diameter."""
    if not rho > 0:
        raise ParameterError("rho must be positive")
    pts = m.image
    G = _edge_graph(pts, m.faces)

    def block(s: int, e: int) -> tuple[float, float]:
        geo = csgraph.dijkstra(G, indices=np.arange(s, e))
        d = np.linalg.norm(pts[s:e, None, :] - pts[None], axis=2)
        far = geo >= rho
        return (float(d[far].min()) if far.any() else math.inf, float(d.max()))

    parts = map_blocks(block, m.n_vertices, SOURCE_BLOCK)
    gap = min(p[0] for p in parts)
    diam = max(p[1] for p in parts)
    if not math.isfinite(gap):
        raise UndefinedResultError(f"no vertex pairs are {rho:g} apart along the surface; use a smaller rho")
    return gap / diam
