"""Deterministic generators for test curves, links and sphere meshes."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, interpolate

from .errors import InvalidShapeError
from .geom import ClosedCurve, SphereMesh, SurfacePatch, curve_min_gap

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# curves


def make_curve(kind: str, n_points: int = 128, **params) -> ClosedCurve:
    """Sample a closed curve uniformly in its natural parameter.

    kinds: ``circle`` (radius), ``ellipse`` (a, b), ``torus_knot`` (p, q, R, r),
    ``perturbed_circle`` (amp, mode, seed).
    """
    if n_points < 8:
        raise InvalidShapeError("curves need at least 8 points")
    t = TWO_PI * np.arange(n_points) / n_points
    kind = kind.replace("-", "_")
    if kind == "circle":
        r = float(params.get("radius", 1.0))
        pts = r * np.column_stack([np.cos(t), np.sin(t), np.zeros_like(t)])
    elif kind == "ellipse":
        a, b = float(params.get("a", 1.2)), float(params.get("b", 1.0 / 1.2))
        if a <= 0 or b <= 0:
            raise InvalidShapeError("ellipse axes must be positive")
        pts = np.column_stack([a * np.cos(t), b * np.sin(t), np.zeros_like(t)])
    elif kind == "torus_knot":
        p, q = int(params.get("p", 2)), int(params.get("q", 3))
        if math.gcd(p, q) != 1 or p < 1 or q < 1:
            raise InvalidShapeError("torus knot needs coprime positive p, q")
        R, r = float(params.get("R", 2.0)), float(params.get("r", 1.0))
        rad = R + r * np.cos(q * t)
        pts = np.column_stack([rad * np.cos(p * t), rad * np.sin(p * t), r * np.sin(q * t)])
    elif kind == "perturbed_circle":
        amp = float(params.get("amp", 0.05))
        mode = int(params.get("mode", 3))
        rng = np.random.default_rng(int(params.get("seed", 0)))
        phase = rng.uniform(0.0, TWO_PI)
        noise = rng.normal(size=(2,)) * 0.5 * amp
        rad = 1.0 + amp * np.cos(mode * t + phase) + noise[0] * np.cos((mode + 1) * t) + noise[1] * np.sin((mode + 2) * t)
        lift = 0.5 * amp * np.sin(2 * t + phase)
        pts = np.column_stack([rad * np.cos(t), rad * np.sin(t), lift])
    else:
        raise InvalidShapeError(f"unknown curve kind {kind!r}")
    c = ClosedCurve(pts)
    if kind == "torus_knot":
        gap, _ = curve_min_gap(c)
        if gap <= 1e-6:
            raise InvalidShapeError("torus knot sample self-intersects")
    return c


def pinched_curve(gap: float, n_points: int = 256) -> ClosedCurve:
    """Planar loop whose two long sides bend toward each other to the given gap."""
    t = TWO_PI * np.arange(n_points) / n_points
    x = 1.5 * np.cos(t)
    bump = (1.0 - 0.5 * gap) * np.exp(-((x / 0.5) ** 2))
    y = np.sin(t) * (1.0 - bump)
    return ClosedCurve(np.column_stack([x, y, np.zeros_like(t)]))


def split_link(distance: float, n_points: int = 128) -> tuple[ClosedCurve, ClosedCurve]:
    """Two unit circles in parallel planes, centers separated along z."""
    c1 = make_curve("circle", n_points)
    c2 = ClosedCurve(c1.points + np.array([0.0, 0.0, distance]))
    return c1, c2


def hopf_link(offset: float = 0.5, n_points: int = 128) -> tuple[ClosedCurve, ClosedCurve]:
    """Unit circles in orthogonal planes; the second is centered at (offset, 0, 0).

    For 0 < offset < 1 the circles are linked with minimal gap 1 - offset.
    """
    t = TWO_PI * np.arange(n_points) / n_points
    c1 = ClosedCurve(np.column_stack([np.cos(t), np.sin(t), np.zeros_like(t)]))
    c2 = ClosedCurve(np.column_stack([offset + np.cos(t), np.zeros_like(t), np.sin(t)]))
    return c1, c2


# ---------------------------------------------------------------------------
# sphere meshes


def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return v / np.linalg.norm(v, axis=1)[:, None], f


def _unit(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    # one more pass pins the norm to within an ulp or two
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def icosphere_arrays(subdiv: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertices on the unit sphere and outward-oriented faces; V = 10*4^s + 2."""
    verts, faces = _icosahedron()
    verts = list(verts)
    for _ in range(subdiv):
        cache: dict[tuple[int, int], int] = {}

        def mid(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            k = cache.get(key)
            if k is None:
                k = len(verts)
                verts.append(0.5 * (verts[i] + verts[j]))
                cache[key] = k
            return k

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new, dtype=np.int64)
        verts = list(_unit(np.array(verts)))
    return _unit(np.array(verts)), faces


def _pad(image: np.ndarray, n_ambient: int) -> np.ndarray:
    if n_ambient < image.shape[1]:
        raise InvalidShapeError(f"n_ambient must be >= {image.shape[1]}")
    return np.hstack([image, np.zeros((len(image), n_ambient - image.shape[1]))])


def _check_subdiv(subdiv: int, lo: int = 0) -> None:
    if not lo <= subdiv <= 7:
        raise InvalidShapeError(f"subdiv must be in [{lo}, 7], got {subdiv}")


def icosphere(subdiv: int = 3, radius: float = 1.0, n_ambient: int = 3) -> SphereMesh:
    _check_subdiv(subdiv)
    v, f = icosphere_arrays(subdiv)
    return SphereMesh(v, _pad(radius * v, n_ambient), f)


def ellipsoid(a: float, b: float, c: float, subdiv: int = 3, n_ambient: int = 3) -> SphereMesh:
    """Icosphere domain with image diag(a, b, c) * domain (not conformal unless a=b=c)."""
    _check_subdiv(subdiv)
    if min(a, b, c) <= 0:
        raise InvalidShapeError("ellipsoid axes must be positive")
    v, f = icosphere_arrays(subdiv)
    return SphereMesh(v, _pad(v * np.array([a, b, c]), n_ambient), f)


# ---------------------------------------------------------------------------
# conformal surfaces of revolution
#
# A profile gamma(t) meeting the axis at both ends, spun by an angle phi, has
# metric |gamma'|^2 dt^2 + rho^2 dphi^2 = rho^2 (dsigma^2 + dphi^2) with
# dsigma = |gamma'| dt / rho. The round sphere has the same form with
# sigma = log tan(theta/2), so theta = 2 arctan(exp(sigma)) is a conformal
# domain. Rings are placed uniformly in sigma, which keeps cells square.


def _zip_rings(a: np.ndarray, alpha: np.ndarray, b: np.ndarray, beta: np.ndarray) -> list[list[int]]:
    """Triangulate the band between two rings of vertex ids with angles in [0, 2pi)."""
    ka, kb = len(a), len(b)
    j0 = int(np.argmin(np.abs(np.angle(np.exp(1j * (beta - alpha[0]))))))
    ua = np.append((alpha - alpha[0]) % TWO_PI, TWO_PI)
    ua[0] = 0.0
    b0 = float(np.angle(np.exp(1j * (beta[j0] - alpha[0]))))
    ub = b0 + (beta[(j0 + np.arange(kb)) % kb] - beta[j0]) % TWO_PI
    ub = np.append(ub, b0 + TWO_PI)
    tris = []
    i = j = 0
    while i < ka or j < kb:
        if j == kb or (i < ka and ua[i + 1] < ub[j + 1]):
            tris.append([a[i % ka], a[(i + 1) % ka], b[(j0 + j) % kb]])
            i += 1
        else:
            tris.append([a[i % ka], b[(j0 + j + 1) % kb], b[(j0 + j) % kb]])
            j += 1
    return tris


def _fan(pole: int, ring: np.ndarray, reverse: bool) -> list[list[int]]:
    k = len(ring)
    if reverse:
        return [[pole, ring[(i + 1) % k], ring[i]] for i in range(k)]
    return [[pole, ring[i], ring[(i + 1) % k]] for i in range(k)]


def conformal_revolution(
    profile: np.ndarray,
    rho: np.ndarray,
    embed,
    k: int,
    rho_cap: float,
    k_min: int = 4,
    n_ambient: int = 3,
) -> SphereMesh:
    """Conformally parametrized mesh of a spun profile.

    ``profile`` is a dense (M, m) polyline from one axis point to the other,
    ``rho`` its distance to the rotation axis (zero at both ends), and
    ``embed(P, phi)`` maps profile points and angles to ambient points. Rings
    carry ``k`` vertices while rho >= rho_cap; toward each pole the ring size
    halves every time rho halves, down to ``k_min``, and a fan closes the cap.
    """
    if k < 2 * k_min or k & (k - 1):
        raise InvalidShapeError("ring size must be a power of two >= 2 * k_min")
    seg = np.linalg.norm(np.diff(profile, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    inner = slice(1, len(s) - 1)
    r_in = rho[inner]
    if np.any(r_in <= 0.0):
        raise InvalidShapeError("profile touches the axis away from its endpoints")
    # sigma(s) by the trapezoid rule on 1/rho; the ends are at +-infinity
    sig = np.concatenate([[0.0], np.cumsum(0.5 * (1.0 / r_in[1:] + 1.0 / r_in[:-1]) * np.diff(s[inner]))])
    s_in = s[inner]
    big = np.flatnonzero(r_in >= rho_cap)
    if big.size == 0:
        raise InvalidShapeError("rho_cap exceeds the profile's distance to the axis")
    lo, hi = sig[big[0]], sig[big[-1]]
    sig = sig - 0.5 * (lo + hi)
    lo, hi = sig[big[0]], sig[big[-1]]

    def at(sigma: float) -> tuple[np.ndarray, float]:
        t = float(np.interp(sigma, sig, s_in))
        P = np.array([np.interp(t, s, profile[:, c]) for c in range(profile.shape[1])])
        return P, float(np.interp(t, s, rho))

    rings: list[tuple[float, int]] = []
    n_full = max(1, int(math.ceil((hi - lo) / (TWO_PI / k))))
    for j in range(n_full + 1):
        rings.append((lo + (hi - lo) * j / n_full, k))

    def cap(direction: int) -> list[tuple[float, int]]:
        out = []
        sigma, kk = (lo, k) if direction < 0 else (hi, k)
        level = rho_cap
        while True:
            sigma += direction * TWO_PI / kk
            if not sig[0] < sigma < sig[-1]:
                break
            _, r = at(sigma)
            while r < 0.5 * level and kk >= 2 * k_min:
                kk //= 2
                level *= 0.5
            if r < 0.5 * level:
                break
            out.append((sigma, kk))
        return out

    rings = cap(-1)[::-1] + rings + cap(+1)
    sigmas = np.array([r[0] for r in rings])
    if np.any(np.diff(sigmas) <= 0):
        raise InvalidShapeError("profile is too short for the requested ring size")

    dom = [np.array([0.0, 0.0, 1.0])]
    img = [embed(profile[:1], np.zeros(1))[0]]
    ids = []
    angles = []
    offset = 0.0
    prev_k = None
    for sigma, kk in rings:
        if kk == prev_k:
            offset = 0.5 - offset
        else:
            offset = 0.0
        prev_k = kk
        phi = TWO_PI * (np.arange(kk) + offset) / kk
        P, _ = at(sigma)
        theta = 2.0 * math.atan(math.exp(sigma))
        start = len(dom)
        for ph in phi:
            dom.append(np.array([math.sin(theta) * math.cos(ph), math.sin(theta) * math.sin(ph), math.cos(theta)]))
        img.extend(embed(np.repeat(P[None], kk, axis=0), phi))
        ids.append(np.arange(start, start + kk))
        angles.append(phi)
    dom.append(np.array([0.0, 0.0, -1.0]))
    img.append(embed(profile[-1:], np.zeros(1))[0])
    south = len(dom) - 1

    faces = _fan(0, ids[0], reverse=True)
    for r in range(len(ids) - 1):
        faces += _zip_rings(ids[r], angles[r], ids[r + 1], angles[r + 1])
    faces += _fan(south, ids[-1], reverse=False)
    domain = _unit(np.array(dom))
    faces = np.array(faces, dtype=np.int64)
    # outward orientation on the domain sphere
    vol = np.einsum("ij,ij->i", domain[faces[:, 0]], np.cross(domain[faces[:, 1]], domain[faces[:, 2]])).sum()
    if vol < 0:
        faces = faces[:, ::-1].copy()
    return SphereMesh(domain, _pad(np.array(img), n_ambient), faces)


def _revolve_z(P: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Profile points (rho, z) revolved about the z axis in R^3."""
    return np.column_stack([P[:, 0] * np.cos(phi), P[:, 0] * np.sin(phi), P[:, 1]])


def _spin(P: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Artin spin of half-space points (x, y, z), z >= 0, into R^4."""
    return np.column_stack([P[:, 0], P[:, 1], P[:, 2] * np.cos(phi), P[:, 2] * np.sin(phi)])


def pinch(gap: float, subdiv: int = 3, n_ambient: int = 3) -> SphereMesh:
    """Biconcave sphere of revolution whose two poles are ``gap`` apart.

    Profile: rho = sin t, z = cos t * (gap/2 + (1 - gap/2) sin^2 t). The two
    polar caps dimple toward each other; gap = 2 is close to round.
    """
    _check_subdiv(subdiv, lo=1)
    if not 0.0 < gap <= 2.0:
        raise InvalidShapeError("pinch gap must be in (0, 2]")
    t = np.linspace(0.0, math.pi, 20001)
    rho = np.sin(t)
    rho[[0, -1]] = 0.0
    z = np.cos(t) * (0.5 * gap + (1.0 - 0.5 * gap) * np.sin(t) ** 2)
    return conformal_revolution(np.column_stack([rho, z]), rho, _revolve_z, 2 ** (subdiv + 2), 0.5, n_ambient=n_ambient)


def _knotted_arc(height: float = 2.0, n: int = 4000) -> np.ndarray:
    """Trefoil cut open at its lowest point, with vertical legs down to z = 0.

    Returns a dense smooth polyline in the half-space z >= 0 whose endpoints
    lie on z = 0.
    """
    # (2,3) torus knot tipped so that its lowest point is unique
    t = np.linspace(0.0, TWO_PI, 2000, endpoint=False)
    R, r = 1.0, 0.45
    rad = R + r * np.cos(3 * t)
    knot = np.column_stack([rad * np.cos(2 * t), rad * np.sin(2 * t), r * np.sin(3 * t)])
    tilt = 0.35
    rot = np.array([[1.0, 0.0, 0.0], [0.0, math.cos(tilt), -math.sin(tilt)], [0.0, math.sin(tilt), math.cos(tilt)]])
    knot = knot @ rot.T
    low = int(np.argmin(knot[:, 2]))
    knot = np.roll(knot, -low, axis=0)
    cut = 40  # drop a short piece around the lowest point
    arc = knot[cut // 2 : len(knot) - cut // 2]
    arc = arc + np.array([0.0, 0.0, height - knot[:, 2].min()])
    legs_n = 60
    left = np.linspace([arc[0, 0], arc[0, 1], 0.0], arc[0], legs_n, endpoint=False)
    right = np.linspace(arc[-1], [arc[-1, 0], arc[-1, 1], 0.0], legs_n)[1:]
    ctrl = np.vstack([left, arc, right])
    # smooth the leg junctions with a least-squares spline, then pin the ends
    u = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(ctrl, axis=0), axis=1))])
    u /= u[-1]
    tck, _ = interpolate.splprep(ctrl.T, u=u, s=len(ctrl) * 2e-5, k=5)
    uu = np.linspace(0.0, 1.0, n)
    pts = np.array(interpolate.splev(uu, tck)).T
    pts[0, 2] = pts[-1, 2] = 0.0
    return pts


def spun_knot(subdiv: int = 3, arc: str = "trefoil", height: float = 2.0) -> SphereMesh:
    """Spun trefoil: a knotted 2-sphere in R^4 from a knotted arc in the half-space z >= 0."""
    _check_subdiv(subdiv, lo=1)
    if arc.replace("-", "_") not in ("trefoil", "trefoil_arc"):
        raise InvalidShapeError(f"unknown knotted arc {arc!r}")
    P = _knotted_arc(height)
    inner = P[1:-1, 2]
    if np.any(inner <= 0.0):
        raise InvalidShapeError("knotted arc leaves the half-space")
    return conformal_revolution(P, P[:, 2].copy(), _spin, 2 ** (subdiv + 2), 0.5 * height, n_ambient=4)


def make_sphere_mesh(kind: str, subdiv: int = 3, n_ambient: int = 3, **params) -> SphereMesh:
    """Dispatch by name: ``icosphere``, ``ellipsoid`` (a, b, c), ``pinch`` (gap), ``spun_knot`` (arc)."""
    kind = kind.replace("-", "_")
    if kind == "icosphere":
        return icosphere(subdiv, float(params.get("radius", 1.0)), n_ambient)
    if kind == "ellipsoid":
        return ellipsoid(float(params.get("a", 2.0)), float(params.get("b", 1.0)), float(params.get("c", 1.0)), subdiv, n_ambient)
    if kind == "pinch":
        return pinch(float(params.get("gap", 0.1)), subdiv, n_ambient)
    if kind == "spun_knot":
        if n_ambient != 4:
            raise InvalidShapeError("spun knots live in R^4")
        return spun_knot(subdiv, str(params.get("arc", "trefoil")))
    raise InvalidShapeError(f"unknown mesh kind {kind!r}")


# ---------------------------------------------------------------------------
# annuli


def annulus(ratio: float = math.e, k: int = 192, inner_radius: float = 1.0) -> SurfacePatch:
    """Flat circular annulus in the z = 0 plane of R^3 with outer/inner radius ``ratio``.

    Rings are spaced uniformly in log-radius with square cells (step 2*pi/k)
    and alternate half-step offsets. Loops ``loop0`` (inner) and ``loop1``
    (outer) hold the boundary vertex ids.
    """
    if not ratio > 1.0:
        raise InvalidShapeError("annulus ratio must exceed 1")
    if k < 8:
        raise InvalidShapeError("annulus needs at least 8 vertices per ring")
    n_rings = max(1, int(math.ceil(math.log(ratio) / (TWO_PI / k))))
    pts, ids, angles = [], [], []
    for j in range(n_rings + 1):
        rad = inner_radius * ratio ** (j / n_rings)
        phi = TWO_PI * (np.arange(k) + 0.5 * (j % 2)) / k
        ids.append(np.arange(len(pts), len(pts) + k))
        angles.append(phi)
        pts.extend(np.column_stack([rad * np.cos(phi), rad * np.sin(phi), np.zeros(k)]))
    faces = []
    for j in range(n_rings):
        faces += _zip_rings(ids[j], angles[j], ids[j + 1], angles[j + 1])
    faces = np.array(faces, dtype=np.int64)
    return SurfacePatch(np.array(pts), faces, {"loop0": ids[0], "loop1": ids[-1]})
