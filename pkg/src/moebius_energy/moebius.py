"""Moebius maps of R^n + {inf} as ordered lists of primitives.

Primitives are applied left to right. Each one is exact, so a map is easy to
audit and to serialize: ``[{"inversion": {"c": [...], "rho": 1.0}}, ...]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ParameterError, PointAtInfinityError, SamplingError
from .geom import ClosedCurve, SphereMesh

GUARD = 1e-8


@dataclass(frozen=True)
class Translation:
    t: tuple[float, ...]

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return p + np.asarray(self.t)

    def to_dict(self) -> dict:
        return {"translation": {"t": list(self.t)}}


@dataclass(frozen=True)
class Scaling:
    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ParameterError("scaling factor must be positive")

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return self.s * p

    def to_dict(self) -> dict:
        return {"scaling": {"s": self.s}}


@dataclass(frozen=True, eq=False)
class Orthogonal:
    Q: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or not np.allclose(Q.T @ Q, np.eye(len(Q)), atol=1e-10):
            raise ParameterError("Q must be an orthogonal matrix")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return p @ self.Q.T

    def to_dict(self) -> dict:
        return {"orthogonal": {"Q": self.Q.tolist()}}


@dataclass(frozen=True)
class Inversion:
    c: tuple[float, ...]
    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ParameterError("inversion radius must be positive")

    def offsets(self, p: np.ndarray) -> np.ndarray:
        return np.linalg.norm(p - np.asarray(self.c), axis=-1)

    def __call__(self, p: np.ndarray) -> np.ndarray:
        c = np.asarray(self.c)
        d = p - c
        return c + self.rho**2 * d / np.sum(d * d, axis=-1, keepdims=True)

    def to_dict(self) -> dict:
        return {"inversion": {"c": list(self.c), "rho": self.rho}}


Primitive = Union[Translation, Scaling, Orthogonal, Inversion]


@dataclass(frozen=True)
class MoebiusMap:
    primitives: tuple[Primitive, ...] = ()
    guard: float = GUARD

    def __call__(self, p):
        return apply(self, p)

    def then(self, other: "MoebiusMap") -> "MoebiusMap":
        """The map that applies ``self`` first and ``other`` second."""
        return MoebiusMap(self.primitives + other.primitives, self.guard)

    def to_list(self) -> list[dict]:
        return [p.to_dict() for p in self.primitives]

    @classmethod
    def from_list(cls, items: list[dict], guard: float = GUARD) -> "MoebiusMap":
        prims = []
        for item in items:
            if len(item) != 1:
                raise ParameterError(f"map primitive must have exactly one tag: {item}")
            (tag, body), = item.items()
            if tag == "translation":
                prims.append(Translation(tuple(float(x) for x in body["t"])))
            elif tag == "scaling":
                prims.append(Scaling(float(body["s"])))
            elif tag == "orthogonal":
                prims.append(Orthogonal(np.array(body["Q"], dtype=float)))
            elif tag == "inversion":
                prims.append(Inversion(tuple(float(x) for x in body["c"]), float(body["rho"])))
            else:
                raise ParameterError(f"unknown map primitive {tag!r}")
        return cls(tuple(prims), guard)


def _apply_points(m: MoebiusMap, pts: np.ndarray) -> np.ndarray:
    out = np.array(pts, dtype=float)
    for k, prim in enumerate(m.primitives):
        if isinstance(prim, Inversion):
            bad = np.flatnonzero(np.atleast_1d(prim.offsets(out)) <= m.guard * prim.rho)
            if bad.size:
                err = PointAtInfinityError(
                    f"primitive {k} (inversion) sends points to infinity; vertex indices {bad[:20].tolist()}"
                )
                err.primitive_index = k
                err.vertex_indices = bad.tolist()
                raise err
        out = prim(out)
    return out


def apply(m: MoebiusMap, p: np.ndarray) -> np.ndarray:
    """Apply to a point (n,) or a batch of points (k, n)."""
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        return _apply_points(m, p[None])[0]
    return _apply_points(m, p)


def apply_shape(m: MoebiusMap, shape):
    """Transform the image of a curve or mesh. Mesh domains are left untouched."""
    if isinstance(shape, ClosedCurve):
        return ClosedCurve(_apply_points(m, shape.points))
    if isinstance(shape, SphereMesh):
        return shape.with_image(_apply_points(m, shape.image))
    raise TypeError(f"cannot apply a Moebius map to {type(shape).__name__}")


def _random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def random_safe(seed: int, shape, margin: float = 0.5, max_tries: int = 1000) -> MoebiusMap:
    """Seeded Inversion -> Translation -> Scaling -> Orthogonal composition.

    The inversion center is rejection-sampled so that it lies at distance
    >= margin + rho from every image vertex of ``shape``.
    """
    if not margin > 0:
        raise ParameterError("margin must be positive")
    pts = shape.image if isinstance(shape, SphereMesh) else shape.points
    rng = np.random.default_rng(seed)
    n = pts.shape[1]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    mid = 0.5 * (lo + hi)
    size = float(np.max(hi - lo))
    for _ in range(max_tries):
        rho = size * rng.uniform(0.5, 1.5)
        half = 0.5 * size + margin + 2.0 * rho
        c = mid + rng.uniform(-half, half, size=n)
        if np.min(np.linalg.norm(pts - c, axis=1)) >= margin + rho:
            break
    else:
        raise SamplingError(f"no safe inversion center after {max_tries} tries; use a larger margin")
    t = rng.normal(size=n) * size
    s = float(np.exp(rng.uniform(-1.0, 1.0)))
    Q = _random_orthogonal(rng, n)
    return MoebiusMap((Inversion(tuple(c.tolist()), rho), Translation(tuple(t.tolist())), Scaling(s), Orthogonal(Q)))


def stereographic(p: np.ndarray) -> np.ndarray:
    """S^n in R^{n+1} -> R^n, projecting from the north pole e_{n+1}."""
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    denom = 1.0 - p[:, -1]
    if np.any(denom <= GUARD):
        raise PointAtInfinityError("the north pole maps to infinity")
    out = p[:, :-1] / denom[:, None]
    return out[0] if single else out


def inverse_stereographic(y: np.ndarray) -> np.ndarray:
    """R^n -> S^n in R^{n+1}; inverse of :func:`stereographic`."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    s = np.sum(y * y, axis=1, keepdims=True)
    out = np.hstack([2.0 * y, s - 1.0]) / (s + 1.0)
    return out[0] if single else out
