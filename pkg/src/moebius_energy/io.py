"""JSON, OFF and CSV input/output.

Floats are always written with 17 significant digits so that files round-trip
exactly and identical inputs give byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, InvalidShapeError
from .geom import ClosedCurve, SphereMesh, SurfacePatch
from .moebius import MoebiusMap


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj, indent: int | None = None, _level: int = 0) -> str:
    """JSON text with every float printed as ``format(x, '.17g')``."""
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = ", " if indent is None else ","
    if isinstance(obj, dict):
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{" + sep.join(items) + (end if items else "") + "}"
    if isinstance(obj, (list, tuple)):
        # keep numeric rows on one line
        inner = None if indent is None or all(not isinstance(v, (dict, list, tuple)) for v in obj) else indent
        p2 = "" if inner is None else pad
        items = [f"{p2}{dumps(v, inner, _level + 1)}" for v in obj]
        return "[" + (sep if inner is not None else ", ").join(items) + (end if inner is not None and items else "") + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(dumps(obj, indent=1) + "\n")


def read_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise FormatError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# shapes


def curve_from_dict(d: dict) -> ClosedCurve:
    pts = np.array(d["points"], dtype=float)
    if "n" in d and pts.ndim == 2 and pts.shape[1] != int(d["n"]):
        raise FormatError(f"curve declares n = {d['n']} but points have {pts.shape[1]} coordinates")
    return ClosedCurve(pts)


def mesh_from_dict(d: dict) -> SphereMesh:
    img = np.array(d["image"], dtype=float)
    if "n" in d and img.shape[1] != int(d["n"]):
        raise FormatError(f"mesh declares n = {d['n']} but image has {img.shape[1]} coordinates")
    return SphereMesh(np.array(d["domain"], dtype=float), img, np.array(d["faces"], dtype=np.int64))


def patch_from_dict(d: dict) -> SurfacePatch:
    return SurfacePatch(np.array(d["points"], dtype=float), np.array(d["faces"], dtype=np.int64), d.get("loops", {}))


def shape_from_dict(d: dict):
    """Curve, sphere mesh or annulus patch, by the keys present."""
    if not isinstance(d, dict):
        raise FormatError("shape file must hold a JSON object")
    try:
        if "domain" in d:
            return mesh_from_dict(d)
        if "loops" in d or "faces" in d:
            return patch_from_dict(d)
        if "points" in d:
            return curve_from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidShapeError):
            raise
        raise FormatError(f"malformed shape file: {exc}") from exc
    raise FormatError("shape file needs 'points' (curve), 'domain'/'image'/'faces' (mesh) or 'loops' (annulus)")


def read_off(path: str | Path, domain_from_image: bool = False) -> SphereMesh:
    """Triangle OFF file in R^3.

    OFF carries no domain. With ``domain_from_image`` the image is projected
    radially about its centroid onto the unit sphere (only sensible for
    star-shaped surfaces; run ``conformalize`` afterwards).
    """
    try:
        tokens = [ln.split("#")[0].split() for ln in Path(path).read_text().splitlines()]
    except FileNotFoundError as exc:
        raise FormatError(f"no such file: {path}") from exc
    tokens = [t for t in tokens if t]
    if not tokens or tokens[0][0] != "OFF":
        raise FormatError(f"{path}: missing OFF header")
    head = tokens[0][1:] or tokens[1]
    body = tokens[1:] if tokens[0][1:] else tokens[2:]
    nv, nf = int(head[0]), int(head[1])
    verts = np.array([[float(x) for x in row[:3]] for row in body[:nv]])
    faces = []
    for row in body[nv : nv + nf]:
        k = int(row[0])
        if k != 3:
            raise FormatError("only triangle OFF files are supported")
        faces.append([int(x) for x in row[1:4]])
    if not domain_from_image:
        raise FormatError("OFF files carry no domain; pass domain_from_image=True to project the image")
    c = verts - verts.mean(axis=0)
    dom = c / np.linalg.norm(c, axis=1)[:, None]
    dom = dom / np.linalg.norm(dom, axis=1)[:, None]
    return SphereMesh(dom, verts, np.array(faces, dtype=np.int64))


def read_shape(path: str | Path, domain_from_image: bool = False):
    if str(path).lower().endswith(".off"):
        return read_off(path, domain_from_image)
    return shape_from_dict(read_json(path))


def write_shape(path: str | Path, shape) -> None:
    write_json(path, shape.to_dict())


def read_map(path: str | Path) -> MoebiusMap:
    data = read_json(path)
    if not isinstance(data, list):
        raise FormatError("map file must hold a JSON list of primitives")
    return MoebiusMap.from_list(data)
