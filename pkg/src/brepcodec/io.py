"""File formats: models, token files, codebooks, reports, debug exports.

All formats are plain text (JSON or line-oriented), round-trip exactly
(floats serialize with full precision via repr), and are written
atomically (temp file then rename).  Loaders raise FormatError with
location context instead of crashing on malformed input.
"""
from __future__ import annotations

import dataclasses
import json
import os
import tempfile

import numpy as np

from . import geometry as G
from .codec import SequenceHeader, TokenSequence
from .model import BrepModel, Edge, Face, HalfEdge, Loop, TransformRecord, compute_shells
from .rq import Codebook
from .sampler import FaceChart, SamplingConfig, extract_vhp, voronoi_assign

MODEL_FORMAT = "brepcodec-model/1"
TOKENS_FORMAT = "brepcodec-tokens/1"
CODEBOOK_FORMAT = "brepcodec-codebook/1"


class FormatError(ValueError):
    pass


def atomic_write_text(path, text: str):
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Geometry <-> dict
# ---------------------------------------------------------------------------

def _geom_to_dict(g) -> dict:
    if isinstance(g, G.LineSegment):
        return {"kind": "line", "p0": g.p0.tolist(), "p1": g.p1.tolist()}
    if isinstance(g, G.CircularArc):
        return {"kind": "arc", "center": g.center.tolist(), "radius": g.radius,
                "x_axis": g.x_axis.tolist(), "y_axis": g.y_axis.tolist(),
                "theta0": g.theta0, "theta1": g.theta1}
    if isinstance(g, G.CubicBezier):
        return {"kind": "bezier", "control": g.control.tolist()}
    if isinstance(g, G.PolylineCurve):
        return {"kind": "polyline", "points": g.points.tolist()}
    if isinstance(g, G.Plane):
        return {"kind": "plane", "origin": g.origin.tolist(),
                "u_vec": g.u_vec.tolist(), "v_vec": g.v_vec.tolist()}
    if isinstance(g, G.CylinderPatch):
        return {"kind": "cylinder", "center": g.center.tolist(), "radius": g.radius,
                "x_axis": g.x_axis.tolist(), "y_axis": g.y_axis.tolist(),
                "axis": g.axis.tolist(), "u0": g.u0, "u1": g.u1}
    if isinstance(g, G.SpherePatch):
        return {"kind": "sphere", "center": g.center.tolist(), "radius": g.radius,
                "x_axis": g.x_axis.tolist(), "y_axis": g.y_axis.tolist(),
                "z_axis": g.z_axis.tolist(), "u0": g.u0, "u1": g.u1,
                "v0": g.v0, "v1": g.v1}
    if isinstance(g, G.BicubicPatch):
        return {"kind": "bicubic", "control": g.control.tolist()}
    if isinstance(g, G.Segment2):
        return {"kind": "seg2", "a": g.a.tolist(), "b": g.b.tolist()}
    if isinstance(g, G.Arc2):
        return {"kind": "arc2", "center": g.center.tolist(), "radius": g.radius,
                "phi0": g.phi0, "phi1": g.phi1}
    if isinstance(g, G.Poly2):
        return {"kind": "poly2", "points": g.points.tolist()}
    raise FormatError(f"unsupported geometry type {type(g).__name__}")


def _geom_from_dict(d: dict):
    try:
        kind = d["kind"]
        if kind == "line":
            return G.LineSegment(d["p0"], d["p1"])
        if kind == "arc":
            return G.CircularArc(d["center"], d["radius"], d["x_axis"],
                                 d["y_axis"], d["theta0"], d["theta1"])
        if kind == "bezier":
            return G.CubicBezier(d["control"])
        if kind == "polyline":
            return G.PolylineCurve(d["points"])
        if kind == "plane":
            return G.Plane(d["origin"], d["u_vec"], d["v_vec"])
        if kind == "cylinder":
            return G.CylinderPatch(d["center"], d["radius"], d["x_axis"],
                                   d["y_axis"], d["axis"], d["u0"], d["u1"])
        if kind == "sphere":
            return G.SpherePatch(d["center"], d["radius"], d["x_axis"],
                                 d["y_axis"], d["z_axis"], d["u0"], d["u1"],
                                 d["v0"], d["v1"])
        if kind == "bicubic":
            return G.BicubicPatch(d["control"])
        if kind == "seg2":
            return G.Segment2(d["a"], d["b"])
        if kind == "arc2":
            return G.Arc2(d["center"], d["radius"], d["phi0"], d["phi1"])
        if kind == "poly2":
            return G.Poly2(d["points"])
    except KeyError as exc:
        raise FormatError(f"geometry record missing field {exc}") from exc
    raise FormatError(f"unknown geometry kind {d.get('kind')!r}")


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

def transform_to_dict(t: TransformRecord | None):
    if t is None:
        return None
    return {"offset": list(t.offset), "scale": t.scale}


def transform_from_dict(d):
    if d is None:
        return None
    return TransformRecord(offset=tuple(d["offset"]), scale=d["scale"])


def model_to_dict(model: BrepModel, transform: TransformRecord | None = None) -> dict:
    return {
        "format": MODEL_FORMAT,
        "units": "normalized" if transform is not None else "model",
        "transform": transform_to_dict(transform),
        "vertices": model.vertices.tolist(),
        "edges": [{"curve": _geom_to_dict(e.curve), "v0": e.v0, "v1": e.v1,
                   "halfedges": list(e.halfedges)} for e in model.edges],
        "halfedges": [{"origin": h.origin, "twin": h.twin, "edge": h.edge,
                       "loop": h.loop, "forward": h.forward,
                       "pcurve": None if h.pcurve is None else _geom_to_dict(h.pcurve)}
                      for h in model.halfedges],
        "loops": [{"halfedges": list(l.halfedges), "kind": l.kind, "face": l.face}
                  for l in model.loops],
        "faces": [{"surface": _geom_to_dict(f.surface), "outer": f.outer,
                   "inners": list(f.inners)} for f in model.faces],
        "shells": [list(s) for s in model.shells],
    }


def model_from_dict(d: dict) -> tuple:
    if d.get("format") != MODEL_FORMAT:
        raise FormatError(f"not a model file (format={d.get('format')!r})")
    try:
        model = BrepModel(
            vertices=np.array(d["vertices"], dtype=float).reshape(-1, 3),
            edges=[Edge(curve=_geom_from_dict(e["curve"]), v0=e["v0"], v1=e["v1"],
                        halfedges=tuple(e["halfedges"])) for e in d["edges"]],
            halfedges=[HalfEdge(origin=h["origin"], twin=h["twin"], edge=h["edge"],
                                loop=h["loop"], forward=h["forward"],
                                pcurve=None if h["pcurve"] is None
                                else _geom_from_dict(h["pcurve"]))
                       for h in d["halfedges"]],
            loops=[Loop(halfedges=tuple(l["halfedges"]), kind=l["kind"],
                        face=l["face"]) for l in d["loops"]],
            faces=[Face(surface=_geom_from_dict(f["surface"]), outer=f["outer"],
                        inners=tuple(f["inners"])) for f in d["faces"]],
            shells=tuple(tuple(s) for s in d.get("shells", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model file: {exc}") from exc
    if not model.shells:
        model.shells = compute_shells(model)
    return model, transform_from_dict(d.get("transform"))


def save_model(model: BrepModel, path, transform: TransformRecord | None = None):
    atomic_write_text(path, json.dumps(model_to_dict(model, transform)) + "\n")


def load_model(path) -> tuple:
    try:
        with open(path) as f:
            d = json.load(f)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}") from exc
    return model_from_dict(d)


def models_equal(a: BrepModel, b: BrepModel) -> bool:
    """Exact structural and geometric equality (bit-level floats)."""
    return model_to_dict(a) == model_to_dict(b)


# ---------------------------------------------------------------------------
# Token files
# ---------------------------------------------------------------------------

def save_tokens(sequences, path, layout_hash: str = "", codebook_id: str = ""):
    """Line-oriented token file with a JSON header line.

    Per-sequence normalization transforms are recorded in the header so
    each line stays a plain run of space-separated integers.
    """
    seqs = []
    transforms = []
    for s in sequences:
        if isinstance(s, TokenSequence):
            seqs.append(s.tokens)
            transforms.append(transform_to_dict(s.header.transform))
            layout_hash = layout_hash or s.header.layout_hash
            codebook_id = codebook_id or s.header.codebook_id
        else:
            seqs.append(list(s))
            transforms.append(None)
    header = {"format": TOKENS_FORMAT, "layout_hash": layout_hash,
              "codebook_id": codebook_id, "transforms": transforms}
    lines = [json.dumps(header)]
    lines.extend(" ".join(str(t) for t in s) for s in seqs)
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_tokens(path):
    """Returns (header dict, list of TokenSequence)."""
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty token file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:1: invalid header JSON: {exc}") from exc
    if header.get("format") != TOKENS_FORMAT:
        raise FormatError(f"{path}: not a token file")
    transforms = header.get("transforms") or []
    out = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            toks = [int(t) for t in line.split()]
        except ValueError as exc:
            raise FormatError(f"{path}:{ln}: non-integer token: {exc}") from exc
        idx = len(out)
        tr = transform_from_dict(transforms[idx]) if idx < len(transforms) else None
        out.append(TokenSequence(tokens=toks, header=SequenceHeader(
            layout_hash=header.get("layout_hash", ""),
            codebook_id=header.get("codebook_id", ""), transform=tr)))
    return header, out


# ---------------------------------------------------------------------------
# Codebook files
# ---------------------------------------------------------------------------

def save_codebook(cb: Codebook, path):
    doc = {"format": CODEBOOK_FORMAT, "depth": cb.depth,
           "level_size": cb.level_size, "dim": cb.dim, "id": cb.content_id(),
           "mean": cb.mean.tolist(), "scale": cb.scale.tolist(),
           "levels": cb.levels.tolist()}
    atomic_write_text(path, json.dumps(doc) + "\n")


def load_codebook(path) -> Codebook:
    try:
        with open(path) as f:
            d = json.load(f)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if d.get("format") != CODEBOOK_FORMAT:
        raise FormatError(f"{path}: not a codebook file")
    try:
        cb = Codebook(levels=np.array(d["levels"], dtype=float),
                      mean=np.array(d["mean"], dtype=float),
                      scale=np.array(d["scale"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed codebook: {exc}") from exc
    if cb.content_id() != d.get("id"):
        raise FormatError(f"{path}: codebook content hash mismatch")
    return cb


# ---------------------------------------------------------------------------
# Sequence-model files
# ---------------------------------------------------------------------------

LM_FORMAT = "brepcodec-ngram/1"


def save_ngram(model, path, layout_hash: str = ""):
    from .lm import NGramModel  # noqa: F401  (documents the expected type)

    counts = {",".join(str(t) for t in ctx): dict(sorted(hits.items()))
              for ctx, hits in sorted(model.counts.items())}
    doc = {"format": LM_FORMAT, "order": model.order,
           "smoothing": model.smoothing, "vocab_size": model.vocab_size,
           "layout_hash": layout_hash, "counts": counts}
    atomic_write_text(path, json.dumps(doc) + "\n")


def load_ngram(path):
    from .lm import NGramModel

    try:
        with open(path) as f:
            d = json.load(f)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if d.get("format") != LM_FORMAT:
        raise FormatError(f"{path}: not an n-gram model file")
    model = NGramModel(order=d["order"], smoothing=d["smoothing"],
                       vocab_size=d["vocab_size"])
    for key, hits in d["counts"].items():
        ctx = tuple(int(t) for t in key.split(",")) if key else ()
        slot = {int(t): int(n) for t, n in hits.items()}
        model.counts[ctx] = slot
        model.totals[ctx] = sum(slot.values())
    return model, d.get("layout_hash", "")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def _plain(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _plain(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def save_report(report, path):
    atomic_write_text(path, json.dumps(_plain(report), indent=2, sort_keys=True) + "\n")


def save_table(rows, path, columns):
    """Comma-separated table for histogram plotting."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(str(row[c]) for c in columns))
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Viewing exports
# ---------------------------------------------------------------------------

def export_obj(model: BrepModel, path, resolution: int = 32):
    """Tessellate faces at a fixed UV resolution (viewing only, lossy)."""
    cfg = SamplingConfig()
    lines = ["# brepcodec OBJ export (tessellated; not exact geometry)"]
    base = 1
    for f in range(len(model.faces)):
        chart = FaceChart(model, f, cfg)
        u0, u1, v0, v1 = chart.domain
        us = np.linspace(u0, u1, resolution + 1)
        vs = np.linspace(v0, v1, resolution + 1)
        uu, vv = np.meshgrid(us, vs, indexing="ij")
        uv = np.stack([uu.ravel(), vv.ravel()], axis=-1)
        inside = chart.in_region(chart.to_norm(uv)).reshape(resolution + 1,
                                                            resolution + 1)
        pts = model.faces[f].surface.point(uv[:, 0], uv[:, 1])
        for p in pts:
            lines.append(f"v {p[0]} {p[1]} {p[2]}")

        def nid(i, j):
            return base + i * (resolution + 1) + j

        for i in range(resolution):
            for j in range(resolution):
                if inside[i, j] and inside[i + 1, j] and inside[i + 1, j + 1] \
                        and inside[i, j + 1]:
                    lines.append(f"f {nid(i, j)} {nid(i + 1, j)} "
                                 f"{nid(i + 1, j + 1)} {nid(i, j + 1)}")
        base += (resolution + 1) ** 2
    atomic_write_text(path, "\n".join(lines) + "\n")


def export_vhp_debug(model: BrepModel, path, cfg: SamplingConfig | None = None):
    """Voronoi cell maps and VHP sample points for visualization."""
    cfg = cfg or SamplingConfig()
    records = extract_vhp(model, cfg)
    doc = {"format": "brepcodec-vhp-debug/1", "faces": [], "records": []}
    for f in range(len(model.faces)):
        cells = voronoi_assign(model, f, cfg)
        doc["faces"].append({"face": f, "domain": list(cells.domain),
                             "resolution": cells.resolution,
                             "labels": cells.labels.tolist()})
    for r in records:
        doc["records"].append({
            "halfedge": r.halfedge,
            "label": r.label,
            "half_patch": r.half_patch.samples.tolist(),
            "next_samples": r.next_samples.tolist(),
        })
    atomic_write_text(path, json.dumps(doc) + "\n")
