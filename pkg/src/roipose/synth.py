"""Deterministic synthetic scenes: sampled poses, projected 3D boxes and jittered RoIs."""
from dataclasses import dataclass, field
import json
import math
import os

import numpy as np

from .errors import GenerationError, ParseError, ProjectionError, ValidationError
from .geometry import CameraIntrinsics, Pose, Quaternion, Rect2D, bbox2d_of, project_points
from .metrics import ModelPoints
from .rng import Xoshiro256

MAX_ATTEMPTS = 1000
MAX_JITTER = 0.3

DEFAULT_CAMERA = CameraIntrinsics(500.0, 500.0, 320.0, 240.0)
DEFAULT_IMAGE_SIZE = (640, 480)


def _golden_icosahedron():
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    v = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            v += [(0.0, a, b), (a, b, 0.0), (b, 0.0, a)]
    v = np.array(v)
    return v / np.linalg.norm(v[0])


BUILTIN_MODELS = {
    "cube": lambda: np.array([[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)]),
    "box": lambda: np.array([[x, y, z] for x in (-0.5, 0.5) for y in (-0.3, 0.3) for z in (-0.2, 0.2)]),
    "icosahedron": _golden_icosahedron,
    "square": lambda: np.array([[-0.5, -0.5, 0.0], [0.5, -0.5, 0.0], [0.5, 0.5, 0.0], [-0.5, 0.5, 0.0]]),
}


def builtin_model(name):
    try:
        return ModelPoints.from_points(BUILTIN_MODELS[name]())
    except KeyError:
        raise ValidationError(f"unknown builtin model {name!r}; choose from {sorted(BUILTIN_MODELS)}") from None


def _parse_ply(text):
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic line", line=1)
    elements = []
    fmt = None
    end = None
    for no, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if len(tok) < 2:
                raise ParseError("malformed format line", line=no)
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3:
                raise ParseError(f"malformed element line {raw.strip()!r}", line=no)
            try:
                count = int(tok[2])
            except ValueError:
                raise ParseError(f"element count {tok[2]!r} is not an integer", line=no) from None
            elements.append([tok[1], count, []])
        elif tok[0] == "property":
            if not elements:
                raise ParseError("property before any element", line=no)
            elements[-1][2].append(tok[-1])
        elif tok[0] == "end_header":
            end = no
            break
        else:
            raise ParseError(f"unexpected header keyword {tok[0]!r}", line=no)

    vertex = next((e for e in elements if e[0] == "vertex"), None)
    if end is None:
        missing = "'end_header'" if vertex else "'element vertex' and 'end_header'"
        raise ParseError(f"truncated header: missing {missing}", line=len(lines))
    if vertex is None:
        raise ParseError("header has no 'element vertex'", line=end)
    if fmt != "ascii":
        raise ParseError(f"only ascii PLY is supported, got format {fmt!r}", line=end)
    props = vertex[2]
    for axis in "xyz":
        if axis not in props:
            raise ParseError(f"vertex element lacks property {axis!r}", line=end)
    idx = [props.index(a) for a in "xyz"]

    body = [(no, l) for no, l in enumerate(lines[end:], start=end + 1) if l.strip()]
    pos = 0
    for name, count, eprops in elements:
        if name != "vertex":
            pos += count
            continue
        rows = body[pos:pos + count]
        if len(rows) < count:
            raise ParseError(f"expected {count} vertices, found {len(rows)}", line=len(lines))
        pts = np.empty((count, 3))
        for r, (no, l) in enumerate(rows):
            tok = l.split()
            if len(tok) < len(eprops):
                raise ParseError(f"vertex row has {len(tok)} values, expected {len(eprops)}", line=no)
            try:
                pts[r] = [float(tok[i]) for i in idx]
            except ValueError:
                raise ParseError(f"non-numeric vertex row {l.strip()!r}", line=no) from None
        return pts


def _parse_json_model(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    if not isinstance(doc, dict) or "points" not in doc:
        raise ParseError("JSON model must be an object with a 'points' list", line=1)
    try:
        pts = np.array(doc["points"], dtype=np.float64)
    except (TypeError, ValueError):
        raise ParseError("'points' must be a list of [x, y, z] triples", line=1) from None
    if pts.size == 0:
        return np.empty((0, 3))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ParseError(f"'points' must be a list of [x, y, z] triples, got shape {pts.shape}", line=1)
    return pts


def load_model(path):
    """Load model points from ASCII PLY (vertex x y z) or JSON ``{"points": [...]}``."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if path.lower().endswith(".json") or text.lstrip().startswith("{"):
        pts = _parse_json_model(text)
    else:
        pts = _parse_ply(text)
    if pts is None or len(pts) == 0:
        raise ValidationError(f"{path}: model has no vertices")
    if not np.all(np.isfinite(pts)):
        raise ValidationError(f"{path}: model has non-finite coordinates")
    return ModelPoints.from_points(pts)


def resolve_model(spec):
    """A builtin model name or a path to a model file."""
    if spec in BUILTIN_MODELS:
        return builtin_model(spec)
    if not os.path.exists(spec):
        raise ValidationError(f"{spec!r} is neither a builtin model {sorted(BUILTIN_MODELS)} nor a file")
    return load_model(spec)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    count: int = 10
    depth_range: tuple = (3.0, 10.0)
    jitter: float = 0.1
    camera: CameraIntrinsics = DEFAULT_CAMERA
    image_size: tuple = DEFAULT_IMAGE_SIZE

    def __post_init__(self):
        d_min, d_max = self.depth_range
        if not 0 < d_min < d_max:
            raise ValidationError(f"depth range must satisfy 0 < d_min < d_max, got {self.depth_range}")
        if not 0.0 <= self.jitter <= MAX_JITTER:
            raise ValidationError(f"jitter must lie in [0, {MAX_JITTER}], got {self.jitter}")
        if self.count < 0:
            raise ValidationError(f"count must be non-negative, got {self.count}")
        w, h = self.image_size
        if not (w > 0 and h > 0):
            raise ValidationError(f"image size must be positive, got {self.image_size}")


@dataclass(frozen=True)
class SceneInstance:
    instance_id: int
    pose: Pose
    box8: np.ndarray = field(compare=False)
    amodal_box: Rect2D
    roi: Rect2D
    model_id: str = ""


def sample_rotation(rng):
    """Uniform rotation: normalized 4D Gaussian quaternion."""
    while True:
        q = np.array([rng.normal() for _ in range(4)])
        if np.sqrt(q @ q) > 1e-6:
            return Quaternion.from_array(q)


def _jitter_roi(box, jitter, draws, width, height):
    if jitter == 0.0:
        return box
    a, b, c, d = (2.0 * v - 1.0 for v in draws)
    cx, cy = box.center
    cx += a * jitter * box.w
    cy += b * jitter * box.h
    w = box.w * (1.0 + c * jitter)
    h = box.h * (1.0 + d * jitter)
    x0 = max(0.0, cx - 0.5 * w)
    y0 = max(0.0, cy - 0.5 * h)
    x1 = min(float(width), cx + 0.5 * w)
    y1 = min(float(height), cy + 0.5 * h)
    if not (x1 > x0 and y1 > y0):
        return None
    return Rect2D(x0, y0, x1 - x0, y1 - y0)


def sample_scene(cfg, model, model_id="model"):
    """Generate ``cfg.count`` instances from a fresh PRNG stream seeded by ``cfg.seed``.

    Per attempt the stream is consumed in a fixed order: rotation (4 normals),
    depth, image centre u, v, then 4 RoI jitter draws. Attempts whose projected
    3D box leaves the image are discarded.
    """
    rng = Xoshiro256(cfg.seed)
    K = cfg.camera
    W, H = cfg.image_size
    d_min, d_max = cfg.depth_range
    corners = model.bbox_corners
    out = []
    for idx in range(cfg.count):
        for _ in range(MAX_ATTEMPTS):
            q = sample_rotation(rng)
            d = rng.uniform(d_min, d_max)
            u = rng.uniform(0.0, W)
            v = rng.uniform(0.0, H)
            draws = [rng.uniform() for _ in range(4)]
            pose = Pose(q, ((u - K.px) / K.fx * d, (v - K.py) / K.fy * d, d))
            try:
                box8 = project_points(K, pose, corners)
            except ProjectionError:
                continue
            if box8.min() < 0.0 or np.any(box8[:, 0] > W) or np.any(box8[:, 1] > H):
                continue
            amodal = bbox2d_of(box8)
            roi = _jitter_roi(amodal, cfg.jitter, draws, W, H)
            if roi is None:
                continue
            out.append(SceneInstance(idx, pose, box8, amodal, roi, model_id))
            break
        else:
            raise GenerationError(f"could not place instance {idx} inside the image in {MAX_ATTEMPTS} attempts")
    return out


def _rect_list(r):
    return [r.x, r.y, r.w, r.h]


def pose_to_dict(pose):
    return {"q": [float(v) for v in pose.rotation.as_array()], "t": list(pose.translation)}


def pose_from_dict(d):
    try:
        return Pose(Quaternion.from_array(d["q"]), d["t"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed pose entry {d!r}") from exc


def scene_to_dict(instances, cfg, model_name):
    K = cfg.camera
    return {
        "seed": int(cfg.seed),
        "model": model_name,
        "camera": {"fx": K.fx, "fy": K.fy, "px": K.px, "py": K.py},
        "image_size": list(cfg.image_size),
        "instances": [
            {
                "instance_id": inst.instance_id,
                "model_id": inst.model_id,
                "pose": pose_to_dict(inst.pose),
                "roi": _rect_list(inst.roi),
                "amodal_box": _rect_list(inst.amodal_box),
                "box8": [[float(a), float(b)] for a, b in inst.box8],
            }
            for inst in instances
        ],
    }


def dumps(doc):
    # repr floats are the shortest strings that round-trip float64 exactly
    return json.dumps(doc, indent=1) + "\n"
