"""Command-line entry point: ``roipose {synth,roundtrip,refine,eval,check}``.

Exit codes: 0 success, 1 runtime or check failure, 2 usage error.
"""
import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .checks import SUITES, run_suite
from .errors import RoiPoseError
from .geometry import CameraIntrinsics, Pose, Quaternion, Rect2D
from .loss import LossMode, RefineConfig, refine_pose
from .metrics import DEFAULT_MAX_THRESHOLD, accuracy_at, add, add_s, auc_threshold
from .rng import Xoshiro256
from .roi import build_virtual_camera, identity_area, normalize_pose, recover_pose
from .synth import (
    MAX_JITTER,
    SynthConfig,
    dumps,
    pose_from_dict,
    resolve_model,
    sample_scene,
    scene_to_dict,
)


class CommandError(Exception):
    """Runtime failure reported with exit code 1."""


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_manifest(out_path, command, args, inputs, outputs, seed, started):
    config = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "command": command,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
        "seed": seed,
        "version": __version__,
        "duration_s": time.perf_counter() - started,
    }
    _write(out_path + ".manifest.json", dumps(manifest))


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CommandError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CommandError(f"{path}: line {exc.lineno}: {exc.msg}") from None


def _camera(doc):
    cam = doc.get("camera")
    if cam is None:
        return SynthConfig().camera
    return CameraIntrinsics(cam["fx"], cam["fy"], cam["px"], cam["py"])


def _instances(doc, path):
    items = doc.get("instances")
    if not isinstance(items, list):
        raise CommandError(f"{path}: missing 'instances' list")
    return items


def _model_for(args, doc):
    spec = args.model or doc.get("model")
    if spec is None:
        raise CommandError("no model given (use --model)")
    return resolve_model(spec)


def cmd_synth(args):
    started = time.perf_counter()
    cfg = SynthConfig(seed=args.seed, count=args.count, depth_range=(args.depth_min, args.depth_max),
                      jitter=args.jitter)
    model = resolve_model(args.model)
    scene = sample_scene(cfg, model, model_id=args.model)
    _write(args.out, dumps(scene_to_dict(scene, cfg, args.model)))
    _write_manifest(args.out, "synth", args, [args.model], [args.out], args.seed, started)
    print(f"wrote {len(scene)} instances to {args.out}")
    return 0


def _max_rel_error(a, b):
    dR = float(np.abs(a.R - b.R).max())
    dt = float(np.abs(a.t - b.t).max() / np.linalg.norm(b.t))
    return dR, dt


def cmd_roundtrip(args):
    started = time.perf_counter()
    doc = _load_json(args.scene)
    k_c = _camera(doc)
    model = _model_for(args, doc)
    m_I = identity_area(k_c, model.bbox_corners)
    rows = []
    for item in _instances(doc, args.scene):
        pose = pose_from_dict(item["pose"])
        cam = build_virtual_camera(k_c, Rect2D(*item["roi"]))
        back = recover_pose(normalize_pose(pose, cam, m_I), cam, m_I)
        dR, dt = _max_rel_error(back, pose)
        rows.append({"instance_id": item.get("instance_id", len(rows)),
                     "rotation_error": dR, "translation_error": dt, "max_error": max(dR, dt)})
    rows.sort(key=lambda r: r["instance_id"])
    worst = max((r["max_error"] for r in rows), default=0.0)
    ok = all(r["max_error"] < args.tol for r in rows)
    report = {"tol": args.tol, "max_error": worst, "passed": ok, "instances": rows}
    if args.out:
        _write(args.out, dumps(report))
        _write_manifest(args.out, "roundtrip", args, [args.scene], [args.out], doc.get("seed"), started)
    print(f"{len(rows)} instances, max round-trip error {worst:.3e} (tol {args.tol:.1e}): "
          f"{'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def perturb(pose, rng, rot_deg, depth_pct):
    """Rotate by exactly ``rot_deg`` about a random axis and scale depth by 1 +/- depth_pct %."""
    axis = np.array([rng.normal() for _ in range(3)])
    sign = 1.0 if rng.uniform() < 0.5 else -1.0
    q = pose.rotation
    if rot_deg != 0:
        q = Quaternion.from_axis_angle(axis, math.radians(rot_deg)) * q
    x, y, d = pose.translation
    if depth_pct != 0:
        d = d * (1.0 + sign * depth_pct / 100.0)
    return Pose(q, (x, y, d))


def _to_frame(pose, R):
    return Pose.from_rt(R @ pose.R, R @ pose.t)


def cmd_refine(args):
    started = time.perf_counter()
    doc = _load_json(args.scene)
    k_c = _camera(doc)
    model = _model_for(args, doc)
    cfg = RefineConfig(max_iters=args.iters, mode=args.mode)
    rng = Xoshiro256(args.seed)
    rows = []
    for item in _instances(doc, args.scene):
        label = pose_from_dict(item["pose"])
        init = perturb(label, rng, args.rot_deg, args.depth_pct)
        if cfg.mode is LossMode.COORDS2D:
            # refine in the virtual RoI camera frame, projecting through K_roi
            cam = build_virtual_camera(k_c, Rect2D(*item["roi"]))
            rep = refine_pose(_to_frame(init, cam.r_roi), _to_frame(label, cam.r_roi), model.points, cfg,
                              k=cam.k_roi)
            rep.pose = _to_frame(rep.pose, cam.r_roi.T)
        else:
            rep = refine_pose(init, label, model.points, cfg)
        err = add(rep.pose, label, model)
        row = {"instance_id": item.get("instance_id", len(rows)), "add": err,
               "reached_label": bool(err < 1e-3 * model.diameter)}
        row.update(rep.to_dict())
        rows.append(row)
    rows.sort(key=lambda r: r["instance_id"])
    hits = sum(r["reached_label"] for r in rows)
    summary = {"instances": len(rows), "reached_label": hits,
               "rate": hits / len(rows) if rows else 0.0, "mode": cfg.mode.value}
    if args.out:
        _write(args.out, dumps({"summary": summary, "instances": rows}))
        _write_manifest(args.out, "refine", args, [args.scene], [args.out], args.seed, started)
    print(f"mode {cfg.mode.value}: {hits}/{len(rows)} instances reached ADD < 1e-3 * diameter")
    return 0


def _pose_table(doc, path):
    table = {}
    for item in _instances(doc, path):
        if "instance_id" not in item:
            raise CommandError(f"{path}: instance without 'instance_id'")
        table[item["instance_id"]] = pose_from_dict(item["pose"])
    return table


def cmd_eval(args):
    started = time.perf_counter()
    est_doc = _load_json(args.est)
    gt_doc = _load_json(args.gt)
    model = _model_for(args, gt_doc)
    est = _pose_table(est_doc, args.est)
    gt = _pose_table(gt_doc, args.gt)
    unmatched = sorted(set(est) ^ set(gt), key=str)
    if unmatched:
        raise CommandError("unmatched instance ids: " + ", ".join(str(i) for i in unmatched))
    ids = sorted(gt)
    adds = [add(est[i], gt[i], model) for i in ids]
    adss = [add_s(est[i], gt[i], model) for i in ids]
    tau = args.threshold
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance_id", "add", "add_s"])
    def num(v):
        return repr(float(v))

    for i, a, s in zip(ids, adds, adss):
        w.writerow([i, num(a), num(s)])
    if ids:
        w.writerow(["auc", num(auc_threshold(adds, tau)), num(auc_threshold(adss, tau))])
        w.writerow(["acc", num(accuracy_at(adds, tau)), num(accuracy_at(adss, tau))])
        w.writerow(["mean", num(np.mean(adds)), num(np.mean(adss))])
    if args.out:
        _write(args.out, buf.getvalue())
        _write_manifest(args.out, "eval", args, [args.est, args.gt], [args.out], None, started)
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_check(args):
    started = time.perf_counter()
    results = run_suite(args.suite, seed=args.seed, inject_fault=args.inject_fault)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if args.out:
        _write(args.out, dumps({"suite": args.suite, "seed": args.seed,
                                "results": [{"name": r.name, "max_error": r.max_error, "tol": r.tol,
                                             "passed": r.passed} for r in results]}))
        _write_manifest(args.out, "check", args, [], [args.out], args.seed, started)
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return 1
    print(f"all {len(results)} checks passed in {time.perf_counter() - started:.1f}s")
    return 0


def _jitter(text):
    v = float(text)
    if not 0.0 <= v <= MAX_JITTER:
        raise argparse.ArgumentTypeError(f"must lie in [0, {MAX_JITTER}], got {v}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {v}")
    return v


def _non_negative(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {v}")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="roipose", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=_positive_int, default=10)
    p.add_argument("--model", default="cube", help="builtin name (cube, box, icosahedron, square) or model file")
    p.add_argument("--jitter", type=_jitter, default=0.1, help="RoI jitter fraction in [0, 0.3] (default 0.1)")
    p.add_argument("--depth-min", type=float, default=3.0)
    p.add_argument("--depth-max", type=float, default=10.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("roundtrip", help="normalize and recover every scene pose")
    p.add_argument("--scene", required=True)
    p.add_argument("--model", default=None, help="overrides the scene's model")
    p.add_argument("--tol", type=_non_negative, default=1e-9)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("refine", help="perturb scene poses and refine them on the coordinate loss")
    p.add_argument("--scene", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--rot-deg", type=_non_negative, default=5.0)
    p.add_argument("--depth-pct", type=_non_negative, default=5.0)
    p.add_argument("--mode", choices=[m.value for m in LossMode], default=LossMode.COORDS3D.value)
    p.add_argument("--iters", type=_positive_int, default=500)
    p.add_argument("--seed", type=int, default=0, help="seed of the perturbation stream")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", help="ADD / ADD-S of estimated vs ground-truth poses as CSV")
    p.add_argument("--est", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--model", default=None, help="defaults to the ground-truth file's model")
    p.add_argument("--threshold", type=float, default=DEFAULT_MAX_THRESHOLD, help="max AUC threshold (m)")
    p.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check", help="run oracle verification suites")
    p.add_argument("--suite", choices=sorted(SUITES) + ["all"], default="all")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "eval" and not args.threshold > 0:
        parser.error("argument --threshold: must be positive")
    if args.command == "synth" and not 0 < args.depth_min < args.depth_max:
        parser.error("arguments --depth-min/--depth-max: need 0 < depth-min < depth-max")
    try:
        return args.func(args)
    except (CommandError, RoiPoseError, KeyError, TypeError, OSError) as exc:
        msg = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"roipose {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
