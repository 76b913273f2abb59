"""Command-line interface: synth, splits, trajectory, train, render, eval.

Every command takes ``--out`` (a run directory), ``--seed``, ``--config``
(JSON file of flag defaults) and ``--threads``.  Config precedence is
built-in defaults < config file < explicit flags, and the fully resolved
configuration is dumped into ``run_manifest.json`` inside the run directory
so any reported number can be traced back to its settings.  Exit codes:
0 success, 2 usage/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .encodings import HashGridParams, geometric_scale
from .geometry import PinholeCamera, Pose6D
from .metrics import MetricReport, psnr, ssim, SSIM_WINDOW
from .models import RelightModel, SceneBounds, Variant, render_frame
from .scene import OlatScene, SceneLoadError, load_scene, save_scene
from .splits import SPLIT_NAMES, generate_splits, load_splits, save_splits
from .synth import PRESET_NAMES, load_scene_spec, preset_scene, synth_olat
from .trajectory import DOME, WEDGE, SphericalRegion, equal_area_waypoints
from .training import TrainConfig, train

USAGE_ERROR = 2
NUMERICAL_ERROR = 3

_PROFILES = {
    "paper": {"batch": 4096, "coarse": 128, "fine": 128, "hash_levels": 16,
              "hash_table_log2": 19, "hash_max_res": 2048},
    "desk": {"batch": 2048, "coarse": 16, "fine": 16, "hash_levels": 8,
             "hash_table_log2": 15, "hash_max_res": 256},
}


class CliError(Exception):
    """Input or usage problem; maps to exit code 2."""


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from exc
    if isinstance(data, dict) and "config" in data and "command" in data:
        data = data["config"]  # accept a previous run's manifest
    if not isinstance(data, dict):
        raise CliError(f"config file {path} must contain a JSON object")
    return data


def _resolve(args, defaults: dict) -> dict:
    """defaults < config file < explicit flags (flags left at None ignored)."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config)
        cfg.update({k: file_cfg[k] for k in defaults if k in file_cfg})
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _prepare_out(cfg_out) -> Path:
    if not cfg_out:
        raise CliError("--out is required")
    out = Path(cfg_out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, cfg: dict, timings: dict, outputs: list) -> None:
    manifest = {
        "command": command,
        "version": f"olatnerf-{__version__}",
        "seed": cfg.get("seed"),
        "config": cfg,
        "timings": {k: round(v, 3) for k, v in timings.items()},
        "outputs": [str(p) for p in outputs],
    }
    with open(out / "run_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)


def _save_rgb8(path: Path, image: np.ndarray) -> None:
    arr = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def _save_gray16(path: Path, image: np.ndarray) -> None:
    arr = np.clip(np.round(np.asarray(image) * 65535.0), 0, 65535).astype(np.uint16)
    Image.fromarray(arr, mode="I;16").save(path)


def _quantize(image: np.ndarray) -> np.ndarray:
    return np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8) / 255.0


def _region_from_cfg(cfg: dict) -> SphericalRegion:
    name = cfg.get("region", "dome")
    if name == "dome":
        region = DOME
    elif name == "wedge":
        region = WEDGE
    else:
        raise CliError(f"unknown region {name!r}; expected dome or wedge")
    overrides = [cfg.get(k) for k in ("theta_min", "theta_max", "phi_min", "phi_max")]
    if any(v is not None for v in overrides):
        vals = [
            math.radians(v) if v is not None else d
            for v, d in zip(
                overrides,
                (region.theta_min, region.theta_max, region.phi_min, region.phi_max),
            )
        ]
        region = SphericalRegion(*vals)
    return region


def _scene_target(spec) -> np.ndarray:
    """Aim cameras/lights at the non-wall surfaces' center."""
    boxes = [s.aabb() for s in spec.surfaces if type(s).__name__ != "Rect"]
    if not boxes:
        boxes = [spec.aabb()]
    los, his = zip(*boxes)
    return 0.5 * (np.min(los, axis=0) + np.max(his, axis=0))


# ----------------------------------------------------------------------
# synth


_SYNTH_DEFAULTS = {
    "preset": "sphere-shadow",
    "spec": None,
    "views": 10,
    "lights": 10,
    "res": 64,
    "focal": None,
    "spp": 1,
    "seed": 0,
    "camera_radius": 1.5,
    "light_radius": 1.4,
    "out": None,
}


def cmd_synth(args) -> int:
    cfg = _resolve(args, _SYNTH_DEFAULTS)
    out = _prepare_out(cfg["out"])
    t0 = time.perf_counter()
    if cfg["spec"]:
        try:
            spec = load_scene_spec(cfg["spec"])
        except (OSError, ValueError, KeyError) as exc:
            raise CliError(f"invalid scene spec {cfg['spec']}: {exc}") from exc
    else:
        try:
            spec = preset_scene(cfg["preset"])
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    if cfg["views"] < 1 or cfg["lights"] < 1 or cfg["res"] < 1 or cfg["spp"] < 1:
        raise CliError("views, lights, res and spp must be >= 1")

    target = _scene_target(spec)
    cameras = equal_area_waypoints(WEDGE, cfg["views"], cfg["camera_radius"], target)
    lights = equal_area_waypoints(DOME, cfg["lights"], cfg["light_radius"], target)
    res = int(cfg["res"])
    focal = cfg["focal"] if cfg["focal"] else 1.1 * res
    camera = PinholeCamera(fx=focal, fy=focal, cx=res / 2, cy=res / 2, width=res, height=res)

    _log(f"synth: tracing {cfg['views']}x{cfg['lights']} frames at {res}x{res}")
    scene = synth_olat(spec, cameras, lights, camera, spp=cfg["spp"], seed=cfg["seed"])
    trace_s = time.perf_counter() - t0
    save_scene(scene, out)
    _write_manifest(out, "synth", cfg, {"trace": trace_s}, [out / "scene.json"])
    _log(f"synth: wrote {len(scene.frames)} frames to {out}")
    return 0


# ----------------------------------------------------------------------
# splits


_SPLITS_DEFAULTS = {
    "views": 50,
    "lights": 40,
    "seed": 0,
    "holdout": 3,
    "val_views": None,
    "test_views": None,
    "test_lights": None,
    "val_lights": None,
    "out": None,
}


def cmd_splits(args) -> int:
    cfg = _resolve(args, _SPLITS_DEFAULTS)
    out = _prepare_out(cfg["out"])
    try:
        assignment = generate_splits(
            cfg["views"], cfg["lights"], seed=cfg["seed"], holdout=cfg["holdout"],
            n_val_views=cfg["val_views"], n_test_views=cfg["test_views"],
            n_test_lights=cfg["test_lights"], val_lights_per_view=cfg["val_lights"],
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    path = save_splits(assignment, out / "splits.json")
    counts = {name: len(assignment.frames(name)) for name in SPLIT_NAMES}
    _log(f"splits: {counts}")
    _write_manifest(out, "splits", cfg, {}, [path])
    return 0


# ----------------------------------------------------------------------
# trajectory


_TRAJECTORY_DEFAULTS = {
    "count": 40,
    "radius": 1.4,
    "region": "dome",
    "theta_min": None,
    "theta_max": None,
    "phi_min": None,
    "phi_max": None,
    "target": [0.0, 0.0, 0.3],
    "seed": 0,
    "out": None,
}


def cmd_trajectory(args) -> int:
    cfg = _resolve(args, _TRAJECTORY_DEFAULTS)
    out = _prepare_out(cfg["out"])
    region = _region_from_cfg(cfg)
    try:
        poses = equal_area_waypoints(region, cfg["count"], cfg["radius"], cfg["target"])
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    payload = {
        "count": len(poses),
        "radius": cfg["radius"],
        "target": list(cfg["target"]),
        "positions": [p.translation.tolist() for p in poses],
        "matrices": [p.to_matrix().tolist() for p in poses],
    }
    path = out / "trajectory.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
    _write_manifest(out, "trajectory", cfg, {}, [path])
    _log(f"trajectory: wrote {len(poses)} poses to {path}")
    return 0


# ----------------------------------------------------------------------
# train


_TRAIN_DEFAULTS = {
    "scene": None,
    "variant": "v5",
    "profile": "desk",
    "split": None,
    "holdout": None,
    "val_views": 1,
    "test_views": 1,
    "test_lights": 2,
    "val_lights": 2,
    "batch": None,
    "lr": 0.01,
    "coarse": None,
    "fine": None,
    "epochs": None,
    "patience": 10,
    "max_steps": None,
    "jitter": True,
    "seed": 0,
    "embed_width": 15,
    "hidden_width": 64,
    "hash_levels": None,
    "hash_table_log2": None,
    "hash_base_res": 16,
    "hash_max_res": None,
    "out": None,
}


def _profile_value(cfg: dict, key: str, profile: dict):
    return cfg[key] if cfg[key] is not None else profile[key]


def _train_setup(cfg: dict, scene: OlatScene):
    profile = _PROFILES.get(cfg["profile"])
    if profile is None:
        raise CliError(f"unknown profile {cfg['profile']!r}; expected paper or desk")
    levels = int(_profile_value(cfg, "hash_levels", profile))
    table_log2 = int(_profile_value(cfg, "hash_table_log2", profile))
    max_res = int(_profile_value(cfg, "hash_max_res", profile))
    hash_params = HashGridParams(
        levels=levels,
        features_per_level=2,
        table_size=2**table_log2,
        base_resolution=int(cfg["hash_base_res"]),
        per_level_scale=geometric_scale(int(cfg["hash_base_res"]), max_res, levels),
    )
    max_epochs = cfg["epochs"] if cfg["epochs"] is not None else 5
    config = TrainConfig(
        rays_per_batch=int(_profile_value(cfg, "batch", profile)),
        lr=cfg["lr"],
        n_coarse=int(_profile_value(cfg, "coarse", profile)),
        n_fine=int(_profile_value(cfg, "fine", profile)),
        patience=cfg["patience"],
        max_epochs=int(max_epochs),
        max_steps=cfg["max_steps"],
        jitter=bool(cfg["jitter"]),
        seed=cfg["seed"],
    )
    return hash_params, config


def _train_split(cfg: dict, scene: OlatScene, out: Path):
    if cfg["split"]:
        try:
            assignment = load_splits(cfg["split"])
        except (OSError, KeyError, ValueError) as exc:
            raise CliError(f"cannot load split file {cfg['split']}: {exc}") from exc
        if assignment.n_views != scene.n_views or assignment.n_lights != scene.n_lights:
            raise CliError(
                f"split grid {assignment.n_views}x{assignment.n_lights} does not match"
                f" scene {scene.n_views}x{scene.n_lights}"
            )
        return assignment
    kwargs = {}
    if cfg["holdout"] is not None:
        kwargs = {"holdout": cfg["holdout"]}
    else:
        kwargs = {
            "n_val_views": cfg["val_views"],
            "n_test_views": cfg["test_views"],
            "n_test_lights": cfg["test_lights"],
            "val_lights_per_view": cfg["val_lights"],
        }
    try:
        assignment = generate_splits(scene.n_views, scene.n_lights, seed=cfg["seed"], **kwargs)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    save_splits(assignment, out / "splits.json")
    return assignment


def cmd_train(args) -> int:
    cfg = _resolve(args, _TRAIN_DEFAULTS)
    if not cfg["scene"]:
        raise CliError("--scene is required")
    out = _prepare_out(cfg["out"])
    try:
        scene = load_scene(cfg["scene"])
    except SceneLoadError as exc:
        raise CliError(str(exc)) from exc
    try:
        variant = Variant.parse(cfg["variant"])
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    hash_params, config = _train_setup(cfg, scene)
    assignment = _train_split(cfg, scene, out)

    rng = np.random.default_rng(config.seed)
    model = RelightModel(
        variant,
        hash_params,
        SceneBounds(scene.bounds_center, scene.bounds_radius),
        embed_width=int(cfg["embed_width"]),
        hidden_width=int(cfg["hidden_width"]),
        rng=rng,
    )

    def progress(entry):
        loss = entry["mean_loss"]
        loss_s = f"{loss:.6f}" if loss is not None else "-"
        _log(
            f"train[{variant.value}] epoch {entry['epoch']:3d}"
            f" loss {loss_s} val {entry['val_psnr']:.2f} dB"
        )

    t0 = time.perf_counter()
    result = train(model, scene, assignment, config, progress=progress)
    train_s = time.perf_counter() - t0

    ckpt_path = out / "checkpoint.bin"
    save_checkpoint(
        ckpt_path,
        result.model,
        optimizer_state=result.optimizer_state,
        optimizer_step=result.optimizer_step,
        train_config=config.to_dict(),
        meta={
            "scene_name": scene.name,
            "n_views": scene.n_views,
            "n_lights": scene.n_lights,
            "best_epoch": result.best_epoch,
            "best_val_psnr": result.best_val_psnr,
            "diverged": result.diverged,
        },
    )
    history_path = out / "history.csv"
    with open(history_path, "w") as fh:
        fh.write("epoch,mean_loss,train_psnr,val_psnr,seconds\n")
        for e in result.history:
            loss = "" if e["mean_loss"] is None else f"{e['mean_loss']:.8f}"
            tp = "" if e["train_psnr"] is None else f"{e['train_psnr']:.4f}"
            fh.write(f"{e['epoch']},{loss},{tp},{e['val_psnr']:.4f},{e['seconds']:.2f}\n")
    _write_manifest(out, "train", cfg, {"train": train_s}, [ckpt_path, history_path])
    _log(
        f"train: best val {result.best_val_psnr:.2f} dB at epoch {result.best_epoch}"
        f" ({result.steps} steps)"
    )
    if result.diverged:
        _log("train: diverged (NaN loss); checkpoint holds the last finite state")
        return NUMERICAL_ERROR
    return 0


# ----------------------------------------------------------------------
# render / eval


def _load_model_for_scene(ckpt_path, scene: OlatScene):
    try:
        model, _, header = load_checkpoint(ckpt_path)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load checkpoint {ckpt_path}: {exc}") from exc
    meta = header.get("meta") or {}
    if meta.get("n_views") is not None and (
        meta["n_views"] != scene.n_views or meta["n_lights"] != scene.n_lights
    ):
        raise CliError(
            f"checkpoint was trained on a {meta['n_views']}x{meta['n_lights']} grid,"
            f" scene has {scene.n_views}x{scene.n_lights}"
        )
    bounds = model.bounds
    if not (
        np.allclose(bounds.center, scene.bounds_center, atol=1e-6)
        and abs(bounds.radius - scene.bounds_radius) < 1e-6
    ):
        raise CliError("checkpoint bounds do not match the scene bounds")
    tc = header.get("train_config") or {}
    return model, tc, header


_RENDER_DEFAULTS = {
    "checkpoint": None,
    "scene": None,
    "view": 0,
    "light": 0,
    "coarse": None,
    "fine": None,
    "seed": 0,
    "out": None,
}


def cmd_render(args) -> int:
    cfg = _resolve(args, _RENDER_DEFAULTS)
    if not cfg["checkpoint"] or not cfg["scene"]:
        raise CliError("--checkpoint and --scene are required")
    out = _prepare_out(cfg["out"])
    try:
        scene = load_scene(cfg["scene"], images=False)
    except SceneLoadError as exc:
        raise CliError(str(exc)) from exc
    model, tc, _ = _load_model_for_scene(cfg["checkpoint"], scene)
    n, m = int(cfg["view"]), int(cfg["light"])
    if not (0 <= n < scene.n_views and 0 <= m < scene.n_lights):
        raise CliError(f"frame ({n}, {m}) out of range for this scene")
    n_coarse = int(cfg["coarse"] if cfg["coarse"] is not None else tc.get("n_coarse", 128))
    n_fine = int(cfg["fine"] if cfg["fine"] is not None else tc.get("n_fine", 128))

    t0 = time.perf_counter()
    image, aux = render_frame(
        model, scene.camera, scene.camera_poses[n], scene.light_poses[m],
        scene.t_near, scene.t_far, n_coarse=n_coarse, n_fine=n_fine, want_aux=True,
    )
    outputs = [out / f"render_v{n:03d}_l{m:03d}.png"]
    _save_rgb8(outputs[0], image)
    _save_gray16(out / "opacity.png", np.clip(aux["opacity"], 0.0, 1.0))
    outputs.append(out / "opacity.png")
    if "visibility" in aux:
        _save_gray16(out / "visibility.png", np.clip(aux["visibility"], 0.0, 1.0))
        outputs.append(out / "visibility.png")
    _write_manifest(out, "render", cfg, {"render": time.perf_counter() - t0}, outputs)
    return 0


_EVAL_DEFAULTS = {
    "checkpoint": None,
    "scene": None,
    "split": "val",
    "splits_file": None,
    "holdout": None,
    "val_views": 1,
    "test_views": 1,
    "test_lights": 2,
    "val_lights": 2,
    "coarse": None,
    "fine": None,
    "seed": 0,
    "out": None,
}


def cmd_eval(args) -> int:
    cfg = _resolve(args, _EVAL_DEFAULTS)
    if not cfg["checkpoint"] or not cfg["scene"]:
        raise CliError("--checkpoint and --scene are required")
    if cfg["split"] not in SPLIT_NAMES[:4]:
        raise CliError(f"--split must be one of {SPLIT_NAMES[:4]}")
    out = _prepare_out(cfg["out"])
    try:
        scene = load_scene(cfg["scene"])
    except SceneLoadError as exc:
        raise CliError(str(exc)) from exc
    model, tc, _ = _load_model_for_scene(cfg["checkpoint"], scene)

    if cfg["splits_file"]:
        try:
            assignment = load_splits(cfg["splits_file"])
        except (OSError, KeyError, ValueError) as exc:
            raise CliError(f"cannot load split file {cfg['splits_file']}: {exc}") from exc
        if assignment.n_views != scene.n_views or assignment.n_lights != scene.n_lights:
            raise CliError("split grid does not match the scene")
    else:
        kwargs = (
            {"holdout": cfg["holdout"]}
            if cfg["holdout"] is not None
            else {
                "n_val_views": cfg["val_views"],
                "n_test_views": cfg["test_views"],
                "n_test_lights": cfg["test_lights"],
                "val_lights_per_view": cfg["val_lights"],
            }
        )
        try:
            assignment = generate_splits(
                scene.n_views, scene.n_lights, seed=cfg["seed"], **kwargs
            )
        except ValueError as exc:
            raise CliError(str(exc)) from exc

    frames = [k for k in assignment.frames(cfg["split"]) if k in scene.frames]
    if not frames:
        raise CliError(f"split {cfg['split']!r} contains no frames present in the scene")

    n_coarse = int(cfg["coarse"] if cfg["coarse"] is not None else tc.get("n_coarse", 128))
    n_fine = int(cfg["fine"] if cfg["fine"] is not None else tc.get("n_fine", 128))
    ssim_ok = min(scene.camera.width, scene.camera.height) >= SSIM_WINDOW
    if not ssim_ok:
        _log(
            f"eval: images smaller than {SSIM_WINDOW}x{SSIM_WINDOW};"
            " SSIM unavailable, reporting PSNR only"
        )

    report = MetricReport()
    outputs = []
    t0 = time.perf_counter()
    for n, m in frames:
        image, aux = render_frame(
            model, scene.camera, scene.camera_poses[n], scene.light_poses[m],
            scene.t_near, scene.t_far, n_coarse=n_coarse, n_fine=n_fine, want_aux=True,
        )
        quantized = _quantize(image)
        gt = scene.frames[(n, m)]
        frame_psnr = psnr(quantized, gt)
        frame_ssim = ssim(quantized, gt) if ssim_ok else None
        report.add(n, m, frame_psnr, frame_ssim)
        render_path = out / f"render_v{n:03d}_l{m:03d}.png"
        _save_rgb8(render_path, image)
        outputs.append(render_path)
        if "visibility" in aux:
            vis_path = out / f"visibility_v{n:03d}_l{m:03d}.png"
            _save_gray16(vis_path, np.clip(aux["visibility"], 0.0, 1.0))
            outputs.append(vis_path)
        _log(
            f"eval[{cfg['split']}] frame ({n},{m}):"
            f" psnr {min(frame_psnr, 100.0):.2f}"
            + (f" ssim {frame_ssim:.4f}" if frame_ssim is not None else "")
        )

    report_path = report.save_json(out / "report.json")
    csv_path = report.save_csv(out / "frames.csv")
    outputs += [report_path, csv_path]
    _write_manifest(out, "eval", cfg, {"eval": time.perf_counter() - t0}, outputs)
    mean_ssim = report.mean_ssim
    _log(
        f"eval[{cfg['split']}]: mean psnr {report.mean_psnr:.2f} dB"
        + (f", mean ssim {mean_ssim:.4f}" if mean_ssim is not None else "")
        + f" over {report.count} frames"
    )
    return 0


# ----------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="run directory for outputs and the manifest")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--config", help="JSON file of flag defaults")
    p.add_argument("--threads", type=int, help="limit BLAS/thread-pool size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="olatnerf",
        description="Relightable radiance fields on OLAT captures",
    )
    parser.add_argument("--version", action="version", version=f"olatnerf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="ray-trace a synthetic OLAT scene")
    p.add_argument("--preset", choices=PRESET_NAMES)
    p.add_argument("--spec", help="scene spec JSON (overrides --preset)")
    p.add_argument("--views", type=int)
    p.add_argument("--lights", type=int)
    p.add_argument("--res", type=int)
    p.add_argument("--focal", type=float)
    p.add_argument("--spp", type=int, help="samples per pixel")
    p.add_argument("--camera-radius", dest="camera_radius", type=float)
    p.add_argument("--light-radius", dest="light_radius", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("splits", help="generate train/val/easy/hard splits")
    p.add_argument("--views", type=int)
    p.add_argument("--lights", type=int)
    p.add_argument("--holdout", type=int)
    p.add_argument("--val-views", dest="val_views", type=int)
    p.add_argument("--test-views", dest="test_views", type=int)
    p.add_argument("--test-lights", dest="test_lights", type=int)
    p.add_argument("--val-lights", dest="val_lights", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_splits)

    p = sub.add_parser("trajectory", help="equal-area waypoint poses on a sphere")
    p.add_argument("--count", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--region", choices=("dome", "wedge"))
    p.add_argument("--theta-min", dest="theta_min", type=float, help="degrees")
    p.add_argument("--theta-max", dest="theta_max", type=float, help="degrees")
    p.add_argument("--phi-min", dest="phi_min", type=float, help="degrees")
    p.add_argument("--phi-max", dest="phi_max", type=float, help="degrees")
    p.add_argument("--target", type=float, nargs=3)
    _add_common(p)
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("train", help="train a variant on a scene")
    p.add_argument("--scene")
    p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--profile", choices=tuple(_PROFILES))
    p.add_argument("--split", help="split JSON produced by the splits command")
    p.add_argument("--holdout", type=int)
    p.add_argument("--val-views", dest="val_views", type=int)
    p.add_argument("--test-views", dest="test_views", type=int)
    p.add_argument("--test-lights", dest="test_lights", type=int)
    p.add_argument("--val-lights", dest="val_lights", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--coarse", type=int)
    p.add_argument("--fine", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--jitter", dest="jitter", action=argparse.BooleanOptionalAction)
    p.add_argument("--embed-width", dest="embed_width", type=int)
    p.add_argument("--hidden-width", dest="hidden_width", type=int)
    p.add_argument("--hash-levels", dest="hash_levels", type=int)
    p.add_argument("--hash-table-log2", dest="hash_table_log2", type=int)
    p.add_argument("--hash-base-res", dest="hash_base_res", type=int)
    p.add_argument("--hash-max-res", dest="hash_max_res", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("render", help="render one (view, light) frame")
    p.add_argument("--checkpoint")
    p.add_argument("--scene")
    p.add_argument("--view", type=int)
    p.add_argument("--light", type=int)
    p.add_argument("--coarse", type=int)
    p.add_argument("--fine", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("eval", help="render and score a split")
    p.add_argument("--checkpoint")
    p.add_argument("--scene")
    p.add_argument("--split", choices=SPLIT_NAMES[:4])
    p.add_argument("--splits-file", dest="splits_file")
    p.add_argument("--holdout", type=int)
    p.add_argument("--val-views", dest="val_views", type=int)
    p.add_argument("--test-views", dest="test_views", type=int)
    p.add_argument("--test-lights", dest="test_lights", type=int)
    p.add_argument("--val-lights", dest="val_lights", type=int)
    p.add_argument("--coarse", type=int)
    p.add_argument("--fine", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    import contextlib

    stack = contextlib.ExitStack()
    if getattr(args, "threads", None):
        from threadpoolctl import threadpool_limits

        stack.enter_context(threadpool_limits(limits=args.threads))
    with stack:
        try:
            return args.func(args)
        except CliError as exc:
            _log(f"error: {exc}")
            return USAGE_ERROR
        except (SceneLoadError, FileNotFoundError) as exc:
            _log(f"error: {exc}")
            return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
