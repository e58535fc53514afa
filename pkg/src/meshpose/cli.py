"""Pipeline entry points.

Subcommands: synth, pseudo-gen, train, infer, eval, sweep.

Conventions:
  - exit codes: 0 success, 1 usage error, 2 data error
  - logs go to stderr; machine-readable results go to stdout or --out files
  - flag precedence: command line > --config file ('key = value' lines,
    '#' comments, keys match long option names) > built-in defaults
  - every subcommand is deterministic given its flags and seed
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import featureio, metrics, rendercompare, synth
from .correspondence import ViewBank, build_view_bank, generate, write_correspondences
from .errors import DataError, MeshposeError, ValidationError
from .featureio import read_manifest
from .geometry import Camera, geodesic_distance, rasterize_visibility, read_mesh
from .rendercompare import (
    NeuralMesh,
    OptimOptions,
    PoseGrid,
    optimize_pose,
    read_checkpoint,
    train,
    write_checkpoint,
    write_pose_estimates,
)

logger = logging.getLogger("meshpose")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; usage errors are 1
        raise UsageError(f"{self.prog}: {message}")


def _float_list(text: str) -> tuple:
    return tuple(float(x) for x in text.split(","))


def _int_list(text: str) -> tuple:
    return tuple(int(x) for x in text.split(","))


# defaults live outside argparse so a --config file can override them while
# explicit flags still win
_COMMON_DEFAULTS = {
    "grid_size": 32,
    "focal": 50.0,
    "principal": None,  # default: grid center
    "jobs": 1,
}

_VIEW_GRID_DEFAULTS = {
    "view_azimuths": 36,
    "view_elevations": (-math.pi / 9, 0.0, math.pi / 9),
    "view_thetas": (0.0,),
    "view_distances": (5.0,),
}

_OPTIM_DEFAULTS = {
    "step_angle": 0.05,
    "step_distance": 0.02,
    "max_iterations": 300,
    "tol": 1e-6,
    "patience": 10,
    "candidates": 3,
}

DEFAULTS = {
    "synth": {
        **_COMMON_DEFAULTS,
        **_VIEW_GRID_DEFAULTS,
        "out": None,
        "n": 20,
        "seed": None,
        "channels": 64,
        "subdiv": 9,
        "extents": (1.6, 0.6, 0.9),
        "noise": 0.1,
        "occlusion": 0.0,
        "clutter": 0.0,
        "view_dep": 0.0,
        "mirror_eps": None,
        "views": 0,
        "elevation_range": (-math.pi / 6, math.pi / 6),
        "theta_range": (-math.pi / 18, math.pi / 18),
        "distance_range": (4.5, 5.5),
        "temperature": 0.07,
        "momentum": 0.9,
    },
    "pseudo-gen": {
        **_COMMON_DEFAULTS,
        "manifest": None,
        "views_manifest": None,
        "mesh": None,
        "checkpoint": None,
        "out_dir": None,
        "downweight": 0.25,
        "weighted_votes": False,
        "activation_threshold": 0.5,
    },
    "train": {
        **_COMMON_DEFAULTS,
        "manifest": None,
        "views_manifest": None,
        "mesh": None,
        "checkpoint": None,
        "resume": None,
        "out": None,
        "epochs": 3,
        "seed": None,
        "downweight": 0.25,
        "weighted_votes": False,
        "activation_threshold": 0.5,
        "temperature": 0.07,
        "momentum": 0.9,
    },
    "infer": {
        **_COMMON_DEFAULTS,
        **_VIEW_GRID_DEFAULTS,
        **_OPTIM_DEFAULTS,
        "manifest": None,
        "checkpoint": None,
        "out": None,
        "mask_mode": "external",
        "activation_threshold": 0.5,
    },
    "eval": {
        **_COMMON_DEFAULTS,
        "manifest": None,
        "pred": None,
        "corr_dir": None,
        "checkpoint": None,
        "alpha": 0.1,
        "stride": 1,
        "out": None,
    },
    "sweep": {
        **_COMMON_DEFAULTS,
        **_VIEW_GRID_DEFAULTS,
        **_OPTIM_DEFAULTS,
        "manifest": None,
        "eval_manifest": None,
        "views_manifest": None,
        "mesh": None,
        "checkpoint": None,
        "sizes": (64, 128, 256),
        "epochs": 3,
        "seed": None,
        "downweight": 0.25,
        "weighted_votes": False,
        "activation_threshold": 0.5,
        "temperature": 0.07,
        "momentum": 0.9,
        "mask_mode": "external",
        "out": None,
    },
}


def _add_common(p: _Parser):
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="config file of 'key = value' lines")
    p.add_argument("--grid-size", type=int, default=S, help="feature grid side length")
    p.add_argument("--focal", type=float, default=S, help="focal length in grid cells")
    p.add_argument("--principal", type=_float_list, default=S,
                   help="principal point 'px,py' (default: grid center)")
    p.add_argument("--jobs", type=int, default=S, help="parallel workers over images")
    p.add_argument("-v", "--verbose", action="store_true", default=S,
                   help="more logging on stderr")


def _add_view_grid(p: _Parser):
    S = argparse.SUPPRESS
    p.add_argument("--view-azimuths", type=int, default=S,
                   help="azimuth count of the view grid")
    p.add_argument("--view-elevations", type=_float_list, default=S,
                   help="comma-separated view-grid elevations (radians)")
    p.add_argument("--view-thetas", type=_float_list, default=S,
                   help="comma-separated view-grid in-plane rotations")
    p.add_argument("--view-distances", type=_float_list, default=S,
                   help="comma-separated view-grid distances")


def _add_optim(p: _Parser):
    S = argparse.SUPPRESS
    p.add_argument("--step-angle", type=float, default=S, help="angle step size (rad)")
    p.add_argument("--step-distance", type=float, default=S,
                   help="relative distance step size")
    p.add_argument("--max-iterations", type=int, default=S, help="descent iteration cap")
    p.add_argument("--tol", type=float, default=S,
                   help="per-pixel NLL improvement convergence threshold")
    p.add_argument("--patience", type=int, default=S,
                   help="iterations without improvement before stopping")
    p.add_argument("--candidates", type=int, default=S,
                   help="grid candidates refined by descent")


def build_parser() -> _Parser:
    parser = _Parser(prog="meshpose", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    S = argparse.SUPPRESS

    p = sub.add_parser("synth", parents=[], help="generate a synthetic corpus",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    _add_view_grid(p)
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--n", type=int, default=S, help="number of images")
    p.add_argument("--seed", type=int, default=S, help="RNG seed (required)")
    p.add_argument("--channels", type=int, default=S, help="feature dimension")
    p.add_argument("--subdiv", type=int, default=S, help="cuboid subdivisions per edge")
    p.add_argument("--extents", type=_float_list, default=S, help="cuboid extents 'x,y,z'")
    p.add_argument("--noise", type=float, default=S, help="feature noise sigma")
    p.add_argument("--occlusion", type=float, default=S,
                   help="fraction of object cells occluded")
    p.add_argument("--clutter", type=float, default=S,
                   help="fraction of background cells turned into distractors")
    p.add_argument("--view-dep", type=float, default=S,
                   help="view-dependent appearance strength")
    p.add_argument("--mirror-eps", type=float, default=S,
                   help="mirror-pair feature perturbation norm (enables mirroring)")
    p.add_argument("--views", type=int, default=S,
                   help="also render this many template views from the view grid")
    p.add_argument("--elevation-range", type=_float_list, default=S,
                   help="pose sampling range 'lo,hi' (radians)")
    p.add_argument("--theta-range", type=_float_list, default=S,
                   help="pose sampling range 'lo,hi' (radians)")
    p.add_argument("--distance-range", type=_float_list, default=S,
                   help="pose sampling range 'lo,hi'")
    p.add_argument("--temperature", type=float, default=S, help="vMF temperature")
    p.add_argument("--momentum", type=float, default=S, help="feature update momentum")

    p = sub.add_parser("pseudo-gen", help="generate pseudo-correspondence files",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--manifest", default=S, help="corpus manifest (required)")
    p.add_argument("--views-manifest", default=S,
                   help="template-view manifest with poses (required)")
    p.add_argument("--mesh", default=S, help="template mesh file")
    p.add_argument("--checkpoint", default=S, help="checkpoint supplying the mesh")
    p.add_argument("--out-dir", default=S, help="directory for .corr files (required)")
    p.add_argument("--downweight", type=float, default=S,
                   help="score factor for vertices invisible from the voted view")
    p.add_argument("--weighted-votes", action="store_true", default=S,
                   help="weight orientation votes by match score")
    p.add_argument("--activation-threshold", type=float, default=S,
                   help="activation-mask threshold when an entry has no mask")

    p = sub.add_parser("train", help="train vertex features from pseudo-correspondences",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--manifest", default=S, help="corpus manifest (required)")
    p.add_argument("--views-manifest", default=S,
                   help="template-view manifest with poses (required)")
    p.add_argument("--mesh", default=S, help="template mesh file")
    p.add_argument("--checkpoint", default=S,
                   help="checkpoint supplying the template mesh")
    p.add_argument("--resume", default=S, help="checkpoint to continue from")
    p.add_argument("--out", default=S, help="output checkpoint path (required)")
    p.add_argument("--epochs", type=int, default=S, help="training epochs")
    p.add_argument("--seed", type=int, default=S,
                   help="RNG seed for feature init (required unless --resume)")
    p.add_argument("--downweight", type=float, default=S)
    p.add_argument("--weighted-votes", action="store_true", default=S)
    p.add_argument("--activation-threshold", type=float, default=S)
    p.add_argument("--temperature", type=float, default=S)
    p.add_argument("--momentum", type=float, default=S)

    p = sub.add_parser("infer", help="estimate poses by NLL minimization",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    _add_view_grid(p)
    _add_optim(p)
    p.add_argument("--manifest", default=S, help="corpus manifest (required)")
    p.add_argument("--checkpoint", default=S, help="neural mesh checkpoint (required)")
    p.add_argument("--out", default=S, help="pose estimates output file")
    p.add_argument("--mask-mode", choices=("external", "activation"), default=S,
                   help="use manifest masks or activation-map fallback")
    p.add_argument("--activation-threshold", type=float, default=S)

    p = sub.add_parser("eval", help="evaluate pose estimates and/or correspondences",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    p.add_argument("--manifest", default=S,
                   help="manifest with ground-truth poses (required)")
    p.add_argument("--pred", default=S, help="pose estimates file to score")
    p.add_argument("--corr-dir", default=S,
                   help="directory of .corr files for PCK evaluation")
    p.add_argument("--checkpoint", default=S,
                   help="checkpoint supplying the mesh for PCK projection")
    p.add_argument("--alpha", type=float, default=S, help="PCK threshold factor")
    p.add_argument("--stride", type=int, default=S,
                   help="feature-grid stride in image pixels")
    p.add_argument("--out", default=S, help="write the report here instead of stdout")

    p = sub.add_parser("sweep", help="corpus-size scaling sweep: train + evaluate",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(p)
    _add_view_grid(p)
    _add_optim(p)
    p.add_argument("--manifest", default=S, help="training corpus manifest (required)")
    p.add_argument("--eval-manifest", default=S,
                   help="fixed evaluation manifest with ground-truth poses (required)")
    p.add_argument("--views-manifest", default=S, help="template-view manifest (required)")
    p.add_argument("--mesh", default=S, help="template mesh file")
    p.add_argument("--checkpoint", default=S,
                   help="checkpoint supplying the template mesh")
    p.add_argument("--sizes", type=_int_list, default=S,
                   help="comma-separated corpus sizes")
    p.add_argument("--epochs", type=int, default=S)
    p.add_argument("--seed", type=int, default=S, help="RNG seed (required)")
    p.add_argument("--downweight", type=float, default=S)
    p.add_argument("--weighted-votes", action="store_true", default=S)
    p.add_argument("--activation-threshold", type=float, default=S)
    p.add_argument("--temperature", type=float, default=S)
    p.add_argument("--momentum", type=float, default=S)
    p.add_argument("--mask-mode", choices=("external", "activation"), default=S)
    p.add_argument("--out", default=S, help="write the table here instead of stdout")

    return parser


# ---------------------------------------------------------------------------
# Config merging
# ---------------------------------------------------------------------------


def _coerce(value: str, like):
    if isinstance(like, bool):
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"cannot parse boolean from {value!r}")
    if isinstance(like, int) and not isinstance(like, bool):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if isinstance(like, tuple):
        parts = value.split(",")
        if like and isinstance(like[0], int):
            return tuple(int(x) for x in parts)
        return tuple(float(x) for x in parts)
    return value


def _read_config_file(path, defaults: dict) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in defaults:
            raise UsageError(f"{path}:{lineno}: unknown option {key!r}")
        like = defaults[key]
        out[key] = _coerce(value, like) if like is not None else _coerce_untyped(value)
    return out


def _coerce_untyped(value: str):
    """Best-effort typing for options whose default is None."""
    if "," in value:
        try:
            return tuple(float(x) for x in value.split(","))
        except ValueError:
            return value
    for kind in (int, float):
        try:
            return kind(value)
        except ValueError:
            continue
    return value


class _Config(dict):
    def __getattr__(self, name):
        try:
            return self[name]
        except KeyError:
            raise AttributeError(name) from None


def _merge(command: str, args: argparse.Namespace) -> _Config:
    cfg = dict(DEFAULTS[command])
    cfg["verbose"] = False
    provided = dict(vars(args))
    if "config" in provided:
        cfg.update(_read_config_file(provided.pop("config"), cfg))
    provided.pop("command", None)
    cfg.update(provided)
    return _Config(cfg)


def _require(cfg: _Config, command: str, *names: str):
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"meshpose {command}: missing required option(s): {flags}")


def _camera(cfg: _Config) -> Camera:
    n = cfg.grid_size
    pp = cfg.principal if cfg.principal is not None else ((n - 1) / 2.0, (n - 1) / 2.0)
    return Camera(focal=cfg.focal, principal_point=tuple(pp), image_size=(n, n))


def _view_grid(cfg: _Config) -> PoseGrid:
    return PoseGrid(
        n_azimuths=cfg.view_azimuths,
        elevations=tuple(cfg.view_elevations),
        thetas=tuple(cfg.view_thetas),
        distances=tuple(cfg.view_distances),
    )


def _optim_options(cfg: _Config) -> OptimOptions:
    return OptimOptions(
        grid=_view_grid(cfg),
        step_angle=cfg.step_angle,
        step_distance=cfg.step_distance,
        max_iterations=cfg.max_iterations,
        tol=cfg.tol,
        patience=cfg.patience,
        candidates=cfg.candidates,
    )


def _load_mesh(cfg: _Config, command: str):
    if cfg.get("mesh"):
        return read_mesh(cfg.mesh)
    if cfg.get("checkpoint"):
        return read_checkpoint(cfg.checkpoint).mesh
    if cfg.get("resume"):
        return read_checkpoint(cfg.resume).mesh
    raise UsageError(f"meshpose {command}: need --mesh or a checkpoint for the template")


def _build_bank(cfg: _Config, mesh, camera: Camera) -> ViewBank:
    views = read_manifest(cfg.views_manifest)
    maps, poses = [], []
    for entry in views:
        if entry.pose is None:
            raise DataError(f"view {entry.image_id}: manifest entry has no pose")
        maps.append(featureio.read_feature_map(entry.feature_path))
        poses.append(entry.pose)
    return build_view_bank(mesh, maps, poses, camera)


def _entry_mask(entry, fmap, nm_or_none, mode: str, threshold: float):
    if mode == "external" and entry.mask_path is not None:
        return featureio.read_mask(entry.mask_path, fmap.height, fmap.width)
    if mode == "external":
        raise DataError(f"{entry.image_id}: no mask in manifest (mask-mode=external)")
    if nm_or_none is None:
        raise DataError("activation masks need a checkpoint")
    return featureio.activation_mask(
        fmap, nm_or_none.vertex_features, nm_or_none.background_feature, threshold
    )


def _emit(cfg: _Config, lines: list[str]):
    text = "\n".join(lines) + "\n"
    if cfg.get("out"):
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synth(cfg: _Config) -> int:
    _require(cfg, "synth", "out", "seed")
    camera = _camera(cfg)
    sc = synth.SynthConfig(
        n_images=cfg.n,
        seed=cfg.seed,
        channels=cfg.channels,
        subdivisions=cfg.subdiv,
        extents=tuple(cfg.extents),
        noise=cfg.noise,
        occlusion=cfg.occlusion,
        clutter=cfg.clutter,
        view_dependence=cfg.view_dep,
        mirror=synth.MirrorSpec(eps=cfg.mirror_eps) if cfg.mirror_eps is not None else None,
        elevation_range=tuple(cfg.elevation_range),
        theta_range=tuple(cfg.theta_range),
        distance_range=tuple(cfg.distance_range),
        temperature=cfg.temperature,
        momentum=cfg.momentum,
        views=cfg.views,
        view_grid=_view_grid(cfg),
    )
    manifest = synth.generate_corpus(cfg.out, sc, camera)
    logger.info("wrote %d images to %s", len(manifest), cfg.out)
    print(f"corpus {cfg.out} n {len(manifest)} seed {cfg.seed}")
    return 0


def _pseudo_one(args):
    entry_id, fpath, mpath, cfg, camera, bank, nm = args
    fmap = featureio.read_feature_map(fpath)
    if mpath is not None:
        mask = featureio.read_mask(mpath, fmap.height, fmap.width)
    else:
        if nm is None:
            raise DataError(f"{entry_id}: no mask and no checkpoint for activation fallback")
        mask = featureio.activation_mask(
            fmap, nm.vertex_features, nm.background_feature, cfg.activation_threshold
        )
    corr = generate(fmap, mask, bank, cfg.downweight, cfg.weighted_votes)
    return entry_id, corr


def cmd_pseudo_gen(cfg: _Config) -> int:
    _require(cfg, "pseudo-gen", "manifest", "views_manifest", "out_dir")
    camera = _camera(cfg)
    mesh = _load_mesh(cfg, "pseudo-gen")
    nm = read_checkpoint(cfg.checkpoint) if cfg.get("checkpoint") else None
    bank = _build_bank(cfg, mesh, camera)
    manifest = read_manifest(cfg.manifest)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = [(e.image_id, e.feature_path, e.mask_path, cfg, camera, bank, nm)
             for e in manifest]
    results = _map_tasks(_pseudo_one, tasks, cfg.jobs)
    lines = []
    for (entry_id, corr) in results:
        write_correspondences(corr, out_dir / f"{entry_id}.corr")
        lines.append(f"{entry_id} pose_label {corr.pose_label} matches {len(corr)} "
                     f"mean_score {float(np.mean(corr.scores)):.4f}")
    sys.stdout.write("\n".join(lines) + "\n")
    logger.info("wrote %d correspondence files to %s", len(results), out_dir)
    return 0


def cmd_train(cfg: _Config) -> int:
    _require(cfg, "train", "manifest", "views_manifest", "out")
    if cfg.get("resume") is None:
        _require(cfg, "train", "seed")
    camera = _camera(cfg)
    mesh = _load_mesh(cfg, "train")
    bank = _build_bank(cfg, mesh, camera)
    if cfg.get("resume"):
        nm = read_checkpoint(cfg.resume)
    else:
        rng = np.random.default_rng(cfg.seed)
        nm = NeuralMesh.init_random(mesh, bank.channels, rng,
                                    cfg.temperature, cfg.momentum)
    manifest = read_manifest(cfg.manifest)
    tc = rendercompare.TrainConfig(
        downweight=cfg.downweight,
        weighted_votes=cfg.weighted_votes,
        activation_threshold=cfg.activation_threshold,
    )
    nm, trace, skipped = train(nm, manifest, bank, cfg.epochs, tc)
    write_checkpoint(nm, cfg.out)
    if skipped:
        logger.warning("skipped %d corpus entries", skipped)
    print("\n".join(f"epoch {i} loss {loss!r}" for i, loss in enumerate(trace)))
    logger.info("checkpoint written to %s", cfg.out)
    return 0


def _infer_one(args):
    entry, cfg, camera, nm, opts = args
    fmap = featureio.read_feature_map(entry.feature_path)
    mask = _entry_mask(entry, fmap, nm, cfg.mask_mode, cfg.activation_threshold)
    est = optimize_pose(fmap, nm, camera, mask, opts)
    return entry.image_id, est


def _run_inference(manifest, cfg: _Config, camera, nm, opts):
    tasks = [(e, cfg, camera, nm, opts) for e in manifest]
    return _map_tasks(_infer_one, tasks, cfg.jobs)


def cmd_infer(cfg: _Config) -> int:
    _require(cfg, "infer", "manifest", "checkpoint")
    camera = _camera(cfg)
    nm = read_checkpoint(cfg.checkpoint)
    manifest = read_manifest(cfg.manifest)
    opts = _optim_options(cfg)
    results = _run_inference(manifest, cfg, camera, nm, opts)
    estimates = [est for _, est in results]
    if cfg.get("out"):
        write_pose_estimates(estimates, cfg.out)
        logger.info("estimates written to %s", cfg.out)
    lines = []
    for image_id, est in results:
        p = est.pose
        lines.append(f"{image_id} {p.azimuth!r} {p.elevation!r} {p.theta!r} "
                     f"{p.distance!r} {est.final_nll!r} {int(est.converged)}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def _pose_errors(estimates, manifest) -> np.ndarray:
    if len(estimates) != len(manifest):
        raise DataError(
            f"{len(estimates)} predictions vs {len(manifest)} manifest entries"
        )
    errors = []
    for est, entry in zip(estimates, manifest):
        if entry.pose is None:
            raise DataError(f"{entry.image_id}: manifest entry has no ground-truth pose")
        errors.append(geodesic_distance(est.pose.rotation(), entry.pose.rotation()))
    return np.array(errors)


def cmd_eval(cfg: _Config) -> int:
    _require(cfg, "eval", "manifest")
    if cfg.get("pred") is None and cfg.get("corr_dir") is None:
        raise UsageError("meshpose eval: need --pred and/or --corr-dir")
    manifest = read_manifest(cfg.manifest)
    lines = []
    if cfg.get("pred"):
        estimates = rendercompare.read_pose_estimates(cfg.pred)
        report = metrics.pose_eval(_pose_errors(estimates, manifest))
        lines += metrics.pose_report_lines(report)
        print(metrics.pose_report_table(report), file=sys.stderr)
    if cfg.get("corr_dir"):
        _require(cfg, "eval", "checkpoint")
        report = _eval_pck(cfg, manifest)
        lines += metrics.pck_report_lines(report)
        print(metrics.pck_report_table(report), file=sys.stderr)
    _emit(cfg, lines)
    return 0


def _eval_pck(cfg: _Config, manifest) -> metrics.PckReport:
    from .correspondence import read_correspondences

    camera = _camera(cfg)
    nm = read_checkpoint(cfg.checkpoint)
    stride = cfg.stride
    shift = (stride - 1) / 2.0  # grid cell k covers image pixels [k*s, k*s + s)
    correct = 0
    total = 0
    for entry in manifest:
        if entry.pose is None:
            raise DataError(f"{entry.image_id}: manifest entry has no ground-truth pose")
        corr = read_correspondences(Path(cfg.corr_dir) / f"{entry.image_id}.corr")
        rec = rasterize_visibility(nm.mesh, entry.pose, camera)
        fp = np.argwhere(rec.pixel_vertex >= 0)
        if fp.size == 0:
            raise DataError(f"{entry.image_id}: empty footprint at the ground-truth pose")
        bbox_h = (fp[:, 0].max() - fp[:, 0].min() + 1) * stride
        bbox_w = (fp[:, 1].max() - fp[:, 1].min() + 1) * stride
        pred = corr.pixels[:, ::-1].astype(np.float64) * stride + shift  # (x, y)
        gt = rec.projected[corr.vertices] * stride + shift
        r = metrics.pck(pred, gt, (bbox_h, bbox_w), cfg.alpha)
        correct += r.correct
        total += r.total
    return metrics.pck_from_counts(correct, total, cfg.alpha)


def cmd_sweep(cfg: _Config) -> int:
    _require(cfg, "sweep", "manifest", "eval_manifest", "views_manifest", "seed")
    camera = _camera(cfg)
    mesh = _load_mesh(cfg, "sweep")
    bank = _build_bank(cfg, mesh, camera)
    corpus = read_manifest(cfg.manifest)
    eval_manifest = read_manifest(cfg.eval_manifest)
    opts = _optim_options(cfg)
    tc = rendercompare.TrainConfig(
        downweight=cfg.downweight,
        weighted_votes=cfg.weighted_votes,
        activation_threshold=cfg.activation_threshold,
    )
    lines = ["# size acc_pi_6 acc_pi_18 median_error"]
    for size in cfg.sizes:
        if size > len(corpus):
            raise DataError(f"sweep size {size} exceeds corpus size {len(corpus)}")
        subset = featureio.CorpusManifest(corpus.entries[:size])
        rng = np.random.default_rng(cfg.seed)
        nm = NeuralMesh.init_random(mesh, bank.channels, rng,
                                    cfg.temperature, cfg.momentum)
        nm, trace, _ = train(nm, subset, bank, cfg.epochs, tc)
        logger.info("size %d: final training loss %.4f", size, trace[-1])
        results = _run_inference(eval_manifest, cfg, camera, nm, opts)
        report = metrics.pose_eval(
            _pose_errors([est for _, est in results], eval_manifest)
        )
        logger.info("size %d: acc@pi/6 %.3f acc@pi/18 %.3f", size,
                    report.acc_pi_6, report.acc_pi_18)
        lines.append(f"{size} {report.acc_pi_6!r} {report.acc_pi_18!r} "
                     f"{report.median_error!r}")
    _emit(cfg, lines)
    return 0


# ---------------------------------------------------------------------------


def _map_tasks(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))  # map preserves manifest order


_COMMANDS = {
    "synth": cmd_synth,
    "pseudo-gen": cmd_pseudo_gen,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            parser.print_usage(sys.stderr)
            return 1
        cfg = _merge(args.command, args)
        logging.basicConfig(
            stream=sys.stderr,
            level=logging.DEBUG if cfg.get("verbose") else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return _COMMANDS[args.command](cfg)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except (MeshposeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
