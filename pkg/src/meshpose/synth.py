"""Synthetic feature-map corpora for desk-scale experiments.

A scene generator owns ground-truth unit features per template vertex plus a
background feature. Rendered cell features can vary smoothly with the viewing
direction (each vertex carries a random linear field over the view sphere),
mimicking how real foundation features change with viewpoint; the static
per-vertex component is what a neural mesh can learn.

Optional corruptions:
  - per-cell Gaussian noise, renormalized
  - occlusion: an exact-count subset of object cells replaced by
    background-plus-noise; the written mask excludes them (external masks see
    the visible object only)
  - clutter: a fraction of background cells replaced by features of random
    vertices (object-like distractors); the written mask is unaffected, but
    activation masks will pick the distractors up
  - mirror pairing: feature vectors of vertices mirrored across the template's
    width axis are equal up to a perturbation of norm ``mirror_eps``, with
    independent view-dependence fields, reproducing left/right ambiguity
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ValidationError
from .featureio import (
    CorpusManifest,
    FeatureMap,
    ForegroundMask,
    ManifestEntry,
    write_feature_map,
    write_manifest,
    write_mask,
)
from .geometry import Camera, Mesh, Pose, cuboid, mirror_pairs, pose_to_rotation, rasterize_visibility
from .rendercompare import NeuralMesh, PoseGrid, write_checkpoint

DEFAULT_CAMERA = Camera(focal=50.0, principal_point=(15.5, 15.5), image_size=(32, 32))


@dataclass(frozen=True)
class MirrorSpec:
    """Mirror-symmetric appearance across one template axis.

    Vertices paired across the plane axis = 0 share features up to a
    perturbation of norm ``eps``; their view-dependence fields are mirror
    images of each other, so the two sides look alike from mirrored
    viewpoints. Pairs touching a face perpendicular to one of
    ``exclude_face_axes`` stay independent: those faces are shared by both
    twins, which would make a twin pair visible together and the ambiguity
    unresolvable by any orientation estimate. ``observed_blend`` controls how
    ambiguous object images are: each correlated vertex's observed feature is
    blended that far toward its twin's template, so at 0.5 local appearance
    carries no side information at all and only global context can decide.
    """

    eps: float = 0.05
    axis: int = 2
    exclude_face_axes: tuple = (0, 1)
    observed_blend: float = 0.5


@dataclass
class SceneGenerator:
    """Ground-truth generative model of feature maps over a template mesh.

    ``features`` are the per-vertex template features (what renders of the
    template look like, and what a neural mesh can learn); ``observed``
    are the features real object images show (identical unless a mirror spec
    makes paired sides ambiguous). ``view_fields`` add a smooth per-vertex
    appearance drift with viewing direction.
    """

    mesh: Mesh
    features: np.ndarray  # (N, C) float32 unit rows (template appearance)
    observed: np.ndarray  # (N, C) float32 unit rows (image appearance)
    background: np.ndarray  # (C,) float32 unit
    view_fields: np.ndarray  # (N, C, 3) float64, direction -> feature offset
    view_dependence: float = 0.0
    mirror: Optional[MirrorSpec] = None
    mirror_map: Optional[np.ndarray] = None  # (N,) partner index
    correlated: Optional[np.ndarray] = None  # (N,) bool, pair is feature-tied

    @property
    def channels(self) -> int:
        return self.features.shape[1]

    @classmethod
    def create(cls, mesh: Mesh, channels: int, rng: np.random.Generator,
               view_dependence: float = 0.0,
               mirror: Optional[MirrorSpec] = None) -> "SceneGenerator":
        n = mesh.n_vertices
        feats = rng.standard_normal((n + 1, channels))
        feats /= np.linalg.norm(feats, axis=1, keepdims=True)
        fields = rng.standard_normal((n, channels, 3)) / math.sqrt(channels)
        observed = feats[:-1].copy()
        pairs = None
        correlated = None
        if mirror is not None:
            pairs = mirror_pairs(mesh, mirror.axis)
            correlated = pairs != np.arange(n)
            for a in mirror.exclude_face_axes:
                half = np.abs(mesh.vertices[:, a]).max()
                off_face = np.abs(mesh.vertices[:, a]) < half * (1 - 1e-9)
                correlated &= off_face
            reflect = np.ones(3)
            reflect[mirror.axis] = -1.0
            for i in range(n):
                j = pairs[i]
                if j < i and correlated[i]:
                    d = rng.standard_normal(channels)
                    d *= mirror.eps / np.linalg.norm(d)
                    f = feats[j] + d
                    feats[i] = f / np.linalg.norm(f)
                    # mirrored appearance drift: same field under the
                    # reflected viewing direction
                    fields[i] = fields[j] * reflect[None, :]
                    lam = mirror.observed_blend
                    if lam > 0.0:
                        oi = (1 - lam) * feats[i] + lam * feats[j]
                        oj = (1 - lam) * feats[j] + lam * feats[i]
                        observed[i] = oi / np.linalg.norm(oi)
                        observed[j] = oj / np.linalg.norm(oj)
        return cls(
            mesh=mesh,
            features=feats[:-1].astype(np.float32),
            observed=observed.astype(np.float32),
            background=feats[-1].astype(np.float32),
            view_fields=fields,
            view_dependence=float(view_dependence),
            mirror=mirror,
            mirror_map=pairs,
            correlated=correlated,
        )

    def view_direction(self, pose: Pose) -> np.ndarray:
        """Unit vector from the object center toward the camera, object frame."""
        R = pose_to_rotation(pose)
        c = -R.T @ np.array([0.0, 0.0, pose.distance])
        return c / np.linalg.norm(c)

    def features_for_pose(self, pose: Pose, appearance: str = "observed") -> np.ndarray:
        """Per-vertex unit features as seen from ``pose`` (float64, (N, C)).

        ``appearance='template'`` gives what renders of the template show
        (used for view banks); ``'observed'`` gives what object images show.
        """
        if appearance == "template":
            base = self.features.astype(np.float64)
        elif appearance == "observed":
            base = self.observed.astype(np.float64)
        else:
            raise ValidationError(f"unknown appearance {appearance!r}")
        if self.view_dependence > 0.0:
            d = self.view_direction(pose)
            base = base + self.view_dependence * (self.view_fields @ d)
            base /= np.linalg.norm(base, axis=1, keepdims=True)
        return base

    def neural_mesh(self, temperature: float = 0.07, momentum: float = 0.9) -> NeuralMesh:
        """The static ground-truth features as a neural mesh checkpoint."""
        return NeuralMesh(self.mesh, self.features.copy(), self.background.copy(),
                          temperature, momentum)


@dataclass
class RenderResult:
    fmap: FeatureMap
    mask: ForegroundMask  # visible object cells (occluded cells excluded)
    pixel_vertex: np.ndarray  # (H, W) generating vertex per object cell, -1 else
    occluded: int
    cluttered: int


def render_feature_map(gen: SceneGenerator, pose: Pose, camera: Camera,
                       rng: np.random.Generator, noise: float = 0.0,
                       occlusion: float = 0.0, clutter: float = 0.0,
                       appearance: str = "observed") -> RenderResult:
    """Render one feature map plus its external-style mask.

    Every covered cell takes the feature of its nearest visible vertex;
    uncovered cells take the background feature. Exactly
    floor(occlusion * |FG|) object cells are occluded.
    """
    if not (0.0 <= occlusion <= 1.0 and 0.0 <= clutter <= 1.0):
        raise ValidationError("occlusion and clutter fractions must be in [0, 1]")
    h, w = camera.image_size
    rec = rasterize_visibility(gen.mesh, pose, camera)
    pv = rec.pixel_vertex.copy()
    covered = pv >= 0
    feats = gen.features_for_pose(pose, appearance)
    bg = gen.background.astype(np.float64)

    data = np.empty((h, w, gen.channels))
    data[:] = bg
    data[covered] = feats[pv[covered]]

    fg_bits = covered.copy()
    flat_cov = np.flatnonzero(covered.ravel())
    n_occ = int(math.floor(occlusion * flat_cov.size))
    if n_occ > 0:
        occ = rng.choice(flat_cov, size=n_occ, replace=False)
        dflat = data.reshape(-1, gen.channels)
        dflat[occ] = bg
        fg_bits.ravel()[occ] = False

    flat_bg = np.flatnonzero(~covered.ravel())
    n_clu = int(math.floor(clutter * flat_bg.size))
    if n_clu > 0:
        clu = rng.choice(flat_bg, size=n_clu, replace=False)
        which = rng.integers(0, gen.mesh.n_vertices, size=n_clu)
        data.reshape(-1, gen.channels)[clu] = gen.features.astype(np.float64)[which]

    if noise > 0.0:
        data += noise * rng.standard_normal(data.shape)
    data /= np.maximum(np.linalg.norm(data, axis=2, keepdims=True), 1e-12)

    return RenderResult(
        fmap=FeatureMap(data.astype(np.float32)),
        mask=ForegroundMask(fg_bits),
        pixel_vertex=pv,
        occluded=n_occ,
        cluttered=n_clu,
    )


def paint_vertex_map(gen: SceneGenerator, pose: Pose, camera: Camera,
                     rng: Optional[np.random.Generator] = None, noise: float = 0.0,
                     appearance: str = "observed"
                     ) -> tuple[FeatureMap, ForegroundMask, np.ndarray]:
    """Sparse exact-oracle rendering: each visible vertex paints its feature
    into its nearest cell; cells claimed by more than one vertex are dropped
    from the mask so every foreground cell has a unique generating vertex.

    Returns (map, mask, (H, W) generating-vertex grid with -1 elsewhere).
    """
    h, w = camera.image_size
    rec = rasterize_visibility(gen.mesh, pose, camera)
    rows, cols = rec.cells()
    feats = gen.features_for_pose(pose, appearance)
    data = np.zeros((h, w, gen.channels))
    owner = np.full((h, w), -1, dtype=np.int64)
    claims = np.zeros((h, w), dtype=np.int64)
    for v in np.flatnonzero(rec.visible):
        r, c = rows[v], cols[v]
        if 0 <= r < h and 0 <= c < w:
            claims[r, c] += 1
            if owner[r, c] < 0:
                owner[r, c] = v
                data[r, c] = feats[v]
    unique = claims == 1
    owner[~unique] = -1
    data[~unique] = 0.0
    if noise > 0.0:
        if rng is None:
            raise ValidationError("noise > 0 requires an rng")
        sel = unique
        data[sel] += noise * rng.standard_normal(data[sel].shape)
        data[sel] /= np.linalg.norm(data[sel], axis=-1, keepdims=True)
    return FeatureMap(data.astype(np.float32)), ForegroundMask(unique), owner


@dataclass(frozen=True)
class SynthConfig:
    n_images: int = 20
    seed: int = 0
    channels: int = 64
    subdivisions: int = 9
    extents: tuple = (1.6, 0.6, 0.9)
    noise: float = 0.1
    occlusion: float = 0.0
    clutter: float = 0.0
    view_dependence: float = 0.0
    mirror: Optional[MirrorSpec] = None
    elevation_range: tuple = (-math.pi / 6, math.pi / 6)
    theta_range: tuple = (-math.pi / 18, math.pi / 18)
    distance_range: tuple = (4.5, 5.5)
    temperature: float = 0.07
    momentum: float = 0.9
    views: int = 0  # template view renderings (0 = skip); uses the view grid
    view_grid: PoseGrid = PoseGrid()


def sample_pose(cfg: SynthConfig, rng: np.random.Generator) -> Pose:
    return Pose(
        azimuth=rng.uniform(0.0, 2.0 * math.pi),
        elevation=rng.uniform(*cfg.elevation_range),
        theta=rng.uniform(*cfg.theta_range),
        distance=rng.uniform(*cfg.distance_range),
    )


def generate_corpus(out_dir, cfg: SynthConfig, camera: Camera = DEFAULT_CAMERA
                    ) -> CorpusManifest:
    """Write a seeded synthetic corpus: feature maps, masks, a manifest with
    ground-truth poses, the generating checkpoint, and optionally rendered
    template views with their own manifest. Byte-identical for equal seeds."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    mesh = cuboid(cfg.extents, cfg.subdivisions)
    gen = SceneGenerator.create(mesh, cfg.channels, rng,
                                view_dependence=cfg.view_dependence,
                                mirror=cfg.mirror)
    write_checkpoint(gen.neural_mesh(cfg.temperature, cfg.momentum), out / "gt.nmsh")

    entries = []
    for i in range(cfg.n_images):
        pose = sample_pose(cfg, rng)
        res = render_feature_map(gen, pose, camera, rng, cfg.noise,
                                 cfg.occlusion, cfg.clutter)
        fname, mname = f"{i:04d}.fmap", f"{i:04d}.msk"
        write_feature_map(res.fmap, out / fname)
        write_mask(res.mask, out / mname)
        entries.append(ManifestEntry(f"{i:04d}", out / fname, out / mname, pose))
    manifest = CorpusManifest(entries)
    write_manifest(manifest, out / "manifest.tsv")

    if cfg.views > 0:
        vdir = out / "views"
        vdir.mkdir(exist_ok=True)
        poses = cfg.view_grid.poses()[: cfg.views] if cfg.views < len(
            cfg.view_grid.poses()) else cfg.view_grid.poses()
        ventries = []
        for i, pose in enumerate(poses):
            res = render_feature_map(gen, pose, camera, rng, cfg.noise,
                                     appearance="template")
            fname = f"view{i:04d}.fmap"
            write_feature_map(res.fmap, vdir / fname)
            ventries.append(ManifestEntry(f"view{i:04d}", vdir / fname, None, pose))
        write_manifest(CorpusManifest(ventries), out / "views_manifest.tsv")
    return manifest
