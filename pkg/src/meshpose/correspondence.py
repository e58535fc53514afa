"""Pseudo-correspondence generation between image feature maps and a template
mesh, in two stages: local matches vote a global orientation, then matches to
vertices invisible from the voted orientation are downweighted and the
matching is re-run.

The view bank stores, for every (vertex, view) pair where the vertex is
visible, the feature sampled from that view's rendered feature map at the
vertex's nearest grid cell. A vertex's matching score against a pixel is the
max cosine similarity over that vertex's per-view features; invisible views
contribute nothing. All tie-breaks pick the lowest index so runs are
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError, FormatError, ValidationError
from .featureio import FeatureMap, ForegroundMask
from .geometry import Camera, Mesh, Pose, VisibilityRecord, rasterize_visibility

DEFAULT_DOWNWEIGHT = 0.25


@dataclass
class ViewBank:
    """Per-vertex features collected from template renderings at known poses."""

    poses: list[Pose]
    visibility: list[VisibilityRecord]
    features: np.ndarray  # (E, C) float32, unit rows, sorted by (vertex, view)
    entry_vertex: np.ndarray  # (E,) int32
    entry_view: np.ndarray  # (E,) int32
    n_vertices: int
    channels: int
    skipped_zero_cells: int = 0
    # present_vertices[k] is the vertex id of score column k; vertex_slices
    # brackets each present vertex's entry range
    present_vertices: np.ndarray = field(init=False)
    vertex_slices: np.ndarray = field(init=False)

    def __post_init__(self):
        self.present_vertices, starts = np.unique(self.entry_vertex, return_index=True)
        self.vertex_slices = np.append(starts, len(self.entry_vertex))

    @property
    def n_views(self) -> int:
        return len(self.poses)


@dataclass
class CorrespondenceSet:
    """Pixel-to-vertex matches for one image.

    pixels are (row, col) grid cells; scores are cosine similarities in
    [-1, 1] (downweighted after refinement); views index the bank.
    """

    pixels: np.ndarray  # (M, 2) int32 (row, col)
    vertices: np.ndarray  # (M,) int32
    scores: np.ndarray  # (M,) float32
    views: np.ndarray  # (M,) int32
    pose_label: Optional[int] = None
    refined: bool = False
    # full per-(pixel, present-vertex) score/view matrices, kept in memory so
    # refinement can re-run the argmax; dropped on export
    vertex_scores: Optional[np.ndarray] = None
    vertex_views: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.vertices)


def build_view_bank(mesh: Mesh, view_maps: list[FeatureMap], view_poses: list[Pose],
                    camera: Camera) -> ViewBank:
    """Rasterize each view, then sample its feature map at every visible
    vertex's nearest cell. Zero (padding) cells are skipped and counted."""
    if len(view_maps) != len(view_poses):
        raise ValidationError(
            f"{len(view_maps)} feature maps for {len(view_poses)} poses"
        )
    if not view_maps:
        raise ValidationError("view bank needs at least one view")
    channels = view_maps[0].channels
    h, w = camera.image_size
    feats, everts, eviews, visrecs = [], [], [], []
    skipped = 0
    for k, (fmap, pose) in enumerate(zip(view_maps, view_poses)):
        if fmap.channels != channels:
            raise ValidationError(
                f"view {k}: channel dim {fmap.channels} != {channels}"
            )
        if (fmap.height, fmap.width) != (h, w):
            raise ValidationError(
                f"view {k}: map is {fmap.height}x{fmap.width}, camera grid is {h}x{w}"
            )
        rec = rasterize_visibility(mesh, pose, camera)
        visrecs.append(rec)
        rows, cols = rec.cells()
        vis = np.flatnonzero(rec.visible)
        if vis.size == 0:
            raise DataError(f"view {k}: no visible vertices")
        cell_feats = fmap.data[rows[vis], cols[vis]]
        nonzero = np.abs(cell_feats).max(axis=1) > 0
        skipped += int((~nonzero).sum())
        vis = vis[nonzero]
        if vis.size == 0:
            raise DataError(f"view {k}: all visible vertices sample empty cells")
        feats.append(cell_feats[nonzero])
        everts.append(vis)
        eviews.append(np.full(vis.size, k))

    features = np.concatenate(feats).astype(np.float32)
    entry_vertex = np.concatenate(everts).astype(np.int32)
    entry_view = np.concatenate(eviews).astype(np.int32)
    order = np.lexsort((entry_view, entry_vertex))
    return ViewBank(
        poses=list(view_poses),
        visibility=visrecs,
        features=features[order],
        entry_vertex=entry_vertex[order],
        entry_view=entry_view[order],
        n_vertices=mesh.n_vertices,
        channels=channels,
        skipped_zero_cells=skipped,
    )


def match_raw(image: FeatureMap, mask: ForegroundMask, bank: ViewBank) -> CorrespondenceSet:
    """Match every foreground pixel to its best bank vertex (max over views)."""
    if image.channels != bank.channels:
        raise ValidationError(
            f"image has {image.channels} channels, bank has {bank.channels}"
        )
    if (mask.height, mask.width) != (image.height, image.width):
        raise ValidationError(
            f"mask {mask.height}x{mask.width} does not match image "
            f"{image.height}x{image.width}"
        )
    fg = np.argwhere(mask.bits)  # (P, 2) row-major, deterministic order
    if fg.size == 0:
        raise DataError("empty foreground: nothing to match")

    pix_feats = image.data[fg[:, 0], fg[:, 1]]
    sims = np.clip(pix_feats @ bank.features.T, -1.0, 1.0)  # (P, E)

    # per-(pixel, vertex) max over that vertex's views, plus the achieving
    # view (first max => lowest view index, entries are view-sorted)
    starts = bank.vertex_slices[:-1]
    vmax = np.maximum.reduceat(sims, starts, axis=1)  # (P, K)
    ventry = np.empty_like(vmax, dtype=np.int32)
    for k in range(len(starts)):
        s, e = bank.vertex_slices[k], bank.vertex_slices[k + 1]
        ventry[:, k] = s + np.argmax(sims[:, s:e], axis=1)
    vviews = bank.entry_view[ventry]

    best_col = np.argmax(vmax, axis=1)  # first max => lowest vertex id
    rows = np.arange(len(fg))
    return CorrespondenceSet(
        pixels=fg.astype(np.int32),
        vertices=bank.present_vertices[best_col].astype(np.int32),
        scores=vmax[rows, best_col].astype(np.float32),
        views=vviews[rows, best_col].astype(np.int32),
        vertex_scores=vmax,
        vertex_views=vviews,
    )


def vote_pose(corr: CorrespondenceSet, bank: ViewBank, weighted: bool = False) -> int:
    """Mode of the matches' best-view indices. Ties fall back to summed match
    scores, then to the lowest view index. With ``weighted=True`` the summed
    scores are the primary criterion instead."""
    if len(corr) == 0:
        raise DataError("cannot vote on an empty correspondence set")
    counts = np.bincount(corr.views, minlength=bank.n_views).astype(np.float64)
    sums = np.bincount(corr.views, weights=corr.scores.astype(np.float64),
                       minlength=bank.n_views)
    primary, secondary = (sums, counts) if weighted else (counts, sums)
    best = np.flatnonzero(primary == primary.max())
    if len(best) > 1:
        best = best[secondary[best] == secondary[best].max()]
    return int(best[0])


def refine(corr: CorrespondenceSet, pose_label: int, bank: ViewBank,
           downweight: float = DEFAULT_DOWNWEIGHT) -> CorrespondenceSet:
    """Re-run the per-pixel argmax after scaling positive scores of vertices
    invisible from the voted view by ``downweight``. Negative scores are left
    alone: shrinking them toward zero would raise them instead of penalizing.
    """
    if not (0 <= pose_label < bank.n_views):
        raise ValidationError(f"pose label {pose_label} outside 0..{bank.n_views - 1}")
    if not (0.0 <= downweight <= 1.0):
        raise ValidationError(f"downweight must be in [0, 1], got {downweight}")
    if corr.vertex_scores is None:
        raise ValidationError("refine needs the in-memory match result from match_raw")

    invisible = ~bank.visibility[pose_label].visible[bank.present_vertices]
    scores = corr.vertex_scores.copy()
    weights = np.where(invisible[None, :] & (scores > 0.0), downweight, 1.0)
    scores *= weights

    best_col = np.argmax(scores, axis=1)
    rows = np.arange(scores.shape[0])
    return CorrespondenceSet(
        pixels=corr.pixels,
        vertices=bank.present_vertices[best_col].astype(np.int32),
        scores=scores[rows, best_col].astype(np.float32),
        views=corr.vertex_views[rows, best_col].astype(np.int32),
        pose_label=pose_label,
        refined=True,
        vertex_scores=corr.vertex_scores,
        vertex_views=corr.vertex_views,
    )


def generate(image: FeatureMap, mask: ForegroundMask, bank: ViewBank,
             downweight: float = DEFAULT_DOWNWEIGHT, weighted_votes: bool = False
             ) -> CorrespondenceSet:
    """Full two-stage pipeline: raw matching, orientation vote, refinement."""
    raw = match_raw(image, mask, bank)
    label = vote_pose(raw, bank, weighted=weighted_votes)
    return refine(raw, label, bank, downweight)


# ---------------------------------------------------------------------------
# Export format: 'pose_label <k>' header, then 'row col vertex score view'
# ---------------------------------------------------------------------------


def write_correspondences(corr: CorrespondenceSet, path) -> None:
    if corr.pose_label is None:
        raise ValidationError("cannot export a correspondence set without a pose label")
    lines = [f"pose_label {corr.pose_label}"]
    for (r, c), v, s, u in zip(corr.pixels, corr.vertices, corr.scores, corr.views):
        lines.append(f"{r} {c} {v} {np.format_float_positional(np.float32(s), unique=True, trim='0')} {u}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_correspondences(path) -> CorrespondenceSet:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("pose_label "):
        raise FormatError(f"{path}: missing 'pose_label' header line")
    try:
        label = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise FormatError(f"{path}: malformed header {lines[0]!r}") from None
    pixels, verts, scores, views = [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 5:
            raise FormatError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
        try:
            pixels.append((int(parts[0]), int(parts[1])))
            verts.append(int(parts[2]))
            scores.append(np.float32(parts[3]))
            views.append(int(parts[4]))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: malformed match line") from None
    return CorrespondenceSet(
        pixels=np.array(pixels, dtype=np.int32).reshape(-1, 2),
        vertices=np.array(verts, dtype=np.int32),
        scores=np.array(scores, dtype=np.float32),
        views=np.array(views, dtype=np.int32),
        pose_label=label,
        refined=True,
    )
