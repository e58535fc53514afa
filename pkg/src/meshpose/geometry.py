"""Template meshes, viewpoint math, projection and z-buffer visibility.

COORDINATE CONVENTIONS
======================
Object frame (right-handed):
  - The template sits at the origin. +y is the object's up axis; +x runs
    along its length, +z across its width.

Viewpoint parametrization:
  - azimuth   rotates about the object's up axis (+y),   range [0, 2*pi)
  - elevation tilts the camera about the x axis,          range [-pi/2, pi/2]
  - theta     rolls about the optical axis (z),           range [-pi, pi)
  - distance  camera-to-object-center, object units, > 0

Extrinsics:
  X_cam = R @ X_obj + (0, 0, distance)   with
  R = Rz(theta) @ Rx(elevation) @ Ry(azimuth)

  At the identity pose the camera sits at object coordinates
  (0, 0, -distance) with its optical axis pointing at the object.

Camera frame (computer-vision style):
  - x right, y down in the image, +z forward: points in front of the camera
    have positive depth z.
  - pixel column = px + focal * x/z, pixel row = py + focal * y/z.
  - Integer pixel coordinates are cell centers; cell (r, c) covers the
    half-open square [r-0.5, r+0.5) x [c-0.5, c+0.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DegenerateProjectionError, FormatError, ValidationError

TWO_PI = 2.0 * math.pi

# Faces whose 3D area falls below this are treated as degenerate and skipped
# by the rasterizer (meshes from decimation tools contain them).
DEGENERATE_FACE_AREA = 1e-12

# Visibility depth tolerance, as a fraction of the bounding-sphere radius.
# Avoids z-fighting at shared edges.
DEPTH_TOL_SCALE = 1e-4


# ---------------------------------------------------------------------------
# Core types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pose:
    """Viewpoint of the camera relative to the object (see module docstring)."""

    azimuth: float
    elevation: float
    theta: float
    distance: float

    def __post_init__(self):
        for name in ("azimuth", "elevation", "theta", "distance"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not math.isfinite(v):
                raise ValidationError(f"pose.{name} must be finite, got {v!r}")
        if self.distance <= 0:
            raise ValidationError(f"pose.distance must be > 0, got {self.distance}")

    def rotation(self) -> np.ndarray:
        return pose_to_rotation(self)

    def canonical(self) -> "Pose":
        return canonicalize_pose(self)

    def almost_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        a, b = self.canonical(), other.canonical()
        da = min(abs(a.azimuth - b.azimuth), TWO_PI - abs(a.azimuth - b.azimuth))
        return (
            da < tol
            and abs(a.elevation - b.elevation) < tol
            and abs(a.theta - b.theta) < tol
            and abs(a.distance - b.distance) < tol
        )


@dataclass(frozen=True)
class Camera:
    """Pinhole intrinsics over a pixel (or feature-cell) grid."""

    focal: float
    principal_point: tuple[float, float]  # (px, py) = (column, row)
    image_size: tuple[int, int]  # (H, W)

    def __post_init__(self):
        if self.focal <= 0:
            raise ValidationError(f"camera.focal must be > 0, got {self.focal}")
        h, w = self.image_size
        if h <= 0 or w <= 0:
            raise ValidationError(f"camera.image_size must be positive, got {self.image_size}")
        px, py = self.principal_point
        if not (0 <= px <= w and 0 <= py <= h):
            raise ValidationError(
                f"principal point {self.principal_point} outside image extent {self.image_size}"
            )


class Mesh:
    """Triangle mesh: vertices (N, 3) float64 and faces (F, 3) int vertex triples.

    The edge set is derived: the union of face edges, deduplicated, as
    unordered index pairs.
    """

    def __init__(self, vertices, faces):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValidationError(f"vertices must be (N, 3), got {self.vertices.shape}")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValidationError(f"faces must be (F, 3), got {self.faces.shape}")
        if len(self.vertices) < 4 or len(self.faces) < 1:
            raise ValidationError(
                f"mesh must have >= 4 vertices and >= 1 face, got "
                f"{len(self.vertices)} / {len(self.faces)}"
            )
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise ValidationError("face indices out of range")
        if not np.isfinite(self.vertices).all():
            raise ValidationError("vertex coordinates must be finite")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def edges(self) -> np.ndarray:
        """Deduplicated unordered edge pairs, sorted lexicographically."""
        e = np.concatenate(
            [self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]]
        )
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    @property
    def bounding_radius(self) -> float:
        """Radius of the bounding sphere centered at the vertex centroid."""
        center = self.vertices.mean(axis=0)
        return float(np.linalg.norm(self.vertices - center, axis=1).max())


@dataclass
class VisibilityRecord:
    """Projection of every vertex plus, after rasterization, visibility and
    the rendered footprint.

    projected     (N, 2) float64, (x=column, y=row) continuous pixel coords
    depth         (N,) camera-frame depth
    visible       (N,) bool, or None when only the projection was computed
    pixel_vertex  (H, W) int32, nearest vertex of the winning face per covered
                  cell, -1 outside the footprint
    pixel_face    (H, W) int32 winning face per covered cell, -1 outside
    zbuffer       (H, W) float64, +inf where nothing is rendered
    degenerate_faces  count of zero-area faces skipped
    """

    projected: np.ndarray
    depth: np.ndarray
    visible: Optional[np.ndarray] = None
    pixel_vertex: Optional[np.ndarray] = None
    pixel_face: Optional[np.ndarray] = None
    zbuffer: Optional[np.ndarray] = None
    degenerate_faces: int = 0

    def cells(self) -> tuple[np.ndarray, np.ndarray]:
        """Nearest grid cell per vertex as (rows, cols); bounds unchecked."""
        cols = np.floor(self.projected[:, 0] + 0.5).astype(np.int64)
        rows = np.floor(self.projected[:, 1] + 0.5).astype(np.int64)
        return rows, cols


# ---------------------------------------------------------------------------
# Rotations
# ---------------------------------------------------------------------------


def _rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def pose_to_rotation(pose: Pose) -> np.ndarray:
    """Rotation part of the extrinsics: R = Rz(theta) @ Rx(elevation) @ Ry(azimuth)."""
    p = canonicalize_pose(pose)
    return _rot_z(p.theta) @ _rot_x(p.elevation) @ _rot_y(p.azimuth)


def rotation_to_angles(R: np.ndarray) -> tuple[float, float, float]:
    """Recover (azimuth, elevation, theta) from a rotation built by
    :func:`pose_to_rotation`. Unstable within ~1e-3 of elevation = +-pi/2."""
    elevation = math.asin(min(1.0, max(-1.0, R[2, 1])))
    azimuth = math.atan2(-R[2, 0], R[2, 2]) % TWO_PI
    theta = math.atan2(-R[0, 1], R[1, 1])
    if theta >= math.pi:  # atan2 returns (-pi, pi]; canonical range is [-pi, pi)
        theta -= TWO_PI
    return azimuth, elevation, theta


def canonicalize_pose(pose: Pose) -> Pose:
    """Map angles into their canonical ranges without changing the rotation."""
    a = pose.azimuth % TWO_PI
    e, t = pose.elevation, pose.theta
    if abs(e) <= math.pi / 2 and -math.pi <= t < math.pi:
        return Pose(a, e, t, pose.distance)
    # out-of-range elevation/theta: rebuild from the rotation matrix
    R = _rot_z(t) @ _rot_x(e) @ _rot_y(a)
    a, e, t = rotation_to_angles(R)
    return Pose(a, e, t, pose.distance)


def _check_rotation(R: np.ndarray, name: str) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValidationError(f"{name} must be 3x3, got {R.shape}")
    if np.abs(R.T @ R - np.eye(3)).max() > 1e-8 or abs(np.linalg.det(R) - 1.0) > 1e-8:
        raise ValidationError(f"{name} is not a proper rotation matrix")
    return R


def geodesic_distance(R1: np.ndarray, R2: np.ndarray) -> float:
    """Rotation error ||log(R1^T R2)||_F / sqrt(2), in [0, pi].

    Computed as atan2(|skew(M)|, trace-based cosine), which stays accurate
    near zero where acos of the trace loses half the significant digits.
    """
    R1 = _check_rotation(R1, "R1")
    R2 = _check_rotation(R2, "R2")
    M = R1.T @ R2
    cos = (np.trace(M) - 1.0) / 2.0
    v = np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])
    sin = float(np.linalg.norm(v)) / 2.0
    return math.atan2(sin, cos)


# ---------------------------------------------------------------------------
# Projection and rasterization
# ---------------------------------------------------------------------------


def project_vertices(mesh: Mesh, pose: Pose, camera: Camera) -> VisibilityRecord:
    """Perspective-project every vertex; visibility is left unset.

    Raises :class:`DegenerateProjectionError` naming the first vertex at or
    behind the camera plane.
    """
    R = pose_to_rotation(pose)
    xc = mesh.vertices @ R.T
    xc[:, 2] += pose.distance
    z = xc[:, 2]
    bad = np.flatnonzero(z <= 0.0)
    if bad.size:
        raise DegenerateProjectionError(
            f"vertex {bad[0]} has non-positive camera depth {z[bad[0]]:.6g}"
        )
    px, py = camera.principal_point
    proj = np.empty((mesh.n_vertices, 2))
    proj[:, 0] = px + camera.focal * xc[:, 0] / z
    proj[:, 1] = py + camera.focal * xc[:, 1] / z
    return VisibilityRecord(projected=proj, depth=z.copy())


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def rasterize_visibility(mesh: Mesh, pose: Pose, camera: Camera, *,
                         supersample: int = 3, neighborhood: int = 2,
                         vertex_visibility: bool = True) -> VisibilityRecord:
    """Z-buffer rasterization at cell centers plus per-vertex visibility.

    The buffer is rasterized at ``supersample`` times the camera resolution
    (odd, so base cell centers land exactly on fine cells; the returned
    footprint and z-buffer are sampled back at base cell centers and are
    identical for every supersample setting). A vertex is visible iff its
    projection lies inside the image and no z-buffer winner within
    ``neighborhood`` fine cells of it covers its exact projected position at
    a depth more than the tolerance nearer. Testing the exact position rather
    than the cell-center buffer value keeps the silhouette band and oblique
    faces classified correctly; supersampling catches thin occluders that
    never win a coarse cell.

    The defaults favor accuracy (view-bank construction, dataset rendering);
    pose optimization loops use ``supersample=1, neighborhood=1`` where an
    approximate visible set is sufficient.
    """
    if supersample < 1 or supersample % 2 == 0:
        raise ValidationError(f"supersample must be odd and >= 1, got {supersample}")
    rec = project_vertices(mesh, pose, camera)
    H, W = camera.image_size
    s = supersample
    off = (s - 1) / 2.0
    Hf, Wf = H * s, W * s
    n_fine = Hf * Wf
    xy = rec.projected
    xyf = xy * s + off  # fine-grid coordinates (affine, barycentrics unchanged)
    invz = 1.0 / rec.depth
    faces = mesh.faces

    v3 = mesh.vertices[faces]
    area3 = 0.5 * np.linalg.norm(
        np.cross(v3[:, 1] - v3[:, 0], v3[:, 2] - v3[:, 0]), axis=1
    )
    degenerate = int((area3 < DEGENERATE_FACE_AREA).sum())

    tri = xyf[faces]  # (F, 3, 2)
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    den = _cross2(e1, e2)
    # edge-on faces have ~zero screen area and cover no cell centers anyway
    drawable = (area3 >= DEGENERATE_FACE_AREA) & (np.abs(den) > 1e-12)

    zbuf_f = np.full(n_fine, np.inf)
    face_f = np.full(n_fine, -1, dtype=np.int32)

    dr = np.flatnonzero(drawable)
    if dr.size:
        x0 = np.maximum(np.ceil(tri[dr, :, 0].min(axis=1) - 1e-9), 0).astype(np.int64)
        x1 = np.minimum(np.floor(tri[dr, :, 0].max(axis=1) + 1e-9), Wf - 1).astype(np.int64)
        y0 = np.maximum(np.ceil(tri[dr, :, 1].min(axis=1) - 1e-9), 0).astype(np.int64)
        y1 = np.minimum(np.floor(tri[dr, :, 1].max(axis=1) + 1e-9), Hf - 1).astype(np.int64)
        wx = np.maximum(x1 - x0 + 1, 0)
        wy = np.maximum(y1 - y0 + 1, 0)
        counts = wx * wy
        keep = counts > 0
        dr, x0, y0, wx, counts = dr[keep], x0[keep], y0[keep], wx[keep], counts[keep]
        total = int(counts.sum())
    else:
        total = 0

    if total:
        # flatten all (face, fine cell) candidates within the clipped bboxes
        cand_face = np.repeat(dr, counts)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        k = np.arange(total) - np.repeat(starts, counts)
        wxr = np.repeat(wx, counts)
        cx = np.repeat(x0, counts) + k % wxr
        cy = np.repeat(y0, counts) + k // wxr

        p = np.stack([cx, cy], axis=1).astype(np.float64) - tri[cand_face, 0]
        d = den[cand_face]
        w1 = _cross2(p, e2[cand_face]) / d
        w2 = _cross2(e1[cand_face], p) / d
        w0 = 1.0 - w1 - w2
        inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)

        fi = faces[cand_face]
        iz = w0 * invz[fi[:, 0]] + w1 * invz[fi[:, 1]] + w2 * invz[fi[:, 2]]
        inside &= iz > 0.0

        cand_face = cand_face[inside]
        cand_pix = (cy[inside] * Wf + cx[inside]).astype(np.int64)
        zc = 1.0 / iz[inside]

        np.minimum.at(zbuf_f, cand_pix, zc)
        # exact minima only; among depth ties the lowest candidate (= lowest
        # face index, scanline order) wins, keeping runs deterministic
        ties = zc <= zbuf_f[cand_pix]
        win = np.full(n_fine, np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(win, cand_pix[ties], np.flatnonzero(ties))
        cov_f = np.flatnonzero(np.isfinite(zbuf_f))
        face_f[cov_f] = cand_face[win[cov_f]].astype(np.int32)

    # base-resolution buffers: sample the fine grid at base cell centers
    base_r = np.arange(H) * s + (s - 1) // 2
    base_c = np.arange(W) * s + (s - 1) // 2
    base_idx = (base_r[:, None] * Wf + base_c[None, :]).ravel()
    zbuf = zbuf_f[base_idx]
    pixel_face = face_f[base_idx]
    covered = np.isfinite(zbuf)

    # nearest vertex of the winning face per covered base cell (ties: lowest
    # index); distances in fine coords are a uniform scaling, argmin unchanged
    pixel_vertex = np.full(H * W, -1, dtype=np.int32)
    cov_idx = np.flatnonzero(covered)
    if cov_idx.size:
        fverts = faces[pixel_face[cov_idx]]  # (M, 3)
        centers = np.stack([(cov_idx % W) * s + off, (cov_idx // W) * s + off],
                           axis=1)
        d2 = ((tri[pixel_face[cov_idx]] - centers[:, None, :]) ** 2).sum(axis=2)
        best = d2.min(axis=1, keepdims=True)
        cand = np.where(d2 <= best, fverts, np.iinfo(np.int32).max)
        pixel_vertex[cov_idx] = cand.min(axis=1).astype(np.int32)

    visible = None
    if vertex_visibility:
        tol = DEPTH_TOL_SCALE * mesh.bounding_radius
        colf = np.floor(xyf[:, 0] + 0.5).astype(np.int64)
        rowf = np.floor(xyf[:, 1] + 0.5).astype(np.int64)
        in_bounds = (colf >= 0) & (colf < Wf) & (rowf >= 0) & (rowf < Hf)
        visible = in_bounds.copy()
        vidx = np.flatnonzero(in_bounds)
        if vidx.size and covered.any():
            span = np.arange(-neighborhood, neighborhood + 1)
            rr = np.clip(rowf[vidx, None, None] + span[None, :, None], 0, Hf - 1)
            cc = np.clip(colf[vidx, None, None] + span[None, None, :], 0, Wf - 1)
            fid = face_f[(rr * Wf + cc).reshape(vidx.size, -1)]
            flat_v, flat_k = np.nonzero(fid >= 0)
            f = fid[flat_v, flat_k]
            vv = vidx[flat_v]
            p = xyf[vv] - tri[f, 0]
            d = den[f]
            safe = np.where(np.abs(d) > 1e-300, d, 1.0)
            w1 = _cross2(p, e2[f]) / safe
            w2 = _cross2(e1[f], p) / safe
            w0 = 1.0 - w1 - w2
            covers = (w0 >= -1e-9) & (w1 >= -1e-9) & (w2 >= -1e-9)
            fi = faces[f]
            iz = w0 * invz[fi[:, 0]] + w1 * invz[fi[:, 1]] + w2 * invz[fi[:, 2]]
            zq = np.where(iz > 1e-300, 1.0 / np.maximum(iz, 1e-300), np.inf)
            own = (fi == vv[:, None]).any(axis=1)
            blocked = covers & ~own & (zq < rec.depth[vv] - tol)
            visible[vv[blocked]] = False

    return VisibilityRecord(
        projected=xy,
        depth=rec.depth,
        visible=visible,
        pixel_vertex=pixel_vertex.reshape(H, W),
        pixel_face=pixel_face.reshape(H, W),
        zbuffer=zbuf.reshape(H, W),
        degenerate_faces=degenerate,
    )


# ---------------------------------------------------------------------------
# Template meshes
# ---------------------------------------------------------------------------


def cuboid(extents=(1.6, 0.6, 0.9), subdivisions=9) -> Mesh:
    """Procedural cuboid template with a subdivided grid per face.

    ``subdivisions`` is one count for every axis or a per-axis triple.
    Shared edges and corners are welded; a single count n gives
    6(n+1)^2 - 12(n+1) + 8 vertices (488 for n = 9). Grid coordinates are
    built symmetrically so a vertex at (x, y, z) always has exact mirror
    partners at (+-x, +-y, +-z).
    """
    if isinstance(subdivisions, int):
        subdivisions = (subdivisions, subdivisions, subdivisions)
    subdivisions = tuple(int(s) for s in subdivisions)
    if min(subdivisions) < 1:
        raise ValidationError("subdivisions must be >= 1")
    ex, ey, ez = (float(v) for v in extents)
    if min(ex, ey, ez) <= 0:
        raise ValidationError(f"extents must be positive, got {extents}")

    def axis_coords(extent, n):
        # (k - n/2) is exact in floats, so negation symmetry is exact
        return (np.arange(n + 1) - n / 2.0) * (extent / n)

    coords = {a: axis_coords(e, n) for a, (e, n) in
              enumerate(zip((ex, ey, ez), subdivisions))}
    half = {0: ex / 2.0, 1: ey / 2.0, 2: ez / 2.0}

    verts: list[tuple[float, float, float]] = []
    index: dict[tuple[float, float, float], int] = {}
    faces: list[tuple[int, int, int]] = []

    def vid(p):
        key = (round(p[0], 12), round(p[1], 12), round(p[2], 12))
        i = index.get(key)
        if i is None:
            i = len(verts)
            index[key] = i
            verts.append(p)
        return i

    # each box face: fixed axis at +-half, grid over the two free axes,
    # triangles wound so normals point outward
    for axis in range(3):
        u_axis, v_axis = [a for a in range(3) if a != axis]
        nu, nv = subdivisions[u_axis], subdivisions[v_axis]
        for sign in (+1.0, -1.0):
            grid = np.empty((nu + 1, nv + 1), dtype=np.int64)
            for i, u in enumerate(coords[u_axis]):
                for j, v in enumerate(coords[v_axis]):
                    p = [0.0, 0.0, 0.0]
                    p[axis] = sign * half[axis]
                    p[u_axis] = float(u)
                    p[v_axis] = float(v)
                    grid[i, j] = vid(tuple(p))
            # orientation of (e_u x e_v) relative to the outward normal
            eu = np.zeros(3)
            eu[u_axis] = 1.0
            ev = np.zeros(3)
            ev[v_axis] = 1.0
            outward = np.cross(eu, ev)[axis] * sign > 0
            for i in range(nu):
                for j in range(nv):
                    q = (grid[i, j], grid[i + 1, j], grid[i + 1, j + 1], grid[i, j + 1])
                    if outward:
                        faces.append((q[0], q[1], q[2]))
                        faces.append((q[0], q[2], q[3]))
                    else:
                        faces.append((q[0], q[2], q[1]))
                        faces.append((q[0], q[3], q[2]))

    return Mesh(np.array(verts), np.array(faces))


def mirror_pairs(mesh: Mesh, axis: int = 2, decimals: int = 9) -> np.ndarray:
    """Index of each vertex's mirror partner across the plane axis = 0.

    Self-paired vertices (on the plane) map to themselves. Raises if any
    vertex has no partner within the rounding tolerance.
    """
    keys = np.round(mesh.vertices, decimals)
    lookup = {tuple(k): i for i, k in enumerate(keys)}
    out = np.empty(mesh.n_vertices, dtype=np.int64)
    for i, k in enumerate(keys):
        m = list(k)
        m[axis] = -m[axis] + 0.0  # normalize -0.0
        j = lookup.get(tuple(m))
        if j is None:
            raise ValidationError(f"vertex {i} has no mirror partner across axis {axis}")
        out[i] = j
    return out


# ---------------------------------------------------------------------------
# Mesh text format:  `v x y z` and `f i j k` lines (1-based faces)
# ---------------------------------------------------------------------------


def mesh_to_text(mesh: Mesh) -> str:
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    for f in mesh.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    return "\n".join(lines) + "\n"


def mesh_from_text(text: str) -> Mesh:
    verts, faces = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "v" and len(parts) == 4:
            try:
                verts.append([float(x) for x in parts[1:]])
            except ValueError:
                raise FormatError(f"line {lineno}: malformed vertex: {raw!r}") from None
        elif parts[0] == "f" and len(parts) == 4:
            try:
                idx = [int(x) - 1 for x in parts[1:]]
            except ValueError:
                raise FormatError(f"line {lineno}: malformed face: {raw!r}") from None
            if min(idx) < 0:
                raise FormatError(f"line {lineno}: face indices are 1-based: {raw!r}")
            faces.append(idx)
        else:
            raise FormatError(f"line {lineno}: unsupported line type: {raw!r}")
    if not verts or not faces:
        raise FormatError("mesh text must contain vertex and face lines")
    try:
        return Mesh(np.array(verts), np.array(faces))
    except ValidationError as e:
        raise FormatError(str(e)) from None


def read_mesh(path) -> Mesh:
    return mesh_from_text(Path(path).read_text())


def write_mesh(mesh: Mesh, path) -> None:
    Path(path).write_text(mesh_to_text(mesh))
