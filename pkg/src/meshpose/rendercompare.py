"""Neural mesh generative model: likelihood scoring of feature maps, contrastive
training of per-vertex features from pseudo-correspondences, and pose inference
by negative-log-likelihood minimization.

Likelihood model
----------------
A neural mesh carries one unit feature vector per template vertex plus a unit
background feature. With unit-normalized image features, the per-pixel log
likelihood is a dot product scaled by 1/temperature (a von Mises-Fisher
density with shared concentration; the normalizer is constant in the pose and
dropped). Foreground pixels covered by the rendered silhouette score against
their cell's nearest visible vertex; foreground pixels the silhouette misses
score against the background feature, so poses whose silhouette misses the
mask are penalized. Background pixels always score against the background
feature.

Differentiable surrogate
------------------------
The hard vertex-to-pixel assignment is piecewise constant in the pose, so the
optimizer descends a smoothed objective: each foreground pixel blends the
features of nearby projected visible vertices with a windowed Gaussian kernel
(C^2 at the window edge), plus a constant background weight that takes over
smoothly away from the silhouette. The visibility set is piecewise constant
and held fixed at the linearization point; it is refreshed every iteration.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import featureio
from .correspondence import CorrespondenceSet, ViewBank, generate
from .errors import (
    BadMagicError,
    DataError,
    DegenerateProjectionError,
    FormatError,
    TruncatedFileError,
    ValidationError,
)
from .featureio import CorpusManifest, FeatureMap, ForegroundMask
from .geometry import (
    Camera,
    Mesh,
    Pose,
    TWO_PI,
    canonicalize_pose,
    mesh_from_text,
    mesh_to_text,
    rasterize_visibility,
)

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.07
DEFAULT_MOMENTUM = 0.9
NMSH_MAGIC = b"NMSH"


class NeuralMesh:
    """Template mesh plus learnable unit vertex features and background feature."""

    def __init__(self, mesh: Mesh, vertex_features, background_feature,
                 temperature: float = DEFAULT_TEMPERATURE,
                 momentum: float = DEFAULT_MOMENTUM):
        self.mesh = mesh
        self.vertex_features = np.ascontiguousarray(vertex_features, dtype=np.float32)
        self.background_feature = np.ascontiguousarray(background_feature, dtype=np.float32)
        if self.vertex_features.shape != (mesh.n_vertices, self.channels):
            raise ValidationError(
                f"vertex features {self.vertex_features.shape} do not match "
                f"{mesh.n_vertices} vertices"
            )
        if self.background_feature.ndim != 1:
            raise ValidationError("background feature must be a single vector")
        if temperature <= 0:
            raise ValidationError(f"temperature must be > 0, got {temperature}")
        if not (0.0 <= momentum < 1.0 or momentum == 1.0):
            raise ValidationError(f"momentum must be in [0, 1], got {momentum}")
        self.temperature = float(temperature)
        self.momentum = float(momentum)
        self.check_norms(tol=1e-4)

    @property
    def channels(self) -> int:
        return self.vertex_features.shape[1] if self.vertex_features.ndim == 2 else 0

    @property
    def n_vertices(self) -> int:
        return self.mesh.n_vertices

    def check_norms(self, tol: float = 1e-6) -> None:
        feats = np.vstack([self.vertex_features, self.background_feature[None, :]])
        dev = np.abs(np.linalg.norm(feats.astype(np.float64), axis=1) - 1.0)
        if dev.max() > tol:
            raise ValidationError(f"feature norms deviate from 1 by up to {dev.max():.3g}")

    @classmethod
    def init_random(cls, mesh: Mesh, channels: int, rng: np.random.Generator,
                    temperature: float = DEFAULT_TEMPERATURE,
                    momentum: float = DEFAULT_MOMENTUM) -> "NeuralMesh":
        raw = rng.standard_normal((mesh.n_vertices + 1, channels))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        return cls(mesh, raw[:-1].astype(np.float32), raw[-1].astype(np.float32),
                   temperature, momentum)


# ---------------------------------------------------------------------------
# Hard negative log-likelihood
# ---------------------------------------------------------------------------


def _check_dims(image: FeatureMap, nm: NeuralMesh, camera: Camera, mask: ForegroundMask):
    h, w = camera.image_size
    if (image.height, image.width) != (h, w):
        raise ValidationError(
            f"image grid {image.height}x{image.width} != camera grid {h}x{w}"
        )
    if (mask.height, mask.width) != (image.height, image.width):
        raise ValidationError(
            f"mask {mask.height}x{mask.width} != image {image.height}x{image.width}"
        )
    if image.channels != nm.channels:
        raise ValidationError(
            f"image has {image.channels} channels, neural mesh has {nm.channels}"
        )


def nll(image: FeatureMap, nm: NeuralMesh, pose: Pose, camera: Camera,
        mask: ForegroundMask) -> float:
    """Negative log-likelihood of the feature map under the rendered pose,
    up to the constant vMF normalizer."""
    _check_dims(image, nm, camera, mask)
    rec = rasterize_visibility(nm.mesh, pose, camera, supersample=1,
                               vertex_visibility=False)
    flat = image.data.reshape(-1, image.channels).astype(np.float64)
    dots = flat @ nm.background_feature.astype(np.float64)
    pv = rec.pixel_vertex.ravel()
    sel = mask.bits.ravel() & (pv >= 0)
    if sel.any():
        C = nm.vertex_features.astype(np.float64)
        dots[sel] = np.einsum("ij,ij->i", flat[sel], C[pv[sel]])
    return float(-dots.sum() / nm.temperature)


# ---------------------------------------------------------------------------
# Smoothed objective and its gradient
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SoftAssignConfig:
    """Soft vertex-to-pixel assignment: windowed Gaussian weights over
    projected-vertex-to-pixel distance (grid cells), plus a constant
    background weight equal to the kernel at ``bg_distance``."""

    radius: float = 2.0
    bandwidth: float = 1.0
    bg_distance: float = 1.5

    def kernel(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """K(u) and dK/du for squared distances u. C^2 at u = radius^2, so
        finite differences across the window edge stay clean."""
        r2 = self.radius * self.radius
        s2 = self.bandwidth * self.bandwidth
        w = np.maximum(1.0 - u / r2, 0.0)
        g = np.exp(-u / (2.0 * s2))
        k = g * w**3
        dk = g * w**2 * (-w / (2.0 * s2) - 3.0 / r2)
        return k, np.where(u < r2, dk, 0.0)

    @property
    def bg_weight(self) -> float:
        k, _ = self.kernel(np.array(self.bg_distance**2))
        return float(k)


def _rotation_and_jacobians(pose: Pose):
    a, e, t = pose.azimuth, pose.elevation, pose.theta
    ca, sa = math.cos(a), math.sin(a)
    ce, se = math.cos(e), math.sin(e)
    ct, st = math.cos(t), math.sin(t)
    Ry = np.array([[ca, 0, sa], [0, 1, 0], [-sa, 0, ca]])
    Rx = np.array([[1, 0, 0], [0, ce, -se], [0, se, ce]])
    Rz = np.array([[ct, -st, 0], [st, ct, 0], [0, 0, 1]])
    dRy = np.array([[-sa, 0, ca], [0, 0, 0], [-ca, 0, -sa]])
    dRx = np.array([[0, 0, 0], [0, -se, -ce], [0, ce, -se]])
    dRz = np.array([[-st, -ct, 0], [ct, -st, 0], [0, 0, 0]])
    R = Rz @ Rx @ Ry
    return R, (Rz @ Rx @ dRy, Rz @ dRx @ Ry, dRz @ Rx @ Ry)


def _smooth_terms(image: FeatureMap, nm: NeuralMesh, pose: Pose, camera: Camera,
                  mask: ForegroundMask, soft: SoftAssignConfig,
                  visible: np.ndarray, want_grad: bool):
    _check_dims(image, nm, camera, mask)
    T = nm.temperature
    flat = image.data.reshape(-1, image.channels).astype(np.float64)
    bgf = nm.background_feature.astype(np.float64)
    fgmask = mask.bits.ravel()
    bg_sum = float((flat[~fgmask] @ bgf).sum()) if (~fgmask).any() else 0.0

    fg_idx = np.flatnonzero(fgmask)
    if fg_idx.size == 0:
        return -bg_sum / T, np.zeros(4)

    R, dRs = _rotation_and_jacobians(pose)
    vis_idx = np.flatnonzero(visible)
    h, w = camera.image_size
    g = np.stack([fg_idx % w, fg_idx // w], axis=1).astype(np.float64)
    b = flat[fg_idx] @ bgf  # (P,)
    beta = soft.bg_weight

    if vis_idx.size == 0:
        value = -(b.sum() + bg_sum) / T
        return value, np.zeros(4)

    V = nm.mesh.vertices[vis_idx]
    X = V @ R.T
    X[:, 2] += pose.distance
    z = X[:, 2]
    if (z <= 0).any():
        bad = vis_idx[int(np.argmin(z))]
        raise DegenerateProjectionError(
            f"vertex {bad} has non-positive camera depth during smoothing"
        )
    fx, fy = camera.principal_point
    p = np.empty_like(X[:, :2])
    p[:, 0] = fx + camera.focal * X[:, 0] / z
    p[:, 1] = fy + camera.focal * X[:, 1] / z

    # only pairs inside the kernel window contribute; evaluate those sparsely
    dx = p[None, :, 0] - g[:, None, 0]  # (P, Vv)
    dy = p[None, :, 1] - g[:, None, 1]
    u = dx * dx + dy * dy
    pi, vi = np.nonzero(u < soft.radius * soft.radius)
    uw = u[pi, vi]
    K, dK = soft.kernel(uw)
    fgF = flat[fg_idx]
    C = nm.vertex_features[vis_idx].astype(np.float64)
    a = np.einsum("ij,ij->i", fgF[pi], C[vi])  # per-pair feature dots
    P = fg_idx.size
    W = np.bincount(pi, weights=K, minlength=P) + beta
    S = np.bincount(pi, weights=K * a, minlength=P) + beta * b
    s = S / W
    value = -(s.sum() + bg_sum) / T
    if not want_grad:
        return value, None

    G = ((a - s[pi]) / W[pi]) * dK  # per-pair d(s)/d(K) * dK/du
    Vv = vis_idx.size
    cx = 2.0 * np.bincount(vi, weights=G * dx[pi, vi], minlength=Vv)
    cy = 2.0 * np.bincount(vi, weights=G * dy[pi, vi], minlength=Vv)

    f = camera.focal
    x0, x1 = X[:, 0], X[:, 1]
    grad = np.empty(4)
    for i, dR in enumerate(dRs):
        dX = V @ dR.T
        dpx = f * (dX[:, 0] / z - x0 * dX[:, 2] / (z * z))
        dpy = f * (dX[:, 1] / z - x1 * dX[:, 2] / (z * z))
        grad[i] = (cx * dpx + cy * dpy).sum()
    # distance: dX = (0, 0, 1)
    dpx = f * (-x0 / (z * z))
    dpy = f * (-x1 / (z * z))
    grad[3] = (cx * dpx + cy * dpy).sum()
    return value, -grad / T


def _fast_visible(mesh, pose, camera) -> np.ndarray:
    # approximate visible set for scoring and descent: silhouette-band slack
    # only perturbs soft-assignment weights
    return rasterize_visibility(mesh, pose, camera, supersample=1,
                                neighborhood=1).visible


def _visible_or_default(nm: NeuralMesh, pose: Pose, camera: Camera,
                        visible: Optional[np.ndarray]) -> np.ndarray:
    if visible is not None:
        return np.asarray(visible, dtype=bool)
    return _fast_visible(nm.mesh, pose, camera)


def nll_smooth(image: FeatureMap, nm: NeuralMesh, pose: Pose, camera: Camera,
               mask: ForegroundMask, soft: SoftAssignConfig = SoftAssignConfig(),
               visible: Optional[np.ndarray] = None) -> float:
    """Smoothed NLL. ``visible`` freezes the visibility set (the gradient
    contract differentiates with visibility held at the linearization point)."""
    vis = _visible_or_default(nm, pose, camera, visible)
    value, _ = _smooth_terms(image, nm, pose, camera, mask, soft, vis, want_grad=False)
    return value


def nll_gradient(image: FeatureMap, nm: NeuralMesh, pose: Pose, camera: Camera,
                 mask: ForegroundMask, soft: SoftAssignConfig = SoftAssignConfig(),
                 visible: Optional[np.ndarray] = None) -> np.ndarray:
    """Gradient of the smoothed NLL w.r.t. (azimuth, elevation, theta, distance)."""
    vis = _visible_or_default(nm, pose, camera, visible)
    _, grad = _smooth_terms(image, nm, pose, camera, mask, soft, vis, want_grad=True)
    return grad


# ---------------------------------------------------------------------------
# Initialization grid and pose optimization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoseGrid:
    """Deterministic initialization grid; enumeration order is elevation-major,
    then azimuth, theta, distance."""

    n_azimuths: int = 36
    elevations: tuple = (-math.pi / 9, 0.0, math.pi / 9)
    thetas: tuple = (0.0,)
    distances: tuple = (5.0,)

    def poses(self) -> list[Pose]:
        out = []
        for e in self.elevations:
            for i in range(self.n_azimuths):
                for t in self.thetas:
                    for d in self.distances:
                        out.append(Pose(TWO_PI * i / self.n_azimuths, e, t, d))
        if not out:
            raise ValidationError("pose grid is empty")
        return out


@dataclass
class PoseEstimate:
    pose: Pose
    final_nll: float
    iterations: int
    converged: bool
    candidate_rank: int


@dataclass(frozen=True)
class OptimOptions:
    grid: PoseGrid = PoseGrid()
    step_angle: float = 0.05  # radians, initial Adam step on angles
    step_distance: float = 0.02  # relative step on distance (log-space)
    max_iterations: int = 300
    tol: float = 1e-6  # per-pixel NLL improvement threshold
    patience: int = 10
    candidates: int = 3
    lr_decay: float = 0.97
    soft: SoftAssignConfig = field(default_factory=SoftAssignConfig)


def init_candidates(image: FeatureMap, nm: NeuralMesh, camera: Camera,
                    mask: ForegroundMask, grid: PoseGrid, k: int = 3,
                    scorer: str = "smooth",
                    soft: SoftAssignConfig = SoftAssignConfig()
                    ) -> list[tuple[Pose, float]]:
    """NLL over the grid; top-k ascending, ties broken by grid order.

    The default scorer is the smoothed NLL: at typical grid resolutions the
    hard assignment decorrelates a few degrees off-pose, which makes its
    ranking brittle, while the smoothed score stays informative across a grid
    step. ``scorer='hard'`` ranks by the exact objective instead.
    """
    poses = grid.poses()
    if scorer == "hard":
        values = np.array([nll(image, nm, p, camera, mask) for p in poses])
    elif scorer == "smooth":
        values = np.array(
            [nll_smooth(image, nm, p, camera, mask, soft) for p in poses]
        )
    else:
        raise ValidationError(f"unknown scorer {scorer!r}")
    order = np.argsort(values, kind="stable")
    return [(poses[i], float(values[i])) for i in order[: max(1, k)]]


def _descend(image, nm, camera, mask, pose0, opts: OptimOptions):
    """Adam descent of the smoothed NLL from one candidate. Returns
    (pose, iterations, converged) or raises on non-finite values."""
    h, w = camera.image_size
    n_pix = h * w
    x = np.array([pose0.azimuth, pose0.elevation, pose0.theta, math.log(pose0.distance)])
    lr0 = np.array([opts.step_angle] * 3 + [opts.step_distance])
    m = np.zeros(4)
    v = np.zeros(4)
    b1, b2, eps = 0.9, 0.999, 1e-8
    best = math.inf
    best_x = x.copy()
    since_best = 0
    iterations = 0
    converged = False
    for t in range(opts.max_iterations):
        iterations = t + 1
        pose = Pose(x[0], x[1], x[2], math.exp(x[3]))
        vis = _fast_visible(nm.mesh, pose, camera)
        value, grad = _smooth_terms(image, nm, pose, camera, mask, opts.soft, vis, True)
        if not math.isfinite(value) or not np.isfinite(grad).all():
            raise DataError("non-finite NLL during descent")
        vnorm = value / n_pix
        if vnorm < best - opts.tol:
            best, best_x, since_best = vnorm, x.copy(), 0
        else:
            since_best += 1
            if since_best >= opts.patience:
                converged = True
                break
        grad = grad.copy()
        grad[3] *= math.exp(x[3])  # chain rule for log-distance
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad * grad
        mhat = m / (1 - b1 ** (t + 1))
        vhat = v / (1 - b2 ** (t + 1))
        x = x - lr0 * (opts.lr_decay**t) * mhat / (np.sqrt(vhat) + eps)
    pose = canonicalize_pose(Pose(best_x[0], best_x[1], best_x[2], math.exp(best_x[3])))
    return pose, iterations, converged


def optimize_pose(image: FeatureMap, nm: NeuralMesh, camera: Camera,
                  mask: ForegroundMask, options: OptimOptions = OptimOptions()
                  ) -> PoseEstimate:
    """Gradient descent from the top grid candidates; the mask is held fixed
    throughout. The returned pose is the hard-NLL argmin over every
    candidate's refined pose and its starting pose, so the result is never
    worse than the best initialization."""
    cands = init_candidates(image, nm, camera, mask, options.grid,
                            options.candidates, soft=options.soft)
    pool: list[PoseEstimate] = []
    failures = 0
    for rank, (pose0, _score) in enumerate(cands):
        try:
            pose, iters, conv = _descend(image, nm, camera, mask, pose0, options)
            final = nll(image, nm, pose, camera, mask)
            if not math.isfinite(final):
                raise DataError("non-finite NLL at refined pose")
            pool.append(PoseEstimate(pose, final, iters, conv, rank))
        except (DataError, DegenerateProjectionError) as e:
            failures += 1
            logger.warning("candidate %d aborted: %s", rank, e)
        nll0 = nll(image, nm, pose0, camera, mask)
        if math.isfinite(nll0):
            pool.append(PoseEstimate(canonicalize_pose(pose0), nll0, 0, False, rank))
    if failures == len(cands):
        raise DataError("pose optimization failed for every candidate")
    best = min(pool, key=lambda est: est.final_nll)
    return best


# ---------------------------------------------------------------------------
# Contrastive training
# ---------------------------------------------------------------------------


def contrastive_step(nm: NeuralMesh, image: FeatureMap, corr: CorrespondenceSet,
                     mask: ForegroundMask) -> float:
    """One part-contrastive update from refined matches.

    The returned loss is the mean cross-entropy of the softmax over
    [f.C_1/T, ..., f.C_N/T, f.C_b/T] against each match's vertex, computed
    before the update. Matched vertices then move by a momentum average toward
    the mean of their matched pixel features and are renormalized; the
    background feature moves toward the mean masked-out pixel feature.
    """
    if not corr.refined:
        raise ValidationError("contrastive_step requires refined correspondences")
    if len(corr) == 0:
        raise DataError("empty correspondence set")
    if image.channels != nm.channels:
        raise ValidationError(
            f"image has {image.channels} channels, neural mesh has {nm.channels}"
        )
    if corr.vertices.max() >= nm.n_vertices:
        raise ValidationError("correspondence vertex index out of range")

    T = nm.temperature
    feats = image.data[corr.pixels[:, 0], corr.pixels[:, 1]].astype(np.float64)
    all_feats = np.vstack(
        [nm.vertex_features, nm.background_feature[None, :]]
    ).astype(np.float64)
    logits = feats @ all_feats.T / T  # (M, N+1)
    mx = logits.max(axis=1)
    lse = mx + np.log(np.exp(logits - mx[:, None]).sum(axis=1))
    loss = float((lse - logits[np.arange(len(corr)), corr.vertices]).mean())

    mu = nm.momentum
    if mu < 1.0:
        c = nm.channels
        sums = np.zeros((nm.n_vertices, c))
        counts = np.zeros(nm.n_vertices)
        np.add.at(sums, corr.vertices, feats)
        np.add.at(counts, corr.vertices, 1.0)
        touched = counts > 0
        means = sums[touched] / counts[touched, None]
        updated = mu * nm.vertex_features[touched].astype(np.float64) + (1 - mu) * means
        norms = np.linalg.norm(updated, axis=1, keepdims=True)
        ok = norms[:, 0] > 1e-12
        updated[ok] /= norms[ok]
        new_feats = nm.vertex_features.copy()
        sub = new_feats[touched]
        sub[ok] = updated[ok].astype(np.float32)
        new_feats[touched] = sub
        nm.vertex_features = new_feats

        bg_cells = image.data[~mask.bits].astype(np.float64)
        if bg_cells.size:
            nonzero = np.abs(bg_cells).max(axis=1) > 0  # skip padding cells
            if nonzero.any():
                bg_mean = bg_cells[nonzero].mean(axis=0)
                upd = mu * nm.background_feature.astype(np.float64) + (1 - mu) * bg_mean
                n = np.linalg.norm(upd)
                if n > 1e-12:
                    nm.background_feature = (upd / n).astype(np.float32)
    nm.check_norms(tol=1e-6)
    return loss


@dataclass(frozen=True)
class TrainConfig:
    downweight: float = 0.25
    weighted_votes: bool = False
    activation_threshold: float = 0.5  # mask fallback when an entry has none


def train(nm: NeuralMesh, manifest: CorpusManifest, bank: ViewBank, epochs: int,
          config: TrainConfig = TrainConfig()) -> tuple[NeuralMesh, list[float], int]:
    """Train vertex features from pipeline-generated pseudo-correspondences.

    Images are processed in manifest order every epoch, so a run is fully
    determined by the initial features. Returns (nm, per-epoch mean loss,
    skipped entry count). Entries that fail to load or match are skipped with
    a warning; an epoch where everything failed raises.
    """
    if len(manifest) == 0:
        raise DataError("corpus manifest is empty")
    if epochs < 1:
        raise ValidationError("epochs must be >= 1")
    trace = []
    skipped = 0
    for epoch in range(epochs):
        losses = []
        for entry in manifest:
            try:
                fmap = featureio.read_feature_map(entry.feature_path)
                if entry.mask_path is not None:
                    fmask = featureio.read_mask(entry.mask_path, fmap.height, fmap.width)
                else:
                    fmask = featureio.activation_mask(
                        fmap, nm.vertex_features, nm.background_feature,
                        config.activation_threshold,
                    )
                corr = generate(fmap, fmask, bank, config.downweight,
                                config.weighted_votes)
                losses.append(contrastive_step(nm, fmap, corr, fmask))
            except (OSError, FormatError, ValidationError, DataError) as e:
                skipped += 1
                logger.warning("skipping %s: %s", entry.image_id, e)
        if not losses:
            raise DataError(f"epoch {epoch}: every corpus entry failed")
        trace.append(float(np.mean(losses)))
    return nm, trace, skipped


# ---------------------------------------------------------------------------
# Checkpoints:  NMSH | u16 version | u16 reserved | u32 N | u32 C | f64 T |
#               f64 momentum | (N+1)*C float32 (background last) |
#               u32 mesh text length | mesh text
# (temperature/momentum stay f64 so resuming a run continues bit-identically)
# ---------------------------------------------------------------------------


def write_checkpoint(nm: NeuralMesh, path) -> None:
    header = NMSH_MAGIC + struct.pack(
        "<HHIIdd", 1, 0, nm.n_vertices, nm.channels, nm.temperature, nm.momentum
    )
    feats = np.vstack([nm.vertex_features, nm.background_feature[None, :]])
    mesh_text = mesh_to_text(nm.mesh).encode()
    blob = header + feats.astype("<f4").tobytes(order="C")
    blob += struct.pack("<I", len(mesh_text)) + mesh_text
    Path(path).write_bytes(blob)


def read_checkpoint(path) -> NeuralMesh:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != NMSH_MAGIC:
        raise BadMagicError(f"{path}: not a neural mesh checkpoint (bad magic)")
    if len(raw) < 32:
        raise TruncatedFileError(f"{path}: header truncated")
    version, _res, n, c, temp, momentum = struct.unpack("<HHIIdd", raw[4:32])
    if version != 1:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    need = 32 + (n + 1) * c * 4 + 4
    if len(raw) < need:
        raise TruncatedFileError(f"{path}: feature payload truncated")
    feats = np.frombuffer(raw, dtype="<f4", count=(n + 1) * c, offset=32)
    feats = feats.reshape(n + 1, c)
    off = 32 + (n + 1) * c * 4
    (mesh_len,) = struct.unpack("<I", raw[off : off + 4])
    if len(raw) < off + 4 + mesh_len:
        raise TruncatedFileError(f"{path}: mesh payload truncated")
    mesh = mesh_from_text(raw[off + 4 : off + 4 + mesh_len].decode())
    if mesh.n_vertices != n:
        raise FormatError(
            f"{path}: header says {n} vertices but mesh has {mesh.n_vertices}"
        )
    return NeuralMesh(mesh, feats[:-1].copy(), feats[-1].copy(), float(temp), float(momentum))


# ---------------------------------------------------------------------------
# Pose estimate text format: 'azimuth elevation theta distance nll converged'
# ---------------------------------------------------------------------------


def write_pose_estimates(estimates: list[PoseEstimate], path) -> None:
    lines = ["# azimuth elevation theta distance nll converged"]
    for est in estimates:
        p = est.pose
        lines.append(
            f"{p.azimuth!r} {p.elevation!r} {p.theta!r} {p.distance!r} "
            f"{est.final_nll!r} {int(est.converged)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_pose_estimates(path) -> list[PoseEstimate]:
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 6:
            raise FormatError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
        try:
            az, el, th, dist, val = (float(x) for x in parts[:5])
            conv = bool(int(parts[5]))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: malformed estimate line") from None
        out.append(PoseEstimate(Pose(az, el, th, dist), val, 0, conv, -1))
    return out
