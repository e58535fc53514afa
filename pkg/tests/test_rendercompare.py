import math

import numpy as np
import pytest

import meshpose as mp
from meshpose import synth
from meshpose.errors import DataError, FormatError, ValidationError
from meshpose.rendercompare import _fast_visible

CAM = mp.DEFAULT_CAMERA


def scene(rng, channels=64, view_dependence=0.0, mesh=None):
    mesh = mesh if mesh is not None else mp.cuboid()
    gen = mp.SceneGenerator.create(mesh, channels, rng, view_dependence=view_dependence)
    return gen, gen.neural_mesh()


def finite_difference(fmap, nm, pose, mask, visible, h=1e-5, soft=None):
    soft = soft or mp.SoftAssignConfig()
    fd = np.zeros(4)
    for i, name in enumerate(("azimuth", "elevation", "theta", "distance")):
        kw = dict(azimuth=pose.azimuth, elevation=pose.elevation,
                  theta=pose.theta, distance=pose.distance)
        kw[name] += h
        hi = mp.nll_smooth(fmap, nm, mp.Pose(**kw), CAM, mask, soft, visible=visible)
        kw[name] -= 2 * h
        lo = mp.nll_smooth(fmap, nm, mp.Pose(**kw), CAM, mask, soft, visible=visible)
        fd[i] = (hi - lo) / (2 * h)
    return fd


# ---------------------------------------------------------------------------
# hard NLL
# ---------------------------------------------------------------------------


def test_nll_all_background_closed_form(rng):
    gen, nm = scene(rng)
    h, w = CAM.image_size
    data = np.broadcast_to(nm.background_feature, (h, w, nm.channels)).copy()
    fmap = mp.FeatureMap(data)
    mask = mp.ForegroundMask(np.zeros((h, w), dtype=bool))
    val = mp.nll(fmap, nm, mp.Pose(0.3, 0.1, 0, 5.0), CAM, mask)
    assert abs(val - (-h * w / nm.temperature)) < 1e-3


def test_nll_orthogonal_features_is_zero(rng):
    # 9 features in R^16 leave a null space; a probe inside it scores 0
    gen, nm = scene(rng, channels=16, mesh=mp.cuboid((1.0, 1.0, 1.0), 1))
    h, w = CAM.image_size
    feats = np.vstack([nm.vertex_features, nm.background_feature[None]]).astype(np.float64)
    vt = np.linalg.svd(feats, full_matrices=False)[2]
    probe = np.zeros(16)
    probe[-1] = 1.0
    probe -= vt.T @ (vt @ probe)
    assert np.linalg.norm(probe) > 1e-6
    probe /= np.linalg.norm(probe)
    data = np.broadcast_to(probe, (h, w, 16)).astype(np.float32).copy()
    mask = np.zeros((h, w), dtype=bool)
    mask[10:20, 10:20] = True
    val = mp.nll(mp.FeatureMap(data), nm, mp.Pose(0.3, 0.1, 0, 5.0), CAM,
                 mp.ForegroundMask(mask))
    assert abs(val) < 1e-2


def test_nll_prefers_true_pose(rng):
    gen, nm = scene(rng)
    cfg = mp.SynthConfig(noise=0.0)
    worse = 0
    for _ in range(100):
        pose = synth.sample_pose(cfg, rng)
        res = synth.render_feature_map(gen, pose, CAM, rng, noise=0.0)
        v_true = mp.nll(res.fmap, nm, pose, CAM, res.mask)
        perturbed = mp.Pose(pose.azimuth + math.pi / 12, pose.elevation,
                            pose.theta, pose.distance)
        v_off = mp.nll(res.fmap, nm, perturbed, CAM, res.mask)
        worse += v_true < v_off
    assert worse == 100


def test_nll_invariant_under_vertex_permutation(rng):
    gen, nm = scene(rng)
    pose = mp.Pose(0.9, 0.2, 0.02, 5.0)
    res = synth.render_feature_map(gen, pose, CAM, rng, noise=0.1)
    v1 = mp.nll(res.fmap, nm, pose, CAM, res.mask)
    perm = rng.permutation(nm.n_vertices)
    inv = np.argsort(perm)
    mesh2 = mp.Mesh(nm.mesh.vertices[perm], inv[nm.mesh.faces])
    nm2 = mp.NeuralMesh(mesh2, nm.vertex_features[perm], nm.background_feature,
                        nm.temperature, nm.momentum)
    v2 = mp.nll(res.fmap, nm2, pose, CAM, res.mask)
    assert abs(v1 - v2) < 1e-6 * abs(v1)


# ---------------------------------------------------------------------------
# smoothed objective and gradient
# ---------------------------------------------------------------------------


def test_gradient_matches_finite_differences(rng):
    for _ in range(10):
        extents = rng.uniform(0.6, 1.8, size=3)
        mesh = mp.cuboid(tuple(extents), int(rng.integers(3, 6)))
        gen, nm = scene(rng, mesh=mesh)
        pose = mp.Pose(rng.uniform(0, 2 * math.pi), rng.uniform(-1.0, 1.0),
                       rng.uniform(-0.5, 0.5), rng.uniform(4.2, 6.5))
        res = synth.render_feature_map(gen, pose, CAM, rng, noise=0.1)
        vis = mp.rasterize_visibility(mesh, pose, CAM).visible
        grad = mp.nll_gradient(res.fmap, nm, pose, CAM, res.mask, visible=vis)
        fd = finite_difference(res.fmap, nm, pose, res.mask, vis)
        denom = np.maximum(np.abs(fd), 1e-5 * np.abs(fd).max() + 1e-9)
        assert (np.abs(grad - fd) / denom).max() < 1e-4


def test_gradient_near_zero_at_smooth_optimum(rng):
    from scipy.optimize import minimize

    gen, nm = scene(rng)
    gt = mp.Pose(1.2, 0.15, 0.03, 5.0)
    res = synth.render_feature_map(gen, gt, CAM, rng, noise=0.0)
    est = mp.optimize_pose(res.fmap, nm, CAM, res.mask)
    # polish to the exact optimum of the frozen-visibility smooth objective
    vis = mp.rasterize_visibility(nm.mesh, est.pose, CAM).visible

    def fg(x):
        pose = mp.Pose(x[0], x[1], x[2], x[3])
        v = mp.nll_smooth(res.fmap, nm, pose, CAM, res.mask, visible=vis)
        g = mp.nll_gradient(res.fmap, nm, pose, CAM, res.mask, visible=vis)
        return v, g

    x0 = np.array([est.pose.azimuth, est.pose.elevation, est.pose.theta,
                   est.pose.distance])
    sol = minimize(fg, x0, jac=True, method="BFGS",
                   options={"gtol": 1e-5, "maxiter": 500})
    grad = mp.nll_gradient(res.fmap, nm, mp.Pose(*sol.x), CAM, res.mask, visible=vis)
    assert np.linalg.norm(grad) < 1e-3
    assert mp.geodesic_distance(mp.Pose(*sol.x).rotation(), gt.rotation()) < math.pi / 36


def test_azimuth_gradient_vanishes_for_rotationally_symmetric_scene(rng):
    # surface of revolution about the up axis with identical features: the
    # objective cannot depend on azimuth beyond discretization dust
    n, m = 48, 12
    verts, faces = [], []
    for j in range(m + 1):
        y = -0.5 + j / m
        r = 0.8
        for i in range(n):
            a = 2 * math.pi * i / n
            verts.append([r * math.cos(a), y, r * math.sin(a)])
    for j in range(m):
        for i in range(n):
            a, b = j * n + i, j * n + (i + 1) % n
            c, d = (j + 1) * n + i, (j + 1) * n + (i + 1) % n
            faces.append([a, b, d])
            faces.append([a, d, c])
    mesh = mp.Mesh(np.array(verts), np.array(faces))
    feat = rng.standard_normal(32)
    feat /= np.linalg.norm(feat)
    vf = np.tile(feat, (mesh.n_vertices, 1)).astype(np.float32)
    bgf = rng.standard_normal(32)
    bgf /= np.linalg.norm(bgf)
    nm = mp.NeuralMesh(mesh, vf, bgf.astype(np.float32))
    pose = mp.Pose(0.7, 0.3, 0.0, 5.0)
    mask = np.zeros(CAM.image_size, dtype=bool)
    mask[8:24, 8:24] = True
    data = np.broadcast_to(feat, (*CAM.image_size, 32)).astype(np.float32).copy()
    vis = mp.rasterize_visibility(mesh, pose, CAM).visible
    grad = mp.nll_gradient(mp.FeatureMap(data), nm, pose, CAM,
                           mp.ForegroundMask(mask), visible=vis)
    assert abs(grad[0]) < 2e-2 * np.abs(grad[1:]).max()


# ---------------------------------------------------------------------------
# initialization grid
# ---------------------------------------------------------------------------


def test_init_grid_ranks_ground_truth_first(rng):
    gen, nm = scene(rng)
    grid = mp.PoseGrid(n_azimuths=12, elevations=(-0.3, 0.0, 0.3))
    gt = grid.poses()[17]
    res = synth.render_feature_map(gen, gt, CAM, rng, noise=0.0)
    for scorer in ("smooth", "hard"):
        cands = mp.init_candidates(res.fmap, nm, CAM, res.mask, grid, k=3,
                                   scorer=scorer)
        assert cands[0][0].almost_equal(gt)


def test_init_k_one(rng):
    gen, nm = scene(rng)
    res = synth.render_feature_map(gen, mp.Pose(1, 0, 0, 5.0), CAM, rng)
    cands = mp.init_candidates(res.fmap, nm, CAM, res.mask,
                               mp.PoseGrid(n_azimuths=6, elevations=(0.0,)), k=1)
    assert len(cands) == 1


def test_init_constant_objective_ties_break_by_grid_order(rng):
    gen, nm = scene(rng)
    h, w = CAM.image_size
    data = np.broadcast_to(nm.background_feature, (h, w, nm.channels)).copy()
    fmap = mp.FeatureMap(data)
    mask = mp.ForegroundMask(np.zeros((h, w), dtype=bool))  # objective constant
    grid = mp.PoseGrid(n_azimuths=5, elevations=(-0.2, 0.2))
    cands = mp.init_candidates(fmap, nm, CAM, mask, grid, k=4)
    expected = grid.poses()
    for got, want in zip(cands, expected):
        assert got[0].almost_equal(want)


# ---------------------------------------------------------------------------
# pose optimization
# ---------------------------------------------------------------------------


def test_optimize_recovers_noiseless_pose(rng):
    gen, nm = scene(rng)
    gt = synth.sample_pose(mp.SynthConfig(), rng)
    res = synth.render_feature_map(gen, gt, CAM, rng, noise=0.0)
    est = mp.optimize_pose(res.fmap, nm, CAM, res.mask)
    assert mp.geodesic_distance(est.pose.rotation(), gt.rotation()) < math.pi / 18
    assert est.converged and math.isfinite(est.final_nll)


def test_optimize_never_worse_than_best_init(rng):
    gen, nm = scene(rng)
    opts = mp.OptimOptions(max_iterations=40)
    for _ in range(4):
        gt = synth.sample_pose(mp.SynthConfig(), rng)
        res = synth.render_feature_map(gen, gt, CAM, rng, noise=0.2)
        cands = mp.init_candidates(res.fmap, nm, CAM, res.mask, opts.grid,
                                   opts.candidates, soft=opts.soft)
        best_init = min(mp.nll(res.fmap, nm, p, CAM, res.mask) for p, _ in cands)
        est = mp.optimize_pose(res.fmap, nm, CAM, res.mask, opts)
        assert est.final_nll <= best_init + 1e-9


def test_optimize_all_candidates_failing_raises(rng):
    gen, nm = scene(rng, channels=8)
    h, w = CAM.image_size
    data = np.full((h, w, 8), np.nan, dtype=np.float32)
    mask = np.ones((h, w), dtype=bool)
    with pytest.raises(DataError, match="every candidate"):
        mp.optimize_pose(mp.FeatureMap(data), nm, CAM, mp.ForegroundMask(mask))


# ---------------------------------------------------------------------------
# contrastive training
# ---------------------------------------------------------------------------


def _matched_setup(rng, momentum=0.9):
    gen, nm = scene(rng)
    nm = mp.NeuralMesh(nm.mesh, nm.vertex_features, nm.background_feature,
                       momentum=momentum)
    pose = mp.Pose(1.0, 0.15, 0.0, 5.0)
    res = synth.render_feature_map(gen, pose, CAM, rng, noise=0.0)
    rec = mp.rasterize_visibility(nm.mesh, pose, CAM)
    fg = np.argwhere(res.mask.bits)
    verts = rec.pixel_vertex[fg[:, 0], fg[:, 1]]
    corr = mp.CorrespondenceSet(
        pixels=fg.astype(np.int32), vertices=verts.astype(np.int32),
        scores=np.ones(len(fg), dtype=np.float32),
        views=np.zeros(len(fg), dtype=np.int32), pose_label=0, refined=True,
    )
    return nm, res, corr


def test_contrastive_fixed_point(rng):
    # pixel features equal their matched vertex features: momentum average
    # toward themselves = no movement, and the loss is the analytic softmax CE
    nm, res, corr = _matched_setup(rng)
    before = nm.vertex_features.copy()
    loss = mp.contrastive_step(nm, res.fmap, corr, res.mask)
    moved = np.abs(nm.vertex_features - before).max()
    assert moved < 1e-5
    # analytic loss for one match, same for all in expectation terms
    feats = res.fmap.data[corr.pixels[:, 0], corr.pixels[:, 1]].astype(np.float64)
    allf = np.vstack([before, nm.background_feature[None]]).astype(np.float64)
    logits = feats @ allf.T / nm.temperature
    ce = (np.log(np.exp(logits - logits.max(1, keepdims=True)).sum(1))
          + logits.max(1) - logits[np.arange(len(feats)), corr.vertices])
    assert abs(loss - ce.mean()) < 1e-9


def test_contrastive_momentum_one_freezes_features(rng):
    nm, res, corr = _matched_setup(rng, momentum=1.0)
    noise = rng.standard_normal(res.fmap.data.shape).astype(np.float32)
    data = res.fmap.data + 0.3 * noise
    data /= np.linalg.norm(data, axis=2, keepdims=True)
    before_v = nm.vertex_features.copy()
    before_b = nm.background_feature.copy()
    mp.contrastive_step(nm, mp.FeatureMap(data), corr, res.mask)
    assert np.array_equal(nm.vertex_features, before_v)
    assert np.array_equal(nm.background_feature, before_b)


def test_contrastive_loss_strictly_decreases_on_copies(rng):
    gen, gt_nm = scene(rng)
    pose = mp.Pose(1.0, 0.15, 0.0, 5.0)
    res = synth.render_feature_map(gen, pose, CAM, rng, noise=0.0)
    poses = mp.PoseGrid(n_azimuths=12, elevations=(0.0, 0.3)).poses()
    maps = [synth.paint_vertex_map(gen, p, CAM, appearance="template")[0] for p in poses]
    bank = mp.build_view_bank(gt_nm.mesh, maps, poses, CAM)
    nm = mp.NeuralMesh.init_random(gt_nm.mesh, 64, np.random.default_rng(3))
    corr = mp.generate(res.fmap, res.mask, bank)
    losses = [mp.contrastive_step(nm, res.fmap, corr, res.mask) for _ in range(12)]
    assert all(b < a for a, b in zip(losses, losses[1:]))
    nm.check_norms(tol=1e-6)


def test_contrastive_requires_refined_nonempty(rng):
    nm, res, corr = _matched_setup(rng)
    raw = mp.CorrespondenceSet(pixels=corr.pixels, vertices=corr.vertices,
                               scores=corr.scores, views=corr.views)
    with pytest.raises(ValidationError):
        mp.contrastive_step(nm, res.fmap, raw, res.mask)
    empty = mp.CorrespondenceSet(
        pixels=np.zeros((0, 2), dtype=np.int32), vertices=np.zeros(0, dtype=np.int32),
        scores=np.zeros(0, dtype=np.float32), views=np.zeros(0, dtype=np.int32),
        pose_label=0, refined=True)
    with pytest.raises(DataError):
        mp.contrastive_step(nm, res.fmap, empty, res.mask)


# ---------------------------------------------------------------------------
# train loop
# ---------------------------------------------------------------------------


def _tiny_corpus(tmp_path, n=4, seed=5):
    cfg = mp.SynthConfig(n_images=n, seed=seed, channels=32, subdivisions=5,
                         noise=0.1, view_dependence=0.3, views=12,
                         view_grid=mp.PoseGrid(n_azimuths=6, elevations=(-0.2, 0.2)))
    manifest = synth.generate_corpus(tmp_path, cfg)
    views = mp.read_manifest(tmp_path / "views_manifest.tsv")
    gt = mp.read_checkpoint(tmp_path / "gt.nmsh")
    maps = [mp.read_feature_map(e.feature_path) for e in views]
    bank = mp.build_view_bank(gt.mesh, maps, [e.pose for e in views], CAM)
    return manifest, bank, gt


def test_train_one_image_one_epoch(tmp_path):
    manifest, bank, gt = _tiny_corpus(tmp_path, n=1)
    nm = mp.NeuralMesh.init_random(gt.mesh, 32, np.random.default_rng(0))
    before = nm.vertex_features.copy()
    nm, trace, skipped = mp.train(nm, manifest, bank, epochs=1)
    assert len(trace) == 1 and skipped == 0
    assert not np.array_equal(nm.vertex_features, before)  # exactly one step applied


def test_train_deterministic_given_seed(tmp_path):
    manifest, bank, gt = _tiny_corpus(tmp_path)
    runs = []
    for _ in range(2):
        nm = mp.NeuralMesh.init_random(gt.mesh, 32, np.random.default_rng(11))
        nm, trace, _ = mp.train(nm, manifest, bank, epochs=2)
        runs.append((nm.vertex_features.copy(), nm.background_feature.copy(), trace))
    assert np.array_equal(runs[0][0], runs[1][0])
    assert np.array_equal(runs[0][1], runs[1][1])
    assert runs[0][2] == runs[1][2]


def test_train_resume_equals_uninterrupted(tmp_path):
    manifest, bank, gt = _tiny_corpus(tmp_path)
    nm_a = mp.NeuralMesh.init_random(gt.mesh, 32, np.random.default_rng(11))
    nm_a, _, _ = mp.train(nm_a, manifest, bank, epochs=4)
    nm_b = mp.NeuralMesh.init_random(gt.mesh, 32, np.random.default_rng(11))
    nm_b, _, _ = mp.train(nm_b, manifest, bank, epochs=2)
    ck = tmp_path / "mid.nmsh"
    mp.write_checkpoint(nm_b, ck)
    nm_c = mp.read_checkpoint(ck)
    nm_c, _, _ = mp.train(nm_c, manifest, bank, epochs=2)
    assert np.array_equal(nm_a.vertex_features, nm_c.vertex_features)
    assert np.array_equal(nm_a.background_feature, nm_c.background_feature)


def test_train_skips_unreadable_entries(tmp_path):
    manifest, bank, gt = _tiny_corpus(tmp_path)
    manifest.entries[1].feature_path = tmp_path / "gone.fmap"
    nm = mp.NeuralMesh.init_random(gt.mesh, 32, np.random.default_rng(0))
    nm, trace, skipped = mp.train(nm, manifest, bank, epochs=2)
    assert skipped == 2  # once per epoch
    bad = mp.CorpusManifest([manifest.entries[1]])
    with pytest.raises(DataError, match="failed"):
        mp.train(nm, bad, bank, epochs=1)


# ---------------------------------------------------------------------------
# checkpoint and estimate formats
# ---------------------------------------------------------------------------


def test_checkpoint_round_trip_byte_identity(tmp_path, rng):
    gen, nm = scene(rng, channels=24, mesh=mp.cuboid((1.2, 0.7, 0.9), 4))
    p1, p2 = tmp_path / "a.nmsh", tmp_path / "b.nmsh"
    mp.write_checkpoint(nm, p1)
    back = mp.read_checkpoint(p1)
    assert np.array_equal(back.vertex_features, nm.vertex_features)
    assert np.array_equal(back.background_feature, nm.background_feature)
    assert back.temperature == nm.temperature
    assert back.momentum == nm.momentum
    assert np.array_equal(back.mesh.vertices, nm.mesh.vertices)
    mp.write_checkpoint(back, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_errors(tmp_path):
    p = tmp_path / "bad.nmsh"
    p.write_bytes(b"WRNG" + b"\0" * 40)
    with pytest.raises(mp.BadMagicError):
        mp.read_checkpoint(p)
    gen, nm = scene(np.random.default_rng(0), channels=8, mesh=mp.cuboid((1, 1, 1), 1))
    mp.write_checkpoint(nm, p)
    blob = p.read_bytes()
    p.write_bytes(blob[:30])
    with pytest.raises(mp.TruncatedFileError):
        mp.read_checkpoint(p)


def test_pose_estimates_round_trip(tmp_path):
    ests = [
        mp.PoseEstimate(mp.Pose(0.5, 0.1, -0.05, 5.2), -1234.5, 80, True, 0),
        mp.PoseEstimate(mp.Pose(3.1, -0.4, 0.2, 4.8), -987.25, 0, False, 2),
    ]
    p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
    mp.write_pose_estimates(ests, p1)
    back = mp.read_pose_estimates(p1)
    assert len(back) == 2
    for a, b in zip(ests, back):
        assert (b.pose.azimuth, b.pose.elevation, b.pose.theta, b.pose.distance) == (
            a.pose.azimuth, a.pose.elevation, a.pose.theta, a.pose.distance)
        assert b.final_nll == a.final_nll
        assert b.converged == a.converged
    mp.write_pose_estimates(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    p1.write_text("0.5 0.1\n")
    with pytest.raises(FormatError):
        mp.read_pose_estimates(p1)


def test_contrastive_convergence_on_exact_copies(rng):
    # invariant: refined matches from an exact-copy corpus drive the learned
    # features onto their generating pixel features
    gen, gt_nm = scene(rng, channels=32, view_dependence=0.15,
                       mesh=mp.cuboid((1.6, 0.6, 0.9), 4))
    poses = mp.PoseGrid(n_azimuths=12, elevations=(0.0, 0.3)).poses()
    maps = [synth.paint_vertex_map(gen, p, CAM, appearance="template")[0] for p in poses]
    bank = mp.build_view_bank(gt_nm.mesh, maps, poses, CAM)
    v = 7
    fmap, mask, owner = synth.paint_vertex_map(gen, poses[v], CAM, appearance="template")
    corr = mp.generate(fmap, mask, bank)
    assert corr.pose_label == v
    nm = mp.NeuralMesh.init_random(gt_nm.mesh, 32, np.random.default_rng(2))
    for _ in range(50):
        mp.contrastive_step(nm, fmap, corr, mask)
    pix = fmap.data[corr.pixels[:, 0], corr.pixels[:, 1]].astype(np.float64)
    learned = nm.vertex_features[corr.vertices].astype(np.float64)
    scores = np.einsum("ij,ij->i", pix, learned)
    assert scores.mean() > 0.99
