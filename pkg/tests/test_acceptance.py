"""Acceptance suite.

Each test is one acceptance criterion, runs at its stated tolerance, and
prints a single PASS/FAIL line (visible with ``pytest -s`` or in captured
output). Criteria 1-8 exercise the core library and CLI on synthetic oracles;
criterion 9 checks the feature-extractor companion package and is skipped
when that package has not been built.
"""

import math
import subprocess
import time
from pathlib import Path

import numpy as np
import pytest

import meshpose as mp
from meshpose import synth
from meshpose.cli import main as cli_main
from oracles import raycast_visible

CAM = mp.DEFAULT_CAMERA
ROOT = Path(__file__).resolve().parent.parent


def report(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


def pose_errors(estimates, manifest):
    return np.array([
        mp.geodesic_distance(est.pose.rotation(), e.pose.rotation())
        for est, e in zip(estimates, manifest)
    ])


# ---------------------------------------------------------------------------
# criterion 1: synthetic pose recovery through the CLI, on a clock
# ---------------------------------------------------------------------------


def test_criterion_1_synthetic_pose_recovery(tmp_path):
    corpus = tmp_path / "corpus"
    est = tmp_path / "estimates.txt"
    t0 = time.monotonic()
    rc = cli_main([
        "synth", "--out", str(corpus), "--n", "200", "--seed", "20250811",
        "--channels", "64", "--subdiv", "9", "--noise", "0.1",
    ])
    assert rc == 0
    rc = cli_main([
        "infer", "--manifest", str(corpus / "manifest.tsv"),
        "--checkpoint", str(corpus / "gt.nmsh"), "--out", str(est),
        "--view-azimuths", "36", "--view-elevations=-0.349,0,0.349",
    ])
    assert rc == 0
    elapsed = time.monotonic() - t0

    mesh = mp.read_checkpoint(corpus / "gt.nmsh").mesh
    assert mesh.n_vertices >= 488
    manifest = mp.read_manifest(corpus / "manifest.tsv")
    errors = pose_errors(mp.read_pose_estimates(est), manifest)
    acc18 = mp.pose_accuracy(errors, math.pi / 18)
    acc6 = mp.pose_accuracy(errors, math.pi / 6)
    ok = acc18 >= 0.95 and acc6 >= 0.99 and elapsed < 600
    report("criterion 1 (pose recovery)", ok,
           f"acc@pi/18 {acc18:.3f} (>=0.95), acc@pi/6 {acc6:.3f} (>=0.99), "
           f"runtime {elapsed:.0f}s (<600)")


# ---------------------------------------------------------------------------
# criterion 2: analytic gradient vs central finite differences
# ---------------------------------------------------------------------------


def test_criterion_2_gradient_contract():
    rng = np.random.default_rng(22)
    h = 1e-5
    worst = 0.0
    for _ in range(100):
        extents = rng.uniform(0.6, 1.8, size=3)
        mesh = mp.cuboid(tuple(extents), int(rng.integers(3, 7)))
        gen = mp.SceneGenerator.create(mesh, int(rng.integers(16, 96)), rng,
                                       view_dependence=float(rng.uniform(0, 0.4)))
        nm = gen.neural_mesh()
        pose = mp.Pose(rng.uniform(0, 2 * math.pi), rng.uniform(-1.0, 1.0),
                       rng.uniform(-0.6, 0.6), rng.uniform(4.2, 6.5))
        res = synth.render_feature_map(gen, pose, CAM, rng,
                                       noise=float(rng.uniform(0, 0.2)))
        vis = mp.rasterize_visibility(mesh, pose, CAM).visible
        grad = mp.nll_gradient(res.fmap, nm, pose, CAM, res.mask, visible=vis)
        fd = np.zeros(4)
        for i, name in enumerate(("azimuth", "elevation", "theta", "distance")):
            kw = dict(azimuth=pose.azimuth, elevation=pose.elevation,
                      theta=pose.theta, distance=pose.distance)
            kw[name] += h
            hi = mp.nll_smooth(res.fmap, nm, mp.Pose(**kw), CAM, res.mask, visible=vis)
            kw[name] -= 2 * h
            lo = mp.nll_smooth(res.fmap, nm, mp.Pose(**kw), CAM, res.mask, visible=vis)
            fd[i] = (hi - lo) / (2 * h)
        denom = np.maximum(np.abs(fd), 1e-5 * np.abs(fd).max() + 1e-9)
        worst = max(worst, float((np.abs(grad - fd) / denom).max()))
    report("criterion 2 (gradient contract)", worst < 1e-4,
           f"max relative error {worst:.3g} over 100 triples (<1e-4)")


# ---------------------------------------------------------------------------
# criterion 3: bidirectional refinement on a mirrored-feature corpus
# ---------------------------------------------------------------------------


def test_criterion_3_bidirectional_refinement():
    rng = np.random.default_rng(33)
    mesh = mp.cuboid((1.8, 1.3, 0.25), (27, 19, 1))
    gen = mp.SceneGenerator.create(
        mesh, 64, rng, view_dependence=0.4,
        mirror=mp.MirrorSpec(eps=0.05, exclude_face_axes=(0,), observed_blend=0.42),
    )
    cam = mp.Camera(110.0, (39.5, 39.5), (80, 80))
    grid = mp.PoseGrid(n_azimuths=8, elevations=(-0.12, 0.12), distances=(4.9,))
    poses = grid.poses()
    maps = [synth.paint_vertex_map(gen, p, cam, appearance="template")[0]
            for p in poses]
    bank = mp.build_view_bank(mesh, maps, poses, cam)

    def mirrored(p):
        return mp.Pose((math.pi - p.azimuth) % (2 * math.pi), p.elevation,
                       -p.theta, p.distance)

    n_images = 200
    raw_ok = ref_ok = n_matches = votes_ok = 0
    oracle_checked = oracle_visible = 0
    for i in range(n_images):
        az = math.radians(rng.uniform(33, 57) + 180 * rng.integers(0, 2))
        el = (1 if rng.integers(0, 2) else -1) * rng.uniform(0.07, 0.17)
        gt = mp.Pose(az % (2 * math.pi), el, rng.uniform(-0.05, 0.05),
                     rng.uniform(4.6, 5.2))
        fmap, mask, owner = synth.paint_vertex_map(gen, gt, cam, rng, noise=0.08)
        raw = mp.match_raw(fmap, mask, bank)
        gtv = owner[raw.pixels[:, 0], raw.pixels[:, 1]]
        label = mp.vote_pose(raw, bank)
        ref = mp.refine(raw, label, bank, 0.25)
        n_matches += len(raw)
        raw_ok += int((raw.vertices == gtv).sum())
        ref_ok += int((ref.vertices == gtv).sum())
        voted = poses[label]
        d_true = mp.geodesic_distance(voted.rotation(), gt.rotation())
        d_mirror = mp.geodesic_distance(voted.rotation(), mirrored(gt).rotation())
        votes_ok += d_true < d_mirror
        if i % 20 == 0:  # ground-truth labels come from genuinely visible vertices
            vis = raycast_visible(mesh, gt, cam)
            oracle_checked += len(gtv)
            oracle_visible += int(vis[gtv].sum())

    raw_acc = raw_ok / n_matches
    ref_acc = ref_ok / n_matches
    vote_acc = votes_ok / n_images
    label_valid = oracle_visible / oracle_checked
    ok = raw_acc <= 0.60 and ref_acc >= 0.95 and vote_acc >= 0.98 and label_valid >= 0.99
    report("criterion 3 (bidirectional refinement)", ok,
           f"raw {raw_acc:.3f} (<=0.60), refined {ref_acc:.3f} (>=0.95), "
           f"vote {vote_acc:.3f} (>=0.98), oracle-validated labels {label_valid:.3f}")


# ---------------------------------------------------------------------------
# criteria 4 and 6 share a corpus: train without annotations, then scale
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def training_world(tmp_path_factory):
    out = tmp_path_factory.mktemp("trainworld")
    cfg = mp.SynthConfig(n_images=306, seed=44, channels=64, noise=0.1,
                         view_dependence=0.3, views=108, view_grid=mp.PoseGrid())
    manifest = synth.generate_corpus(out, cfg)
    views = mp.read_manifest(out / "views_manifest.tsv")
    gt_nm = mp.read_checkpoint(out / "gt.nmsh")
    maps = [mp.read_feature_map(e.feature_path) for e in views]
    bank = mp.build_view_bank(gt_nm.mesh, maps, [e.pose for e in views], CAM)
    train_entries = manifest.entries[:256]
    eval_manifest = mp.CorpusManifest(manifest.entries[256:306])
    return gt_nm, bank, train_entries, eval_manifest


def _eval_accuracy(nm, eval_manifest):
    estimates = []
    for e in eval_manifest:
        fmap = mp.read_feature_map(e.feature_path)
        mask = mp.read_mask(e.mask_path, fmap.height, fmap.width)
        estimates.append(mp.optimize_pose(fmap, nm, CAM, mask))
    errors = pose_errors(estimates, eval_manifest)
    return mp.pose_accuracy(errors, math.pi / 6)


def test_criterion_4_training_without_annotations(training_world):
    gt_nm, bank, train_entries, eval_manifest = training_world
    nm = mp.NeuralMesh.init_random(gt_nm.mesh, 64, np.random.default_rng(4))
    corpus = mp.CorpusManifest(train_entries[:100])
    nm, trace, skipped = mp.train(nm, corpus, bank, epochs=3)
    assert skipped == 0 and trace[-1] < trace[0]
    acc_trained = _eval_accuracy(nm, eval_manifest)
    acc_gt = _eval_accuracy(gt_nm, eval_manifest)
    ok = acc_trained >= 0.90 and acc_trained >= acc_gt - 0.05
    report("criterion 4 (training without annotations)", ok,
           f"held-out acc@pi/6 {acc_trained:.3f} (>=0.90), "
           f"ground-truth features {acc_gt:.3f} (gap <= 0.05)")


def test_criterion_6_scaling_with_corpus_size(training_world):
    gt_nm, bank, train_entries, eval_manifest = training_world
    accs = {}
    for size in (64, 128, 256):
        nm = mp.NeuralMesh.init_random(gt_nm.mesh, 64, np.random.default_rng(6))
        nm, _, _ = mp.train(nm, mp.CorpusManifest(train_entries[:size]), bank,
                            epochs=3)
        accs[size] = _eval_accuracy(nm, eval_manifest)
    table = ", ".join(f"{k}: {v:.3f}" for k, v in accs.items())
    ok = accs[256] >= accs[64] - 0.01 - 1e-9
    report("criterion 6 (scaling with corpus size)", ok,
           f"acc@pi/6 by size {{{table}}}; 256 >= 64 - 1pt")


# ---------------------------------------------------------------------------
# criterion 5: occlusion robustness with external masks
# ---------------------------------------------------------------------------


def test_criterion_5_occlusion_robustness():
    rng = np.random.default_rng(55)
    mesh = mp.cuboid()
    gen = mp.SceneGenerator.create(mesh, 64, rng)
    nm = gen.neural_mesh()
    scfg = mp.SynthConfig(noise=0.1)
    n = 40
    clutter = 0.15

    def run(occlusion, mode, seed):
        r = np.random.default_rng(seed)
        errors = []
        for _ in range(n):
            pose = synth.sample_pose(scfg, r)
            res = synth.render_feature_map(gen, pose, CAM, r, noise=0.1,
                                           occlusion=occlusion, clutter=clutter)
            if mode == "external":
                mask = res.mask
            else:
                mask = mp.activation_mask(res.fmap, nm.vertex_features,
                                          nm.background_feature, 0.5)
            est = mp.optimize_pose(res.fmap, nm, CAM, mask)
            errors.append(mp.geodesic_distance(est.pose.rotation(), pose.rotation()))
        return mp.pose_accuracy(np.array(errors), math.pi / 6)

    clean = run(0.0, "external", 500)
    occluded = run(0.3, "external", 530)
    drop_ok = occluded > clean - 0.05
    order_ok = True
    pairs = {}
    for level, seed in ((0.1, 510), (0.2, 520), (0.3, 530)):
        ext = run(level, "external", seed)
        act = run(level, "activation", seed)
        pairs[level] = (ext, act)
        order_ok &= ext >= act
    detail = ", ".join(f"{lvl}: masked {e:.3f} vs unmasked {a:.3f}"
                       for lvl, (e, a) in pairs.items())
    report("criterion 5 (occlusion robustness)", drop_ok and order_ok,
           f"clean {clean:.3f}, occluded-0.3 {occluded:.3f} (drop <5pt); {detail}")


# ---------------------------------------------------------------------------
# criterion 7: metric arithmetic
# ---------------------------------------------------------------------------


def test_criterion_7_metric_arithmetic():
    exact = (
        mp.pose_accuracy([0.0, 0.3, 1.0], math.pi / 6) == pytest.approx(2 / 3)
        and mp.pose_accuracy([0.0, 0.0, 0.0], math.pi / 6) == 1.0
        and mp.pose_accuracy([math.pi / 6], math.pi / 6) == 0.0
        and mp.median_error([0.1, 0.2, 0.9]) == pytest.approx(0.2)
        and mp.median_error([0.1, 0.3]) == pytest.approx(0.1)
        and mp.median_error([0.42]) == pytest.approx(0.42)
        and mp.pck([[0.0, 0.0]], [[9.0, 0.0]], (100, 50), 0.1).correct == 1
        and mp.pck([[0.0, 0.0]], [[11.0, 0.0]], (100, 50), 0.1).correct == 0
    )
    rng = np.random.default_rng(77)
    monotone = True
    for _ in range(1000):
        errors = rng.uniform(0, math.pi, rng.integers(1, 60))
        t1, t2 = sorted(rng.uniform(0.01, math.pi, 2))
        monotone &= mp.pose_accuracy(errors, t1) <= mp.pose_accuracy(errors, t2)
    report("criterion 7 (metric arithmetic)", exact and monotone,
           f"examples exact: {exact}, monotone on 1000 random lists: {monotone}")


# ---------------------------------------------------------------------------
# criterion 8: byte-identical round trips for every format
# ---------------------------------------------------------------------------


def test_criterion_8_format_round_trips(tmp_path):
    rng = np.random.default_rng(88)
    failures = 0
    for i in range(100):
        # feature map
        h, w, c = rng.integers(1, 9), rng.integers(1, 9), rng.integers(1, 17)
        data = rng.standard_normal((h, w, c))
        data /= np.linalg.norm(data, axis=2, keepdims=True)
        fmap = mp.FeatureMap(data.astype(np.float32))
        p1, p2 = tmp_path / "a.fmap", tmp_path / "b.fmap"
        mp.write_feature_map(fmap, p1)
        mp.write_feature_map(mp.read_feature_map(p1), p2)
        failures += p1.read_bytes() != p2.read_bytes()

        # mask
        bits = rng.random((h, w)) > 0.5
        m1, m2 = tmp_path / "a.msk", tmp_path / "b.msk"
        mp.write_mask(mp.ForegroundMask(bits), m1)
        mp.write_mask(mp.read_mask(m1), m2)
        failures += m1.read_bytes() != m2.read_bytes()

        # checkpoint
        mesh = mp.cuboid(tuple(rng.uniform(0.5, 2.0, 3)), int(rng.integers(1, 3)))
        gen = mp.SceneGenerator.create(mesh, int(rng.integers(4, 12)), rng)
        nm = gen.neural_mesh(temperature=float(rng.uniform(0.03, 0.2)),
                             momentum=float(rng.uniform(0.5, 0.99)))
        c1, c2 = tmp_path / "a.nmsh", tmp_path / "b.nmsh"
        mp.write_checkpoint(nm, c1)
        mp.write_checkpoint(mp.read_checkpoint(c1), c2)
        failures += c1.read_bytes() != c2.read_bytes()

        # correspondences
        m = int(rng.integers(1, 40))
        corr = mp.CorrespondenceSet(
            pixels=rng.integers(0, 32, (m, 2)).astype(np.int32),
            vertices=rng.integers(0, 488, m).astype(np.int32),
            scores=(rng.uniform(-1, 1, m)).astype(np.float32),
            views=rng.integers(0, 108, m).astype(np.int32),
            pose_label=int(rng.integers(0, 108)),
            refined=True,
        )
        r1, r2 = tmp_path / "a.corr", tmp_path / "b.corr"
        mp.write_correspondences(corr, r1)
        mp.write_correspondences(mp.read_correspondences(r1), r2)
        failures += r1.read_bytes() != r2.read_bytes()
    report("criterion 8 (format round trips)", failures == 0,
           f"{failures} mismatches over 100 random instances x 4 formats")


# ---------------------------------------------------------------------------
# criterion 9 (secondary): extractor outputs pass primary-side validation
# ---------------------------------------------------------------------------

FRONTEND = ROOT / "frontend"


@pytest.mark.skipif(not (FRONTEND / "dist" / "cli.js").exists(),
                    reason="extractor package not built")
def test_criterion_9_extractor_contract(tmp_path):
    from PIL import Image

    rng = np.random.default_rng(99)
    img_dir = tmp_path / "images"
    out_dir = tmp_path / "features"
    img_dir.mkdir()
    stride = 14
    sizes = [(int(rng.integers(32, 320)), int(rng.integers(32, 320)))
             for _ in range(20)]
    for i, (w, h) in enumerate(sizes):
        arr = rng.integers(0, 255, (h, w, 3), dtype=np.uint8)
        Image.fromarray(arr, "RGB").save(img_dir / f"img{i:02d}.png")

    proc = subprocess.run(
        ["node", str(FRONTEND / "dist" / "cli.js"), "extract",
         "--images", str(img_dir), "--out", str(out_dir),
         "--stride", str(stride), "--masks"],
        capture_output=True, text=True, timeout=600,
    )
    assert proc.returncode == 0, proc.stderr

    bad_norm = 0.0
    for i, (w, h) in enumerate(sizes):
        fmap = mp.read_feature_map(out_dir / f"img{i:02d}.fmap")
        gh, gw = math.ceil(h / stride), math.ceil(w / stride)
        assert (fmap.height, fmap.width) == (gh, gw), f"img{i:02d} shape"
        bad_norm = max(bad_norm, fmap.max_norm_correction)
        mask = mp.read_mask(out_dir / f"img{i:02d}.msk", fmap.height, fmap.width)
        assert mask.bits.shape == (gh, gw)
    report("criterion 9 (extractor contract)", bad_norm < 1e-4,
           f"20 sizes validated, max norm correction {bad_norm:.2g} (<1e-4)")
