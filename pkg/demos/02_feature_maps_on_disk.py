"""Walkthrough: the binary feature-map and mask formats.

Writes a feature map and mask, reads them back byte-identically, and shows
the load-time unit normalization plus the activation-mask fallback.

Run:  python demos/02_feature_maps_on_disk.py
"""

import tempfile
from pathlib import Path

import numpy as np

import meshpose as mp


def main():
    rng = np.random.default_rng(0)
    tmp = Path(tempfile.mkdtemp())

    data = rng.standard_normal((16, 16, 32))
    data /= np.linalg.norm(data, axis=2, keepdims=True)
    fmap = mp.FeatureMap(data.astype(np.float32))
    path = tmp / "demo.fmap"
    mp.write_feature_map(fmap, path)
    back = mp.read_feature_map(path)
    second = tmp / "again.fmap"
    mp.write_feature_map(back, second)
    print(f"wrote {path.stat().st_size} bytes; "
          f"write(read(x)) byte-identical: {path.read_bytes() == second.read_bytes()}")

    # a producer that forgot to normalize: fixed at load, and reported
    raw = (3.0 * rng.standard_normal((4, 4, 8))).astype(np.float32)
    sloppy = tmp / "sloppy.fmap"
    header = b"FMAP" + (1).to_bytes(2, "little") + (0).to_bytes(2, "little")
    header += (4).to_bytes(4, "little") * 2 + (8).to_bytes(4, "little")
    sloppy.write_bytes(header + raw.tobytes())
    fixed = mp.read_feature_map(sloppy)
    print(f"normalization corrected {fixed.norm_corrections} cells "
          f"(max deviation {fixed.max_norm_correction:.2f})")

    mask = mp.ForegroundMask(rng.random((16, 16)) > 0.6)
    mpath = tmp / "demo.msk"
    mp.write_mask(mask, mpath)
    print(f"mask round trip: "
          f"{np.array_equal(mp.read_mask(mpath, 16, 16).bits, mask.bits)}")

    # activation-mask fallback: vertex-feature cells light up, background stays off
    verts = rng.standard_normal((20, 32))
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    bg = rng.standard_normal(32)
    bg /= np.linalg.norm(bg)
    grid = np.empty((8, 8, 32), dtype=np.float32)
    for r in range(8):
        for c in range(8):
            grid[r, c] = verts[(r * 8 + c) % 20] if (r + c) % 3 == 0 else bg
    act = mp.activation_mask(mp.FeatureMap(grid), verts.astype(np.float32),
                             bg.astype(np.float32), threshold=0.5)
    print("activation mask:")
    for row in act.bits:
        print("  " + "".join("#" if b else "." for b in row))


if __name__ == "__main__":
    main()
