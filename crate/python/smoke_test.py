"""Smoke test for the curvemark_py extension module.

Build and run from the repository root:

    cargo build --release -p curvemark-py --features extension-module
    cp target/release/libcurvemark_py.so python/curvemark_py.so
    python3 python/smoke_test.py
"""

import os
import sys
import tempfile

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import curvemark_py as cm  # noqa: E402


def disc_image(n, radius, seed):
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:n, 0:n] - n / 2
    img = np.where(xx**2 + yy**2 < radius**2, 0.7, 0.3)
    img += 0.1 * np.sin(xx / (3 + seed)) * np.cos(yy / 5)
    img += rng.normal(0, 0.02, img.shape)
    return np.clip(img, 0.0, 1.0)


def main():
    geometry = cm.Geometry(512, 512)
    dims = [geometry.wedge_dims(5, w) for w in (2, 4, 5, 8)]
    print("wedge dims", dims)

    x = np.random.default_rng(0).random((256, 256))
    coeffs = cm.fdct(x)
    back = cm.ifdct(coeffs, cm.Geometry(256, 256))
    err = np.linalg.norm(back - x) / np.linalg.norm(x)
    assert err < 1e-9, err

    features = []
    for seed, (rows, cols) in enumerate(dims):
        bio = cm.GrayImage(disc_image(cols, 20 + 5 * seed, seed))
        f = cm.Features.from_biometric(bio, rows)
        assert f.shape == (rows, cols)
        assert np.abs(f.values()).max() <= 1.0
        features.append(f)

    host = cm.GrayImage(0.5 + 0.3 * disc_image(512, 150, 9) - 0.15)
    marked, record = cm.embed(host, features, gain=0.01)
    print("psnr", cm.psnr(host, marked), "guarded", record.guarded_fraction)

    recovered = cm.extract(marked, host, record)
    report = cm.authenticate(features, recovered)
    print(report, report.scores)

    attacked = cm.attack(marked, "median:side=3")
    report = cm.authenticate(features, cm.extract(attacked, host, record))
    assert not report.authentic

    zeros = cm.extract(host, host, record)
    assert all(np.all(z.values() == 0.0) for z in zeros)

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "marked.npy")
        marked.save(path)
        assert np.array_equal(cm.GrayImage.load(path).pixels(), marked.pixels())
        feature_paths = []
        for i, f in enumerate(features):
            p = os.path.join(tmp, f"f{i}.cmf")
            f.save(p)
            feature_paths.append(p)
        sidecar = os.path.join(tmp, "marked.json")
        record.save_sidecar(sidecar, feature_paths)
        assert cm.EmbedRecord.load_sidecar(sidecar).wedges == record.wedges

    assert cm.ssim(x, x) == 1.0
    print("ok")


if __name__ == "__main__":
    main()
