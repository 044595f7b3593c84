"""Smoke tests for the Python bindings: tiny but end-to-end."""

import math

import numpy as np
import pytest

import sfrecon


def test_sample_and_normalize():
    pts = sfrecon.sample_synthetic("sphere:0.5", 400, sigma=0.0, seed=3)
    assert pts.shape == (400, 3)
    radii = np.linalg.norm(pts, axis=1)
    assert np.allclose(radii, 0.5, atol=1e-12)

    normalized, offset, scale = sfrecon.normalize_to_unit_sphere(pts)
    assert np.linalg.norm(normalized, axis=1).max() == pytest.approx(1.0)
    assert scale == pytest.approx(2.0, rel=0.05)
    assert np.allclose(normalized / scale + offset, pts, atol=1e-12)


def test_fps_and_distances():
    pts = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])
    picks = sfrecon.farthest_point_sampling(pts, 2)
    assert picks == [0, 2]

    d = sfrecon.nearest_distances(np.array([[0.0, 0, 0]]), np.array([[3.0, 4, 0]]))
    assert d[0] == pytest.approx(5.0)


def test_fit_sphere():
    rng = np.random.default_rng(5)
    dirs = rng.normal(size=(200, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = np.array([0.3, -0.2, 0.5]) + 0.7 * dirs
    center, radius = sfrecon.fit_sphere(pts)
    assert np.allclose(center, [0.3, -0.2, 0.5], atol=1e-9)
    assert radius == pytest.approx(0.7, abs=1e-9)


def test_point_io_roundtrip(tmp_path):
    pts = sfrecon.sample_synthetic("torus:1,0.25", 100, seed=1)
    path = str(tmp_path / "cloud.xyz")
    sfrecon.save_points(pts, path)
    back = sfrecon.load_points(path)
    assert np.array_equal(pts, back)


def test_training_config_overrides():
    cfg = sfrecon.TrainingConfig.desk()
    assert cfg.lambda_volume == pytest.approx(3e-4)
    assert cfg.lambda_placing == 1.0
    cfg.override("iterations=7")
    assert cfg.iterations == 7
    with pytest.raises(sfrecon.SfreconError):
        cfg.override("warp_speed=9")

    paper = sfrecon.TrainingConfig.paper()
    assert paper.iterations == 40000
    assert paper.decay_iters == [20000, 30000, 35000, 38000]


def test_micro_pipeline(tmp_path):
    pts = sfrecon.sample_synthetic("sphere:0.5", 400, seed=11)

    cfg = sfrecon.TrainingConfig.desk()
    cfg.n_subfields = 6
    cfg.widths = [16, 16]
    cfg.latent_dim = 4
    cfg.iterations = 20
    cfg.decay_iters = []
    cfg.batch_points = 4
    cfg.per_point_samples = 2
    cfg.knn_k = 8
    cfg.seed = 4

    events = []
    model = sfrecon.train(pts, cfg, progress=lambda it, total, modeling: events.append(it))
    assert events, "progress sink never fired"
    assert model.n_subfields == 6

    signs = sfrecon.assign_signs(model, edge_samples=32, seed=1)
    assert set(signs) <= {-1, 1}

    vertices, faces = sfrecon.extract_mesh(model, resolution=24)
    assert vertices.shape[1] == 3
    assert faces.shape[1] == 3
    assert len(vertices) > 0

    path = str(tmp_path / "model.sfm")
    model.save(path)
    back = sfrecon.FieldModel.load(path)
    q = np.array([[0.0, 0.0, 0.0], [2.0, 2.0, 2.0]])
    assert np.array_equal(model.global_sdf(q), back.global_sdf(q))

    mesh_path = str(tmp_path / "mesh.obj")
    sfrecon.export_mesh(vertices, faces, mesh_path)
    v2, f2 = sfrecon.load_mesh(mesh_path)
    assert np.array_equal(vertices, v2)
    assert np.array_equal(faces, f2)


def test_metrics():
    a = sfrecon.sample_synthetic("sphere:1", 2000, seed=1)
    b = sfrecon.sample_synthetic("sphere:1", 2000, seed=2)
    cd = sfrecon.chamfer_distance(a, b)
    assert 0 < cd < 0.2
    assert sfrecon.f_score(a, a, 0.005) == 1.0
    assert sfrecon.f_score(a, b, 1.0) == 1.0

    square_v = np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
    square_f = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    p, n = sfrecon.sample_mesh_surface(square_v, square_f, 500, seed=3)
    assert np.allclose(np.abs(n[:, 2]), 1.0)
    assert sfrecon.normal_consistency(p, n, p, n) == pytest.approx(1.0)

    report = sfrecon.evaluate_meshes(square_v, square_f, square_v, square_f,
                                     threshold=0.05, samples=2000, seed=5)
    assert report["nc"] == pytest.approx(1.0)
    assert report["f"] >= 0.99
    assert math.isfinite(report["cd"])
