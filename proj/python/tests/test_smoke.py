import math

import numpy as np
import pytest

import cifpc


def small_config(seed=0):
    c = cifpc.ModelConfig()
    c.embedding_dim = 4
    c.hidden = 16
    c.encoder_point_widths = [16, 32]
    c.encoder_head_widths = [16]
    c.seed = seed
    return c


def test_synth_and_normalize():
    clouds = cifpc.synth("lshape", 3, n_points=100, seed=1)
    assert len(clouds) == 3
    assert clouds[0].shape == (100, 3)
    n = cifpc.normalize(clouds[0])
    assert np.allclose(n.mean(axis=0), 0.0, atol=1e-12)
    assert np.isclose(np.linalg.norm(n, axis=1).max(), 1.0)
    again = cifpc.synth("lshape", 3, n_points=100, seed=1)
    assert np.array_equal(clouds[2], again[2])


def test_cloud_file_round_trip(tmp_path):
    c = np.random.default_rng(0).normal(size=(50, 3))
    cifpc.save_cloud(c, tmp_path / "c.xyz")
    assert np.array_equal(cifpc.load_cloud(tmp_path / "c.xyz"), c)
    with pytest.raises(cifpc.DataError):
        cifpc.load_cloud(tmp_path / "missing.xyz")


def test_metrics_against_numpy():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(20, 3)), rng.normal(size=(30, 3))
    d = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    assert math.isclose(cifpc.chamfer(a, b), d.min(1).mean() + d.min(0).mean(), rel_tol=1e-12)
    assert cifpc.emd(a, a) == 0.0
    with pytest.raises(ValueError):
        cifpc.emd(a, b)
    with pytest.raises(ValueError):
        cifpc.chamfer(np.zeros((4, 2)), a)

    left = [rng.uniform([-0.9, -1, -1], [-0.1, 1, 1], size=(40, 3)) for _ in range(3)]
    right = [rng.uniform([0.1, -1, -1], [0.9, 1, 1], size=(40, 3)) for _ in range(3)]
    assert abs(cifpc.jsd(left, right) - math.log(2)) < 1e-10
    report = cifpc.evaluate(left, left)
    assert report["mmd_cd"] == 0.0 and report["cov_cd"] == 1.0


def test_cma_es_sphere():
    r = cifpc.cma_es(lambda x: sum(v * v for v in x), [1.0, -2.0, 0.5], sigma0=1.0, max_generations=200,
                     tol_fun=0, tol_x=0)
    assert r["value"] < 1e-8
    best = r["best_so_far"]
    assert all(b <= a for a, b in zip(best, best[1:]))


def test_gradcheck():
    assert cifpc.gradcheck(1) < 1e-4


def test_train_sample_save_load(tmp_path):
    data = [cifpc.normalize(c) for c in cifpc.synth("lshape", 6, n_points=96, seed=2)]
    tc = cifpc.TrainConfig()
    tc.epochs = 3
    tc.clouds_per_batch = 3
    tc.points_f = 48
    tc.points_h = 48
    tc.lr0 = 1e-3
    model, log = cifpc.train(data, small_config(), tc)
    assert [e["epoch"] for e in log] == [1, 2, 3]
    assert all(math.isfinite(e["loss"]) for e in log)

    s = model.sample(n_points=128, temperature=1.0, seed=7)
    assert s.shape == (128, 3) and np.isfinite(s).all()
    assert np.array_equal(s, model.sample(n_points=128, temperature=1.0, seed=7))

    model.save(tmp_path / "m.bin")
    back = cifpc.Model.load(tmp_path / "m.bin")
    assert back.precision == "f32"
    assert np.array_equal(back.sample(n_points=128, temperature=1.0, seed=7), s)
    with pytest.raises(cifpc.CheckpointError):
        (tmp_path / "bad.bin").write_bytes(b"nonsense")
        cifpc.Model.load(tmp_path / "bad.bin")

    ranked = model.rank(data)
    assert sorted(i for i, _ in ranked) == list(range(6))
    assert all(a[1] >= b[1] for a, b in zip(ranked, ranked[1:]))

    r = model.reconstruct(data[0], n_points=64, seed=1)
    assert r.shape == (64, 3)
    path = model.interpolate(data[0], data[1], steps=3, n_points=32)
    assert len(path) == 3


def test_alignment_does_not_worsen():
    model = cifpc.Model(small_config(3), precision="f64")
    cloud = cifpc.normalize(cifpc.synth("lshape", 1, n_points=64, seed=4)[0])
    r = model.align(cloud, restarts=2, max_generations=20, seed=1)
    assert r["nll"] <= r["initial_nll"]
    assert np.allclose(r["aligned"], cifpc.rotate(cloud, r["angles"]))
    rot = np.array(r["rotation"])
    assert np.allclose(rot @ rot.T, np.eye(3), atol=1e-12)
    assert math.isclose(model.pose_nll(cloud, [0.0, 0.0, 0.0]), r["initial_nll"], rel_tol=1e-12)
