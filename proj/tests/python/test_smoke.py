"""End-to-end smoke tests for the python module."""

import numpy as np
import pytest

import gaussunmix as gu


@pytest.fixture(scope="module")
def scene():
    cfg = gu.SynthConfig()
    cfg.width = 12
    cfg.height = 12
    cfg.sources = 3
    cfg.tile = 4
    cfg.superpixel = 3
    cfg.pure_tile_fraction = 0.3
    cfg.smoothing_passes = 1
    cfg.seed = 7
    abundances = gu.generate_abundances(cfg)

    bands = 20
    x = np.linspace(0.0, 1.0, bands)
    endmembers = np.stack(
        [0.15 + 0.8 * np.exp(-(((x - (k + 0.5) / 3) / 0.18) ** 2)) for k in range(3)],
        axis=1,
    )
    spectra = gu.mix_lmm(endmembers, abundances)
    cube = gu.cube_from_matrix(spectra, 12, 12)
    return cube, abundances, endmembers


def test_cube_round_trip(tmp_path):
    arr = np.random.default_rng(0).random((5, 4, 6)).astype(np.float32).astype(float)
    cube = gu.HsiCube(arr)
    assert cube.width == 4 and cube.height == 5 and cube.bands == 6
    np.testing.assert_array_equal(cube.to_array(), arr)

    path = str(tmp_path / "cube.hsc")
    gu.save_cube(cube, path)
    np.testing.assert_array_equal(gu.load_cube(path).to_array(), arr)


def test_negative_reflectance_rejected():
    arr = np.full((2, 2, 3), -1.0)
    with pytest.raises(ValueError):
        gu.HsiCube(arr)


def test_neighborhoods_and_matrix_view(scene):
    cube, _, _ = scene
    y = cube.to_matrix()
    assert y.shape == (20, 144)
    nbhd = gu.build_neighborhood_matrix(cube)
    assert nbhd.shape == (8 * 20, 144)


def test_kmeans_pgt(scene):
    cube, _, _ = scene
    result = gu.kmeans(cube.to_matrix(), 3, seed=1)
    assert len(result.labels) == 144
    assert result.inertia >= 0
    assert all(b <= a + 1e-9 for a, b in zip(result.inertia_history, result.inertia_history[1:]))
    pgt = gu.one_hot_pseudo_gt(result.labels, 3)
    np.testing.assert_allclose(pgt.sum(axis=0), 1.0)


def test_training_pipeline(scene):
    cube, abundances, endmembers = scene
    model = gu.build_model(20, 3, seed=3)
    pgt = gu.one_hot_pseudo_gt(gu.kmeans(cube.to_matrix(), 3, seed=3).labels, 3)

    report = gu.train_gauss(model, cube, pgt, epochs_per_stage=3, seed=3)
    assert [s["name"] for s in report["stages"]] == ["an", "un", "mn"]
    assert all(len(s["losses"]) == 3 for s in report["stages"])
    assert report["max_asc_error"] <= 1e-9
    assert model.pretrained

    est = model.estimate_abundances(cube)
    np.testing.assert_allclose(est.sum(axis=0), 1.0, atol=1e-9)
    ext = model.extract_endmembers()
    assert ext.shape == (20, 3)
    assert ext.min() > 0

    blind = gu.train_blind(model, cube, epochs_per_stage=2, seed=3)
    assert [s["name"] for s in blind["stages"]] == ["blind_encoder", "blind_decoder"]

    prime = gu.train_prime(model, cube, abundances, epochs_per_stage=2, seed=3)
    assert [s["name"] for s in prime["stages"]] == ["un", "mn"]

    scores = gu.evaluate(abundances, est, endmembers, ext)
    assert set(scores) >= {"armse", "aaad", "aaid", "asad", "asid"}
    assert scores["armse"] >= 0


def test_untrained_variant_rejected(scene):
    cube, _, _ = scene
    fresh = gu.build_model(20, 3, seed=9)
    with pytest.raises(ValueError):
        gu.train_blind(fresh, cube, epochs_per_stage=1)


def test_checkpoint_round_trip(tmp_path, scene):
    cube, _, _ = scene
    model = gu.build_model(20, 3, seed=5)
    model.save(str(tmp_path / "ckpt"))
    loaded = gu.load_model(str(tmp_path / "ckpt"))
    np.testing.assert_array_equal(
        loaded.estimate_abundances(cube), model.estimate_abundances(cube)
    )


def test_losses_and_softmax():
    rng = np.random.default_rng(4)
    a = rng.random((5, 3)) + 0.05
    assert gu.loss_smooth(a, a) == 0
    assert gu.loss_mse(a, a) == 0
    assert gu.loss_psid(a, a) == pytest.approx(0, abs=1e-12)
    onehot = np.eye(3)
    assert gu.loss_ce(onehot, onehot) == pytest.approx(0, abs=1e-4)
    p = gu.softmax(np.array([0.0, 0.0, 0.0]))
    np.testing.assert_allclose(p, 1 / 3)


def test_spectrum_resampling():
    wl = [400.0, 450.0, 500.0, 550.0, 600.0]
    refl = [0.2, 0.4, 0.3, 0.5, 0.4]
    at_knots = gu.resample_spectrum(wl, refl, wl)
    np.testing.assert_allclose(at_knots, refl, atol=1e-12)
    with pytest.raises(ValueError):
        gu.resample_spectrum(wl, refl, [399.0])
