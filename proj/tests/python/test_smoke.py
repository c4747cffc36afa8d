import math

import numpy as np
import pytest

import csm


def test_star_scores_and_reverse_index():
    star = csm.Structure("star", [6])
    assert star.neighbors([0]) == []
    assert star.neighbors([3]) == [[0]]
    mass = np.array([0.5, 0.1, 0.1, 0.1, 0.1, 0.1])
    assert csm.concrete_score(mass, star, [2]) == pytest.approx([4.0])
    assert sorted(star.reverse_entries([0])) == [([i], 0) for i in range(1, 6)]
    assert star.is_weakly_connected()


def test_grid_corner_and_cycle_wrap():
    assert csm.Structure("grid", [2, 2]).neighbors([0, 0]) == [[1, 0], [0, 1]]
    assert csm.Structure("cycle", [16]).neighbors([15]) == [[0]]
    assert csm.Structure("grid", [4, 4], "wrap").degree([0, 0]) == 4


def test_reconstruction_round_trip():
    structure = csm.Structure("complete", [2])
    mass = np.array([0.25, 0.75])
    rebuilt, residual = csm.reconstruct(lambda x: csm.concrete_score(mass, structure, x), structure)
    assert np.max(np.abs(rebuilt - mass)) < 1e-12
    assert residual < 1e-12


def test_disconnected_structure_raises():
    two = csm.Structure.from_edges([4], [([0], [1]), ([1], [0]), ([2], [3]), ([3], [2])])
    assert not two.is_weakly_connected()
    with pytest.raises(csm.Disconnected):
        csm.reconstruct(lambda x: [0.0] * two.degree(x), two)
    with pytest.raises(csm.Error):
        csm.Structure("grid", [3]).neighbors([5])


def test_divergences():
    assert csm.kl_and_tv([1.0, 0.0], [0.5, 0.5])[1] == pytest.approx(0.5)
    assert csm.kl_and_tv([0.5, 0.5], [0.25, 0.75])[1] == pytest.approx(0.25)


def test_chain_matches_softmax():
    samples, truth = csm.gen_1d_toy(10, seed=1)
    assert samples.shape == (10, 1)
    logits = np.log(truth)
    ring = csm.Structure("grid", [16], "wrap")
    xs, rate = csm.run_chain(logits, ring, [0], 60000, burn_in=5000, seed=2)
    hist = np.bincount(xs[:, 0], minlength=16) / len(xs)
    assert 0.5 * np.abs(hist - truth).sum() < 0.03
    assert 0.0 < rate <= 1.0


def test_denoising_helpers():
    assert csm.triangular_pdf([0.5]) == pytest.approx(0.5)
    corners, weights = csm.posterior_weights([2.3], np.ones(10), [10])
    assert corners.tolist() == [[2], [3]]
    assert weights == pytest.approx([0.7, 0.3])
    mass = np.ones(10)
    mass[4] = 2.0
    assert csm.recover_stein_score([3.5], mass, [10])[0] == pytest.approx(2.0 / 3.0)


def test_two_d_toy_shapes():
    samples, truth = csm.gen_2d_toy("checkerboard", 1000, bins=31, seed=3)
    assert samples.shape == (1000, 2)
    assert truth.shape == (31 * 31,)
    assert samples.min() >= 0 and samples.max() < 31


def test_train_sample_evaluate(tmp_path):
    options = {
        "dataset": "toy1d",
        "num_samples": 5000,
        "structure": "grid",
        "objective": "csm_exact",
        "exact_target": "truth",
        "lr": 0.01,
        "iterations": 2000,
        "log_every": 500,
        "seed": 4,
        "out": str(tmp_path),
    }
    result = csm.train(options)
    assert result["models"] == 1
    assert result["final_tv"] < 0.05
    assert (tmp_path / "train_log.csv").exists()
    samples, _ = csm.sample({**options, "steps": 0, "chains": 2})
    assert samples.shape == (2, 1)
    mean_ll = csm.evaluate(options)
    assert math.isfinite(mean_ll) and mean_ll < 0.0
    with pytest.raises(csm.ParseError):
        csm.train({"colour": "red"})


def test_check_suite():
    assert "completeness" in csm.check_suites()
    results = csm.check("equivalence", 1)
    assert results and all(r["passed"] for r in results)
