import math

import numpy as np
import pytest

import fullmatch as fm


def test_softmax_and_ranks():
    p = fm.softmax([1.0, 2.0, 3.0])
    assert abs(sum(p) - 1.0) < 1e-15
    assert fm.rank_classes([0.1, 0.5, 0.15, 0.25]) == [4, 1, 3, 2]
    rows = fm.softmax_rows(np.zeros((3, 4)))
    assert np.allclose(rows, 0.25)
    with pytest.raises(ValueError):
        fm.softmax([float("nan"), 1.0])


def test_selection_and_losses():
    weak = np.array([[0.97, 0.02, 0.01], [0.5, 0.3, 0.2]])
    strong = np.array([[0.7, 0.2, 0.1], [0.2, 0.5, 0.3]])
    state = fm.build_selection_state(weak, strong, 0.95)
    assert state.k == 3
    assert state.has_pseudo_label == [True, False]
    assert state.target_class == [0, None]
    assert state.u_mask.dtype == np.bool_
    assert state.u_mask[0].sum() == state.k - 1
    assert fm.unsupervised_loss(strong, state) == pytest.approx(-math.log(0.7) / 2)
    eml = fm.eml_loss(strong, state)
    assert eml == pytest.approx(0.2886773025801508 / 2, rel=1e-13)
    grad = fm.eml_loss_grad(strong, state)
    closed = fm.eml_target_class_gradient(strong[0].tolist(), 0, [1, 2], 2, 3)
    assert grad[0, 0] == pytest.approx(closed, rel=1e-10)
    assert fm.anl_loss(strong, state) == 0.0


def test_hand_built_state():
    u = np.zeros((1, 4), dtype=bool)
    neg = np.zeros((1, 4), dtype=bool)
    neg[0, 2:] = True
    state = fm.SelectionState.from_masks(2, [None], u, neg)
    p = np.array([[0.5, 0.3, 0.15, 0.05]])
    assert fm.anl_loss(p, state) == pytest.approx(0.2138122238853255, rel=1e-14)


def test_adaptive_k_matches_scan():
    rng = np.random.default_rng(0)
    for _ in range(20):
        z = rng.normal(size=(16, 6))
        q = fm.softmax_rows(z)
        p = fm.softmax_rows(z + rng.normal(scale=1.0, size=z.shape))
        temp = fm.compute_temp_labels(q)
        ranks = [fm.rank_classes(row.tolist())[t] for row, t in zip(p, temp)]
        assert fm.compute_adaptive_k(p, temp) == max(2, max(ranks))


def test_config_and_training():
    text = fm.default_config_text()
    assert "threshold = 0.95" in text
    assert fm.normalize_config(text) == text
    with pytest.raises(ValueError, match="bogus"):
        fm.normalize_config("bogus = 1\n")
    small = "iterations = 30\neval_interval = 10\ndata.samples = 480\nmodel.hidden = 8\n"
    log = fm.train(small)
    assert [r["iteration"] for r in log] == [10, 20, 30]
    assert 0.0 <= log[-1]["test_accuracy"] <= 1.0
    assert fm.train(small)[-1]["l_sum"] == log[-1]["l_sum"]
    x, y, tags = fm.generate_dataset(small)
    assert x.shape == (480, 2)
    assert tags.count("labeled") == 16


def test_gradcheck_and_schedule():
    report = fm.gradcheck(seed=1, instances=9)
    for name, (err, tol) in report.items():
        assert err <= tol, name
    assert fm.cosine_lr(0, 100, 0.03) == 0.03
    assert fm.cosine_lr(100, 100, 1.0) == pytest.approx(0.19509032201612833, rel=1e-14)
