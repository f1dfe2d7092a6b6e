import json

import numpy as np
import pytest

import ckd


def unit_tokens(count, d, seed):
    x = np.random.default_rng(seed).standard_normal((count, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def test_fixed_point_matches_dense_solve():
    x = unit_tokens(7, 4, 0)
    tokens, targets = x[:-1], x[1:]
    a = ckd.attention_matrix("exp", "raw", tokens)
    assert np.allclose(a, np.tril(np.exp(tokens @ tokens.T)))
    rhs = (a - np.diag(np.diag(a))) @ targets
    assert np.allclose(ckd.fixed_point("exp", "raw", tokens, targets), np.linalg.solve(a, rhs), atol=1e-12)


def test_nilpotent_descent_and_dual_identity():
    x = unit_tokens(6, 3, 1)
    tokens, targets = x[:-1], x[1:]
    star = ckd.fixed_point("id", "raw", tokens, targets)
    assert np.abs(ckd.descent("id", "raw", tokens, targets, 1.0, 5) - star).max() < 1e-12
    mu, gap = ckd.dual_coefficients("exp", tokens, targets)
    assert mu.shape == (5, 3)
    assert gap < 1e-10


def test_linear_closed_form_and_spectral_radius():
    seq = ckd.generate_linear(5, 30, 3)
    w = np.array(json.loads(seq["json"])["hidden"]["W"])
    x1 = seq["tokens"][0]
    assert np.allclose(ckd.linear_delta(w, x1, 12), ckd.linear_delta_by_projectors(w, x1, 12), atol=1e-9)
    assert ckd.linear_spectral_radius(w, x1) < 1.0


def test_transformer_matches_descent():
    x = ckd.generate_linear(4, 8, 2, instance=2)["tokens"]
    gaps = ckd.equivalence_gap(x, "softmax", 0.5, 6)
    assert max(gaps) < 1e-10
    out = ckd.transformer_forward(x, "exp", 0.2, 3)
    assert out.shape == (8, 4)
    assert np.abs(ckd.build_t0_approx(x, 50.0) - ckd.build_t0_exact(x)).max() < 1e-6


def test_experiment_reports():
    config, mean, per_seed = ckd.figure2(instance=1, length=40, seeds=2)
    assert config["kernel"] == "id"
    assert len(mean) == 39 and len(per_seed) == 2
    assert ckd.equivalence(instance=2, dim=4, length=6, depth=4, seeds=1)["pass"]
    assert ckd.spectral(draws=50, rotation_grid=10)["rotation_grid"]["max_abs_error"] < 1e-10


def test_errors_surface_as_value_error():
    with pytest.raises(ValueError):
        ckd.figure2(instance=1, kernel="exp")
    with pytest.raises(ckd.CkdError):
        ckd.attention_matrix("id", "softmax", unit_tokens(3, 2, 0))
