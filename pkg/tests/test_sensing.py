import json

import numpy as np
import pytest

from sodsense.errors import InvalidArgumentError
from sodsense.sensing import (
    SensingOperator,
    adjoint_operator,
    apply_operator,
    child_seed,
    correlation_sum,
    gaussian_correlation_samples,
    gaussian_ensemble,
    make_rng,
    normal_map,
    operator_from_json,
    operator_to_json,
    pmc_operator,
    pmc_weights,
)


def _sym(rng, n):
    M = rng.standard_normal((n, n))
    return M + M.T


def test_rejects_asymmetric_matrices():
    with pytest.raises(InvalidArgumentError):
        SensingOperator(np.array([[[1.0, 2.0], [0.0, 1.0]]]))


def test_rejects_bad_delta():
    with pytest.raises(InvalidArgumentError):
        SensingOperator(np.eye(2)[None], delta_p=1.0)


def test_apply_and_adjoint_shapes():
    op = gaussian_ensemble(3, 7, seed=1)
    assert apply_operator(op, np.eye(3)).shape == (7,)
    assert adjoint_operator(op, np.ones(7)).shape == (3, 3)
    with pytest.raises(InvalidArgumentError):
        apply_operator(op, np.eye(2))
    with pytest.raises(InvalidArgumentError):
        adjoint_operator(op, np.ones(6))


def test_adjoint_identity():
    rng = make_rng(3)
    op = gaussian_ensemble(4, 9, seed=3)
    M, y = _sym(rng, 4), rng.standard_normal(9)
    assert np.isclose(apply_operator(op, M) @ y, np.sum(M * adjoint_operator(op, y)), rtol=1e-12)


def test_pmc_weights_layout():
    W = pmc_weights(4, 0.3)
    expected = np.array([
        [1, 1, 0.3, 1],
        [1, 1, 1, 1],
        [0.3, 1, 1, 1],
        [1, 1, 1, 1],
    ])
    np.testing.assert_array_equal(W, expected)


def test_pmc_energy_identity_and_fast_path():
    rng = make_rng(5)
    op = pmc_operator(5, 0.2)
    M = _sym(rng, 5)
    y = apply_operator(op, M)
    assert np.isclose(y @ y, np.sum((op.weights * M) ** 2), rtol=1e-12)
    slow = adjoint_operator(op, apply_operator(op, M))
    np.testing.assert_allclose(normal_map(op, M), slow, rtol=1e-12, atol=1e-12)


def test_pmc_delta_from_epsilon():
    op = pmc_operator(3, 0.3)
    assert op.m == 6
    assert np.isclose(op.delta_p, 0.7 / 1.3)


def test_correlation_sum_matches_definition():
    op = gaussian_ensemble(3, 4, seed=0)
    P, Q = np.eye(3), np.diag([1.0, -1.0, 0.0])
    direct = sum(np.sum(A * P) * np.sum(A * Q) for A in op.matrices)
    assert np.isclose(correlation_sum(op, P, Q), direct)


def test_gaussian_ensemble_is_seeded():
    a = gaussian_ensemble(3, 5, seed=42)
    b = gaussian_ensemble(3, 5, seed=42)
    c = gaussian_ensemble(3, 5, seed=43)
    np.testing.assert_array_equal(a.matrices, b.matrices)
    assert not np.array_equal(a.matrices, c.matrices)


def test_gaussian_second_moment_quick():
    u, v = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    P, Q = np.outer(u, v) + np.outer(v, u), np.outer(u, u)
    S = gaussian_correlation_samples(2, 10, P, Q, 20000, seed=2)
    se = np.std(S**2) / np.sqrt(S.size)
    assert abs(np.mean(S**2) - 0.2) < 5 * se


def test_child_seed_deterministic_and_distinct():
    assert child_seed(0, 1) == child_seed(0, 1)
    assert len({child_seed(0, k) for k in range(100)}) == 100


def test_json_round_trip(tmp_path):
    op = pmc_operator(3, 0.3)
    path = tmp_path / "op.json"
    operator_to_json(op, path)
    back = operator_from_json(path)
    np.testing.assert_array_equal(back.matrices, op.matrices)
    assert back.delta_p == op.delta_p
    json.loads(path.read_text())
