import math

import numpy as np
import pytest

from sodsense.errors import DegenerateSubspaceError, TooLargeError
from sodsense.escape_multi import MultiStepConfig, lifted_subspace_loss, subspace_gram
from sodsense.model import lifted_rank1_loss, make_instance
from sodsense.sensing import make_rng
from sodsense.tensor_oracle import (
    budget_compliant,
    compliant_tpgd_run,
    lemma_grad,
    lift,
    lifted_grad,
    lifted_loss,
    lifted_loss_delta,
    project_S,
    subspace_basis,
    subspace_spectral_norm_R,
    tpgd_run,
)


def test_lift_is_outer_power():
    x = np.array([1.0, -2.0])
    T = lift(x, 3)
    assert T.data.shape == (2, 2, 2)
    assert T.data[1, 1, 0] == 4.0


def test_lift_cap():
    with pytest.raises(TooLargeError):
        lift(np.ones(100), 4)


def test_explicit_loss_matches_rank_one_formula(real_world, real_analysis):
    w = lift(real_analysis.Xhat, 3)
    assert math.isclose(lifted_loss(real_world, w, 3), lifted_rank1_loss(real_world, real_analysis.Xhat, 3),
                        rel_tol=1e-10)


def test_gram_matches_explicit(real_world, real_analysis):
    basis = subspace_basis(real_analysis, 3)
    C = basis.stacked
    G = subspace_gram(real_world, real_analysis, 3).matrix()
    np.testing.assert_allclose(G, C.T @ C, rtol=1e-10, atol=1e-14)


def test_subspace_loss_matches_explicit(real_world, real_analysis):
    basis = subspace_basis(real_analysis, 3)
    rng = make_rng(4)
    for _ in range(5):
        c = rng.standard_normal(3)
        assert math.isclose(lifted_subspace_loss(real_world, real_analysis, c, 3),
                            lifted_loss(real_world, basis.combine(c), 3), rel_tol=1e-10)


def test_lifted_gradient_finite_differences(real_world, real_analysis):
    rng = make_rng(2)
    w = lift(real_analysis.Xhat + 0.1 * rng.standard_normal((3, 1)), 3).data
    g = lifted_grad(real_world, w, 3)
    np.testing.assert_allclose(g, 4.0 * lemma_grad(real_world, w, 3))
    v = rng.standard_normal(w.shape)
    h = 1e-6
    fd = (lifted_loss(real_world, w + h * v, 3) - lifted_loss(real_world, w - h * v, 3)) / (2 * h)
    assert math.isclose(fd, float(np.sum(g * v)), rel_tol=1e-6)


def test_saddle_is_stationary_in_lifted_space(real_world, real_analysis):
    w = lift(real_analysis.Xhat, 3).data
    assert np.linalg.norm(lifted_grad(real_world, w, 3)) < 1e-9


def test_loss_delta_matches_direct_difference(real_world, real_analysis):
    basis = subspace_basis(real_analysis, 3)
    w0 = basis.combine([1.0, 0.1, 0.0])
    dw = basis.combine([0.0, 0.01, -0.02])
    direct = lifted_loss(real_world, w0 + dw, 3) - lifted_loss(real_world, w0, 3)
    assert math.isclose(lifted_loss_delta(real_world, w0, dw, 3), direct, rel_tol=1e-8)


def test_projection_idempotent(real_analysis):
    basis = subspace_basis(real_analysis, 3)
    v = make_rng(0).standard_normal(basis.a.data.shape)
    c1, p1 = project_S(v, basis)
    c2, p2 = project_S(p1, basis)
    np.testing.assert_allclose(c1, c2, atol=1e-10)
    np.testing.assert_allclose(p1, p2, atol=1e-10)


def test_degenerate_subspace_detected(basic_analysis):
    # on the basic example E x_hat is parallel to u_n q_r^T
    basis = subspace_basis(basic_analysis, 3)
    with pytest.raises(DegenerateSubspaceError):
        project_S(np.ones(basis.a.data.shape), basis)


def test_tpgd_tracks_closed_form(real_world, real_analysis):
    run = tpgd_run(real_world, real_analysis, MultiStepConfig(l=3, rho=0.01, eta=0.01), 3)
    assert len(run.steps) == 3
    for s in run.steps:
        assert s.coeff_deviation < 1e-2
        assert math.isfinite(s.loss_change)


def test_compliant_run_shrinks_steps(real_world, real_analysis):
    run = compliant_tpgd_run(real_world, real_analysis, 3, 2, rho=0.05, eta=0.05)
    assert budget_compliant(run)
    assert run.config.rho < 0.05


def test_spectral_norm_R_zero_at_matching_point(real_analysis):
    l, rho = 3, 0.2
    beta = (rho / real_analysis.sigma_r**l) ** (1 / l)
    X = real_analysis.Xhat + beta * real_analysis.sigma_r * np.outer(real_analysis.u_n, real_analysis.q_r)
    assert subspace_spectral_norm_R(X, real_analysis, l, rho) < 1e-10


def test_tiny_gaussian_instance_caps():
    inst = make_instance("gaussian", {"n": 2, "m": 3, "seed": 0, "Z": [[1.0], [0.0]]})
    with pytest.raises(TooLargeError):
        lifted_loss(inst, np.zeros((2,) * 25), 25)
