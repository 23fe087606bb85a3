import math

import numpy as np
import pytest

from sodsense.errors import DescentViolationError, InvalidArgumentError, NotCertifiedError, PreconditionError
from sodsense.escape_single import (
    alignment_case,
    classify_regime,
    default_rho,
    discriminant,
    efs,
    escape_interval,
    escape_quadratic,
    escape_regime,
    pz_bound,
    single_step_point,
)


def test_basic_efs_and_interval(basic_analysis):
    b = efs(basic_analysis, 0.0)
    assert abs(b.efs - 1.5) < 1e-10
    assert b.aic == 0.0
    iv = escape_interval(basic_analysis, 0.0)
    assert abs(iv.rho1 + 1 / math.sqrt(2)) < 1e-10
    assert abs(iv.rho2 - 1 / math.sqrt(2)) < 1e-10
    assert iv.case == "zero_alignment"


def test_quadratic_negative_inside_interval(basic_analysis):
    iv = escape_interval(basic_analysis, 0.0)
    for rho in np.linspace(iv.rho1, iv.rho2, 7)[1:-1]:
        assert escape_quadratic(basic_analysis, 0.0, rho) < 0
    assert escape_quadratic(basic_analysis, 0.0, 1.1 * iv.rho2) > 0


def test_efs_discriminant_equivalence(basic_analysis):
    for dp in (0.0, 0.3, 0.49, 0.51, 0.9):
        assert (efs(basic_analysis, dp).efs > 1) == (discriminant(basic_analysis, dp) > 0)


def test_not_certified_when_delta_is_honest(basic_analysis):
    # the basic operator's restricted isometry constant is exactly 0.5, which puts EFS at 1
    assert abs(efs(basic_analysis, 0.5).efs - 1.0) < 1e-12
    with pytest.raises(NotCertifiedError):
        escape_interval(basic_analysis, 0.51)


def test_delta_range_checked(basic_analysis):
    with pytest.raises(InvalidArgumentError):
        efs(basic_analysis, 1.0)


def test_single_step_rejects_zero_and_outside(basic, basic_analysis):
    with pytest.raises(PreconditionError):
        single_step_point(basic, basic_analysis, 0.0, 0.0)
    with pytest.raises(PreconditionError):
        single_step_point(basic, basic_analysis, 2.0, 0.0)


def test_single_step_reports_descent_violation(basic, basic_analysis):
    # along x_hat + rho e1 the loss is exactly 0.375 + rho^4 / 2
    rho = default_rho(escape_interval(basic_analysis, 0.0))
    with pytest.raises(DescentViolationError) as info:
        single_step_point(basic, basic_analysis, rho, 0.0)
    assert abs(info.value.loss_after - (0.375 + rho**4 / 2)) < 1e-12


def test_alignment_cases(basic_analysis):
    assert alignment_case(basic_analysis) == "zero_alignment"


def test_pz_bound_values():
    assert abs(pz_bound(0.0, 1) - 1 / 9) < 1e-15
    assert 0.333 < pz_bound(1e-12, 10**6) < 0.334
    assert pz_bound(1.0, 10) == 0.0


def test_regime_classification():
    assert classify_regime(3.0, 1.0, 2.0, 10)[0] == "guaranteed"
    assert classify_regime(0.5, 1.0, 2.0, 10)[0] == "no_guarantee"
    name, theta, bound = classify_regime(1.5, 1.0, 2.0, 10)
    assert name == "annulus" and theta == 0.5 and bound == pz_bound(0.5, 10)


def test_escape_regime_report(basic, basic_analysis):
    rep = escape_regime(basic_analysis, basic, 0.0)
    assert rep.regime == "guaranteed"
    assert rep.escape_point is None and "delta_p" in rep.note
    assert rep.to_dict()["case"] == "zero_alignment"


def test_real_world_defers_to_multi_step(real_world, real_analysis):
    rep = escape_regime(real_analysis, real_world, 0.0)
    assert rep.breakdown.efs < 1
    assert rep.escape_point is None
