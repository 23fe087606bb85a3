"""Single-step escape: feasibility score, escape interval and probabilistic regimes."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import (
    DescentViolationError,
    InvalidArgumentError,
    NoNegativeCurvatureError,
    NotCertifiedError,
    PreconditionError,
)
from .model import ProblemInstance, matrix_loss
from .spectral import CriticalPointAnalysis

ALIGN_TOL = 1e-12


@dataclass(frozen=True)
class EfsBreakdown:
    ncm: float
    aic: float
    efs: float
    delta_p: float


@dataclass(frozen=True)
class EscapeInterval:
    rho1: float
    rho2: float
    case: str
    discriminant: float


@dataclass(frozen=True)
class SingleStepReport:
    breakdown: EfsBreakdown | None
    discriminant: float | None
    rho1: float | None
    rho2: float | None
    case: str | None
    d: float
    r1: float
    r2: float
    regime: str
    theta: float | None
    prob_lower_bound: float
    rho_hat: float | None
    escape_point: np.ndarray | None
    loss_before: float
    loss_after: float | None
    convention: str = "direct"
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["escape_point"] = None if self.escape_point is None else self.escape_point.tolist()
        return d


def _check_delta(delta_p: float) -> None:
    if not (0.0 <= delta_p < 1.0):
        raise InvalidArgumentError(f"delta_p must lie in [0, 1), got {delta_p}")


def efs(analysis: CriticalPointAnalysis, delta_p: float) -> EfsBreakdown:
    _check_delta(delta_p)
    if not analysis.has_negative_curvature:
        raise NoNegativeCurvatureError(f"lambda_n = {analysis.lambda_n:.3e} is not negative")
    s2 = analysis.sigma_r**2
    ncm = -analysis.lambda_n / (s2 * (1.0 + delta_p))
    aic = analysis.alignment**2 / (2.0 * (1.0 + delta_p) ** 2)
    return EfsBreakdown(ncm, aic, ncm + aic, delta_p)


def discriminant(analysis: CriticalPointAnalysis, delta_p: float) -> float:
    s, a, lam = analysis.sigma_r, analysis.alignment, analysis.lambda_n
    k = 1.0 + delta_p
    return 4.0 * s * s * a * a - 4.0 * k * (2.0 * s * s * k + 2.0 * lam)


def escape_quadratic(analysis: CriticalPointAnalysis, delta_p: float, rho: float) -> float:
    """Left side of the quadratic escape inequality; negative means certified descent."""
    s, a, lam = analysis.sigma_r, analysis.alignment, analysis.lambda_n
    k = 1.0 + delta_p
    return k * rho * rho + 2.0 * s * a * rho + 2.0 * s * s * k + 2.0 * lam


def alignment_case(analysis: CriticalPointAnalysis) -> str:
    a = analysis.alignment
    if abs(a) < ALIGN_TOL:
        return "zero_alignment"
    return "pos_alignment" if a > 0 else "neg_alignment"


def escape_interval(analysis: CriticalPointAnalysis, delta_p: float) -> EscapeInterval:
    score = efs(analysis, delta_p)
    if score.efs <= 1.0:
        raise NotCertifiedError(f"EFS = {score.efs:.6g} <= 1; single-step escape not certified")
    disc = discriminant(analysis, delta_p)
    if disc <= 0:
        raise NotCertifiedError(f"discriminant {disc:.3e} is not positive")
    k = 1.0 + delta_p
    lin = -2.0 * analysis.sigma_r * analysis.alignment
    root = math.sqrt(disc)
    return EscapeInterval((lin - root) / (2 * k), (lin + root) / (2 * k), alignment_case(analysis), disc)


def default_rho(interval: EscapeInterval) -> float:
    if interval.case == "zero_alignment":
        return abs(interval.rho2) / 2.0
    return 0.5 * (interval.rho1 + interval.rho2)


def single_step_point(inst: ProblemInstance, analysis: CriticalPointAnalysis, rho_hat: float,
                      delta_p: float) -> tuple[np.ndarray, float, float]:
    """X_hat + rho_hat u_n q_r^T together with h before and after."""
    iv = escape_interval(analysis, delta_p)
    if not (iv.rho1 < rho_hat < iv.rho2) or rho_hat == 0.0:
        raise PreconditionError(f"rho_hat={rho_hat} is not strictly inside ({iv.rho1}, {iv.rho2}) or is zero")
    Xc = analysis.Xhat + rho_hat * np.outer(analysis.u_n, analysis.q_r)
    before = matrix_loss(inst, analysis.Xhat)
    after = matrix_loss(inst, Xc)
    if not after < before:
        raise DescentViolationError(
            f"escape point does not decrease the loss ({after:.6g} >= {before:.6g}); "
            "delta_p may understate the operator's RIP constant", before, after)
    return Xc, before, after


def regime_radii(analysis: CriticalPointAnalysis, inst: ProblemInstance, delta_p: float) -> tuple[float, float]:
    _check_delta(delta_p)
    k = 1.0 + delta_p
    base = k / (1.0 - delta_p) * analysis.sigma_r**2 * float(np.trace(inst.Mstar))
    r2 = 2.0 * base
    r1 = 2.0 * (1.0 - 1.0 / (k * k * inst.op.m)) * base
    return r1, r2


def pz_bound(theta: float, m: int) -> float:
    """(1 - theta)^2 m / (3 (m + 2))."""
    return (1.0 - theta) ** 2 * m / (3.0 * (m + 2.0))


def classify_regime(d: float, r1: float, r2: float, m: int) -> tuple[str, float | None, float]:
    if d >= r2:
        return "guaranteed", None, 1.0
    if d < r1:
        return "no_guarantee", None, 0.0
    theta = (r2 - d) / (r2 - r1)
    return "annulus", theta, pz_bound(theta, m)


def escape_regime(analysis: CriticalPointAnalysis, inst: ProblemInstance, delta_p: float) -> SingleStepReport:
    _check_delta(delta_p)
    D = analysis.Xhat @ analysis.Xhat.T - inst.Mstar
    d = float(np.sum(D * D))
    r1, r2 = regime_radii(analysis, inst, delta_p)
    regime, theta, bound = classify_regime(d, r1, r2, inst.op.m)
    before = matrix_loss(inst, analysis.Xhat)
    if not analysis.has_negative_curvature:
        return SingleStepReport(None, None, None, None, None, d, r1, r2, regime, theta, bound,
                                None, None, before, None, note="no negative curvature")
    score = efs(analysis, delta_p)
    disc = discriminant(analysis, delta_p)
    case = alignment_case(analysis)
    if score.efs <= 1.0:
        return SingleStepReport(score, disc, None, None, case, d, r1, r2, regime, theta, bound,
                                None, None, before, None, note="not certified; defer to multi-step")
    iv = escape_interval(analysis, delta_p)
    rho = default_rho(iv)
    try:
        Xc, _, after = single_step_point(inst, analysis, rho, delta_p)
        note = ""
    except DescentViolationError as exc:
        Xc, after, note = None, exc.loss_after, str(exc)
    return SingleStepReport(score, disc, iv.rho1, iv.rho2, case, d, r1, r2, regime, theta, bound,
                            rho, Xc, before, after, note=note)
