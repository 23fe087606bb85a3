"""Explicit tensor lifting for tiny instances.

Everything here is brute force: lifted tensors are dense arrays of shape
(n r)^l, and the lifted loss contracts the order-2l moment tensor against
A^(x)l. Used only to validate the closed forms elsewhere in the package.

vec(X) is row-major, so mode k of a lifted tensor carries the pair (i_k, s_k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSubspaceError, InvalidArgumentError, TooLargeError
from .escape_multi import MultiStepConfig, tpgd_coefficients, tpgd_increment
from .model import ProblemInstance, _check_X
from .sensing import make_rng
from .spectral import CriticalPointAnalysis

MAX_ELEMENTS = 10**7


@dataclass(frozen=True)
class LiftedTensor:
    data: np.ndarray
    n: int
    r: int
    l: int

    @property
    def vec(self) -> np.ndarray:
        return self.data.reshape(-1)


def _cap(count: int, what: str) -> None:
    if count > MAX_ELEMENTS:
        raise TooLargeError(f"{what} needs {count} elements, above the cap of {MAX_ELEMENTS}")


def lift(X, l: int) -> LiftedTensor:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, r = X.shape
    _cap((n * r) ** l, "lift")
    v = X.reshape(-1)
    out = np.ones(())
    for _ in range(l):
        out = np.multiply.outer(out, v)
    return LiftedTensor(out, n, r, l)


def _caps(inst: ProblemInstance, l: int) -> None:
    n, r, m = inst.n, inst.r_search, inst.op.m
    _cap((n * r) ** l, "lifted tensor")
    _cap(m**l, "lifted measurement tensor")
    _cap(n ** (2 * l), "lifted moment matrix")


def _as_factor_matrix(inst: ProblemInstance, w, l: int) -> np.ndarray:
    """Reshape a lifted tensor to P(w) of shape (n^l, r^l)."""
    n, r = inst.n, inst.r_search
    w = np.asarray(w.data if isinstance(w, LiftedTensor) else w, dtype=float)
    if w.size != (n * r) ** l:
        raise InvalidArgumentError(f"lifted tensor must have {(n * r) ** l} entries, got {w.size}")
    T = w.reshape((n, r) * l)
    perm = list(range(0, 2 * l, 2)) + list(range(1, 2 * l, 2))
    return T.transpose(perm).reshape(n**l, r**l)


def _from_factor_matrix(inst: ProblemInstance, P: np.ndarray, l: int) -> np.ndarray:
    n, r = inst.n, inst.r_search
    T = P.reshape((n,) * l + (r,) * l)
    perm = []
    for k in range(l):
        perm += [k, l + k]
    return T.transpose(perm).reshape((n * r,) * l)


def _measure(inst: ProblemInstance, Mt: np.ndarray, l: int) -> np.ndarray:
    """<A^(x)l, M~>: contract an (n^l, n^l) moment matrix to an m^l tensor."""
    n = inst.n
    T = Mt.reshape((n,) * (2 * l))
    perm = []
    for k in range(l):
        perm += [k, l + k]
    T = T.transpose(perm).reshape((n * n,) * l)
    F = inst.op.flat
    for _ in range(l):
        # contract the leading mode; the new measurement index goes to the back
        T = np.tensordot(T, F, axes=([0], [1]))
    return T


def _adjoint(inst: ProblemInstance, R: np.ndarray, l: int) -> np.ndarray:
    """(A*)^(x)l applied to an m^l tensor, returned as an (n^l, n^l) matrix."""
    n = inst.n
    F = inst.op.flat
    T = R
    for _ in range(l):
        T = np.tensordot(T, F, axes=([0], [0]))
    T = T.reshape((n, n) * l)
    perm = list(range(0, 2 * l, 2)) + list(range(1, 2 * l, 2))
    return T.transpose(perm).reshape(n**l, n**l)


def _b_power(inst: ProblemInstance, l: int) -> np.ndarray:
    out = np.ones(())
    for _ in range(l):
        out = np.multiply.outer(out, inst.b)
    return out


def lifted_residual(inst: ProblemInstance, w, l: int) -> np.ndarray:
    _caps(inst, l)
    P = _as_factor_matrix(inst, w, l)
    return _measure(inst, P @ P.T, l) - _b_power(inst, l)


def lifted_loss(inst: ProblemInstance, w, l: int) -> float:
    R = lifted_residual(inst, w, l)
    return float(np.sum(R * R))


def lifted_loss_delta(inst: ProblemInstance, w0, dw, l: int) -> float:
    """lifted_loss(w0 + dw) - lifted_loss(w0) without cancellation against the loss itself."""
    _caps(inst, l)
    P0 = _as_factor_matrix(inst, w0, l)
    D = _as_factor_matrix(inst, dw, l)
    R0 = _measure(inst, P0 @ P0.T, l) - _b_power(inst, l)
    dR = _measure(inst, P0 @ D.T + D @ P0.T + D @ D.T, l)
    return float(np.sum(dR * (2.0 * R0 + dR)))


def lemma_grad(inst: ProblemInstance, w, l: int) -> np.ndarray:
    """The contraction chain <<A_r^l, w>, <A^l, M~(w) - M~(z^l)>> as written, without the outer factor 4."""
    R = lifted_residual(inst, w, l)
    K = _adjoint(inst, R, l)
    P = _as_factor_matrix(inst, w, l)
    return _from_factor_matrix(inst, K @ P, l)


def lifted_grad(inst: ProblemInstance, w, l: int) -> np.ndarray:
    """Exact gradient of lifted_loss with respect to the tensor entries."""
    return 4.0 * lemma_grad(inst, w, l)


@dataclass(frozen=True)
class SubspaceBasis:
    a: LiftedTensor
    b: LiftedTensor
    c: LiftedTensor
    gram: np.ndarray

    @property
    def stacked(self) -> np.ndarray:
        return np.stack([self.a.vec, self.b.vec, self.c.vec], axis=1)

    def combine(self, coeffs) -> np.ndarray:
        return (self.stacked @ np.asarray(coeffs, dtype=float)).reshape(self.a.data.shape)


def subspace_basis(analysis: CriticalPointAnalysis, l: int) -> SubspaceBasis:
    X = analysis.Xhat
    a = lift(X, l)
    b = lift(np.outer(analysis.u_n, analysis.q_r), l)
    c = lift(analysis.E @ X, l)
    C = np.stack([a.vec, b.vec, c.vec], axis=1)
    return SubspaceBasis(a, b, c, C.T @ C)


def project_S(v, basis: SubspaceBasis) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares coefficients of v on (a, b, c) and the projected tensor."""
    G = basis.gram
    if np.linalg.cond(G) >= 1e12:
        raise DegenerateSubspaceError(f"Gram matrix is singular (condition {np.linalg.cond(G):.3e})")
    C = basis.stacked
    vv = np.asarray(v, dtype=float).reshape(-1)
    coef = np.linalg.solve(G, C.T @ vv)
    return coef, (C @ coef).reshape(basis.a.data.shape)


@dataclass
class DescentBudget:
    L_est: float
    C: float
    G_t: float
    Delta_t: float
    eta_hat: float
    rho_bound: float


@dataclass
class TpgdStep:
    t: int
    projected: np.ndarray
    closed_form: np.ndarray
    coeff_deviation: float
    tensor_deviation: float
    loss: float
    loss_change: float
    budget: DescentBudget


@dataclass
class TpgdRun:
    config: MultiStepConfig
    steps: list[TpgdStep] = field(default_factory=list)
    initial_loss: float = math.nan
    saddle_loss: float = math.nan
    L_est: float = math.nan

    @property
    def losses(self) -> list[float]:
        return [self.initial_loss] + [s.loss for s in self.steps]


def estimate_lipschitz(inst: ProblemInstance, w, l: int, grad=lemma_grad, iters: int = 20,
                       fd_step: float = 1e-6, seed: int = 0) -> float:
    """Power iteration on finite-difference Hessian-vector products of ``grad``."""
    w = np.asarray(w, dtype=float)
    v = make_rng(seed).standard_normal(w.shape)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        hv = (grad(inst, w + fd_step * v, l) - grad(inst, w - fd_step * v, l)) / (2 * fd_step)
        lam = float(np.linalg.norm(hv))
        if lam == 0.0:
            break
        v = hv / lam
    return lam


def _closed(analysis, cfg, t) -> np.ndarray:
    return np.array([c.value() for c in tpgd_coefficients(analysis, cfg, t)])


def descent_budget(L: float, C: float, G: float, delta: float) -> DescentBudget:
    if delta > 0 and C * G > 0:
        root = math.sqrt(C * G * delta)
        eta_hat = (-delta + math.sqrt(delta * delta + 4 * root * delta)) / (2 * root)
        rho_bound = math.sqrt(delta / (C * G))
    else:
        eta_hat, rho_bound = math.nan, math.nan
    return DescentBudget(L, C, G, delta, eta_hat, rho_bound)


def tpgd_run(inst: ProblemInstance, analysis: CriticalPointAnalysis, cfg: MultiStepConfig, steps: int,
             grad=lemma_grad) -> TpgdRun:
    """Projected multi-step PGD on explicit tensors, with truncation realized by snapping to the closed form."""
    l = cfg.l
    _caps(inst, l)
    basis = subspace_basis(analysis, l)
    run = TpgdRun(cfg)
    run.saddle_loss = lifted_loss(inst, basis.a.data, l)
    w = basis.combine(_closed(analysis, cfg, 0))
    run.initial_loss = lifted_loss(inst, w, l)
    run.L_est = estimate_lipschitz(inst, w, l, grad)
    C = float(np.linalg.norm(basis.a.vec) + np.linalg.norm(basis.b.vec) + np.linalg.norm(basis.c.vec))
    for t in range(steps):
        g = grad(inst, w, l)
        v = w - cfg.eta * g
        coef, proj = project_S(v, basis)
        closed = _closed(analysis, cfg, t + 1)
        w_next = basis.combine(closed)
        dw = basis.combine([c.value() for c in tpgd_increment(analysis, cfg, t)])
        delta = (1.0 / cfg.eta - run.L_est / 2.0) * float(np.sum((proj - w) ** 2))
        budget = descent_budget(run.L_est, C, float(np.linalg.norm(g)), delta)
        step = TpgdStep(t, coef, closed, float(np.max(np.abs(coef - closed))),
                        float(np.linalg.norm(proj - w_next)), lifted_loss(inst, w_next, l),
                        lifted_loss_delta(inst, w, dw, l), budget)
        run.steps.append(step)
        w = w_next
    return run


def subspace_spectral_norm_R(Xcheck, analysis: CriticalPointAnalysis, l: int, rho: float) -> float:
    """max(|sigma_r^l beta^l - rho|, sigma_r^l |alpha^l - 1|) for Xcheck = alpha X_hat + beta sigma_r u q^T."""
    X = np.asarray(Xcheck, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    Xh = analysis.Xhat
    B = np.outer(analysis.u_n, analysis.q_r)
    # orthogonal frame: <X_hat, u q^T> = sigma_r-weighted u^T v terms, zero at stationarity
    alpha = float(np.sum(X * Xh) / np.sum(Xh * Xh))
    beta = float(np.sum(X * B)) / analysis.sigma_r
    s = analysis.sigma_r**l
    return max(abs(s * beta**l - rho), s * abs(alpha**l - 1.0))


def budget_compliant(run: TpgdRun) -> bool:
    """eta < min(eta_hat, 2/L) and rho below the descent bound at every recorded step."""
    cfg = run.config
    if not run.L_est > 0 or cfg.eta >= 2.0 / run.L_est:
        return False
    for s in run.steps:
        b = s.budget
        if not (cfg.eta < b.eta_hat and cfg.rho < b.rho_bound):
            return False
    return True


def compliant_tpgd_run(inst: ProblemInstance, analysis: CriticalPointAnalysis, l: int, steps: int,
                       rho: float = 0.05, eta: float = 0.05, shrink: float = 0.5, max_tries: int = 30,
                       grad=lemma_grad) -> TpgdRun:
    """Shrink (rho, eta) until the run satisfies the step-size budget; returns the last run tried."""
    run = None
    for _ in range(max_tries):
        run = tpgd_run(inst, analysis, MultiStepConfig(l=l, rho=rho, eta=eta), steps, grad)
        if budget_compliant(run):
            return run
        rho *= shrink
        eta *= shrink
    return run
