"""Multi-step escape by simulating truncated projected GD in the lifted space.

Nothing here materializes a tensor. The iterate lives in span{a, b, c} with
a = vec(X)^l, b = vec(u q^T)^l and c = vec(E X)^l, and every quantity follows
from <x^l, y^l> = <x, y>^l. Scalars that grow like (1 - eta lambda^l)^t are
kept as signed logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, PreconditionError
from .logmath import ONE, ZERO, SLog, log_expm1, slog_sum
from .model import ProblemInstance, lifted_rank1_loss, matrix_loss
from .sensing import apply_operator
from .spectral import CriticalPointAnalysis, analyze_critical_point

LN2 = math.log(2.0)


@dataclass(frozen=True)
class MultiStepConfig:
    l: int = 5
    rho: float = 0.1
    eta: float = 0.1
    t_max: float = 1e9
    separation_factor: float = 1.0
    grid_ratio: float = 1.2

    def __post_init__(self):
        if not isinstance(self.l, (int, np.integer)) or self.l < 3 or self.l % 2 == 0:
            raise InvalidArgumentError(f"l must be an odd integer >= 3, got {self.l!r}")
        if not (0 < self.rho < 1) or not (0 < self.eta < 1):
            raise InvalidArgumentError("rho and eta must lie in (0, 1)")
        if self.t_max < 1:
            raise InvalidArgumentError("t_max must be >= 1")
        if self.separation_factor < 1.0:
            raise InvalidArgumentError("separation_factor must be >= 1")
        if self.grid_ratio <= 1.0:
            raise InvalidArgumentError("grid_ratio must exceed 1")


def _growth(analysis: CriticalPointAnalysis, cfg: MultiStepConfig) -> tuple[float, float]:
    """(log x, log(1 + x)) with x = -eta lambda_n^l > 0."""
    if not analysis.has_negative_curvature:
        raise PreconditionError("lambda_n must be negative")
    log_x = math.log(cfg.eta) + cfg.l * math.log(-analysis.lambda_n)
    return log_x, math.log1p(math.exp(log_x))


def _log_geometric_sum(t: int, log_x: float, L: float) -> float:
    """log of sum_{tau < t} (1 + x)^tau = ((1 + x)^t - 1) / x."""
    return log_expm1(t * L) - log_x


def tpgd_coefficients(analysis: CriticalPointAnalysis, cfg: MultiStepConfig, t: int) -> tuple[SLog, SLog, SLog]:
    if t < 0 or int(t) != t:
        raise InvalidArgumentError(f"t must be a nonnegative integer, got {t}")
    t = int(t)
    log_x, L = _growth(analysis, cfg)
    beta = SLog(1.0, math.log(cfg.rho) + t * L)
    if t == 0:
        return ONE, beta, ZERO
    log_g = (math.log(cfg.rho) + math.log(cfg.eta) - (cfg.l - 1) * LN2
             + _log_geometric_sum(t, log_x, L) + cfg.l * math.log(analysis.sigma_r))
    return ONE, beta, SLog(-1.0, log_g)


def tpgd_increment(analysis: CriticalPointAnalysis, cfg: MultiStepConfig, t: int) -> tuple[SLog, SLog, SLog]:
    """Coefficient change from step t to t + 1, evaluated without subtraction."""
    if t < 0 or int(t) != t:
        raise InvalidArgumentError(f"t must be a nonnegative integer, got {t}")
    log_x, L = _growth(analysis, cfg)
    d_beta = SLog(1.0, math.log(cfg.rho) + log_x + t * L)
    d_gamma = SLog(-1.0, math.log(cfg.rho) + math.log(cfg.eta) - (cfg.l - 1) * LN2
                   + t * L + cfg.l * math.log(analysis.sigma_r))
    return ZERO, d_beta, d_gamma


@dataclass(frozen=True)
class SubspaceGram:
    a_norm: SLog
    b_norm: SLog
    c_norm: SLog
    s_bar: SLog
    t_bar: SLog
    ab: SLog

    def matrix(self) -> np.ndarray:
        """3x3 Gram as floats (may overflow for large l)."""
        a2 = (self.a_norm * self.a_norm).value()
        c2 = (self.c_norm * self.c_norm).value()
        s, t = self.s_bar.value(), self.t_bar.value()
        return np.array([[a2, 0.0, s], [0.0, 1.0, t], [s, t, c2]])


def subspace_factors(analysis: CriticalPointAnalysis) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(X_hat, u_n q_r^T, E X_hat): the matrices whose lifts span the subspace."""
    X = analysis.Xhat
    return X, np.outer(analysis.u_n, analysis.q_r), analysis.E @ X


def subspace_gram(inst: ProblemInstance, analysis: CriticalPointAnalysis, l: int) -> SubspaceGram:
    X, B, C = subspace_factors(analysis)
    return SubspaceGram(
        a_norm=SLog.of(np.linalg.norm(X)).pow(l),
        b_norm=ONE,
        c_norm=SLog.of(np.linalg.norm(C)).pow(l),
        s_bar=SLog.of(np.sum(X * C)).pow(l),
        t_bar=SLog.of(analysis.u_n @ analysis.E @ X @ analysis.q_r).pow(l),
        ab=ZERO,
    )


@dataclass(frozen=True)
class DominanceIntervals:
    u_beta: tuple[float, float] | None
    u_gamma: tuple[float, float] | None
    rho_min: float
    l_threshold: float
    bracket: float
    beta_gamma_cross: float  # t where |beta b| = |gamma c|, inf if never


def dominance_intervals(analysis: CriticalPointAnalysis, gram: SubspaceGram, cfg: MultiStepConfig,
                        inst: ProblemInstance | None = None) -> DominanceIntervals:
    l = cfg.l
    log_x, L = _growth(analysis, cfg)
    lam = -analysis.lambda_n
    log_a = gram.a_norm.log
    log_c = gram.c_norm.log
    # 1/K = 2^{l-1} (-lambda)^l / (sigma^l ||E X||^l)
    log_inv_k = (l - 1) * LN2 + l * math.log(lam) - l * math.log(analysis.sigma_r) - log_c
    inv_k = math.exp(log_inv_k) if log_inv_k < 700 else math.inf
    bracket = 1.0 - inv_k
    rho_min = math.exp(log_a) * bracket
    if bracket > 0:
        cross = -math.log1p(-inv_k) / L
    else:
        cross = math.inf
    left = max(0.0, (log_a - math.log(cfg.rho)) / L)
    u_beta = (left, cross) if (bracket <= 0 or cfg.rho > rho_min) and left < cross else None
    # gamma beats a once (1+x)^t > 1 + ||a|| / (rho K)
    log_ratio = log_a - math.log(cfg.rho) + log_inv_k
    gamma_a = math.log1p(math.exp(log_ratio)) / L if log_ratio < 700 else (log_ratio / L)
    u_gamma = (max(gamma_a, cross), math.inf) if math.isfinite(cross) else None
    l_threshold = math.inf
    if inst is not None:
        ssum = float(np.sum(analysis.sigma**2))
        xi_bar = (math.sqrt(2.0) * lam / (math.sqrt(inst.op.m * (1 + inst.op.delta_p) * ssum)
                                           * math.sqrt(inst.op.xi_sq) * analysis.sigma_r))
        if xi_bar > 1.0:
            l_threshold = 1.0 / math.log2(xi_bar)
    return DominanceIntervals(u_beta, u_gamma, rho_min, l_threshold, bracket, cross)


def _in(t: float, iv: tuple[float, float] | None) -> bool:
    return iv is not None and iv[0] < t < iv[1]


def _beta_point(analysis: CriticalPointAnalysis, cfg: MultiStepConfig, t: int) -> np.ndarray:
    _, beta, _ = tpgd_coefficients(analysis, cfg, t)
    scale = beta.root(cfg.l).value()
    return scale * np.outer(analysis.u_n, analysis.q_r)


def _gamma_point(analysis: CriticalPointAnalysis, cfg: MultiStepConfig, t: int) -> np.ndarray:
    _, _, gamma = tpgd_coefficients(analysis, cfg, t)
    if gamma.sign == 0.0:
        return np.zeros_like(analysis.Xhat)
    # gamma^{1/l} = -(1/2) (2 eta rho S_t)^{1/l} sigma_r
    scale = gamma.root(cfg.l).value()
    return scale * (analysis.E @ analysis.Xhat)


def beta_escape_point(analysis: CriticalPointAnalysis, cfg: MultiStepConfig, t: int,
                      intervals: DominanceIntervals | None = None) -> np.ndarray:
    if intervals is not None and not _in(t, intervals.u_beta):
        raise PreconditionError(f"t={t} is not inside U_beta={intervals.u_beta}")
    return _beta_point(analysis, cfg, t)


def gamma_escape_point(analysis: CriticalPointAnalysis, cfg: MultiStepConfig, t: int,
                       intervals: DominanceIntervals | None = None) -> np.ndarray:
    if intervals is not None and not _in(t, intervals.u_gamma):
        raise PreconditionError(f"t={t} is not inside U_gamma={intervals.u_gamma}")
    return _gamma_point(analysis, cfg, t)


def _as_slog(c) -> SLog:
    return c if isinstance(c, SLog) else SLog.of(c)


def lifted_subspace_loss_slog(inst: ProblemInstance, analysis: CriticalPointAnalysis, coeffs, l: int) -> SLog:
    """h^l(alpha a + beta b + gamma c) as a signed log."""
    if l < 1 or l % 2 == 0:
        raise InvalidArgumentError(f"l must be odd, got {l}")
    cs = [_as_slog(c) for c in coeffs]
    mats = subspace_factors(analysis)
    vecs, weights = [], []
    two = SLog.of(2.0)
    for i in range(3):
        for j in range(i, 3):
            w = cs[i] * cs[j]
            if w.sign == 0.0:
                continue
            vecs.append(apply_operator(inst.op, mats[i] @ mats[j].T))
            weights.append(w if i == j else two * w)
    vecs.append(np.asarray(inst.b))
    weights.append(SLog(-1.0, 0.0))
    V = np.array(vecs)
    gram = V @ V.T
    terms = []
    for i in range(len(vecs)):
        for j in range(len(vecs)):
            terms.append(weights[i] * weights[j] * SLog.of(gram[i, j]).pow(l))
    return slog_sum(terms)


def lifted_subspace_loss(inst: ProblemInstance, analysis: CriticalPointAnalysis, coeffs, l: int) -> float:
    return max(lifted_subspace_loss_slog(inst, analysis, coeffs, l).value(), 0.0)


@dataclass(frozen=True)
class TpgdRow:
    t: int
    log_beta: float
    log_gamma: float
    log_norm_a: float
    log_norm_b: float
    log_norm_c: float
    hl_value: float
    dominant: str


@dataclass
class TpgdTrajectory:
    config: MultiStepConfig
    rows: list[TpgdRow] = field(default_factory=list)
    intervals: DominanceIntervals | None = None
    gram: SubspaceGram | None = None
    chosen_t: int | None = None
    escape_type: str = "none"
    escape_point: np.ndarray | None = None
    descent_certificate: tuple[float, float, float] | None = None
    matrix_losses: tuple[float, float] | None = None
    advisories: dict = field(default_factory=dict)
    analysis: CriticalPointAnalysis | None = None
    note: str = ""

    def summary(self) -> dict:
        iv = self.intervals
        return {
            "l": self.config.l,
            "rho": self.config.rho,
            "eta": self.config.eta,
            "separation_factor": self.config.separation_factor,
            "u_beta": None if iv is None or iv.u_beta is None else list(iv.u_beta),
            "u_gamma": None if iv is None or iv.u_gamma is None else list(iv.u_gamma),
            "rho_min": None if iv is None else iv.rho_min,
            "l_threshold": None if iv is None else iv.l_threshold,
            "chosen_t": self.chosen_t,
            "escape_type": self.escape_type,
            "escape_point": None if self.escape_point is None else self.escape_point.tolist(),
            "descent_certificate": None if self.descent_certificate is None else list(self.descent_certificate),
            "matrix_losses": None if self.matrix_losses is None else list(self.matrix_losses),
            "advisories": self.advisories,
            "grad_norm": None if self.analysis is None else self.analysis.grad_norm,
            "note": self.note,
        }


TPGD_HEADER = ["t", "log_beta", "log_gamma", "log_norm_a", "log_norm_b", "log_norm_c", "hl_value"]


def tpgd_rows(traj: TpgdTrajectory) -> list[tuple]:
    return [(r.t, r.log_beta, r.log_gamma, r.log_norm_a, r.log_norm_b, r.log_norm_c, r.hl_value)
            for r in traj.rows]


def write_tpgd_csv(traj: TpgdTrajectory, path: str | Path) -> None:
    from .report import write_csv

    write_csv(path, TPGD_HEADER, tpgd_rows(traj))


def t_grid(cfg: MultiStepConfig, extra: tuple[float, ...] = ()) -> list[int]:
    pts = {1}
    t = 1.0
    while t <= cfg.t_max:
        pts.add(int(round(t)))
        t *= cfg.grid_ratio
    for e in extra:
        if math.isfinite(e) and 0 < e <= cfg.t_max:
            for k in (math.floor(e), math.floor(e) + 1):
                if k >= 1:
                    pts.add(int(k))
    return sorted(p for p in pts if p <= cfg.t_max)


def regime_advisories(inst: ProblemInstance, analysis: CriticalPointAnalysis, l: int) -> dict:
    """Distance window and lifting-order conditions under which the theory applies."""
    dp = inst.op.delta_p
    D = analysis.Xhat @ analysis.Xhat.T - inst.Mstar
    d = float(np.sum(D * D))
    base = (1 + dp) / (1 - dp) * analysis.sigma_r**2 * float(np.trace(inst.Mstar))
    in_window = base <= d <= 2 * base
    l_min = math.nan
    if d > 0 and base > 0:
        denom = 1.0 - math.log2(2 * base / d)
        l_min = 1.0 / denom if denom > 0 else math.inf
    return {
        "distance_sq": d,
        "window": [base, 2 * base],
        "distance_in_window": bool(in_window),
        "l_min": l_min,
        "l_ok": bool(l > l_min) if not math.isnan(l_min) else False,
        "delta_p": dp,
        "delta_p_configured": bool(inst.op.delta_configured),
    }


def _row(analysis, gram, cfg, t, inst, compute_hl: bool) -> tuple[TpgdRow, tuple[SLog, SLog, SLog]]:
    coeffs = tpgd_coefficients(analysis, cfg, t)
    la = gram.a_norm.log
    lb = coeffs[1].log
    lc = coeffs[2].log + gram.c_norm.log if coeffs[2].sign != 0 else -math.inf
    f = math.log(cfg.separation_factor)
    if lb > max(la, lc) + f:
        dom = "beta"
    elif lc > max(la, lb) + f:
        dom = "gamma"
    elif la > max(lb, lc) + f:
        dom = "alpha"
    else:
        dom = "none"
    hl = lifted_subspace_loss(inst, analysis, coeffs, cfg.l) if compute_hl else math.nan
    return TpgdRow(t, coeffs[1].log, coeffs[2].log, la, 0.0, gram.c_norm.log, hl, dom), coeffs


def auto_escape(inst: ProblemInstance, Xhat, cfg: MultiStepConfig, tol: float = 1e-6,
                analysis: CriticalPointAnalysis | None = None) -> TpgdTrajectory:
    """Scan t for the first dominant-term escape point that certifiably lowers both objectives."""
    traj = TpgdTrajectory(cfg)
    if analysis is None:
        analysis = analyze_critical_point(inst, Xhat, tol)
    traj.analysis = analysis
    if not analysis.has_negative_curvature:
        traj.note = "no negative curvature at X_hat"
        return traj
    l = cfg.l
    gram = subspace_gram(inst, analysis, l)
    iv = dominance_intervals(analysis, gram, cfg, inst)
    traj.gram, traj.intervals = gram, iv
    traj.advisories = regime_advisories(inst, analysis, l)
    h_hat = lifted_rank1_loss(inst, analysis.Xhat, l)
    loss_hat = matrix_loss(inst, analysis.Xhat)
    extra = tuple(e for e in (*(iv.u_beta or ()), *(iv.u_gamma or ())) if math.isfinite(e))
    row0, _ = _row(analysis, gram, cfg, 0, inst, True)
    traj.rows.append(row0)
    for t in t_grid(cfg, extra):
        row, coeffs = _row(analysis, gram, cfg, t, inst, True)
        traj.rows.append(row)
        if row.dominant not in ("beta", "gamma") or not row.hl_value < h_hat:
            continue
        Xc = _beta_point(analysis, cfg, t) if row.dominant == "beta" else _gamma_point(analysis, cfg, t)
        if not np.all(np.isfinite(Xc)):
            continue
        loss_c = matrix_loss(inst, Xc)
        if loss_c < loss_hat:
            traj.chosen_t = t
            traj.escape_type = row.dominant
            traj.escape_point = Xc
            traj.descent_certificate = (h_hat, row.hl_value, lifted_rank1_loss(inst, Xc, l))
            traj.matrix_losses = (loss_hat, loss_c)
            return traj
    traj.note = "no t in the grid met dominance and both descent checks"
    return traj
