"""Spectral data at a stationary point of the factored objective."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePointError, PreconditionError
from .model import ProblemInstance, _check_X, loss_and_grad
from .sensing import normal_map

RANK_CUTOFF = 1e-8
TIE_TOL = 1e-10


def _orient(vecs: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs, signs


@dataclass(frozen=True)
class CriticalPointAnalysis:
    Xhat: np.ndarray
    grad_f: np.ndarray
    lam: np.ndarray          # descending
    U: np.ndarray            # columns match lam
    sigma: np.ndarray        # descending, numerical rank only
    V: np.ndarray
    Q: np.ndarray            # rows are right singular vectors q_phi
    E: np.ndarray
    grad_norm: float
    loss: float
    lambda_multiplicity: int
    sigma_multiplicity: int

    @property
    def lambda_n(self) -> float:
        return float(self.lam[-1])

    @property
    def u_n(self) -> np.ndarray:
        return self.U[:, -1]

    @property
    def sigma_r(self) -> float:
        return float(self.sigma[-1])

    @property
    def v_r(self) -> np.ndarray:
        return self.V[:, -1]

    @property
    def q_r(self) -> np.ndarray:
        return self.Q[-1]

    @property
    def rank(self) -> int:
        return self.sigma.size

    @property
    def alignment(self) -> float:
        """<E, u_n u_n^T>."""
        u = self.u_n
        return float(u @ self.E @ u)

    @property
    def has_negative_curvature(self) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.lam))))
        return self.lambda_n < -1e-14 * scale

    @property
    def orthogonality(self) -> float:
        """max_phi |u_n^T v_phi|; zero at an exact stationary point with lambda_n != 0."""
        return float(np.max(np.abs(self.u_n @ self.V)))

    def curvature_bound_holds(self, delta_p: float) -> bool:
        return self.sigma_r**2 * (1.0 + delta_p) + self.lambda_n > 0

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam.tolist(),
            "U": self.U.tolist(),
            "sigma": self.sigma.tolist(),
            "V": self.V.tolist(),
            "Q": self.Q.tolist(),
            "E": self.E.tolist(),
            "grad_norm": self.grad_norm,
            "loss": self.loss,
            "lambda_n": self.lambda_n,
            "sigma_r": self.sigma_r,
            "alignment": self.alignment,
            "has_negative_curvature": self.has_negative_curvature,
            "lambda_multiplicity": self.lambda_multiplicity,
            "sigma_multiplicity": self.sigma_multiplicity,
            "Xhat": self.Xhat.tolist(),
        }


def analyze_critical_point(inst: ProblemInstance, Xhat, tol: float = 1e-6,
                           delta_p: float | None = None) -> CriticalPointAnalysis:
    X = _check_X(inst, Xhat).copy()
    loss, g, G = loss_and_grad(inst, X)
    gnorm = float(np.linalg.norm(g))
    if gnorm > tol * max(1.0, float(np.linalg.norm(X))):
        raise PreconditionError(f"point is not stationary: grad norm {gnorm:.3e} exceeds tolerance {tol:.1e}")
    G = 0.5 * (G + G.T)
    lam, U = np.linalg.eigh(G)
    lam, U = lam[::-1], U[:, ::-1]
    U, _ = _orient(U)
    Vfull, s, Qt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise DegeneratePointError("X is zero; no singular direction available")
    keep = s > RANK_CUTOFF * s[0]
    rank = int(np.sum(keep))
    if rank < X.shape[1]:
        raise DegeneratePointError(
            f"X is rank deficient (numerical rank {rank} < {X.shape[1]}, sigma_min={s[-1]:.3e})")
    V, signs = _orient(Vfull[:, :rank])
    Q = Qt[:rank] * signs[:, None]
    u, v = U[:, -1], V[:, -1]
    E = normal_map(inst.op, np.outer(u, v) + np.outer(v, u))
    E = 0.5 * (E + E.T)
    lam_mult = int(np.sum(np.abs(lam - lam[-1]) <= TIE_TOL))
    sig_mult = int(np.sum(np.abs(s[:rank] - s[rank - 1]) <= TIE_TOL))
    out = CriticalPointAnalysis(X, G, lam, U, s[:rank].copy(), V, Q, E, gnorm, loss, lam_mult, sig_mult)
    dp = inst.op.delta_p if delta_p is None else delta_p
    if out.has_negative_curvature and not out.curvature_bound_holds(dp):
        warnings.warn("sigma_r^2 (1 + delta_p) + lambda_n <= 0 at this point", RuntimeWarning, stacklevel=2)
    return out
