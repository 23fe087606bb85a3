"""First-order baselines run before and after an escape."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergedError, InvalidArgumentError
from .model import ProblemInstance, _check_X, loss_and_grad, matrix_grad
from .sensing import adjoint_operator, apply_operator, make_rng

DIVERGENCE_FACTOR = 1e12


@dataclass(frozen=True)
class GdConfig:
    step: float = 1e-3
    max_iters: int = 1000
    grad_tol: float = 0.0
    record_every: int = 1

    def __post_init__(self):
        if not self.step > 0:
            raise InvalidArgumentError(f"step must be positive, got {self.step}")
        if self.max_iters < 1:
            raise InvalidArgumentError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.grad_tol < 0:
            raise InvalidArgumentError("grad_tol must be nonnegative")
        if self.record_every < 1:
            raise InvalidArgumentError("record_every must be >= 1")


@dataclass
class Trajectory:
    iters: list[int] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    distances: list[float] = field(default_factory=list)
    terminated_by: str = "budget"

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    def _append(self, k: int, X: np.ndarray, loss: float, gnorm: float, dist: float) -> None:
        self.iters.append(k)
        self.iterates.append(X.copy())
        self.losses.append(loss)
        self.grad_norms.append(gnorm)
        self.distances.append(dist)

    def extend(self, other: "Trajectory", offset: int) -> None:
        """Append ``other`` with iteration indices shifted by ``offset``."""
        start = 1 if other.iters and other.iters[0] == 0 and self.iters else 0
        for k, X, lo, g, d in zip(other.iters[start:], other.iterates[start:], other.losses[start:],
                                  other.grad_norms[start:], other.distances[start:]):
            self._append(k + offset, X, lo, g, d)
        self.terminated_by = other.terminated_by

    def rows(self) -> list[tuple[int, float, float, float]]:
        return list(zip(self.iters, self.losses, self.grad_norms, self.distances))


TRAJECTORY_HEADER = ["iter", "loss", "grad_norm", "dist_to_Mstar"]


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    from .report import write_csv

    write_csv(path, TRAJECTORY_HEADER, traj.rows())


def distance_to_target(inst: ProblemInstance, X) -> float:
    X = _check_X(inst, X)
    return float(np.linalg.norm(X @ X.T - inst.Mstar))


def gradient_descent(inst: ProblemInstance, X0, cfg: GdConfig) -> Trajectory:
    """Plain GD on h(X) = 1/2 ||A(XX^T) - b||^2."""
    X = _check_X(inst, X0).copy()
    traj = Trajectory()
    loss, g, _ = loss_and_grad(inst, X)
    if not np.isfinite(loss):
        raise DivergedError("initial loss is not finite", X.copy(), 0)
    limit = DIVERGENCE_FACTOR * max(loss, np.finfo(float).tiny)
    gnorm = float(np.linalg.norm(g))
    traj._append(0, X, loss, gnorm, distance_to_target(inst, X))
    last_good = X.copy()
    for k in range(1, cfg.max_iters + 1):
        if gnorm < cfg.grad_tol:
            traj.terminated_by = "tol"
            break
        X = X - cfg.step * g
        loss, g, _ = loss_and_grad(inst, X)
        if not np.isfinite(loss) or loss > limit or not np.all(np.isfinite(g)):
            raise DivergedError(f"GD diverged at iteration {k}", last_good, k - 1)
        last_good = X
        gnorm = float(np.linalg.norm(g))
        if k % cfg.record_every == 0 or k == cfg.max_iters or gnorm < cfg.grad_tol:
            traj._append(k, X, loss, gnorm, distance_to_target(inst, X))
    else:
        if gnorm < cfg.grad_tol:
            traj.terminated_by = "tol"
    if traj.iters[-1] != k and traj.terminated_by == "budget":
        traj._append(k, X, loss, gnorm, distance_to_target(inst, X))
    return traj


def small_init(n: int, r_search: int, zeta: float, seed: int) -> np.ndarray:
    """zeta times a standard normal n x r_search matrix."""
    if zeta < 0:
        raise InvalidArgumentError(f"zeta must be nonnegative, got {zeta}")
    return zeta * make_rng(seed).standard_normal((n, r_search))


def is_stationary(inst: ProblemInstance, X, tol: float) -> bool:
    if tol < 0:
        raise InvalidArgumentError("tol must be nonnegative")
    X = _check_X(inst, X)
    return float(np.linalg.norm(matrix_grad(inst, X))) <= tol * max(1.0, float(np.linalg.norm(X)))


def estimate_smoothness(inst: ProblemInstance, X, iters: int = 20, fd_step: float = 1e-6, seed: int = 0) -> float:
    """Largest Hessian eigenvalue magnitude of h at X by power iteration on FD Hessian-vector products."""
    X = _check_X(inst, X)
    v = make_rng(seed).standard_normal(X.shape)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        hv = (matrix_grad(inst, X + fd_step * v) - matrix_grad(inst, X - fd_step * v)) / (2 * fd_step)
        lam = float(np.linalg.norm(hv))
        if lam == 0.0:
            break
        v = hv / lam
    return lam


def sgd_baseline(inst: ProblemInstance, X0, cfg: GdConfig, seed: int) -> Trajectory:
    """Single-measurement stochastic gradient; a qualitative baseline only."""
    X = _check_X(inst, X0).copy()
    rng = make_rng(seed)
    m = inst.op.m
    traj = Trajectory()
    loss, g, _ = loss_and_grad(inst, X)
    traj._append(0, X, loss, float(np.linalg.norm(g)), distance_to_target(inst, X))
    for k in range(1, cfg.max_iters + 1):
        i = int(rng.integers(m))
        y = np.zeros(m)
        y[i] = m * (apply_operator(inst.op, X @ X.T - inst.Mstar)[i])
        X = X - cfg.step * 2.0 * adjoint_operator(inst.op, y) @ X
        if k % cfg.record_every == 0 or k == cfg.max_iters:
            loss, g, _ = loss_and_grad(inst, X)
            if not np.isfinite(loss):
                raise DivergedError(f"SGD diverged at iteration {k}", traj.final, k)
            traj._append(k, X, loss, float(np.linalg.norm(g)), distance_to_target(inst, X))
    return traj
