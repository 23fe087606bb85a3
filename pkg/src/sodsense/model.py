"""Problem instances and the factored matrix-sensing objective."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .logmath import SLog, slog_sum
from .sensing import (
    SensingOperator,
    adjoint_operator,
    apply_operator,
    gaussian_ensemble,
    normal_map,
    pmc_operator,
)

REAL_WORLD_MATRICES = (
    ((0.0783, 0.2372, -0.0439), (0.2372, -0.0397, 0.1456), (-0.0439, 0.1456, -0.4724)),
    ((0.0389, 0.0536, -0.0059), (0.0536, 0.4614, -0.3907), (-0.0059, -0.3907, 0.2760)),
    ((0.0293, -0.1456, -0.1656), (-0.1456, 0.3257, 0.2528), (-0.1656, 0.2528, -0.0078)),
    ((0.0762, 0.3193, -0.3338), (0.3193, -0.3364, 0.5847), (-0.3338, 0.5847, 0.1873)),
    ((-0.0889, 0.7089, 0.4472), (0.7089, 0.3788, 0.0902), (0.4472, 0.0902, -0.3193)),
    ((0.4097, 0.1190, 0.2078), (0.1190, 0.2282, -0.2274), (0.2078, -0.2274, 0.4046)),
)

KINDS = ("basic", "pmc", "real_world", "gaussian")


@dataclass(frozen=True)
class ProblemInstance:
    op: SensingOperator
    Z: np.ndarray
    r_search: int
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        Z = np.array(self.Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        if Z.ndim != 2 or Z.shape[0] != self.op.n:
            raise InvalidArgumentError(f"Z must have {self.op.n} rows, got shape {Z.shape}")
        if self.r_search < Z.shape[1]:
            raise InvalidArgumentError("r_search must be at least the true rank")
        Z.setflags(write=False)
        Mstar = Z @ Z.T
        Mstar.setflags(write=False)
        b = apply_operator(self.op, Mstar)
        b.setflags(write=False)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "Mstar", Mstar)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.op.n

    @property
    def r(self) -> int:
        return self.Z.shape[1]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params,
            "Z": self.Z.tolist(),
            "operator": self.op.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemInstance":
        try:
            op = SensingOperator.from_dict(d["operator"])
            Z = np.asarray(d["Z"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"malformed instance record: {exc}") from exc
        if Z.ndim == 1:
            Z = Z[:, None]
        params = dict(d.get("params", {}))
        return cls(op, Z, int(params.get("r_search", Z.shape[1])), d.get("kind", "custom"), params)


def instance_to_json(inst: ProblemInstance, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(inst.to_dict(), fh)


def instance_from_json(path: str | Path) -> ProblemInstance:
    with open(path) as fh:
        return ProblemInstance.from_dict(json.load(fh))


def basic_operator(delta_p: float = 0.0) -> SensingOperator:
    s = math.sqrt(3.0) / 2.0
    mats = np.array([
        [[1.0, 0.0], [0.0, 0.5]],
        [[0.0, s], [s, 0.0]],
        [[0.0, 0.0], [0.0, s]],
    ])
    return SensingOperator(mats, delta_p, delta_configured=delta_p != 0.0)


def pmc_ground_truth(n: int) -> np.ndarray:
    """z_i = 1 at odd 1-based positions, 0 at even ones."""
    return (np.arange(1, n + 1) % 2 == 1).astype(float)[:, None]


def make_instance(kind: str, params: dict | None = None) -> ProblemInstance:
    params = dict(params or {})
    try:
        if kind == "basic":
            op = basic_operator(float(params.get("delta_p", 0.0)))
            Z = np.array([[1.0], [0.0]])
        elif kind == "pmc":
            n = int(params["n"])
            op = pmc_operator(n, float(params["epsilon"]))
            Z = pmc_ground_truth(n)
        elif kind == "real_world":
            delta = float(params.get("delta_p", 0.0))
            op = SensingOperator(np.array(REAL_WORLD_MATRICES), delta, delta_configured=delta != 0.0)
            Z = np.array([[1.0], [0.0], [0.0]])
        elif kind == "gaussian":
            n, m = int(params["n"]), int(params["m"])
            op = gaussian_ensemble(n, m, int(params["seed"]), float(params.get("delta_p", 0.0)))
            Z = np.asarray(params["Z"], dtype=float)
            params["Z"] = Z.tolist()
        else:
            raise InvalidArgumentError(f"unknown instance kind {kind!r}; expected one of {KINDS}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidArgumentError):
            raise
        raise InvalidArgumentError(f"invalid params for kind {kind!r}: {exc}") from exc
    Z = Z if Z.ndim == 2 else Z[:, None]
    r_search = int(params.get("r_search", Z.shape[1]))
    return ProblemInstance(op, Z, r_search, kind, params)


def _check_X(inst: ProblemInstance, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape != (inst.n, inst.r_search):
        raise InvalidArgumentError(f"X must be {inst.n}x{inst.r_search}, got {X.shape}")
    return X


def residual(inst: ProblemInstance, X) -> np.ndarray:
    """A(XX^T) - b, evaluated as A(XX^T - M*) for accuracy."""
    X = _check_X(inst, X)
    return apply_operator(inst.op, X @ X.T - inst.Mstar)


def matrix_loss(inst: ProblemInstance, X) -> float:
    X = _check_X(inst, X)
    D = X @ X.T - inst.Mstar
    if inst.op.weights is not None:
        return 0.5 * float(np.sum((inst.op.weights * D) ** 2))
    res = apply_operator(inst.op, D)
    return 0.5 * float(res @ res)


def grad_f(inst: ProblemInstance, X) -> np.ndarray:
    """Gradient of f(M) = 1/2 ||A(M) - b||^2 at M = XX^T."""
    X = _check_X(inst, X)
    return normal_map(inst.op, X @ X.T - inst.Mstar)


def matrix_grad(inst: ProblemInstance, X) -> np.ndarray:
    X = _check_X(inst, X)
    return 2.0 * grad_f(inst, X) @ X


def loss_and_grad(inst: ProblemInstance, X) -> tuple[float, np.ndarray, np.ndarray]:
    """(h(X), grad h(X), grad f(XX^T)) sharing one residual evaluation."""
    X = _check_X(inst, X)
    D = X @ X.T - inst.Mstar
    W = inst.op.weights
    if W is not None:
        WD = W * D
        loss = 0.5 * float(np.sum(WD * WD))
        G = W * WD
    else:
        res = apply_operator(inst.op, D)
        loss = 0.5 * float(res @ res)
        G = adjoint_operator(inst.op, res)
    return loss, 2.0 * G @ X, G


def lifted_tensor_distance(p: np.ndarray, b: np.ndarray, l: int, d: np.ndarray | None = None) -> float:
    """||p^(x)l - b^(x)l||^2 via the telescoped difference, accurate when p is near b."""
    p = np.asarray(p, dtype=float)
    b = np.asarray(b, dtype=float)
    d = p - b if d is None else np.asarray(d, dtype=float)
    pp, bb, pb = SLog.of(p @ p), SLog.of(b @ b), SLog.of(p @ b)
    dd, dp, db = SLog.of(d @ d), SLog.of(d @ p), SLog.of(d @ b)
    two = SLog.of(2.0)
    terms = []
    # p^l - b^l = sum_j p^(j) (x) d (x) b^(l-1-j); pair positions j <= k.
    for j in range(l):
        terms.append(pp.pow(j) * dd * bb.pow(l - 1 - j))
        for k in range(j + 1, l):
            terms.append(two * pp.pow(j) * dp * pb.pow(k - j - 1) * db * bb.pow(l - 1 - k))
    return max(slog_sum(terms).value(), 0.0)


def lifted_rank1_loss(inst: ProblemInstance, X, l: int, allow_even: bool = False) -> float:
    """h^l at the rank-one lift vec(X)^(x)l, i.e. ||p^(x)l - b^(x)l||^2 with p = A(XX^T)."""
    if not isinstance(l, (int, np.integer)) or l < 1:
        raise InvalidArgumentError(f"lifting order must be a positive integer, got {l!r}")
    if not allow_even and (l < 3 or l % 2 == 0):
        raise InvalidArgumentError(f"lifting order must be odd and >= 3, got {l}")
    X = _check_X(inst, X)
    p = apply_operator(inst.op, X @ X.T)
    d = residual(inst, X)
    return lifted_tensor_distance(p, inst.b, int(l), d)
