"""Linear sensing operators on symmetric matrices.

An operator holds m symmetric n x n matrices A_i and maps
M -> (<A_i, M>)_i. Its adjoint maps y -> sum_i y_i A_i.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError

SYM_TOL = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def child_seed(seed: int, index: int) -> int:
    """Derive an independent 64-bit seed for trial ``index``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SensingOperator:
    matrices: np.ndarray
    delta_p: float = 0.0
    # Entrywise weights W with A*A(M) = (W*W) o M for symmetric M, when known.
    weights: np.ndarray | None = field(default=None, compare=False)
    delta_configured: bool = True

    def __post_init__(self):
        mats = np.array(self.matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2] or mats.shape[0] < 1:
            raise InvalidArgumentError(f"matrices must have shape (m, n, n), got {mats.shape}")
        if not np.all(np.isfinite(mats)):
            raise InvalidArgumentError("matrices contain non-finite entries")
        asym = np.max(np.abs(mats - mats.transpose(0, 2, 1)))
        if asym > SYM_TOL:
            raise InvalidArgumentError(f"sensing matrices not symmetric (max deviation {asym:.3e})")
        if not (0.0 <= self.delta_p < 1.0):
            raise InvalidArgumentError(f"delta_p must lie in [0, 1), got {self.delta_p}")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "delta_p", float(self.delta_p))
        if self.weights is not None:
            w = np.array(self.weights, dtype=float)
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        flat = mats.reshape(mats.shape[0], -1)
        flat.setflags(write=False)
        object.__setattr__(self, "_flat", flat)
        xi = max(float(np.max(np.abs(np.linalg.eigvalsh(A)))) for A in mats) ** 2
        object.__setattr__(self, "_xi_sq", xi)

    @property
    def m(self) -> int:
        return self.matrices.shape[0]

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    @property
    def xi_sq(self) -> float:
        return self._xi_sq

    @property
    def flat(self) -> np.ndarray:
        return self._flat

    def with_delta(self, delta_p: float) -> "SensingOperator":
        return SensingOperator(self.matrices, delta_p, self.weights, True)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "delta_p": self.delta_p,
            "matrices": self.matrices.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SensingOperator":
        try:
            mats = np.asarray(d["matrices"], dtype=float)
            n, m = int(d["n"]), int(d["m"])
            delta = float(d.get("delta_p", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"malformed operator record: {exc}") from exc
        if mats.shape != (m, n, n):
            raise InvalidArgumentError(f"matrices shape {mats.shape} does not match n={n}, m={m}")
        return cls(mats, delta)


def operator_from_json(path: str | Path) -> SensingOperator:
    with open(path) as fh:
        return SensingOperator.from_dict(json.load(fh))


def operator_to_json(op: SensingOperator, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(op.to_dict(), fh)


def _check_square(op: SensingOperator, M: np.ndarray, name: str = "M") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape != (op.n, op.n):
        raise InvalidArgumentError(f"{name} must be {op.n}x{op.n}, got {M.shape}")
    return M


def apply_operator(op: SensingOperator, M: np.ndarray) -> np.ndarray:
    """Return the measurement vector (<A_i, M>)_i."""
    M = _check_square(op, M)
    return op.flat @ M.ravel()


def adjoint_operator(op: SensingOperator, y: np.ndarray) -> np.ndarray:
    """Return sum_i y_i A_i."""
    y = np.asarray(y, dtype=float)
    if y.shape != (op.m,):
        raise InvalidArgumentError(f"y must have length {op.m}, got shape {y.shape}")
    return (y @ op.flat).reshape(op.n, op.n)


def normal_map(op: SensingOperator, M: np.ndarray) -> np.ndarray:
    """A*A(M). Uses the entrywise weights when the operator has them and M is symmetric."""
    M = _check_square(op, M)
    if op.weights is not None and np.allclose(M, M.T, rtol=0, atol=1e-14 * (1 + np.abs(M).max())):
        return op.weights**2 * M
    return adjoint_operator(op, apply_operator(op, M))


def correlation_sum(op: SensingOperator, P: np.ndarray, Q: np.ndarray) -> float:
    """sum_i <A_i, P> <A_i, Q>."""
    P = _check_square(op, P, "P")
    Q = _check_square(op, Q, "Q")
    return float(apply_operator(op, P) @ apply_operator(op, Q))


def _gaussian_matrices(n: int, m: int, rng: np.random.Generator, draws: int | None = None) -> np.ndarray:
    shape = (m, n, n) if draws is None else (draws, m, n, n)
    G = rng.standard_normal(shape) / np.sqrt(2 * m)
    iu = np.triu_indices(n, 1)
    out = np.zeros(shape)
    idx = np.arange(n)
    out[..., idx, idx] = G[..., idx, idx] * np.sqrt(2.0)
    out[..., iu[0], iu[1]] = G[..., iu[0], iu[1]]
    out[..., iu[1], iu[0]] = G[..., iu[0], iu[1]]
    return out


def gaussian_ensemble(n: int, m: int, seed: int, delta_p: float = 0.0) -> SensingOperator:
    """Symmetric Gaussian matrices: diagonal ~ N(0, 1/m), off-diagonal ~ N(0, 1/(2m))."""
    if n < 1 or m < 1:
        raise InvalidArgumentError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    mats = _gaussian_matrices(n, m, make_rng(seed))
    return SensingOperator(mats, delta_p, delta_configured=delta_p != 0.0)


def gaussian_correlation_samples(n: int, m: int, P: np.ndarray, Q: np.ndarray, draws: int, seed: int,
                                 batch: int = 20000) -> np.ndarray:
    """Correlation sums S(P, Q) over independent Gaussian ensembles."""
    rng = make_rng(seed)
    out = np.empty(draws)
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    for start in range(0, draws, batch):
        k = min(batch, draws - start)
        A = _gaussian_matrices(n, m, rng, k)
        psi = np.einsum("dijk,jk->di", A, P)
        omg = np.einsum("dijk,jk->di", A, Q)
        out[start:start + k] = np.sum(psi * omg, axis=1)
    return out


def pmc_weights(n: int, epsilon: float) -> np.ndarray:
    """Weight 1 on the diagonal and on rows/columns with even 1-based index, epsilon elsewhere."""
    W = np.full((n, n), float(epsilon))
    even = np.arange(1, n + 1) % 2 == 0
    W[even, :] = 1.0
    W[:, even] = 1.0
    np.fill_diagonal(W, 1.0)
    return W


def pmc_operator(n: int, epsilon: float) -> SensingOperator:
    """Perturbed matrix completion operator with n(n+1)/2 symmetric measurements."""
    if n < 2:
        raise InvalidArgumentError(f"PMC needs n >= 2, got {n}")
    if not (0.0 < epsilon <= 1.0):
        raise InvalidArgumentError(f"epsilon must lie in (0, 1], got {epsilon}")
    W = pmc_weights(n, epsilon)
    iu, ju = np.triu_indices(n)
    m = iu.size
    mats = np.zeros((m, n, n))
    k = np.arange(m)
    diag = iu == ju
    scale = np.where(diag, 1.0, 1.0 / np.sqrt(2.0)) * W[iu, ju]
    mats[k, iu, ju] = scale
    mats[k, ju, iu] = scale
    return SensingOperator(mats, (1.0 - epsilon) / (1.0 + epsilon), weights=W)
