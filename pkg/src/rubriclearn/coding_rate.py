"""Coding rate of a set of embedding columns and its marginal gains.

All matrices here are column-stacked: an embedding matrix ``E`` has shape
``(d, n)`` with one unit-norm column per rubric. The coding rate is

    C(E, eps) = 1/2 * logdet(I + E^T E / (eps^2 * n))

with the natural log. Whichever Gram form (``n x n`` or ``d x d``) is smaller
is factorized; the two agree by Sylvester's determinant identity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InputError, NumericalError

UNIT_NORM_TOL = 1e-9
MAX_JITTER = 1e-6


@dataclass(frozen=True)
class CodingRateParams:
    epsilon: float = 0.5
    jitter: float = 1e-10

    def __post_init__(self):
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise InputError(f"epsilon must be a positive finite number, got {self.epsilon}")
        if not (0 <= self.jitter <= MAX_JITTER):
            raise InputError(f"jitter must lie in [0, {MAX_JITTER}], got {self.jitter}")


def normalize_columns(E) -> np.ndarray:
    """Return ``E`` with every column scaled to unit Euclidean norm.

    Zero or non-finite columns are rejected rather than silently dropped.
    """
    E = _as_matrix(E)
    norms = np.linalg.norm(E, axis=0)
    bad = np.flatnonzero(~(norms > 0))
    if bad.size:
        raise InputError(f"cannot normalize zero-norm column(s) {bad.tolist()}")
    return E / norms


def normalize_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    return normalize_columns(v[:, None])[:, 0]


def check_unit_columns(E, tol: float = UNIT_NORM_TOL) -> None:
    E = _as_matrix(E)
    if E.shape[1] == 0:
        return
    dev = np.abs(np.linalg.norm(E, axis=0) - 1.0)
    if dev.max() > tol:
        raise InputError(f"column {int(dev.argmax())} is not unit norm (deviation {dev.max():.3g})")


def _as_matrix(E) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    if E.ndim != 2:
        raise InputError(f"embedding matrix must be 2-D (d, n), got shape {E.shape}")
    if not np.all(np.isfinite(E)):
        raise InputError("embedding matrix contains non-finite entries")
    return E


def _cholesky(M: np.ndarray, jitter: float) -> np.ndarray:
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(M + jitter * np.eye(M.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky factorization failed after jitter={jitter}") from exc


def _logdet_spd(M: np.ndarray, jitter: float) -> float:
    L = _cholesky(M, jitter)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _scaled_gram(E: np.ndarray, scale: float) -> np.ndarray:
    """``I + scale * G`` where G is the smaller of E^T E and E E^T."""
    d, n = E.shape
    G = E.T @ E if n <= d else E @ E.T
    return np.eye(G.shape[0]) + scale * G


def coding_rate(E, params: CodingRateParams = CodingRateParams()) -> float:
    E = _as_matrix(E)
    n = E.shape[1]
    if n == 0:
        return 0.0
    scale = 1.0 / (params.epsilon ** 2 * n)
    return 0.5 * _logdet_spd(_scaled_gram(E, scale), params.jitter)


def coding_rate_dual(E, params: CodingRateParams = CodingRateParams()) -> tuple[float, float]:
    """Coding rate evaluated through both Gram forms, ``(n x n, d x d)``."""
    E = _as_matrix(E)
    n = E.shape[1]
    if n == 0:
        return 0.0, 0.0
    scale = 1.0 / (params.epsilon ** 2 * n)
    small = np.eye(n) + scale * (E.T @ E)
    large = np.eye(E.shape[0]) + scale * (E @ E.T)
    return 0.5 * _logdet_spd(small, params.jitter), 0.5 * _logdet_spd(large, params.jitter)


def candidate_gains(E, V, params: CodingRateParams = CodingRateParams(), base_rate: float | None = None) -> np.ndarray:
    """Marginal coding-rate gain of appending each column of ``V`` to ``E``.

    One factorization of the enlarged-scale Gram matrix is shared by all
    candidates; each candidate then costs a triangular solve plus a Schur
    complement. Candidates whose Schur complement underflows fall back to
    direct recomputation.
    """
    E = _as_matrix(E)
    V = _as_matrix(V)
    d, n = E.shape
    if V.shape[0] != d and n > 0:
        raise InputError(f"candidate dimension {V.shape[0]} != base dimension {d}")
    if base_rate is None:
        base_rate = coding_rate(E, params)
    m = V.shape[1]
    if m == 0:
        return np.zeros(0)
    scale = 1.0 / (params.epsilon ** 2 * (n + 1))
    sq_norms = np.einsum("ij,ij->j", V, V)
    if n == 0:
        return 0.5 * np.log1p(scale * sq_norms) - base_rate

    if n <= d:
        # det([[M, s*b], [s*b^T, 1 + s*|v|^2]]) = det(M) * (1 + s*|v|^2 - s^2 b^T M^-1 b)
        M = np.eye(n) + scale * (E.T @ E)
        L = _cholesky(M, params.jitter)
        W = solve_triangular(L, E.T @ V, lower=True, check_finite=False)
        schur = 1.0 + scale * sq_norms - scale ** 2 * np.einsum("ij,ij->j", W, W)
    else:
        # det(M + s v v^T) = det(M) * (1 + s v^T M^-1 v)
        M = np.eye(d) + scale * (E @ E.T)
        L = _cholesky(M, params.jitter)
        W = solve_triangular(L, V, lower=True, check_finite=False)
        schur = 1.0 + scale * np.einsum("ij,ij->j", W, W)
    logdet_M = 2.0 * float(np.sum(np.log(np.diag(L))))

    gains = np.empty(m)
    ok = schur > 0
    gains[ok] = 0.5 * (logdet_M + np.log(schur[ok])) - base_rate
    for j in np.flatnonzero(~ok):
        gains[j] = coding_rate(np.column_stack([E, V[:, j]]), params) - base_rate
    return gains


def marginal_gain(base, candidate, params: CodingRateParams = CodingRateParams()) -> float:
    """``C(base + [candidate]) - C(base)``. May be negative."""
    base = _as_matrix(base)
    candidate = np.asarray(candidate, dtype=float)
    if candidate.ndim != 1:
        raise InputError("candidate must be a 1-D vector")
    if not np.all(np.isfinite(candidate)):
        raise InputError("candidate contains non-finite entries")
    if base.shape[1] > 0 and candidate.shape[0] != base.shape[0]:
        raise InputError(f"candidate dimension {candidate.shape[0]} != base dimension {base.shape[0]}")
    if base.shape[1] == 0:
        base = np.zeros((candidate.shape[0], 0))
    return float(candidate_gains(base, candidate[:, None], params)[0])
