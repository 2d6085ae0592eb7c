"""Shared oracles and fixtures."""
from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np
import pytest

from rubriclearn.records import PreferencePair

GOLDEN = Path(__file__).parent / "golden"
FIXTURES = Path(__file__).parent / "fixtures"


def eig_oracle(E: np.ndarray, eps: float) -> float:
    """Coding rate from the eigenvalues of the n x n Gram matrix."""
    n = E.shape[1]
    if n == 0:
        return 0.0
    lam = np.clip(np.linalg.eigvalsh(E.T @ E), 0.0, None)
    return 0.5 * float(np.sum(np.log1p(lam / (eps ** 2 * n))))


def slogdet_oracle(E: np.ndarray, eps: float) -> float:
    n = E.shape[1]
    if n == 0:
        return 0.0
    d = E.shape[0]
    sign, val = np.linalg.slogdet(np.eye(d) + (E @ E.T) / (eps ** 2 * n))
    assert sign > 0
    return 0.5 * val


def random_unit(rng: np.random.Generator, d: int, n: int) -> np.ndarray:
    E = rng.standard_normal((d, n))
    return E / np.linalg.norm(E, axis=0, keepdims=True)


def best_subset(vectors: dict, size: int, eps: float):
    """Brute-force the size-k subset with the largest coding rate."""
    best, best_val = None, -np.inf
    for combo in itertools.combinations(sorted(vectors), size):
        val = eig_oracle(np.column_stack([vectors[k] for k in combo]), eps)
        if val > best_val + 1e-12:
            best, best_val = combo, val
    return set(best), best_val


def e(i: int, d: int) -> np.ndarray:
    v = np.zeros(d)
    v[i] = 1.0
    return v


@pytest.fixture
def pair() -> PreferencePair:
    return PreferencePair("g1", "What is 2+2?", "4", "5", "A", "Response 1 is correct.")


def golden(name: str) -> str:
    return (GOLDEN / name).read_text(encoding="utf-8")
