"""Shared fixtures and independent dense oracles.

The helpers here deliberately avoid the package's embedding and
exponentiation code paths: they walk basis indices digit by digit so that
agreement with the library is a genuine cross-check, not a tautology.
"""
from __future__ import annotations

import itertools

import numpy as np

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_kron(word: str) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for ch in word:
        out = np.kron(out, PAULI[ch])
    return out


def oracle_embed(matrix: np.ndarray, sub: tuple[str, ...], order: tuple[str, ...],
                 d: int) -> np.ndarray:
    """Entry-by-entry embedding of a local matrix into the full space.

    Basis labels follow the vertex order with the last digit fastest.  Slow
    (O(D^2 n)) but free of any index arithmetic shared with the library.
    """
    n = len(order)
    dim = d**n
    pos = [order.index(v) for v in sub]
    rest = [i for i in range(n) if i not in pos]
    out = np.zeros((dim, dim), dtype=complex)
    digits = list(itertools.product(range(d), repeat=n))
    sub_index = {cfg: i for i, cfg in enumerate(itertools.product(range(d), repeat=len(sub)))}
    for row, rd in enumerate(digits):
        for col, cd in enumerate(digits):
            if any(rd[i] != cd[i] for i in rest):
                continue
            r_sub = tuple(rd[i] for i in pos)
            c_sub = tuple(cd[i] for i in pos)
            out[row, col] = matrix[sub_index[r_sub], sub_index[c_sub]]
    return out


def dense_herm_exp(h: np.ndarray, coef: complex) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(coef * w)) @ v.conj().T


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2.0
