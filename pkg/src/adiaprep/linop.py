"""Dense operator plumbing: local terms, embeddings, Hermitian helpers.

Everything here is plain dense numpy.  Operators stay small by design (the
lattice guard caps the Hilbert dimension at 2**13), so no sparse or
factorized representations appear in the public contracts.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .lattice import Lattice

__all__ = [
    "LocalOperator",
    "GlobalOperator",
    "embed",
    "embed_in_order",
    "apply_in_order",
    "eig_hermitian",
    "herm_exp",
    "pseudo_inverse",
    "operator_norm",
    "hermiticity_defect",
    "matrix_to_json",
    "matrix_from_json",
]

HERM_TOL = 1e-10


def _as_square(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class LocalOperator:
    """Operator on an ordered tuple of vertices.

    The matrix axes follow the support order, digit of the last listed
    vertex fastest, matching the global basis convention.
    """

    support: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", _as_square(self.matrix))
        if len(set(self.support)) != len(self.support) or not self.support:
            raise ValueError(f"bad support {self.support!r}")
        self.local_dim()  # matrix dimension must factor over the support

    def local_dim(self) -> int:
        d = round(self.matrix.shape[0] ** (1.0 / len(self.support)))
        if d ** len(self.support) != self.matrix.shape[0]:
            raise ValueError(
                f"matrix dim {self.matrix.shape[0]} is not a power matching {len(self.support)} vertices"
            )
        return d

    def is_hermitian(self, tol: float = HERM_TOL) -> bool:
        return hermiticity_defect(self.matrix) <= tol * max(1.0, float(np.abs(self.matrix).max()))


@dataclass(frozen=True)
class GlobalOperator:
    """Dense operator on the full lattice Hilbert space."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", _as_square(self.matrix))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def norm(self) -> float:
        return operator_norm(self.matrix)

    def is_hermitian(self, tol: float = HERM_TOL) -> bool:
        return hermiticity_defect(self.matrix) <= tol * max(1.0, float(np.abs(self.matrix).max()))


def hermiticity_defect(matrix: np.ndarray) -> float:
    m = np.asarray(matrix)
    return float(np.abs(m - m.conj().T).max()) if m.size else 0.0


def operator_norm(matrix: np.ndarray) -> float:
    """Largest singular value, via eigendecomposition of A^dag A."""
    m = _as_square(matrix)
    if m.shape[0] == 0:
        return 0.0
    w = np.linalg.eigvalsh(m.conj().T @ m)
    return float(np.sqrt(max(w[-1], 0.0)))


def _digit_weights(n: int, d: int) -> np.ndarray:
    return d ** np.arange(n - 1, -1, -1, dtype=np.int64)


def _permuted_index(order_positions: Sequence[int], n: int, d: int) -> np.ndarray:
    """index array p with p[i] = basis index of state i re-read in the given
    vertex position order (used to undo a [support, rest] kron layout)."""
    dim = d**n
    digits = np.array(np.unravel_index(np.arange(dim), (d,) * n))
    weights = _digit_weights(n, d)
    p = np.zeros(dim, dtype=np.int64)
    for t, pos in enumerate(order_positions):
        p += digits[pos] * weights[t]
    return p


def embed_in_order(matrix: np.ndarray, sub: Sequence[str], order: Sequence[str], d: int) -> np.ndarray:
    """Embed an operator on the vertices `sub` into the space ordered by
    `order`, tensoring with the identity elsewhere."""
    matrix = _as_square(matrix)
    order = tuple(order)
    sub = tuple(sub)
    missing = [v for v in sub if v not in order]
    if missing:
        raise ValueError(f"support vertices {missing} not present in target order")
    if matrix.shape[0] != d ** len(sub):
        raise ValueError(f"matrix dim {matrix.shape[0]} != {d}**{len(sub)}")
    if sub == order:
        return matrix.copy()
    sub_pos = [order.index(v) for v in sub]
    rest_pos = [i for i in range(len(order)) if i not in sub_pos]
    big = np.kron(matrix, np.eye(d ** len(rest_pos), dtype=complex))
    p = _permuted_index(sub_pos + rest_pos, len(order), d)
    # big is written in the [sub, rest] basis; pull rows/cols back to canonical.
    return big[np.ix_(p, p)]


def apply_in_order(matrix: np.ndarray, sub: Sequence[str], order: Sequence[str], d: int,
                   psi: np.ndarray) -> np.ndarray:
    """Apply a local operator to a state vector without materializing the
    embedded matrix.  Equivalent to embed_in_order(...) @ psi."""
    matrix = _as_square(matrix)
    order = tuple(order)
    sub = tuple(sub)
    n = len(order)
    k = len(sub)
    psi = np.asarray(psi, dtype=complex).reshape((d,) * n)
    pos = [order.index(v) for v in sub]
    op_t = matrix.reshape((d,) * (2 * k))
    out = np.tensordot(op_t, psi, axes=(list(range(k, 2 * k)), pos))
    out = np.moveaxis(out, list(range(k)), pos)
    return out.reshape(-1)


def embed(op: LocalOperator, lat: Lattice) -> GlobalOperator:
    d = lat.local_dim
    if op.matrix.shape[0] != d ** len(op.support):
        raise ValueError(
            f"operator dim {op.matrix.shape[0]} incompatible with local_dim {d} on {op.support}"
        )
    return GlobalOperator(embed_in_order(op.matrix, op.support, lat.vertices, d))


def _matrix_of(op) -> np.ndarray:
    if isinstance(op, (GlobalOperator, LocalOperator)):
        return op.matrix
    return _as_square(op)


def eig_hermitian(op) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian
    operator; rejects inputs that are not Hermitian within 1e-10."""
    m = _matrix_of(op)
    scale = max(1.0, float(np.abs(m).max())) if m.size else 1.0
    defect = hermiticity_defect(m)
    if defect > HERM_TOL * scale:
        raise ValueError(f"matrix is not Hermitian: defect {defect:.3e} exceeds tolerance")
    w, v = np.linalg.eigh(m)
    return w, v


def herm_exp(op, scalar: complex = 1.0) -> GlobalOperator:
    """exp(scalar * A) for Hermitian A, by eigendecomposition.

    Diagonal inputs take the exact elementwise branch.
    """
    m = _matrix_of(op)
    off = m - np.diag(np.diag(m))
    if not np.any(off):
        return GlobalOperator(np.diag(np.exp(scalar * np.diag(m))))
    w, v = eig_hermitian(m)
    return GlobalOperator((v * np.exp(scalar * w)) @ v.conj().T)


def pseudo_inverse(op, kernel_tol: float | None = None) -> GlobalOperator:
    """Moore-Penrose inverse of a Hermitian positive-semidefinite operator.

    Eigenvalues with |w| <= kernel_tol are treated as exact zeros; the
    default tolerance is 1e-10 times the operator norm.  A negative
    eigenvalue beyond the tolerance is an error, not a kernel.
    """
    w, v = eig_hermitian(op)
    scale = float(np.abs(w).max()) if w.size else 0.0
    tol = kernel_tol if kernel_tol is not None else 1e-10 * scale
    if w.size and w[0] < -max(tol, 0.0):
        raise ValueError(f"operator has negative eigenvalue {w[0]:.3e}; refusing pseudo-inverse")
    inv_w = np.where(np.abs(w) > tol, 1.0 / np.where(np.abs(w) > tol, w, 1.0), 0.0)
    return GlobalOperator((v * inv_w) @ v.conj().T)


def matrix_to_json(matrix: np.ndarray) -> dict:
    """Row-major interleaved re/im serialization for golden tests."""
    m = _as_square(matrix)
    flat = np.empty(2 * m.size, dtype=float)
    flat[0::2] = m.real.reshape(-1)
    flat[1::2] = m.imag.reshape(-1)
    return {"dim": m.shape[0], "layout": "row-major-re-im", "data": flat.tolist()}


def matrix_from_json(payload: dict) -> np.ndarray:
    dim = int(payload["dim"])
    if payload.get("layout", "row-major-re-im") != "row-major-re-im":
        raise ValueError(f"unknown matrix layout {payload.get('layout')!r}")
    data = np.asarray(payload["data"], dtype=float)
    if data.size != 2 * dim * dim:
        raise ValueError(f"matrix payload has {data.size} floats, expected {2 * dim * dim}")
    return (data[0::2] + 1j * data[1::2]).reshape(dim, dim)
