"""Model specifications and target states.

A ModelSpec fixes, per interaction support, an invertible positive operator
Q with spectrum inside (0, 1].  The target state is the normalized result
of hitting the product of maximally entangled pair states with all Q's.
Thermal mode derives the Q's from local interaction terms h and an inverse
temperature; tracing out the ancillas of that state returns the Gibbs
density of sum(h) exactly when the h's commute.

This module also holds the classical single-flip dynamics used by the
stochastic correspondence checks: a continuous-time Metropolis generator
and its Hermitian conjugated form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .lattice import Lattice
from .linop import (GlobalOperator, LocalOperator, apply_in_order, eig_hermitian,
                    embed_in_order, hermiticity_defect, operator_norm)

__all__ = [
    "StateVector",
    "DensityMatrix",
    "ModelSpec",
    "GeneratorMatrix",
    "ClassicalIsing",
    "product_pair_state",
    "target_state",
    "trace_ancillas",
    "purify_classical",
    "classical_gibbs_probs",
    "metropolis_generator",
    "mc_hamiltonian",
    "system_hamiltonian",
    "trace_distance",
    "state_overlap",
]

COMMUTE_TOL = 1e-10
ZERO_NORM_TOL = 1e-14


@dataclass(frozen=True)
class StateVector:
    """Unit-norm state; raw_norm records the magnitude seen before
    normalization (useful to catch accidental annihilation)."""

    amplitudes: np.ndarray
    raw_norm: float = 1.0

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_raw(cls, amplitudes: np.ndarray) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = float(np.linalg.norm(amps))
        if norm <= ZERO_NORM_TOL:
            raise ValueError(f"refusing zero-norm state (norm={norm:.3e})")
        return cls(amplitudes=amps / norm, raw_norm=norm)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))


def state_overlap(a: StateVector, b: StateVector) -> float:
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)))


def trace_distance(rho: DensityMatrix | np.ndarray, sigma: DensityMatrix | np.ndarray) -> float:
    """Half the trace norm of rho - sigma."""
    ra = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    sb = sigma.matrix if isinstance(sigma, DensityMatrix) else np.asarray(sigma, dtype=complex)
    diff = ra - sb
    if hermiticity_defect(diff) <= 1e-9 * max(1.0, float(np.abs(diff).max())):
        w = np.linalg.eigvalsh((diff + diff.conj().T) / 2.0)
        return float(0.5 * np.abs(w).sum())
    sv = np.linalg.svd(diff, compute_uv=False)
    return float(0.5 * sv.sum())


def _check_alignment(lat: Lattice, ops: Sequence[LocalOperator], what: str) -> None:
    if len(ops) != len(lat.supports):
        raise ValueError(f"{what}: got {len(ops)} operators for {len(lat.supports)} supports")
    for op, sup in zip(ops, lat.supports):
        if tuple(op.support) != tuple(sup):
            raise ValueError(f"{what}: operator support {op.support} != lattice support {sup}")
        if op.matrix.shape[0] != lat.local_dim ** len(sup):
            raise ValueError(f"{what}: operator on {sup} has dim {op.matrix.shape[0]}")


def _check_commuting(lat: Lattice, ops: Sequence[LocalOperator], what: str,
                     tol: float = COMMUTE_TOL) -> None:
    d = lat.local_dim
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            shared = set(ops[i].support) & set(ops[j].support)
            if not shared:
                continue
            union = tuple(sorted(set(ops[i].support) | set(ops[j].support),
                                 key=lat.index.__getitem__))
            a = embed_in_order(ops[i].matrix, ops[i].support, union, d)
            b = embed_in_order(ops[j].matrix, ops[j].support, union, d)
            defect = float(np.abs(a @ b - b @ a).max())
            scale = max(1.0, float(np.abs(a).max()) * float(np.abs(b).max()))
            if defect > tol * scale:
                raise ValueError(
                    f"{what}: operators on supports {ops[i].support} and {ops[j].support} "
                    f"do not commute (defect {defect:.3e})"
                )


@dataclass(frozen=True)
class ModelSpec:
    """Lattice plus one positive invertible Q per support.

    mode "thermal" keeps the defining h terms and the (possibly rescaled)
    inverse temperature around; beta * h is invariant under the rescaling,
    and each Q is exp(-beta (h - min eig h) / 2) so its top eigenvalue is 1.
    q0 is the smallest eigenvalue over all Q's.
    """

    lattice: Lattice
    q_ops: tuple[LocalOperator, ...]
    mode: str = "generic"
    beta: float | None = None
    h_ops: tuple[LocalOperator, ...] | None = None
    h_scale: float = 1.0
    q_scales: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        _check_alignment(self.lattice, self.q_ops, "q_ops")
        _check_commuting(self.lattice, self.q_ops, "q_ops")
        for op, sup in zip(self.q_ops, self.lattice.supports):
            w = np.linalg.eigvalsh(op.matrix)
            defect = hermiticity_defect(op.matrix)
            if defect > COMMUTE_TOL * max(1.0, float(np.abs(op.matrix).max())):
                raise ValueError(f"Q on {sup} is not Hermitian (defect {defect:.3e})")
            if w[0] <= 0:
                raise ValueError(f"Q on {sup} is not positive definite (min eig {w[0]:.3e})")
            if w[-1] > 1.0 + 1e-12:
                raise ValueError(f"Q on {sup} has eigenvalue {w[-1]:.12f} > 1; rescale it")

    @cached_property
    def q0(self) -> float:
        return min(float(np.linalg.eigvalsh(op.matrix)[0]) for op in self.q_ops)

    @classmethod
    def generic(cls, lat: Lattice, q_ops: Sequence[LocalOperator],
                normalize: bool = True) -> "ModelSpec":
        q_ops = tuple(q_ops)
        scales = []
        fixed = []
        for op in q_ops:
            top = float(np.linalg.eigvalsh(op.matrix)[-1])
            if normalize and top > 1.0:
                fixed.append(LocalOperator(op.support, op.matrix / top))
                scales.append(top)
            else:
                fixed.append(op)
                scales.append(1.0)
        return cls(lattice=lat, q_ops=tuple(fixed), mode="generic",
                   q_scales=tuple(scales))

    @classmethod
    def thermal(cls, lat: Lattice, h_ops: Sequence[LocalOperator], beta: float) -> "ModelSpec":
        if beta < 0:
            raise ValueError(f"beta must be >= 0, got {beta}")
        h_ops = tuple(h_ops)
        _check_alignment(lat, h_ops, "h_ops")
        for op in h_ops:
            if not op.is_hermitian():
                raise ValueError(f"interaction on {op.support} is not Hermitian")
        _check_commuting(lat, h_ops, "h_ops")
        max_norm = max((operator_norm(op.matrix) for op in h_ops), default=0.0)
        scale = max(1.0, max_norm)
        scaled = tuple(LocalOperator(op.support, op.matrix / scale) for op in h_ops)
        beta_eff = beta * scale
        q_ops = []
        for op in scaled:
            w, v = eig_hermitian(op.matrix)
            shifted = w - w[0]
            q = (v * np.exp(-0.5 * beta_eff * shifted)) @ v.conj().T
            q_ops.append(LocalOperator(op.support, q))
        return cls(lattice=lat, q_ops=tuple(q_ops), mode="thermal", beta=beta_eff,
                   h_ops=scaled, h_scale=scale)


def product_pair_state(lat: Lattice) -> StateVector:
    """Normalized product of maximally entangled states, one per pair.

    Every vertex must belong to a pair; amplitudes are uniform over the
    configurations whose two digits agree on each pair.
    """
    paired = {v for p in lat.pairs for v in p}
    missing = [v for v in lat.vertices if v not in paired]
    if missing:
        raise ValueError(f"vertices {missing} are not covered by any pair")
    n = len(lat.vertices)
    d = lat.local_dim
    digits = np.array(np.unravel_index(np.arange(lat.dim), (d,) * n))
    mask = np.ones(lat.dim, dtype=bool)
    for u, v in lat.pairs:
        mask &= digits[lat.index[u]] == digits[lat.index[v]]
    amps = mask.astype(complex)
    return StateVector.from_raw(amps)


def target_state(spec: ModelSpec) -> StateVector:
    """Apply all Q's to the pair-product state and normalize."""
    lat = spec.lattice
    psi = product_pair_state(lat).amplitudes
    for op in spec.q_ops:
        psi = apply_in_order(op.matrix, op.support, lat.vertices, lat.local_dim, psi)
    return StateVector.from_raw(psi)


def trace_ancillas(state: StateVector, lat: Lattice) -> DensityMatrix:
    """Reduced density matrix on the system vertices (in lattice order)."""
    if not lat.ancillas:
        raise ValueError("lattice carries no system/ancilla marking")
    n = len(lat.vertices)
    d = lat.local_dim
    sys_pos = [lat.index[v] for v in lat.system]
    anc_pos = [lat.index[v] for v in lat.ancillas]
    tensor = state.amplitudes.reshape((d,) * n)
    mat = np.transpose(tensor, sys_pos + anc_pos).reshape(d ** len(sys_pos), d ** len(anc_pos))
    rho = mat @ mat.conj().T
    tr = float(np.real(np.trace(rho)))
    if tr <= ZERO_NORM_TOL:
        raise ValueError("reduced state has vanishing trace")
    return DensityMatrix(matrix=rho / tr)


def purify_classical(amplitudes: np.ndarray, local_dim: int = 2) -> StateVector:
    """Lift amplitudes c_x on configurations to sum_x c_x |x>|x> on the
    doubled space, site digits interleaved (x0 x0 x1 x1 ...) to match the
    thermal chain vertex ordering."""
    c = np.asarray(amplitudes, dtype=complex).reshape(-1)
    n = round(math.log(c.size, local_dim))
    if local_dim**n != c.size:
        raise ValueError(f"length {c.size} is not a power of {local_dim}")
    digits = np.array(np.unravel_index(np.arange(c.size), (local_dim,) * n))
    weights = local_dim ** np.arange(2 * n - 1, -1, -1, dtype=np.int64)
    idx = np.zeros(c.size, dtype=np.int64)
    for j in range(n):
        idx += digits[j] * (weights[2 * j] + weights[2 * j + 1])
    out = np.zeros(local_dim ** (2 * n), dtype=complex)
    out[idx] = c
    return StateVector.from_raw(out)


def classical_gibbs_probs(energies: np.ndarray, beta: float) -> np.ndarray:
    e = np.asarray(energies, dtype=float)
    w = np.exp(-beta * (e - e.min()))
    return w / w.sum()


@dataclass(frozen=True)
class ClassicalIsing:
    """Ising energy E(x) = sum J_ij s_i s_j + sum h_i s_i with s = +1 for
    digit 0 and s = -1 for digit 1."""

    n_spins: int
    couplings: tuple[tuple[int, int, float], ...] = ()
    fields: tuple[tuple[int, float], ...] = ()

    def energies(self) -> np.ndarray:
        if self.n_spins < 1:
            raise ValueError("need at least one spin")
        dim = 2**self.n_spins
        digits = np.array(np.unravel_index(np.arange(dim), (2,) * self.n_spins))
        spins = 1.0 - 2.0 * digits
        e = np.zeros(dim)
        for i, j, coupling in self.couplings:
            e += coupling * spins[i] * spins[j]
        for i, h in self.fields:
            e += h * spins[i]
        return e


@dataclass(frozen=True)
class GeneratorMatrix:
    """Continuous-time single-flip Metropolis generator; columns sum to zero
    and detailed balance holds against exp(-beta E)."""

    matrix: np.ndarray
    beta: float
    energies: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def metropolis_generator(energies: np.ndarray | ClassicalIsing, beta: float) -> GeneratorMatrix:
    """Rate matrix S with S[y, x] = min(1, exp(-beta (E_y - E_x))) for every
    single-spin-flip neighbour y of x, diagonal fixed by column sums."""
    if isinstance(energies, ClassicalIsing):
        energies = energies.energies()
    e = np.asarray(energies, dtype=float).reshape(-1)
    n = round(math.log2(e.size))
    if 2**n != e.size or n < 1:
        raise ValueError(f"energy table length {e.size} is not a power of two")
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    dim = e.size
    s = np.zeros((dim, dim))
    for x in range(dim):
        for bit in range(n):
            y = x ^ (1 << bit)
            s[y, x] = min(1.0, math.exp(-beta * (e[y] - e[x])))
    np.fill_diagonal(s, 0.0)
    np.fill_diagonal(s, -s.sum(axis=0))
    return GeneratorMatrix(matrix=s, beta=beta, energies=e)


def mc_hamiltonian(gen: GeneratorMatrix) -> GlobalOperator:
    """Hermitian form -D S D^{-1} with D = diag(exp(beta E / 2)).

    Off-diagonal entries are written in the manifestly symmetric form
    -exp(-beta |E_x - E_y| / 2), so Hermiticity is exact by construction;
    the similarity to the generator is a property checked in tests.
    """
    e = gen.energies
    beta = gen.beta
    dim = gen.dim
    n = round(math.log2(dim))
    g = np.zeros((dim, dim))
    for x in range(dim):
        for bit in range(n):
            y = x ^ (1 << bit)
            g[y, x] = -math.exp(-0.5 * beta * abs(e[y] - e[x]))
    np.fill_diagonal(g, 0.0)
    np.fill_diagonal(g, -np.diag(gen.matrix))
    return GlobalOperator(matrix=g.astype(complex))


def system_hamiltonian(lat: Lattice, h_ops: Iterable[LocalOperator]) -> np.ndarray:
    """Dense sum of the interaction terms over the system vertices only."""
    sys_order = lat.system if lat.system else lat.vertices
    dim = lat.local_dim ** len(sys_order)
    total = np.zeros((dim, dim), dtype=complex)
    for op in h_ops:
        total += embed_in_order(op.matrix, op.support, sys_order, lat.local_dim)
    return total
