"""Frustration-free parent operators and their sequential deformation.

Given commuting positive Q's, each pair mu contributes the term

    G_mu = (prod of Q^{-1} over supports touching mu) P_mu (same product),

with P_mu the projector orthogonal to the entangled pair state on mu.  The
sum annihilates the target state and is positive semidefinite with ground
energy zero.

The sequential family replaces support m's Q by an interpolation A_{n,m}:
finished (the full Q) for m < n, ramping for m = n, and not yet started
(identity) for m > n.  Segment Hamiltonians built from these glue
continuously: segment n at s=1 equals segment n+1 at s=0.  A localized
variant keeps only the pairs within a graph radius of the active support.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .lattice import Lattice, set_distance
from .linop import GlobalOperator, LocalOperator, apply_in_order, embed, embed_in_order
from .model import ModelSpec, StateVector, product_pair_state
from .schedule import Schedule, gevrey_schedule

__all__ = [
    "PathSpec",
    "SpectralReport",
    "GapRelaxationReport",
    "pair_projector",
    "parent_term",
    "parent_hamiltonian",
    "path_A",
    "sequential_terms",
    "sequential_hamiltonian",
    "localized_terms",
    "localized_hamiltonian",
    "segment_split_terms",
    "instantaneous_ground_state",
    "spectral_report",
    "verify_gap_relaxation",
    "radius_from_scaling",
]

DEGENERATE_GAP_TOL = 1e-9


def pair_projector(lat: Lattice, pair_index: int) -> LocalOperator:
    """Projector onto the complement of the entangled pair state on one pair."""
    d = lat.local_dim
    u, v = lat.pairs[pair_index]
    phi = np.eye(d, dtype=complex).reshape(-1) / math.sqrt(d)
    p = np.eye(d * d, dtype=complex) - np.outer(phi, phi.conj())
    return LocalOperator(support=(u, v), matrix=p)


def _inv_psd(matrix: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(matrix)
    if w[0] <= 0:
        raise ValueError(f"cannot invert non-positive operator (min eig {w[0]:.3e})")
    return (v / w) @ v.conj().T


def _sandwich_local(lat: Lattice, pair_index: int,
                    inv_factors: Sequence[LocalOperator]) -> LocalOperator:
    """(prod inv) P_mu (prod inv) on the union support, in lattice order."""
    proj = pair_projector(lat, pair_index)
    union = set(proj.support)
    for op in inv_factors:
        union |= set(op.support)
    order = tuple(sorted(union, key=lat.index.__getitem__))
    d = lat.local_dim
    b = np.eye(d ** len(order), dtype=complex)
    for op in inv_factors:
        b = b @ embed_in_order(op.matrix, op.support, order, d)
    p = embed_in_order(proj.matrix, proj.support, order, d)
    return LocalOperator(support=order, matrix=b @ p @ b)


def parent_term(mu: int, q_ops: Sequence[LocalOperator], lat: Lattice) -> GlobalOperator:
    """Single-pair parent term, embedded on the full lattice."""
    touching = lat.supports_touching(mu)
    invs = [LocalOperator(q_ops[k].support, _inv_psd(q_ops[k].matrix)) for k in touching]
    return embed(_sandwich_local(lat, mu, invs), lat)


def parent_hamiltonian(q_ops: Sequence[LocalOperator], lat: Lattice) -> GlobalOperator:
    total = np.zeros((lat.dim, lat.dim), dtype=complex)
    for mu in range(len(lat.pairs)):
        total += parent_term(mu, q_ops, lat).matrix
    return GlobalOperator(total)


@dataclass(frozen=True)
class PathSpec:
    """Sequential deformation plan for a ModelSpec.

    ordering is a permutation of support indices; segment m (1-based)
    ramps the Q of support ordering[m-1].  interpolation is "linear"
    ((1-u) I + u Q) or "thermal" (exp(-beta u h_shifted / 2), requires a
    thermal-mode model).  localization_radius of None means no truncation.
    """

    model: ModelSpec
    ordering: tuple[int, ...] = field(default=())
    schedule: Schedule = field(default_factory=gevrey_schedule)
    interpolation: str = "linear"
    localization_radius: float | None = None

    def __post_init__(self) -> None:
        n = len(self.model.lattice.supports)
        ordering = self.ordering if self.ordering else tuple(range(n))
        object.__setattr__(self, "ordering", tuple(int(i) for i in ordering))
        if sorted(self.ordering) != list(range(n)):
            raise ValueError(f"ordering {self.ordering} is not a permutation of 0..{n-1}")
        if self.interpolation not in ("linear", "thermal"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        if self.interpolation == "thermal" and (self.model.mode != "thermal"
                                                or self.model.h_ops is None):
            raise ValueError("thermal interpolation needs a thermal-mode model")
        if self.localization_radius is not None and self.localization_radius < 0:
            raise ValueError("localization_radius must be >= 0")

    @property
    def n_segments(self) -> int:
        return len(self.ordering)

    @cached_property
    def _q_eigs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per support: eigenpairs driving the interpolation.  Thermal mode
        diagonalizes the shifted h (Q shares its eigenbasis); linear mode
        diagonalizes Q itself."""
        out = []
        if self.interpolation == "thermal":
            for op in self.model.h_ops:
                w, v = np.linalg.eigh(op.matrix)
                out.append((w - w[0], v))
        else:
            for op in self.model.q_ops:
                out.append(tuple(np.linalg.eigh(op.matrix)))
        return out

    def _a_eigs(self, support_index: int, u: float) -> tuple[np.ndarray, np.ndarray]:
        w, v = self._q_eigs[support_index]
        if self.interpolation == "thermal":
            lam = np.exp(-0.5 * self.model.beta * u * w)
        else:
            lam = (1.0 - u) + u * w
        return lam, v

    def a_matrix(self, support_index: int, u: float, inverse: bool = False) -> np.ndarray:
        lam, v = self._a_eigs(support_index, u)
        if inverse:
            if lam.min() <= 0:
                raise ValueError(f"interpolant on support {support_index} not invertible at u={u}")
            lam = 1.0 / lam
        return (v * lam) @ v.conj().T

    def segment_support(self, n: int) -> tuple[str, ...]:
        """Support ramped during segment n (1-based)."""
        self._check_segment(n)
        return self.model.lattice.supports[self.ordering[n - 1]]

    def _check_segment(self, n: int) -> None:
        if not 1 <= n <= self.n_segments:
            raise ValueError(f"segment index n={n} outside 1..{self.n_segments}")


def path_A(path: PathSpec, n: int, m: int, s: float) -> LocalOperator:
    """Interpolant A_{n,m}(s) on support ordering[m-1]: the full Q when
    m < n, the ramp at schedule(s) when m = n, identity when m > n."""
    path._check_segment(n)
    path._check_segment(m)
    k = path.ordering[m - 1]
    sup = path.model.lattice.supports[k]
    if m > n:
        d = path.model.lattice.local_dim
        return LocalOperator(sup, np.eye(d ** len(sup), dtype=complex))
    u = 1.0 if m < n else path.schedule(s)
    return LocalOperator(sup, path.a_matrix(k, u))


def _segment_u(path: PathSpec, n: int, m: int, s: float) -> float | None:
    """Ramp argument for factor m during segment n; None means identity."""
    if m > n:
        return None
    return 1.0 if m < n else path.schedule(s)


def _term_for_pair(path: PathSpec, n: int, s: float, mu: int) -> LocalOperator:
    lat = path.model.lattice
    inv_factors = []
    position = {k: m + 1 for m, k in enumerate(path.ordering)}
    for k in lat.supports_touching(mu):
        u = _segment_u(path, n, position[k], s)
        if u is None:
            continue
        inv_factors.append(LocalOperator(lat.supports[k], path.a_matrix(k, u, inverse=True)))
    return _sandwich_local(lat, mu, inv_factors)


def sequential_terms(path: PathSpec, n: int, s: float) -> list[LocalOperator]:
    """All per-pair terms of segment n at schedule position s."""
    path._check_segment(n)
    return [_term_for_pair(path, n, s, mu) for mu in range(len(path.model.lattice.pairs))]


def sequential_hamiltonian(path: PathSpec, n: int, s: float) -> GlobalOperator:
    lat = path.model.lattice
    total = np.zeros((lat.dim, lat.dim), dtype=complex)
    for term in sequential_terms(path, n, s):
        total += embed_in_order(term.matrix, term.support, lat.vertices, lat.local_dim)
    return GlobalOperator(total)


def _pairs_within(path: PathSpec, n: int, radius: float) -> list[int]:
    lat = path.model.lattice
    active = path.segment_support(n)
    return [mu for mu in range(len(lat.pairs))
            if set_distance(lat, lat.pairs[mu], active) < radius]


def localized_terms(path: PathSpec, n: int, s: float,
                    radius: float | None = None) -> list[LocalOperator]:
    """Per-pair terms restricted to pairs at graph distance < radius from
    the active support.  radius=None falls back to the path's radius, and
    a missing radius means no truncation."""
    path._check_segment(n)
    radius = radius if radius is not None else path.localization_radius
    if radius is None:
        return sequential_terms(path, n, s)
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    return [_term_for_pair(path, n, s, mu) for mu in _pairs_within(path, n, radius)]


def localized_hamiltonian(path: PathSpec, n: int, s: float,
                          radius: float | None = None) -> GlobalOperator:
    lat = path.model.lattice
    total = np.zeros((lat.dim, lat.dim), dtype=complex)
    for term in localized_terms(path, n, s, radius):
        total += embed_in_order(term.matrix, term.support, lat.vertices, lat.local_dim)
    return GlobalOperator(total)


def segment_split_terms(path: PathSpec, n: int, radius: float | None = None,
                        ) -> tuple[list[LocalOperator], Callable[[float], list[LocalOperator]]]:
    """Split segment n's terms into an s-independent part and a builder for
    the terms that move with s (those whose pair touches the active
    support).  Lets integrators rebuild only the moving terms."""
    path._check_segment(n)
    lat = path.model.lattice
    radius = radius if radius is not None else path.localization_radius
    if radius is None:
        kept = list(range(len(lat.pairs)))
    else:
        kept = _pairs_within(path, n, radius)
    active_support = set(path.segment_support(n))
    moving = [mu for mu in kept if active_support & set(lat.pairs[mu])]
    frozen = [mu for mu in kept if mu not in moving]
    static = [_term_for_pair(path, n, 0.0, mu) for mu in frozen]

    def build_moving(s: float) -> list[LocalOperator]:
        return [_term_for_pair(path, n, s, mu) for mu in moving]

    return static, build_moving


def instantaneous_ground_state(path: PathSpec, n: int, s: float) -> StateVector:
    """Exact zero mode of segment n at position s: the pair-product state
    hit by every interpolant currently in place."""
    path._check_segment(n)
    lat = path.model.lattice
    psi = product_pair_state(lat).amplitudes
    position = {k: m + 1 for m, k in enumerate(path.ordering)}
    for k in range(len(lat.supports)):
        u = _segment_u(path, n, position[k], s)
        if u is None:
            continue
        psi = apply_in_order(path.a_matrix(k, u), lat.supports[k], lat.vertices,
                             lat.local_dim, psi)
    return StateVector.from_raw(psi)


@dataclass(frozen=True)
class SpectralReport:
    ground_energy: float
    gap: float
    ff_residual: float | None
    degenerate: bool


def spectral_report(g: GlobalOperator, reference: StateVector | None = None) -> SpectralReport:
    """Lowest eigenvalues plus, optionally, the relative residual of a
    candidate zero mode (norm of G psi over the operator norm)."""
    w = np.linalg.eigvalsh(g.matrix)
    ground = float(w[0])
    gap = float(w[1] - w[0]) if w.size > 1 else math.inf
    residual = None
    if reference is not None:
        scale = float(np.abs(w).max())
        if scale == 0.0:
            residual = 0.0
        else:
            residual = float(np.linalg.norm(g.matrix @ reference.amplitudes) / scale)
    return SpectralReport(ground_energy=ground, gap=gap, ff_residual=residual,
                          degenerate=gap < DEGENERATE_GAP_TOL)


@dataclass(frozen=True)
class GapRelaxationReport:
    s_grid: tuple[float, ...]
    gaps: tuple[float, ...]
    delta0: float
    q0: float
    margins: tuple[float, ...]
    passed: bool
    offending: tuple[float, ...]


def verify_gap_relaxation(path: PathSpec, n: int, s_grid: Sequence[float],
                          delta0: float | None = None, q0: float | None = None,
                          tol: float = 1e-9) -> GapRelaxationReport:
    """Check gap(segment n at s) >= q0^2 * gap(segment n at 0) - tol on a grid.

    delta0 defaults to the measured gap at s=0 (and it is an error to claim
    a larger one); q0 defaults to the model's smallest Q eigenvalue.
    """
    path._check_segment(n)
    q0 = q0 if q0 is not None else path.model.q0
    if not 0.0 < q0 <= 1.0:
        raise ValueError(f"q0={q0} outside (0, 1]")
    gap_start = spectral_report(sequential_hamiltonian(path, n, 0.0)).gap
    if delta0 is None:
        delta0 = gap_start
    elif gap_start < delta0 - tol:
        raise ValueError(f"claimed starting gap {delta0} exceeds measured {gap_start:.6e}")
    gaps = []
    margins = []
    offending = []
    for s in s_grid:
        gap_s = spectral_report(sequential_hamiltonian(path, n, float(s))).gap
        margin = gap_s - q0 * q0 * delta0
        gaps.append(gap_s)
        margins.append(margin)
        if margin < -tol:
            offending.append(float(s))
    return GapRelaxationReport(
        s_grid=tuple(float(s) for s in s_grid), gaps=tuple(gaps), delta0=float(delta0),
        q0=float(q0), margins=tuple(margins), passed=not offending,
        offending=tuple(offending),
    )


def radius_from_scaling(chi: float, alpha: float, n_segments: int, eps: float) -> int:
    """Radius suggestion ceil(chi * ln(N/eps)^(1+alpha)) for N segments and
    target accuracy eps."""
    if chi <= 0 or eps <= 0 or n_segments < 1:
        raise ValueError("need chi > 0, eps > 0, n_segments >= 1")
    ratio = n_segments / eps
    if ratio <= 1.0:
        return 1
    return int(math.ceil(chi * math.log(ratio) ** (1.0 + alpha)))
