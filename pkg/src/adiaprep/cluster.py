"""Inclusion-exclusion expansion of the noncommuting thermal parent operator.

The exact operator anchored at a pair mu is a conjugated-projector sandwich
built from the full interaction sum.  Replacing the full sum by the partial
sums over every subset of interactions and applying the Moebius transform
over the subset lattice splits the anchored operator into cluster terms;
terms whose cluster does not hug the anchor vanish identically, and the
norms of the survivors shrink geometrically with cluster size once the
inverse temperature is small.  Keeping clusters up to a cutoff size gives a
strictly local approximation with a computable error certificate.

Temperature convention: `cluster_f(..., beta)` conjugates with exp(beta H)
and exp(-2 beta H).  The sum of all its cluster terms therefore reproduces
the exact anchored operator whose kernel is the purified Gibbs state at
inverse temperature 2*beta.  `exact_noncommuting_parent(beta, ...)` is
parameterized the other way round, by the Gibbs temperature of its kernel;
the two meet via cluster-beta = gibbs-beta / 2, and the preparation driver
handles the halving internally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Mapping, Sequence

import numpy as np

from .lattice import Lattice, connected_edge_sets
from .linop import (GlobalOperator, LocalOperator, embed_in_order,
                    operator_norm)
from .parent import pair_projector
from .schedule import gevrey_f

__all__ = [
    "CertificationError",
    "ClusterTerm",
    "TruncationCertificate",
    "GapScanRow",
    "HighTempResult",
    "mobius_hat",
    "mobius_check",
    "cluster_f",
    "cluster_term",
    "growth_constant",
    "truncated_parent",
    "exact_noncommuting_parent",
    "verify_noncommuting_gap",
    "high_temp_prepare",
]


class CertificationError(RuntimeError):
    """Raised when a run insists on a truncation certificate that the
    temperature/cutoff pair cannot provide."""


def _check_h_ops(lat: Lattice, h_ops: Sequence[LocalOperator]) -> None:
    if len(h_ops) != len(lat.supports):
        raise ValueError(
            f"expected {len(lat.supports)} interaction terms, got {len(h_ops)}")
    for i, (op, sup) in enumerate(zip(h_ops, lat.supports)):
        if tuple(op.support) != tuple(sup):
            raise ValueError(
                f"interaction {i} has support {op.support}, lattice says {sup}")
        if not op.is_hermitian():
            raise ValueError(f"interaction {i} is not Hermitian")


# ---------------------------------------------------------------------------
# Moebius transforms on the subset lattice


def _subsets(omega: frozenset[int]):
    items = sorted(omega)
    for size in range(len(items) + 1):
        for combo in combinations(items, size):
            yield frozenset(combo)


def mobius_hat(f: Mapping[frozenset, np.ndarray], omega: frozenset[int]) -> np.ndarray:
    """Sum of f over all subsets of omega."""
    total = None
    for theta in _subsets(frozenset(omega)):
        if theta not in f:
            raise ValueError(f"missing subset {sorted(theta)} in Moebius input")
        total = f[theta] if total is None else total + f[theta]
    return total


def mobius_check(f: Mapping[frozenset, np.ndarray], omega: frozenset[int]) -> np.ndarray:
    """Alternating-sign subset sum; inverse of `mobius_hat`."""
    omega = frozenset(omega)
    total = None
    for theta in _subsets(omega):
        if theta not in f:
            raise ValueError(f"missing subset {sorted(theta)} in Moebius input")
        contrib = f[theta] if (len(omega) - len(theta)) % 2 == 0 else -f[theta]
        total = contrib if total is None else total + contrib
    return total


# ---------------------------------------------------------------------------
# cluster functions


def _union_support(lat: Lattice, mu: int, omega: frozenset[int]) -> tuple[str, ...]:
    verts = set(lat.pairs[mu])
    for k in omega:
        verts |= set(lat.supports[k])
    return tuple(sorted(verts, key=lambda v: lat.index[v]))


def _local_f(lat: Lattice, mu: int, theta: frozenset[int], beta: float,
             h_ops: Sequence[LocalOperator], support: tuple[str, ...]) -> np.ndarray:
    d = lat.local_dim
    dim = d ** len(support)
    h = np.zeros((dim, dim), dtype=complex)
    for k in theta:
        h += embed_in_order(h_ops[k].matrix, h_ops[k].support, support, d)
    proj = pair_projector(lat, mu)
    p = embed_in_order(proj.matrix, proj.support, support, d)
    w, v = np.linalg.eigh(h)
    e_plus = (v * np.exp(beta * w)) @ v.conj().T
    e_minus = (v * np.exp(-2.0 * beta * w)) @ v.conj().T
    return e_plus @ p @ e_minus @ p @ e_plus


def cluster_f(lat: Lattice, mu: int, omega: frozenset[int] | Sequence[int],
              beta: float, h_ops: Sequence[LocalOperator]) -> GlobalOperator:
    """Anchored sandwich built from the partial interaction sum over omega.

    With omega = all interactions this is the exact anchored operator whose
    kernel contains the purified Gibbs state at inverse temperature 2*beta.
    """
    _check_h_ops(lat, h_ops)
    omega = frozenset(omega)
    support = _union_support(lat, mu, omega)
    local = _local_f(lat, mu, omega, beta, h_ops, support)
    return GlobalOperator(matrix=embed_in_order(local, support, lat.vertices,
                                                lat.local_dim))


@dataclass(frozen=True)
class ClusterTerm:
    anchor: int
    members: tuple[int, ...]
    support: tuple[str, ...]
    matrix: np.ndarray

    @property
    def norm(self) -> float:
        return operator_norm(self.matrix)


def _cluster_term_local(lat: Lattice, mu: int, omega: frozenset[int], beta: float,
                        h_ops: Sequence[LocalOperator]) -> ClusterTerm:
    support = _union_support(lat, mu, omega)
    table = {theta: _local_f(lat, mu, theta, beta, h_ops, support)
             for theta in _subsets(omega)}
    return ClusterTerm(anchor=mu, members=tuple(sorted(omega)), support=support,
                       matrix=mobius_check(table, omega))


def cluster_term(lat: Lattice, mu: int, omega: frozenset[int] | Sequence[int],
                 beta: float, h_ops: Sequence[LocalOperator]) -> GlobalOperator:
    """Moebius (alternating subset) transform of `cluster_f` at omega."""
    _check_h_ops(lat, h_ops)
    term = _cluster_term_local(lat, mu, frozenset(omega), beta, h_ops)
    return GlobalOperator(matrix=embed_in_order(term.matrix, term.support,
                                                lat.vertices, lat.local_dim))


# ---------------------------------------------------------------------------
# counting and certificates


def growth_constant(lat: Lattice, max_size: int | None = None) -> float:
    """eta = max over anchors and sizes M of log(count of contributing
    clusters of size M) / M, counted exhaustively."""
    cap = max_size if max_size is not None else len(lat.supports)
    eta = 0.0
    for mu in range(len(lat.pairs)):
        counts: dict[int, int] = {}
        for es in connected_edge_sets(lat, mu, cap):
            size = len(es.members)
            counts[size] = counts.get(size, 0) + 1
        for size, count in counts.items():
            eta = max(eta, math.log(count) / size)
    return eta


@dataclass(frozen=True)
class TruncationCertificate:
    """Geometric tail bound for dropping clusters larger than the cutoff.

    y = exp(eta) * (exp(4 beta) - 1) controls the series; the certificate
    is valid when y < 1 and then bound = y**r / (1 - y) dominates the norm
    of everything dropped.  `measured` is the worst anchored truncation
    error actually observed (NaN when measuring was skipped).
    """

    beta: float
    r: int
    eta: float
    y: float
    bound: float
    measured: float
    per_anchor: tuple[float, ...]
    valid: bool


def _certificate(lat: Lattice, beta: float, r: int, measured: float,
                 per_anchor: tuple[float, ...]) -> TruncationCertificate:
    eta = growth_constant(lat)
    y = math.exp(eta) * (math.exp(4.0 * beta) - 1.0)
    bound = (y ** r) / (1.0 - y) if y < 1.0 else math.inf
    return TruncationCertificate(beta=beta, r=r, eta=eta, y=y, bound=bound,
                                 measured=measured, per_anchor=per_anchor,
                                 valid=y < 1.0)


# ---------------------------------------------------------------------------
# truncated and exact parents


class _TruncatedBuilder:
    """Precomputes, per anchor and contributing cluster, the subset table of
    interaction-sum eigendecompositions, so terms at any temperature cost a
    few small-matrix exponentials."""

    def __init__(self, lat: Lattice, h_ops: Sequence[LocalOperator], r: int) -> None:
        _check_h_ops(lat, h_ops)
        self.lat = lat
        self.entries = []
        d = lat.local_dim
        for mu in range(len(lat.pairs)):
            sets = connected_edge_sets(lat, mu, r, include_empty=True)
            for es in sets:
                omega = es.members
                support = _union_support(lat, mu, omega)
                dim = d ** len(support)
                proj = pair_projector(lat, mu)
                p = embed_in_order(proj.matrix, proj.support, support, d)
                eigs = {}
                for theta in _subsets(omega):
                    h = np.zeros((dim, dim), dtype=complex)
                    for k in theta:
                        h += embed_in_order(h_ops[k].matrix, h_ops[k].support,
                                            support, d)
                    eigs[theta] = np.linalg.eigh(h)
                self.entries.append((mu, omega, support, p, eigs))

    def terms(self, beta: float) -> list[LocalOperator]:
        out = []
        for mu, omega, support, p, eigs in self.entries:
            total = None
            for theta, (w, v) in eigs.items():
                e_plus = (v * np.exp(beta * w)) @ v.conj().T
                e_minus = (v * np.exp(-2.0 * beta * w)) @ v.conj().T
                f = e_plus @ p @ e_minus @ p @ e_plus
                if (len(omega) - len(theta)) % 2 == 1:
                    f = -f
                total = f if total is None else total + f
            out.append(LocalOperator(support=support, matrix=total))
        return out

    def anchored_sums(self, beta: float) -> dict[int, np.ndarray]:
        dim = self.lat.dim
        sums = {mu: np.zeros((dim, dim), dtype=complex)
                for mu in range(len(self.lat.pairs))}
        for term, (mu, *_rest) in zip(self.terms(beta), self.entries):
            sums[mu] += embed_in_order(term.matrix, term.support,
                                       self.lat.vertices, self.lat.local_dim)
        return sums


def truncated_parent(beta: float, r: int, lat: Lattice,
                     h_ops: Sequence[LocalOperator],
                     measure: bool = True) -> tuple[GlobalOperator, TruncationCertificate]:
    """Cluster sum keeping clusters of at most r interactions, plus its
    certificate.  With measure=True the per-anchor distance to the untruncated
    anchored operator (same beta convention as `cluster_f`) is recorded."""
    if r < 0:
        raise ValueError(f"cutoff r must be >= 0, got {r}")
    builder = _TruncatedBuilder(lat, h_ops, r)
    sums = builder.anchored_sums(beta)
    total = np.zeros((lat.dim, lat.dim), dtype=complex)
    for mu in sorted(sums):
        total += sums[mu]
    per_anchor = []
    measured = math.nan
    if measure:
        full = frozenset(range(len(lat.supports)))
        for mu in sorted(sums):
            exact = cluster_f(lat, mu, full, beta, h_ops).matrix
            per_anchor.append(operator_norm(sums[mu] - exact))
        measured = max(per_anchor)
    cert = _certificate(lat, beta, r, measured, tuple(per_anchor))
    return GlobalOperator(matrix=total), cert


def exact_noncommuting_parent(beta: float, lat: Lattice,
                              h_ops: Sequence[LocalOperator]) -> GlobalOperator:
    """Sum over anchors of exp(beta H / 2) P exp(-beta H) P exp(beta H / 2).

    Positive semidefinite, and its kernel is spanned by the purified Gibbs
    state at inverse temperature beta (apply exp(-beta H / 2) to the
    pair-product state).  No commutation assumptions.
    """
    _check_h_ops(lat, h_ops)
    d = lat.local_dim
    h = np.zeros((lat.dim, lat.dim), dtype=complex)
    for op in h_ops:
        h += embed_in_order(op.matrix, op.support, lat.vertices, d)
    w, v = np.linalg.eigh(h)
    e_half = (v * np.exp(0.5 * beta * w)) @ v.conj().T
    e_full = (v * np.exp(-beta * w)) @ v.conj().T
    total = np.zeros_like(h)
    for mu in range(len(lat.pairs)):
        proj = pair_projector(lat, mu)
        p = embed_in_order(proj.matrix, proj.support, lat.vertices, d)
        total += e_half @ p @ e_full @ p @ e_half
    return GlobalOperator(matrix=total)


@dataclass(frozen=True)
class GapScanRow:
    beta: float
    ground_energy: float
    gap: float
    quadratic_floor: float


def verify_noncommuting_gap(beta_grid: Sequence[float], lat: Lattice,
                            h_ops: Sequence[LocalOperator]) -> list[GapScanRow]:
    """Spectral scan of the exact anchored-sum operator over temperatures.

    Each row reports the ground energy (should sit at zero), the gap above
    it, and the smallest eigenvalue of G^2 - gap*G, which is nonnegative
    exactly when no eigenvalue falls strictly between 0 and the gap; that
    is an independent check that `gap` really bounds the spectrum away
    from the kernel.
    """
    rows = []
    for beta in beta_grid:
        g = exact_noncommuting_parent(float(beta), lat, h_ops).matrix
        w = np.linalg.eigvalsh(g)
        gap = float(w[1] - w[0])
        quad = g @ g - gap * g
        floor = float(np.linalg.eigvalsh(quad)[0])
        rows.append(GapScanRow(beta=float(beta), ground_energy=float(w[0]),
                               gap=gap, quadratic_floor=floor))
    return rows


# ---------------------------------------------------------------------------
# high-temperature preparation


@dataclass(frozen=True)
class HighTempResult:
    final_state: np.ndarray
    fidelity: float
    infidelity: float
    certificate: TruncationCertificate
    norm_drift: float
    tau: float
    steps: int
    beta: float
    h_rescale: float

    def to_json(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "infidelity": self.infidelity,
            "norm_drift": self.norm_drift,
            "tau": self.tau,
            "steps": self.steps,
            "beta": self.beta,
            "h_rescale": self.h_rescale,
            "certificate": {
                "beta": self.certificate.beta,
                "r": self.certificate.r,
                "eta": self.certificate.eta,
                "y": self.certificate.y,
                "bound": self.certificate.bound,
                "valid": self.certificate.valid,
            },
        }


def _purified_gibbs(lat: Lattice, h_ops: Sequence[LocalOperator],
                    beta: float) -> np.ndarray:
    from .model import product_pair_state
    d = lat.local_dim
    h = np.zeros((lat.dim, lat.dim), dtype=complex)
    for op in h_ops:
        h += embed_in_order(op.matrix, op.support, lat.vertices, d)
    w, v = np.linalg.eigh(h)
    pairs = product_pair_state(lat).amplitudes
    psi = (v * np.exp(-0.5 * beta * w)) @ (v.conj().T @ pairs)
    return psi / np.linalg.norm(psi)


def high_temp_prepare(beta: float, r: int, tau: float, lat: Lattice,
                      h_ops: Sequence[LocalOperator], steps: int | None = None,
                      alpha: float = 1.0,
                      allow_invalid_certificate: bool = False) -> HighTempResult:
    """Ramp the truncated cluster sum from infinite temperature down to the
    requested Gibbs temperature and score against the exact purified state.

    The ramp drives the kernel temperature with a smooth flat-ended profile,
    so the instantaneous ground state moves from the bare pair product to the
    purified Gibbs state at `beta`.  Interactions are rescaled to unit norm
    (with beta scaled inversely, leaving beta*H alone) before anything else
    happens; the certificate is evaluated at the final, strongest coupling
    and, unless `allow_invalid_certificate`, an invalid one aborts the run.
    """
    from .evolve import _TermProvider, _propagate, _default_steps
    _check_h_ops(lat, h_ops)
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    factor = max(1.0, max(operator_norm(op.matrix) for op in h_ops))
    h_eff = [LocalOperator(support=op.support, matrix=op.matrix / factor)
             for op in h_ops]
    beta_eff = beta * factor
    cert = _certificate(lat, beta_eff / 2.0, r, math.nan, ())
    if not cert.valid and not allow_invalid_certificate:
        raise CertificationError(
            f"truncation series diverges at beta={beta:g} (y={cert.y:.3f} >= 1); "
            "lower beta or pass allow_invalid_certificate=True")
    builder = _TruncatedBuilder(lat, h_eff, r)

    def moving(s: float) -> list[LocalOperator]:
        ramp = gevrey_f(alpha, min(max(s, 0.0), 1.0))
        return builder.terms(0.5 * beta_eff * ramp)

    provider = _TermProvider(lat, [], moving)
    from .model import product_pair_state
    psi0 = product_pair_state(lat).amplitudes.copy()
    steps_eff = steps if steps is not None else _default_steps(tau)
    psi, drift = _propagate(provider, psi0, tau, steps_eff, lambda t: t / tau)
    target = _purified_gibbs(lat, h_eff, beta_eff)
    fid = float(abs(np.vdot(target, psi)))
    return HighTempResult(final_state=psi, fidelity=fid, infidelity=1.0 - fid,
                          certificate=cert, norm_drift=drift, tau=tau,
                          steps=steps_eff, beta=beta, h_rescale=factor)
