"""Schrodinger propagation along segment paths and its diagnostics.

The integrator is a midpoint-exponential (second-order Magnus) stepper:
each substep applies exp(-i dt H(t_mid)) exactly.  Macro steps pair one
full substep against two half substeps and Richardson-extrapolate, which
cancels the leading even-order error and yields an effective fourth-order
method; the combination is renormalized and the pre-normalization norm
deviation is reported as the step's norm drift.  Small systems exponentiate
by eigendecomposition; larger ones apply the same exponential through a
Lanczos (Krylov) expansion of the dense local terms acting on the state,
which changes the arithmetic but not the scheme.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .lattice import Lattice
from .linop import GlobalOperator, LocalOperator, operator_norm, pseudo_inverse
from .model import ModelSpec, StateVector, state_overlap, target_state
from .parent import (PathSpec, localized_terms, segment_split_terms,
                     sequential_hamiltonian, instantaneous_ground_state)

__all__ = [
    "EvolutionResult",
    "SegmentDiagnostics",
    "AdiabaticBound",
    "ExpansionTerm",
    "LocalizationTable",
    "SweepRow",
    "SweepTable",
    "integrate",
    "adiabatic_error",
    "evolve_segment",
    "run_sequential",
    "run_grouped",
    "compare_localization",
    "theorem1_bound",
    "estimate_gevrey_constants",
    "error_vs_runtime_sweep",
    "adiabatic_expansion",
    "expansion_state",
]

DENSE_THRESHOLD = 64
GAP_DENSE_MAX = 600
NOISE_FLOOR = 1e-9
DEGENERATE_GAP_TOL = 1e-9
_LANCZOS_TOL = 1e-12
_LANCZOS_MAX = 90


def adiabatic_error(psi: StateVector, phi: StateVector) -> float:
    """Phase-free distance sqrt(2 - 2 |<phi|psi>|)."""
    ov = state_overlap(psi, phi)
    return math.sqrt(max(0.0, 2.0 - 2.0 * ov))


# ---------------------------------------------------------------------------
# exponential application


def _expm_eigh(h: np.ndarray, coef: complex, psi: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(coef * w)) @ (v.conj().T @ psi)


def _expm_lanczos(apply_h: Callable[[np.ndarray], np.ndarray], coef: complex,
                  psi: np.ndarray, tol: float = _LANCZOS_TOL, depth: int = 0) -> np.ndarray:
    """exp(coef * H) psi for Hermitian H via a Lanczos subspace with full
    reorthogonalization.  Splits the step if the subspace saturates."""
    beta0 = float(np.linalg.norm(psi))
    if beta0 == 0.0:
        return psi.copy()
    vmat = np.empty((_LANCZOS_MAX + 1, psi.size), dtype=complex)
    vmat[0] = psi / beta0
    alphas: list[float] = []
    betas: list[float] = []
    for j in range(_LANCZOS_MAX):
        w = apply_h(vmat[j])
        alphas.append(float(np.real(np.vdot(vmat[j], w))))
        w = w - alphas[-1] * vmat[j]
        if j > 0:
            w = w - betas[-1] * vmat[j - 1]
        # full reorthogonalization; j stays small so this is cheap
        overlaps = vmat[: j + 1].conj() @ w
        w = w - overlaps @ vmat[: j + 1]
        beta = float(np.linalg.norm(w))
        m = j + 1
        tmat = np.diag(alphas)
        if m > 1:
            off = np.array(betas)
            tmat += np.diag(off, 1) + np.diag(off, -1)
        tw, tv = np.linalg.eigh(tmat)
        small = (tv * np.exp(coef * tw)) @ (tv.conj().T[:, 0])
        err = beta * abs(small[-1])
        if err < tol or beta < 1e-14:
            return beta0 * (small @ vmat[:m])
        betas.append(beta)
        vmat[m] = w / beta
    if depth >= 8:
        raise RuntimeError("Lanczos exponential failed to converge")
    half = _expm_lanczos(apply_h, coef / 2.0, psi, tol, depth + 1)
    return _expm_lanczos(apply_h, coef / 2.0, half, tol, depth + 1)


# ---------------------------------------------------------------------------
# Hamiltonian providers


class _TermProvider:
    """Builds, per schedule position s, either a dense matrix or a matvec
    closure from an s-independent term list plus a moving-term builder."""

    def __init__(self, lat: Lattice, static_terms: Sequence[LocalOperator],
                 moving_builder: Callable[[float], list[LocalOperator]],
                 dense_threshold: int = DENSE_THRESHOLD) -> None:
        self.lat = lat
        self.dim = lat.dim
        self.dense = self.dim <= dense_threshold
        self.static_terms = list(static_terms)
        self.moving_builder = moving_builder
        if self.dense:
            self.h_static = np.zeros((self.dim, self.dim), dtype=complex)
            for term in self.static_terms:
                self.h_static += self._embed(term)
        else:
            self.static_ops = [self._op_data(t) for t in self.static_terms]

    def _embed(self, term: LocalOperator) -> np.ndarray:
        from .linop import embed_in_order
        return embed_in_order(term.matrix, term.support, self.lat.vertices,
                              self.lat.local_dim)

    def _op_data(self, term: LocalOperator) -> tuple[np.ndarray, list[int]]:
        d = self.lat.local_dim
        k = len(term.support)
        positions = [self.lat.index[v] for v in term.support]
        return term.matrix.reshape((d,) * (2 * k)), positions

    def dense_at(self, s: float) -> np.ndarray:
        h = self.h_static.copy()
        for term in self.moving_builder(s):
            h += self._embed(term)
        return h

    def apply_at(self, s: float) -> Callable[[np.ndarray], np.ndarray]:
        ops = self.static_ops + [self._op_data(t) for t in self.moving_builder(s)]
        n = len(self.lat.vertices)
        d = self.lat.local_dim
        shape = (d,) * n

        def apply(psi: np.ndarray) -> np.ndarray:
            tens = psi.reshape(shape)
            out = np.zeros(shape, dtype=complex)
            for mat, pos in ops:
                k = len(pos)
                contrib = np.tensordot(mat, tens, axes=(list(range(k, 2 * k)), pos))
                out += np.moveaxis(contrib, list(range(k)), pos)
            return out.reshape(-1)

        return apply

    def all_terms(self, s: float) -> list[LocalOperator]:
        return self.static_terms + list(self.moving_builder(s))


def _propagate(provider: _TermProvider, psi: np.ndarray, t_final: float, steps: int,
               s_of_t: Callable[[float], float]) -> tuple[np.ndarray, float]:
    """Richardson-paired midpoint-exponential propagation; returns the final
    state and the maximal per-step norm deviation seen before renormalizing."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if t_final < 0:
        raise ValueError(f"t_final must be >= 0, got {t_final}")
    if t_final == 0.0:
        return psi.copy(), 0.0
    h = t_final / steps
    drift = 0.0

    def substep(state: np.ndarray, t_mid: float, dt: float) -> np.ndarray:
        s = s_of_t(t_mid)
        if provider.dense:
            return _expm_eigh(provider.dense_at(s), -1j * dt, state)
        return _expm_lanczos(provider.apply_at(s), -1j * dt, state)

    for i in range(steps):
        t0 = i * h
        coarse = substep(psi, t0 + 0.5 * h, h)
        fine = substep(psi, t0 + 0.25 * h, 0.5 * h)
        fine = substep(fine, t0 + 0.75 * h, 0.5 * h)
        combo = (4.0 * fine - coarse) / 3.0
        norm = float(np.linalg.norm(combo))
        drift = max(drift, abs(norm - 1.0))
        psi = combo / norm
    return psi, drift


def integrate(h_of_t: Callable[[float], GlobalOperator | np.ndarray],
              psi0: StateVector | np.ndarray, t_final: float, steps: int) -> StateVector:
    """Propagate i dpsi/dt = H(t) psi from t=0 to t_final.

    Fourth-order accurate in the step size through Richardson pairing of
    midpoint-exponential substeps; every substep is exactly unitary.
    """
    amps = psi0.amplitudes if isinstance(psi0, StateVector) else np.asarray(psi0, dtype=complex)
    amps = amps.reshape(-1).copy()

    def matrix_at(t: float) -> np.ndarray:
        h = h_of_t(t)
        return h.matrix if isinstance(h, GlobalOperator) else np.asarray(h, dtype=complex)

    dim = amps.size
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if t_final < 0:
        raise ValueError(f"t_final must be >= 0, got {t_final}")
    h = t_final / steps if steps else 0.0
    drift = 0.0
    for i in range(steps):
        if t_final == 0.0:
            break
        t0 = i * h

        def sub(state: np.ndarray, t_mid: float, dt: float) -> np.ndarray:
            m = matrix_at(t_mid)
            if dim <= DENSE_THRESHOLD:
                return _expm_eigh(m, -1j * dt, state)
            return _expm_lanczos(lambda x: m @ x, -1j * dt, state)

        coarse = sub(amps, t0 + 0.5 * h, h)
        fine = sub(amps, t0 + 0.25 * h, 0.5 * h)
        fine = sub(fine, t0 + 0.75 * h, 0.5 * h)
        combo = (4.0 * fine - coarse) / 3.0
        norm = float(np.linalg.norm(combo))
        drift = max(drift, abs(norm - 1.0))
        amps = combo / norm
    return StateVector(amplitudes=amps, raw_norm=1.0)


# ---------------------------------------------------------------------------
# sequential / grouped runs


@dataclass(frozen=True)
class SegmentDiagnostics:
    segment: int
    tau: float
    steps: int
    min_gap: float
    norm_drift: float


@dataclass(frozen=True)
class EvolutionResult:
    final_state: StateVector
    overlap: float
    adiabatic_error: float
    wall_segments: tuple[SegmentDiagnostics, ...]
    certified: bool

    def to_json(self) -> dict:
        return {
            "overlap": self.overlap,
            "adiabatic_error": self.adiabatic_error,
            "certified": self.certified,
            "segments": [
                {"segment": s.segment, "tau": s.tau, "steps": s.steps,
                 "min_gap": s.min_gap, "norm_drift": s.norm_drift}
                for s in self.wall_segments
            ],
        }


def _full_gap(path: PathSpec, n: int, s: float) -> float:
    """Gap of the untruncated segment operator, by dense solve when small
    and a two-eigenvalue Krylov solve otherwise."""
    lat = path.model.lattice
    if lat.dim <= GAP_DENSE_MAX:
        w = np.linalg.eigvalsh(sequential_hamiltonian(path, n, s).matrix)
        return float(w[1] - w[0])
    static, moving = segment_split_terms(path, n, radius=None)
    provider = _TermProvider(lat, static, moving)
    apply = provider.apply_at(s)
    op = spla.LinearOperator((lat.dim, lat.dim), matvec=apply, dtype=complex)
    v0 = np.full(lat.dim, 1.0 / math.sqrt(lat.dim))
    w = spla.eigsh(op, k=2, which="SA", v0=v0, tol=1e-7, maxiter=20000,
                   return_eigenvectors=False)
    w = np.sort(w)
    return float(w[1] - w[0])


def _default_steps(tau: float) -> int:
    return max(64, int(math.ceil(16.0 * tau)))


def _segment_gap_scan(path: PathSpec, n: int, gap_points: int) -> float:
    if gap_points <= 0:
        return math.nan
    ss = np.linspace(0.0, 1.0, gap_points)
    return min(_full_gap(path, n, float(s)) for s in ss)


def run_sequential(path: PathSpec, taus: float | Sequence[float],
                   radius: float | None = None, steps_per_segment: int | None = None,
                   gap_points: int = 3) -> EvolutionResult:
    """Evolve segments 1..N in order, each for its own duration, starting
    from the pair-product state, and score against the model target.

    radius=None uses the path's localization radius (full sum if that is
    also None).  min_gap diagnostics always refer to the untruncated
    segment operator, which is the object the adiabatic guarantee sees;
    a degenerate gap flips `certified` off but the run still completes.
    """
    model = path.model
    n_seg = path.n_segments
    if isinstance(taus, (int, float)):
        tau_list = [float(taus)] * n_seg
    else:
        tau_list = [float(t) for t in taus]
        if len(tau_list) != n_seg:
            raise ValueError(f"got {len(tau_list)} durations for {n_seg} segments")
    from .model import product_pair_state
    psi = product_pair_state(model.lattice).amplitudes.copy()
    diags: list[SegmentDiagnostics] = []
    certified = True
    radius_eff = radius if radius is not None else path.localization_radius
    for n in range(1, n_seg + 1):
        tau_n = tau_list[n - 1]
        steps = steps_per_segment if steps_per_segment is not None else _default_steps(tau_n)
        static, moving = segment_split_terms(path, n, radius=radius_eff)
        provider = _TermProvider(model.lattice, static, moving)
        psi, drift = _propagate(provider, psi, tau_n, steps, lambda t, tn=tau_n: t / tn)
        min_gap = _segment_gap_scan(path, n, gap_points)
        if not math.isnan(min_gap) and min_gap < DEGENERATE_GAP_TOL:
            certified = False
        diags.append(SegmentDiagnostics(segment=n, tau=tau_n, steps=steps,
                                        min_gap=min_gap, norm_drift=drift))
    final = StateVector(amplitudes=psi, raw_norm=1.0)
    target = target_state(model)
    ov = state_overlap(final, target)
    return EvolutionResult(final_state=final, overlap=ov,
                           adiabatic_error=math.sqrt(max(0.0, 2.0 - 2.0 * ov)),
                           wall_segments=tuple(diags), certified=certified)


def _group_support(path: PathSpec, n: int, radius: float | None) -> set[str]:
    terms = localized_terms(path, n, 0.0, radius=radius)
    out: set[str] = set()
    for t in terms:
        out |= set(t.support)
    return out


def run_grouped(path: PathSpec, grouping: Sequence[Sequence[int]], tau: float,
                radius: float | None = None, steps: int | None = None,
                gap_points: int = 0) -> EvolutionResult:
    """Evolve groups of segments simultaneously, one duration tau per group.

    Members of a group must have pairwise disjoint localized supports (the
    product of their propagators then factorizes, so the result matches the
    segment-by-segment run).  grouping uses 1-based segment indices and
    must partition 1..N in ascending order.
    """
    model = path.model
    radius_eff = radius if radius is not None else path.localization_radius
    flat = [n for group in grouping for n in group]
    if flat != list(range(1, path.n_segments + 1)):
        raise ValueError("grouping must partition segments 1..N in order")
    supports = {n: _group_support(path, n, radius_eff) for n in flat}
    for group in grouping:
        for i, a in enumerate(group):
            for b in group[i + 1:]:
                clash = supports[a] & supports[b]
                if clash:
                    raise ValueError(
                        f"segments {a} and {b} in one group share vertices {sorted(clash)}"
                    )
    from .model import product_pair_state
    psi = product_pair_state(model.lattice).amplitudes.copy()
    diags: list[SegmentDiagnostics] = []
    certified = True
    steps_eff = steps if steps is not None else _default_steps(tau)
    for gi, group in enumerate(grouping):
        statics = []
        builders = []
        for n in group:
            st, mv = segment_split_terms(path, n, radius=radius_eff)
            statics.extend(st)
            builders.append(mv)

        def moving(s: float, fns=tuple(builders)) -> list[LocalOperator]:
            out: list[LocalOperator] = []
            for fn in fns:
                out.extend(fn(s))
            return out

        provider = _TermProvider(model.lattice, statics, moving)
        psi, drift = _propagate(provider, psi, tau, steps_eff, lambda t: t / tau)
        min_gap = math.nan
        if gap_points > 0:
            min_gap = min(_segment_gap_scan(path, n, gap_points) for n in group)
            if min_gap < DEGENERATE_GAP_TOL:
                certified = False
        diags.append(SegmentDiagnostics(segment=gi + 1, tau=tau, steps=steps_eff,
                                        min_gap=min_gap, norm_drift=drift))
    final = StateVector(amplitudes=psi, raw_norm=1.0)
    target = target_state(model)
    ov = state_overlap(final, target)
    return EvolutionResult(final_state=final, overlap=ov,
                           adiabatic_error=math.sqrt(max(0.0, 2.0 - 2.0 * ov)),
                           wall_segments=tuple(diags), certified=certified)


# ---------------------------------------------------------------------------
# localization comparison


@dataclass(frozen=True)
class LocalizationTable:
    segment: int
    tau: float
    radii: tuple[float, ...]
    distances: tuple[float, ...]
    log_slope: float

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.radii, self.distances))


def evolve_segment(path: PathSpec, n: int, tau: float, steps: int,
                   radius: float | None = None, psi0: np.ndarray | None = None,
                   s_map: Callable[[float], float] | None = None
                   ) -> tuple[np.ndarray, float]:
    """One segment evolution as a building block: start from psi0 (default:
    the segment's exact initial ground state), evolve for tau, return the
    final amplitudes and the norm drift.  s_map, when given, is composed
    with the default clock: it receives the normalized progress t/tau and
    returns the path position, letting callers reparameterize the drive on
    top of the path's own schedule."""
    if psi0 is None:
        psi0 = instantaneous_ground_state(path, n, 0.0).amplitudes.copy()
    static, moving = segment_split_terms(path, n, radius=radius)
    provider = _TermProvider(path.model.lattice, static, moving)
    s_of_t = (lambda t: s_map(t / tau)) if s_map is not None else (lambda t: t / tau)
    return _propagate(provider, psi0, tau, steps, s_of_t)


def compare_localization(path: PathSpec, n: int, tau: float,
                         radii: Sequence[float], steps: int | None = None) -> LocalizationTable:
    """Distance between the full segment evolution and its radius-truncated
    versions, all started from the exact segment ground state."""
    steps_eff = steps if steps is not None else _default_steps(tau)
    psi0 = instantaneous_ground_state(path, n, 0.0).amplitudes
    full, _ = evolve_segment(path, n, tau, steps_eff, radius=None, psi0=psi0.copy())
    dists = []
    for radius in radii:
        trunc, _ = evolve_segment(path, n, tau, steps_eff, radius=float(radius),
                                  psi0=psi0.copy())
        dists.append(float(np.linalg.norm(full - trunc)))
    usable = [(r, d) for r, d in zip(radii, dists) if d > 1e-12]
    if len(usable) >= 2:
        xs = np.array([r for r, _ in usable], dtype=float)
        ys = np.log(np.array([d for _, d in usable]))
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        slope = -math.inf
    return LocalizationTable(segment=n, tau=tau, radii=tuple(float(r) for r in radii),
                             distances=tuple(dists), log_slope=slope)


# ---------------------------------------------------------------------------
# analytic bound and constant estimation


@dataclass(frozen=True)
class AdiabaticBound:
    """Inputs of the closed-form error bound: derivative scale K, growth
    rate c, smoothness index alpha, spectral gap, and total runtime."""

    K: float
    c: float
    alpha: float
    gap: float
    tau: float

    def __post_init__(self) -> None:
        for name in ("K", "c", "alpha", "gap", "tau"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def theorem1_bound(b: AdiabaticBound) -> float:
    """Closed-form superpolynomial error bound for a smooth gapped sweep."""
    four_pi2 = 4.0 * math.pi**2
    prefactor = 8.0 * b.c * math.e * (b.K / b.gap) * (four_pi2 / 3.0) ** 3
    inner = (b.tau * b.gap**3 / (4.0 * math.e * b.c**2 * b.K**2)) * (3.0 / four_pi2) ** 5
    if inner <= 0.0:
        return prefactor
    return prefactor * math.exp(-(inner ** (1.0 / (1.0 + b.alpha))))


def _derivative_norms(h_of_s: Callable[[float], np.ndarray], n_grid: int,
                      max_order: int) -> dict[int, float]:
    ss = np.linspace(0.0, 1.0, n_grid)
    hs = np.array([h_of_s(float(s)) for s in ss])
    dt = ss[1] - ss[0]
    out: dict[int, float] = {}
    cur = hs
    for k in range(1, max_order + 1):
        cur = np.gradient(cur, dt, axis=0, edge_order=2)
        out[k] = max(operator_norm(m) for m in cur[2 * k:len(cur) - 2 * k or None])
    return out


def estimate_gevrey_constants(h_of_s: Callable[[float], np.ndarray], alpha: float,
                              n_grid: int = 241, max_order: int = 4) -> tuple[float, float]:
    """Fit (K, c) such that ||d^k H / ds^k|| <= K c^k (k!)^(1+alpha) / (k+1)^2
    holds for the sampled derivative norms up to max_order.

    Finite-difference estimates, so the result is a labeled estimate, not a
    certificate.
    """
    norms = _derivative_norms(h_of_s, n_grid, max_order)
    g = {k: norms[k] * (k + 1) ** 2 / math.factorial(k) ** (1.0 + alpha)
         for k in norms}
    g1 = max(g[1], 1e-300)
    c = 1e-6
    for k in range(2, max_order + 1):
        if g[k] > 0:
            c = max(c, (g[k] / g1) ** (1.0 / (k - 1)))
    K = g1 / c
    return K, c


# ---------------------------------------------------------------------------
# error vs runtime sweep


@dataclass(frozen=True)
class SweepRow:
    tau: float
    error: float
    bound_estimate: float
    min_gap: float
    norm_drift: float
    certified: bool
    reliable: bool


@dataclass(frozen=True)
class SweepTable:
    alpha: float
    rows: tuple[SweepRow, ...]
    decay_slope: float
    K_estimate: float
    c_estimate: float

    def to_csv(self) -> str:
        header = "tau,error,bound_estimate,min_gap,norm_drift,certified,reliable"
        lines = [header]
        for r in self.rows:
            lines.append(",".join([
                f"{r.tau:.17g}", f"{r.error:.17g}", f"{r.bound_estimate:.17g}",
                f"{r.min_gap:.17g}", f"{r.norm_drift:.17g}",
                "1" if r.certified else "0", "1" if r.reliable else "0",
            ]))
        return "\n".join(lines) + "\n"


def error_vs_runtime_sweep(path: PathSpec, taus: Sequence[float],
                           radius: float | None = None,
                           steps_per_segment: int | None = None,
                           gap_points: int = 9) -> SweepTable:
    """Run the sequential evolution for each total duration and tabulate the
    measured error next to the closed-form bound evaluated with estimated
    constants.  Rows whose error sits at or below the 1e-9 integration
    noise floor are flagged unreliable.
    """
    alpha = path.schedule.alpha if path.schedule.kind == "gevrey" else 1.0
    k_est = c_est = math.nan
    min_gap_all = math.inf
    if path.model.lattice.dim <= GAP_DENSE_MAX:
        ks, cs = [], []
        for n in range(1, path.n_segments + 1):
            h_of_s = lambda s, nn=n: sequential_hamiltonian(path, nn, s).matrix
            k_n, c_n = estimate_gevrey_constants(h_of_s, alpha)
            ks.append(k_n)
            cs.append(c_n)
        k_est = max(ks)
        c_est = max(cs)
    for n in range(1, path.n_segments + 1):
        min_gap_all = min(min_gap_all, _segment_gap_scan(path, n, max(gap_points, 2)))
    rows = []
    for tau in taus:
        res = run_sequential(path, float(tau), radius=radius,
                             steps_per_segment=steps_per_segment, gap_points=0)
        drift = max(d.norm_drift for d in res.wall_segments)
        if math.isfinite(k_est) and min_gap_all > 0:
            bound = path.n_segments * theorem1_bound(AdiabaticBound(
                K=k_est, c=c_est, alpha=alpha, gap=min_gap_all, tau=float(tau)))
        else:
            bound = math.inf
        rows.append(SweepRow(tau=float(tau), error=res.adiabatic_error,
                             bound_estimate=float(bound), min_gap=float(min_gap_all),
                             norm_drift=drift,
                             certified=min_gap_all > DEGENERATE_GAP_TOL,
                             reliable=res.adiabatic_error > NOISE_FLOOR))
    usable = [r for r in rows if r.reliable]
    slope = math.nan
    if len(usable) >= 2:
        xs = np.array([r.tau ** (1.0 / (1.0 + alpha)) for r in usable[len(usable) // 2 - 1:]])
        ys = np.log(np.array([r.error for r in usable[len(usable) // 2 - 1:]]))
        if xs.size >= 2:
            slope = float(np.polyfit(xs, ys, 1)[0])
    return SweepTable(alpha=alpha, rows=tuple(rows), decay_slope=slope,
                      K_estimate=float(k_est), c_estimate=float(c_est))


# ---------------------------------------------------------------------------
# adiabatic expansion


@dataclass(frozen=True)
class ExpansionTerm:
    order: int
    phi: np.ndarray      # (n_grid, dim) samples of the order-j vector
    varphi: np.ndarray   # (n_grid,) scalar coefficient samples


def _grid_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    return np.gradient(values, dt, axis=0, edge_order=2)


def adiabatic_expansion(g_of_s: Callable[[float], GlobalOperator | np.ndarray],
                        s_grid: Sequence[float], m_order: int,
                        kernel_tol: float | None = None) -> list[ExpansionTerm]:
    """Terms phi_0..phi_M of the slow-drive expansion on a uniform grid.

    The path must have exact zero ground energy and a nonvanishing gap on
    the grid.  phi_0 is the gauge-fixed ground state (phases aligned along
    the grid, then projected so <phi | dphi/ds> = 0); each further order is
    phi_j = varphi_j * phi + i G^+ dphi_{j-1}/ds with varphi_j the cumulative
    trapezoid of i <dphi/ds| G^+ |dphi_{j-1}/ds>.  Truncating after order M
    approximates the true evolution to O(eps^(M+1)) when the drive is flat
    at s=0.
    """
    if not 0 <= m_order <= 3:
        raise ValueError(f"expansion order {m_order} outside 0..3")
    ss = np.asarray(s_grid, dtype=float)
    if ss.ndim != 1 or ss.size < 7:
        raise ValueError("s_grid must be a 1-d grid with at least 7 points")
    dts = np.diff(ss)
    if np.any(dts <= 0) or abs(dts.max() - dts.min()) > 1e-9 * dts.mean():
        raise ValueError("s_grid must be uniform and increasing")
    dt = float(dts.mean())
    n = ss.size
    mats = []
    for s in ss:
        g = g_of_s(float(s))
        mats.append(g.matrix if isinstance(g, GlobalOperator) else np.asarray(g, dtype=complex))
    dim = mats[0].shape[0]
    phi0 = np.empty((n, dim), dtype=complex)
    ground = np.empty(n)
    gaps = np.empty(n)
    # keep the eigenbases and apply the pseudo-inverse through them; dense
    # G^+ matrices would double the per-point cost for nothing
    bases: list[tuple[np.ndarray, np.ndarray]] = []
    for i, m in enumerate(mats):
        w, v = np.linalg.eigh(m)
        ground[i] = w[0]
        gaps[i] = w[1] - w[0] if dim > 1 else math.inf
        vec = v[:, 0]
        if i == 0:
            k = int(np.argmax(np.abs(vec)))
            vec = vec * (abs(vec[k]) / vec[k])
        else:
            z = np.vdot(phi0[i - 1], vec)
            if abs(z) < 1e-12:
                raise ValueError(f"ground state changed discontinuously near s={ss[i]:.6f}")
            vec = vec * (z.conjugate() / abs(z))
        phi0[i] = vec
        scale = float(np.abs(w).max())
        if abs(w[0]) > 1e-8 * max(scale, 1.0):
            raise ValueError(f"ground energy {w[0]:.3e} at s={ss[i]:.6f} is not zero")
        if gaps[i] <= 1e-10 * max(scale, 1.0):
            raise ValueError(f"gap closes at s={ss[i]:.6f}")
        tol = kernel_tol if kernel_tol is not None else 1e-10 * scale
        inv_w = np.where(np.abs(w) > tol, 1.0 / np.where(np.abs(w) > tol, w, 1.0), 0.0)
        bases.append((inv_w, v))
    phi_dot = _grid_derivative(phi0, dt)
    # gauge: remove any residual component of the derivative along the state
    for i in range(n):
        phi_dot[i] -= phi0[i] * np.vdot(phi0[i], phi_dot[i])
    terms = [ExpansionTerm(order=0, phi=phi0, varphi=np.ones(n, dtype=complex))]
    prev = phi0
    for j in range(1, m_order + 1):
        prev_dot = _grid_derivative(prev, dt)
        winv = np.empty((n, dim), dtype=complex)
        integrand = np.empty(n, dtype=complex)
        for i in range(n):
            inv_w, v = bases[i]
            winv[i] = v @ (inv_w * (v.conj().T @ prev_dot[i]))
            integrand[i] = np.vdot(phi_dot[i], winv[i])
        varphi = 1j * _cumtrapz(integrand, dt)
        phi_j = varphi[:, None] * phi0 + 1j * winv
        terms.append(ExpansionTerm(order=j, phi=phi_j, varphi=varphi))
        prev = phi_j
    return terms


def _cumtrapz(values: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(values)
    out[1:] = np.cumsum((values[1:] + values[:-1]) * 0.5 * dt)
    return out


def expansion_state(terms: Sequence[ExpansionTerm], eps: float, index: int = -1) -> np.ndarray:
    """Truncated series sum_j eps^j phi_j at one grid point (default: end)."""
    out = np.zeros_like(terms[0].phi[index])
    for t in terms:
        out = out + (eps ** t.order) * t.phi[index]
    return out
