"""Time reparameterizations for adiabatic sweeps.

The workhorse is a smooth ramp whose derivatives of every order vanish at
both endpoints; sweeps driven by it lose the boundary error terms that a
plain linear ramp leaves behind.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate as _si

__all__ = [
    "Schedule",
    "gevrey_density",
    "gevrey_f",
    "linear_schedule",
    "gevrey_schedule",
    "schedule_from_table",
    "schedule_from_csv",
    "endpoint_flatness",
]

_S_TOL = 1e-12


def gevrey_density(alpha: float, t: float) -> float:
    """Bump density exp(-1/((1-t)t)^(1/alpha)) on (0,1), zero at the ends."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if t <= 0.0 or t >= 1.0:
        return 0.0
    w = (1.0 - t) * t
    # Work with log(w^(-1/alpha)) so subnormal t cannot overflow the power.
    log_exponent = -math.log(w) / alpha
    if log_exponent > math.log(700.0):  # exp underflows anyway
        return 0.0
    return math.exp(-math.exp(log_exponent))


@lru_cache(maxsize=None)
def _half_mass(alpha: float) -> float:
    """Integral of the bump density over [0, 1/2], to absolute error <=1e-14."""
    val, err = _si.quad(lambda t: gevrey_density(alpha, t), 0.0, 0.5,
                        epsabs=1e-15, epsrel=1e-13, limit=400)
    if val <= 0.0:
        raise ValueError(f"degenerate bump normalization for alpha={alpha}")
    if err > 1e-12:
        raise RuntimeError(f"bump normalization quadrature error {err:.2e} too large")
    return val


def gevrey_f(alpha: float, s: float) -> float:
    """Normalized ramp f(s) = int_0^s density / int_0^1 density.

    Symmetric about s = 1/2 by construction (the value for s > 1/2 is
    computed as 1 - f(1-s)), monotone, with f(0) = 0 and f(1) = 1 exact.
    """
    if s < -_S_TOL or s > 1.0 + _S_TOL:
        raise ValueError(f"schedule argument s={s} outside [0, 1]")
    s = min(max(s, 0.0), 1.0)
    if s == 0.0:
        return 0.0
    if s == 1.0:
        return 1.0
    if s > 0.5:
        return 1.0 - gevrey_f(alpha, 1.0 - s)
    half = _half_mass(alpha)
    if s == 0.5:
        return 0.5
    val, _ = _si.quad(lambda t: gevrey_density(alpha, t), 0.0, s,
                      epsabs=1e-15, epsrel=1e-13, limit=400)
    return val / (2.0 * half)


@dataclass(frozen=True)
class Schedule:
    """A monotone reparameterization of [0,1] with f(0)=0 and f(1)=1.

    kind is one of "gevrey", "linear", "table".  alpha is meaningful for
    the gevrey kind only.  Tables are interpolated linearly.
    """

    kind: str
    alpha: float = 1.0
    table_s: tuple[float, ...] = field(default=())
    table_f: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.kind not in ("gevrey", "linear", "table"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "gevrey" and self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.kind == "table":
            _validate_table(self.table_s, self.table_f)

    def __call__(self, s: float) -> float:
        if self.kind == "gevrey":
            return gevrey_f(self.alpha, s)
        if s < -_S_TOL or s > 1.0 + _S_TOL:
            raise ValueError(f"schedule argument s={s} outside [0, 1]")
        s = min(max(s, 0.0), 1.0)
        if self.kind == "linear":
            return s
        return float(np.interp(s, self.table_s, self.table_f))


def _validate_table(ss: Sequence[float], ff: Sequence[float]) -> None:
    ss = np.asarray(ss, dtype=float)
    ff = np.asarray(ff, dtype=float)
    if ss.ndim != 1 or ss.shape != ff.shape or ss.size < 2:
        raise ValueError("schedule table needs two equal-length columns with >=2 rows")
    if ss[0] != 0.0 or ss[-1] != 1.0 or ff[0] != 0.0 or ff[-1] != 1.0:
        raise ValueError("schedule table must start at (0,0) and end at (1,1)")
    if np.any(np.diff(ss) <= 0):
        raise ValueError("schedule table s-column must be strictly increasing")
    if np.any(np.diff(ff) < 0):
        raise ValueError("schedule table f-column must be nondecreasing")


def linear_schedule() -> Schedule:
    return Schedule(kind="linear")


def gevrey_schedule(alpha: float = 1.0) -> Schedule:
    return Schedule(kind="gevrey", alpha=alpha)


def schedule_from_table(table_s: Sequence[float], table_f: Sequence[float]) -> Schedule:
    return Schedule(kind="table", table_s=tuple(float(x) for x in table_s),
                    table_f=tuple(float(x) for x in table_f))


def schedule_from_csv(path: str) -> Schedule:
    """Load a two-column CSV (s, f) table; '.' decimal separator, no header."""
    rows = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    if rows.shape[1] != 2:
        raise ValueError(f"schedule CSV must have exactly 2 columns, got {rows.shape[1]}")
    return schedule_from_table(rows[:, 0], rows[:, 1])


def endpoint_flatness(schedule: Schedule, k: int, h: float) -> list[float]:
    """Magnitudes of the k-th central difference quotient of f at s=h and s=1-h.

    The stencil step is h/max(k,1) so all nodes stay inside [0,1].  For a
    ramp that is flat to all orders at the endpoints these quotients decay
    faster than any power of h; for a linear ramp the k=1 quotient stays
    near 1.
    """
    if not 0 <= k <= 6:
        raise ValueError(f"difference order k={k} outside [0, 6]")
    if not 0.0 < h <= 0.05:
        raise ValueError(f"probe offset h={h} outside (0, 0.05]")
    if k == 0:
        return [abs(schedule(h)), abs(1.0 - schedule(1.0 - h))]
    delta = h / k
    out = []
    for s0 in (h, 1.0 - h):
        acc = 0.0
        for j in range(k + 1):
            node = s0 + (j - k / 2.0) * delta
            acc += (-1.0) ** (k - j) * math.comb(k, j) * schedule(node)
        out.append(abs(acc) / delta**k)
    return out
