"""Target states, Gibbs reductions, and the Metropolis correspondence."""
from __future__ import annotations

import itertools

import numpy as np
import pytest

from adiaprep.lattice import build_chain
from adiaprep.linop import LocalOperator
from adiaprep.model import (
    ClassicalIsing,
    DensityMatrix,
    ModelSpec,
    StateVector,
    classical_gibbs_probs,
    mc_hamiltonian,
    metropolis_generator,
    product_pair_state,
    purify_classical,
    state_overlap,
    system_hamiltonian,
    target_state,
    trace_ancillas,
    trace_distance,
)

from conftest import PAULI, dense_herm_exp, oracle_embed, pauli_kron, random_hermitian


def oracle_trace_out(vec: np.ndarray, keep: list[int], n: int, d: int) -> np.ndarray:
    """Partial trace of |vec><vec| keeping the listed tensor slots."""
    drop = [i for i in range(n) if i not in keep]
    tensor = vec.reshape((d,) * n)
    rho = np.tensordot(tensor, tensor.conj(), axes=(drop, drop))
    dim = d ** len(keep)
    return rho.reshape(dim, dim)


def zz_ops(lat, weight=1.0):
    return [LocalOperator(sup, weight * pauli_kron("Z" * len(sup)))
            for sup in lat.supports]


# ---------------------------------------------------------------------------
# states


def test_state_vector_normalizes_and_rejects_zero():
    sv = StateVector.from_raw(np.array([3.0, 4.0j]))
    assert sv.norm() == pytest.approx(1.0)
    assert sv.raw_norm == pytest.approx(5.0)
    with pytest.raises(ValueError):
        StateVector.from_raw(np.zeros(4))


def test_product_pair_state_is_kron_of_pair_states():
    lat = build_chain(2, 2)  # vertices s0 a0 s1 a1
    bell = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2.0)
    np.testing.assert_allclose(product_pair_state(lat).amplitudes,
                               np.kron(bell, bell), atol=1e-15)


def test_single_site_thermal_target():
    lat = build_chain(1, 2)
    beta = 2.0
    spec = ModelSpec.thermal(lat, [LocalOperator(("s0",), PAULI["Z"])], beta)
    amps = target_state(spec).amplitudes
    want = np.zeros(4, dtype=complex)
    want[0] = np.exp(-beta)  # |00>: spin up costs e^{-beta} after the shift
    want[3] = 1.0
    want /= np.linalg.norm(want)
    np.testing.assert_allclose(amps, want, atol=1e-12)


@pytest.mark.parametrize("beta", [0.3, 0.7, 1.2])
def test_thermal_reduction_matches_gibbs(beta):
    lat = build_chain(2, 2)
    spec = ModelSpec.thermal(lat, zz_ops(lat), beta)
    reduced = trace_ancillas(target_state(spec), lat)
    h = oracle_embed(pauli_kron("ZZ"), ("s0", "s1"), ("s0", "s1"), 2)
    gibbs = dense_herm_exp(h, -beta)
    gibbs /= np.trace(gibbs).real
    assert trace_distance(reduced, DensityMatrix(matrix=gibbs)) <= 1e-10


def test_trace_ancillas_matches_reshape_oracle():
    lat = build_chain(2, 2)
    rng = np.random.default_rng(31)
    vec = rng.normal(size=16) + 1j * rng.normal(size=16)
    vec /= np.linalg.norm(vec)
    got = trace_ancillas(StateVector.from_raw(vec), lat).matrix
    keep = [lat.index["s0"], lat.index["s1"]]
    np.testing.assert_allclose(got, oracle_trace_out(vec, keep, 4, 2), atol=1e-13)


def test_purify_classical_small_cases():
    np.testing.assert_allclose(purify_classical(np.array([1.0, 0.0])).amplitudes,
                               np.array([1, 0, 0, 0], dtype=complex))
    bell = purify_classical(np.array([1.0, 1.0]))
    np.testing.assert_allclose(bell.amplitudes,
                               np.array([1, 0, 0, 1]) / np.sqrt(2), atol=1e-15)


def test_purify_classical_reduction_is_the_classical_marginal():
    rng = np.random.default_rng(37)
    c = rng.normal(size=4) + 1j * rng.normal(size=4)
    c /= np.linalg.norm(c)
    lifted = purify_classical(c).amplitudes  # slots: s0 a0 s1 a1
    rho = oracle_trace_out(lifted, [0, 2], 4, 2)
    np.testing.assert_allclose(rho, np.diag(np.abs(c) ** 2), atol=1e-13)


def test_purify_classical_rejects_bad_length():
    with pytest.raises(ValueError):
        purify_classical(np.ones(6), local_dim=2)


def test_state_overlap_and_trace_distance():
    a = StateVector.from_raw(np.array([1.0, 0.0]))
    b = StateVector.from_raw(np.array([1.0j, 0.0]))
    assert state_overlap(a, b) == pytest.approx(1.0)
    rho = np.diag([1.0, 0.0]).astype(complex)
    sigma = np.diag([0.5, 0.5]).astype(complex)
    assert trace_distance(rho, sigma) == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# model specs


def test_thermal_spec_rescales_interactions():
    lat = build_chain(2, 2)
    spec = ModelSpec.thermal(lat, zz_ops(lat, weight=2.5), beta=0.4)
    assert spec.h_scale == pytest.approx(2.5)
    assert spec.beta == pytest.approx(1.0)  # 0.4 * 2.5
    assert spec.q0 == pytest.approx(np.exp(-1.0))
    for q in spec.q_ops:
        w = np.linalg.eigvalsh(q.matrix)
        assert w.max() == pytest.approx(1.0)
        assert w.min() > 0.0


def test_thermal_spec_rejects_noncommuting_terms():
    lat = build_chain(3, 2)
    ops = [LocalOperator(lat.supports[0], pauli_kron("ZZ")),
           LocalOperator(lat.supports[1], pauli_kron("XZ"))]
    with pytest.raises(ValueError):
        ModelSpec.thermal(lat, ops, 0.5)


def test_thermal_spec_rejects_non_hermitian():
    lat = build_chain(1, 2)
    with pytest.raises(ValueError):
        ModelSpec.thermal(lat, [LocalOperator(("s0",), np.array([[0, 1], [0, 0]]))], 0.5)


def test_generic_spec_rejects_singular_q():
    lat = build_chain(1, 2)
    with pytest.raises(ValueError):
        ModelSpec.generic(lat, [LocalOperator(("s0",), np.diag([1.0, 0.0]))])


def test_system_hamiltonian_matches_oracle():
    lat = build_chain(3, 2)
    got = system_hamiltonian(lat, zz_ops(lat, weight=0.8))
    order = lat.system
    want = sum(oracle_embed(0.8 * pauli_kron("ZZ"), sup, order, 2)
               for sup in lat.supports)
    np.testing.assert_allclose(got, want, atol=1e-13)


# ---------------------------------------------------------------------------
# classical Ising and the Metropolis generator


def test_classical_ising_energies_against_enumeration():
    model = ClassicalIsing(3, couplings=((0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)),
                           fields=((0, 0.4),))
    got = model.energies()
    for idx in range(8):
        bits = [(idx >> (2 - k)) & 1 for k in range(3)]
        spins = [1 - 2 * b for b in bits]
        want = (spins[0] * spins[1] + spins[1] * spins[2] + spins[0] * spins[2]
                + 0.4 * spins[0])
        assert got[idx] == pytest.approx(want)


def test_metropolis_two_state_infinite_temperature():
    gen = metropolis_generator(np.array([0.0, 1.0]), beta=0.0)
    np.testing.assert_allclose(gen.matrix, np.array([[-1.0, 1.0], [1.0, -1.0]]))


def test_metropolis_stationarity_and_detailed_balance():
    energies = np.array([0.0, 0.7, 1.3, 0.2])
    beta = 0.9
    gen = metropolis_generator(energies, beta)
    pi = classical_gibbs_probs(energies, beta)
    np.testing.assert_allclose(gen.matrix @ pi, np.zeros(4), atol=1e-12)
    np.testing.assert_allclose(gen.matrix.sum(axis=0), np.zeros(4), atol=1e-12)
    for x in range(4):
        for y in range(4):
            assert gen.matrix[x, y] * pi[y] == pytest.approx(gen.matrix[y, x] * pi[x])


def test_metropolis_ising_only_connects_single_flips():
    tri = ClassicalIsing(2, couplings=((0, 1, 1.0),))
    gen = metropolis_generator(tri, beta=0.3)
    assert gen.matrix[0, 3] == 0.0  # |00> -> |11> needs two flips
    assert gen.matrix[3, 0] == 0.0


def test_metropolis_rates_freeze_out_at_low_temperature():
    gen = metropolis_generator(np.array([0.0, 1.0]), beta=400.0)
    assert gen.matrix[1, 0] <= 1e-150  # uphill
    assert gen.matrix[0, 1] == pytest.approx(1.0)  # downhill stays order one


def test_mc_hamiltonian_two_state_ground_vector():
    gen = metropolis_generator(np.array([1.0, -1.0]), beta=1.0)
    ham = mc_hamiltonian(gen)
    assert ham.is_hermitian()
    w, v = np.linalg.eigh(ham.matrix)
    want = np.array([np.exp(-0.5), np.exp(0.5)])
    want /= np.linalg.norm(want)
    assert abs(np.vdot(want, v[:, 0])) == pytest.approx(1.0, abs=1e-12)
    assert w[0] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("beta", [0.0, 0.5, 1.0])
def test_mc_spectrum_is_minus_generator_spectrum(beta):
    tri = ClassicalIsing(3, couplings=((0, 1, 1.0), (1, 2, -0.5), (0, 2, 0.7)),
                         fields=((1, 0.3),))
    gen = metropolis_generator(tri, beta)
    ham = mc_hamiltonian(gen)
    w_s = np.sort(np.linalg.eigvals(gen.matrix).real)
    w_g = np.sort(np.linalg.eigvalsh(ham.matrix))
    np.testing.assert_allclose(np.sort(-w_s), w_g, atol=1e-9)
    assert w_g[0] >= -1e-12


def test_classical_gibbs_probs_oracle():
    energies = np.array([0.0, 2.0])
    p = classical_gibbs_probs(energies, 1.5)
    z = 1.0 + np.exp(-3.0)
    np.testing.assert_allclose(p, [1.0 / z, np.exp(-3.0) / z])
