"""Embedding, exponentials, and pseudo-inverses against brute-force oracles."""
from __future__ import annotations

import numpy as np
import pytest

from adiaprep.lattice import build_chain
from adiaprep.linop import (
    GlobalOperator,
    LocalOperator,
    apply_in_order,
    eig_hermitian,
    embed,
    embed_in_order,
    herm_exp,
    hermiticity_defect,
    matrix_from_json,
    matrix_to_json,
    operator_norm,
    pseudo_inverse,
)

from conftest import PAULI, oracle_embed, pauli_kron, random_hermitian


def test_single_site_z_embeds_as_expected():
    lat = build_chain(1, 2)  # vertices (s0, a0)
    got = embed(LocalOperator(("s0",), PAULI["Z"]), lat)
    np.testing.assert_allclose(got.matrix, np.diag([1, 1, -1, -1]).astype(complex))


@pytest.mark.parametrize("sub", [("s0",), ("a0",), ("s1",), ("s0", "s1"),
                                 ("s1", "s0"), ("a0", "s1")])
def test_embed_matches_entrywise_oracle(sub):
    lat = build_chain(2, 2)
    rng = np.random.default_rng(3)
    mat = random_hermitian(rng, 2 ** len(sub))
    got = embed(LocalOperator(sub, mat), lat).matrix
    want = oracle_embed(mat, sub, lat.vertices, 2)
    np.testing.assert_allclose(got, want, atol=1e-14)


def test_embedded_product_equals_embedded_kron():
    lat = build_chain(2, 2)
    rng = np.random.default_rng(5)
    a = random_hermitian(rng, 2)
    b = random_hermitian(rng, 2)
    left = embed(LocalOperator(("s0",), a), lat).matrix
    right = embed(LocalOperator(("s1",), b), lat).matrix
    joint = embed(LocalOperator(("s0", "s1"), np.kron(a, b)), lat).matrix
    np.testing.assert_allclose(left @ right, joint, atol=1e-13)


def test_embed_in_order_qutrit():
    order = ("u", "v", "w")
    rng = np.random.default_rng(11)
    mat = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    got = embed_in_order(mat, ("w", "u"), order, 3)
    np.testing.assert_allclose(got, oracle_embed(mat, ("w", "u"), order, 3), atol=1e-14)


def test_apply_in_order_agrees_with_dense_embedding():
    order = ("p", "q", "r", "s")
    rng = np.random.default_rng(13)
    mat = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    vec = rng.normal(size=16) + 1j * rng.normal(size=16)
    got = apply_in_order(mat, ("s", "q"), order, 2, vec)
    want = oracle_embed(mat, ("s", "q"), order, 2) @ vec
    np.testing.assert_allclose(got, want, atol=1e-13)


def test_eig_hermitian_reconstructs():
    rng = np.random.default_rng(17)
    h = random_hermitian(rng, 8)
    w, v = eig_hermitian(GlobalOperator(h))
    np.testing.assert_allclose((v * w) @ v.conj().T, h, atol=1e-9)
    assert np.all(np.diff(w) >= -1e-12)


def test_herm_exp_matches_taylor_oracle():
    lat = build_chain(2, 2)
    zz = LocalOperator(("s0", "s1"), pauli_kron("ZZ"))
    x0 = LocalOperator(("s0",), pauli_kron("X"))
    h = embed(zz, lat).matrix + 0.5 * embed(x0, lat).matrix
    coef = -0.5  # Boltzmann factor at beta = 0.5 on each half
    taylor = np.zeros_like(h)
    power = np.eye(h.shape[0], dtype=complex)
    for k in range(60):
        taylor += power
        power = power @ (coef * h) / (k + 1)
    got = herm_exp(GlobalOperator(h), coef).matrix
    assert operator_norm(got - taylor) <= 1e-10


def test_herm_exp_projector_phase():
    proj = GlobalOperator(np.diag([1.0, 0.0]).astype(complex))
    got = herm_exp(proj, 1j * np.pi).matrix
    np.testing.assert_allclose(got, np.diag([-1.0 + 0j, 1.0]), atol=1e-12)


def test_pseudo_inverse_satisfies_moore_penrose():
    rng = np.random.default_rng(19)
    b = rng.normal(size=(8, 5)) + 1j * rng.normal(size=(8, 5))
    a = b @ b.conj().T  # PSD, rank 5
    ap = pseudo_inverse(GlobalOperator(a)).matrix
    np.testing.assert_allclose(a @ ap @ a, a, atol=1e-9)
    np.testing.assert_allclose(ap @ a @ ap, ap, atol=1e-9)
    np.testing.assert_allclose((a @ ap).conj().T, a @ ap, atol=1e-9)


def test_pseudo_inverse_kernel_tol_drops_small_modes():
    a = np.diag([1.0, 1e-13, 0.0]).astype(complex)
    ap = pseudo_inverse(GlobalOperator(a), kernel_tol=1e-10).matrix
    np.testing.assert_allclose(ap, np.diag([1.0, 0.0, 0.0]).astype(complex), atol=1e-12)


def test_operator_norm_and_hermiticity_defect():
    m = np.array([[0.0, 2.0], [0.0, 0.0]], dtype=complex)
    assert operator_norm(m) == pytest.approx(2.0)
    assert hermiticity_defect(m) == pytest.approx(2.0)
    assert hermiticity_defect(m + m.conj().T) <= 1e-15


def test_local_operator_validation():
    with pytest.raises(ValueError):
        LocalOperator(("a",), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        LocalOperator(("a", "b"), np.eye(3))  # 3 is not d**2 for integer d >= 2
    op = LocalOperator(("a", "b"), np.eye(4))
    assert op.local_dim() == 2
    assert op.is_hermitian()


def test_embed_rejects_unknown_vertex():
    lat = build_chain(2, 2)
    with pytest.raises(ValueError):
        embed(LocalOperator(("zz",), np.eye(2)), lat)


def test_matrix_json_round_trip():
    rng = np.random.default_rng(23)
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    back = matrix_from_json(matrix_to_json(m))
    np.testing.assert_array_equal(back, m)
