import numpy as np
import pytest
from scipy.special import factorial

from qumodechem import gates as gt
from qumodechem.fockcore import boson_annihilate, dagger, is_unitary, kron, matexp, number_operator
from conftest import random_unitary

BETAS = [0.3 + 0.1j, -1.2, 0.7j, 0.05 - 0.4j]


def test_rotation_examples():
    assert np.allclose(gt.rotation(0, 1.3), np.eye(2))
    assert np.allclose(gt.rotation(np.pi, 0), -1j * gt.X)
    for th, ph in [(0.3, 1.1), (-2.0, 0.4)]:
        assert np.allclose(gt.rotation(th, ph) @ gt.rotation(-th, ph), np.eye(2), atol=1e-15)
        ref = matexp(-0.5j * th * (np.cos(ph) * gt.X + np.sin(ph) * gt.Y))
        assert np.allclose(gt.rotation(th, ph), ref, atol=1e-14)


def test_rotation_derivatives():
    th, ph, h = 0.7, -1.9, 1e-6
    dth, dph = gt.rotation_derivatives(th, ph)
    assert np.allclose(dth, (gt.rotation(th + h, ph) - gt.rotation(th - h, ph)) / (2 * h), atol=1e-9)
    assert np.allclose(dph, (gt.rotation(th, ph + h) - gt.rotation(th, ph - h)) / (2 * h), atol=1e-9)


def test_displacement_basic():
    assert np.allclose(gt.displacement(0, 6), np.eye(6))
    D = gt.displacement(0.5, 20)
    n = np.arange(6)
    ref = np.exp(-0.125) * 0.5**n / np.sqrt(factorial(n))
    assert np.allclose(D[:6, 0], ref, atol=1e-8)
    for b in [0.9, -0.4 + 0.6j, 1j]:
        assert np.allclose(gt.displacement(b, 32) @ gt.displacement(-b, 32), np.eye(32), atol=1e-8)


def test_displacement_complex_coherent():
    beta = 0.3 - 0.4j
    col = gt.displacement(beta, 40)[:8, 0]
    n = np.arange(8)
    ref = np.exp(-abs(beta) ** 2 / 2) * beta**n / np.sqrt(factorial(n))
    assert np.allclose(col, ref, atol=1e-12)


def test_conditional_displacement():
    L = 10
    for b in BETAS:
        a = boson_annihilate(L)
        A = -1j * (b * dagger(a) - np.conj(b) * a)
        assert np.allclose(gt.conditional_displacement(b, L), matexp(1j * kron(gt.Z, A)), atol=1e-10)
        cd = gt.conditional_displacement(b, L)
        assert not cd[:L, L:].any() and not cd[L:, :L].any()
    assert np.allclose(gt.conditional_displacement(0, L), np.eye(2 * L))


def test_ecd_identity_and_block_form():
    L = 8
    for b in BETAS:
        assert np.max(np.abs(gt.ecd(b, L) - kron(gt.X, np.eye(L)) @ gt.conditional_displacement(b / 2, L))) < 1e-12
        assert np.allclose(gt.ecd(b, L) @ dagger(gt.ecd(b, L)), np.eye(2 * L), atol=1e-10)
    assert np.allclose(gt.ecd(0, L), kron(gt.X, np.eye(L)))
    assert np.allclose(gt.ecd_rotation_block(0, 0, 0.4, L), kron(gt.X, np.eye(L)))
    b, th, ph = 0.4 - 0.2j, 1.1, 0.6
    Dm, Dp = gt.displacement(-b / 2, L), gt.displacement(b / 2, L)
    s, c = np.sin(th / 2), np.cos(th / 2)
    block = np.block([
        [np.exp(1j * (ph - np.pi / 2)) * s * Dm, c * Dm],
        [c * Dp, -np.exp(-1j * (ph - np.pi / 2)) * s * Dp],
    ])
    assert np.allclose(gt.ecd_rotation_block(b, th, ph, L), block, atol=1e-12)


def test_snap(rng):
    assert np.allclose(gt.snap(np.zeros(5)), np.eye(5))
    assert np.allclose(gt.snap([np.pi, 0, 0]), np.diag([-1, 1, 1]))
    S = gt.snap(rng.uniform(-np.pi, np.pi, 16), 16)
    assert is_unitary(S) and np.count_nonzero(S - np.diag(np.diag(S))) == 0
    with pytest.raises(Exception):
        gt.snap([0.0, 1.0], 3)
    th = rng.normal(size=4)
    qf = gt.snap_qubit_form(th, 4)
    assert np.allclose(qf[:4, :4], gt.snap(th)) and np.allclose(qf[4:, 4:], np.eye(4))


def test_beam_splitter():
    L = 4
    assert np.allclose(gt.beam_splitter(0, 0.3, L, L), np.eye(L * L))
    bs = gt.beam_splitter(np.pi, np.pi / 2, L, L)
    v10 = np.zeros(L * L)
    v10[1 * L + 0] = 1
    out = bs @ v10
    assert abs(abs(out[0 * L + 1]) - 1) < 1e-10
    Ntot = kron(number_operator(L), np.eye(L)) + kron(np.eye(L), number_operator(L))
    bs = gt.beam_splitter(0.8, 1.3, L, L)
    assert np.allclose(bs @ Ntot, Ntot @ bs, atol=1e-10)
    assert is_unitary(bs)


def test_beam_splitter_swap_below_cutoff():
    # SWAP up to per-Fock phases on states whose photons fit both modes
    L = 4
    bs = gt.beam_splitter(np.pi, np.pi / 2, L, L)
    for j in range(L):
        for k in range(L - j):
            v = np.zeros(L * L)
            v[j * L + k] = 1
            assert abs(abs((bs @ v)[k * L + j]) - 1) < 1e-10


def test_controlled_embed(rng):
    assert np.allclose(gt.controlled_embed(np.eye(3)), np.eye(6))
    assert np.allclose(gt.controlled_embed(gt.X), gt.CNOT)
    U = random_unitary(rng, 3)
    assert np.allclose(gt.controlled_embed(U) @ gt.controlled_embed(U), gt.controlled_embed(U @ U))


def test_compiled_controlled_ecd(rng):
    L = 8
    circuit, mat = gt.compile_controlled_ecd(0, L)
    assert len(circuit) == 3
    assert np.allclose(mat, gt.controlled_embed(gt.ecd(0, L)))
    assert np.allclose(mat, kron(gt.CNOT, np.eye(L)))
    for b in BETAS[:2] + list(rng.normal(size=20) + 1j * rng.normal(size=20)):
        _, mat = gt.compile_controlled_ecd(b, L)
        assert np.max(np.abs(mat - gt.controlled_embed(gt.ecd(b, L)))) < 1e-12


def test_controlled_snap(rng):
    L = 4
    _, mat = gt.controlled_snap_circuit(np.zeros(L), L)
    assert np.allclose(mat, np.eye(4 * L))
    th = rng.uniform(-np.pi, np.pi, L)
    circuit, mat = gt.controlled_snap_circuit(th, L)
    assert np.max(np.abs(gt.restrict_ancilla_zero(mat, L) - gt.controlled_embed(gt.snap(th)))) < 1e-12
    # ancilla |0> in -> ancilla |0> out
    for _ in range(5):
        psi = rng.normal(size=(2, L)) + 1j * rng.normal(size=(2, L))
        full = np.zeros((2, 2, L), dtype=complex)
        full[:, 0, :] = psi
        out = (mat @ full.reshape(-1)).reshape(2, 2, L)
        assert np.allclose(out[:, 1, :], 0)


def test_circuit_order_convention():
    # three gates with non-commuting matrices: the first listed acts first
    L = 3
    circuit = [
        gt.Gate("rotation", {"theta": 0.4, "phi": 0.2}, (0,)),
        gt.Gate("ecd", {"beta": [0.3, 0.1]}, (0, 1)),
        gt.Gate("displacement", {"beta": [0.2, -0.5]}, (1,)),
    ]
    mat = gt.circuit_matrix(circuit, (2, L))
    ref = kron(np.eye(2), gt.displacement(0.2 - 0.5j, L)) @ gt.ecd(0.3 + 0.1j, L) @ kron(gt.rotation(0.4, 0.2), np.eye(L))
    assert np.allclose(mat, ref, atol=1e-14)
    text = gt.circuit_to_json(circuit, (2, L))
    back, dims = gt.circuit_from_json(text)
    assert dims == [2, L] and np.allclose(gt.circuit_matrix(back, dims), mat)


def test_controlled_gate_kind():
    L = 3
    inner = gt.Gate("displacement", {"beta": [0.2, 0.0]}, (1,))
    g = gt.Gate("controlled", {"gate": inner.to_json()}, (0, 1))
    mat = gt.circuit_matrix([g], (2, L))
    assert np.allclose(mat, gt.controlled_embed(gt.displacement(0.2, L)))


@pytest.mark.parametrize("b", [0.5, 1.0 - 0.5j])
def test_unitarity_with_headroom(b):
    L = int(8 * abs(b) ** 2 + 16)
    assert is_unitary(gt.displacement(b, L), 1e-10)
    assert is_unitary(gt.ecd(b, L), 1e-10)
    assert is_unitary(gt.conditional_displacement(b, L), 1e-10)
