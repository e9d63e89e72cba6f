"""Direct fermion-to-boson (DMS) mapping for one and two electrons.

An ``N``-electron determinant ``p1 < ... < pN`` becomes the ``N``-mode Fock
state ``|q1, ..., qN>`` with ``qN = p1`` and ``qj = p_{N-j+1} - p_{N-j} - 1``.
Two-mode matrices use the index ``L * q1 + q2`` (first mode most significant).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fermion import FermionOperatorSum, MolecularIntegrals, build_molecular_hamiltonian
from .fockcore import DimensionError, dagger, kron


def fermion_to_boson_state(occupied: Sequence[int], M: int | None = None) -> list[int]:
    p = [int(x) for x in occupied]
    if any(b <= a for a, b in zip(p, p[1:])) or (p and p[0] < 0):
        raise ValueError(f"occupied indices must be strictly increasing and non-negative: {p}")
    if M is not None and p and p[-1] > M - 1:
        raise ValueError(f"orbital {p[-1]} outside 0..{M - 1}")
    N = len(p)
    if N == 0:
        return []
    q = [0] * N
    q[N - 1] = p[0]
    for j in range(1, N):
        # q_j (1-based) = p_{N-j+1} - p_{N-j} - 1
        q[j - 1] = p[N - j] - p[N - j - 1] - 1
    return q


def boson_to_fermion_state(levels: Sequence[int]) -> list[int]:
    q = [int(x) for x in levels]
    if any(x < 0 for x in q):
        raise ValueError(f"Fock levels must be non-negative: {q}")
    N = len(q)
    if N == 0:
        return []
    p = [q[N - 1]]
    for k in range(1, N):
        p.append(p[-1] + q[N - 1 - k] + 1)
    return p


def cutoff_levels(M: int, N: int) -> int:
    """Levels per mode: q_j ranges over 0..M-N."""
    return M - N + 1


def physical_states(M: int, N: int) -> list[tuple[int, ...]]:
    """Fock index tuples of all N-electron determinants, in lexicographic determinant order."""
    return [tuple(fermion_to_boson_state(d)) for d in itertools.combinations(range(M), N)]


def physical_indices(M: int, N: int) -> list[int]:
    L = cutoff_levels(M, N)
    return [int(np.ravel_multi_index(s, (L,) * N)) for s in physical_states(M, N)]


def _ket_bra(L: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((L, L), dtype=complex)
    m[i, j] = 1.0
    return m


def map_bilinear_n1(p: int, q: int, L: int) -> np.ndarray:
    """Image of ``a_p^dag a_q`` for one electron: ``|p><q|`` on a single mode."""
    if not (0 <= p < L and 0 <= q < L):
        raise DimensionError(f"orbital indices ({p}, {q}) outside cutoff {L}")
    return _ket_bra(L, p, q)


def _raise_n2(d: int, q: int, L: int) -> np.ndarray:
    """Image of ``a_{q+d}^dag a_q`` with ``d >= 1`` on two modes of ``L`` levels."""
    out = np.zeros((L * L, L * L), dtype=complex)

    def put(j1, k1, j0, k0, val):
        if max(j1, k1, j0, k0) < L and min(j1, k1, j0, k0) >= 0:
            out[j1 * L + k1, j0 * L + k0] += val

    for j in range(q):  # j + k = q - 1
        put(j + d, q - 1 - j, j, q - 1 - j, 1.0)
    for j in range(L):
        put(j, q + d, j + d, q, 1.0)
    for a in range(d - 1):
        put(d - 2 - a, q + a + 1, a, q, -1.0)
    return out


def _number_n2(p: int, L: int) -> np.ndarray:
    out = kron(np.eye(L), _ket_bra(L, p, p)) if p < L else np.zeros((L * L, L * L), dtype=complex)
    for j in range(p):
        k = p - 1 - j
        if j < L and k < L:
            out[j * L + k, j * L + k] += 1.0
    return out


def map_bilinear_n2(p: int, q: int, L: int) -> np.ndarray:
    """Image of ``a_p^dag a_q`` for two electrons (``L**2``-dimensional).

    ``L`` is the level count per mode, ``M - 1`` for ``M`` spin orbitals, so
    orbital indices run over ``0..L``.
    """
    if not (0 <= p <= L and 0 <= q <= L):
        raise DimensionError(f"orbital indices ({p}, {q}) outside 0..{L}")
    if p == q:
        return _number_n2(p, L)
    if p > q:
        return _raise_n2(p - q, q, L)
    return dagger(_raise_n2(q - p, p, L))


def map_fermion_operator_n2(op: FermionOperatorSum) -> np.ndarray:
    """Termwise image of a particle-conserving operator with at most two-body terms.

    Two-body strings are rewritten through bilinears,
    ``a+p a+q a_r a_s = E^p_s E^q_r - delta_qs E^p_r``.
    """
    M = op.n_modes
    L = cutoff_levels(M, 2)
    dim = L * L
    cache: dict[tuple[int, int], np.ndarray] = {}

    def E(p, q):
        if (p, q) not in cache:
            cache[(p, q)] = map_bilinear_n2(p, q, L)
        return cache[(p, q)]

    phys = np.zeros(dim)
    phys[physical_indices(M, 2)] = 1.0
    out = np.zeros((dim, dim), dtype=complex)
    for coef, cre, ann in op:
        if len(cre) != len(ann):
            raise ValueError("only particle-conserving terms can be mapped")
        if not cre:
            out += coef * np.diag(phys)
        elif len(cre) == 1:
            out += coef * E(cre[0], ann[0])
        elif len(cre) == 2:
            (p, q), (r, s) = cre, ann
            term = E(p, s) @ E(q, r)
            if q == s:
                term = term - E(p, r)
            out += coef * term
        else:
            raise ValueError("terms beyond two-body are not supported")
    return out


@dataclass
class BosonicHamiltonianH2:
    """Two-qutrit Hamiltonian of H2 with ``w[0..4]`` holding w1..w5."""

    w: np.ndarray
    h_nuc: float
    matrix: np.ndarray

    M = 4
    physical = physical_indices(4, 2)

    def physical_block(self) -> np.ndarray:
        idx = self.physical
        return self.matrix[np.ix_(idx, idx)]


def build_h2_bosonic_hamiltonian(integrals: MolecularIntegrals) -> BosonicHamiltonianH2:
    if integrals.n_spatial != 2:
        raise DimensionError(f"H2 bosonic Hamiltonian needs 2 spatial orbitals, got {integrals.n_spatial}")
    h1, h2 = integrals.spin_orbital_tensors()
    w1 = h1[0, 0] + h1[1, 1] + h2[0, 1, 1, 0]
    w2 = 2 * h1[2, 2] + h2[2, 3, 3, 2]
    w3 = h1[0, 0] + h1[2, 2] + h2[0, 2, 2, 0]
    w5 = h2[0, 2, 0, 2]
    w4 = w3 - w5
    L = 3
    H = np.zeros((9, 9), dtype=complex)

    def ix(a, b):
        return a * L + b

    for state, val in (((0, 0), w1), ((0, 2), w2), ((0, 1), w3), ((2, 0), w3), ((1, 0), w4), ((1, 1), w4)):
        H[ix(*state), ix(*state)] = val + integrals.h_nuc
    H[ix(0, 0), ix(0, 2)] = H[ix(0, 2), ix(0, 0)] = w5
    H[ix(2, 0), ix(0, 1)] = H[ix(0, 1), ix(2, 0)] = -w5
    return BosonicHamiltonianH2(np.array([w1, w2, w3, w4, w5]), integrals.h_nuc, H)


def h2_dms_from_fermion(integrals: MolecularIntegrals) -> np.ndarray:
    """Termwise DMS image of the full H2 Hamiltonian (9x9)."""
    return map_fermion_operator_n2(build_molecular_hamiltonian(integrals))


def export_physical_block(ham: BosonicHamiltonianH2) -> dict:
    """JSON-ready payload: row-major ``[re, im]`` pairs over the physical states."""
    block = ham.physical_block()
    states = physical_states(4, 2)
    return {
        "basis": [list(s) for s in states],
        "determinants": [boson_to_fermion_state(s) for s in states],
        "w": [float(x) for x in ham.w],
        "h_nuc": ham.h_nuc,
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in block],
    }
