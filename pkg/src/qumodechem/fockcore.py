"""Dense linear algebra over truncated Fock and qubit spaces.

Matrices and state vectors are plain ``numpy`` arrays of ``complex128``.
Bosonic operators are built directly in the ``L``-dimensional truncated
basis ``|0>, ..., |L-1>``; nothing here extends a cutoff on its own.
"""

from __future__ import annotations

from functools import lru_cache, reduce

import numpy as np
import scipy.linalg

UNITARY_TOL = 1e-10
EQUAL_TOL = 1e-12


class DimensionError(ValueError):
    """Invalid or mismatched matrix dimension."""


class NumericalRangeError(ArithmeticError):
    """A computation left the representable floating-point range."""


def _check_cutoff(L: int) -> int:
    if int(L) != L or L < 1:
        raise DimensionError(f"Fock cutoff must be a positive integer, got {L!r}")
    return int(L)


def boson_annihilate(L: int) -> np.ndarray:
    """Annihilation operator with <n-1|a|n> = sqrt(n)."""
    L = _check_cutoff(L)
    return np.diag(np.sqrt(np.arange(1, L, dtype=float)), 1).astype(complex)


def boson_create(L: int) -> np.ndarray:
    return dagger(boson_annihilate(L))


def number_operator(L: int) -> np.ndarray:
    L = _check_cutoff(L)
    return np.diag(np.arange(L, dtype=float)).astype(complex)


def fock_state(n: int, L: int) -> np.ndarray:
    L = _check_cutoff(L)
    if not 0 <= n < L:
        raise DimensionError(f"level {n} outside cutoff {L}")
    v = np.zeros(L, dtype=complex)
    v[n] = 1.0
    return v


def projector(n: int, L: int) -> np.ndarray:
    v = fock_state(n, L)
    return np.outer(v, v.conj())


def dagger(A: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(A)).T


def kron(*mats: np.ndarray) -> np.ndarray:
    """Kronecker product; the first factor is the most significant index."""
    if not mats:
        return np.eye(1, dtype=complex)
    return reduce(np.kron, (np.asarray(m, dtype=complex) for m in mats))


def matexp(A: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximants)."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"matexp needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericalRangeError("matexp input has non-finite entries")
    with np.errstate(over="raise", invalid="raise"):
        try:
            out = scipy.linalg.expm(A)
        except FloatingPointError as exc:
            raise NumericalRangeError(str(exc)) from exc
    if not np.all(np.isfinite(out)):
        raise NumericalRangeError("matrix exponential overflowed")
    return out


def frobenius_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Sum of squared entrywise moduli of ``A - B`` (no square root)."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    d = A - B
    return float(np.sum(d.real**2 + d.imag**2))


def is_unitary(A: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    err = dagger(A) @ A - np.eye(A.shape[0])
    return bool(np.max(np.abs(err)) <= tol)


def is_hermitian(A: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    A = np.asarray(A)
    return A.ndim == 2 and A.shape[0] == A.shape[1] and bool(np.max(np.abs(A - dagger(A)), initial=0.0) <= tol)


def normalized(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return v / np.linalg.norm(v)


# -- exponentials of skew-Hermitian generators with exact derivatives -------


class SkewExp:
    """``exp(K)`` for skew-Hermitian ``K`` via one Hermitian eigensolve.

    Keeps the eigenbasis so Frechet derivatives ``d exp(K)[E]`` come out
    in closed form (Daleckii-Krein), which the optimisers rely on.
    """

    def __init__(self, K: np.ndarray):
        w, V = np.linalg.eigh(-1j * np.asarray(K, dtype=complex))
        w = np.real(w)
        self.w = w
        self.V = V
        self.phases = np.exp(1j * w)
        self.value = (V * self.phases) @ V.conj().T
        dw = w[:, None] - w[None, :]
        near = np.abs(dw) < 1e-12
        safe = np.where(near, 1.0, dw)
        ew = self.phases
        # divided differences of exp(i w); limit is i*exp(i w)*... / i -> exp(i w)
        phi = np.where(near, 0.5 * (ew[:, None] + ew[None, :]),
                       (ew[:, None] - ew[None, :]) / (1j * safe))
        self._phi = phi

    def frechet(self, E: np.ndarray) -> np.ndarray:
        V = self.V
        return V @ (self._phi * (V.conj().T @ E @ V)) @ V.conj().T


@lru_cache(maxsize=None)
def _momentum_like(L: int) -> np.ndarray:
    a = boson_annihilate(L)
    return dagger(a) - a


@lru_cache(maxsize=None)
def real_displacement_basis(L: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenbasis of ``a^dag - a``: returns (w, V) with a^dag - a = V diag(i w) V^dag."""
    G = _momentum_like(L)
    w, V = np.linalg.eigh(-1j * G)
    return np.real(w), V


def real_displacement(alpha: float, L: int) -> np.ndarray:
    """``D(alpha)`` for real ``alpha`` using the cached eigenbasis."""
    w, V = real_displacement_basis(L)
    return (V * np.exp(1j * alpha * w)) @ V.conj().T


def displacement_generator(L: int) -> np.ndarray:
    """``a^dag - a``; ``dD(alpha)/dalpha = (a^dag - a) D(alpha)`` for real alpha."""
    return _momentum_like(L).copy()


def apply_on_axis(op: np.ndarray, psi: np.ndarray, dims: tuple[int, ...], axis: int) -> np.ndarray:
    """Apply a single-subsystem operator to a flattened multipartite vector."""
    t = psi.reshape(dims)
    t = np.tensordot(op, t, axes=([1], [axis]))
    t = np.moveaxis(t, 0, axis)
    return t.reshape(-1)


def embed_operator(op: np.ndarray, targets: tuple[int, ...], dims: tuple[int, ...]) -> np.ndarray:
    """Lift ``op`` acting on subsystems ``targets`` (in that order) to the full space."""
    targets = tuple(targets)
    dims = tuple(dims)
    n = len(dims)
    tdims = tuple(dims[t] for t in targets)
    if op.shape != (int(np.prod(tdims)),) * 2:
        raise DimensionError(f"operator shape {op.shape} does not match targets {targets} of {dims}")
    rest = [i for i in range(n) if i not in targets]
    total = int(np.prod(dims))
    perm = list(targets) + rest
    pdims = [dims[i] for i in perm]
    full = np.kron(op, np.eye(int(np.prod([dims[i] for i in rest])), dtype=complex))
    # full acts on permuted ordering; undo the permutation on both sides
    full = full.reshape(pdims + pdims)
    inv = np.argsort(perm)
    full = full.transpose(list(inv) + [n + i for i in inv])
    return full.reshape(total, total)
