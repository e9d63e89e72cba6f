"""Trial states, Hadamard-test energies and the variational loop.

Trial states are simulated as state vectors. Every ansatz is a list of
parametrised gates applied to the all-zero Fock state; energies and their
gradients come from one forward and one backward sweep (adjoint method).

Parameter layouts (``D`` = depth, ``L`` = cutoff):

* ``SnapDisp`` (one mode): per layer ``[alpha, theta_0 .. theta_{L-1}]``,
  the layer being ``S(theta) D(alpha)``.
* ``EcdRot`` (qubit + one mode): per block ``[Re beta, Im beta, theta, phi]``
  for ``ECD(beta) (R(theta, phi) x I)``; the result is projected on qubit |0>.
* ``MultimodeBsSnap`` (``N`` modes): per layer, for each mode
  ``[alpha_j, theta_j (L_j values)]``, then ``[beta, phi]`` for each pair
  ``j < k`` in ascending order.
* ``DmsEcdTwoMode`` (qubit + two modes): per block ``[Re beta, Im beta,
  theta, phi]``; the ECD acts on the second mode and the qubit is kept.
* ``DmsQutrit`` (two modes): ``[theta]`` for ``exp(-2i theta G)`` on the
  second mode, ``G = -i|0><2| + i|2><0|``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import gates
from .compiler import (
    DEFAULT_THRESHOLD,
    LcuDecomposition,
    LibraryError,
    ParamLibrary,
    SnapChain,
    compile_target,
    decomposition_from_json,
    ecd_chain_unitary,
    lcu_matrix,
    load_library,
    loss_ecd,
    result_to_entry,
    save_library,
    snap_chain_unitary,
)
from .fermion import (
    PauliGroup,
    PauliSum,
    build_molecular_hamiltonian,
    determinant_matrix,
    group_pauli_sum,
    jordan_wigner,
    load_fcidump_file,
    pauli_sum_to_matrix,
    symmetry_operators,
    word_matrix,
)
from .fockcore import (
    DimensionError,
    SkewExp,
    apply_on_axis,
    boson_annihilate,
    dagger,
    displacement_generator,
    kron,
    real_displacement_basis,
)

log = logging.getLogger(__name__)

ANSATZ_KINDS = ("EcdRot", "SnapDisp", "MultimodeBsSnap", "DmsEcdTwoMode", "DmsQutrit")
CHEMICAL_ACCURACY = 1.6e-3
DEFAULT_PENALTY = 10.0
NORM_TOL = 1e-10
DISP_SPAN = 1.0


class DegenerateProjectionError(ArithmeticError):
    pass


class NotNormalizedError(ValueError):
    pass


class TomographyError(ArithmeticError):
    pass


class LibraryMissError(KeyError):
    pass


class FixtureError(FileNotFoundError):
    pass


# ---------------------------------------------------------------------------
# parametrised gates acting on a flattened multipartite vector


def _apply_pair(op: np.ndarray, psi: np.ndarray, dims: tuple[int, ...], j: int, k: int) -> np.ndarray:
    t = np.moveaxis(psi.reshape(dims), (j, k), (0, 1))
    shape = t.shape
    t = (op @ t.reshape(shape[0] * shape[1], -1)).reshape(shape)
    return np.moveaxis(t, (0, 1), (j, k)).reshape(-1)


def _inner(a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.vdot(a, b))


class _Op:
    """One gate; ``grad`` returns ``2 Re <lam| dG/dx |before>`` per parameter."""

    idx: list[int]

    def apply(self, psi):
        raise NotImplementedError

    def apply_adj(self, psi):
        raise NotImplementedError

    def grad(self, lam, before, after) -> np.ndarray:
        raise NotImplementedError


class _SnapOp(_Op):
    def __init__(self, dims, axis, theta, idx):
        self.dims, self.axis, self.idx = dims, axis, idx
        shape = [1] * len(dims)
        shape[axis] = dims[axis]
        self.phase = np.exp(1j * np.asarray(theta)).reshape(shape)

    def apply(self, psi):
        return (psi.reshape(self.dims) * self.phase).reshape(-1)

    def apply_adj(self, psi):
        return (psi.reshape(self.dims) * self.phase.conj()).reshape(-1)

    def grad(self, lam, before, after):
        other = tuple(a for a in range(len(self.dims)) if a != self.axis)
        s = (lam.conj() * after).reshape(self.dims).sum(axis=other)
        return -2.0 * s.imag


class _DispOp(_Op):
    """Real displacement ``D(alpha)`` on one mode."""

    def __init__(self, dims, axis, alpha, idx):
        self.dims, self.axis, self.idx = dims, axis, idx
        L = dims[axis]
        w, V = real_displacement_basis(L)
        self.D = (V * np.exp(1j * alpha * w)) @ V.conj().T
        self.G = displacement_generator(L)

    def apply(self, psi):
        return apply_on_axis(self.D, psi, self.dims, self.axis)

    def apply_adj(self, psi):
        return apply_on_axis(dagger(self.D), psi, self.dims, self.axis)

    def grad(self, lam, before, after):
        return np.array([2.0 * _inner(lam, apply_on_axis(self.G, after, self.dims, self.axis)).real])


@lru_cache(maxsize=None)
def _bs_basis(L1: int, L2: int):
    b1 = kron(boson_annihilate(L1), np.eye(L2))
    b2 = kron(np.eye(L1), boson_annihilate(L2))
    hop = dagger(b1) @ b2
    w, V = np.linalg.eigh(0.5 * (hop + dagger(hop)))
    n1 = np.real(np.diag(dagger(b1) @ b1))
    return w, V, hop, n1


class _BsOp(_Op):
    """``BS(beta, phi) = Phi BS(beta, 0) Phi^dag`` with ``Phi = exp(i phi n_1)``.

    Applied through the cached eigenbasis of the hopping term, so no
    two-mode matrix is formed per call.
    """

    def __init__(self, dims, j, k, beta, phi, idx):
        self.dims, self.j, self.k, self.idx = dims, j, k, idx
        w, V, hop, n1 = _bs_basis(dims[j], dims[k])
        self.V, self.hop, self.n1 = V, hop, n1
        self.ph = np.exp(1j * phi * n1)
        self.ew = np.exp(1j * beta * w)
        self.eiphi = np.exp(1j * phi)

    def _pair(self, fn, psi):
        t = np.moveaxis(psi.reshape(self.dims), (self.j, self.k), (0, 1))
        shape = t.shape
        m = fn(t.reshape(shape[0] * shape[1], -1)).reshape(shape)
        return np.moveaxis(m, (0, 1), (self.j, self.k)).reshape(-1)

    def _B(self, m):
        v = self.V.conj().T @ (self.ph.conj()[:, None] * m)
        return self.ph[:, None] * (self.V @ (self.ew[:, None] * v))

    def _Badj(self, m):
        v = self.V.conj().T @ (self.ph.conj()[:, None] * m)
        return self.ph[:, None] * (self.V @ (self.ew.conj()[:, None] * v))

    def _A(self, m):
        h = self.eiphi * (self.hop @ m)
        return 0.5j * (h + np.conj(self.eiphi) * (self.hop.conj().T @ m))

    def apply(self, psi):
        return self._pair(self._B, psi)

    def apply_adj(self, psi):
        return self._pair(self._Badj, psi)

    def grad(self, lam, before, after):
        n1 = self.n1[:, None]
        d_beta = self._pair(self._A, after)
        d_phi = 1j * (self._pair(lambda m: n1 * m, after) - self._pair(lambda m: self._B(n1 * m), before))
        return np.array([2.0 * _inner(lam, d_beta).real, 2.0 * _inner(lam, d_phi).real])


class _RotOp(_Op):
    def __init__(self, dims, axis, theta, phi, idx):
        self.dims, self.axis, self.idx = dims, axis, idx
        self.R = gates.rotation(theta, phi)
        self.dR = gates.rotation_derivatives(theta, phi)

    def apply(self, psi):
        return apply_on_axis(self.R, psi, self.dims, self.axis)

    def apply_adj(self, psi):
        return apply_on_axis(dagger(self.R), psi, self.dims, self.axis)

    def grad(self, lam, before, after):
        return np.array([2.0 * _inner(lam, apply_on_axis(d, before, self.dims, self.axis)).real for d in self.dR])


class _EcdOp(_Op):
    """``|1><0| x D(beta/2) + |0><1| x D(-beta/2)`` on (qubit axis, mode axis)."""

    def __init__(self, dims, qaxis, maxis, beta, idx):
        self.dims, self.q, self.m, self.idx = dims, qaxis, maxis, idx
        L = dims[maxis]
        a = boson_annihilate(L)
        K = (beta / 2) * dagger(a) - (np.conj(beta) / 2) * a
        se = SkewExp(K)
        self.D = se.value
        self.dD = [se.frechet(0.5 * (dagger(a) - a)), se.frechet(0.5j * (dagger(a) + a))]

    def _act(self, up, down, psi):
        # up: operator taking qubit 0 -> 1; down: qubit 1 -> 0
        t = np.moveaxis(psi.reshape(self.dims), self.q, 0)
        m = self.m - 1 if self.m > self.q else self.m  # mode axis inside one qubit slice
        out = np.empty_like(t)
        out[1] = np.moveaxis(np.tensordot(up, t[0], axes=([1], [m])), 0, m)
        out[0] = np.moveaxis(np.tensordot(down, t[1], axes=([1], [m])), 0, m)
        return np.moveaxis(out, 0, self.q).reshape(-1)

    def apply(self, psi):
        return self._act(self.D, dagger(self.D), psi)

    def apply_adj(self, psi):
        # (s10 x D + s01 x D^dag)^dag = s01 x D^dag + s10 x D
        return self._act(self.D, dagger(self.D), psi)

    def grad(self, lam, before, after):
        return np.array([2.0 * _inner(lam, self._act(d, dagger(d), before)).real for d in self.dD])


class _QutritOp(_Op):
    """``exp(-2i theta G)`` with ``G = -i|0><2| + i|2><0|`` on one mode."""

    def __init__(self, dims, axis, theta, idx):
        self.dims, self.axis, self.idx = dims, axis, idx
        L = dims[axis]
        if L < 3:
            raise DimensionError("the qutrit rotation needs at least three levels")
        c, s = np.cos(2 * theta), np.sin(2 * theta)
        U = np.eye(L, dtype=complex)
        U[0, 0] = U[2, 2] = c
        U[2, 0], U[0, 2] = s, -s
        self.U = U
        G = np.zeros((L, L), dtype=complex)
        G[0, 2], G[2, 0] = -1j, 1j
        self.dU = -2j * G @ U

    def apply(self, psi):
        return apply_on_axis(self.U, psi, self.dims, self.axis)

    def apply_adj(self, psi):
        return apply_on_axis(dagger(self.U), psi, self.dims, self.axis)

    def grad(self, lam, before, after):
        return np.array([2.0 * _inner(lam, apply_on_axis(self.dU, before, self.dims, self.axis)).real])


# ---------------------------------------------------------------------------
# ansatz


@dataclass
class TrialAnsatz:
    kind: str
    depth: int
    cutoffs: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in ANSATZ_KINDS:
            raise ValueError(f"unknown ansatz kind {self.kind!r}")
        self.cutoffs = tuple(int(c) for c in self.cutoffs)
        self.depth = int(self.depth)
        if self.depth < 0 or any(c < 1 for c in self.cutoffs):
            raise DimensionError("depth must be >= 0 and cutoffs positive")
        n_modes = {"EcdRot": 1, "SnapDisp": 1, "DmsEcdTwoMode": 2, "DmsQutrit": 2}.get(self.kind)
        if n_modes is not None and len(self.cutoffs) != n_modes:
            raise DimensionError(f"{self.kind} needs {n_modes} cutoff(s), got {self.cutoffs}")

    @property
    def has_qubit(self) -> bool:
        return self.kind in ("EcdRot", "DmsEcdTwoMode")

    @property
    def projected(self) -> bool:
        return self.kind == "EcdRot"

    @property
    def sim_dims(self) -> tuple[int, ...]:
        return ((2,) if self.has_qubit else ()) + self.cutoffs

    @property
    def output_dim(self) -> int:
        """Length of the state returned by :meth:`prepare`."""
        d = int(np.prod(self.cutoffs))
        return d * 2 if self.kind == "DmsEcdTwoMode" else d

    @property
    def n_params(self) -> int:
        D, c = self.depth, self.cutoffs
        if self.kind == "SnapDisp":
            return D * (c[0] + 1)
        if self.kind in ("EcdRot", "DmsEcdTwoMode"):
            return 4 * D
        if self.kind == "MultimodeBsSnap":
            n = len(c)
            return D * (sum(L + 1 for L in c) + n * (n - 1))
        return 1

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.n_params:
            raise DimensionError(f"{self.kind} expects {self.n_params} parameters, got {x.shape[0]}")
        return x

    def ops(self, x) -> list[_Op]:
        x = self._check(x)
        dims = self.sim_dims
        out: list[_Op] = []
        k = 0
        if self.kind == "SnapDisp":
            L = self.cutoffs[0]
            for _ in range(self.depth):
                out.append(_DispOp(dims, 0, x[k], [k]))
                out.append(_SnapOp(dims, 0, x[k + 1:k + 1 + L], list(range(k + 1, k + 1 + L))))
                k += L + 1
        elif self.kind in ("EcdRot", "DmsEcdTwoMode"):
            mode_axis = len(dims) - 1
            for _ in range(self.depth):
                out.append(_RotOp(dims, 0, x[k + 2], x[k + 3], [k + 2, k + 3]))
                out.append(_EcdOp(dims, 0, mode_axis, complex(x[k], x[k + 1]), [k, k + 1]))
                k += 4
        elif self.kind == "MultimodeBsSnap":
            n = len(self.cutoffs)
            for _ in range(self.depth):
                for j, L in enumerate(self.cutoffs):
                    out.append(_DispOp(dims, j, x[k], [k]))
                    out.append(_SnapOp(dims, j, x[k + 1:k + 1 + L], list(range(k + 1, k + 1 + L))))
                    k += L + 1
                for j in range(n):
                    for m in range(j + 1, n):
                        out.append(_BsOp(dims, j, m, x[k], x[k + 1], [k, k + 1]))
                        k += 2
        else:
            out.append(_QutritOp(dims, 1, x[0], [0]))
        return out

    def initial_state(self) -> np.ndarray:
        psi = np.zeros(int(np.prod(self.sim_dims)), dtype=complex)
        psi[0] = 1.0
        return psi

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        """Phases and angles uniform on [-pi, pi]; displacement amplitudes on [-1, 1].

        All-zero SNAP phases are avoided: with real displacements the state
        stays real, and for a real Hamiltonian every phase gradient vanishes.
        """
        x = np.zeros(self.n_params)
        D, c = self.depth, self.cutoffs
        if self.kind == "SnapDisp":
            layers = x.reshape(D, c[0] + 1)
            layers[:, 0] = rng.uniform(-DISP_SPAN, DISP_SPAN, D)
            layers[:, 1:] = rng.uniform(-np.pi, np.pi, (D, c[0]))
        elif self.kind in ("EcdRot", "DmsEcdTwoMode"):
            b = x.reshape(D, 4)
            b[:, :2] = rng.uniform(-DISP_SPAN, DISP_SPAN, (D, 2))
            b[:, 2:] = rng.uniform(-np.pi, np.pi, (D, 2))
        elif self.kind == "MultimodeBsSnap":
            n = len(c)
            k = 0
            for _ in range(D):
                for L in c:
                    x[k] = rng.uniform(-DISP_SPAN, DISP_SPAN)
                    x[k + 1:k + 1 + L] = rng.uniform(-np.pi, np.pi, L)
                    k += L + 1
                for _ in range(n * (n - 1) // 2):
                    x[k] = rng.uniform(-DISP_SPAN, DISP_SPAN)
                    x[k + 1] = rng.uniform(-np.pi, np.pi)
                    k += 2
        else:
            x[0] = rng.uniform(-np.pi / 4, np.pi / 4)
        return x

    def forward(self, x) -> tuple[list[_Op], list[np.ndarray]]:
        ops = self.ops(x)
        states = [self.initial_state()]
        for op in ops:
            states.append(op.apply(states[-1]))
        return ops, states

    def _output(self, final: np.ndarray) -> tuple[np.ndarray, float]:
        if not self.projected:
            return final, 1.0
        L = self.cutoffs[0]
        phi = final[:L]
        n2 = float(np.vdot(phi, phi).real)
        if n2 < 1e-24:
            raise DegenerateProjectionError(f"qubit-|0> projection has norm {np.sqrt(n2):.2e}")
        return phi / np.sqrt(n2), n2

    def prepare(self, x) -> np.ndarray:
        _, states = self.forward(x)
        return self._output(states[-1])[0]

    def expectation_and_grad(self, x, H: np.ndarray) -> tuple[float, np.ndarray]:
        """``<psi|H|psi>`` for Hermitian ``H`` on the output space, and its gradient."""
        ops, states = self.forward(x)
        psi, n2 = self._output(states[-1])
        Hpsi = H @ psi
        e = float(np.vdot(psi, Hpsi).real)
        if self.projected:
            lam = np.zeros_like(states[-1])
            lam[: psi.shape[0]] = (Hpsi - e * psi) / np.sqrt(n2)
        else:
            lam = Hpsi
        g = np.zeros(self.n_params)
        for op, before, after in zip(reversed(ops), reversed(states[:-1]), reversed(states[1:])):
            g[op.idx] += op.grad(lam, before, after)
            lam = op.apply_adj(lam)
        return e, g


def prepare_trial_state(ansatz: TrialAnsatz, params) -> np.ndarray:
    return ansatz.prepare(params)


# ---------------------------------------------------------------------------
# Hadamard test


def hadamard_expectation(
    state: np.ndarray,
    U: np.ndarray,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """``Re <psi|U|psi>`` from the ancilla statistics of a Hadamard test.

    The ancilla branch amplitudes after ``H . controlled-U . H`` are
    ``(psi +- U psi)/2``; ``p0 - p1`` is returned exactly, or estimated from
    ``shots`` binomial samples.
    """
    psi = np.asarray(state, dtype=complex).reshape(-1)
    U = np.asarray(U, dtype=complex)
    if U.shape != (psi.shape[0], psi.shape[0]):
        raise DimensionError(f"unitary {U.shape} does not act on a state of length {psi.shape[0]}")
    if abs(np.vdot(psi, psi).real - 1.0) > NORM_TOL:
        raise NotNormalizedError("Hadamard test needs a normalised state")
    u_psi = U @ psi
    p0 = float(np.vdot(psi + u_psi, psi + u_psi).real) / 4
    p1 = float(np.vdot(psi - u_psi, psi - u_psi).real) / 4
    if shots is None:
        return p0 - p1
    if shots <= 0:
        raise ValueError("shots must be positive")
    rng = rng or np.random.default_rng()
    p0 = min(max(p0 / (p0 + p1), 0.0), 1.0)
    k = rng.binomial(shots, p0)
    return (2 * k - shots) / shots


# ---------------------------------------------------------------------------
# mapped Hamiltonians


def _herm(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + dagger(A))


@dataclass
class MappedTerm:
    """``coefficient * O`` with ``O`` represented per ``MappedHamiltonian.method``.

    * ``ecd_lcu``: ``decomposition`` is an :class:`LcuDecomposition`;
    * ``snap``: a list of per-qumode :class:`SnapChain` factors;
    * ``pauli``: a list of per-qumode Pauli sub-words (exact reference).
    """

    coefficient: float
    label: str
    decomposition: object
    losses: list[float] = field(default_factory=list)


@dataclass
class MappedHamiltonian:
    method: str
    constant: float
    terms: list[MappedTerm]
    partition: tuple[int, ...]

    def __post_init__(self):
        self.partition = tuple(int(p) for p in self.partition)
        if self.method not in ("ecd_lcu", "snap", "pauli"):
            raise ValueError(f"unknown mapping method {self.method!r}")
        if any(p < 1 or p > 4 for p in self.partition):
            raise DimensionError("partition entries must be between 1 and 4 qubits")
        if self.method == "ecd_lcu" and len(self.partition) != 1:
            raise DimensionError("ECD-LCU mapping is single-qumode")
        for t in self.terms:
            if self.method == "ecd_lcu":
                if t.decomposition.L != self.cutoffs[0]:
                    raise DimensionError(f"term {t.label}: cutoff {t.decomposition.L} != {self.cutoffs[0]}")
            else:
                dims = [f.L if isinstance(f, SnapChain) else 1 << len(f) for f in t.decomposition]
                if tuple(dims) != self.cutoffs:
                    raise DimensionError(f"term {t.label}: factor dims {dims} != {self.cutoffs}")
        self._cache: dict = {}

    @property
    def cutoffs(self) -> tuple[int, ...]:
        return tuple(1 << p for p in self.partition)

    @property
    def dim(self) -> int:
        return int(np.prod(self.cutoffs))

    def _factor(self, f) -> np.ndarray:
        key = ("f", json.dumps(f.theta.tolist()) + json.dumps(f.alpha.tolist())) if isinstance(f, SnapChain) else ("w", f)
        if key not in self._cache:
            self._cache[key] = snap_chain_unitary(f) if isinstance(f, SnapChain) else word_matrix(f)
        return self._cache[key]

    def term_unitaries(self, t: MappedTerm) -> list[tuple[float, np.ndarray]]:
        """``(weight, U)`` pairs; ECD unitaries act on ``qubit x mode``."""
        if self.method == "ecd_lcu":
            return [(float(lam), ecd_chain_unitary(c)) for lam, c in zip(t.decomposition.lam, t.decomposition.chains)]
        return [(1.0, kron(*[self._factor(f) for f in t.decomposition]))]

    def term_operator(self, t: MappedTerm) -> np.ndarray:
        """The (generally non-Hermitian) operator standing in for the term's Pauli content."""
        if self.method == "ecd_lcu":
            L = t.decomposition.L
            return lcu_matrix(t.decomposition)[:L, :L]
        return self.term_unitaries(t)[0][1]

    def effective_matrix(self) -> np.ndarray:
        """Hermitian ``H_eff`` with ``<psi|H_eff|psi>`` equal to the assembled energy."""
        if "eff" not in self._cache:
            H = self.constant * np.eye(self.dim, dtype=complex)
            for t in self.terms:
                H += t.coefficient * _herm(self.term_operator(t))
            self._cache["eff"] = H
        return self._cache["eff"]

    def error_bound(self) -> float:
        """Upper bound on ``|E_mapped - E_exact|`` for any normalised state."""
        total = 0.0
        for t in self.terms:
            if self.method == "ecd_lcu":
                L = t.decomposition.L
                total += abs(t.coefficient) * np.sum(np.abs(t.decomposition.lam)) * np.sqrt(L**2 * max(t.losses[0], 0.0))
            elif self.method == "snap":
                total += abs(t.coefficient) * sum(np.sqrt(L**2 * max(f, 0.0)) for L, f in zip(self.cutoffs, t.losses))
        return float(total)


def assemble_energy(
    state: np.ndarray,
    mapped: MappedHamiltonian,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[float, list[list[float]]]:
    """Energy as ``constant + sum_mu g_mu sum_j lam_j M_{mu,j}`` with Hadamard-test ``M``."""
    psi = np.asarray(state, dtype=complex).reshape(-1)
    if psi.shape[0] != mapped.dim:
        raise DimensionError(f"state of length {psi.shape[0]} does not match mapped dimension {mapped.dim}")
    if mapped.method == "ecd_lcu":
        psi = np.concatenate([psi, np.zeros_like(psi)])  # ancilla qubit in |0>
    energy = mapped.constant
    values = []
    for t in mapped.terms:
        row = []
        acc = 0.0
        for lam, U in mapped.term_unitaries(t):
            m = hadamard_expectation(psi, U, shots, rng)
            row.append(m)
            acc += lam * m
        values.append(row)
        energy += t.coefficient * acc
    return float(energy), values


@dataclass
class DenseHamiltonian:
    """A Hamiltonian given directly as a Hermitian matrix (e.g. the DMS image)."""

    matrix: np.ndarray
    label: str = "dense"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def effective_matrix(self) -> np.ndarray:
        return _herm(np.asarray(self.matrix, dtype=complex))


def _lift(H: np.ndarray, dim: int) -> np.ndarray:
    """Extend ``H`` by identity on leading ancilla factors to act on ``dim``."""
    if dim == H.shape[0]:
        return H
    if dim % H.shape[0]:
        raise DimensionError(f"state length {dim} is incompatible with operator size {H.shape[0]}")
    return kron(np.eye(dim // H.shape[0]), H)


def hamiltonian_energy(state: np.ndarray, ham) -> tuple[float, list[list[float]]]:
    """Energy of ``state`` for a mapped or dense Hamiltonian."""
    if isinstance(ham, MappedHamiltonian):
        return assemble_energy(state, ham)
    psi = np.asarray(state, dtype=complex).reshape(-1)
    H = _lift(ham.effective_matrix(), psi.shape[0])
    return float(np.vdot(psi, H @ psi).real), []


# ---------------------------------------------------------------------------
# constraints


@dataclass
class Constraint:
    """``weight * (<A> - target)^2`` with ``A`` the mapped N or S^2 operator."""

    kind: str
    value: float
    weight: float = DEFAULT_PENALTY
    operator: MappedHamiltonian | DenseHamiltonian | None = None

    @property
    def target(self) -> float:
        if self.kind == "number":
            return float(self.value)
        if self.kind == "spin":
            return float(self.value * (self.value + 1))
        raise ValueError(f"unknown constraint kind {self.kind!r}")


def symmetry_hamiltonian(kind: str, n_qubits: int, like: MappedHamiltonian | None = None, **map_kw):
    """Map N or S^2 through the same pipeline as ``like`` (exact Pauli form when ``like`` is None)."""
    n_op, s2 = symmetry_operators(n_qubits)
    op = n_op if kind == "number" else s2
    if like is None:
        return partition_hamiltonian(op, [n_qubits], method="pauli")
    if like.method == "ecd_lcu":
        return map_grouped_ecd(op, **map_kw)
    return partition_hamiltonian(op, like.partition, method=like.method, **map_kw)


def constrained_cost(state: np.ndarray, mapped, constraint: Constraint) -> float:
    e, _ = hamiltonian_energy(state, mapped)
    if constraint.weight == 0:
        return e
    if constraint.operator is None:
        raise LibraryMissError(f"no mapped operator for the {constraint.kind} constraint")
    a, _ = hamiltonian_energy(state, constraint.operator)
    return e + constraint.weight * (a - constraint.target) ** 2


# ---------------------------------------------------------------------------
# VQE


@dataclass
class VqeResult:
    energy: float
    params: np.ndarray
    trace: list[tuple[int, float]]
    term_values: list[list[float]]
    converged: bool
    cost: float = float("nan")
    restarts_used: int = 0
    restart_costs: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "energy": self.energy,
                "cost": self.cost,
                "converged": self.converged,
                "params": [float(v) for v in self.params],
                "trace": [[int(i), float(e)] for i, e in self.trace],
                "term_values": self.term_values,
                "restart_costs": self.restart_costs,
            },
            sort_keys=True,
        )


def _cost_function(ansatz: TrialAnsatz, ham, constraint: Constraint | None) -> Callable:
    H = _lift(ham.effective_matrix(), ansatz.output_dim)
    A = None
    if constraint is not None and constraint.weight != 0:
        if constraint.operator is None:
            raise LibraryMissError(f"no mapped operator for the {constraint.kind} constraint")
        A = _lift(constraint.operator.effective_matrix(), ansatz.output_dim)

    def fun(x):
        if A is None:
            return ansatz.expectation_and_grad(x, H)
        psi = ansatz.prepare(x)
        a = float(np.vdot(psi, A @ psi).real)
        shift = a - constraint.target
        # gradient of <H> + w (<A> - t)^2 is that of <H + 2 w (<A> - t) A>
        c, g = ansatz.expectation_and_grad(x, H + 2 * constraint.weight * shift * A)
        e = c - 2 * constraint.weight * shift * a
        return e + constraint.weight * shift**2, g

    return fun


def run_vqe(
    mapped,
    ansatz: TrialAnsatz,
    restarts: int = 5,
    max_iter: int = 2000,
    seed: int = 0,
    constraint: Constraint | None = None,
    starts: Sequence[np.ndarray] = (),
    gtol: float = 1e-8,
) -> VqeResult:
    """Best-of-restarts BFGS on the (optionally penalised) energy.

    Restart ``r`` draws its start from ``default_rng([seed, r])``; any
    explicit ``starts`` are tried first. Ties go to the earliest start.
    """
    fun = _cost_function(ansatz, mapped, constraint)
    candidates = [np.asarray(s, dtype=float) for s in starts]
    candidates += [ansatz.random_start(np.random.default_rng([seed, r])) for r in range(restarts)]
    best = None
    costs = []
    for x0 in candidates:
        trace: list[tuple[int, float]] = []
        try:
            f0, _ = fun(x0)
        except (DegenerateProjectionError, FloatingPointError):
            costs.append(float("nan"))
            continue
        trace.append((0, f0))
        if ansatz.n_params == 0:
            x, f, ok = x0, f0, True
        else:
            last = {}

            def wrapped(x):
                v, g = fun(x)
                last["f"] = v
                return v, g

            def cb(_xk):
                trace.append((len(trace), last["f"]))

            try:
                res = minimize(wrapped, x0, jac=True, method="BFGS", callback=cb,
                               options={"maxiter": max_iter, "gtol": gtol})
            except DegenerateProjectionError:
                costs.append(float("nan"))
                continue
            x, f = res.x, float(res.fun)
            ok = bool(res.success) or res.status == 2  # precision loss at a minimum is fine
        costs.append(f)
        if np.isfinite(f) and (best is None or f < best[1]):
            best = (x, f, trace, ok)
    if best is None:
        return VqeResult(float("nan"), np.full(ansatz.n_params, np.nan), [], [], False, float("nan"), len(candidates), costs)
    x, f, trace, ok = best
    psi = ansatz.prepare(x)
    energy, values = hamiltonian_energy(psi, mapped)
    return VqeResult(energy, x, trace, values, ok, f, len(candidates), costs)


# ---------------------------------------------------------------------------
# mapping pipelines


def split_word(word: str, partition: Sequence[int]) -> list[str]:
    out, k = [], 0
    for n in partition:
        out.append(word[k:k + n])
        k += n
    return out


def partition_hamiltonian(
    psum: PauliSum,
    partition: Sequence[int],
    library: ParamLibrary | None = None,
    method: str = "snap",
    compile_missing: bool = True,
    compile_kw: dict | None = None,
) -> MappedHamiltonian:
    """Split every word into per-qumode sub-words and attach their compiled chains.

    ``method="pauli"`` keeps exact Pauli factors (no library needed).
    Missing library words are compiled on demand and added to ``library``.
    """
    partition = tuple(int(p) for p in partition)
    if sum(partition) != psum.n_qubits:
        raise DimensionError(f"partition {partition} does not cover {psum.n_qubits} qubits")
    if method == "snap" and library is None:
        raise LibraryMissError("SNAP mapping needs a parameter library")
    constant = 0.0
    terms = []
    for word, c in psum.simplify().items_sorted():
        c = complex(c)
        if abs(c.imag) > 1e-12:
            raise ValueError(f"complex coefficient on {word}")
        if set(word) == {"I"}:
            constant += c.real
            continue
        subs = split_word(word, partition)
        if method == "pauli":
            terms.append(MappedTerm(c.real, word, subs, [0.0] * len(subs)))
            continue
        factors, losses = [], []
        for s in subs:
            if s not in library:
                if not compile_missing:
                    raise LibraryMissError(s)
                kw = dict(compile_kw or {})
                res = compile_target(word_matrix(s), "snap", library.depth, threshold=library.threshold, **kw)
                library.add(s, res)
            factors.append(library.decomposition(s))
            losses.append(0.0 if set(s) == {"I"} else float(library.entries[s]["loss"]))
        terms.append(MappedTerm(c.real, word, factors, losses))
    return MappedHamiltonian(method, constant, terms, partition)


def group_key(group: PauliGroup) -> str:
    return "".join(("+" if s > 0 else "-") + w for s, w in group.members)


def group_target(group: PauliGroup) -> np.ndarray:
    return sum(s * word_matrix(w) for s, w in group.members)


@dataclass
class GroupCache:
    """Compiled ECD-LCU decompositions keyed by grouped operator (see :func:`group_key`)."""

    depth: int = 10
    n_terms: int = 15
    threshold: float = DEFAULT_THRESHOLD
    entries: dict[str, dict] = field(default_factory=dict)
    path: Path | None = None
    _verified: set = field(default_factory=set, repr=False)

    @classmethod
    def load(cls, path: str | Path) -> "GroupCache":
        path = Path(path)
        if not path.exists():
            return cls(path=path)
        raw = json.loads(path.read_text())
        m = raw["metadata"]
        return cls(m["N_d"], m["N_t"], m["threshold"], raw["entries"], path)

    def save(self, path: str | Path | None = None) -> None:
        path = Path(path or self.path)
        meta = {"method": "ecd_lcu", "N_d": self.depth, "N_t": self.n_terms, "threshold": self.threshold}
        path.write_text(json.dumps({"metadata": meta, "entries": self.entries}, sort_keys=True, indent=1))

    def get(self, group: PauliGroup, compile_missing: bool = True, **compile_kw) -> tuple[LcuDecomposition, float]:
        key = group_key(group)
        if key not in self.entries:
            if not compile_missing:
                raise LibraryMissError(key)
            res = compile_target(group_target(group), "ecd_lcu", self.depth, self.n_terms,
                                 threshold=self.threshold, **compile_kw)
            self.entries[key] = result_to_entry(res)
            if self.path is not None:
                self.save()
        e = self.entries[key]
        dec = decomposition_from_json(e["params"], e["L"])
        if key not in self._verified:
            loss = loss_ecd(dec, group_target(group))
            if abs(loss - e["loss"]) > 1e-12:
                raise LibraryError(f"stored loss for {key} does not match recomputation ({loss:.3e})")
            self._verified.add(key)
        return dec, float(e["loss"])


def map_grouped_ecd(psum: PauliSum, cache: GroupCache | None = None, compile_missing: bool = True,
                    compile_kw: dict | None = None) -> MappedHamiltonian:
    """Group equal-magnitude words and attach one ECD-LCU decomposition per group."""
    cache = cache or GroupCache()
    groups = group_pauli_sum(psum)
    constant = 0.0
    terms = []
    for g in groups:
        if all(set(w) == {"I"} for w in g.words()):
            constant += g.coefficient * sum(s for s, _ in g.members)
            continue
        dec, loss = cache.get(g, compile_missing, **(compile_kw or {}))
        terms.append(MappedTerm(g.coefficient, group_key(g), dec, [loss]))
    return MappedHamiltonian("ecd_lcu", constant, terms, (psum.n_qubits,))


# ---------------------------------------------------------------------------
# fixtures and PES scans


def default_data_dir() -> Path:
    env = os.environ.get("QUMODECHEM_DATA")
    return Path(env) if env else Path(__file__).resolve().parents[2] / "data"


def fixture_path(molecule: str, R: float, data_dir: str | Path | None = None) -> Path:
    path = Path(data_dir or default_data_dir()) / f"{molecule}_{R:.4f}.fcidump"
    if not path.exists():
        raise FixtureError(f"missing integral fixture {path}")
    return path


def qubit_hamiltonian(molecule: str, R: float, data_dir=None):
    ints = load_fcidump_file(fixture_path(molecule, R, data_dir))
    H = build_molecular_hamiltonian(ints)
    return ints, H, jordan_wigner(H).simplify()


def fci_energy(molecule: str, R: float, data_dir=None) -> float:
    ints, H, _ = qubit_hamiltonian(molecule, R, data_dir)
    det, _ = determinant_matrix(H, ints.n_electrons)
    return float(np.linalg.eigvalsh(det)[0])


@dataclass
class PipelineConfig:
    """Options for :func:`pes_scan`.

    ``mapping`` is ``snap``, ``ecd_lcu``, ``pauli`` (exact words) or ``dms``
    (H2 only, two qutrits). ``cutoffs`` defaults to the mapping's native
    cutoffs.
    """

    molecule: str = "h2"
    mapping: str = "snap"
    ansatz: str = "SnapDisp"
    depth: int = 4
    partition: tuple[int, ...] | None = None
    restarts: int = 5
    max_iter: int = 2000
    seed: int = 0
    data_dir: str | None = None
    library: str | None = None
    group_cache: str | None = None
    compile_missing: bool = True
    compile_restarts: int = 10
    constraint: str | None = None
    constraint_weight: float = DEFAULT_PENALTY
    reuse_previous: bool = True

    def resolved_partition(self) -> tuple[int, ...]:
        if self.partition:
            return tuple(self.partition)
        return (4,) if self.molecule == "h2" else (4, 4)

    def library_path(self) -> Path:
        return Path(self.library) if self.library else Path(self.data_dir or default_data_dir()) / "snap_library.json"

    def group_cache_path(self) -> Path:
        return Path(self.group_cache) if self.group_cache else Path(self.data_dir or default_data_dir()) / "ecd_groups.json"


@dataclass
class PesRow:
    R: float
    e_vqe: float
    e_fci: float
    abs_error: float
    e_exact: float = float("nan")
    result: VqeResult | None = None


PES_HEADER = ["R_angstrom", "E_vqe_hartree", "E_fci_hartree", "abs_error_hartree"]


def pes_to_csv(rows: Sequence[PesRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PES_HEADER)
    for r in rows:
        w.writerow([f"{r.R:.4f}", f"{r.e_vqe:.12f}", f"{r.e_fci:.12f}", f"{r.abs_error:.3e}"])
    return buf.getvalue()


class Pipeline:
    """Loads libraries once and maps/solves one geometry at a time."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self._library: ParamLibrary | None = None
        self._groups: GroupCache | None = None
        self._previous: np.ndarray | None = None

    @property
    def library(self) -> ParamLibrary:
        if self._library is None:
            path = self.config.library_path()
            self._library = load_library(path, verify_sample=4) if path.exists() else ParamLibrary("snap", 16, DEFAULT_THRESHOLD)
        return self._library

    @property
    def groups(self) -> GroupCache:
        if self._groups is None:
            self._groups = GroupCache.load(self.config.group_cache_path())
        return self._groups

    def ansatz(self, ham) -> TrialAnsatz:
        c = self.config
        if c.mapping == "dms":
            return TrialAnsatz(c.ansatz, c.depth, (3, 3))
        return TrialAnsatz(c.ansatz, c.depth, ham.cutoffs)

    def hamiltonian(self, R: float):
        c = self.config
        ints, H, psum = qubit_hamiltonian(c.molecule, R, c.data_dir)
        ckw = {"restarts": c.compile_restarts, "seed": c.seed}
        if c.mapping == "dms":
            from .dmsmap import build_h2_bosonic_hamiltonian

            return ints, psum, DenseHamiltonian(build_h2_bosonic_hamiltonian(ints).matrix, "dms")
        if c.mapping == "ecd_lcu":
            return ints, psum, map_grouped_ecd(psum, self.groups, c.compile_missing, ckw)
        if c.mapping == "pauli":
            return ints, psum, partition_hamiltonian(psum, c.resolved_partition(), method="pauli")
        if c.mapping == "snap":
            n_before = len(self.library.entries)
            mapped = partition_hamiltonian(psum, c.resolved_partition(), self.library, "snap", c.compile_missing, ckw)
            if len(self.library.entries) != n_before:
                save_library(self.library, c.library_path())
            return ints, psum, mapped
        raise ValueError(f"unknown mapping {c.mapping!r}")

    def constraint_for(self, ham, n_qubits: int, ints) -> Constraint | None:
        c = self.config
        if not c.constraint:
            return None
        if c.mapping == "ecd_lcu":
            op = symmetry_hamiltonian(c.constraint, n_qubits, ham, cache=self.groups)
        elif c.mapping == "snap":
            op = symmetry_hamiltonian(c.constraint, n_qubits, ham, library=self.library)
        else:
            op = symmetry_hamiltonian(c.constraint, n_qubits)
        value = ints.n_electrons if c.constraint == "number" else ints.ms2 / 2
        return Constraint(c.constraint, value, c.constraint_weight, op)

    def solve(self, R: float) -> PesRow:
        c = self.config
        ints, psum, ham = self.hamiltonian(R)
        ansatz = self.ansatz(ham)
        constraint = self.constraint_for(ham, psum.n_qubits, ints) if c.mapping != "dms" else None
        starts = [self._previous] if (c.reuse_previous and self._previous is not None) else []
        res = run_vqe(ham, ansatz, c.restarts, c.max_iter, c.seed, constraint, starts)
        if c.reuse_previous and np.all(np.isfinite(res.params)):
            self._previous = res.params
        e_fci = fci_energy(c.molecule, R, c.data_dir)
        e_exact = float("nan")
        if c.mapping != "dms" and np.all(np.isfinite(res.params)):
            psi = ansatz.prepare(res.params)
            H = pauli_sum_to_matrix(psum)
            e_exact = float(np.vdot(psi, _lift(H, psi.shape[0]) @ psi).real)
        return PesRow(R, res.energy, e_fci, abs(res.energy - e_fci), e_exact, res)


def pes_scan(geometries: Sequence[float], config: PipelineConfig, progress=None) -> list[PesRow]:
    pipe = Pipeline(config)
    rows = []
    for R in geometries:
        row = pipe.solve(float(R))
        rows.append(row)
        if progress:
            progress(row)
    return rows


def h4_block_words(R: float = 1.0, data_dir=None) -> list[str]:
    """Distinct non-identity 4-qubit blocks of the H4 Hamiltonian on the (4, 4) partition."""
    _, _, psum = qubit_hamiltonian("h4", R, data_dir)
    blocks = {b for w in psum.terms for b in split_word(w, (4, 4))}
    blocks.discard("IIII")
    return sorted(blocks)


# ---------------------------------------------------------------------------
# subspace tomography


def _displacement_coefficients(alpha: float, L: int, pad: int) -> np.ndarray:
    """``c[n, p] = <p|D(alpha)|n>`` on a cutoff enlarged by ``pad`` levels (real for real alpha)."""
    w, V = real_displacement_basis(L + pad)
    D = (V * np.exp(1j * alpha * w)) @ V.conj().T
    return D.T


def tomography_transfer_expectation(
    state: np.ndarray,
    j: Sequence[int],
    k: Sequence[int],
    alpha: float,
    p: Sequence[int],
    cutoffs: Sequence[int] | None = None,
    pad: int = 24,
) -> float:
    """``<psi|(|j><k| + h.c.)|psi>`` reconstructed from a displaced, projected subspace.

    The subspace density matrix on ``{|j>, |k>}`` is displaced by
    ``D(alpha)`` on every mode and the population of ``|p>`` is read out;
    photon counting supplies ``|<j|psi>|^2`` and ``|<k|psi>|^2``.
    """
    j, k, p = (tuple(int(v) for v in t) for t in (j, k, p))
    psi = np.asarray(state, dtype=complex).reshape(-1)
    cutoffs = tuple(cutoffs) if cutoffs is not None else (psi.shape[0],)
    if not (len(j) == len(k) == len(p) == len(cutoffs)) or int(np.prod(cutoffs)) != psi.shape[0]:
        raise DimensionError("index vectors, cutoffs and state length disagree")
    for idx in (j, k):
        if any(not 0 <= v < L for v, L in zip(idx, cutoffs)):
            raise DimensionError(f"Fock index {idx} outside cutoffs {cutoffs}")
    cj = psi[np.ravel_multi_index(j, cutoffs)]
    ck = psi[np.ravel_multi_index(k, cutoffs)]
    pj, pk = abs(cj) ** 2, abs(ck) ** 2
    if j == k:
        return 2.0 * pj
    big = tuple(L + pad for L in cutoffs)
    if any(not 0 <= v < L for v, L in zip(p, big)):
        raise DimensionError(f"projection index {p} outside simulated cutoffs {big}")
    coeffs = [_displacement_coefficients(alpha, L, pad) for L in cutoffs]
    # subspace density matrix on the enlarged space
    sub = np.zeros(int(np.prod(big)), dtype=complex)
    sub[np.ravel_multi_index(j, big)] = cj
    sub[np.ravel_multi_index(k, big)] = ck
    displaced = sub
    for axis, c in enumerate(coeffs):
        displaced = apply_on_axis(c.T, displaced, big, axis)
    r2 = abs(displaced[np.ravel_multi_index(p, big)]) ** 2
    prod_j = np.prod([c[a, b].real for c, a, b in zip(coeffs, j, p)])
    prod_k = np.prod([c[a, b].real for c, a, b in zip(coeffs, k, p)])
    if abs(prod_j * prod_k) < 1e-12:
        raise TomographyError("displacement coefficient vanishes; choose another alpha or p")
    return float((r2 - prod_j**2 * pj - prod_k**2 * pk) / (prod_j * prod_k))
