"""Qubit-qumode gate matrices and small circuits built from them.

Qubit factors always precede the qumode factor in tensor products, so a
qubit-qumode gate on cutoff ``L`` is a ``2L x 2L`` matrix whose ``L x L``
blocks are indexed by the qubit state.

Circuits are lists of :class:`Gate` in application order (the first element
acts first). The equivalent operator product reads right to left.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .fockcore import DimensionError, boson_annihilate, dagger, embed_operator, kron, matexp

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)
P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)
SIGMA_01 = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
SIGMA_10 = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|


def rotation(theta: float, phi: float) -> np.ndarray:
    """``exp[-i theta/2 (cos(phi) X + sin(phi) Y)]`` in closed form."""
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    return np.array(
        [[c, -1j * np.exp(-1j * phi) * s], [-1j * np.exp(1j * phi) * s, c]],
        dtype=complex,
    )


def rotation_derivatives(theta: float, phi: float) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of :func:`rotation` with respect to theta and phi."""
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    e = np.exp(1j * phi)
    d_theta = 0.5 * np.array([[-s, -1j * np.conj(e) * c], [-1j * e * c, -s]], dtype=complex)
    d_phi = np.array([[0, -np.conj(e) * s], [e * s, 0]], dtype=complex)
    return d_theta, d_phi


def displacement_exponent(beta: complex, L: int) -> np.ndarray:
    a = boson_annihilate(L)
    return beta * dagger(a) - np.conj(beta) * a


def displacement(beta: complex, L: int) -> np.ndarray:
    """``D(beta)`` exponentiated inside the ``L``-level truncation (no auto-extension)."""
    return matexp(displacement_exponent(beta, L))


def conditional_displacement(beta: complex, L: int) -> np.ndarray:
    return kron(P0, displacement(beta, L)) + kron(P1, displacement(-beta, L))


def ecd(beta: complex, L: int) -> np.ndarray:
    return kron(SIGMA_10, displacement(beta / 2, L)) + kron(SIGMA_01, displacement(-beta / 2, L))


def ecd_rotation_block(beta: complex, theta: float, phi: float, L: int) -> np.ndarray:
    """``ECD(beta) (R(theta, phi) x I)``: the rotation acts first."""
    return ecd(beta, L) @ kron(rotation(theta, phi), np.eye(L))


def snap(theta: Sequence[float], L: int | None = None) -> np.ndarray:
    th = np.asarray(theta, dtype=float)
    if th.ndim != 1 or (L is not None and th.shape[0] != L):
        raise DimensionError(f"SNAP needs {L} phases, got shape {th.shape}")
    return np.diag(np.exp(1j * th))


def snap_qubit_form(theta: Sequence[float], L: int | None = None) -> np.ndarray:
    """SNAP driven through a qubit: phases apply when the qubit is in |0>."""
    S = snap(theta, L)
    return kron(P0, S) + kron(P1, np.eye(S.shape[0]))


def beam_splitter_generator(phi: float, L1: int, L2: int) -> np.ndarray:
    """``A(phi) = (i/2)(e^{i phi} b1^dag b2 + h.c.)`` so that ``BS = exp(beta A)``."""
    b1 = kron(boson_annihilate(L1), np.eye(L2))
    b2 = kron(np.eye(L1), boson_annihilate(L2))
    hop = np.exp(1j * phi) * dagger(b1) @ b2
    return 0.5j * (hop + dagger(hop))


def beam_splitter(beta: float, phi: float, L1: int, L2: int) -> np.ndarray:
    if L1 < 1 or L2 < 1:
        raise DimensionError("beam splitter cutoffs must be positive")
    return matexp(beta * beam_splitter_generator(phi, L1, L2))


def controlled_embed(U: np.ndarray) -> np.ndarray:
    """``|0><0| x I + |1><1| x U`` with the control as the leading factor."""
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise DimensionError("controlled_embed needs a square matrix")
    return kron(P0, np.eye(U.shape[0])) + kron(P1, U)


def controlled_x(ctrl_state: int = 1) -> np.ndarray:
    """Two-qubit X on the second qubit, conditioned on the first being ``ctrl_state``."""
    if ctrl_state == 1:
        return kron(P0, I2) + kron(P1, X)
    return kron(P0, X) + kron(P1, I2)


CNOT = controlled_x(1)


# -- circuits ----------------------------------------------------------------


@dataclass
class Gate:
    """One circuit element.

    ``targets`` index the circuit wires; qubit wires have dimension 2.
    ``params`` holds plain JSON-compatible values: complex amplitudes are
    stored as ``[re, im]``.
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    targets: tuple[int, ...] = ()

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": self.params, "targets": list(self.targets)}

    @classmethod
    def from_json(cls, d: dict) -> "Gate":
        return cls(d["kind"], dict(d.get("params", {})), tuple(d["targets"]))


def _cplx(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _pair(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def local_matrix(gate: Gate, dims: Sequence[int]) -> np.ndarray:
    """Matrix of ``gate`` on its own target wires (in target order)."""
    p = gate.params
    tdims = [dims[t] for t in gate.targets]
    k = gate.kind
    if k == "rotation":
        return rotation(p["theta"], p["phi"])
    if k == "x":
        return X.copy()
    if k == "displacement":
        return displacement(_cplx(p["beta"]), tdims[0])
    if k == "cond_disp":
        return conditional_displacement(_cplx(p["beta"]), tdims[1])
    if k == "ecd":
        return ecd(_cplx(p["beta"]), tdims[1])
    if k == "snap":
        return snap(p["theta"], tdims[0])
    if k == "snap_qubit_form":
        return snap_qubit_form(p["theta"], tdims[1])
    if k == "beam_splitter":
        return beam_splitter(p["beta"], p["phi"], tdims[0], tdims[1])
    if k == "cx":
        return controlled_x(int(p.get("ctrl_state", 1)))
    if k == "controlled":
        # targets = (control,) + inner targets
        return controlled_embed(local_matrix(Gate.from_json(p["gate"]), dims))
    raise ValueError(f"unknown gate kind {k!r}")


def circuit_matrix(circuit: Sequence[Gate], dims: Sequence[int]) -> np.ndarray:
    """Operator of the whole circuit: later gates multiply from the left."""
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    U = np.eye(total, dtype=complex)
    for g in circuit:
        U = embed_operator(local_matrix(g, dims), g.targets, dims) @ U
    return U


def circuit_to_json(circuit: Sequence[Gate], dims: Sequence[int]) -> str:
    return json.dumps(
        {"application_order": "first-to-last", "dims": list(dims), "gates": [g.to_json() for g in circuit]},
        sort_keys=True,
    )


def circuit_from_json(text: str) -> tuple[list[Gate], list[int]]:
    d = json.loads(text)
    if d.get("application_order") != "first-to-last":
        raise ValueError("unsupported application order")
    return [Gate.from_json(g) for g in d["gates"]], list(d["dims"])


def compile_controlled_ecd(beta: complex, L: int) -> tuple[list[Gate], np.ndarray]:
    """Controlled-ECD on wires (qubit a, qubit b, qumode) from CD gates and one CNOT.

    Uses ``CD(-beta/4) X CD(beta/4) = X CD(beta/2) = ECD(beta)``; with the
    control off the two conditional displacements cancel.
    """
    circuit = [
        Gate("cond_disp", {"beta": _pair(beta / 4)}, (1, 2)),
        Gate("cx", {"ctrl_state": 1}, (0, 1)),
        Gate("cond_disp", {"beta": _pair(-beta / 4)}, (1, 2)),
    ]
    return circuit, circuit_matrix(circuit, (2, 2, L))


def controlled_snap_circuit(theta: Sequence[float], L: int) -> tuple[list[Gate], np.ndarray]:
    """Controlled SNAP on wires (control, ancilla, qumode).

    The ancilla is flipped when the control is |0>, so the qubit-form SNAP
    fires only for control |1>; the second flip restores the ancilla.
    """
    th = [float(t) for t in theta]
    if len(th) != L:
        raise DimensionError(f"SNAP needs {L} phases, got {len(th)}")
    circuit = [
        Gate("cx", {"ctrl_state": 0}, (0, 1)),
        Gate("snap_qubit_form", {"theta": th}, (1, 2)),
        Gate("cx", {"ctrl_state": 0}, (0, 1)),
    ]
    return circuit, circuit_matrix(circuit, (2, 2, L))


def restrict_ancilla_zero(U: np.ndarray, L: int) -> np.ndarray:
    """Block of a (control, ancilla, qumode) operator with the ancilla in |0> on both sides."""
    dim = 4 * L
    if U.shape != (dim, dim):
        raise DimensionError("expected a (2, 2, L) operator")
    idx = [c * 2 * L + n for c in range(2) for n in range(L)]
    return U[np.ix_(idx, idx)]
