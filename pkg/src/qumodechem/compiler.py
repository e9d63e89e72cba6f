"""Gate synthesis for qubit operators on a single qumode.

Two circuit families approximate an ``L x L`` target ``W``:

* ECD-rotation chains combined linearly (LCU); the loss scores only the
  ancilla-|0> block, ``F = |W - (sum_j lam_j C_j)_00|^2 / L^2``;
* SNAP-displacement chains ``U = prod_k S(theta_k) D(alpha_k)``, scored on
  the full matrix, ``F = |W - U|^2 / L^2``.

Losses, gradients and residual Jacobians are evaluated analytically with
prefix/suffix products. SciPy's trust-region least-squares solver does the
minimisation by default; BFGS on the scalar loss is kept as an option.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares, minimize

from . import gates
from .fermion import ENDIANNESS, validate_word, word_matrix
from .fockcore import DimensionError, boson_annihilate, dagger, frobenius_distance, real_displacement_basis

log = logging.getLogger(__name__)

LIBRARY_VERSION = 1
DEFAULT_THRESHOLD = 1e-8


class NotConvergedWarning(UserWarning):
    pass


class LibraryError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# data types


@dataclass
class EcdChain:
    beta: np.ndarray  # complex, (N_d,)
    theta: np.ndarray
    phi: np.ndarray
    L: int

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=complex).reshape(-1)
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        self.phi = np.asarray(self.phi, dtype=float).reshape(-1)
        if not (len(self.beta) == len(self.theta) == len(self.phi)):
            raise DimensionError("ECD chain parameter arrays differ in length")

    @property
    def depth(self) -> int:
        return len(self.beta)


@dataclass
class LcuDecomposition:
    lam: np.ndarray
    chains: list[EcdChain]

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float).reshape(-1)
        if len(self.lam) != len(self.chains):
            raise DimensionError("one weight per chain is required")
        if len({(c.depth, c.L) for c in self.chains}) > 1:
            raise DimensionError("all chains must share depth and cutoff")

    @property
    def L(self) -> int:
        return self.chains[0].L

    @property
    def n_terms(self) -> int:
        return len(self.chains)

    @property
    def depth(self) -> int:
        return self.chains[0].depth


@dataclass
class SnapChain:
    alpha: np.ndarray  # (N_d,)
    theta: np.ndarray  # (N_d, L)
    L: int

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        self.theta = np.asarray(self.theta, dtype=float).reshape(len(self.alpha), -1) if len(self.alpha) else np.zeros((0, self.L))
        if self.theta.shape[1] != self.L:
            raise DimensionError(f"SNAP rows must have {self.L} phases")

    @property
    def depth(self) -> int:
        return len(self.alpha)

    @classmethod
    def identity(cls, depth: int, L: int) -> "SnapChain":
        return cls(np.zeros(depth), np.zeros((depth, L)), L)


@dataclass
class CompileResult:
    decomposition: LcuDecomposition | SnapChain
    final_loss: float
    iterations: int
    restarts_used: int
    seed: int
    threshold: float = DEFAULT_THRESHOLD
    converged: bool = True
    losses: list[float] = field(default_factory=list)

    @property
    def method(self) -> str:
        return "snap" if isinstance(self.decomposition, SnapChain) else "ecd_lcu"


# ---------------------------------------------------------------------------
# direct (gate-by-gate) constructions


def ecd_chain_unitary(chain: EcdChain) -> np.ndarray:
    U = np.eye(2 * chain.L, dtype=complex)
    for b, t, p in zip(chain.beta, chain.theta, chain.phi):
        U = gates.ecd_rotation_block(b, t, p, chain.L) @ U
    return U


def lcu_matrix(d: LcuDecomposition) -> np.ndarray:
    out = np.zeros((2 * d.L, 2 * d.L), dtype=complex)
    for lam, chain in zip(d.lam, d.chains):
        out += lam * ecd_chain_unitary(chain)
    return out


def _check_target(target: np.ndarray, L: int) -> np.ndarray:
    W = np.asarray(target, dtype=complex)
    if W.shape != (L, L):
        raise DimensionError(f"target shape {W.shape} does not match cutoff {L}")
    return W


def loss_ecd(d: LcuDecomposition, target: np.ndarray) -> float:
    L = d.L
    W = _check_target(target, L)
    return frobenius_distance(W, lcu_matrix(d)[:L, :L]) / L**2


def snap_chain_unitary(chain: SnapChain) -> np.ndarray:
    U = np.eye(chain.L, dtype=complex)
    for a, th in zip(chain.alpha, chain.theta):
        U = gates.snap(th) @ gates.displacement(a, chain.L) @ U
    return U


def loss_snap(chain: SnapChain, target: np.ndarray) -> float:
    W = _check_target(target, chain.L)
    return frobenius_distance(W, snap_chain_unitary(chain)) / chain.L**2


# ---------------------------------------------------------------------------
# batched objectives with analytic gradients


def _prefix_suffix(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For blocks ``B[..., k, :, :]`` (k = 0 acts first) return prefix ``P[k] = B[k-1]...B[0]``
    and suffix ``Q[k] = B[n-1]...B[k+1]``."""
    n = B.shape[-3]
    eye = np.broadcast_to(np.eye(B.shape[-1], dtype=complex), B.shape[:-3] + B.shape[-2:])
    P = np.empty_like(B)
    Q = np.empty_like(B)
    acc = eye.copy()
    for k in range(n):
        P[..., k, :, :] = acc
        acc = B[..., k, :, :] @ acc
    U = acc
    acc = eye.copy()
    for k in range(n - 1, -1, -1):
        Q[..., k, :, :] = acc
        acc = acc @ B[..., k, :, :]
    return P, Q, U


class SnapObjective:
    """Loss and gradient for a SNAP-displacement chain; ``x`` rows are ``[alpha, theta_0..theta_{L-1}]``."""

    def __init__(self, target: np.ndarray, depth: int):
        self.W = np.asarray(target, dtype=complex)
        self.L = self.W.shape[0]
        self.depth = depth
        self.w, self.V = real_displacement_basis(self.L)
        self.Vh = self.V.conj().T
        a = boson_annihilate(self.L)
        self.G = dagger(a) - a

    @property
    def n_params(self) -> int:
        return self.depth * (self.L + 1)

    def unpack(self, x: np.ndarray) -> SnapChain:
        x = np.asarray(x).reshape(self.depth, self.L + 1)
        return SnapChain(x[:, 0].copy(), x[:, 1:].copy(), self.L)

    @staticmethod
    def pack(chain: SnapChain) -> np.ndarray:
        return np.concatenate([chain.alpha[:, None], chain.theta], axis=1).reshape(-1)

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        L, nd = self.L, self.depth
        x = x.reshape(nd, L + 1)
        if nd == 0:
            return frobenius_distance(self.W, np.eye(L)) / L**2, np.zeros(0)
        alpha, theta = x[:, 0], x[:, 1:]
        ph = np.exp(1j * alpha[:, None] * self.w[None, :])
        D = np.einsum("ij,kj,jl->kil", self.V, ph, self.Vh)
        s = np.exp(1j * theta)
        B = s[:, :, None] * D
        P, Q, U = _prefix_suffix(B)
        R = self.W - U
        f = float(np.sum(R.real**2 + R.imag**2)) / L**2
        M = P @ R.conj().T @ Q
        DM = D @ M
        GDM = self.G @ DM
        scale = -2.0 / L**2
        g_theta = scale * np.real(1j * s * np.diagonal(DM, axis1=1, axis2=2))
        g_alpha = scale * np.real(np.sum(s * np.diagonal(GDM, axis1=1, axis2=2), axis=1))
        grad = np.concatenate([g_alpha[:, None], g_theta], axis=1).reshape(-1)
        return f, grad

    def residual_and_jacobian(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``W - U`` and ``dU/dx`` stacked as ``(n_params, L, L)``."""
        L, nd = self.L, self.depth
        x = x.reshape(nd, L + 1)
        alpha, theta = x[:, 0], x[:, 1:]
        ph = np.exp(1j * alpha[:, None] * self.w[None, :])
        D = np.einsum("ij,kj,jl->kil", self.V, ph, self.Vh)
        s = np.exp(1j * theta)
        B = s[:, :, None] * D
        P, Q, U = _prefix_suffix(B)
        DP = D @ P
        J = np.empty((nd, L + 1, L, L), dtype=complex)
        # alpha: Q S G D P ; theta_n: i e^{i theta_n} Q[:, n] (D P)[n, :]
        J[:, 0] = (Q * s[:, None, :]) @ (self.G @ DP)
        J[:, 1:] = 1j * s[:, :, None, None] * np.einsum("kin,knj->knij", Q, DP)
        return self.W - U, J.reshape(nd * (L + 1), L, L)

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        x = np.empty((self.depth, self.L + 1))
        x[:, 0] = rng.uniform(-0.2, 0.2, self.depth)
        x[:, 1:] = rng.uniform(-np.pi, np.pi, (self.depth, self.L))
        return x.reshape(-1)


class EcdLcuObjective:
    """Loss and gradient for an LCU of ECD-rotation chains.

    ``x = [lam (N_t), then per chain and block: Re beta, Im beta, theta, phi]``.
    """

    def __init__(self, target: np.ndarray, depth: int, n_terms: int):
        self.W = np.asarray(target, dtype=complex)
        self.L = self.W.shape[0]
        self.depth = depth
        self.n_terms = n_terms
        a = boson_annihilate(self.L)
        ad = dagger(a)
        self.a, self.ad = a, ad
        self.Er = 0.5 * (ad - a)
        self.Ei = 0.5j * (ad + a)

    @property
    def n_params(self) -> int:
        return self.n_terms * (1 + 4 * self.depth)

    def unpack(self, x: np.ndarray) -> LcuDecomposition:
        nt, nd = self.n_terms, self.depth
        lam = np.asarray(x[:nt], dtype=float).copy()
        p = np.asarray(x[nt:]).reshape(nt, nd, 4)
        chains = [EcdChain(p[j, :, 0] + 1j * p[j, :, 1], p[j, :, 2].copy(), p[j, :, 3].copy(), self.L) for j in range(nt)]
        return LcuDecomposition(lam, chains)

    @staticmethod
    def pack(d: LcuDecomposition) -> np.ndarray:
        blocks = np.stack([np.stack([c.beta.real, c.beta.imag, c.theta, c.phi], axis=1) for c in d.chains])
        return np.concatenate([d.lam, blocks.reshape(-1)])

    def _blocks(self, p: np.ndarray):
        L = self.L
        beta = p[..., 0] + 1j * p[..., 1]
        theta, phi = p[..., 2], p[..., 3]
        half = beta[..., None, None] / 2
        K = half * self.ad - np.conj(half) * self.a
        w, V = np.linalg.eigh(-1j * K)
        ew = np.exp(1j * w)
        Vh = np.conj(np.swapaxes(V, -1, -2))
        Dp = (V * ew[..., None, :]) @ Vh
        Dm = np.conj(np.swapaxes(Dp, -1, -2))
        c = np.cos(theta / 2)
        s = np.sin(theta / 2)
        e = np.exp(1j * phi)
        R = np.empty(theta.shape + (2, 2), dtype=complex)
        R[..., 0, 0] = c
        R[..., 0, 1] = -1j * np.conj(e) * s
        R[..., 1, 0] = -1j * e * s
        R[..., 1, 1] = c
        dRt = np.empty_like(R)
        dRt[..., 0, 0] = -0.5 * s
        dRt[..., 0, 1] = -0.5j * np.conj(e) * c
        dRt[..., 1, 0] = -0.5j * e * c
        dRt[..., 1, 1] = -0.5 * s
        dRp = np.zeros_like(R)
        dRp[..., 0, 1] = -np.conj(e) * s
        dRp[..., 1, 0] = e * s
        shape = theta.shape + (2 * L, 2 * L)
        E = np.zeros(shape, dtype=complex)
        E[..., :L, L:] = Dm
        E[..., L:, :L] = Dp
        B = np.empty(shape, dtype=complex)
        B[..., :L, :L] = R[..., 1, 0, None, None] * Dm
        B[..., :L, L:] = R[..., 1, 1, None, None] * Dm
        B[..., L:, :L] = R[..., 0, 0, None, None] * Dp
        B[..., L:, L:] = R[..., 0, 1, None, None] * Dp
        return B, E, R, dRt, dRp, w, V, Vh, ew

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        L, nt, nd = self.L, self.n_terms, self.depth
        lam = x[:nt]
        p = x[nt:].reshape(nt, nd, 4)
        B, E, R, dRt, dRp, w, V, Vh, ew = self._blocks(p)
        P, Q, C = _prefix_suffix(B)
        C00 = C[:, :L, :L]
        V00 = np.tensordot(lam, C00, axes=1)
        Res = self.W - V00
        f = float(np.sum(Res.real**2 + Res.imag**2)) / L**2
        scale = -2.0 / L**2
        Rh = Res.conj().T
        g_lam = scale * np.real(np.einsum("ij,kji->k", Rh, C00))
        # M = lam * P[:, :, :, :L] Rh Q[:, :, :L, :]
        M = lam[:, None, None, None] * (P[..., :, :L] @ Rh @ Q[..., :L, :])
        # rotation part: tr((dR x I) M E) = sum_ab dR_ab tr((M E)_ba)
        ME = M @ E
        t = np.empty(M.shape[:2] + (2, 2), dtype=complex)
        for a_, b_ in itertools.product(range(2), repeat=2):
            t[..., b_, a_] = np.trace(ME[..., b_ * L:(b_ + 1) * L, a_ * L:(a_ + 1) * L], axis1=-2, axis2=-1)
        g_theta = scale * np.real(np.einsum("...ab,...ba->...", dRt, t))
        g_phi = scale * np.real(np.einsum("...ab,...ba->...", dRp, t))
        # displacement part: Re tr(dE N) = Re tr(dDp (N01 + N10^H)), N = (R x I) M
        N01 = R[..., 0, 0, None, None] * M[..., :L, L:] + R[..., 0, 1, None, None] * M[..., L:, L:]
        N10 = R[..., 1, 0, None, None] * M[..., :L, :L] + R[..., 1, 1, None, None] * M[..., L:, :L]
        X = N01 + np.conj(np.swapaxes(N10, -1, -2))
        Y = Vh @ X @ V
        dw = w[..., :, None] - w[..., None, :]
        near = np.abs(dw) < 1e-10
        phi_mat = np.where(
            near, 0.5 * (ew[..., :, None] + ew[..., None, :]),
            (ew[..., :, None] - ew[..., None, :]) / (1j * np.where(near, 1.0, dw)),
        )
        Yt = np.swapaxes(Y, -1, -2)
        g_br = scale * np.real(np.sum(phi_mat * (Vh @ self.Er @ V) * Yt, axis=(-2, -1)))
        g_bi = scale * np.real(np.sum(phi_mat * (Vh @ self.Ei @ V) * Yt, axis=(-2, -1)))
        gp = np.stack([g_br, g_bi, g_theta, g_phi], axis=-1)
        return f, np.concatenate([g_lam, gp.reshape(-1)])

    def residual_and_jacobian(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``W - V_00`` and ``dV_00/dx`` stacked as ``(n_params, L, L)``."""
        L, nt, nd = self.L, self.n_terms, self.depth
        lam = x[:nt]
        p = x[nt:].reshape(nt, nd, 4)
        B, E, R, dRt, dRp, w, V, Vh, ew = self._blocks(p)
        P, Q, C = _prefix_suffix(B)
        C00 = C[:, :L, :L]
        res = self.W - np.tensordot(lam, C00, axes=1)
        dw = w[..., :, None] - w[..., None, :]
        near = np.abs(dw) < 1e-10
        phi_mat = np.where(
            near, 0.5 * (ew[..., :, None] + ew[..., None, :]),
            (ew[..., :, None] - ew[..., None, :]) / (1j * np.where(near, 1.0, dw)),
        )
        A = Q[..., :L, :]
        Bm = P[..., :, :L]
        eye = np.eye(L)

        def lift(r):  # r (..., 2, 2) -> r x I
            return np.einsum("...ab,ij->...aibj", r, eye).reshape(r.shape[:-2] + (2 * L, 2 * L))

        RI = lift(R)
        J = np.empty((nt, nd, 4, L, L), dtype=complex)
        for i, Ed in enumerate((self.Er, self.Ei)):
            dDp = V @ (phi_mat * (Vh @ Ed @ V)) @ Vh
            dE = np.zeros_like(E)
            dE[..., :L, L:] = np.conj(np.swapaxes(dDp, -1, -2))
            dE[..., L:, :L] = dDp
            J[:, :, i] = A @ (dE @ RI) @ Bm
        J[:, :, 2] = A @ (E @ lift(dRt)) @ Bm
        J[:, :, 3] = A @ (E @ lift(dRp)) @ Bm
        J *= lam[:, None, None, None, None]
        return res, np.concatenate([C00, J.reshape(nt * nd * 4, L, L)], axis=0)

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        nt, nd = self.n_terms, self.depth
        lam = rng.uniform(-0.5, 0.5, nt)
        p = np.empty((nt, nd, 4))
        p[..., 0] = rng.uniform(-0.2, 0.2, (nt, nd))
        p[..., 1] = rng.uniform(-0.2, 0.2, (nt, nd))
        p[..., 2] = rng.uniform(-np.pi, np.pi, (nt, nd))
        p[..., 3] = rng.uniform(-np.pi, np.pi, (nt, nd))
        return np.concatenate([lam, p.reshape(-1)])


# ---------------------------------------------------------------------------
# optimiser driver


class _Reached(Exception):
    pass


def _bfgs(fun, x0: np.ndarray, max_iter: int, stop_below: float, gtol: float = 1e-12) -> tuple[np.ndarray, float, int]:
    """BFGS with Wolfe line search; restarts from the last point after precision loss."""
    best = {"f": np.inf, "x": np.asarray(x0, dtype=float).copy()}

    def wrapped(x):
        f, g = fun(x)
        if f < best["f"]:
            best["f"], best["x"] = f, x.copy()
        if f < stop_below:
            raise _Reached
        return f, g

    count = {"it": 0}

    def tick(_xk):
        count["it"] += 1

    x = best["x"]
    stalls = 0
    while count["it"] < max_iter:
        try:
            res = minimize(wrapped, x, jac=True, method="BFGS", callback=tick,
                           options={"maxiter": max_iter - count["it"], "gtol": gtol, "norm": np.inf})
        except _Reached:
            break
        improved = res.fun < best["f"] * (1 - 1e-6) or res.nit > 5
        x = best["x"]
        if res.success or not improved:
            stalls += 1
            if res.success or stalls >= 3:
                break
        else:
            stalls = 0
        if res.nit == 0:
            break
    iters = count["it"]
    return best["x"], best["f"], iters


def _least_squares(obj, x0: np.ndarray, max_iter: int, stop_below: float) -> tuple[np.ndarray, float, int]:
    """Trust-region least squares on the real/imag residual with the analytic Jacobian."""
    L = obj.L
    norm = 1.0 / L
    best = {"f": np.inf, "x": np.asarray(x0, dtype=float).copy(), "n": 0}
    cache: dict = {}

    def _eval(x):
        key = x.tobytes()
        if cache.get("key") != key:
            r, J = obj.residual_and_jacobian(x)
            cache.update(key=key, r=r, J=J)
        return cache["r"], cache["J"]

    def resid(x):
        r, _ = _eval(x)
        f = float(np.sum(r.real**2 + r.imag**2)) / L**2
        best["n"] += 1
        if f < best["f"]:
            best["f"], best["x"] = f, x.copy()
        if f < stop_below:
            raise _Reached
        return norm * np.concatenate([r.real.ravel(), r.imag.ravel()])

    def jac(x):
        _, J = _eval(x)
        J = J.reshape(J.shape[0], -1)
        return -norm * np.concatenate([J.real.T, J.imag.T], axis=0)

    try:
        least_squares(resid, best["x"], jac=jac, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                      max_nfev=max_iter)
    except _Reached:
        pass
    return best["x"], best["f"], best["n"]


def _identity_like(W: np.ndarray) -> bool:
    return np.allclose(W, np.eye(W.shape[0]), atol=0)


def compile_target(
    target: np.ndarray,
    method: str = "snap",
    depth: int = 16,
    n_terms: int = 15,
    restarts: int = 10,
    max_iter: int | None = None,
    seed: int = 0,
    threshold: float = DEFAULT_THRESHOLD,
    warm_start: bool = False,
    optimizer: str = "lsq",
) -> CompileResult:
    """Best-of-restarts minimisation of the SNAP or ECD-LCU loss.

    ``final_loss`` is recomputed from the returned parameters gate by gate.
    When no restart reaches ``threshold`` the best result is returned with
    ``converged=False`` and a :class:`NotConvergedWarning` is emitted.
    Diagonal unimodular targets get an exact single-layer SNAP start when
    ``warm_start`` is set.

    ``optimizer="lsq"`` runs a trust-region Gauss-Newton solver on the
    residual (``max_iter`` counts residual evaluations, default 1500);
    ``"bfgs"`` minimises the scalar loss (``max_iter`` iterations, default 4000).
    """
    if optimizer not in ("lsq", "bfgs"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    if max_iter is None:
        max_iter = 1500 if optimizer == "lsq" else 4000
    W = np.asarray(target, dtype=complex)
    L = W.shape[0]
    if W.shape != (L, L) or L & (L - 1) or L > 16:
        raise DimensionError(f"target must be square with power-of-two size <= 16, got {W.shape}")
    if method == "snap":
        obj = SnapObjective(W, depth)
    elif method == "ecd_lcu":
        obj = EcdLcuObjective(W, depth, n_terms)
    else:
        raise ValueError(f"unknown compile method {method!r}")

    def finish(x, iters, used, losses):
        dec = obj.unpack(x)
        loss = loss_snap(dec, W) if method == "snap" else loss_ecd(dec, W)
        ok = loss <= threshold
        if not ok:
            warnings.warn(f"compile loss {loss:.3e} above threshold {threshold:.1e}", NotConvergedWarning, stacklevel=3)
        return CompileResult(dec, loss, iters, used, seed, threshold, ok, losses)

    if method == "snap" and warm_start:
        diag = np.diag(W)
        if depth >= 1 and np.allclose(W, np.diag(diag), atol=0) and np.allclose(np.abs(diag), 1, atol=1e-15):
            x = np.zeros((depth, L + 1))
            x[-1, 1:] = np.angle(diag)
            return finish(x.reshape(-1), 0, 0, [obj.value_and_grad(x.reshape(-1))[0]])

    if method == "snap" and _identity_like(W):
        return finish(np.zeros(obj.n_params), 0, 0, [0.0])

    best_x, best_f, total_iters = None, np.inf, 0
    losses = []
    used = 0
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        x0 = obj.random_start(rng)
        if optimizer == "lsq":
            x, f, it = _least_squares(obj, x0, max_iter, threshold / 10)
        else:
            x, f, it = _bfgs(obj.value_and_grad, x0, max_iter, threshold / 10)
        used = r + 1
        total_iters += it
        losses.append(float(f))
        log.debug("restart %d: loss %.3e after %d iterations", r, f, it)
        if f < best_f:
            best_x, best_f = x, f
        if best_f <= threshold / 10:
            break
    return finish(best_x, total_iters, used, losses)


# ---------------------------------------------------------------------------
# Pauli parameter library


def all_pauli_words(n_qubits: int, include_identity: bool = False) -> list[str]:
    words = ["".join(w) for w in itertools.product("IXYZ", repeat=n_qubits)]
    return words if include_identity else [w for w in words if set(w) != {"I"}]


def decomposition_to_json(dec: LcuDecomposition | SnapChain) -> dict:
    if isinstance(dec, SnapChain):
        return {"alpha": [float(a) for a in dec.alpha], "theta": [[float(t) for t in row] for row in dec.theta]}
    return {
        "lambda": [float(v) for v in dec.lam],
        "beta": [[[float(b.real), float(b.imag)] for b in c.beta] for c in dec.chains],
        "theta": [[float(t) for t in c.theta] for c in dec.chains],
        "phi": [[float(t) for t in c.phi] for c in dec.chains],
    }


def decomposition_from_json(params: dict, L: int) -> LcuDecomposition | SnapChain:
    if "alpha" in params:
        alpha = np.array(params["alpha"], dtype=float)
        theta = np.array(params["theta"], dtype=float).reshape(len(alpha), L)
        return SnapChain(alpha, theta, L)
    chains = [
        EcdChain(np.array([complex(*b) for b in beta]), np.array(th), np.array(ph), L)
        for beta, th, ph in zip(params["beta"], params["theta"], params["phi"])
    ]
    return LcuDecomposition(np.array(params["lambda"]), chains)


def result_to_entry(res: CompileResult) -> dict:
    dec = res.decomposition
    return {"loss": float(res.final_loss), "seed": int(res.seed), "L": int(dec.L),
            "params": decomposition_to_json(dec)}


def _checksum(entries: dict) -> str:
    blob = json.dumps(entries, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class ParamLibrary:
    method: str
    depth: int
    threshold: float
    entries: dict[str, dict] = field(default_factory=dict)
    n_terms: int | None = None

    def __contains__(self, word: str) -> bool:
        return word in self.entries or set(word) == {"I"}

    def decomposition(self, word: str) -> LcuDecomposition | SnapChain:
        word = validate_word(word)
        L = 1 << len(word)
        if set(word) == {"I"}:
            return SnapChain.identity(self.depth, L)
        if word not in self.entries:
            raise KeyError(word)
        e = self.entries[word]
        return decomposition_from_json(e["params"], e["L"])

    def unitary(self, word: str) -> np.ndarray:
        dec = self.decomposition(word)
        if isinstance(dec, SnapChain):
            return snap_chain_unitary(dec)
        return lcu_matrix(dec)[: dec.L, : dec.L]

    def add(self, word: str, res: CompileResult) -> None:
        self.entries[validate_word(word)] = result_to_entry(res)

    def metadata(self) -> dict:
        meta = {
            "method": self.method,
            "N_d": self.depth,
            "L": sorted({e["L"] for e in self.entries.values()}),
            "endianness": ENDIANNESS,
            "threshold": self.threshold,
            "version": LIBRARY_VERSION,
            "checksum": _checksum(self.entries),
        }
        if self.n_terms is not None:
            meta["N_t"] = self.n_terms
        return meta

    def to_json(self) -> str:
        entries = {k: self.entries[k] for k in sorted(self.entries)}
        return json.dumps({"metadata": self.metadata(), "entries": entries}, sort_keys=True, indent=1)


def save_library(lib: ParamLibrary, path: str | Path) -> None:
    Path(path).write_text(lib.to_json())


def load_library(path: str | Path, verify_sample: int = 8, seed: int = 0, tol: float = 1e-12) -> ParamLibrary:
    """Load a library, checking endianness, checksum and a random sample of losses."""
    raw = json.loads(Path(path).read_text())
    meta, entries = raw["metadata"], raw["entries"]
    if meta.get("endianness") != ENDIANNESS:
        raise LibraryError(f"library endianness {meta.get('endianness')!r} differs from {ENDIANNESS!r}")
    if meta.get("version") != LIBRARY_VERSION:
        raise LibraryError(f"unsupported library version {meta.get('version')}")
    if meta.get("checksum") != _checksum(entries):
        raise LibraryError("library checksum mismatch")
    lib = ParamLibrary(meta["method"], meta["N_d"], meta["threshold"], entries, meta.get("N_t"))
    words = sorted(entries)
    rng = np.random.default_rng(seed)
    sample = words if verify_sample >= len(words) else list(rng.choice(words, verify_sample, replace=False))
    for w in sample:
        recomputed = verify_entry(lib, w)
        if abs(recomputed - entries[w]["loss"]) > tol:
            raise LibraryError(f"stored loss for {w} does not match recomputation ({recomputed:.3e})")
    return lib


def verify_entry(lib: ParamLibrary, word: str) -> float:
    dec = lib.decomposition(word)
    W = word_matrix(word)
    return loss_snap(dec, W) if isinstance(dec, SnapChain) else loss_ecd(dec, W)


def _compile_word(args) -> tuple[str, CompileResult]:
    word, method, depth, n_terms, restarts, max_iter, seed, threshold = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConvergedWarning)
        res = compile_target(word_matrix(word), method, depth, n_terms, restarts, max_iter, seed, threshold)
    return word, res


def build_pauli_library(
    max_qubits: int = 4,
    method: str = "snap",
    depth: int = 16,
    threshold: float = DEFAULT_THRESHOLD,
    words: Sequence[str] | None = None,
    restarts: int = 10,
    max_iter: int | None = None,
    seed: int = 0,
    n_terms: int = 15,
    threads: int = 1,
    existing: ParamLibrary | None = None,
    progress=None,
) -> ParamLibrary:
    """Compile every non-identity Pauli word of 1..max_qubits qubits at its native cutoff."""
    if words is None:
        words = [w for n in range(1, max_qubits + 1) for w in all_pauli_words(n)]
    lib = existing or ParamLibrary(method, depth, threshold, n_terms=n_terms if method == "ecd_lcu" else None)
    todo = [validate_word(w) for w in words if w not in lib.entries and set(w) != {"I"}]
    jobs = [(w, method, depth, n_terms, restarts, max_iter, seed, threshold) for w in todo]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_compile_word, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_compile_word(job))
            if progress:
                progress(*results[-1])
    failed = []
    for word, res in results:
        lib.add(word, res)
        if not res.converged:
            failed.append(word)
    if failed:
        warnings.warn(f"{len(failed)} library words above threshold: {failed[:8]}", NotConvergedWarning, stacklevel=2)
    return lib
