"""Molecular Hamiltonians, Jordan-Wigner mapping, Pauli algebra and the FCI oracle.

Conventions used throughout the package:

* spin orbital ``2p + s`` is spatial orbital ``p`` with spin ``s`` (0 = alpha, 1 = beta);
* qubit ``p`` is occupied when its computational bit is 1, and qubit 0 is the
  most significant bit (leftmost tensor factor);
* ``a_p^dag -> (X_p - i Y_p)/2 * prod_{q<p} Z_q``, so ``n_p -> (I - Z_p)/2``;
* a determinant with occupied spin orbitals ``p1 < p2 < ... < pN`` is
  ``a_{p1}^dag a_{p2}^dag ... a_{pN}^dag |vac>``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .fockcore import DimensionError

COEFF_TOL = 1e-12
HERMITIAN_TOL = 1e-10
MAX_DENSE_QUBITS = 12
ENDIANNESS = "qubit0-msb"


class FcidumpError(ValueError):
    """Malformed FCIDUMP input; message carries the offending line number."""


class NotHermitianError(ValueError):
    pass


# ---------------------------------------------------------------------------
# integrals


@dataclass
class MolecularIntegrals:
    """Spatial-orbital integrals.

    ``two_body[p, q, r, s]`` is the coefficient multiplying
    ``a_p^dag a_q^dag a_r a_s`` (spin-adapted), i.e. the Coulomb integral
    ``int phi_p(1) phi_q(2) phi_r(2) phi_s(1) / r12`` which equals the
    chemist-notation ``(ps|qr)``.
    """

    h_nuc: float
    one_body: np.ndarray
    two_body: np.ndarray
    n_electrons: int | None = None
    ms2: int = 0

    def __post_init__(self):
        self.one_body = np.asarray(self.one_body, dtype=float)
        self.two_body = np.asarray(self.two_body, dtype=float)
        n = self.one_body.shape[0]
        if self.one_body.shape != (n, n) or self.two_body.shape != (n,) * 4:
            raise DimensionError("integral tensors have inconsistent orbital counts")
        self.h_nuc = float(self.h_nuc)

    @property
    def n_spatial(self) -> int:
        return self.one_body.shape[0]

    @property
    def n_spin_orbitals(self) -> int:
        return 2 * self.n_spatial

    def check_symmetry(self, tol: float = 1e-10) -> bool:
        h1, h2 = self.one_body, self.two_body
        ok = np.allclose(h1, h1.T, atol=tol)
        for perm in ((1, 0, 3, 2), (3, 2, 1, 0), (2, 3, 0, 1), (0, 2, 1, 3)):
            ok &= np.allclose(h2, h2.transpose(perm), atol=tol)
        return bool(ok)

    def spin_orbital_tensors(self) -> tuple[np.ndarray, np.ndarray]:
        """One- and two-body tensors over spin orbitals (interleaved alpha/beta)."""
        n = self.n_spatial
        M = 2 * n
        spin = np.arange(M) % 2
        sp = np.arange(M) // 2
        h1 = self.one_body[np.ix_(sp, sp)] * (spin[:, None] == spin[None, :])
        h2 = self.two_body[np.ix_(sp, sp, sp, sp)]
        # electron 1 lives on (P, S), electron 2 on (Q, R)
        mask = (spin[:, None, None, None] == spin[None, None, None, :]) & (
            spin[None, :, None, None] == spin[None, None, :, None]
        )
        return h1, h2 * mask


_HEADER_KEY = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*([^=]*?)\s*(?=(?:,\s*)?[A-Za-z_][A-Za-z0-9_]*\s*=|$)")


def _parse_header(header: str, first_line: int) -> dict[str, list[int]]:
    body = re.sub(r"^\s*&FCI", "", header, flags=re.IGNORECASE).strip()
    fields: dict[str, list[int]] = {}
    for key, raw in _HEADER_KEY.findall(body):
        vals = [v for v in re.split(r"[,\s]+", raw.strip().rstrip(",")) if v]
        try:
            fields[key.upper()] = [int(v) for v in vals]
        except ValueError as exc:
            raise FcidumpError(f"line {first_line}: bad header value for {key}: {raw!r}") from exc
    return fields


def load_fcidump(text: str) -> MolecularIntegrals:
    """Parse FCIDUMP text (1-based chemist-order records) into integrals."""
    lines = text.splitlines()
    start = None
    for i, line in enumerate(lines):
        if line.strip():
            start = i
            break
    if start is None or not lines[start].strip().upper().startswith("&FCI"):
        raise FcidumpError(f"line {(start or 0) + 1}: expected '&FCI' header")
    end = None
    header_parts = []
    for i in range(start, len(lines)):
        s = lines[i].strip()
        term = re.search(r"(&END|/)\s*$", s, flags=re.IGNORECASE)
        if term:
            header_parts.append(s[: term.start()])
            end = i
            break
        header_parts.append(s)
    if end is None:
        raise FcidumpError(f"line {start + 1}: header is not terminated by &END or /")
    fields = _parse_header(" ".join(header_parts), start + 1)
    if "NORB" not in fields or len(fields["NORB"]) != 1:
        raise FcidumpError(f"line {start + 1}: missing NORB in header")
    n = fields["NORB"][0]
    if n < 1:
        raise FcidumpError(f"line {start + 1}: NORB must be positive")
    nelec = fields.get("NELEC", [None])[0]
    ms2 = fields.get("MS2", [0])[0]

    chem = np.zeros((n,) * 4)
    h1 = np.zeros((n, n))
    h_nuc = 0.0
    for lineno in range(end + 1, len(lines)):
        s = lines[lineno].strip()
        if not s:
            continue
        parts = s.split()
        if len(parts) != 5:
            raise FcidumpError(f"line {lineno + 1}: expected 'value i j k l', got {s!r}")
        try:
            val = float(parts[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(x) for x in parts[1:])
        except ValueError as exc:
            raise FcidumpError(f"line {lineno + 1}: cannot parse {s!r}") from exc
        if not all(0 <= x <= n for x in (i, j, k, l)):
            raise FcidumpError(f"line {lineno + 1}: orbital index out of range 0..{n}")
        if i == j == k == l == 0:
            h_nuc = val
        elif k == 0 and l == 0:
            if i == 0 or j == 0:
                raise FcidumpError(f"line {lineno + 1}: malformed one-body record")
            h1[i - 1, j - 1] = h1[j - 1, i - 1] = val
        elif 0 in (i, j, k, l):
            # orbital-energy style records (i 0 0 0) carry no Hamiltonian content
            if j == k == l == 0:
                continue
            raise FcidumpError(f"line {lineno + 1}: malformed two-body record")
        else:
            p, q, r, t = i - 1, j - 1, k - 1, l - 1
            for a, b, c, d in ((p, q, r, t), (q, p, r, t), (p, q, t, r), (q, p, t, r),
                               (r, t, p, q), (t, r, p, q), (r, t, q, p), (t, r, q, p)):
                chem[a, b, c, d] = val
    # (ps|qr) -> coefficient of a_p^dag a_q^dag a_r a_s
    two = chem.transpose(0, 2, 3, 1)
    return MolecularIntegrals(h_nuc, h1, two, nelec, ms2)


def load_fcidump_file(path: str | Path) -> MolecularIntegrals:
    return load_fcidump(Path(path).read_text())


# ---------------------------------------------------------------------------
# fermionic operators


def _sort_with_sign(idx: tuple[int, ...]) -> tuple[tuple[int, ...], int] | None:
    """Sort descending by adjacent swaps; None when an index repeats (term vanishes)."""
    if len(set(idx)) != len(idx):
        return None
    arr = list(idx)
    sign = 1
    for i in range(len(arr)):
        for j in range(len(arr) - 1 - i):
            if arr[j] < arr[j + 1]:
                arr[j], arr[j + 1] = arr[j + 1], arr[j]
                sign = -sign
    return tuple(arr), sign


class FermionOperatorSum:
    """Normal-ordered sum of ``c * a^dag_{c1} ... a^dag_{ck} a_{a1} ... a_{al}``.

    Canonical storage sorts creation and annihilation indices in descending
    order, absorbing the permutation sign into the coefficient.
    """

    def __init__(self, n_modes: int, terms: Iterable[tuple[complex, Iterable[int], Iterable[int]]] = ()):
        self.n_modes = int(n_modes)
        self.terms: dict[tuple[tuple[int, ...], tuple[int, ...]], complex] = {}
        for coef, cre, ann in terms:
            self.add_term(coef, cre, ann)

    def add_term(self, coef: complex, creations: Iterable[int], annihilations: Iterable[int]) -> None:
        cre = tuple(int(c) for c in creations)
        ann = tuple(int(a) for a in annihilations)
        if any(not 0 <= x < self.n_modes for x in cre + ann):
            raise DimensionError(f"mode index outside 0..{self.n_modes - 1}")
        sc = _sort_with_sign(cre)
        sa = _sort_with_sign(ann)
        if sc is None or sa is None or coef == 0:
            return
        key = (sc[0], sa[0])
        self.terms[key] = self.terms.get(key, 0.0) + coef * sc[1] * sa[1]

    def compress(self, tol: float = COEFF_TOL) -> "FermionOperatorSum":
        out = FermionOperatorSum(self.n_modes)
        out.terms = {k: v for k, v in self.terms.items() if abs(v) > tol}
        return out

    def dagger(self) -> "FermionOperatorSum":
        out = FermionOperatorSum(self.n_modes)
        for (cre, ann), c in self.terms.items():
            out.add_term(np.conj(c), ann[::-1], cre[::-1])
        return out

    def __add__(self, other: "FermionOperatorSum") -> "FermionOperatorSum":
        out = FermionOperatorSum(max(self.n_modes, other.n_modes))
        for src in (self, other):
            for (cre, ann), c in src.terms.items():
                out.add_term(c, cre, ann)
        return out

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        diff = self + self.dagger().scaled(-1.0)
        return all(abs(v) <= tol for v in diff.terms.values())

    def scaled(self, s: complex) -> "FermionOperatorSum":
        out = FermionOperatorSum(self.n_modes)
        out.terms = {k: v * s for k, v in self.terms.items()}
        return out

    def __iter__(self) -> Iterator[tuple[complex, tuple[int, ...], tuple[int, ...]]]:
        for (cre, ann), c in self.terms.items():
            yield c, cre, ann

    def __len__(self) -> int:
        return len(self.terms)

    def constant(self) -> complex:
        return self.terms.get(((), ()), 0.0)


def build_molecular_hamiltonian(integrals: MolecularIntegrals, tol: float = COEFF_TOL) -> FermionOperatorSum:
    """Spin-orbital Hamiltonian sum h_pq a+p a_q + 1/2 sum h_pqrs a+p a+q a_r a_s + h_nuc."""
    h1, h2 = integrals.spin_orbital_tensors()
    M = integrals.n_spin_orbitals
    op = FermionOperatorSum(M)
    if integrals.h_nuc != 0.0:
        op.add_term(integrals.h_nuc, (), ())
    for p, q in zip(*np.nonzero(np.abs(h1) > 0)):
        op.add_term(h1[p, q], (p,), (q,))
    for p, q, r, s in zip(*np.nonzero(np.abs(h2) > 0)):
        op.add_term(0.5 * h2[p, q, r, s], (p, q), (r, s))
    return op.compress(tol)


# ---------------------------------------------------------------------------
# Pauli algebra

# (a, b) -> (phase, a*b)
_PAULI_MUL = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}
_VALID = set("IXYZ")


def validate_word(word: str, n_qubits: int | None = None) -> str:
    w = word.strip().upper()
    if not w or set(w) - _VALID:
        raise ValueError(f"invalid Pauli word {word!r}")
    if n_qubits is not None and len(w) != n_qubits:
        raise DimensionError(f"word {word!r} has length {len(w)}, expected {n_qubits}")
    return w


def multiply_words(a: str, b: str) -> tuple[complex, str]:
    phase = 1 + 0j
    out = []
    for x, y in zip(a, b):
        ph, z = _PAULI_MUL[(x, y)]
        phase *= ph
        out.append(z)
    return phase, "".join(out)


def word_sort_key(word: str) -> tuple:
    """Order by weight, then support positions, then letters (X < Y < Z)."""
    support = tuple(i for i, c in enumerate(word) if c != "I")
    return (len(support), support, tuple(word[i] for i in support))


def word_label(word: str) -> str:
    """Human form such as ``Z0 Z1`` (``I`` for the identity)."""
    parts = [f"{c}{i}" for i, c in enumerate(word) if c != "I"]
    return " ".join(parts) if parts else "I"


class PauliSum:
    """Sum of Pauli words with complex coefficients keyed by word string."""

    def __init__(self, n_qubits: int, terms: Mapping[str, complex] | Iterable[tuple[complex, str]] = ()):
        self.n_qubits = int(n_qubits)
        self.terms: dict[str, complex] = {}
        items = terms.items() if isinstance(terms, Mapping) else ((w, c) for c, w in terms)
        for w, c in items:
            self.add(c, w)

    @classmethod
    def identity(cls, n_qubits: int, coef: complex = 1.0) -> "PauliSum":
        return cls(n_qubits, [(coef, "I" * n_qubits)])

    def add(self, coef: complex, word: str) -> None:
        w = validate_word(word, self.n_qubits)
        self.terms[w] = self.terms.get(w, 0.0) + coef

    def copy(self) -> "PauliSum":
        return PauliSum(self.n_qubits, dict(self.terms))

    def __add__(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        out = self.copy()
        for w, c in other.terms.items():
            out.terms[w] = out.terms.get(w, 0.0) + c
        return out

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + other * -1.0

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            self._check(other)
            out = PauliSum(self.n_qubits)
            for wa, ca in self.terms.items():
                for wb, cb in other.terms.items():
                    ph, w = multiply_words(wa, wb)
                    out.terms[w] = out.terms.get(w, 0.0) + ph * ca * cb
            return out
        out = PauliSum(self.n_qubits)
        out.terms = {w: c * other for w, c in self.terms.items()}
        return out

    __rmul__ = __mul__

    def _check(self, other: "PauliSum") -> None:
        if other.n_qubits != self.n_qubits:
            raise DimensionError("Pauli sums act on different qubit counts")

    def simplify(self, tol: float = 1e-14) -> "PauliSum":
        """Drop negligible terms; cast to real when every imaginary part is below ``tol``."""
        kept = {w: c for w, c in self.terms.items() if abs(c) > tol}
        if all(abs(np.imag(c)) <= tol for c in kept.values()):
            kept = {w: float(np.real(c)) for w, c in kept.items()}
        out = PauliSum(self.n_qubits)
        out.terms = dict(sorted(kept.items(), key=lambda kv: word_sort_key(kv[0])))
        return out

    def coefficient(self, word: str) -> complex:
        return self.terms.get(validate_word(word, self.n_qubits), 0.0)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple[complex, str]]:
        for w, c in self.terms.items():
            yield c, w

    def items_sorted(self) -> list[tuple[str, complex]]:
        return sorted(self.terms.items(), key=lambda kv: word_sort_key(kv[0]))

    def max_imag(self) -> float:
        return max((abs(np.imag(c)) for c in self.terms.values()), default=0.0)


def _ladder_pauli(p: int, n: int, create: bool) -> PauliSum:
    z = "Z" * p
    rest = "I" * (n - p - 1)
    s = -0.5j if create else 0.5j
    return PauliSum(n, [(0.5, z + "X" + rest), (s, z + "Y" + rest)])


def jordan_wigner(op: FermionOperatorSum, n_qubits: int | None = None) -> PauliSum:
    n = op.n_modes if n_qubits is None else n_qubits
    if n < op.n_modes:
        raise DimensionError("fewer qubits than fermionic modes")
    cache: dict[tuple[int, bool], PauliSum] = {}

    def ladder(p: int, create: bool) -> PauliSum:
        key = (p, create)
        if key not in cache:
            cache[key] = _ladder_pauli(p, n, create)
        return cache[key]

    out = PauliSum(n)
    for coef, cre, ann in op:
        term = PauliSum.identity(n, coef)
        for p in cre:
            term = term * ladder(p, True)
        for p in ann:
            term = term * ladder(p, False)
        out = out + term
    return out.simplify()


@dataclass
class PauliGroup:
    """``coefficient * sum_k sign_k * word_k``."""

    coefficient: float
    members: list[tuple[float, str]] = field(default_factory=list)

    def as_sum(self, n_qubits: int) -> PauliSum:
        return PauliSum(n_qubits, [(s, w) for s, w in self.members])

    def words(self) -> list[str]:
        return [w for _, w in self.members]


def group_pauli_sum(psum: PauliSum, tol: float = COEFF_TOL) -> list[PauliGroup]:
    """Merge words whose coefficients agree in magnitude into grouped operators.

    Relative signs are carried by the members. Group order follows the first
    member in :func:`word_sort_key` order, so the identity comes first. The
    overall sign gives a non-negative majority of members; ties make the
    group coefficient positive.
    """
    items = [(w, complex(c)) for w, c in psum.simplify(0.0).items_sorted() if c != 0]
    for w, c in items:
        if abs(c.imag) > 1e-14:
            raise NotHermitianError(f"complex coefficient on {w}; grouping needs a Hermitian sum")
    buckets: list[list[tuple[str, float]]] = []
    for w, c in items:
        c = c.real
        for b in buckets:
            if abs(abs(b[0][1]) - abs(c)) <= tol and (set(b[0][0]) == {"I"}) == (set(w) == {"I"}):
                b.append((w, c))
                break
        else:
            buckets.append([(w, c)])
    groups = []
    for b in buckets:
        signs = [1.0 if c >= 0 else -1.0 for _, c in b]
        npos = sum(s > 0 for s in signs)
        overall = -1.0 if 2 * npos < len(signs) else 1.0
        coef = overall * abs(b[0][1])
        groups.append(PauliGroup(coef, [(s * overall, w) for s, (w, _) in zip(signs, b)]))
    return groups


def grouped_to_sum(groups: Iterable[PauliGroup], n_qubits: int) -> PauliSum:
    out = PauliSum(n_qubits)
    for g in groups:
        out = out + g.as_sum(n_qubits) * g.coefficient
    return out


_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def pauli_matrix(letter: str) -> np.ndarray:
    return _SINGLE[letter].copy()


def word_matrix(word: str) -> np.ndarray:
    """Dense matrix of one Pauli word; qubit 0 is the most significant bit."""
    word = validate_word(word)
    n = len(word)
    if n > MAX_DENSE_QUBITS:
        raise DimensionError(f"{n} qubits exceeds the dense limit of {MAX_DENSE_QUBITS}")
    dim = 1 << n
    flip = 0
    zy = 0
    ny = 0
    for q, c in enumerate(word):
        bit = 1 << (n - 1 - q)
        if c in "XY":
            flip |= bit
        if c in "ZY":
            zy |= bit
        if c == "Y":
            ny += 1
    cols = np.arange(dim)
    parity = np.zeros(dim, dtype=np.int64)
    masked = cols & zy
    while np.any(masked):
        parity ^= masked & 1
        masked = masked >> 1
    # Y|b> = i(-1)^b |1-b>
    phase = (1j**ny) * (1 - 2 * parity)
    mat = np.zeros((dim, dim), dtype=complex)
    mat[cols ^ flip, cols] = phase
    return mat


def pauli_sum_to_matrix(psum: PauliSum, n_qubits: int | None = None) -> np.ndarray:
    n = psum.n_qubits if n_qubits is None else n_qubits
    if n != psum.n_qubits:
        raise DimensionError("qubit count does not match the Pauli sum")
    if n > MAX_DENSE_QUBITS:
        raise DimensionError(f"{n} qubits exceeds the dense limit of {MAX_DENSE_QUBITS}")
    mat = np.zeros((1 << n, 1 << n), dtype=complex)
    for c, w in psum:
        mat += c * word_matrix(w)
    return mat


def exact_ground_state(matrix: np.ndarray) -> tuple[float, np.ndarray]:
    """Lowest eigenpair via a dense Hermitian eigensolve.

    For a degenerate ground level the eigenvector returned by LAPACK is
    passed through unchanged; any vector of the eigenspace is valid.
    """
    H = np.asarray(matrix, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError("exact_ground_state needs a square matrix")
    if np.max(np.abs(H - H.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise NotHermitianError("matrix is not Hermitian within 1e-10")
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    return float(w[0]), V[:, 0]


# ---------------------------------------------------------------------------
# determinant basis


def determinants(M: int, N: int) -> list[tuple[int, ...]]:
    """Occupied-index tuples in lexicographic order."""
    return list(itertools.combinations(range(M), N))


def determinant_to_index(occ: Iterable[int], M: int) -> int:
    """Computational-basis index of a determinant (qubit 0 most significant)."""
    return sum(1 << (M - 1 - p) for p in occ)


def _apply_string(occ: frozenset[int], cre: tuple[int, ...], ann: tuple[int, ...]) -> tuple[int, frozenset[int]] | None:
    state = set(occ)
    sign = 1
    # rightmost operator acts first
    ops = [(p, True) for p in cre] + [(p, False) for p in ann]
    for p, is_cre in reversed(ops):
        if is_cre == (p in state):
            return None
        sign *= -1 if sum(1 for q in state if q < p) % 2 else 1
        if is_cre:
            state.add(p)
        else:
            state.remove(p)
    return sign, frozenset(state)


def determinant_matrix(op: FermionOperatorSum, N: int) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Matrix of ``op`` in the N-electron determinant basis (lexicographic order)."""
    M = op.n_modes
    basis = determinants(M, N)
    pos = {frozenset(d): i for i, d in enumerate(basis)}
    H = np.zeros((len(basis), len(basis)), dtype=complex)
    for j, d in enumerate(basis):
        occ = frozenset(d)
        for coef, cre, ann in op:
            if len(cre) != len(ann):
                continue
            res = _apply_string(occ, cre, ann)
            if res is None:
                continue
            sign, new = res
            H[pos[new], j] += coef * sign
    return H, basis


def sector_count(M: int, N: int) -> int:
    return comb(M, N)


# ---------------------------------------------------------------------------
# symmetry operators


def _one_body_pauli(terms: Iterable[tuple[complex, int, int]], M: int) -> PauliSum:
    return jordan_wigner(FermionOperatorSum(M, [(c, (p,), (q,)) for c, p, q in terms]))


def number_operator_pauli(M: int) -> PauliSum:
    return _one_body_pauli(((1.0, p, p) for p in range(M)), M)


def symmetry_operators(M: int) -> tuple[PauliSum, PauliSum]:
    """Particle number and total spin squared as Pauli sums."""
    if M % 2:
        raise ValueError("spin operators need an even number of spin orbitals")
    n_op = number_operator_pauli(M)
    nsp = M // 2
    s_plus = _one_body_pauli(((1.0, 2 * p, 2 * p + 1) for p in range(nsp)), M)
    s_minus = _one_body_pauli(((1.0, 2 * p + 1, 2 * p) for p in range(nsp)), M)
    s_z = _one_body_pauli(
        itertools.chain(((0.5, 2 * p, 2 * p) for p in range(nsp)), ((-0.5, 2 * p + 1, 2 * p + 1) for p in range(nsp))), M
    )
    s2 = s_minus * s_plus + s_z * (s_z + PauliSum.identity(M))
    return n_op.simplify(), s2.simplify()
