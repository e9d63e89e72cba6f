import csv

import numpy as np
import pytest

from qumodechem import fermion as fe
from qumodechem.fockcore import DimensionError


def reference_fci(data_dir, mol):
    with open(data_dir / "reference_fci.csv") as fh:
        return {float(r["R_angstrom"]): float(r["E_fci_hartree"]) for r in csv.DictReader(fh) if r["molecule"] == mol}


@pytest.fixture(scope="module")
def h2(data_dir):
    return fe.load_fcidump_file(data_dir / "h2_0.7414.fcidump")


def test_minimal_fcidump():
    text = "&FCI NORB=1,NELEC=0,MS2=0,\n&END\n 0.5 0 0 0 0\n"
    ints = fe.load_fcidump(text)
    assert ints.h_nuc == 0.5 and ints.n_spatial == 1
    assert not ints.one_body.any() and not ints.two_body.any()


def test_slash_terminator_and_fortran_exponent():
    text = " &FCI NORB=2,\n NELEC=2, MS2=0\n /\n 1.0D-1 1 2 2 1\n -1.0 2 1 0 0\n"
    ints = fe.load_fcidump(text)
    assert ints.one_body[0, 1] == ints.one_body[1, 0] == -1.0
    # chemist (12|21) -> coefficient of a+_p a+_q a_r a_s with (ps|qr)
    assert ints.two_body[0, 1, 0, 1] == pytest.approx(0.1)
    assert ints.check_symmetry()


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("NORB=2\n&END\n", "line 1"),
        ("&FCI NELEC=2,\n&END\n", "NORB"),
        ("&FCI NORB=1,\n&END\n 1.0 1 1 1\n", "line 3"),
        ("&FCI NORB=1,\n&END\n 1.0 2 1 1 1\n", "out of range"),
        ("&FCI NORB=1,\n 1.0 1 1 1 1\n", "not terminated"),
        ("&FCI NORB=1,\n&END\n x 1 1 1 1\n", "line 3"),
    ],
)
def test_fcidump_errors(text, fragment):
    with pytest.raises(fe.FcidumpError, match=fragment):
        fe.load_fcidump(text)


def test_h2_fixture_shape_and_symmetry(h2):
    assert h2.n_spatial == 2 and h2.n_electrons == 2
    assert np.any(h2.two_body)
    assert h2.check_symmetry(1e-14)
    # h_pqrs = h_qpsr = h_srqp
    t = h2.two_body
    assert np.allclose(t, t.transpose(1, 0, 3, 2)) and np.allclose(t, t.transpose(3, 2, 1, 0))


def test_symmetry_completion_from_single_record():
    text = "&FCI NORB=2,\n&END\n 0.3 1 1 2 2\n"
    t = fe.load_fcidump(text).two_body
    # (11|22) fills h_{0110} and its partner h_{1001}
    assert t[0, 1, 1, 0] == t[1, 0, 0, 1] == 0.3


def test_hamiltonian_identity_only():
    ints = fe.MolecularIntegrals(1.0, np.zeros((2, 2)), np.zeros((2,) * 4))
    H = fe.build_molecular_hamiltonian(ints)
    assert list(H) == [(1.0, (), ())]


def test_h2_hamiltonian_structure(h2):
    H = fe.build_molecular_hamiltonian(h2)
    assert H.is_hermitian()
    assert len(H) == 15
    # hermitian-conjugate pairs count once: 13 operator groups
    keys = set(H.terms)
    classes = {min(k, (k[1], k[0])) for k in keys}
    assert len(classes) == 13


def jw_ladder_matrix(p, M, create):
    op = fe.FermionOperatorSum(M, [(1.0, (p,) if create else (), () if create else (p,))])
    return fe.pauli_sum_to_matrix(fe.jordan_wigner(op))


def test_jw_single_creation():
    op = fe.FermionOperatorSum(1, [(1.0, (0,), ())])
    q = fe.jordan_wigner(op)
    assert q.terms == {"X": 0.5, "Y": -0.5j}


@pytest.mark.parametrize("M", [1, 2, 3, 4])
def test_car(M):
    a = [jw_ladder_matrix(p, M, False) for p in range(M)]
    ad = [jw_ladder_matrix(p, M, True) for p in range(M)]
    I = np.eye(2**M)
    for p in range(M):
        for q in range(M):
            assert np.allclose(a[p] @ ad[q] + ad[q] @ a[p], I * (p == q), atol=1e-12)
            assert np.allclose(a[p] @ a[q] + a[q] @ a[p], 0, atol=1e-12)


def test_number_operator_occupied_convention():
    op = fe.FermionOperatorSum(2, [(1.0, (0,), (0,))])
    q = fe.jordan_wigner(op)
    assert q.terms == {"II": 0.5, "ZI": -0.5}
    mat = fe.pauli_sum_to_matrix(q)
    # brute force: occupation basis with qubit 0 most significant
    for idx in range(4):
        assert mat[idx, idx] == (idx >> 1) & 1


def test_jw_real_coefficients(h2):
    q = fe.jordan_wigner(fe.build_molecular_hamiltonian(h2))
    assert all(isinstance(c, float) for c in q.terms.values())


def spin_orbital_integral(h2, p, q, r, s):
    h1, t = h2.spin_orbital_tensors()
    return t[p, q, r, s]


def test_h2_qubit_hamiltonian_coefficients(h2):
    q = fe.jordan_wigner(fe.build_molecular_hamiltonian(h2))
    assert len(q) == 15
    h1, t = h2.spin_orbital_tensors()
    h = lambda p, q_, r, s: t[p, q_, r, s]
    g = {
        1: h2.h_nuc + 0.5 * np.trace(h1)
        + 0.25 * (h(0, 1, 1, 0) + h(2, 3, 3, 2) + h(0, 3, 3, 0) + h(1, 2, 2, 1)
                  + (h(0, 2, 2, 0) - h(0, 2, 0, 2)) + (h(1, 3, 3, 1) - h(1, 3, 1, 3))),
        2: -0.5 * h1[0, 0] - 0.25 * (h(0, 1, 1, 0) + h(0, 3, 3, 0) + h(0, 2, 2, 0) - h(0, 2, 0, 2)),
        3: -0.5 * h1[2, 2] - 0.25 * (h(2, 3, 3, 2) + h(1, 2, 2, 1) + h(0, 2, 2, 0) - h(0, 2, 0, 2)),
        4: 0.25 * h(0, 1, 1, 0),
        5: 0.25 * (h(0, 2, 2, 0) - h(0, 2, 0, 2)),
        6: 0.25 * h(0, 3, 3, 0),
        7: 0.25 * h(2, 3, 3, 2),
        8: 0.25 * h(0, 3, 1, 2),
    }
    expected = {
        "IIII": g[1], "ZIII": g[2], "IZII": g[2], "IIZI": g[3], "IIIZ": g[3], "ZZII": g[4],
        "ZIZI": g[5], "IZIZ": g[5], "ZIIZ": g[6], "IZZI": g[6], "IIZZ": g[7],
        "XYYX": g[8], "YXXY": g[8], "XXYY": -g[8], "YYXX": -g[8],
    }
    assert set(q.terms) == set(expected)
    for w, c in expected.items():
        assert q.terms[w] == pytest.approx(c, abs=1e-12)
    assert q.coefficient("ZZII") == pytest.approx(0.25 * h(0, 1, 1, 0), abs=1e-14)


def test_h2_grouping(h2):
    q = fe.jordan_wigner(fe.build_molecular_hamiltonian(h2))
    groups = fe.group_pauli_sum(q)
    assert len(groups) == 8
    expected_words = [
        {"IIII"}, {"ZIII", "IZII"}, {"IIZI", "IIIZ"}, {"ZZII"}, {"ZIZI", "IZIZ"},
        {"ZIIZ", "IZZI"}, {"IIZZ"}, {"XYYX", "YXXY", "XXYY", "YYXX"},
    ]
    assert [set(g.words()) for g in groups] == expected_words
    signs = dict((w, s) for s, w in groups[7].members)
    # relative signs only; the overall sign sits in the group coefficient
    assert signs["XYYX"] == signs["YXXY"] == -signs["XXYY"] == -signs["YYXX"]
    assert np.allclose(
        fe.pauli_sum_to_matrix(fe.grouped_to_sum(groups, 4)), fe.pauli_sum_to_matrix(q), atol=1e-14
    )


def test_grouping_trivial_and_merge():
    s = fe.PauliSum(2, [(0.1, "ZI"), (0.2, "IZ"), (0.3, "XX")])
    assert [g.words() for g in fe.group_pauli_sum(s)] == [["ZI"], ["IZ"], ["XX"]]
    dup = fe.PauliSum(1, [(0.5, "Z"), (0.5, "Z")])
    assert len(dup) == 1 and dup.terms["Z"] == 1.0


def test_pauli_matrix_examples():
    assert np.array_equal(fe.pauli_sum_to_matrix(fe.PauliSum(1, [(1.0, "Z")])), np.diag([1, -1]))
    m = fe.pauli_sum_to_matrix(fe.PauliSum(2, [(1.0, "ZI"), (1.0, "IZ")]))
    assert np.array_equal(m, np.diag([2, 0, 0, -2]))
    with pytest.raises(DimensionError):
        fe.pauli_sum_to_matrix(fe.PauliSum(13, [(1.0, "Z" * 13)]))


def test_word_matrix_against_kron(rng):
    from qumodechem.fockcore import kron
    for _ in range(20):
        w = "".join(rng.choice(list("IXYZ"), size=4))
        ref = kron(*(fe.pauli_matrix(c) for c in w))
        assert np.array_equal(fe.word_matrix(w), ref)


def test_pauli_product_algebra(rng):
    a = fe.PauliSum(3, [(0.3, "XYZ"), (-1.1j, "ZZI")])
    b = fe.PauliSum(3, [(0.7, "YIX"), (2.0, "III")])
    lhs = fe.pauli_sum_to_matrix(a * b)
    assert np.allclose(lhs, fe.pauli_sum_to_matrix(a) @ fe.pauli_sum_to_matrix(b))


def test_exact_ground_state():
    e, v = fe.exact_ground_state(np.diag([3.0, 1.0, 2.0]))
    assert e == 1.0 and abs(abs(v[1]) - 1) < 1e-15
    with pytest.raises(fe.NotHermitianError):
        fe.exact_ground_state(np.array([[0, 1], [0, 0]]))
    e, v = fe.exact_ground_state(np.diag([0.0, 0.0, 1.0]))
    assert e == 0.0 and np.isclose(np.linalg.norm(v[:2]), 1)


def test_h2_fci_against_reference(data_dir):
    ref = reference_fci(data_dir, "h2")
    for r, e_ref in ref.items():
        ints = fe.load_fcidump_file(data_dir / f"h2_{r:.4f}.fcidump")
        q = fe.jordan_wigner(fe.build_molecular_hamiltonian(ints))
        e, _ = fe.exact_ground_state(fe.pauli_sum_to_matrix(q))
        assert e == pytest.approx(e_ref, abs=1e-10)
    assert ref[0.7414] == pytest.approx(-1.1373, abs=1e-4)


def test_sector_spectra_agree(h2):
    H = fe.build_molecular_hamiltonian(h2)
    full = fe.pauli_sum_to_matrix(fe.jordan_wigner(H))
    for N in range(5):
        det, basis = fe.determinant_matrix(H, N)
        idx = [fe.determinant_to_index(d, 4) for d in basis]
        block = full[np.ix_(idx, idx)]
        assert np.allclose(block, det, atol=1e-12)
        assert np.allclose(np.linalg.eigvalsh(block), np.linalg.eigvalsh(det), atol=1e-12)


def test_h4_determinant_sector(data_dir):
    ref = reference_fci(data_dir, "h4")
    ints = fe.load_fcidump_file(data_dir / "h4_1.0000.fcidump")
    det, _ = fe.determinant_matrix(fe.build_molecular_hamiltonian(ints), 4)
    assert np.linalg.eigvalsh(det)[0] == pytest.approx(ref[1.0], abs=1e-10)


def test_symmetry_operators():
    n1, _ = fe.symmetry_operators(2)
    one_electron = np.zeros(4)
    one_electron[0b10] = 1.0
    m = fe.pauli_sum_to_matrix(n1)
    assert one_electron @ m @ one_electron == pytest.approx(1.0)
    n4, s2 = fe.symmetry_operators(4)
    occ = fe.determinant_to_index((0, 1), 4)
    assert fe.pauli_sum_to_matrix(n4)[occ, occ] == pytest.approx(2.0)
    vec = np.zeros(16)
    vec[occ] = 1
    assert vec @ fe.pauli_sum_to_matrix(s2) @ vec == pytest.approx(0.0, abs=1e-14)
    # triplet component: two alpha electrons give S(S+1) = 2
    trip = fe.determinant_to_index((0, 2), 4)
    assert fe.pauli_sum_to_matrix(s2)[trip, trip].real == pytest.approx(2.0)
    with pytest.raises(ValueError):
        fe.symmetry_operators(3)


def test_fermion_sum_canonical_sign():
    op = fe.FermionOperatorSum(3, [(1.0, (0, 1), (1, 0))])
    assert op.terms == {((1, 0), (1, 0)): -1.0}
    assert len(fe.FermionOperatorSum(3, [(1.0, (1, 1), ())])) == 0
    with pytest.raises(DimensionError):
        fe.FermionOperatorSum(2, [(1.0, (2,), ())])
