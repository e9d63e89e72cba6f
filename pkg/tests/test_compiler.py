import json
import warnings

import numpy as np
import pytest

from qumodechem import compiler as cp
from qumodechem import gates as gt
from qumodechem.fermion import word_matrix
from qumodechem.fockcore import kron
from conftest import random_unitary


def _fd_grad(fun, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


@pytest.fixture
def snap_obj(rng):
    return cp.SnapObjective(random_unitary(rng, 4), 3)


@pytest.fixture
def ecd_obj(rng):
    return cp.EcdLcuObjective(word_matrix("XZ"), 2, 3)


def test_snap_gradient_matches_finite_difference(snap_obj, rng):
    x = rng.normal(size=snap_obj.n_params)
    f, g = snap_obj.value_and_grad(x)
    assert f == pytest.approx(cp.loss_snap(snap_obj.unpack(x), snap_obj.W), abs=1e-14)
    assert np.allclose(g, _fd_grad(lambda y: snap_obj.value_and_grad(y)[0], x), atol=1e-8)


def test_ecd_gradient_matches_finite_difference(ecd_obj, rng):
    x = rng.normal(size=ecd_obj.n_params)
    f, g = ecd_obj.value_and_grad(x)
    assert f == pytest.approx(cp.loss_ecd(ecd_obj.unpack(x), ecd_obj.W), abs=1e-14)
    assert np.allclose(g, _fd_grad(lambda y: ecd_obj.value_and_grad(y)[0], x), atol=1e-8)


@pytest.mark.parametrize("name", ["snap_obj", "ecd_obj"])
def test_jacobian_matches_residual_difference(name, request, rng):
    obj = request.getfixturevalue(name)
    x = rng.normal(size=obj.n_params)
    r, J = obj.residual_and_jacobian(x)
    h = 1e-6
    for i in rng.choice(obj.n_params, 5, replace=False):
        e = np.zeros_like(x)
        e[i] = h
        fd = -(obj.residual_and_jacobian(x + e)[0] - obj.residual_and_jacobian(x - e)[0]) / (2 * h)
        assert np.allclose(J[i], fd, atol=1e-8)


def test_snap_chain_identities():
    assert np.allclose(cp.snap_chain_unitary(cp.SnapChain.identity(0, 8)), np.eye(8))
    assert np.allclose(cp.snap_chain_unitary(cp.SnapChain.identity(5, 8)), np.eye(8))
    theta = np.linspace(0, 1, 4)
    chain = cp.SnapChain([0.0], [theta], 4)
    assert np.allclose(cp.snap_chain_unitary(chain), np.diag(np.exp(1j * theta)))


def test_ecd_chain_of_zeros_is_qubit_flip():
    chain = cp.EcdChain([0.0], [0.0], [0.0], 4)
    assert np.allclose(cp.ecd_chain_unitary(chain), kron(gt.X, np.eye(4)))
    assert np.allclose(cp.ecd_chain_unitary(cp.EcdChain([], [], [], 4)), np.eye(8))


def test_lcu_linearity_and_cancellation(rng):
    c1 = cp.EcdChain(rng.normal(size=2) + 1j * rng.normal(size=2), rng.normal(size=2), rng.normal(size=2), 4)
    c2 = cp.EcdChain(rng.normal(size=2), rng.normal(size=2), rng.normal(size=2), 4)
    U1, U2 = cp.ecd_chain_unitary(c1), cp.ecd_chain_unitary(c2)
    d = cp.LcuDecomposition([0.3, -1.1], [c1, c2])
    assert np.allclose(cp.lcu_matrix(d), 0.3 * U1 - 1.1 * U2, atol=1e-14)
    assert np.allclose(cp.lcu_matrix(cp.LcuDecomposition([1.0, -1.0], [c1, c1])), 0, atol=1e-15)


def test_loss_zero_on_exact_representations(rng):
    chain = cp.SnapChain(rng.normal(size=3), rng.normal(size=(3, 4)), 4)
    assert cp.loss_snap(chain, cp.snap_chain_unitary(chain)) == 0.0
    c = cp.EcdChain([0.2 + 0.1j, -0.4], [1.0, 0.5], [0.3, -0.2], 4)
    d = cp.LcuDecomposition([0.7], [c])
    assert cp.loss_ecd(d, 0.7 * cp.ecd_chain_unitary(c)[:4, :4]) < 1e-30


def test_dimension_checks():
    with pytest.raises(cp.DimensionError):
        cp.loss_snap(cp.SnapChain.identity(1, 4), np.eye(8))
    with pytest.raises(cp.DimensionError):
        cp.compile_target(np.eye(3))
    with pytest.raises(cp.DimensionError):
        cp.LcuDecomposition([1.0, 2.0], [cp.EcdChain([0.1], [0.0], [0.0], 4)])


def test_identity_target_shortcut():
    res = cp.compile_target(np.eye(16), "snap", 16)
    assert res.final_loss == 0.0 and res.iterations == 0 and res.converged


def test_compile_single_qubit_words_both_methods():
    for w in ["Z", "X"]:
        res = cp.compile_target(word_matrix(w), "snap", 4, restarts=5, seed=1)
        assert res.converged and res.final_loss <= 1e-8
    res = cp.compile_target(word_matrix("Y"), "ecd_lcu", 2, 2, restarts=5, seed=1)
    assert res.converged and res.final_loss <= 1e-8
    assert res.final_loss == pytest.approx(cp.loss_ecd(res.decomposition, word_matrix("Y")), abs=1e-15)


def test_compile_is_deterministic():
    a = cp.compile_target(word_matrix("ZX"), "snap", 8, restarts=2, seed=4)
    b = cp.compile_target(word_matrix("ZX"), "snap", 8, restarts=2, seed=4)
    assert a.final_loss == b.final_loss
    assert np.array_equal(a.decomposition.theta, b.decomposition.theta)


def test_non_convergence_is_flagged():
    with pytest.warns(cp.NotConvergedWarning):
        res = cp.compile_target(word_matrix("XY"), "snap", 1, restarts=1, max_iter=5)
    assert not res.converged and res.final_loss > res.threshold


def test_compile_ziii_at_full_size():
    res = cp.compile_target(word_matrix("ZIII"), "snap", 16, restarts=10, seed=0)
    assert res.final_loss <= 1e-8
    assert cp.loss_snap(res.decomposition, word_matrix("ZIII")) == pytest.approx(res.final_loss, abs=1e-15)


@pytest.fixture
def small_library():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", cp.NotConvergedWarning)
        return cp.build_pauli_library(1, "snap", depth=4, restarts=3)


def test_library_roundtrip(small_library, tmp_path):
    lib = small_library
    assert sorted(lib.entries) == ["X", "Y", "Z"]
    meta = lib.metadata()
    assert meta["endianness"] == "qubit0-msb" and meta["L"] == [2] and meta["N_d"] == 4
    path = tmp_path / "lib.json"
    cp.save_library(lib, path)
    back = cp.load_library(path)
    for w in "XYZ":
        assert np.allclose(back.unitary(w), lib.unitary(w))
        assert cp.verify_entry(back, w) == pytest.approx(lib.entries[w]["loss"], abs=1e-12)
    assert np.allclose(back.unitary("I"), np.eye(2))
    assert "I" in back and "II" in back and "XX" not in back
    cp.save_library(back, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_text() == path.read_text()


def test_library_rejects_tampering(small_library, tmp_path):
    path = tmp_path / "lib.json"
    cp.save_library(small_library, path)
    raw = json.loads(path.read_text())
    raw["entries"]["X"]["loss"] = 0.5
    path.write_text(json.dumps(raw))
    with pytest.raises(cp.LibraryError, match="checksum"):
        cp.load_library(path)
    raw = json.loads(cp.ParamLibrary.to_json(small_library))
    raw["metadata"]["endianness"] = "qubit0-lsb"
    path.write_text(json.dumps(raw))
    with pytest.raises(cp.LibraryError, match="endianness"):
        cp.load_library(path)


def test_library_detects_wrong_stored_loss(small_library, tmp_path):
    raw = json.loads(small_library.to_json())
    raw["entries"]["Z"]["loss"] += 1e-6
    raw["metadata"]["checksum"] = cp._checksum(raw["entries"])
    path = tmp_path / "lib.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(cp.LibraryError, match="recomputation"):
        cp.load_library(path, verify_sample=3)


def test_decomposition_json_roundtrip(rng):
    c = cp.EcdChain(rng.normal(size=2) + 1j * rng.normal(size=2), rng.normal(size=2), rng.normal(size=2), 4)
    d = cp.LcuDecomposition([0.4], [c])
    back = cp.decomposition_from_json(json.loads(json.dumps(cp.decomposition_to_json(d))), 4)
    assert np.allclose(cp.lcu_matrix(back), cp.lcu_matrix(d), atol=0)


def test_all_pauli_words():
    assert len(cp.all_pauli_words(2)) == 15
    assert len(cp.all_pauli_words(2, include_identity=True)) == 16
