from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oddlab import builtins as B
from oddlab.errors import ContractError, DegeneracyError
from oddlab.exact import DimensionResult, dyadic_from_float, dyadic_from_json, dyadic_json, is_dyadic
from oddlab.lattice import (LatticeOperator, ModeLattice, assemble_multiplier, constant_matrix, direct_sum,
                            kernel_dim)
from oddlab.spectral import (build_A_from_projection, d_via_eta, d_via_relative_index, eig_hermitian,
                             eigen_projection, eta_invariant, hamiltonian_from_D, positive_projection_formula)
from oddlab.subspaces import (complement, finite_rank_extend, nonnegative_spectral_subspace,
                              relative_index, transform_subspace)


def _op(m):
    m = np.asarray(m, dtype=complex)
    lat = ModeLattice(1, 0, m.shape[0])
    return LatticeOperator(lat, lat, m)


def test_eig_examples():
    s, v = eig_hermitian(_op(np.diag([3.0, -1.0, 0.0])))
    assert s.eigenvalues.tolist() == [-1.0, 0.0, 3.0] and s.kernel_dim == 1
    s, _ = eig_hermitian(B.circle_derivative(2))
    assert np.allclose(s.eigenvalues, [-2, -1, 0, 1, 2])


def test_dirac_spectrum_by_enumeration():
    # oracle: eigenvalues of k1 s1 + k2 s2 are +-|k| for each of the 9 modes
    lat = ModeLattice(2, 1, 2)
    expect = sorted(x for k in lat.modes for x in (np.hypot(*k), -np.hypot(*k)))
    s, v = eig_hermitian(B.dirac(1))
    assert np.allclose(s.eigenvalues, expect)
    counts = dict((round(w, 6), c) for w, c in s.multiplicities)
    assert counts == {round(-np.sqrt(2), 6): 4, -1.0: 4, 0.0: 2, 1.0: 4, round(np.sqrt(2), 6): 4}
    assert sum(counts.values()) == 18
    assert np.allclose(v.conj().T @ v, np.eye(18), atol=1e-10)


def test_eig_rejects_non_hermitian():
    with pytest.raises(ContractError):
        eig_hermitian(_op([[0.0, 1.0], [0.0, 0.0]]))


@pytest.mark.parametrize("K", [1, 2, 3, 4])
def test_dirac_eta_is_one(K):
    e = eta_invariant(B.dirac(K))
    assert e.value == 1 and e.kernel_contribution == 1 and e.exactness_flag
    assert e.unpaired == ()


def test_eta_of_positive_diagonal():
    e = eta_invariant(_op(np.diag([1.0, 2.0, 3.0])))
    assert e.value == Fraction(3, 2)
    assert e.asymmetry_sum == 3
    # asymmetry sits at the spectral edge: not certified as exact
    assert not e.exactness_flag


def test_eta_finite_asymmetry_in_interior_is_exact():
    w = np.concatenate([np.arange(1, 9), -np.arange(1, 9), [0.5]])
    e = eta_invariant(_op(np.diag(w)))
    assert e.value == Fraction(1, 2) and e.exactness_flag and e.symmetric_pairs == 8


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
def test_eta_identity_for_hamiltonians(seed, K):
    rng = np.random.default_rng(seed)
    shift = complex(rng.choice([0.0, 0.5, 1.0, 5.0]))
    D = B.cauchy_riemann(K, shift) if shift else B.cauchy_riemann(K)
    A = hamiltonian_from_D(D)
    ind = kernel_dim(D) - kernel_dim(D.H)
    assert eta_invariant(A).value == Fraction(-ind, 2) + kernel_dim(D)


def test_eta_identity_with_kernel():
    # a nilpotent shift: square, so index 0, but with a kernel that the eta identity must count
    lat = ModeLattice(1, 3)
    D = LatticeOperator(lat, lat, np.eye(7, k=-1))
    A = hamiltonian_from_D(D)
    ind = kernel_dim(D) - kernel_dim(D.H)
    assert ind == 0
    assert eta_invariant(A).value == Fraction(-ind, 2) + kernel_dim(D)


def test_positive_projection_formula_examples():
    p = positive_projection_formula(_op(np.diag([2.0, -3.0])))
    assert np.allclose(p.entries, np.diag([1.0, 0.0]))
    A = B.dirac(2) + 0.1 * constant_matrix(ModeLattice(2, 2, 2), np.eye(2))
    assert np.linalg.norm(positive_projection_formula(A).entries - eigen_projection(A), 2) <= 1e-8
    assert np.allclose(positive_projection_formula(5 * A).entries, positive_projection_formula(A).entries)
    with pytest.raises(DegeneracyError):
        positive_projection_formula(B.dirac(1))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_positive_projection_formula_random(seed):
    rng = np.random.default_rng(seed)
    n = 12
    q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    w = rng.uniform(0.1, 10, n) * rng.choice([-1, 1], n)
    A = _op((q * w) @ q.conj().T)
    assert np.linalg.norm(positive_projection_formula(A).entries - eigen_projection(A), 2) <= 1e-8


def test_build_A_examples():
    H = B.hardy_space(4)
    lat = H.ambient
    Id = constant_matrix(lat, [[1.0]])
    A = build_A_from_projection(H.projection, Id)
    assert np.allclose(A.entries, 2 * H.projection.entries - np.eye(lat.size))
    A = build_A_from_projection(H.projection, B.circle_laplacian_plus_one(4))
    LA = nonnegative_spectral_subspace(A)
    assert relative_index(LA, H, declared_equal=True).value == 0
    assert np.allclose(LA.projection.entries, H.projection.entries)
    v = np.array([1.0, 1.0]) / np.sqrt(2)
    A = build_A_from_projection(_op(np.outer(v, v)), _op(np.diag([1.0, 4.0])))
    w = np.linalg.eigvalsh(A.entries)
    assert w[0] < 0 < w[1]
    with pytest.raises(ContractError):
        build_A_from_projection(_op(np.diag([1.0, 0.0])), _op(np.diag([1.0, -1.0])))


def test_hamiltonian_examples():
    lat = ModeLattice(2, 1, 1)
    zero = assemble_multiplier(lat, lambda k: [[0.0]])
    assert np.count_nonzero(hamiltonian_from_D(zero).entries) == 0
    A = hamiltonian_from_D(B.cauchy_riemann(1))
    assert kernel_dim(A) == 2
    rng = np.random.default_rng(0)
    D = LatticeOperator(lat, lat, rng.standard_normal((9, 9)))
    s = np.linalg.svd(D.entries, compute_uv=False)
    assert np.allclose(np.linalg.eigvalsh(hamiltonian_from_D(D).entries), np.sort(np.concatenate([s, -s])))


def test_d_via_eta_examples():
    assert d_via_eta(B.dirac(2)).value == 1
    assert d_via_eta(B.dirac(2, sign=-1)).value == 1
    assert d_via_eta(direct_sum(B.dirac(2), B.dirac(2))).value == 2


def test_d_via_eta_refusals():
    with pytest.raises(ContractError):
        d_via_eta(B.circle_laplacian_plus_one(2))  # even symbol
    A = _op(np.diag([1.0, 2.0, 3.0]))
    with pytest.raises(ContractError):
        d_via_eta(A)  # no symbol


@pytest.mark.parametrize("K", [1, 2, 3, 4])
def test_d_routes_agree_on_dirac(K):
    L = B.dirac_positive(K)
    d1 = d_via_eta(B.dirac(K))
    d2 = d_via_relative_index(L, B.sigma3(L.ambient))
    assert d1.value == d2.value == 1
    assert d1.route == "eta" and d2.route == "relative-index"


def test_d_via_relative_index_conjugated_and_extended():
    L = B.dirac_positive(2)
    c = np.array([[2.0, 1.0], [0.5, 1.5]])
    C = constant_matrix(L.ambient, c)
    W = constant_matrix(L.ambient, c @ B.SIGMA_3 @ np.linalg.inv(c))
    assert d_via_relative_index(transform_subspace(C, L), W).value == 1
    s3 = B.sigma3(L.ambient)
    assert d_via_relative_index(finite_rank_extend(L, 1), s3).value == 2
    assert d_via_relative_index(complement(L), s3).value == -1


def test_d_via_relative_index_with_copies():
    L = B.dirac_positive(1)
    U = constant_matrix(L.ambient.with_fiber(4), np.kron(np.eye(2), B.SIGMA_3))
    d = d_via_relative_index(L, U, N=1)
    assert d.value == 1


def test_d_via_relative_index_refusals():
    L = B.dirac_positive(1)
    with pytest.raises(ContractError):
        d_via_relative_index(L, B.dirac(1))  # odd symbol
    with pytest.raises(ContractError):
        d_via_relative_index(L, constant_matrix(L.ambient, np.eye(2)))  # maps L to itself


def test_dyadic_helpers():
    assert is_dyadic(Fraction(3, 8)) and not is_dyadic(Fraction(1, 3))
    assert dyadic_from_float(0.375) == Fraction(3, 8)
    assert dyadic_json(Fraction(-3, 4)) == {"num": -3, "log2_den": 2}
    assert dyadic_from_json({"num": 5, "log2_den": 1}) == Fraction(5, 2)
    with pytest.raises(ContractError):
        DimensionResult(Fraction(1, 3), "eta")
    with pytest.raises(ContractError):
        dyadic_from_float(1 / 3, tol=1e-12, max_log2_den=8)
