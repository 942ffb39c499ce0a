from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oddlab import builtins as B
from oddlab.errors import ContractError, NoOracleError, ResolutionError
from oddlab.index import (compress, example6_verify, fredholm_index_in_subspaces, full_space, gladk_check,
                          half_index_check, oba_check, summand_subspace, symbol_index_s1,
                          toeplitz_formula_check, winding_number)
from oddlab.lattice import (LatticeOperator, ModeLattice, assemble_multiplier, assemble_variable_coeff, compose,
                            constant_matrix, direct_sum, identity)
from oddlab.spectral import d_via_eta, d_via_relative_index, hamiltonian_from_D
from oddlab.subspaces import (finite_rank_extend, nonnegative_spectral_subspace, transform_subspace,
                              with_dimension)
from oddlab.symbols import PolySymbol

PHI = np.linspace(0, 2 * np.pi, 256, endpoint=False)


def test_winding_examples():
    assert winding_number(np.exp(3j * PHI)) == 3
    assert winding_number(np.full(64, 2.0 + 1j)) == 0
    assert winding_number((2 + np.cos(PHI)) * np.exp(-1j * PHI)) == -1


def test_winding_refuses_aliasing_and_zeros():
    coarse = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    with pytest.raises(ResolutionError):
        winding_number(np.exp(5j * coarse))
    with pytest.raises(ResolutionError):
        winding_number(np.exp(1j * PHI) - 1)
    with pytest.raises(ResolutionError):
        winding_number(np.array([1.0, 1j]))


@settings(max_examples=30, deadline=None)
@given(st.integers(-6, 6), st.floats(0.1, 0.9))
def test_winding_of_perturbed_powers(n, eps):
    z = np.exp(1j * n * PHI) * (1 + eps * np.cos(PHI) / 2)
    assert winding_number(z) == n


@pytest.mark.parametrize("n", [1, 2, 3])
def test_toeplitz_shift_index(n):
    for K in (4, 5):
        H = B.hardy_space(K)
        r = toeplitz_formula_check(B.fourier_shift(K, n), H, H)
        assert r.lhs == -n and r.passed
        assert r.rhs_terms["relative_index"] == 0


def test_toeplitz_identity_into_extension():
    H = B.hardy_space(4)
    r = toeplitz_formula_check(identity(H.ambient), H, finite_rank_extend(H, 2))
    assert r.lhs == -2 and r.passed


def test_toeplitz_logarithmic_property():
    # ind(ab) = ind(a) + ind(b) for shift chains
    K = 6
    H = B.hardy_space(K)
    # only non-negative shifts preserve the Hardy space
    for a, b in [(1, 1), (1, 2), (2, 1), (0, 3)]:
        ia = fredholm_index_in_subspaces(B.fourier_shift(K, a), H, H)
        ib = fredholm_index_in_subspaces(B.fourier_shift(K, b), H, H)
        iab = fredholm_index_in_subspaces(compose(B.fourier_shift(K, a), B.fourier_shift(K, b)), H, H)
        assert iab == ia + ib == -(a + b)


def test_symbol_index_of_shift_symbol():
    sym = B.fourier_shift(4, 2).symbol
    assert symbol_index_s1(sym, B.hardy_symbol(sym.grid)) == -2


def test_no_oracle_for_variable_symbol_on_torus():
    lat = ModeLattice(2, 2)
    D = assemble_variable_coeff(lat, [({(1, 0): 1.0}, 1.0)])
    L = full_space(lat)
    with pytest.raises(NoOracleError):
        toeplitz_formula_check(D, L, L)


def test_compress_rejects_non_invariant_operator():
    H = B.hardy_space(3)
    with pytest.raises(ContractError):
        compress(B.fourier_shift(3, -1), H, H)


def test_symbol_margin_warning():
    H = B.hardy_space(3)
    Z = assemble_multiplier(H.ambient, PolySymbol({(0,): 0.0}), order=0)
    with pytest.warns(RuntimeWarning, match="degenerate"):
        c = compress(Z, H, H)
    assert c.symbol_margin == 0.0


def test_stability_under_small_perturbation():
    K = 5
    H = B.hardy_space(K)
    D = B.fourier_shift(K, 1)
    base = compress(D, H, H)
    rng = np.random.default_rng(7)
    E = rng.standard_normal(D.shape) + 1j * rng.standard_normal(D.shape)
    P = H.projection.entries
    E = P @ E @ P  # keep the invariance contract
    E *= 1e-3 * base.symbol_margin / np.linalg.norm(E, 2)
    Dp = LatticeOperator(D.lattice_in, D.lattice_out, D.entries + E, bandwidth=D.bandwidth)
    assert compress(Dp, H, H).index == base.index


def _oba_setup(K=1):
    A = B.dirac(K)
    L = with_dimension(B.dirac_positive(K), d_via_eta(A))
    return L, B.sigma3(L.ambient)


def test_oba_identity_and_sigma3():
    L, s3 = _oba_setup()
    Id = identity(L.ambient)
    r = oba_check(Id, L, L, Id)
    assert r.lhs == 0 and r.passed
    S = transform_subspace(s3, L)
    S = with_dimension(S, d_via_relative_index(S, s3))
    r = oba_check(s3, L, S, s3)
    assert r.lhs == 0 and r.passed
    assert r.rhs_terms == {"half_index_tilde": 0, "d_L1": 1, "d_L2": -1}


def test_oba_into_extension():
    L, s3 = _oba_setup(2)
    E = finite_rank_extend(L, 1)
    E = with_dimension(E, d_via_relative_index(E, s3))
    Id = identity(L.ambient)
    r = oba_check(Id, L, E, Id)
    assert r.lhs == -1 and r.passed


def test_oba_requires_witness_and_even_base():
    L = B.dirac_positive(1)
    Id = identity(L.ambient)
    with pytest.raises(ContractError):
        oba_check(Id, L, L, Id)
    H = B.hardy_space(2)
    with pytest.raises(ContractError):
        oba_check(identity(H.ambient), H, H, identity(H.ambient))


def _cr(K):
    return B.cauchy_riemann(K)


def _gladk_data(D, extend=0):
    A = hamiltonian_from_D(D)
    rE = D.lattice_in.fiber_rank
    L = with_dimension(nonnegative_spectral_subspace(A), d_via_eta(A))
    if extend:
        U = constant_matrix(L.ambient, np.diag([1.0] * rE + [-1.0] * rE))
        L = finite_rank_extend(L, extend)
        L = with_dimension(L, d_via_relative_index(L, U))
    F = summand_subspace(L.ambient, rE, 2 * rE, "F")
    return F.projection, L, F, direct_sum(D, identity(D.lattice_out))


@pytest.mark.parametrize("case,want", [("example", 1), ("doubled", 2), ("extended", 2)])
def test_gladk_cases(case, want):
    D = _cr(2)
    if case == "doubled":
        D = direct_sum(D, D)
    P0, L, F, Dt = _gladk_data(D, extend=1 if case == "extended" else 0)
    r = gladk_check(P0, L, Dt, target=F)
    assert r.lhs == want
    assert r.passed, r


def test_half_index_cases():
    K = 2
    L = B.dirac_positive(K)
    lat = L.ambient
    i2 = np.eye(2)
    bump = assemble_multiplier(lat, PolySymbol({(4, 0): i2, (2, 0): -2 * i2, (0, 0): i2, (0, 4): i2}))
    Dir = B.dirac(K)
    for op, want in [(identity(lat), 0), (bump, 0), (compose(Dir, Dir) - L.projection.with_(order=0), None)]:
        r = half_index_check(op, L)
        assert r.passed, r
        if want is not None:
            assert r.lhs == want


def test_half_index_rejects_odd_operator():
    L = B.dirac_positive(1)
    with pytest.raises(ContractError):
        half_index_check(B.dirac(1), L)


@pytest.mark.parametrize("K", [2, 3, 4])
def test_example6_on_cauchy_riemann(K):
    r = example6_verify(_cr(K))
    assert r.passed and not r.failed
    assert r.lhs == 1
    assert r.rhs_terms == {"half_index_tilde": 0, "eta": 1}
    assert r.residuals["kernel_angle"] <= 1e-8


def test_example6_invertible_and_zero():
    r = example6_verify(B.cauchy_riemann(3, 5.0))
    assert r.passed and r.lhs == 0 and r.rhs_terms["eta"] == 0
    lat = ModeLattice(2, 0, 1)
    zero = assemble_multiplier(lat, lambda k: [[0.0]])
    r = example6_verify(zero)
    assert r.passed and r.lhs == 1


def test_report_json_is_exact():
    H = B.hardy_space(3)
    js = toeplitz_formula_check(B.fourier_shift(3, 1), H, H).to_json()
    assert js["lhs"] == -1
    assert js["rhs_terms"]["symbol_index"] == {"num": -1, "log2_den": 0}
    assert js["pass"] is True


def test_report_fails_when_sides_differ():
    r = example6_verify(_cr(2))
    r.rhs_terms["eta"] = Fraction(3, 2)
    assert not r.passed
