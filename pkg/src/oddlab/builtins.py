"""Ready-made operators, symbols and subspaces used by tests and experiments."""
from __future__ import annotations

import numpy as np

from .lattice import (LatticeOperator, ModeLattice, assemble_multiplier, assemble_variable_coeff,
                      constant_matrix)
from .subspaces import SpectralSubspace, nonnegative_spectral_subspace
from .symbols import PolySymbol, SymbolSample, circle_grid, default_grid, torus_grid

SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=complex)


def dirac_symbol() -> PolySymbol:
    """``k1 sigma_1 + k2 sigma_2`` on T^2."""
    return PolySymbol({(1, 0): SIGMA_1, (0, 1): SIGMA_2})


def cauchy_riemann_symbol() -> PolySymbol:
    """Scalar ``k1 + i k2``."""
    return PolySymbol({(1, 0): 1.0, (0, 1): 1j})


def circle_derivative_symbol() -> PolySymbol:
    """Symbol ``k`` of ``-i d/dphi``."""
    return PolySymbol({(1,): 1.0})


def dirac(K: int, sign: int = 1) -> LatticeOperator:
    lat = ModeLattice(2, K, 2)
    return assemble_multiplier(lat, sign * dirac_symbol(), label="Dirac" if sign > 0 else "-Dirac")


def cauchy_riemann(K: int, shift: complex = 0.0) -> LatticeOperator:
    lat = ModeLattice(2, K, 1)
    poly = cauchy_riemann_symbol()
    if shift:
        poly = poly + PolySymbol({(0, 0): shift})
    return assemble_multiplier(lat, poly, label="dbar" if not shift else f"dbar+{shift}")


def circle_derivative(K: int) -> LatticeOperator:
    return assemble_multiplier(ModeLattice(1, K, 1), circle_derivative_symbol(), label="-id/dphi")


def circle_laplacian_plus_one(K: int) -> LatticeOperator:
    return assemble_multiplier(ModeLattice(1, K, 1), PolySymbol({(2,): 1.0, (0,): 1.0}),
                               label="Delta+1")


def sigma3(lattice: ModeLattice) -> LatticeOperator:
    """Constant ``sigma_3`` on each fiber copy (rank must be even)."""
    r = lattice.fiber_rank
    return constant_matrix(lattice, np.kron(np.eye(r // 2), SIGMA_3), label="sigma3")


def hardy_space(K: int) -> SpectralSubspace:
    """Truncated Hardy space: the nonnegative spectral subspace of ``-i d/dphi``."""
    return nonnegative_spectral_subspace(circle_derivative(K), label="Hardy", symbol_key="hardy")


def dirac_positive(K: int) -> SpectralSubspace:
    return nonnegative_spectral_subspace(dirac(K), label="L+(Dirac)", symbol_key="dirac+")


def fourier_shift(K: int, n: int) -> LatticeOperator:
    """Multiplication by ``e^{i n phi}`` on S^1 (bandwidth ``|n|``)."""
    return assemble_variable_coeff(ModeLattice(1, K, 1), [({n: 1.0}, 1.0)], label=f"e^{{i{n}phi}}")


def pauli_symbol(grid=None) -> SymbolSample:
    """``xi_1 sigma_1 + xi_2 sigma_2`` on the unit codirections."""
    grid = torus_grid() if grid is None else grid
    return dirac_symbol().principal(grid)


def hardy_symbol(grid=None) -> SymbolSample:
    """Projection symbol of the Hardy space: 1 at xi = +1, 0 at xi = -1."""
    grid = circle_grid() if grid is None else grid
    return SymbolSample.from_function(grid, lambda x, xi: [[1.0 if xi[0] > 0 else 0.0]])


def flat_frame(dim: int, n: int) -> np.ndarray:
    """Standard inclusion of R^dim into R^n."""
    return np.eye(dim, n)
