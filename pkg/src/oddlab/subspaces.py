"""Subspaces as images of projections, and their relative index.

A :class:`SpectralSubspace` carries a projection operator, an optional
projection-valued principal symbol, and a ``symbol_key`` naming its declared
symbol.  Two subspaces are comparable (have equal symbols) when their keys
agree; finite-rank modifications keep the key and append to ``provenance``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import CapacityError, ContractError, NotComparableError, ShapeError, SingularOperatorError
from .exact import DimensionResult
from .lattice import LatticeOperator, ModeLattice, fiber_block, identity, kernel_dim
from .symbols import SymbolSample, odd_projection_check, positive_symbol_projection

__all__ = [
    "SpectralSubspace",
    "RelativeIndex",
    "SwapOperator",
    "make_subspace",
    "nonnegative_spectral_subspace",
    "finite_rank_extend",
    "complement",
    "transform_subspace",
    "stack_copies",
    "relative_index",
    "swap_operator",
    "range_basis",
    "with_dimension",
]

CONSTRUCTION_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralSubspace:
    ambient: ModeLattice
    projection: LatticeOperator
    symbol: SymbolSample | None = None
    symbol_key: str = ""
    provenance: tuple = ()
    orthogonal: bool = False
    label: str = ""
    dimension: DimensionResult | None = None
    tol: float = CONSTRUCTION_TOL
    _complement_of: "SpectralSubspace | None" = field(default=None, repr=False)

    def __post_init__(self):
        p = self.projection
        if p.lattice_in != self.ambient or p.lattice_out != self.ambient:
            raise ShapeError("projection does not act on the ambient lattice")
        m = p.entries
        scale = max(1.0, float(np.linalg.norm(m, 2)))
        if np.linalg.norm(m @ m - m, 2) > self.tol * scale:
            raise ContractError("projection is not idempotent to construction tolerance")
        if self.orthogonal and np.linalg.norm(m - m.conj().T, 2) > self.tol * scale:
            raise ContractError("orthogonal flag set on a non-Hermitian projection")

    @property
    def trace(self) -> float:
        return float(np.trace(self.projection.entries).real)

    @property
    def rank(self) -> int:
        return int(round(self.trace))


def make_subspace(projection: LatticeOperator, symbol=None, symbol_key="", label="",
                  provenance=(), tol=CONSTRUCTION_TOL) -> SpectralSubspace:
    m = projection.entries
    orth = bool(np.linalg.norm(m - m.conj().T, 2) <= tol * max(1.0, np.linalg.norm(m, 2)))
    return SpectralSubspace(projection.lattice_in, projection, symbol, symbol_key,
                            tuple(provenance) or (label,), orth, label, None, tol)


def with_dimension(L: SpectralSubspace, d: DimensionResult) -> SpectralSubspace:
    return replace(L, dimension=d)


def range_basis(P, rank_tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of the range of a projection (SVD-thresholded)."""
    m = P.entries if isinstance(P, LatticeOperator) else np.asarray(P)
    if not m.size:
        return np.zeros((m.shape[0], 0), dtype=complex)
    return scipy.linalg.orth(m, rcond=rank_tol)


def nonnegative_spectral_subspace(A: LatticeOperator, rank_tol: float = 1e-8, label: str = "",
                                  symbol_key: str | None = None) -> SpectralSubspace:
    """Span of eigenvectors of Hermitian ``A`` with eigenvalue >= -rank_tol*||A||."""
    m = A.entries
    nrm = float(np.linalg.norm(m, 2))
    if np.linalg.norm(m - m.conj().T, 2) > 1e-10 * max(nrm, 1.0):
        raise ContractError("nonnegative spectral subspace needs a Hermitian operator")
    w, v = np.linalg.eigh(m)
    keep = w >= -rank_tol * (nrm if nrm > 0 else 1.0)
    vk = v[:, keep]
    proj = vk @ vk.conj().T
    symbol = None
    if A.symbol is not None:
        try:
            symbol = positive_symbol_projection(A.symbol, 1e-10)
        except Exception:
            symbol = None
    name = label or (f"L+({A.label})" if A.label else "L+")
    band = 0 if A.bandwidth == 0 else 2 * A.lattice_in.truncation
    op = LatticeOperator(A.lattice_in, A.lattice_in, proj, 0, band, "none", symbol, None, name)
    return SpectralSubspace(A.lattice_in, op, symbol, symbol_key if symbol_key is not None else name,
                            (f"nonnegative-spectral:{A.label or 'A'}",), True, name)


def _complement_candidates(L: SpectralSubspace):
    """Standard basis vectors ordered by mode size |k|^2, then flat index."""
    lat = L.ambient
    k2 = (lat.modes ** 2).sum(axis=1)
    order = np.lexsort((np.arange(lat.n_modes), k2))
    r = lat.fiber_rank
    return [m * r + a for m in order for a in range(r)]


def finite_rank_extend(L: SpectralSubspace, k: int, accept: float = 1e-3) -> SpectralSubspace:
    """Add ``k`` directions from the complement of ``L``.

    The choice is deterministic: standard basis vectors are tried in order of
    increasing |mode|, projected to ``range(1 - P)`` and kept when they add a
    new direction.  The new projection is ``P + R (1 - P)`` with ``R`` the
    orthogonal projection onto the added span; it stays orthogonal when ``P``
    is.
    """
    if k < 0:
        raise CapacityError("k must be nonnegative")
    if k == 0:
        return L
    P = L.projection.entries
    n = P.shape[0]
    Q = np.eye(n) - P
    capacity = n - L.rank
    if k > capacity:
        raise CapacityError(f"cannot add {k} dimensions; complement has dimension {capacity}")
    basis = np.zeros((n, 0), dtype=complex)
    for idx in _complement_candidates(L):
        v = Q[:, idx].copy()
        if basis.shape[1]:
            v -= basis @ (basis.conj().T @ v)
        nv = np.linalg.norm(v)
        if nv > accept:
            basis = np.column_stack([basis, v / nv])
            if basis.shape[1] == k:
                break
    if basis.shape[1] < k:
        raise CapacityError("could not find enough complement directions")
    R = basis @ basis.conj().T
    newP = P + R @ Q
    label = f"{L.label}+{k}"
    op = L.projection.with_(entries=newP, label=label)
    dim = None
    if L.dimension is not None:
        dim = DimensionResult(L.dimension.value + k, "relative-index",
                              L.dimension.witness + (f"relative-dimension:+{k}",))
    return SpectralSubspace(L.ambient, op, L.symbol, L.symbol_key,
                            L.provenance + (f"finite-modification-of:{L.label}",),
                            L.orthogonal, label, dim, L.tol)


def complement(L: SpectralSubspace) -> SpectralSubspace:
    """Complementary subspace ``Im(1 - P)``.

    Taking the complement twice returns the original object.  The symbol of
    the complement of an odd subspace is ``Id - p = alpha^* p``.
    """
    if L._complement_of is not None:
        return L._complement_of
    P = L.projection
    newP = np.eye(P.shape[0]) - P.entries
    sym = None if L.symbol is None else L.symbol.identity_like() - L.symbol
    key = L.symbol_key[len("complement-of:"):] if L.symbol_key.startswith("complement-of:") \
        else f"complement-of:{L.symbol_key}"
    label = f"{L.label}^c"
    op = P.with_(entries=newP, symbol=sym, label=label)
    dim = None
    if L.dimension is not None:
        dim = DimensionResult(-L.dimension.value, L.dimension.route,
                              L.dimension.witness + ("complement",))
    return SpectralSubspace(L.ambient, op, sym, key, L.provenance + (f"complement-of:{L.label}",),
                            L.orthogonal, label, dim, L.tol, L)


def transform_subspace(U: LatticeOperator, L: SpectralSubspace, label: str = "",
                       symbol_key: str | None = None) -> SpectralSubspace:
    """Image ``U L`` of a subspace under an invertible operator (projection ``U P U^-1``)."""
    if U.lattice_in != L.ambient or U.lattice_out != L.ambient:
        raise ShapeError("operator does not act on the ambient space of the subspace")
    u = U.entries
    s = np.linalg.svd(u, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise SingularOperatorError("transforming operator is singular", float(s[-1]))
    newP = u @ L.projection.entries @ np.linalg.inv(u)
    sym = None
    if U.symbol is not None and L.symbol is not None:
        sym = U.symbol @ L.symbol @ U.symbol.inverse()
        sym = SymbolSample(sym.grid, sym.values, 0)
    name = label or f"{U.label or 'U'}.{L.label}"
    op = L.projection.with_(entries=newP, symbol=sym, label=name,
                            bandwidth=L.projection.bandwidth if U.bandwidth == 0
                            else 2 * L.ambient.truncation)
    return make_subspace(op, sym, symbol_key if symbol_key is not None else name, name,
                         L.provenance + (f"image-under:{U.label or 'U'}",), L.tol)


def stack_copies(L: SpectralSubspace, copies: int) -> SpectralSubspace:
    """``copies`` copies of ``L`` in the fiber-concatenated ambient space."""
    if copies == 1:
        return L
    P = L.projection
    rows = [[P if i == j else None for j in range(copies)] for i in range(copies)]
    op = fiber_block(rows, label=f"{copies}{L.label}")
    sym = None
    if L.symbol is not None:
        r = L.symbol.rank
        v = np.zeros(L.symbol.values.shape[:2] + (copies * r, copies * r), dtype=complex)
        for i in range(copies):
            v[..., i * r:(i + 1) * r, i * r:(i + 1) * r] = L.symbol.values
        sym = SymbolSample(L.symbol.grid, v, 0)
    op = op.with_(symbol=sym)
    return SpectralSubspace(op.lattice_in, op, sym, f"{copies}x{L.symbol_key}",
                            L.provenance + (f"copies:{copies}",), L.orthogonal,
                            f"{copies}{L.label}", None, L.tol)


class RelativeIndex(NamedTuple):
    value: int
    residual: float
    oracle: int


def _rank_oracle(P1, P2, rank_tol):
    b1 = range_basis(P1, rank_tol)
    b2 = range_basis(P2, rank_tol)
    m = b2.conj().T @ P2 @ b1
    return kernel_dim(m, rank_tol) - kernel_dim(m.conj().T, rank_tol)


def relative_index(L1: SpectralSubspace, L2: SpectralSubspace, tol: float = 1e-8,
                   declared_equal: bool = False, rank_tol: float = 1e-8) -> RelativeIndex:
    """Index of ``P2 : Im P1 -> Im P2`` computed as ``tr P1 - tr P2``.

    The result is cross-checked against the rank count of the compressed map.
    ``declared_equal`` lets a caller that has verified symbol equality by
    other means bypass the symbol-key comparison.
    """
    if L1.ambient != L2.ambient:
        raise ContractError("subspaces live in different ambient spaces")
    if not declared_equal and L1.symbol_key != L2.symbol_key:
        raise ContractError(
            f"symbols not declared equal: {L1.symbol_key!r} vs {L2.symbol_key!r}")
    P1, P2 = L1.projection.entries, L2.projection.entries
    diff = complex(np.trace(P1) - np.trace(P2))
    value = int(round(diff.real))
    residual = max(abs(diff.real - value), abs(diff.imag))
    if residual > tol:
        raise NotComparableError(
            f"subspaces not comparably truncated (trace residual {residual:.3e})")
    oracle = _rank_oracle(P1, P2, rank_tol)
    if oracle != value:
        raise NotComparableError(
            f"trace route gives {value} but rank route gives {oracle}")
    return RelativeIndex(value, residual, oracle)


class SwapOperator(NamedTuple):
    operator: LatticeOperator
    min_singular_value: float
    condition_number: float


def swap_operator(P: LatticeOperator, Q: LatticeOperator, tol: float = 1e-10) -> SwapOperator:
    """The even operator ``[[QP + (1-Q)(1-P), (1-Q)P + Q(1-P)], [Q(1-P) + (1-Q)P, QP + (1-Q)(1-P)]]``.

    It conjugates ``P (+) (1-P)`` into ``Q (+) (1-Q)``.  Since it is block
    equivalent to ``1 (+) (2Q-1)(2P-1)`` it is invertible for any pair of
    idempotents; the smallest singular value is still checked.
    """
    if P.lattice_in != Q.lattice_in or not (P.is_square and Q.is_square):
        raise ShapeError("projections must act on the same ambient space")
    p, q = P.entries, Q.entries
    for name, m in (("P", p), ("Q", q)):
        if np.linalg.norm(m @ m - m, 2) > tol * max(1.0, np.linalg.norm(m, 2)):
            raise ContractError(f"{name} is not idempotent")
    one = np.eye(p.shape[0])
    diag = q @ p + (one - q) @ (one - p)
    off_top = (one - q) @ p + q @ (one - p)
    off_bot = q @ (one - p) + (one - q) @ p
    blocks = [[P.with_(entries=diag, symbol=None, multiplier=None),
               P.with_(entries=off_top, symbol=None, multiplier=None)],
              [P.with_(entries=off_bot, symbol=None, multiplier=None),
               P.with_(entries=diag, symbol=None, multiplier=None)]]
    op = fiber_block(blocks, label="swap").with_(parity="even", order=0)
    s = np.linalg.svd(op.entries, compute_uv=False)
    smin, smax = float(s[-1]), float(s[0])
    if smin <= 1e-12 * max(smax, 1.0):
        raise SingularOperatorError(f"swap operator is singular (sigma_min={smin:.3e})", smin)
    return SwapOperator(op, smin, smax / smin)
