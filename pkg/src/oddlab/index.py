"""Indices of operators acting in subspaces and side-by-side index formula checks.

Every check returns an :class:`IndexReport`: an integer left-hand side
computed from singular values of a compression, right-hand-side terms as
exact rationals, and numeric residuals against declared tolerances.

Conventions
-----------
The topological term on S^1 is pinned by the classical Toeplitz case: the
compression of multiplication by ``a`` to the Hardy space has index
``-winding(a)``.  Cokernels are computed as kernels of the adjoint
compression.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import ContractError, NoOracleError, ResolutionError, ShapeError
from .exact import dyadic_json
from .lattice import LatticeOperator, ModeLattice, fiber_block, identity, kernel_dim
from .spectral import eta_invariant, hamiltonian_from_D
from .subspaces import (SpectralSubspace, make_subspace, nonnegative_spectral_subspace,
                        range_basis, relative_index)
from .symbols import SymbolSample, odd_projection_check, parity_check

__all__ = [
    "IndexReport",
    "Compression",
    "compress",
    "fredholm_index_in_subspaces",
    "winding_number",
    "symbol_index_s1",
    "full_space",
    "summand_subspace",
    "toeplitz_formula_check",
    "oba_check",
    "gladk_check",
    "half_index_check",
    "example6_verify",
    "analytic_index",
]


@dataclass
class IndexReport:
    name: str
    lhs: int
    rhs_terms: dict
    residuals: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    failed: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def rhs_total(self) -> Fraction:
        return sum((Fraction(v) for v in self.rhs_terms.values()), Fraction(0))

    @property
    def passed(self) -> bool:
        if self.failed:
            return False
        if Fraction(self.lhs) != self.rhs_total:
            return False
        return all(self.residuals[k] <= self.tolerances.get(k, 0.0) for k in self.residuals)

    def to_json(self):
        return {
            "name": self.name,
            "lhs": int(self.lhs),
            "rhs_terms": {k: dyadic_json(v) for k, v in self.rhs_terms.items()},
            "rhs_total": dyadic_json(self.rhs_total),
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "tolerances": {k: float(v) for k, v in self.tolerances.items()},
            "provenance": self.provenance,
            "failed": list(self.failed),
            "notes": list(self.notes),
            "pass": self.passed,
        }


class Compression(NamedTuple):
    index: int
    kernel: int
    cokernel: int
    invariance_residual: float
    symbol_margin: float | None
    domain_basis: np.ndarray
    kernel_vectors: np.ndarray


def _trusted_domain(D: LatticeOperator, P1: np.ndarray, rank_tol):
    basis = range_basis(P1, rank_tol)
    mask = np.repeat(D.trusted_in(), D.lattice_in.fiber_rank)
    if mask.all() or basis.shape[1] == 0:
        return basis
    outside = basis[~mask, :]
    z = scipy.linalg.null_space(outside, rcond=rank_tol)
    return basis @ z


def _symbol_margin(D, L1, L2):
    """Smallest singular value of ``sigma(D) : L1 -> L2`` over the grid."""
    if D.symbol is None or L1.symbol is None or L2.symbol is None:
        return None
    sd = D.symbol.values
    p1 = np.broadcast_to(L1.symbol.values, sd.shape[:2] + L1.symbol.values.shape[2:])
    p2 = np.broadcast_to(L2.symbol.values, sd.shape[:2] + L2.symbol.values.shape[2:])
    worst = np.inf
    for ix in range(sd.shape[0]):
        for jx in range(sd.shape[1]):
            b1 = scipy.linalg.orth(p1[ix, jx])
            b2 = scipy.linalg.orth(p2[ix, jx])
            if b1.shape[1] != b2.shape[1]:
                return 0.0
            if b1.shape[1] == 0:
                continue
            m = b2.conj().T @ sd[ix, jx] @ b1
            worst = min(worst, float(np.linalg.svd(m, compute_uv=False)[-1]))
    return worst if np.isfinite(worst) else None


def compress(D: LatticeOperator, L1: SpectralSubspace, L2: SpectralSubspace,
             rank_tol: float = 1e-8, invariance_tol: float = 1e-8,
             symbol_warn: float = 1e-6) -> Compression:
    """Compression ``P2 D P1`` regarded as a map ``Im P1 -> Im P2``.

    For banded ``D`` the domain is cut down to ``Im P1`` intersected with the
    modes on which ``D`` is computed without truncation loss.
    """
    if D.lattice_in != L1.ambient or D.lattice_out != L2.ambient:
        raise ShapeError("operator does not map between the ambient spaces of the subspaces")
    P1, P2 = L1.projection.entries, L2.projection.entries
    d = D.entries
    b1 = _trusted_domain(D, P1, rank_tol)
    b2 = range_basis(P2, rank_tol)
    scale = max(float(np.linalg.norm(d, 2)), 1e-300)
    image = d @ b1
    leak = float(np.linalg.norm(image - P2 @ image, 2)) / scale if b1.shape[1] else 0.0
    if leak > invariance_tol:
        raise ContractError(f"D does not map L1 into L2 (residual {leak:.3e})")
    m = b2.conj().T @ P2 @ image
    ker = kernel_dim(m, rank_tol) if m.size else b1.shape[1]
    coker = kernel_dim(m.conj().T, rank_tol) if m.size else b2.shape[1]
    if m.size and ker:
        _, s, vh = np.linalg.svd(m)
        kvec = b1 @ vh[m.shape[1] - ker:].conj().T
    else:
        kvec = b1 if not m.size else np.zeros((d.shape[1], 0), dtype=complex)
    margin = _symbol_margin(D, L1, L2)
    if margin is not None and margin < symbol_warn:
        warnings.warn(f"principal symbol is nearly degenerate on L1 -> L2 (margin {margin:.3e})",
                      RuntimeWarning, stacklevel=2)
    return Compression(ker - coker, ker, coker, leak, margin, b1, kvec)


def fredholm_index_in_subspaces(D: LatticeOperator, L1: SpectralSubspace, L2: SpectralSubspace,
                                rank_tol: float = 1e-8) -> int:
    """``dim ker - dim coker`` of ``D : L1 -> L2``."""
    return compress(D, L1, L2, rank_tol).index


def analytic_index(D, rank_tol: float = 1e-8) -> int:
    """``dim ker D - dim ker D*`` of a full operator."""
    m = D.entries if isinstance(D, LatticeOperator) else np.asarray(D)
    return kernel_dim(m, rank_tol) - kernel_dim(m.conj().T, rank_tol)


def winding_number(a, tol: float = 1e-8, max_step: float = np.pi / 2) -> int:
    """Winding number of equispaced samples of a closed curve around 0.

    ``a`` holds samples over one period (scalars, or square matrices whose
    determinant is used).  Phase steps above ``max_step`` are treated as
    aliasing.
    """
    z = np.asarray(a, dtype=complex)
    if z.ndim == 3:
        z = np.linalg.det(z)
    z = z.ravel()
    if z.size < 3:
        raise ResolutionError("need at least three samples")
    if np.abs(z).min() <= tol:
        raise ResolutionError(f"curve passes within {np.abs(z).min():.3e} of zero")
    steps = np.angle(np.roll(z, -1) / z)
    if np.abs(steps).max() >= max_step:
        raise ResolutionError(f"phase step {np.abs(steps).max():.3f} too large; refine the grid")
    total = steps.sum() / (2 * np.pi)
    w = int(round(total))
    if abs(total - w) > 1e-6:
        raise ResolutionError(f"phase total {total} is not an integer")
    return w


def symbol_index_s1(symbol: SymbolSample, p: SymbolSample, tol: float = 1e-8) -> int:
    """Index of ``sigma|_L (+) 1_{L^perp}`` on S^1.

    With ``M(phi, xi) = sigma p + (1 - p)`` the index is
    ``-wind(det M(., +1)) + wind(det M(., -1))``.
    """
    if symbol.grid.dim != 1:
        raise ContractError("symbol index by winding is only available on S^1")
    sv = symbol.values
    pv = np.broadcast_to(p.values, sv.shape)
    eye = np.eye(sv.shape[-1])
    m = sv @ pv + (eye - pv)
    total = 0
    for jx, xi in enumerate(symbol.grid.codirections[:, 0]):
        if symbol.grid.n_base == 1:
            # x-independent: a constant curve, winding 0 if it avoids zero
            if abs(np.linalg.det(m[0, jx])) <= tol:
                raise ResolutionError("symbol restriction is singular")
            continue
        w = winding_number(m[:, jx], tol)
        total += -w if xi > 0 else w
    return total


def full_space(lattice: ModeLattice, label="full") -> SpectralSubspace:
    return make_subspace(identity(lattice).with_(label=label), None, label, label)


def summand_subspace(lattice: ModeLattice, start: int, stop: int, label="") -> SpectralSubspace:
    """Orthogonal projection onto fiber slots ``start:stop`` (e.g. the ``F`` of ``E (+) F``)."""
    r = lattice.fiber_rank
    d = np.zeros(r)
    d[start:stop] = 1.0
    p = np.kron(np.eye(lattice.n_modes), np.diag(d))
    from .lattice import constant_matrix
    op = constant_matrix(lattice, np.diag(d), label=label)
    assert np.array_equal(op.entries, p)
    return make_subspace(op, op.symbol, label or f"slots{start}:{stop}", label or f"slots{start}:{stop}")


def toeplitz_formula_check(D: LatticeOperator, L1: SpectralSubspace, L2: SpectralSubspace,
                           rank_tol: float = 1e-8, tol: float = 1e-8) -> IndexReport:
    """``ind(D, L1, L2) = ind(sigma(D)|_L (+) 1) + ind(L1, L2)`` for equal symbols."""
    comp = compress(D, L1, L2, rank_tol)
    rel = relative_index(L1, L2, tol)
    if L1.ambient.dim == 1:
        if D.symbol is None or L1.symbol is None:
            raise NoOracleError("S^1 symbol term needs declared symbols for D and L1")
        sym_term = symbol_index_s1(D.symbol, L1.symbol)
        note = "symbol term by winding number"
    else:
        if D.symbol is None or D.bandwidth != 0:
            raise NoOracleError("no topological oracle for this T^2 symbol")
        sym_term = 0
        note = "x-independent symbol on T^2: symbol term vanishes"
    return IndexReport(
        "toeplitz", comp.index, {"symbol_index": Fraction(sym_term), "relative_index": Fraction(rel.value)},
        {"invariance": comp.invariance_residual, "relative_index_trace": rel.residual},
        {"invariance": tol, "relative_index_trace": tol},
        {"D": D.label, "L1": L1.label, "L2": L2.label},
        notes=[note],
    )


def _require_d(L):
    if L.dimension is None:
        raise ContractError(f"subspace {L.label!r} carries no dimension witness")
    return L.dimension.value


def _require_odd(L, sym_tol):
    if L.symbol is None:
        raise ContractError(f"subspace {L.label!r} has no declared symbol")
    chk = odd_projection_check(L.symbol, sym_tol)
    if not chk.ok:
        raise ContractError(f"subspace {L.label!r} is not odd ({chk})")
    return max(chk.idempotence_residual, chk.oddness_residual)


def _tilde_consistency(D, D_tilde, p):
    """``|| sigma(D~)(xi) - sigma(D)(xi) p(xi) - sigma(D)(-xi) (1 - p(xi)) ||``."""
    if D.symbol is None or D_tilde.symbol is None or p is None:
        return None
    sd, st = D.symbol, D_tilde.symbol
    if sd.values.shape[2:] != st.values.shape[2:]:
        return None
    sdv = sd.values
    pv = np.broadcast_to(p.values, sdv.shape[:2] + p.values.shape[2:])
    expect = sdv @ pv + sdv[:, sd.grid.antipode] @ (np.eye(pv.shape[-1]) - pv)
    stv = np.broadcast_to(st.values, expect.shape)
    return float(np.linalg.norm(stv - expect, ord=2, axis=(-2, -1)).max())


def oba_check(D: LatticeOperator, L1: SpectralSubspace, L2: SpectralSubspace,
              D_tilde: LatticeOperator, rank_tol: float = 1e-8, sym_tol: float = 1e-10,
              tol: float = 1e-8) -> IndexReport:
    """``ind(D, L1, L2) = ind(D~)/2 + d(L1) - d(L2)`` on an even-dimensional base."""
    if L1.ambient.dim % 2:
        raise ContractError("the formula needs an even-dimensional manifold")
    res = {"odd_L1": _require_odd(L1, sym_tol), "odd_L2": _require_odd(L2, sym_tol)}
    tols = {"odd_L1": sym_tol, "odd_L2": sym_tol}
    d1, d2 = _require_d(L1), _require_d(L2)
    comp = compress(D, L1, L2, rank_tol)
    res["invariance"], tols["invariance"] = comp.invariance_residual, tol
    notes = []
    cons = _tilde_consistency(D, D_tilde, L1.symbol)
    if cons is None:
        notes.append("tilde symbol consistency unchecked")
    else:
        res["tilde_symbol"], tols["tilde_symbol"] = cons, 1e-8
    ind_t = analytic_index(D_tilde, rank_tol)
    return IndexReport(
        "oba", comp.index,
        {"half_index_tilde": Fraction(ind_t, 2), "d_L1": d1, "d_L2": -d2},
        res, tols,
        {"D": D.label, "D_tilde": D_tilde.label, "L1": L1.label, "L2": L2.label,
         "d_L1_route": L1.dimension.route, "d_L2_route": L2.dimension.route},
        notes=notes,
    )


def _gladk_ellipticity(D, L, target):
    """Smallest singular value of ``xi -> (sigma(D) p, sigma(D)(-xi) (1 - p))`` into ``F (+) F``."""
    if D.symbol is None or L.symbol is None or target.symbol is None:
        return None
    sd = D.symbol.values
    anti = D.symbol.grid.antipode
    pv = np.broadcast_to(L.symbol.values, sd.shape[:2] + L.symbol.values.shape[2:])
    tv = np.broadcast_to(target.symbol.values, sd.shape[:2] + target.symbol.values.shape[2:])
    eye = np.eye(pv.shape[-1])
    worst = np.inf
    for ix in range(sd.shape[0]):
        for jx in range(sd.shape[1]):
            bf = scipy.linalg.orth(tv[ix, jx])
            top = bf.conj().T @ sd[ix, jx] @ pv[ix, jx]
            bot = bf.conj().T @ sd[ix, anti[jx]] @ (eye - pv[ix, jx])
            m = np.vstack([top, bot])
            if m.shape[0] != m.shape[1]:
                return 0.0
            worst = min(worst, float(np.linalg.svd(m, compute_uv=False)[-1]))
    return worst


def gladk_check(D: LatticeOperator, L: SpectralSubspace, D_tilde: LatticeOperator,
                rank_tol: float = 1e-8, target: SpectralSubspace | None = None,
                sym_tol: float = 1e-10, tol: float = 1e-8) -> IndexReport:
    """``ind(D, L, C(M, F)) = ind(D~)/2 + d(L)``.

    ``target`` is the full space of sections of ``F``; it defaults to the
    whole codomain of ``D``.
    """
    if L.ambient.dim % 2:
        raise ContractError("the formula needs an even-dimensional manifold")
    target = full_space(D.lattice_out) if target is None else target
    res = {"odd_L": _require_odd(L, sym_tol)}
    tols = {"odd_L": sym_tol}
    d = _require_d(L)
    comp = compress(D, L, target, rank_tol)
    res["invariance"], tols["invariance"] = comp.invariance_residual, tol
    notes = []
    ell = _gladk_ellipticity(D, L, target)
    if ell is None:
        notes.append("symbol ellipticity unchecked")
    else:
        # report as a deficit so that smaller is better
        res["ellipticity_deficit"], tols["ellipticity_deficit"] = max(0.0, 1e-6 - ell), 0.0
        notes.append(f"min singular value of the doubled symbol: {ell:.6g}")
    ind_t = analytic_index(D_tilde, rank_tol)
    return IndexReport(
        "gladk", comp.index, {"half_index_tilde": Fraction(ind_t, 2), "d_L": d},
        res, tols,
        {"D": D.label, "D_tilde": D_tilde.label, "L": L.label, "target": target.label,
         "d_route": L.dimension.route},
        notes=notes,
    )


def half_index_check(D_even: LatticeOperator, L: SpectralSubspace, rank_tol: float = 1e-8,
                     sym_tol: float = 1e-10, tol: float = 1e-8) -> IndexReport:
    """``ind(sigma(D)|_L (+) 1_{alpha^*L}) = ind(D)/2`` for even ``D`` on T^2.

    The left side is the index of the compression of ``D`` to ``L``.
    """
    if L.ambient.dim % 2:
        raise ContractError("the half-index identity needs an even-dimensional manifold")
    if D_even.symbol is None:
        raise ContractError("D needs a declared principal symbol")
    par = parity_check(D_even.symbol, "even", sym_tol * max(1.0, float(np.abs(D_even.symbol.values).max())))
    if not par.ok:
        raise ContractError(f"D does not have an even symbol (residual {par.residual:.3e})")
    odd = _require_odd(L, sym_tol)
    comp = compress(D_even, L, L, rank_tol)
    ind_d = analytic_index(D_even, rank_tol)
    return IndexReport(
        "half_index", comp.index, {"half_index_D": Fraction(ind_d, 2)},
        {"even_D": par.residual, "odd_L": odd, "invariance": comp.invariance_residual},
        {"even_D": sym_tol * max(1.0, float(np.abs(D_even.symbol.values).max())),
         "odd_L": sym_tol, "invariance": tol},
        {"D": D_even.label, "L": L.label},
    )


def example6_verify(D: LatticeOperator, rank_tol: float = 1e-8, pair_tol: float | None = None,
                    angle_tol: float = 1e-8) -> IndexReport:
    """Verify the operator-in-subspaces example built from ``D``.

    With ``A = [[0, D*], [D, 0]]`` and ``P0`` the projection onto the second
    summand, checks ``ker P0 = ker D (+) 0``, ``coker P0 = 0``,
    ``ind P0 = dim ker D``, ``eta(A) = -ind D / 2 + dim ker D`` and the
    assembled identity ``ind(D~)/2 + eta(A) = dim ker D`` with ``ind D~ = ind D``.
    """
    if D.lattice_in.fiber_rank != D.lattice_out.fiber_rank:
        raise ContractError("D must map between lattices of equal fiber rank")
    A = hamiltonian_from_D(D)
    lat = A.lattice_in
    rE = D.lattice_in.fiber_rank
    Lp = nonnegative_spectral_subspace(A, rank_tol, label="L+(A)", symbol_key="L+(A)")
    F = summand_subspace(lat, rE, lat.fiber_rank, "F")
    comp = compress(F.projection, Lp, F, rank_tol)

    ker_d = kernel_dim(D, rank_tol)
    ind_d = analytic_index(D, rank_tol)
    eta = eta_invariant(A, pair_tol, rank_tol)

    failed = []
    residuals = {}
    # ker P0 against ker D (+) 0
    nd = scipy.linalg.null_space(D.entries, rcond=rank_tol) if D.entries.size else np.zeros((0, 0))
    n = D.lattice_in.n_modes
    emb = np.zeros((lat.size, nd.shape[1]), dtype=complex)
    emb.reshape(n, lat.fiber_rank, -1)[:, :rE, :] = nd.reshape(n, rE, -1)
    if comp.kernel != nd.shape[1]:
        failed.append("ker P0 = ker D (+) 0 (dimension)")
        residuals["kernel_angle"] = float("inf")
    elif comp.kernel:
        residuals["kernel_angle"] = float(np.max(scipy.linalg.subspace_angles(comp.kernel_vectors, emb)))
    else:
        residuals["kernel_angle"] = 0.0
    if comp.cokernel != 0:
        failed.append("coker P0 = 0")
    if comp.index != ker_d:
        failed.append("ind P0 = dim ker D")
    if eta.value != Fraction(-ind_d, 2) + ker_d:
        failed.append("eta(A) = -ind D / 2 + dim ker D")
    rhs = {"half_index_tilde": Fraction(ind_d, 2), "eta": eta.value}
    if Fraction(ind_d, 2) + eta.value != ker_d:
        failed.append("ind(D~)/2 + eta(A) = dim ker D")
    return IndexReport(
        "example6", comp.index, rhs, residuals, {"kernel_angle": angle_tol},
        {"D": D.label, "A": A.label, "L": Lp.label, "P0": "projection onto F"},
        failed,
        [f"dim ker D = {ker_d}", f"ind D = {ind_d}", f"dim coker P0 = {comp.cokernel}",
         f"eta symmetric pairs = {eta.symmetric_pairs}"],
    )
