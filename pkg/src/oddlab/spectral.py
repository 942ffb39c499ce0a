"""Spectra, the eta invariant and the dimension functional.

Eta at truncation is evaluated in finite-asymmetry mode: eigenvalues are
paired ``lambda <-> -lambda`` and only the unpaired remainder contributes,
each with its sign.  No zeta regularization is attempted.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import ContractError, DegeneracyError
from .exact import DimensionResult, dyadic_from_float
from .lattice import LatticeOperator, constant_matrix, fiber_block
from .subspaces import (SpectralSubspace, complement, relative_index, stack_copies,
                        transform_subspace)
from .symbols import AdmissibilityReport, SymbolSample, admissibility_check, parity_check

__all__ = [
    "Spectrum",
    "EtaResult",
    "eig_hermitian",
    "eta_invariant",
    "eigen_projection",
    "positive_projection_formula",
    "build_A_from_projection",
    "hamiltonian_from_D",
    "admissibility",
    "d_via_eta",
    "d_via_relative_index",
]

log = logging.getLogger(__name__)


def _scale(m):
    n = float(np.linalg.norm(m, 2)) if m.size else 0.0
    return n if n > 0 else 1.0


def _require_hermitian(A: LatticeOperator, tol=1e-10):
    m = A.entries
    if np.linalg.norm(m - m.conj().T, 2) > tol * _scale(m):
        raise ContractError(f"operator {A.label or ''} is not Hermitian".replace("  ", " "))


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    kernel_dim: int
    threshold: float

    @property
    def multiplicities(self):
        """Distinct eigenvalues (rounded at the threshold scale) with counts."""
        vals, counts = [], []
        for w in self.eigenvalues:
            if vals and abs(w - vals[-1]) <= max(self.threshold, 1e-9) * max(1.0, abs(w)):
                counts[-1] += 1
            else:
                vals.append(float(w))
                counts.append(1)
        return list(zip(vals, counts))


def eig_hermitian(A: LatticeOperator, threshold: float = 1e-8):
    """Full eigendecomposition; returns ``(Spectrum, eigenbasis)``.

    Eigenvalues with ``|lambda| <= threshold * ||A||`` count as kernel.
    """
    _require_hermitian(A)
    w, v = np.linalg.eigh(A.entries)
    ker = int(np.count_nonzero(np.abs(w) <= threshold * _scale(A.entries)))
    return Spectrum(w, ker, threshold), v


@dataclass(frozen=True)
class EtaResult:
    value: Fraction
    kernel_contribution: Fraction
    asymmetry_sum: int
    symmetric_pairs: int
    unpaired: tuple
    exactness_flag: bool
    notes: tuple = field(default_factory=tuple)

    def to_json(self):
        from .exact import dyadic_json
        return {
            "value": dyadic_json(self.value),
            "kernel_contribution": dyadic_json(self.kernel_contribution),
            "asymmetry_sum": self.asymmetry_sum,
            "symmetric_pairs": self.symmetric_pairs,
            "unpaired": [float(x) for x in self.unpaired],
            "exactness_flag": self.exactness_flag,
            "notes": list(self.notes),
        }


def _pair_spectrum(w, tol):
    """Nearest-first greedy pairing of positive with negative eigenvalues."""
    pos = np.sort(w[w > 0])
    neg = np.sort(-w[w < 0])
    cands = []
    ambiguous = 0
    for i, p in enumerate(pos):
        lo, hi = np.searchsorted(neg, p - tol, "left"), np.searchsorted(neg, p + tol, "right")
        window = neg[lo:hi]
        if window.size > 1 and window.max() - window.min() > 1e3 * np.finfo(float).eps * max(1.0, p):
            ambiguous += 1
        cands.extend((abs(p - neg[j]), i, j) for j in range(lo, hi))
    cands.sort()
    used_p = np.zeros(pos.size, bool)
    used_n = np.zeros(neg.size, bool)
    pairs = 0
    for _, i, j in cands:
        if not used_p[i] and not used_n[j]:
            used_p[i] = used_n[j] = True
            pairs += 1
    unpaired = np.concatenate([pos[~used_p], -neg[~used_n]])
    return pairs, np.sort(unpaired), ambiguous


def eta_invariant(A: LatticeOperator, pair_tol: float | None = None, kernel_tol: float = 1e-8,
                  edge_fraction: float = 0.5) -> EtaResult:
    """``eta = dim ker / 2 + (1/2) sum_{unpaired} sgn(lambda)``.

    ``pair_tol`` defaults to ``1e-9 * ||A||``.  The result is flagged exact
    when every unpaired eigenvalue lies below ``edge_fraction`` times the
    spectral radius; asymmetry at the spectral edge cannot be told apart from
    truncation artifacts.
    """
    _require_hermitian(A)
    w = np.linalg.eigvalsh(A.entries)
    scale = _scale(A.entries)
    tol = 1e-9 * scale if pair_tol is None else pair_tol
    ker_mask = np.abs(w) <= kernel_tol * scale
    ker = int(np.count_nonzero(ker_mask))
    pairs, unpaired, ambiguous = _pair_spectrum(w[~ker_mask], tol)
    asym = int(np.sum(np.sign(unpaired)))
    notes = []
    if ambiguous:
        notes.append(f"{ambiguous} eigenvalue(s) had several pairing candidates; nearest used")
        log.info("eta pairing: %s", notes[-1])
    radius = float(np.abs(w).max()) if w.size else 0.0
    exact = bool(np.all(np.abs(unpaired) < edge_fraction * radius)) if unpaired.size else True
    if not exact:
        notes.append("unpaired eigenvalues reach the spectral edge")
    kc = Fraction(ker, 2)
    return EtaResult(kc + Fraction(asym, 2), kc, asym, pairs, tuple(float(x) for x in unpaired),
                     exact, tuple(notes))


def eigen_projection(A: LatticeOperator, nonnegative: bool = True, rank_tol: float = 1e-8) -> np.ndarray:
    """Orthogonal projection onto the (non)negative eigenspace via ``eigh``."""
    w, v = np.linalg.eigh(A.entries)
    thr = -rank_tol * _scale(A.entries)
    keep = w >= thr if nonnegative else w > 0
    return v[:, keep] @ v[:, keep].conj().T


def positive_projection_formula(A: LatticeOperator, tol: float = 1e-8) -> LatticeOperator:
    """``(1 + A |A|^{-1}) / 2`` with ``|A| = (A^2)^{1/2}`` by the matrix square root."""
    _require_hermitian(A)
    m = A.entries
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] <= tol * s[0]:
        raise DegeneracyError(
            f"operator has a near-kernel eigenvalue ({s[-1]:.3e}); the formula needs invertibility")
    absA = scipy.linalg.sqrtm(m @ m)
    sign = np.linalg.solve(absA.T, m.T).T  # A |A|^{-1}
    p = 0.5 * (np.eye(m.shape[0]) + sign)
    return A.with_(entries=p, order=0, parity="none", symbol=None, multiplier=None,
                   label=f"P+({A.label})" if A.label else "P+")


def _hermitian_power(m, power, what):
    w, v = np.linalg.eigh(m)
    if w.min() <= 0:
        raise ContractError(f"{what} is not positive definite (min eigenvalue {w.min():.3e})")
    return (v * w ** power) @ v.conj().T


def build_A_from_projection(P: LatticeOperator, Delta: LatticeOperator,
                            regularization: float = 0.0) -> LatticeOperator:
    """``A = Delta^{1/4} (2P - 1) Delta^{1/4}`` for an orthogonal projection ``P``."""
    p = P.entries
    if np.linalg.norm(p - p.conj().T, 2) > 1e-10 or np.linalg.norm(p @ p - p, 2) > 1e-10:
        raise ContractError("P must be an orthogonal projection")
    _require_hermitian(Delta)
    d = Delta.entries + regularization * np.eye(p.shape[0])
    q = _hermitian_power(d, 0.25, "Delta")
    a = q @ (2 * p - np.eye(p.shape[0])) @ q
    a = 0.5 * (a + a.conj().T)
    return P.with_(entries=a, order=max(Delta.order // 2, 0), parity="none", symbol=None,
                   multiplier=None, bandwidth=0 if Delta.bandwidth == P.bandwidth == 0
                   else 2 * P.lattice_in.truncation,
                   label=f"A({P.label})" if P.label else "A")


def hamiltonian_from_D(D: LatticeOperator) -> LatticeOperator:
    """Self-adjoint ``[[0, D*], [D, 0]]`` on the fiber sum ``E (+) F``."""
    Ds = D.H
    return fiber_block([[None, Ds], [D, None]], label=f"H({D.label})" if D.label else "H")


def admissibility(A: LatticeOperator, tol: float = 1e-12) -> AdmissibilityReport:
    """Parity conditions on the representable parts of ``A``'s symbol."""
    return admissibility_check(A.symbol, A.multiplier, A.order, tol)


def d_via_eta(A: LatticeOperator, admissibility_report: AdmissibilityReport | None = None,
              pair_tol: float | None = None, kernel_tol: float = 1e-8,
              sym_tol: float = 1e-10) -> DimensionResult:
    """Dimension of the nonnegative spectral subspace of ``A`` as ``eta(A)``."""
    _require_hermitian(A)
    if A.symbol is None:
        raise ContractError("d via eta needs a declared principal symbol")
    par = parity_check(A.symbol, "odd", sym_tol)
    if not par.ok:
        raise ContractError(f"principal symbol is not odd (residual {par.residual:.3e})")
    rep = admissibility(A) if admissibility_report is None else admissibility_report
    if not rep.principal_ok or rep.lower_order_ok is False:
        raise ContractError(f"operator is not admissible: {rep}")
    eta = eta_invariant(A, pair_tol, kernel_tol)
    if not eta.exactness_flag:
        raise ContractError("eta is not in the finite-asymmetry class; refusing")
    value = dyadic_from_float(float(eta.value))
    witness = [f"A={A.label or 'A'}"]
    if rep.unchecked:
        witness.append("unchecked:" + ",".join(rep.unchecked))
    return DimensionResult(value, "eta", tuple(witness))


def d_via_relative_index(L: SpectralSubspace, U: LatticeOperator, N: int = 0,
                         sym_tol: float = 1e-10, tol: float = 1e-8) -> DimensionResult:
    """``d(L) = ind(U 2^N L, (2^N L)^c) / 2^(N+1)``.

    ``U`` acts on ``2^N`` copies of the ambient bundle, has even principal
    symbol, is invertible, and its symbol carries ``2^N L`` onto
    ``2^N alpha^* L``.  That last condition is verified pointwise when both
    symbols are declared.
    """
    copies = 2 ** N
    LN = stack_copies(L, copies)
    if U.lattice_in != LN.ambient or U.lattice_out != LN.ambient:
        raise ContractError("U must act on 2^N copies of the ambient space")
    if U.symbol is None:
        raise ContractError("U needs a declared principal symbol")
    par = parity_check(U.symbol, "even", sym_tol)
    if not par.ok:
        raise ContractError(f"U does not have an even symbol (residual {par.residual:.3e})")
    s = np.linalg.svd(U.entries, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise ContractError("U is not invertible")
    if LN.symbol is not None:
        u = U.symbol
        img = (u @ LN.symbol @ u.inverse()).values
        target = np.eye(LN.symbol.rank) - LN.symbol.values
        res = float(np.linalg.norm(img - target, ord=2, axis=(-2, -1)).max())
        if res > sym_tol * max(1.0, float(np.linalg.norm(u.values, ord=2, axis=(-2, -1)).max())) ** 2:
            raise ContractError(f"symbol of U.L does not match alpha^*L (residual {res:.3e})")
    image = transform_subspace(U, LN)
    comp = complement(LN)
    ri = relative_index(image, comp, tol, declared_equal=True)
    value = Fraction(ri.value, 2 ** (N + 1))
    return DimensionResult(value, "relative-index", (f"U={U.label or 'U'}", f"N={N}", f"L={L.label}"))
