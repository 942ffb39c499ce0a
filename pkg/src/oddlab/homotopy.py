"""Homotopies of projections: transport by the Cauchy problem, the rotation
homotopy on a quadrupled bundle, and orthogonalization of oblique odd projections.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError, ContractError, IntegrationError, PathError
from .lattice import LatticeOperator, fiber_block, identity, load_matrix
from .subspaces import SpectralSubspace, transform_subspace
from .symbols import SymbolSample, odd_projection_check

__all__ = [
    "ProjectionPath",
    "TransportResult",
    "transport_projection_path",
    "rotation_homotopy",
    "rotation_diagnostics",
    "orthogonalize_metric",
]


def _matrix(p):
    return p.entries if isinstance(p, LatticeOperator) else np.asarray(p, dtype=complex)


@dataclass(eq=False)
class ProjectionPath:
    """Projections ``P_t`` on a uniform grid of ``[0, 1]``.

    A parametric path also keeps the generating function so that derivatives
    can be taken at any resolution; a sampled path only has the grid.
    """

    times: np.ndarray
    projections: tuple
    function: Callable | None = None
    template: LatticeOperator | None = None
    tol: float = 1e-8

    def __post_init__(self):
        mats = tuple(_matrix(p) for p in self.projections)
        if len(mats) < 2:
            raise PathError("a path needs at least two samples")
        t = np.asarray(self.times, float)
        if t.size != len(mats) or not np.allclose(t, np.linspace(0, 1, t.size)):
            raise PathError("sample times must be a uniform grid of [0, 1]")
        for i, m in enumerate(mats):
            if np.linalg.norm(m @ m - m, 2) > self.tol * max(1.0, np.linalg.norm(m, 2)):
                raise PathError(f"sample {i} is not idempotent")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "projections", mats)

    @classmethod
    def sampled(cls, projections, tol=1e-8):
        mats = list(projections)
        template = mats[0] if isinstance(mats[0], LatticeOperator) else None
        return cls(np.linspace(0, 1, len(mats)), tuple(mats), None, template, tol)

    @classmethod
    def from_dumps(cls, sources, tol=1e-8):
        """Sampled path from CSV matrix dumps (paths or text), all on one lattice."""
        loaded = [load_matrix(s) for s in sources]
        if not loaded:
            raise PathError("a path needs at least two samples")
        lat = loaded[0][0]
        if any(other != lat for other, _ in loaded):
            raise PathError("all samples must live on the same lattice")
        template = LatticeOperator(lat, lat, loaded[0][1], order=0)
        return cls(np.linspace(0, 1, len(loaded)), tuple(m for _, m in loaded), None, template, tol)

    @classmethod
    def parametric(cls, fn: Callable, samples: int = 101, tol=1e-8):
        first = fn(0.0)
        template = first if isinstance(first, LatticeOperator) else None
        t = np.linspace(0, 1, samples)
        return cls(t, tuple(fn(s) for s in t), lambda s: _matrix(fn(s)), template, tol)

    @property
    def smoothness(self) -> float:
        return max(float(np.linalg.norm(b - a, 2)) for a, b in zip(self.projections, self.projections[1:]))

    @property
    def traces(self) -> np.ndarray:
        return np.array([np.trace(m).real for m in self.projections])

    @cached_property
    def _spline(self):
        return CubicSpline(self.times, np.array(self.projections), axis=0)

    def at(self, t: float) -> np.ndarray:
        if self.function is not None:
            return self.function(t)
        return self._spline(t)

    def derivative(self, t: float, delta: float = 1e-5) -> np.ndarray:
        """Finite difference of the generating function, or the spline derivative."""
        if self.function is not None:
            f = self.function
            # second-order one-sided stencils keep the endpoints as accurate as the interior
            if t - delta < 0.0:
                return (-3 * f(t) + 4 * f(t + delta) - f(t + 2 * delta)) / (2 * delta)
            if t + delta > 1.0:
                return (3 * f(t) - 4 * f(t - delta) + f(t - 2 * delta)) / (2 * delta)
            return (f(t + delta) - f(t - delta)) / (2 * delta)
        return self._spline(t, 1)


class TransportResult(NamedTuple):
    U: object
    range_residual: float
    unitarity_drift: float
    condition_number: float
    steps: int


def transport_projection_path(path: ProjectionPath, steps: int | None = None,
                              reunitarize_every: int = 0, max_condition: float = 1e8) -> TransportResult:
    """Integrate ``dU/dt = [P', P] U`` from ``U_0 = 1`` with classical RK4.

    Then ``U_t`` carries ``Im P_0`` onto ``Im P_t``; the residual
    ``||(1 - P_1) U P_0||`` is reported.  ``reunitarize_every > 0`` replaces U
    by its polar factor periodically (meaningful for orthogonal projections).
    """
    n_samples = len(path.projections)
    steps = n_samples - 1 if steps is None else steps
    if steps < n_samples - 1:
        raise ConfigurationError("need at least one integration step per sample interval")
    if path.smoothness >= 1.0:
        raise PathError(f"rank jump along the path (smoothness {path.smoothness:.3f})")
    tr = path.traces
    if np.abs(tr - tr[0]).max() > 0.5:
        raise PathError("trace changes along the path; ranks differ")

    def rhs(t, u):
        p = path.at(t)
        dp = path.derivative(t)
        return (dp @ p - p @ dp) @ u

    n = path.projections[0].shape[0]
    u = np.eye(n, dtype=complex)
    h = 1.0 / steps
    for i in range(steps):
        t = i * h
        k1 = rhs(t, u)
        k2 = rhs(t + h / 2, u + h / 2 * k1)
        k3 = rhs(t + h / 2, u + h / 2 * k2)
        k4 = rhs(t + h, u + h * k3)
        u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if reunitarize_every and (i + 1) % reunitarize_every == 0:
            u = scipy.linalg.polar(u)[0]
        s = np.linalg.svd(u, compute_uv=False)
        if not np.isfinite(s).all() or s[0] / s[-1] > max_condition:
            raise IntegrationError(f"transport lost conditioning at t = {t + h:.3f}")
    p0, p1 = path.projections[0], path.projections[-1]
    res = float(np.linalg.norm((np.eye(n) - p1) @ u @ p0, 2))
    drift = float(np.linalg.norm(u.conj().T @ u - np.eye(n), 2))
    s = np.linalg.svd(u, compute_uv=False)
    out = u
    if path.template is not None:
        out = path.template.with_(entries=u, order=0, parity="none", symbol=None,
                                  multiplier=None, label="transport")
    return TransportResult(out, res, drift, float(s[0] / s[-1]), steps)


def _inverse_op(U: LatticeOperator) -> LatticeOperator:
    s = np.linalg.svd(U.entries, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise ContractError("rotation homotopy needs an invertible U")
    sym = None if U.symbol is None else U.symbol.inverse()
    return U.with_(entries=np.linalg.inv(U.entries), symbol=sym, multiplier=None,
                   label=f"{U.label or 'U'}^-1")


def rotation_homotopy(U: LatticeOperator, phi: float) -> LatticeOperator:
    """``1_{2r} (+) [[cos phi, -U^-1 sin phi], [U sin phi, cos phi]]`` on a 4r fiber."""
    if not 0.0 <= phi <= np.pi / 2 + 1e-15:
        raise ConfigurationError("phi must lie in [0, pi/2]")
    if not U.is_square:
        raise ContractError("U must act on a single lattice")
    inv = _inverse_op(U)
    one = identity(U.lattice_in)
    if U.symbol is not None:
        one = one.with_(symbol=SymbolSample.constant(U.symbol.grid, np.eye(U.lattice_in.fiber_rank)))
    c, s = np.cos(phi), np.sin(phi)
    cz = c * one
    rows = [[one, None, None, None],
            [None, one, None, None],
            [None, None, cz, (-s) * inv],
            [None, None, s * U, cz]]
    for row in rows:
        for j, b in enumerate(row):
            if b is not None:
                row[j] = b.with_(order=0, parity="even" if b.parity == "even" else "none")
    return fiber_block(rows, label=f"U_phi({U.label or 'U'}, {phi:.6g})")


def rotation_diagnostics(U: LatticeOperator, n_phi: int = 17):
    """``(|det U_phi|`` over a phi grid, Lipschitz bound ``max(1, ||U||, ||U^-1||))``."""
    phis = np.linspace(0, np.pi / 2, n_phi)
    dets = []
    for p in phis:
        sign, logdet = np.linalg.slogdet(rotation_homotopy(U, p).entries)
        dets.append(float(np.exp(logdet)))
    inv = np.linalg.inv(U.entries)
    lip = max(1.0, float(np.linalg.norm(U.entries, 2)), float(np.linalg.norm(inv, 2)))
    return np.array(dets), lip


def _gram_sqrt(p):
    """Hermitian square root of ``p* p + (1-p)* (1-p)``."""
    q = np.eye(p.shape[-1]) - p
    g = p.conj().T @ p + q.conj().T @ q
    w, v = np.linalg.eigh(g)
    if w.min() <= 1e-14 * w.max():
        raise ContractError("metric is degenerate")
    return (v * np.sqrt(w)) @ v.conj().T


def orthogonalize_metric(L: SpectralSubspace, sym_tol: float = 1e-10):
    """Even ``U`` making ``U L`` orthogonally odd; returns ``(U, U L)``.

    The metric ``g = P*P + (1-P)*(1-P)`` makes ``P`` an orthogonal projection;
    ``U = g^(1/2)`` carries that metric to the standard one.  Because
    ``p(-xi) = 1 - p(xi)`` the symbol of ``g`` is even.  Only projections that
    act mode by mode (bandwidth 0) are supported.
    """
    P = L.projection
    if L.symbol is not None:
        chk = odd_projection_check(L.symbol, sym_tol)
        if not chk.ok:
            raise ContractError(f"projection symbol is not odd ({chk})")
    lat = L.ambient
    r, n = lat.fiber_rank, lat.n_modes
    e = P.entries.reshape(n, r, n, r)
    diag = np.einsum("iaib->iab", e)
    off = e.copy()
    off[np.arange(n), :, np.arange(n), :] = 0
    if np.abs(off).max(initial=0.0) > 1e-12 * max(1.0, np.abs(e).max()):
        raise ContractError("orthogonalization is implemented for mode-diagonal projections")
    blocks = np.array([_gram_sqrt(b) for b in diag])
    u = scipy.linalg.block_diag(*blocks)
    sym = None
    if L.symbol is not None:
        sv = L.symbol.values
        vals = np.array([[_gram_sqrt(sv[i, j]) for j in range(sv.shape[1])] for i in range(sv.shape[0])])
        sym = SymbolSample(L.symbol.grid, vals, 0)
    U = P.with_(entries=u, order=0, bandwidth=0, parity="even", symbol=sym, multiplier=None,
                label=f"orth({L.label})")
    image = transform_subspace(U, L, label=f"orth.{L.label}")
    return U, image
