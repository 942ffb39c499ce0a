"""Principal symbols sampled on cosphere grids.

A symbol is stored as an ``(n_x, n_xi, r, r)`` complex array over a grid of
base points ``x`` and unit codirections ``xi``.  The codirection list is
closed under exact negation, and the pairing ``xi <-> -xi`` is stored
explicitly, so the antipodal pullback is a pure index permutation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, ContractError, DegeneracyError, StructuralError

__all__ = [
    "CosphereGrid",
    "SymbolSample",
    "PolySymbol",
    "ParityResult",
    "ProjectionCheck",
    "GluingResult",
    "AdmissibilityReport",
    "circle_grid",
    "torus_grid",
    "default_grid",
    "pullback_alpha",
    "parity_check",
    "odd_projection_check",
    "rank_constraint_check",
    "positive_symbol_projection",
    "clifford_generators",
    "clifford_symbol",
    "fund_extension",
    "boundary_gluing_check",
    "admissibility_check",
]


def _opnorm(a):
    """Spectral norm over the trailing two axes."""
    if a.shape[-1] == 0:
        return np.zeros(a.shape[:-2])
    return np.linalg.norm(a, ord=2, axis=(-2, -1))


@dataclass(frozen=True, eq=False)
class CosphereGrid:
    base_points: np.ndarray
    codirections: np.ndarray
    antipode: np.ndarray

    def __post_init__(self):
        base = np.atleast_2d(np.asarray(self.base_points, dtype=float))
        xi = np.atleast_2d(np.asarray(self.codirections, dtype=float))
        anti = np.asarray(self.antipode, dtype=int)
        if base.shape[1] != xi.shape[1]:
            raise StructuralError("base points and codirections disagree on dimension")
        if anti.shape != (xi.shape[0],):
            raise StructuralError("antipode table must pair every codirection")
        if np.any(anti < 0) or np.any(anti >= xi.shape[0]):
            raise StructuralError("antipode index out of range")
        if not np.array_equal(anti[anti], np.arange(xi.shape[0])):
            raise StructuralError("antipode table is not an involution")
        if not np.array_equal(xi[anti], -xi):
            raise StructuralError("codirections are not closed under exact negation")
        for name, arr in (("base_points", base), ("codirections", xi), ("antipode", anti)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_half(cls, base_points, half_codirections):
        """Build a grid from one representative of each ``{xi, -xi}`` pair."""
        half = np.atleast_2d(np.asarray(half_codirections, dtype=float))
        n = half.shape[0]
        xi = np.concatenate([half, -half])
        anti = np.concatenate([np.arange(n, 2 * n), np.arange(n)])
        return cls(base_points, xi, anti)

    @property
    def dim(self):
        return self.base_points.shape[1]

    @property
    def n_base(self):
        return self.base_points.shape[0]

    @property
    def n_directions(self):
        return self.codirections.shape[0]

    def same_directions(self, other):
        return self is other or (
            np.array_equal(self.codirections, other.codirections)
            and np.array_equal(self.antipode, other.antipode)
        )


def circle_grid(n_base=1):
    """Grid on S*S^1: ``n_base`` equispaced angles and codirections +1, -1."""
    phi = 2 * np.pi * np.arange(n_base) / n_base
    return CosphereGrid.from_half(phi[:, None], [[1.0]])


def torus_grid(n_base=1, n_directions=8):
    """Grid on S*T^2 with ``n_directions`` unit covectors at equal angles.

    ``n_base`` is the number of samples per axis of the base torus.
    """
    if n_directions % 2:
        raise StructuralError("an antipodally closed direction set has even size")
    half = n_directions // 2
    ang = np.pi * np.arange(half) / half
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # clean up the axis directions so (0, 1) is exact
    dirs[np.isclose(dirs, 0.0, atol=1e-15)] = 0.0
    t = 2 * np.pi * np.arange(n_base) / n_base
    base = np.array(list(itertools.product(t, t)))
    return CosphereGrid.from_half(base, dirs)


def default_grid(dim, n_base=1):
    if dim == 1:
        return circle_grid(n_base)
    if dim == 2:
        return torus_grid(n_base)
    raise ConfigurationError(f"only S^1 and T^2 are supported, got dim={dim}")


@dataclass(frozen=True, eq=False)
class SymbolSample:
    grid: CosphereGrid
    values: np.ndarray
    degree: int = 0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        g = self.grid
        if vals.ndim != 4 or vals.shape[:2] != (g.n_base, g.n_directions):
            raise StructuralError(
                f"values shape {vals.shape} does not match grid "
                f"({g.n_base}, {g.n_directions}, r, r)"
            )
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid, fn, degree=0):
        """Sample ``fn(x, xi)`` (returning a matrix) on every grid point."""
        vals = [
            [np.atleast_2d(np.asarray(fn(x, xi), dtype=complex)) for xi in grid.codirections]
            for x in grid.base_points
        ]
        return cls(grid, np.array(vals), degree)

    @classmethod
    def constant(cls, grid, matrix, degree=0):
        m = np.atleast_2d(np.asarray(matrix, dtype=complex))
        vals = np.broadcast_to(m, (grid.n_base, grid.n_directions) + m.shape)
        return cls(grid, vals, degree)

    @property
    def rank_in(self):
        return self.values.shape[-1]

    @property
    def rank_out(self):
        return self.values.shape[-2]

    @property
    def rank(self):
        if self.rank_in != self.rank_out:
            raise StructuralError("symbol is not square")
        return self.rank_in

    def _aligned(self, other):
        if not self.grid.same_directions(other.grid):
            raise StructuralError("symbols sampled on different codirection sets")
        a, b = self.values, other.values
        if a.shape[0] != b.shape[0]:
            if a.shape[0] == 1:
                a = np.broadcast_to(a, (b.shape[0],) + a.shape[1:])
            elif b.shape[0] == 1:
                b = np.broadcast_to(b, (a.shape[0],) + b.shape[1:])
            else:
                raise StructuralError("symbols sampled on different base points")
        grid = self.grid if a.shape[0] == self.values.shape[0] else other.grid
        return grid, a, b

    def __matmul__(self, other):
        grid, a, b = self._aligned(other)
        return SymbolSample(grid, a @ b, self.degree + other.degree)

    def __add__(self, other):
        grid, a, b = self._aligned(other)
        return SymbolSample(grid, a + b, max(self.degree, other.degree))

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return SymbolSample(self.grid, -self.values, self.degree)

    def __rmul__(self, c):
        return SymbolSample(self.grid, c * self.values, self.degree)

    def adjoint(self):
        return SymbolSample(self.grid, np.conj(np.swapaxes(self.values, -1, -2)), self.degree)

    def inverse(self):
        return SymbolSample(self.grid, np.linalg.inv(self.values), -self.degree)

    def identity_like(self):
        return SymbolSample.constant(self.grid, np.eye(self.rank), 0)


def pullback_alpha(s: SymbolSample) -> SymbolSample:
    """Pull back along ``(x, xi) -> (x, -xi)``; exact index permutation."""
    return SymbolSample(s.grid, s.values[:, s.grid.antipode], s.degree)


class ParityResult(NamedTuple):
    ok: bool
    residual: float


def parity_check(s: SymbolSample, kind: str, tol: float) -> ParityResult:
    """Check ``s(x, -xi) = +s(x, xi)`` (even) or ``-s(x, xi)`` (odd)."""
    if tol <= 0:
        raise ContractError("tol must be positive")
    if kind == "even":
        diff = pullback_alpha(s).values - s.values
    elif kind == "odd":
        diff = pullback_alpha(s).values + s.values
    else:
        raise ContractError(f"parity kind must be 'even' or 'odd', got {kind!r}")
    res = float(_opnorm(diff).max()) if diff.size else 0.0
    return ParityResult(res <= tol, res)


class ProjectionCheck(NamedTuple):
    ok: bool
    idempotence_residual: float
    oddness_residual: float


def odd_projection_check(p: SymbolSample, tol: float) -> ProjectionCheck:
    """Check ``p^2 = p`` and ``p + alpha^* p = Id`` at every grid point."""
    eye = np.eye(p.rank)
    v = p.values
    idem = float(_opnorm(v @ v - v).max())
    odd = float(_opnorm(v + pullback_alpha(p).values - eye).max())
    return ProjectionCheck(idem <= tol and odd <= tol, idem, odd)


def rank_constraint_check(rank_L: int, n: int) -> bool:
    """Rank of an odd subbundle over an ``n``-manifold must be a multiple of 2^(k-1).

    Here ``n - 1 = 2k`` or ``2k + 1``; the constraint is vacuous for k <= 1.
    """
    if rank_L < 1 or n < 1:
        raise ContractError("rank and dimension must be positive")
    k = (n - 1) // 2
    if k <= 1:
        return True
    return rank_L % (2 ** (k - 1)) == 0


def positive_symbol_projection(s: SymbolSample, tol: float) -> SymbolSample:
    """Pointwise orthogonal projection onto the nonnegative eigenspace."""
    v = s.values
    herm = float(_opnorm(v - np.conj(np.swapaxes(v, -1, -2))).max())
    if herm > tol * max(1.0, float(_opnorm(v).max())):
        raise ContractError(f"symbol is not Hermitian (residual {herm:.3e})")
    w, vecs = np.linalg.eigh(v)
    absmin = np.abs(w).min(axis=-1)
    bad = np.argwhere(absmin <= tol)
    if bad.size:
        ix, jx = bad[0]
        raise DegeneracyError(
            f"symbol is near-singular at base point {s.grid.base_points[ix].tolist()}, "
            f"codirection {s.grid.codirections[jx].tolist()} (min |eig| {absmin[ix, jx]:.3e})"
        )
    mask = (w > 0).astype(float)[..., None, :]
    proj = (vecs * mask) @ np.conj(np.swapaxes(vecs, -1, -2))
    return SymbolSample(s.grid, proj, 0)


def clifford_generators(n: int) -> list[np.ndarray]:
    """Hermitian generators of Cl(C^n) acting on C^(2^n) by left multiplication.

    Jordan-Wigner form ``Z x ... x Z x X x I x ... x I``; they square to the
    identity and pairwise anticommute.
    """
    if n < 1:
        raise ConfigurationError("need at least one Clifford generator")
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    i2 = np.eye(2, dtype=complex)
    gens = []
    for j in range(n):
        m = np.ones((1, 1), dtype=complex)
        for slot in range(n):
            m = np.kron(m, z if slot < j else x if slot == j else i2)
        gens.append(m)
    return gens


def _orthonormal_frame(frame, dim, n):
    f = np.asarray(frame, dtype=float)
    if f.shape != (dim, n):
        raise ConfigurationError(f"frame must have shape ({dim}, {n}), got {f.shape}")
    q, r = np.linalg.qr(f.T)
    d = np.abs(np.diag(r))
    if d.min() <= 1e-12 * max(1.0, d.max()):
        raise ConfigurationError("degenerate frame: covectors do not span the fiber")
    # keep orientation of the input rows
    q = q * np.sign(np.diag(r))
    return q.T


def clifford_symbol(n: int, frames, grid: CosphereGrid) -> SymbolSample:
    """Clifford multiplication symbol ``cl(xi) = sum_j (xi F(x))_j e_j``.

    ``frames`` is either a constant ``(dim, n)`` array or a callable
    ``x -> (dim, n)`` embedding covectors of the base into R^n.  Frames are
    orthonormalized so that ``cl(xi)^2 = |xi|^2``.
    """
    if n < grid.dim:
        raise ConfigurationError(f"need n >= manifold dimension ({grid.dim}), got {n}")
    gens = np.array(clifford_generators(n))
    vals = []
    for x in grid.base_points:
        f = frames(x) if callable(frames) else frames
        fo = _orthonormal_frame(f, grid.dim, n)
        coords = grid.codirections @ fo  # (n_xi, n)
        vals.append(np.einsum("dj,jab->dab", coords, gens))
    return SymbolSample(grid, np.array(vals), 1)


def fund_extension(sigma: SymbolSample, p: SymbolSample, tol: float = 1e-10) -> SymbolSample:
    """Double an isomorphism ``L -> alpha^* L`` into an even automorphism.

    With ``s~(xi) = sigma(xi) p(xi) + sigma(-xi) p(-xi)`` the result is
    ``s~ (+) s~^{-1}`` on fiber rank ``2r``.
    """
    chk = odd_projection_check(p, tol)
    if not chk.ok:
        raise ContractError(f"p is not an odd projection ({chk})")
    sv, pv = sigma.values, p.values
    anti = p.grid.antipode
    # sigma(xi) must send range p(xi) into range p(-xi) = ker p(xi)
    leak = float(_opnorm(pv @ sv @ pv).max())
    if leak > tol * max(1.0, float(_opnorm(sv).max())):
        raise ContractError(f"sigma does not map L into alpha^*L (residual {leak:.3e})")
    tilde = sv @ pv + sv[:, anti] @ pv[:, anti]
    try:
        inv = np.linalg.inv(tilde)
    except np.linalg.LinAlgError as exc:
        raise DegeneracyError("extended symbol is singular") from exc
    if not np.all(np.isfinite(inv)):
        raise DegeneracyError("extended symbol is singular")
    r = sigma.rank
    out = np.zeros(tilde.shape[:2] + (2 * r, 2 * r), dtype=complex)
    out[..., :r, :r] = tilde
    out[..., r:, r:] = inv
    return SymbolSample(p.grid, out, 0)


class GluingResult(NamedTuple):
    ok: bool
    residual: float
    failed: tuple


def boundary_gluing_check(boundary_symbol: SymbolSample, tol: float, n_tau: int = 33) -> GluingResult:
    """Check that ``tau - i s(xi')`` glues with its inverse pulled back by alpha.

    On the unit cosphere ``tau^2 + |xi'|^2 = 1`` (sampled by ``n_tau`` polar
    angles, poles included) the product
    ``(tau - i s(xi')) (tau - i s(-xi'))`` must equal ``(tau^2 + |xi'|^2) Id``.
    ``s(-xi')`` is read from the stored antipodal sample, not derived from
    oddness, so an even symbol shows up as a residual.
    """
    s = boundary_symbol
    v = s.values
    eye = np.eye(s.rank)
    failed = []
    if not parity_check(s, "odd", tol).ok:
        failed.append("odd")
    if float(_opnorm(v - np.conj(np.swapaxes(v, -1, -2))).max()) > tol:
        failed.append("hermitian")
    if float(_opnorm(v @ v - eye).max()) > tol:
        failed.append("involution")

    theta = np.linspace(0.0, np.pi, n_tau)
    tau = np.cos(theta)
    rho = np.sin(theta)
    rho[[0, -1]] = 0.0
    v_minus = v[:, s.grid.antipode]
    res = 0.0
    for t, r in zip(tau, rho):
        left = t * eye - 1j * r * v
        right = t * eye - 1j * r * v_minus
        err = _opnorm(left @ right - (t * t + r * r) * eye).max()
        res = max(res, float(err))
    return GluingResult(not failed and res <= tol, res, tuple(failed))


class PolySymbol:
    """Matrix-valued polynomial ``a(k) = sum_alpha c_alpha k^alpha``.

    This is the complete symbol of a constant-coefficient multiplier: each
    monomial is homogeneous, so the degree-``j`` part is read off directly.
    """

    def __init__(self, coefficients: Mapping[Sequence[int], object], rank: int | None = None):
        coeffs = {}
        dim = None
        for alpha, c in coefficients.items():
            alpha = (alpha,) if isinstance(alpha, (int, np.integer)) else tuple(int(a) for a in alpha)
            if dim is None:
                dim = len(alpha)
            elif len(alpha) != dim:
                raise ConfigurationError("inconsistent multi-index lengths")
            if any(a < 0 for a in alpha):
                raise ConfigurationError("exponents must be nonnegative")
            m = np.atleast_2d(np.asarray(c, dtype=complex))
            if rank is None:
                rank = m.shape[0]
            if m.shape == (1, 1) and rank != 1:
                m = m[0, 0] * np.eye(rank)
            if m.shape != (rank, rank):
                raise ConfigurationError(f"coefficient shape {m.shape} does not match rank {rank}")
            coeffs[alpha] = coeffs.get(alpha, 0) + m
        if dim is None:
            raise ConfigurationError("empty polynomial")
        self.coefficients = coeffs
        self.dim = dim
        self.rank = rank

    @property
    def degree(self):
        degs = [sum(a) for a, c in self.coefficients.items() if np.any(c != 0)]
        return max(degs) if degs else 0

    def __call__(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=float))
        out = np.zeros((self.rank, self.rank), dtype=complex)
        for alpha, c in self.coefficients.items():
            out = out + np.prod(k ** np.array(alpha)) * c
        return out

    def evaluate_many(self, ks):
        ks = np.asarray(ks, dtype=float).reshape(-1, self.dim)
        out = np.zeros((ks.shape[0], self.rank, self.rank), dtype=complex)
        for alpha, c in self.coefficients.items():
            mono = np.prod(ks ** np.array(alpha), axis=1)
            out += mono[:, None, None] * c
        return out

    def homogeneous(self, j):
        part = {a: c for a, c in self.coefficients.items() if sum(a) == j}
        if not part:
            part = {(0,) * self.dim: np.zeros((self.rank, self.rank))}
        return PolySymbol(part, self.rank)

    def principal(self, grid: CosphereGrid) -> SymbolSample:
        """Top-degree part on the unit codirections (x-independent)."""
        if grid.dim != self.dim:
            raise StructuralError("grid dimension does not match the polynomial")
        top = self.homogeneous(self.degree)
        vals = top.evaluate_many(grid.codirections)
        vals = np.broadcast_to(vals, (grid.n_base,) + vals.shape)
        return SymbolSample(grid, vals, self.degree)

    def adjoint(self):
        return PolySymbol({a: np.conj(c.T) for a, c in self.coefficients.items()}, self.rank)

    def __add__(self, other):
        if isinstance(other, PolySymbol):
            merged = dict(self.coefficients)
            for a, c in other.coefficients.items():
                merged[a] = merged.get(a, 0) + c
            return PolySymbol(merged, self.rank)
        return NotImplemented

    def __neg__(self):
        return PolySymbol({a: -c for a, c in self.coefficients.items()}, self.rank)

    def __rmul__(self, scalar):
        return PolySymbol({a: scalar * c for a, c in self.coefficients.items()}, self.rank)

    def __matmul__(self, other):
        out = {}
        for a, c in self.coefficients.items():
            for b, d in other.coefficients.items():
                key = tuple(x + y for x, y in zip(a, b))
                out[key] = out.get(key, 0) + c @ d
        return PolySymbol(out, self.rank)

    @staticmethod
    def block(rows):
        """Assemble a block polynomial; ``None`` entries are zero blocks."""
        sizes_r = [next(b.rank for b in row if b is not None) for row in rows]
        sizes_c = [next(rows[i][j].rank for i in range(len(rows)) if rows[i][j] is not None)
                   for j in range(len(rows[0]))]
        if sizes_r != sizes_c:
            raise ConfigurationError("block polynomial must be square with matching ranks")
        dim = next(b.dim for row in rows for b in row if b is not None)
        keys = {a for row in rows for b in row if b is not None for a in b.coefficients}
        total = sum(sizes_r)
        offs = np.concatenate([[0], np.cumsum(sizes_r)])
        out = {}
        for a in keys:
            m = np.zeros((total, total), dtype=complex)
            for i, row in enumerate(rows):
                for j, b in enumerate(row):
                    if b is not None and a in b.coefficients:
                        m[offs[i]:offs[i + 1], offs[j]:offs[j + 1]] = b.coefficients[a]
            out[a] = m
        if not out:
            out[(0,) * dim] = np.zeros((total, total))
        return PolySymbol(out, total)


class AdmissibilityReport(NamedTuple):
    principal_ok: bool
    principal_residual: float
    lower_order_ok: bool | None
    lower_order_residual: float | None
    unchecked: tuple

    @property
    def ok(self):
        return self.principal_ok and self.lower_order_ok is not False


def admissibility_check(principal: SymbolSample | None, complete: PolySymbol | None,
                        order: int, tol: float = 1e-12,
                        grid: CosphereGrid | None = None) -> AdmissibilityReport:
    """Check the parity rule ``a_j(x, -xi) = (-1)^j a_j(x, xi)`` where representable.

    The principal part is checked on ``principal``.  Lower-order homogeneous
    terms can only be read off for polynomial multipliers (``complete``);
    anything else is reported as unchecked.
    """
    kind = "even" if order % 2 == 0 else "odd"
    unchecked = []
    if principal is not None:
        pr = parity_check(principal, kind, tol)
        p_ok, p_res = pr.ok, pr.residual
        grid = grid or principal.grid
    else:
        p_ok, p_res = False, float("inf")
        unchecked.append("principal symbol")
    if complete is None:
        unchecked.append("lower-order terms")
        return AdmissibilityReport(p_ok, p_res, None, None, tuple(unchecked))
    grid = grid or default_grid(complete.dim)
    worst = 0.0
    for j in range(complete.degree + 1):
        part = complete.homogeneous(j)
        plus = part.evaluate_many(grid.codirections)
        minus = part.evaluate_many(-grid.codirections)
        worst = max(worst, float(_opnorm(minus - (-1) ** j * plus).max()))
    return AdmissibilityReport(p_ok, p_res, worst <= tol, worst, tuple(unchecked))
