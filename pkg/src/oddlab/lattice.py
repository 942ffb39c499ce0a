"""Truncated Fourier lattices on S^1 and T^2 and dense operators on them.

Mode enumeration
----------------
Modes are the integer vectors ``k`` with every component in ``[-K, K]``,
listed lexicographically (first component slowest).  The flat index of
fiber component ``a`` at mode number ``m`` is ``m * r + a``: fiber index
fastest.  Matrix dumps use the same order.

Truncation is sharp with zero padding.  An operator that couples modes up
to distance ``b`` (its bandwidth) is only trusted on modes at least ``b``
away from the cutoff.
"""
from __future__ import annotations

import io
import itertools
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.linalg import block_diag

from .errors import ConfigurationError, ShapeError
from .symbols import PolySymbol, SymbolSample, default_grid

__all__ = [
    "ModeLattice",
    "Section",
    "LatticeOperator",
    "assemble_multiplier",
    "assemble_variable_coeff",
    "compose",
    "adjoint",
    "direct_sum",
    "fiber_block",
    "apply",
    "operator_algebra",
    "kernel_dim",
    "identity",
    "constant_matrix",
    "dump_matrix",
    "load_matrix",
    "trusted_modes",
]


@dataclass(frozen=True)
class ModeLattice:
    dim: int
    truncation: int
    fiber_rank: int = 1

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigurationError(f"dim must be 1 (S^1) or 2 (T^2), got {self.dim}")
        if self.truncation < 0:
            raise ConfigurationError("truncation must be nonnegative")
        if self.fiber_rank < 1:
            raise ConfigurationError("fiber rank must be positive")

    @cached_property
    def modes(self) -> np.ndarray:
        rng = range(-self.truncation, self.truncation + 1)
        m = np.array(list(itertools.product(rng, repeat=self.dim)), dtype=int)
        m.flags.writeable = False
        return m

    @property
    def n_modes(self):
        return (2 * self.truncation + 1) ** self.dim

    @property
    def size(self):
        return self.fiber_rank * self.n_modes

    def mode_number(self, k) -> int:
        k = np.atleast_1d(np.asarray(k, dtype=int))
        if k.shape != (self.dim,) or np.any(np.abs(k) > self.truncation):
            raise ConfigurationError(f"mode {k.tolist()} is outside the lattice")
        n = 0
        for c in k:
            n = n * (2 * self.truncation + 1) + int(c) + self.truncation
        return n

    def index(self, k, fiber=0) -> int:
        return self.mode_number(k) * self.fiber_rank + fiber

    def with_fiber(self, r) -> "ModeLattice":
        return ModeLattice(self.dim, self.truncation, r)

    def same_modes(self, other) -> bool:
        return self.dim == other.dim and self.truncation == other.truncation

    def pure_mode(self, k, v=None) -> "Section":
        """The section ``e^{ik.x} (x) v``."""
        r = self.fiber_rank
        v = np.ones(1, dtype=complex) if v is None else np.asarray(v, dtype=complex)
        if v.shape != (r,):
            raise ConfigurationError(f"fiber vector must have length {r}")
        c = np.zeros(self.size, dtype=complex)
        i = self.mode_number(k) * r
        c[i:i + r] = v
        return Section(self, c)


def trusted_modes(lattice: ModeLattice, bandwidth: int) -> np.ndarray:
    """Boolean mask of modes at least ``bandwidth`` away from the cutoff."""
    return np.all(np.abs(lattice.modes) <= lattice.truncation - bandwidth, axis=1)


@dataclass(frozen=True, eq=False)
class Section:
    lattice: ModeLattice
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (self.lattice.size,):
            raise ShapeError(f"expected {self.lattice.size} coefficients, got {c.shape}")
        object.__setattr__(self, "coefficients", c)


_PARITIES = ("even", "odd", "none")


@dataclass(frozen=True, eq=False)
class LatticeOperator:
    """Dense matrix over (mode x fiber) indices.

    ``symbol`` is the declared principal symbol (if known) and ``multiplier``
    the complete polynomial symbol of constant-coefficient operators.
    """

    lattice_in: ModeLattice
    lattice_out: ModeLattice
    entries: np.ndarray
    order: int = 0
    bandwidth: int = 0
    parity: str = "none"
    symbol: SymbolSample | None = None
    multiplier: PolySymbol | None = None
    label: str = ""

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex)
        if e.shape != (self.lattice_out.size, self.lattice_in.size):
            raise ShapeError(
                f"entries shape {e.shape} does not match lattices "
                f"({self.lattice_out.size}, {self.lattice_in.size})"
            )
        if self.parity not in _PARITIES:
            raise ConfigurationError(f"parity must be one of {_PARITIES}")
        if self.bandwidth < 0:
            raise ConfigurationError("bandwidth must be nonnegative")
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)

    @property
    def shape(self):
        return self.entries.shape

    @property
    def is_square(self):
        return self.lattice_in == self.lattice_out

    @property
    def H(self):
        return adjoint(self)

    def norm(self):
        return float(np.linalg.norm(self.entries, 2)) if self.entries.size else 0.0

    def hermiticity_residual(self):
        return float(np.linalg.norm(self.entries - self.entries.conj().T, 2))

    def trusted_in(self):
        """Domain modes whose images are computed without truncation loss."""
        return trusted_modes(self.lattice_in, self.bandwidth)

    def untrusted_entries(self):
        """Entries in a row or column whose mode lies in the cutoff margin."""
        rows = np.repeat(~trusted_modes(self.lattice_out, self.bandwidth), self.lattice_out.fiber_rank)
        cols = np.repeat(~self.trusted_in(), self.lattice_in.fiber_rank)
        return rows[:, None] | cols[None, :]

    def band_mask(self):
        """Entries allowed to be nonzero given the declared bandwidth."""
        mi, mo = self.lattice_in.modes, self.lattice_out.modes
        dist = np.abs(mo[:, None, :] - mi[None, :, :]).max(axis=-1)
        allowed = dist <= self.bandwidth
        return np.kron(allowed, np.ones((self.lattice_out.fiber_rank, self.lattice_in.fiber_rank), bool))

    def with_(self, **changes):
        return replace(self, **changes)

    # arithmetic
    def __matmul__(self, other):
        if isinstance(other, LatticeOperator):
            return compose(self, other)
        if isinstance(other, Section):
            return apply(self, other)
        return NotImplemented

    def __add__(self, other):
        if not isinstance(other, LatticeOperator):
            return NotImplemented
        if self.lattice_in != other.lattice_in or self.lattice_out != other.lattice_out:
            raise ShapeError("cannot add operators on different lattices")
        if self.order == other.order:
            order = self.order
            parity = self.parity if self.parity == other.parity else "none"
            symbol = (self.symbol + other.symbol
                      if self.symbol is not None and other.symbol is not None else None)
        else:
            top = self if self.order > other.order else other
            order, parity, symbol = top.order, top.parity, top.symbol
        mult = (self.multiplier + other.multiplier
                if self.multiplier is not None and other.multiplier is not None else None)
        return LatticeOperator(self.lattice_in, self.lattice_out,
                               self.entries + other.entries, order,
                               max(self.bandwidth, other.bandwidth), parity, symbol, mult)

    def __neg__(self):
        return (-1) * self

    def __sub__(self, other):
        return self + (-other)

    def __rmul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return LatticeOperator(
            self.lattice_in, self.lattice_out, c * self.entries, self.order, self.bandwidth,
            self.parity, None if self.symbol is None else c * self.symbol,
            None if self.multiplier is None else c * self.multiplier, self.label,
        )


def _as_block(a, r):
    m = np.atleast_2d(np.asarray(a, dtype=complex))
    if m.shape != (r, r):
        raise ConfigurationError(f"multiplier value has shape {m.shape}, fiber rank is {r}")
    return m


def _parity_of_degree(m):
    return "even" if m % 2 == 0 else "odd"


def assemble_multiplier(lattice: ModeLattice, a, order: int | None = None,
                        parity: str | None = None, symbol: SymbolSample | None = None,
                        label: str = "") -> LatticeOperator:
    """Block-diagonal operator acting on ``e^{ik.x} v`` by ``a(k) v``.

    ``a`` is a :class:`PolySymbol` (order, parity and principal symbol are
    then derived) or any callable ``k -> r x r``.
    """
    r = lattice.fiber_rank
    if isinstance(a, PolySymbol):
        if a.rank != r:
            raise ConfigurationError(f"polynomial rank {a.rank} does not match fiber rank {r}")
        if a.dim != lattice.dim:
            raise ConfigurationError("polynomial and lattice dimensions differ")
        blocks = list(a.evaluate_many(lattice.modes))
        order = a.degree if order is None else order
        parity = _parity_of_degree(a.degree) if parity is None else parity
        symbol = a.principal(default_grid(lattice.dim)) if symbol is None else symbol
        mult = a
    else:
        blocks = [_as_block(a(k), r) for k in lattice.modes]
        order = 0 if order is None else order
        parity = "none" if parity is None else parity
        mult = None
    return LatticeOperator(lattice, lattice, block_diag(*blocks), order, 0,
                           parity, symbol, mult, label)


def identity(lattice: ModeLattice) -> LatticeOperator:
    return constant_matrix(lattice, np.eye(lattice.fiber_rank), label="Id")


def constant_matrix(lattice: ModeLattice, c, label: str = "") -> LatticeOperator:
    """Order-zero multiplier by a constant fiber matrix (an even operator)."""
    c = _as_block(c, lattice.fiber_rank)
    poly = PolySymbol({(0,) * lattice.dim: c})
    return assemble_multiplier(lattice, poly, label=label)


def _harmonics(c, dim):
    if isinstance(c, Mapping):
        out = {}
        for j, v in c.items():
            j = (j,) if isinstance(j, (int, np.integer)) else tuple(int(x) for x in j)
            if len(j) != dim:
                raise ConfigurationError(f"harmonic {j} has wrong dimension")
            out[j] = v
        return out
    return {(0,) * dim: c}


def assemble_variable_coeff(lattice: ModeLattice, terms: Sequence, n_base: int | None = None,
                            label: str = "") -> LatticeOperator:
    """Assemble ``sum_t c_t(x) b_t(D)`` for trigonometric-polynomial ``c_t``.

    Each term is ``(c, b)``: ``c`` is a mapping ``harmonic -> coefficient``
    (scalar or fiber matrix) or a constant; ``b`` is a :class:`PolySymbol`,
    a constant, or a callable ``k -> r x r``.  Entry block ``(k', k)`` is
    ``c_hat(k' - k) b(k)``; the bandwidth is the largest harmonic.
    """
    r, K, dim = lattice.fiber_rank, lattice.truncation, lattice.dim
    modes = lattice.modes
    n = lattice.n_modes
    blocks = np.zeros((n, r, n, r), dtype=complex)
    bandwidth = 0
    orders = []
    principal_parts = []
    for c, b in terms:
        harm = _harmonics(c, dim)
        if isinstance(b, PolySymbol):
            bvals = b.evaluate_many(modes)
            orders.append(b.degree)
            principal_parts.append((harm, b))
        elif callable(b):
            bvals = np.array([_as_block(b(k), r) for k in modes])
            orders.append(None)
            principal_parts.append(None)
        else:
            bm = _as_block(b, r) if np.ndim(b) else np.asarray(b) * np.eye(r)
            bvals = np.broadcast_to(bm, (n, r, r))
            poly = PolySymbol({(0,) * dim: bm})
            orders.append(0)
            principal_parts.append((harm, poly))
        for j, cj in harm.items():
            deg = max(abs(x) for x in j)
            if deg > K:
                raise ConfigurationError(f"harmonic {j} exceeds truncation K={K}")
            bandwidth = max(bandwidth, deg)
            cm = np.asarray(cj, dtype=complex)
            cm = cm * np.eye(r) if cm.ndim == 0 else _as_block(cm, r)
            target = modes + np.array(j)
            ok = np.all(np.abs(target) <= K, axis=1)
            src = np.nonzero(ok)[0]
            dst = np.array([lattice.mode_number(t) for t in target[ok]], dtype=int)
            blocks[dst, :, src, :] += np.einsum("ab,nbc->nac", cm, bvals[src])
    entries = blocks.reshape(n * r, n * r)

    if any(o is None for o in orders):
        order, parity, symbol = max((o for o in orders if o is not None), default=0), "none", None
    else:
        order = max(orders)
        parity = _parity_of_degree(order)
        if n_base is None:
            n_base = 256 if dim == 1 else 32
        grid = default_grid(dim, n_base if bandwidth else 1)
        vals = 0
        for harm, poly in principal_parts:
            if poly.degree != order:
                continue
            top = poly.homogeneous(order).evaluate_many(grid.codirections)  # (n_xi, r, r)
            cx = np.zeros((grid.n_base, r, r), dtype=complex)
            for j, cj in harm.items():
                cm = np.asarray(cj, dtype=complex)
                cm = cm * np.eye(r) if cm.ndim == 0 else cm
                phase = np.exp(1j * grid.base_points @ np.array(j, dtype=float))
                cx += phase[:, None, None] * cm
            vals = vals + np.einsum("xab,dbc->xdac", cx, top)
        symbol = SymbolSample(grid, vals, order)
    return LatticeOperator(lattice, lattice, entries, order, bandwidth, parity, symbol, None, label)


def _compose_parity(p, q):
    if "none" in (p, q):
        return "none"
    return "even" if p == q else "odd"


def compose(op1: LatticeOperator, op2: LatticeOperator) -> LatticeOperator:
    """``op1 o op2``: orders and bandwidths add."""
    if op1.lattice_in != op2.lattice_out:
        raise ShapeError("cannot compose: inner lattices differ")
    symbol = None
    if op1.symbol is not None and op2.symbol is not None:
        symbol = op1.symbol @ op2.symbol
    mult = None
    if op1.multiplier is not None and op2.multiplier is not None:
        mult = op1.multiplier @ op2.multiplier
    return LatticeOperator(op2.lattice_in, op1.lattice_out, op1.entries @ op2.entries,
                           op1.order + op2.order, op1.bandwidth + op2.bandwidth,
                           _compose_parity(op1.parity, op2.parity), symbol, mult)


def adjoint(op: LatticeOperator) -> LatticeOperator:
    return LatticeOperator(
        op.lattice_out, op.lattice_in, op.entries.conj().T, op.order, op.bandwidth, op.parity,
        None if op.symbol is None else op.symbol.adjoint(),
        None if op.multiplier is None else op.multiplier.adjoint(),
        f"{op.label}*" if op.label else "",
    )


def fiber_block(rows: Sequence[Sequence[LatticeOperator | None]], label: str = "") -> LatticeOperator:
    """Block operator over concatenated fibers (``None`` is a zero block).

    All blocks must share the same mode set; the result lives on the lattice
    whose fiber rank is the sum of the block fiber ranks.
    """
    nr, nc = len(rows), len(rows[0])
    ops = [b for row in rows for b in row if b is not None]
    if not ops:
        raise ShapeError("block operator needs at least one nonzero block")
    base = ops[0].lattice_in
    r_out = [None] * nr
    r_in = [None] * nc
    for i, row in enumerate(rows):
        if len(row) != nc:
            raise ShapeError("ragged block layout")
        for j, b in enumerate(row):
            if b is None:
                continue
            if not (b.lattice_in.same_modes(base) and b.lattice_out.same_modes(base)):
                raise ShapeError("blocks live on different mode sets")
            for arr, idx, val in ((r_out, i, b.lattice_out.fiber_rank), (r_in, j, b.lattice_in.fiber_rank)):
                if arr[idx] is None:
                    arr[idx] = val
                elif arr[idx] != val:
                    raise ShapeError("inconsistent fiber ranks in block layout")
    if None in r_out or None in r_in:
        raise ShapeError("every block row and column needs a nonzero block")
    n = base.n_modes
    ro, ri = np.concatenate([[0], np.cumsum(r_out)]), np.concatenate([[0], np.cumsum(r_in)])
    out = np.zeros((n, ro[-1], n, ri[-1]), dtype=complex)
    for i, row in enumerate(rows):
        for j, b in enumerate(row):
            if b is not None:
                out[:, ro[i]:ro[i + 1], :, ri[j]:ri[j + 1]] = b.entries.reshape(
                    n, r_out[i], n, r_in[j])
    lat_out = base.with_fiber(int(ro[-1]))
    lat_in = base.with_fiber(int(ri[-1]))

    order = max(b.order for b in ops)
    parities = {b.parity for b in ops if b.order == order}
    parity = parities.pop() if len(parities) == 1 else "none"
    symbol = _block_symbol(rows, r_out, r_in, order)
    mult = None
    if nr == nc and r_out == r_in and all(b.multiplier is not None for b in ops):
        mult = PolySymbol.block([[None if b is None else b.multiplier for b in row] for row in rows])
    return LatticeOperator(lat_in, lat_out, out.reshape(n * ro[-1], n * ri[-1]), order,
                           max(b.bandwidth for b in ops), parity, symbol, mult, label)


def _block_symbol(rows, r_out, r_in, order):
    syms = [b.symbol for row in rows for b in row if b is not None and b.order == order]
    if not syms or any(s is None for s in syms):
        return None
    grid = max(syms, key=lambda s: s.grid.n_base).grid
    ro, ri = np.concatenate([[0], np.cumsum(r_out)]), np.concatenate([[0], np.cumsum(r_in)])
    vals = np.zeros((grid.n_base, grid.n_directions, ro[-1], ri[-1]), dtype=complex)
    for i, row in enumerate(rows):
        for j, b in enumerate(row):
            if b is None or b.order != order:
                continue
            if not b.symbol.grid.same_directions(grid):
                return None
            vals[:, :, ro[i]:ro[i + 1], ri[j]:ri[j + 1]] = b.symbol.values
    return SymbolSample(grid, vals, order)


def direct_sum(op1: LatticeOperator, op2: LatticeOperator) -> LatticeOperator:
    return fiber_block([[op1, None], [None, op2]])


def apply(op: LatticeOperator, u: Section) -> Section:
    if u.lattice != op.lattice_in:
        raise ShapeError("section lives on a different lattice")
    return Section(op.lattice_out, op.entries @ u.coefficients)


def operator_algebra(op1, op2, kind):
    """Dispatch ``compose``, ``adjoint`` (of ``op1``), ``direct_sum`` or ``apply``."""
    if kind == "compose":
        return compose(op1, op2)
    if kind == "adjoint":
        return adjoint(op1)
    if kind == "direct_sum":
        return direct_sum(op1, op2)
    if kind == "apply":
        return apply(op1, op2)
    raise ConfigurationError(f"unknown operation {kind!r}")


def kernel_dim(op, rank_tol: float = 1e-8) -> int:
    """Number of right singular directions below ``rank_tol * sigma_max``.

    For an ``m x n`` matrix this is ``n - rank``.  The zero operator has full
    kernel.
    """
    m = op.entries if isinstance(op, LatticeOperator) else np.asarray(op)
    if rank_tol <= 0:
        raise ConfigurationError("rank_tol must be positive")
    n = m.shape[1]
    if m.size == 0:
        return n
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0:
        return n
    return n - int(np.count_nonzero(s > rank_tol * s[0]))


_HEADER = re.compile(r"#\s*lattice\s+dim=(\d+)\s+K=(\d+)\s+r=(\d+)")


def _fmt(z):
    return f"{z.real:.17g}{z.imag:+.17g}i"


def dump_matrix(op, fp=None, lattice: ModeLattice | None = None) -> str:
    """Write the CSV matrix dump; returns the text and writes it if ``fp`` is given.

    The header records the domain lattice.
    """
    if isinstance(op, LatticeOperator):
        m, lattice = op.entries, op.lattice_in
    else:
        m = np.asarray(op, dtype=complex)
        if lattice is None:
            raise ConfigurationError("a raw matrix dump needs its lattice")
    buf = io.StringIO()
    buf.write(f"# lattice dim={lattice.dim} K={lattice.truncation} r={lattice.fiber_rank}\n")
    for row in m:
        buf.write(",".join(_fmt(z) for z in row))
        buf.write("\n")
    text = buf.getvalue()
    if fp is not None:
        Path(fp).write_text(text, encoding="utf-8")
    return text


def load_matrix(source) -> tuple[ModeLattice, np.ndarray]:
    """Parse a CSV matrix dump from a path or from dump text."""
    text = source if isinstance(source, str) and source.lstrip().startswith("#") \
        else Path(source).read_text(encoding="utf-8")
    lines = text.splitlines()
    hdr = _HEADER.match(lines[0].strip()) if lines else None
    if not hdr:
        raise ConfigurationError("missing '# lattice dim=.. K=.. r=..' header")
    lattice = ModeLattice(int(hdr[1]), int(hdr[2]), int(hdr[3]))
    rows = [[complex(t.strip()[:-1] + "j") for t in ln.split(",")] for ln in lines[1:] if ln.strip()]
    return lattice, np.array(rows, dtype=complex)
