"""Experiment configs, the built-in catalog and the named checks behind it.

A config is a JSON object::

    {"name": "example6", "manifold": "t2", "truncation": 3, "seed": 0,
     "operator": "multiplier:k1+I*k2", "subspace": "positive",
     "checks": ["example6"], "tolerances": {"rank_tol": 1e-8}}

Every check returns a :class:`CheckOutcome` whose payload holds index
reports, dimension results, eta results and plain values.  Reports are
rendered as JSON with sorted keys so that identical inputs give identical
bytes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from typing import Callable

import numpy as np
import scipy.linalg
import sympy

from . import __version__
from . import builtins as B
from .errors import ConfigurationError, OddlabError, PathError
from .exact import DimensionResult, dyadic_from_json, dyadic_json
from .homotopy import (ProjectionPath, orthogonalize_metric, transport_projection_path)
from .index import (IndexReport, example6_verify, gladk_check, half_index_check, oba_check,
                    summand_subspace, toeplitz_formula_check, winding_number)
from .lattice import (LatticeOperator, ModeLattice, assemble_multiplier, compose, constant_matrix,
                      direct_sum, identity)
from .spectral import (build_A_from_projection, d_via_eta, d_via_relative_index, eigen_projection,
                       eta_invariant, hamiltonian_from_D, positive_projection_formula)
from .subspaces import (complement, finite_rank_extend, make_subspace, nonnegative_spectral_subspace,
                        relative_index, transform_subspace, with_dimension)
from .symbols import (PolySymbol, SymbolSample, boundary_gluing_check, circle_grid, clifford_generators,
                      clifford_symbol, fund_extension, odd_projection_check, parity_check,
                      positive_symbol_projection, rank_constraint_check, torus_grid)

__all__ = [
    "ExperimentConfig",
    "CheckOutcome",
    "CATALOG",
    "CHECKS",
    "list_experiments",
    "load_config",
    "run_config",
    "render_json",
    "validate_report",
    "report_schema",
]

DEFAULT_TOLERANCES = {"rank_tol": 1e-8, "sym_tol": 1e-10, "pair_tol": 1e-9}
_FIELDS = ("name", "manifold", "truncation", "seed", "operator", "subspace", "checks",
           "tolerances", "expected")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    manifold: str
    truncation: int
    seed: int = 0
    operator: str | None = None
    subspace: str | None = None
    checks: tuple = ()
    tolerances: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, obj) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigurationError("config must be a JSON object")
        unknown = set(obj) - set(_FIELDS)
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
        for key in ("name", "manifold", "truncation", "checks"):
            if key not in obj:
                raise ConfigurationError(f"config is missing {key!r}")
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(obj.get("tolerances") or {})
        cfg = cls(str(obj["name"]), obj["manifold"], obj["truncation"], obj.get("seed", 0),
                  obj.get("operator"), obj.get("subspace"), tuple(obj["checks"]), tol,
                  dict(obj.get("expected") or {}))
        cfg.validate()
        return cfg

    def validate(self):
        if self.manifold not in ("s1", "t2"):
            raise ConfigurationError(f"manifold must be 's1' or 't2', got {self.manifold!r}")
        if not isinstance(self.truncation, int) or isinstance(self.truncation, bool) or self.truncation < 0:
            raise ConfigurationError("truncation must be a nonnegative integer")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigurationError("seed must be an integer")
        if not self.checks:
            raise ConfigurationError("config lists no checks")
        bad = [c for c in self.checks if c not in CHECKS]
        if bad:
            raise ConfigurationError(f"unknown checks: {bad}")
        for k, v in self.tolerances.items():
            if k not in DEFAULT_TOLERANCES:
                raise ConfigurationError(f"unknown tolerance {k!r}")
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0 or not math.isfinite(v):
                raise ConfigurationError(f"tolerance {k} must be a positive number")
        for k, v in self.expected.items():
            _expected_value(k, v)
        if self.operator is not None:
            build_operator(self)
        if self.subspace is not None:
            _validate_subspace(self)
        for c in self.checks:
            need = CHECKS[c].manifold
            if need is not None and need != self.manifold:
                raise ConfigurationError(f"check {c!r} runs on {need}, config says {self.manifold}")

    def to_json(self):
        return {
            "name": self.name, "manifold": self.manifold, "truncation": self.truncation,
            "seed": self.seed, "operator": self.operator, "subspace": self.subspace,
            "checks": list(self.checks), "tolerances": dict(sorted(self.tolerances.items())),
            "expected": {k: self.expected[k] for k in sorted(self.expected)},
        }

    @property
    def rank_tol(self):
        return self.tolerances["rank_tol"]

    @property
    def sym_tol(self):
        return self.tolerances["sym_tol"]

    @property
    def pair_tol(self):
        return self.tolerances["pair_tol"]


def _expected_value(key, v):
    if isinstance(v, bool):
        raise ConfigurationError(f"expected value {key!r} must be a number")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, dict) and set(v) == {"num", "log2_den"}:
        return dyadic_from_json(v)
    raise ConfigurationError(f"expected value {key!r} must be an integer or a dyadic object")


# operator and subspace specs

_SYMBOLS = {"s1": sympy.symbols("k", real=True), "t2": sympy.symbols("k1 k2", real=True)}


def parse_multiplier(expr: str, manifold: str) -> PolySymbol:
    """Scalar polynomial multiplier from a sympy expression in ``k`` or ``k1, k2``."""
    gens = _SYMBOLS[manifold]
    gens = (gens,) if manifold == "s1" else gens
    names = {str(g): g for g in gens}
    try:
        e = sympy.sympify(expr, locals=names)
        poly = sympy.Poly(e, *gens)
    except (sympy.SympifyError, sympy.PolynomialError, TypeError, SyntaxError) as exc:
        raise ConfigurationError(f"cannot parse multiplier {expr!r}: {exc}") from exc
    coeffs = {tuple(int(x) for x in m): complex(c) for m, c in poly.terms()}
    if not coeffs:
        coeffs = {(0,) * len(gens): 0.0}
    return PolySymbol(coeffs)


def build_operator(cfg: ExperimentConfig, K: int | None = None) -> LatticeOperator:
    K = cfg.truncation if K is None else K
    spec = cfg.operator or ""
    dim = 1 if cfg.manifold == "s1" else 2
    if spec == "dirac":
        if cfg.manifold != "t2":
            raise ConfigurationError("the Dirac operator lives on t2")
        if K < 1:
            raise ConfigurationError("Dirac needs truncation >= 1 for a nonzero mode")
        return B.dirac(K)
    if spec == "hardy":
        if cfg.manifold != "s1":
            raise ConfigurationError("the Hardy operator lives on s1")
        return B.circle_derivative(K)
    if spec.startswith("multiplier:"):
        poly = parse_multiplier(spec[len("multiplier:"):], cfg.manifold)
        return assemble_multiplier(ModeLattice(dim, K, 1), poly, label=spec)
    if spec.startswith("clifford:"):
        try:
            n = int(spec[len("clifford:"):])
        except ValueError as exc:
            raise ConfigurationError(f"bad clifford spec {spec!r}") from exc
        if n < dim:
            raise ConfigurationError(f"clifford:{n} needs at least {dim} generators")
        gens = clifford_generators(n)
        coeffs = {tuple(int(i == j) for i in range(dim)): gens[j] for j in range(dim)}
        return assemble_multiplier(ModeLattice(dim, K, 2 ** n), PolySymbol(coeffs), label=spec)
    raise ConfigurationError(f"unknown operator spec {spec!r}")


def _validate_subspace(cfg):
    spec = cfg.subspace
    if spec == "hardy" and cfg.manifold != "s1":
        raise ConfigurationError("the Hardy space lives on s1")
    if spec in ("dirac+", "dirac") and (cfg.manifold != "t2" or cfg.truncation < 1):
        raise ConfigurationError("the Dirac subspace needs t2 and truncation >= 1")
    if spec not in ("hardy", "dirac+", "dirac", "positive"):
        raise ConfigurationError(f"unknown subspace spec {spec!r}")
    if spec == "positive" and cfg.operator is None:
        raise ConfigurationError("subspace 'positive' needs an operator")


# outcomes


@dataclass
class CheckOutcome:
    name: str
    index_reports: list = field(default_factory=list)
    dimension_results: list = field(default_factory=list)
    eta_results: list = field(default_factory=list)
    values: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def require(self, ok, clause):
        if not ok:
            self.failures.append(clause)
        return bool(ok)

    def index(self, report: IndexReport):
        self.index_reports.append(report)
        return report

    def dimension(self, label, d: DimensionResult):
        self.dimension_results.append((label, d))
        return d

    @property
    def passed(self):
        return not self.failures and all(r.passed for r in self.index_reports)

    def to_json(self):
        return {
            "name": self.name,
            "pass": self.passed,
            "index_reports": [r.to_json() for r in self.index_reports],
            "dimension_results": [dict(label=lab, **d.to_json()) for lab, d in self.dimension_results],
            "eta_results": [dict(label=lab, **e.to_json()) for lab, e in self.eta_results],
            "values": {k: _jsonable(v) for k, v in sorted(self.values.items())},
            "failures": list(self.failures),
        }


def _jsonable(v):
    if isinstance(v, Fraction):
        return dyadic_json(v)
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return str(v)


@dataclass(frozen=True)
class Check:
    fn: Callable
    manifold: str | None
    description: str


CHECKS: dict[str, Check] = {}


def _check(name, manifold, description):
    def deco(fn):
        CHECKS[name] = Check(fn, manifold, description)
        return fn
    return deco


def _expect(out: CheckOutcome, cfg, key, value):
    if key in cfg.expected:
        want = _expected_value(key, cfg.expected[key])
        out.require(Fraction(value) == want, f"{key} = {want}")


# checks


@_check("hardy-symbol", "s1", "Hardy space symbol table and oddness")
def _hardy_symbol(cfg, out):
    grid = circle_grid(8)
    table = B.hardy_symbol(grid)
    computed = positive_symbol_projection(B.circle_derivative_symbol().principal(grid), cfg.sym_tol)
    plus = grid.codirections[:, 0] > 0
    out.values["table_plus"] = float(np.abs(table.values[:, plus] - 1).max())
    out.values["table_minus"] = float(np.abs(table.values[:, ~plus]).max())
    out.values["symbol_vs_table"] = float(np.abs(computed.values - table.values).max())
    out.require(out.values["table_plus"] == 0 and out.values["table_minus"] == 0, "table values")
    out.require(out.values["symbol_vs_table"] <= cfg.sym_tol, "spectral symbol equals table")
    chk = odd_projection_check(computed, cfg.sym_tol)
    out.values["odd_residual"] = max(chk.idempotence_residual, chk.oddness_residual)
    out.require(chk.ok, "odd projection")
    H = B.hardy_space(cfg.truncation)
    modes = H.ambient.modes[:, 0]
    diag_ok = np.allclose(np.diag(H.projection.entries), (modes >= 0).astype(float), atol=cfg.rank_tol)
    out.values["hardy_rank"] = H.rank
    out.require(diag_ok and H.rank == cfg.truncation + 1, "Hardy projection keeps modes k >= 0")


@_check("hardy-toeplitz", "s1", "Toeplitz indices against winding numbers")
def _hardy_toeplitz(cfg, out):
    K = cfg.truncation
    indices, stable = [], True
    for n in (1, 2, 3):
        reps = []
        for k in (K, K + 1):
            H = B.hardy_space(k)
            r = toeplitz_formula_check(B.fourier_shift(k, n), H, H, cfg.rank_tol)
            r.name = f"shift{n}-K{k}"
            reps.append(out.index(r))
        phi = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        w = winding_number(np.exp(1j * n * phi))
        out.require(reps[0].lhs == -w, f"index of e^(i{n}phi) equals minus winding")
        stable &= reps[0].lhs == reps[1].lhs
        indices.append(reps[0].lhs)
    out.values["indices"] = indices
    out.require(stable, "truncation stability")
    H = B.hardy_space(K)
    Id = identity(H.ambient)
    r = toeplitz_formula_check(Id, H, finite_rank_extend(H, 2), cfg.rank_tol)
    r.name = "identity-into-extension"
    out.index(r)
    out.require(r.lhs == -2, "identity into a 2-larger target has index -2")
    r = toeplitz_formula_check(Id, H, H, cfg.rank_tol)
    r.name = "identity"
    out.index(r)


@_check("dirac-eta", None, "eta invariant of the declared operator")
def _dirac_eta(cfg, out):
    A = build_operator(replace(cfg, operator=cfg.operator or "dirac"))
    eta = eta_invariant(A, cfg.pair_tol, cfg.rank_tol)
    out.eta_results.append((A.label, eta))
    out.require(eta.exactness_flag, "eta in the finite-asymmetry class")
    d = out.dimension(f"d(L+({A.label}))", d_via_eta(A, None, cfg.pair_tol, cfg.rank_tol, cfg.sym_tol))
    out.values["eta"] = eta.value
    _expect(out, cfg, "eta", eta.value)
    _expect(out, cfg, "d", d.value)


@_check("dirac-d-equality", "t2", "d by eta against d by relative index, K = 1..truncation")
def _dirac_d_equality(cfg, out):
    if cfg.truncation < 1:
        raise ConfigurationError("Dirac needs truncation >= 1")
    equal = True
    for K in range(1, cfg.truncation + 1):
        A = B.dirac(K)
        de = out.dimension(f"eta:K{K}", d_via_eta(A, None, cfg.pair_tol, cfg.rank_tol, cfg.sym_tol))
        L = B.dirac_positive(K)
        dr = out.dimension(f"relative-index:K{K}", d_via_relative_index(L, B.sigma3(L.ambient), 0,
                                                                        cfg.sym_tol, cfg.rank_tol))
        equal &= de.value == dr.value
        _expect(out, cfg, "d", de.value)
    out.require(equal, "both routes agree exactly")


def _d_rel(L, U, cfg):
    return d_via_relative_index(L, U, 0, cfg.sym_tol, cfg.rank_tol)


def _random_even_invertible(rng, r):
    """Constant ``c I + G`` with a Gaussian ``G``; well conditioned for the default scale."""
    g = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
    return 2.0 * np.eye(r) + 0.5 * g


@_check("thmn-properties", "t2", "relative dimension, complement and invariance of d")
def _thmn(cfg, out):
    K = max(cfg.truncation, 1)
    L = B.dirac_positive(K)
    s3 = B.sigma3(L.ambient)
    d0 = out.dimension("d(L+)", _d_rel(L, s3, cfg))
    for k in (1, 2, 3):
        Lk = finite_rank_extend(L, k)
        dk = out.dimension(f"d(L+ + {k})", _d_rel(Lk, s3, cfg))
        out.require(dk.value - d0.value == k, f"relative dimension +{k}")
    Lc = complement(L)
    dc = out.dimension("d(L-)", _d_rel(Lc, s3, cfg))
    out.require(dc.value + d0.value == 0, "complement antisymmetry")
    rng = np.random.default_rng(cfg.seed)
    for i in range(5):
        c = _random_even_invertible(rng, 2)
        C = constant_matrix(L.ambient, c, label=f"C{i}")
        CL = transform_subspace(C, L)
        W = constant_matrix(L.ambient, c @ B.SIGMA_3 @ np.linalg.inv(c), label=f"C{i}.s3.C{i}^-1")
        dC = out.dimension(f"d(C{i} L+)", _d_rel(CL, W, cfg))
        out.require(dC.value == d0.value, f"invariance under C{i}")
    out.values["seed"] = cfg.seed


@_check("oba-suite", "t2", "index formula for operators between odd subspaces")
def _oba(cfg, out):
    K = max(cfg.truncation, 1)
    A = B.dirac(K)
    L = with_dimension(B.dirac_positive(K), d_via_eta(A, None, cfg.pair_tol, cfg.rank_tol, cfg.sym_tol))
    lat = L.ambient
    Id, s3 = identity(lat), B.sigma3(lat)
    r = oba_check(Id, L, L, Id, cfg.rank_tol, cfg.sym_tol)
    r.name = "identity"
    out.index(r)

    S = transform_subspace(s3, L, label="s3.L+")
    S = with_dimension(S, _d_rel(S, s3, cfg))
    r = oba_check(s3, L, S, s3, cfg.rank_tol, cfg.sym_tol)
    r.name = "sigma3-mapped"
    out.index(r)
    out.require(r.lhs == 0 and S.dimension.value == 1, "sigma3 instance 0 = 0 + 1 - 1")

    E = finite_rank_extend(L, 1)
    E = with_dimension(E, _d_rel(E, s3, cfg))
    r = oba_check(Id, L, E, Id, cfg.rank_tol, cfg.sym_tol)
    r.name = "identity-into-extension"
    out.index(r)
    out.require(r.lhs == -1, "extension by one gives -1")


def _example6_data(D, cfg, extend=0):
    A = hamiltonian_from_D(D)
    rE = D.lattice_in.fiber_rank
    L = nonnegative_spectral_subspace(A, cfg.rank_tol, label=f"L+({A.label})")
    L = with_dimension(L, d_via_eta(A, None, cfg.pair_tol, cfg.rank_tol, cfg.sym_tol))
    if extend:
        U = constant_matrix(L.ambient, np.diag([1.0] * rE + [-1.0] * rE), label="grading")
        L = finite_rank_extend(L, extend)
        L = with_dimension(L, _d_rel(L, U, cfg))
    F = summand_subspace(L.ambient, rE, 2 * rE, "F")
    P0 = F.projection.with_(label="P0")
    D_tilde = direct_sum(D, identity(D.lattice_out))
    return P0, L, F, D_tilde


@_check("gladk-suite", "t2", "index formula for operators from a subspace to a full space")
def _gladk(cfg, out):
    K = max(cfg.truncation, 1)
    D = build_operator(replace(cfg, operator=cfg.operator or "multiplier:k1+I*k2"), K)
    cases = [("example", D, 0, 1), ("doubled", direct_sum(D, D), 0, 2), ("extended", D, 1, 2)]
    for name, op, extend, want in cases:
        P0, L, F, Dt = _example6_data(op, cfg, extend)
        r = gladk_check(P0, L, Dt, cfg.rank_tol, F, cfg.sym_tol)
        r.name = name
        out.index(r)
        out.require(r.lhs == want, f"{name}: index {want}")


@_check("half-index-suite", "t2", "half-index identity for even operators")
def _half(cfg, out):
    K = max(cfg.truncation, 1)
    L = B.dirac_positive(K)
    lat = L.ambient
    # ((k1^2 - 1)^2 + k2^4) Id: zeros at k = (+-1, 0)
    i2 = np.eye(2)
    bump = PolySymbol({(4, 0): i2, (2, 0): -2 * i2, (0, 0): i2, (0, 4): i2})
    Dir = B.dirac(K)
    cases = [
        ("identity", identity(lat)),
        ("symmetric-zeros", assemble_multiplier(lat, bump, label="symmetric-zeros")),
        ("dirac-squared", compose(Dir, Dir) - L.projection.with_(order=0)),
    ]
    for name, op, in cases:
        r = half_index_check(op, L, cfg.rank_tol, cfg.sym_tol)
        r.name = name
        out.index(r)


@_check("example6", "t2", "operator from a spectral subspace onto the second summand")
def _example6(cfg, out):
    D = build_operator(replace(cfg, operator=cfg.operator or "multiplier:k1+I*k2"))
    r = out.index(example6_verify(D, cfg.rank_tol, cfg.pair_tol))
    A = hamiltonian_from_D(D)
    eta = eta_invariant(A, cfg.pair_tol, cfg.rank_tol)
    out.eta_results.append((A.label, eta))
    out.values["index"] = r.lhs
    out.values["eta"] = eta.value
    _expect(out, cfg, "index", r.lhs)
    _expect(out, cfg, "eta", eta.value)


def _rotating_frame(x):
    c, s = np.cos(x[0]), np.sin(x[0])
    return np.array([[c, s, 0.3], [-s, c, 0.1]])


@_check("clifford-oddness", "t2", "odd projections from Pauli and Clifford symbols")
def _clifford(cfg, out):
    grid = torus_grid(4)
    sym = {"pauli": B.pauli_symbol(grid), "clifford:3": clifford_symbol(3, _rotating_frame, grid)}
    for name, s in sym.items():
        p = positive_symbol_projection(s, cfg.sym_tol)
        chk = odd_projection_check(p, cfg.sym_tol)
        out.values[f"{name}:idempotence"] = chk.idempotence_residual
        out.values[f"{name}:oddness"] = chk.oddness_residual
        out.require(chk.ok, f"{name} positive projection is odd")
        rank = int(round(np.trace(p.values[0, 0]).real))
        out.values[f"{name}:rank"] = rank
        out.require(rank_constraint_check(rank, grid.dim), f"{name} rank constraint")
    p = positive_symbol_projection(sym["pauli"], cfg.sym_tol)
    ext = fund_extension(SymbolSample.constant(grid, B.SIGMA_3), p, cfg.sym_tol)
    par = parity_check(ext, "even", cfg.sym_tol)
    out.values["extension_even_residual"] = par.residual
    out.require(par.ok, "doubled symbol is even")


@_check("gluing-check", "t2", "continuity of glued symbols at the boundary")
def _gluing(cfg, out):
    res = boundary_gluing_check(B.pauli_symbol(torus_grid(4)), 1e-12)
    out.values["pauli_residual"] = res.residual
    out.require(res.ok, "Pauli boundary symbol glues")
    bad = boundary_gluing_check(SymbolSample.constant(torus_grid(), B.SIGMA_3), 1e-12)
    out.values["even_symbol_rejected"] = not bad.ok
    out.require(not bad.ok and "odd" in bad.failed, "even symbol is rejected")


def _rot(a):
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


@_check("transport-suite", None, "transport of projections along homotopies")
def _transport(cfg, out):
    P0, th = np.diag([1.0, 0.0]), np.pi / 3
    rot = transport_projection_path(ProjectionPath.parametric(lambda t: _rot(t * th) @ P0 @ _rot(-t * th)), 100)
    out.values["rotation_range_residual"] = rot.range_residual
    out.values["rotation_unitarity_drift"] = rot.unitarity_drift
    out.require(rot.range_residual <= 1e-8, "rotation path range residual")
    out.require(rot.unitarity_drift <= 1e-6, "rotation path unitarity")
    const = transport_projection_path(ProjectionPath.sampled([P0] * 11), 100)
    out.values["constant_deviation"] = float(np.abs(const.U - np.eye(2)).max())
    out.require(out.values["constant_deviation"] <= 1e-10, "constant path gives identity")
    try:
        transport_projection_path(ProjectionPath.sampled([np.diag([1.0, 0, 0]), np.diag([1.0, 1, 0])]))
        rejected = False
    except PathError:
        rejected = True
    out.values["rank_jump_rejected"] = rejected
    out.require(rejected, "rank jump rejected")

    # d is constant along a path of odd subspaces
    L = B.dirac_positive(1)
    lat = L.ambient
    x = np.array([[0.4, 0.3 - 0.2j], [0.3 + 0.2j, -0.1]])
    P = L.projection.entries

    def conj(t):
        c = np.kron(np.eye(lat.n_modes), scipy.linalg.expm(-1j * t * x))
        return c @ P @ c.conj().T

    tr = transport_projection_path(ProjectionPath.parametric(conj, 21), 40)
    U = L.projection.with_(entries=tr.U, symbol=None, label="transport")
    L1 = transform_subspace(U, L)
    c1 = scipy.linalg.expm(-1j * x)
    W = constant_matrix(lat, c1 @ B.SIGMA_3 @ c1.conj().T, label="conjugated-grading")
    d0 = out.dimension("d(L_0)", _d_rel(L, B.sigma3(lat), cfg))
    d1 = out.dimension("d(L_1)", _d_rel(L1, W, cfg))
    out.values["path_range_residual"] = tr.range_residual
    out.require(d0.value == d1.value, "d constant along the path")


def _skewed_subspace(K):
    lat = ModeLattice(1, K, 2)
    a = np.array([[1.0, 2.0], [0.0, 0.0]], dtype=complex)
    grid = circle_grid(4)
    sym = SymbolSample.from_function(grid, lambda x, xi: a if xi[0] > 0 else np.eye(2) - a)
    blocks = [a if k[0] >= 0 else np.eye(2) - a for k in lat.modes]
    P = LatticeOperator(lat, lat, scipy.linalg.block_diag(*blocks), symbol=sym, label="skewed")
    return make_subspace(P, sym, "skewed", "skewed")


@_check("orthogonalize-suite", None, "orthogonalization of oblique odd subspaces")
def _orth(cfg, out):
    L = _skewed_subspace(max(cfg.truncation, 1))
    U, img = orthogonalize_metric(L, cfg.sym_tol)
    out.values["hermitian_residual"] = img.projection.hermiticity_residual()
    out.require(out.values["hermitian_residual"] <= 1e-10, "orthogonalized projection is Hermitian")
    par = parity_check(U.symbol, "even", cfg.sym_tol)
    out.values["U_even_residual"] = par.residual
    out.require(par.ok, "U has an even symbol")
    U2, _ = orthogonalize_metric(img, cfg.sym_tol)
    out.values["second_pass_deviation"] = float(np.abs(U2.entries - np.eye(U2.shape[0])).max())
    out.require(out.values["second_pass_deviation"] <= 1e-10, "second pass is the identity")
    H = B.hardy_space(max(cfg.truncation, 1))
    Uh, _ = orthogonalize_metric(H, cfg.sym_tol)
    out.values["orthogonal_input_deviation"] = float(np.abs(Uh.entries - np.eye(Uh.shape[0])).max())
    out.require(out.values["orthogonal_input_deviation"] <= 1e-10, "orthogonal input is left alone")


def _random_invertible_hermitian(rng, n):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    w = rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0], n)
    return (q * w) @ q.conj().T


@_check("functional-calculus", None, "positive projections by functional calculus")
def _fc(cfg, out):
    rng = np.random.default_rng(cfg.seed)
    lat = ModeLattice(1, max(cfg.truncation, 1), 1)
    worst = 0.0
    for i in range(10):
        m = _random_invertible_hermitian(rng, lat.size)
        A = LatticeOperator(lat, lat, m, label=f"random{i}")
        diff = positive_projection_formula(A).entries - eigen_projection(A)
        worst = max(worst, float(np.linalg.norm(diff, 2)))
    out.values["formula_vs_eigenprojection"] = worst
    out.require(worst <= 1e-8, "formula agrees with eigenprojection")
    H = B.hardy_space(lat.truncation)
    A = build_A_from_projection(H.projection, B.circle_laplacian_plus_one(lat.truncation))
    LA = nonnegative_spectral_subspace(A, cfg.rank_tol, label="L+(A)")
    ri = relative_index(LA, H, declared_equal=True)
    out.values["hardy_relative_index"] = ri.value
    out.values["hardy_projection_distance"] = float(np.linalg.norm(LA.projection.entries - H.projection.entries, 2))
    out.require(ri.value == 0 and out.values["hardy_projection_distance"] <= 1e-8, "Hardy recovered")
    q, _ = np.linalg.qr(rng.standard_normal((lat.size, lat.size)))
    rank = lat.size // 2
    Pm = q[:, :rank] @ q[:, :rank].T
    g = rng.standard_normal((lat.size, lat.size))
    Delta = LatticeOperator(lat, lat, g @ g.T + lat.size * np.eye(lat.size), label="Delta")
    P = LatticeOperator(lat, lat, Pm, label="random-P")
    LA = nonnegative_spectral_subspace(build_A_from_projection(P, Delta), cfg.rank_tol)
    ri = relative_index(LA, make_subspace(P, None, "random", "random"), declared_equal=True)
    out.values["random_relative_index"] = ri.value
    out.require(ri.value == 0, "random rank recovered")


# catalog

CATALOG = {
    "hardy-symbol": ({"manifold": "s1", "truncation": 8}, ["Hardy space symbol example"]),
    "hardy-toeplitz": ({"manifold": "s1", "truncation": 8, "operator": "hardy", "subspace": "hardy"},
                       ["logarithmic property of the index (Toeplitz case)"]),
    "dirac-eta": ({"manifold": "t2", "truncation": 3, "operator": "dirac", "subspace": "dirac+",
                   "expected": {"eta": 1, "d": 1}}, ["d equals eta for admissible operators"]),
    "dirac-d-equality": ({"manifold": "t2", "truncation": 4, "operator": "dirac", "subspace": "dirac+",
                          "expected": {"d": 1}},
                         ["d equals eta for admissible operators", "d in terms of the relative index"]),
    "thmn-properties": ({"manifold": "t2", "truncation": 2, "operator": "dirac", "subspace": "dirac+"},
                        ["existence and uniqueness of the additive functional d"]),
    "oba-suite": ({"manifold": "t2", "truncation": 2, "operator": "dirac", "subspace": "dirac+"},
                  ["index formula for operators in odd subspaces"]),
    "gladk-suite": ({"manifold": "t2", "truncation": 2, "operator": "multiplier:k1+I*k2",
                     "subspace": "positive"},
                    ["index formula between a subspace and a space"]),
    "half-index-suite": ({"manifold": "t2", "truncation": 2, "operator": "dirac", "subspace": "dirac+"},
                         ["half index of even operators"]),
    "example6": ({"manifold": "t2", "truncation": 3, "operator": "multiplier:k1+I*k2",
                  "subspace": "positive", "expected": {"index": 1, "eta": 1}},
                 ["operator from a spectral subspace to the second summand",
                  "eta of the doubled Cauchy-Riemann operator"]),
    "clifford-oddness": ({"manifold": "t2", "truncation": 1, "operator": "clifford:3"},
                         ["odd bundles from Clifford multiplication", "rank constraint on odd bundles"]),
    "gluing-check": ({"manifold": "t2", "truncation": 1}, ["continuous gluing of symbols on the double"]),
    "transport-suite": ({"manifold": "t2", "truncation": 1},
                        ["Cauchy problem transporting a homotopy of projections", "homotopy invariance of d"]),
    "orthogonalize-suite": ({"manifold": "s1", "truncation": 2},
                            ["reduction to orthogonally odd subspaces"]),
    "functional-calculus": ({"manifold": "s1", "truncation": 6, "seed": 0},
                            ["positive projection via the sign of an operator",
                             "operator with a prescribed nonnegative spectral subspace"]),
}


def catalog_config(name: str) -> ExperimentConfig:
    if name not in CATALOG:
        raise ConfigurationError(f"unknown catalog entry {name!r}")
    base, _ = CATALOG[name]
    return ExperimentConfig.from_dict({"name": name, "seed": 0, "checks": [name], **base})


def list_experiments():
    return [{"name": n, "anchors": list(a), "description": CHECKS[n].description}
            for n, (_, a) in CATALOG.items()]


def load_config(path_or_obj) -> ExperimentConfig:
    if isinstance(path_or_obj, dict):
        return ExperimentConfig.from_dict(path_or_obj)
    try:
        with open(path_or_obj) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from exc
    if isinstance(obj, dict) and set(obj) == {"catalog"}:
        return catalog_config(obj["catalog"])
    return ExperimentConfig.from_dict(obj)


def run_check(cfg: ExperimentConfig, name: str, timing: bool = False) -> dict:
    import time

    out = CheckOutcome(name)
    t0 = time.perf_counter()
    try:
        CHECKS[name].fn(cfg, out)
    except ConfigurationError:
        raise
    except OddlabError as exc:
        out.failures.append(f"{type(exc).__name__}: {exc}")
    payload = out.to_json()
    if timing:
        payload["wall_clock_s"] = time.perf_counter() - t0
    return payload


def run_config(cfg: ExperimentConfig, overrides: dict | None = None, timing: bool = False) -> dict:
    """Execute the checks of ``cfg`` in order and assemble the report."""
    checks = [run_check(cfg, c, timing) for c in cfg.checks]
    return {
        "tool": "oddlab",
        "version": __version__,
        "config": cfg.to_json(),
        "overrides": dict(sorted((overrides or {}).items())),
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
    }


def render_json(report) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def report_schema() -> dict:
    return json.loads(resources.files("oddlab").joinpath("report_schema.json").read_text())


def validate_report(report) -> list:
    """Schema validation plus exact-arithmetic consistency; returns a list of problems."""
    import jsonschema

    problems = [e.message for e in jsonschema.Draft202012Validator(report_schema()).iter_errors(report)]
    if problems:
        return problems
    reports = [report] if "checks" in report else report.get("runs", [])
    for run in reports:
        for chk in run["checks"]:
            for ir in chk["index_reports"]:
                total = sum((dyadic_from_json(v) for v in ir["rhs_terms"].values()), Fraction(0))
                if total != dyadic_from_json(ir["rhs_total"]):
                    problems.append(f"{chk['name']}/{ir['name']}: rhs_total is not the sum of its terms")
                if ir["pass"] and Fraction(ir["lhs"]) != total:
                    problems.append(f"{chk['name']}/{ir['name']}: passing report with lhs != rhs")
            if chk["pass"] and not all(ir["pass"] for ir in chk["index_reports"]):
                problems.append(f"{chk['name']}: passes with a failing index report")
        if run["pass"] != all(c["pass"] for c in run["checks"]):
            problems.append("overall pass disagrees with the checks")
    return problems
