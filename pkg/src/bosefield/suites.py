"""Verification suites, their registry and the convergence studies."""

from __future__ import annotations

import time
import warnings
from math import factorial
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .config import RunConfig
from .covariance import (build_Y, coherence_mechanism_check, free_covariance_check,
                         free_transport_lipschitz, gamma_continuity, intertwiner_verify,
                         kappa_beta_residual, lift_morphism, localization_check, make_morphism,
                         mollified_continuity, morphism_apply, orbit_lct_bound, orbit_lct_modulus,
                         trivial_character_check)
from .dynamics import (DysonConfig, HamiltonianConfig, PotentialSpec, build_hamiltonian,
                       dyson_gamma, evolve, free_hamiltonian, gamma_direct, generator_difference,
                       interaction_picture_direct, interaction_picture_expand,
                       interaction_tail_bound, lowered_parts_residual, hat_parts_residual,
                       localized_potentials, pull_through_residuals, single_particle_propagator)
from .fields import (build_W, field_phi, gauge_transform, harmonic_component,
                     harmonic_component_quadrature, harmonic_decomposition, mode_number_function,
                     reconstruct, resolvent, sigma_weight_lipschitz, tensor_factorize,
                     lipschitz_bound)
from .fock import (BlockOperator, FockBasis, GridSpace, UnsafeSectorError, annihilator,
                   block_diagonal, creator, identity, lct_seminorm, operator_norm)
from .observables import (SYMMETRIZED, GeneratorSum, SpectatorFrame, kappa, lift_one_body,
                          lift_two_body, to_convention)
from .report import CheckEntry, ConvergenceTable, VerificationReport

__all__ = [
    "SUITES",
    "SuiteContext",
    "UnknownSuiteError",
    "suite_names",
    "resolve_selection",
    "run_suites",
    "emit_convergence_table",
    "random_vector",
    "random_block_diagonal",
    "random_band",
    "random_generator_sum",
]


class UnknownSuiteError(KeyError):
    def __init__(self, names):
        self.names = list(names)
        super().__init__(", ".join(self.names))


# ---------------------------------------------------------------------------
# random data
# ---------------------------------------------------------------------------


def _cnormal(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_vector(rng: np.random.Generator, grid: GridSpace, normalized: bool = True) -> np.ndarray:
    v = _cnormal(rng, grid.d)
    return grid.normalize(v) if normalized else v


def random_block_diagonal(rng: np.random.Generator, basis: FockBasis, hermitian: bool = False) -> BlockOperator:
    blocks = {}
    for n in basis.sectors():
        m = _cnormal(rng, (basis.dim(n),) * 2) / np.sqrt(basis.dim(n))
        blocks[n] = 0.5 * (m + m.conj().T) if hermitian else m
    return block_diagonal(basis, blocks)


def random_band(rng: np.random.Generator, basis: FockBasis, m: int) -> BlockOperator:
    """Random operator with blocks ``(n + m, n)`` only."""
    blocks = {}
    for n in basis.sectors():
        if 0 <= n + m <= basis.n_max:
            shape = (basis.dim(n + m), basis.dim(n))
            blocks[(n + m, n)] = _cnormal(rng, shape) / np.sqrt(max(shape))
    return BlockOperator(basis, blocks)


def random_generator_sum(rng: np.random.Generator, basis: FockBasis) -> GeneratorSum:
    """Constant plus random one-body and two-body terms."""
    d = basis.grid.d
    one = _cnormal(rng, (d, d)) / d
    gs = GeneratorSum.constant(basis, complex(rng.normal())) + GeneratorSum.single(basis, 1, one)
    if basis.n_max >= 2:
        pair_dim = FockBasis(basis.grid, 2).dim(2)
        gs = gs + GeneratorSum.single(basis, 2, _cnormal(rng, (pair_dim, pair_dim)) / pair_dim)
    return gs


# ---------------------------------------------------------------------------
# context
# ---------------------------------------------------------------------------


class Workspace:
    """Objects shared by all suites for one configuration; built once."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg

    @cached_property
    def grid(self) -> GridSpace:
        return self.cfg.grid_space()

    @cached_property
    def basis(self) -> FockBasis:
        return self.cfg.basis()

    @cached_property
    def f(self) -> np.ndarray:
        return self.cfg.test_function()

    @cached_property
    def ham_config(self) -> HamiltonianConfig:
        return self.cfg.hamiltonian_config()

    @cached_property
    def ham(self):
        return build_hamiltonian(self.basis, self.ham_config)

    @cached_property
    def free(self):
        return free_hamiltonian(self.basis, self.ham_config)

    @cached_property
    def frame(self) -> SpectatorFrame:
        return SpectatorFrame(self.basis)

    @cached_property
    def dyson(self) -> DysonConfig:
        return self.cfg.dyson_config()

    @property
    def safe_sectors(self) -> list[int]:
        return list(range(1, self.basis.n_max))

    def warm(self):
        for name in ("grid", "basis", "f", "ham", "free", "frame"):
            getattr(self, name)
        return self


@dataclass
class SuiteContext:
    """Per-suite state: workspace, random generator and collected entries."""

    suite: str
    ws: Workspace
    rng: np.random.Generator
    entries: list[CheckEntry] = field(default_factory=list)
    _clock: float = field(default_factory=time.perf_counter)

    @property
    def cfg(self) -> RunConfig:
        return self.ws.cfg

    @property
    def tol(self):
        return self.ws.cfg.tolerances

    @property
    def exact(self) -> float:
        """Tolerance for identities that hold to rounding (``structural / 100``)."""
        return self.tol.structural * 1e-2

    def check(self, check: str, description: str, anchor: str, measured: float, bound: float,
              comparison: str = "<=") -> CheckEntry:
        now = time.perf_counter()
        measured = float(measured)
        if comparison == "<=":
            ok = bool(measured <= bound)
        elif comparison == ">=":
            ok = bool(measured >= bound)
        else:
            raise ValueError(f"unknown comparison {comparison!r}")
        entry = CheckEntry(self.suite, check, description, anchor, measured, float(bound), ok,
                           comparison, round((now - self._clock) * 1e3, 3))
        self._clock = now
        self.entries.append(entry)
        return entry


def _norm(x) -> float:
    return float(np.linalg.norm(x, 2))


def _safe_op_norm(op: BlockOperator, top: int) -> float:
    return operator_norm(op.restrict(max_in=top, max_out=top))


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------


def suite_ccr(ctx: SuiteContext):
    b, grid = ctx.ws.basis, ctx.ws.grid
    one = identity(b)
    worst_ccr = worst_aa = 0.0
    for _ in range(50):
        f, g = random_vector(ctx.rng, grid), random_vector(ctx.rng, grid)
        af, ag = annihilator(b, f), annihilator(b, g)
        comm = af @ ag.adjoint() - ag.adjoint() @ af - one.scale(grid.inner(f, g))
        worst_ccr = max(worst_ccr, operator_norm(comm.restrict(max_in=b.n_max - 1)))
        worst_aa = max(worst_aa, operator_norm((af @ ag - ag @ af).restrict(max_in=b.n_max - 2)))
    ctx.check("ccr-mixed", "[a(f), a*(g)] - <f,g> on sectors below the cutoff, 50 random pairs",
              "canonical commutation relations", worst_ccr, ctx.exact)
    ctx.check("ccr-annihilators", "[a(f), a(g)] on sectors below cutoff - 1",
              "canonical commutation relations", worst_aa, ctx.exact)
    f = random_vector(ctx.rng, grid)
    rec = field_phi(b, f) - field_phi(b, 1j * f).scale(1j) - creator(b, f).scale(2.0)
    ctx.check("field-recovers-creator", "2 a*(f) = phi(f) - i phi(if)", "field operator",
              operator_norm(rec), ctx.exact)


def suite_resolvent(ctx: SuiteContext):
    b, grid = ctx.ws.basis, ctx.ws.grid
    one = identity(b)
    inv = ident = adj = bound = 0.0
    for _ in range(5):
        f = random_vector(ctx.rng, grid, normalized=False)
        lam, mu = ctx.rng.uniform(0.3, 2.0) * ctx.rng.choice([-1, 1]), ctx.rng.uniform(0.3, 2.0)
        R, S = resolvent(b, lam, f), resolvent(b, mu, f)
        phi = field_phi(b, f)
        inv = max(inv, operator_norm((one.scale(1j * lam) + phi) @ R - one))
        adj = max(adj, operator_norm(R.adjoint() - resolvent(b, -lam, f)))
        ident = max(ident, operator_norm(R - S - (R @ S).scale(1j * (mu - lam))))
        bound = max(bound, operator_norm(R) * abs(lam))
    ctx.check("inverse", "(i lam + phi(f)) R(lam, f) = 1", "resolvent of the field", inv, ctx.tol.structural)
    ctx.check("adjoint", "R(lam, f)* = R(-lam, f)", "resolvent of the field", adj, ctx.tol.structural)
    ctx.check("resolvent-identity", "R(lam) - R(mu) = i(mu - lam) R(lam) R(mu)",
              "resolvent of the field", ident, ctx.tol.structural)
    ctx.check("norm-bound", "|lam| ||R(lam, f)|| <= 1", "resolvent of the field", bound, 1.0 + ctx.exact)


def suite_harmonic(ctx: SuiteContext):
    b, grid = ctx.ws.basis, ctx.ws.grid
    f = random_vector(ctx.rng, grid, normalized=False)
    R = resolvent(b, 0.7, f) + random_band(ctx.rng, b, 2)
    dec = harmonic_decomposition(R)
    tensor_law = quad = 0.0
    for m, comp in dec.components.items():
        for u in ctx.rng.uniform(0, 2 * np.pi, size=3):
            tensor_law = max(tensor_law, operator_norm(gauge_transform(comp, u) - comp.scale(np.exp(1j * u * m))))
        quad = max(quad, operator_norm(harmonic_component_quadrature(R, m) - comp))
    ctx.check("tensor-law", "gauge action multiplies the band-m harmonic by e^{ium}",
              "gauge harmonics", tensor_law, ctx.exact)
    ctx.check("fourier-quadrature", "trapezoid gauge Fourier integral reproduces band extraction",
              "gauge harmonics", quad, ctx.tol.structural)
    ctx.check("synthesis", "sum of harmonics equals the operator", "harmonic synthesis",
              operator_norm(dec.synthesize() - R), ctx.exact)
    W = build_W(b, ctx.ws.f)
    u = ctx.rng.uniform(0, 2 * np.pi)
    ctx.check("W-phase", "gauge action on W_f is the phase e^{iu}", "gauge harmonics",
              operator_norm(gauge_transform(W, u) - W.scale(np.exp(1j * u))), ctx.exact)


def suite_isometry(ctx: SuiteContext):
    b, f = ctx.ws.basis, ctx.ws.f
    top = b.n_max - 1
    W = build_W(b, f)
    E = W @ W.adjoint()
    ctx.check("isometry", "W_f* W_f = 1 below the cutoff", "isometry W_f",
              _safe_op_norm(W.adjoint() @ W - identity(b), top), ctx.exact)
    ctx.check("projection", "E_f^2 = E_f = E_f*", "projection E_f",
              max(_safe_op_norm(E @ E - E, top), _safe_op_norm(E - E.adjoint(), top)), ctx.exact)
    worst = 0.0
    for m in (-2, -1, 1, 2):
        F = random_band(ctx.rng, b, m)
        A, mm = tensor_factorize(F, f)
        if not A.is_block_diagonal():
            worst = np.inf
        worst = max(worst, operator_norm((reconstruct(A, mm, f) - F).restrict(max_in=b.n_max - abs(m))))
    ctx.check("tensor-factorization", "band-m operator F = A W_f^m with A gauge invariant, |m| <= 2",
              "tensor factorization", worst, ctx.tol.structural)


def suite_kappa(ctx: SuiteContext):
    b, f = ctx.ws.basis, ctx.ws.f
    frame = ctx.ws.frame
    pair_dim = FockBasis(b.grid, 2).dim(2)
    sym = spec = 0.0
    for body in (1, 2):
        for _ in range(20):
            size = b.grid.d if body == 1 else pair_dim
            O = _cnormal(ctx.rng, (size, size)) / size
            gs = GeneratorSum.single(b, body, O)
            lift = lift_one_body if body == 1 else lift_two_body
            ext = gs.on_basis(frame.ext)
            for n in range(1, b.n_max + 1):
                target = lift(b, O, n - 1)
                lowered = kappa(to_convention(gs, SYMMETRIZED, n), n).realize(n - 1)
                sym = max(sym, _norm(lowered - target))
                spec = max(spec, _norm(frame.lower(ext.realize(n), n) - target))
    ctx.check("kappa-lift-symmetrized", "kappa_n of a k-body lift realizes as the (n-1)-sector lift, "
              "k in {1, 2}, 20 random O each", "lowering of second quantized lifts", sym, ctx.exact)
    ctx.check("kappa-lift-spectator", "same relation evaluated through a spectator mode",
              "lowering of second quantized lifts", spec, ctx.exact)
    worst = 0.0
    for _ in range(5):
        gs = random_generator_sum(ctx.rng, b)
        for n in range(2, b.n_max + 1):
            worst = max(worst, kappa_beta_residual(gs, f, n, frame))
    ctx.check("kappa-beta", "kappa(beta_f(K)) = beta_f(kappa(K)) on generator sums",
              "lowering commutes with beta_f", worst, ctx.tol.structural)
    fns = [lambda x: (1 + x) ** -0.5, lambda x: np.cos(x), lambda x: (x > 0).astype(float)]
    shift = mult = 0.0
    for n in range(1, b.n_max + 1):
        mats = [mode_number_function(frame.ext, f, fn, n) for fn in fns]
        for fn, mat in zip(fns, mats):
            shift = max(shift, _norm(frame.lower(mat, n) - mode_number_function(b, f, fn, n - 1)))
        prod = frame.lower(mats[0] @ mats[1], n)
        mult = max(mult, _norm(prod - frame.lower(mats[0], n) @ frame.lower(mats[1], n)))
    ctx.check("kappa-Nf-shift", "kappa(b(N_f)) = b(N_f) one sector lower", "functions of N_f", shift, ctx.exact)
    ctx.check("kappa-multiplicative", "kappa(b1(N_f) b2(N_f)) = kappa(b1) kappa(b2)",
              "functions of N_f", mult, ctx.exact)


def _random_setting(rng: np.random.Generator):
    d = int(rng.integers(3, 7))
    grid = GridSpace(d, float(rng.uniform(0.3, 0.9)))
    kind = str(rng.choice(["gaussian", "cosine_bump", "zero"]))
    pot = PotentialSpec(kind, float(rng.uniform(-2, 2)), float(rng.uniform(0.5, 2.0)))
    cfg = HamiltonianConfig(float(rng.uniform(0, 1)), pot)
    basis = FockBasis(grid, 3)
    if rng.random() < 0.5:
        start = int(rng.integers(0, d))
        end = int(rng.integers(start, d))
        f = grid.bump(start, end)
    else:
        f = random_vector(rng, grid)
    return basis, cfg, grid.normalize(f)


def suite_generator_decomposition(ctx: SuiteContext):
    settings = [(ctx.ws.basis, ctx.ws.ham_config, ctx.ws.f)]
    settings += [_random_setting(ctx.rng) for _ in range(20)]
    prop = {n: 0.0 for n in ctx.ws.safe_sectors}
    a1 = a2 = a3 = comp = 0.0
    for basis, cfg, f in settings:
        ham = ctx.ws.ham if basis is ctx.ws.basis else build_hamiltonian(basis, cfg)
        pieces = localized_potentials(ham, f)
        comp = max(comp, pieces.kinetic_completeness(), pieces.potential_completeness())
        diffs = generator_difference(ham, f, pieces=pieces)
        for n, gd in diffs.items():
            if n in prop:
                prop[n] = max(prop[n], gd.residual)
        for n in range(1, basis.n_max):
            a2 = max(a2, lowered_parts_residual(ham, f, n, pieces))
            a3 = max(a3, hat_parts_residual(ham, f, n, pieces))
        for n in range(1, basis.n_max + 1):
            k = basis.dim(n - 1)
            a1 = max(a1, *pull_through_residuals(basis, f, _cnormal(ctx.rng, (k, k)) / np.sqrt(k), n))
    loose = ctx.tol.structural * 10
    for n, r in prop.items():
        ctx.check(f"difference-structured[n={n}]", "(H_n - W H_{n-1} W*) E_f = A_f + B_f over 21 settings",
                  "generator difference decomposition", r, loose)
    ctx.check("pull-through", "W O W* acting on |f> (x)_s Phi equals |f> (x)_s sigma_f(O) Phi and its inverse",
              "pull-through relations", a1, ctx.tol.structural)
    ctx.check("lowered-parts", "H - sigma_f(H) = A_check + B_check", "localized potentials", a2, loose)
    ctx.check("hat-parts", "H_n S - S H_{n-1} = (A_hat + B_hat) S with S the product map",
              "localized potentials", a3, loose)
    ctx.check("piece-completeness", "kinetic and potential pieces sum to the full operators",
              "localized potentials", comp, ctx.exact)


def suite_dyson(ctx: SuiteContext):
    ws = ctx.ws
    dy = ws.dyson
    sectors = ws.safe_sectors
    diffs = generator_difference(ws.ham, ws.f, sectors)
    direct = gamma_direct(ws.ham, ws.f, dy.t, sectors)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = dyson_gamma(ws.ham, ws.f, dy, sectors, differences=diffs)
    for n in sectors:
        err = _norm(res[n].gamma - direct[n])
        ctx.check(f"dyson-vs-direct[n={n}]",
                  f"order {dy.order} series with {dy.intervals()} {dy.rule} intervals against the "
                  f"product of exponentials at t={dy.t}", "Dyson series for Gamma_f", err, dy.tolerance)
    ratio = 0.0
    for n in sectors:
        r = res[n]
        for norm, bound in zip(r.term_norms, r.term_bounds()):
            ratio = max(ratio, norm / bound if bound > 0 else (0.0 if norm == 0 else np.inf))
    ctx.check("term-bound", "||term k|| / ((||C|| t)^k / k!) never exceeds 1",
              "absolute convergence of the series", ratio, 1.0 + ctx.exact)
    table = emit_convergence_table(ctx.cfg, "quad_steps", ws)
    expected = 4.0 if dy.rule == "simpson" else 2.0
    usable = [r for _, e, r in table.rows if r is not None]
    if dy.t == 0:
        ctx.check("quadrature-order", "t = 0 rows are exact", "Dyson series for Gamma_f",
                  max(e for _, e, _ in table.rows), ctx.exact)
    else:
        order = float(np.log2(usable[-1])) if usable else np.nan
        ctx.check("quadrature-order", f"Richardson order of the {dy.rule} rule (expected {expected:g} +- 1)",
                  "Dyson series for Gamma_f", abs(order - expected) if np.isfinite(order) else np.inf, 1.0)
    return [table]


def suite_interaction_picture(ctx: SuiteContext):
    ws = ctx.ws
    s = 0.3
    order = 10
    worst = tail = 0.0
    for n in range(2, ws.basis.n_max + 1):
        dim = ws.basis.dim(n)
        B = _cnormal(ctx.rng, (dim, dim)) / dim
        approx, _ = interaction_picture_expand(ws.ham, B, n, s, order)
        err = _norm(approx - interaction_picture_direct(ws.ham, B, n, s))
        worst = max(worst, err)
        bound = interaction_tail_bound(_norm(B), _norm(ws.ham.potential_sector(n)), s, order)
        tail = max(tail, err / bound if bound > 0 else 0.0)
    ctx.check("commutator-series", f"order {order} nested commutators against the direct conjugation at s={s}",
              "interaction picture expansion", worst, ctx.tol.dyson)
    ctx.check("tail-bound", "error / (||B|| sum_{k>K} (2||V|| s)^k / k!) <= 1",
              "interaction picture expansion", tail, 1.0 + ctx.exact)


def suite_intertwiner(ctx: SuiteContext):
    ws = ctx.ws
    b, f = ws.basis, ws.f
    t = 0.3
    sample = [random_block_diagonal(ctx.rng, b) for _ in range(10)]
    sample += [block_diagonal(b, {n: random_generator_sum(ctx.rng, b).realize(n) for n in b.sectors()})
               for _ in range(10)]
    for label, H in (("free", ws.free), ("interacting", ws.ham)):
        U = block_diagonal(b, {n: H.propagator(n, t) for n in b.sectors()})
        rep = intertwiner_verify(b, f, U, sample, label=label, tol=ctx.tol.structural)
        for name, val in rep.residuals.items():
            ctx.check(f"{label}: {name}", f"intertwiner relation at t={t}, 20 observables",
                      "intertwiner relations", val, ctx.tol.structural)
    rho = make_morphism(b, f)
    top = b.n_max - 1
    mult = 0.0
    for A, B in zip(sample[:10], sample[10:]):
        mult = max(mult, _safe_op_norm(morphism_apply(rho, A @ B) - morphism_apply(rho, A) @ morphism_apply(rho, B), top))
    ctx.check("multiplicative", "rho(AB) = rho(A) rho(B)", "morphism rho_f", mult, ctx.tol.structural)
    U1 = block_diagonal(b, {n: ws.ham.propagator(n, 0.1) for n in b.sectors()})
    U2 = block_diagonal(b, {n: ws.ham.propagator(n, 0.2) for n in b.sectors()})
    comp = operator_norm(lift_morphism(lift_morphism(rho, U2), U1).W - lift_morphism(rho, U1 @ U2).W)
    ctx.check("composition-law", "lifting by g2 then g1 equals lifting by g1 g2", "lifted morphisms",
              comp, ctx.tol.structural)
    times = sorted({0.0, t, ws.dyson.t})
    ch = trivial_character_check(ws.ham, f, times)
    ctx.check("character-scalar", "Y_f(t) Gamma_f(t) is the scalar 1 on E_f F_n",
              "trivial characters", ch.max_scalar_deviation(), ctx.tol.regression)
    ctx.check("character-off-scalar", "norm of the part of Y_f(t) Gamma_f(t) that is not scalar",
              "trivial characters", ch.max_off_scalar(), ctx.tol.regression)
    ctx.check("character-lowering", "lowering Y_{f,n} gives Y_{f,n-1} with factor 1",
              "trivial characters", ch.max_xi_deviation(), ctx.tol.regression)


def _disjoint_mode(grid: GridSpace, f) -> int:
    outside = [j for j in range(grid.d) if abs(f[j]) == 0]
    return outside[0] if outside else -1


def suite_free_covariance(ctx: SuiteContext):
    ws = ctx.ws
    b, grid, f = ws.basis, ws.grid, ws.f
    transport = max(free_covariance_check(b, f, ws.ham_config, t) for t in (0.0, 0.2, ws.dyson.t))
    ctx.check("transport", "Ad U(t)(W_f) = W_{U_1(t) f} below the cutoff", "free covariance",
              transport, ctx.tol.structural)
    g = random_vector(ctx.rng, grid)
    u1 = single_particle_propagator(grid, ws.ham_config, 0.2)
    crt = operator_norm(evolve(creator(b, g), ws.free, 0.2) - creator(b, u1 @ g))
    ctx.check("creator-transport", "Ad U(t)(a*(g)) = a*(U_1(t) g)", "free covariance", crt, ctx.tol.structural)
    rho = make_morphism(b, f)
    j = _disjoint_mode(grid, f)
    if j >= 0:
        proj = np.zeros((grid.d, grid.d), dtype=complex)
        proj[j, j] = 1.0
        A = block_diagonal(b, {n: lift_one_body(b, proj, n) for n in b.sectors()})
        ctx.check("localization-disjoint", f"rho(A) = A rho(1) = rho(1) A for the number of grid mode {j}",
                  "localized morphisms", localization_check(rho, A, [j]), ctx.tol.structural)
    pf = np.outer(f, f.conj()) * grid.h
    A = block_diagonal(b, {n: lift_one_body(b, pf, n) for n in b.sectors()})
    ctx.check("localization-overlap", "the same relation fails at order one when A is the number of f",
              "localized morphisms", localization_check(rho, A, rho.window, allow_overlap=True), 0.1, ">=")
    t_grid = np.linspace(0.0, 1.0, 81)
    kernel = lambda t: np.where((t > 0.1) & (t < 0.8), np.sin(np.pi * (t - 0.1) / 0.7) ** 2, 0.0)
    rows = mollified_continuity(build_W(b, f), ws.ham, kernel, t_grid, [1, 2, 4])
    ctx.check("mollified-continuity", "orbit modulus of the mollified W_f over its bound",
              "mollified orbits", max(m / bd for m, bd in rows), 1.0)


def suite_coherence(ctx: SuiteContext):
    ws = ctx.ws
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = coherence_mechanism_check(ws.ham, ws.f, ws.dyson, frame=ws.frame)
    tols = {"dyson(n-1) - direct(n-1)": ctx.tol.dyson,
            "kappa(int O_n) - int O_n-1 (quadrature)": ctx.tol.regression}
    for part, vals in (("lockstep", rep.lockstep), ("kappa", rep.kappa_consistency),
                       ("integral", rep.integral_interchange)):
        for name, val in vals.items():
            ctx.check(f"{part}: {name}", f"coherence between sectors {rep.n} and {rep.n - 1}",
                      "coherence mechanism", val, tols.get(name, ctx.tol.structural))
    n = ws.basis.n_max - 1
    times = list(np.linspace(0.0, ws.dyson.t, 5))
    cont = gamma_continuity(ws.ham, ws.f, times, n)
    ctx.check("gamma-continuity", "||Gamma(t2) - Gamma(t1)|| / (||C|| |t2 - t1|)",
              "norm continuity of Gamma_f", max(a / b for a, b in cont), 1.0 + ctx.exact)
    mods = orbit_lct_modulus(ws.ham, ws.f, times, n)
    ctx.check("orbit-lct-continuity", "difference quotient of the orbit of W_f over ||[H, W_f] P_n||",
              "continuity of the orbit of W_f", max(mods) / orbit_lct_bound(ws.ham, ws.f, n), 1.0 + ctx.exact)


def _random_tensor_pair(rng, b):
    while True:
        m, mp = (int(x) for x in rng.integers(-1, 2, size=2))
        F, G = random_band(rng, b, m), random_band(rng, b, mp)
        safe = []
        for n in range(b.n_max + 1):
            idx = [n, n + mp, n, n, n - m]
            budgets = [abs(m + mp), abs(m), abs(m), abs(mp), abs(mp)]
            if all(k <= b.n_max - bud or k < 0 for k, bud in zip(idx, budgets)):
                safe.append(n)
        if safe:
            return m, mp, F, G, int(rng.choice(safe))


def suite_seminorm(ctx: SuiteContext):
    b = ctx.ws.basis
    sym, margin = 0.0, -np.inf
    for _ in range(100):
        m, mp, F, G, n = _random_tensor_pair(ctx.rng, b)
        sym = max(sym, abs(lct_seminorm(F.adjoint(), n) - lct_seminorm(F, n)))
        lhs = lct_seminorm(F @ G, n)
        rhs = lct_seminorm(F, n + mp) * lct_seminorm(G, n) + lct_seminorm(F, n) * lct_seminorm(G, n - m)
        margin = max(margin, lhs - rhs)
    ctx.check("adjoint-symmetry", "||F*||_n = ||F||_n on 100 random tensors", "lct seminorms", sym, ctx.exact)
    ctx.check("product-inequality", "max of ||F G||_n minus the product bound, 100 random pairs",
              "lct seminorms", margin, ctx.tol.structural)


def _pair(rng, grid, near: bool):
    f1 = random_vector(rng, grid)
    if near:
        eps = 10.0 ** rng.uniform(-3, -1)
        return f1, grid.normalize(f1 + eps * random_vector(rng, grid))
    return f1, random_vector(rng, grid)


def measure_c_prime(basis: FockBasis, rng: np.random.Generator, samples: int = 200) -> dict[int, float]:
    """Largest ratio of the ``(1+N_f)^{-1/2}`` weight difference over ``N_f`` difference, per ``n``."""
    out = {n: 0.0 for n in range(1, basis.n_max)}
    for i in range(samples):
        f1, f2 = _pair(rng, basis.grid, near=bool(i % 2))
        for n in out:
            out[n] = max(out[n], sigma_weight_lipschitz(basis, f1, f2, n - 1))
    return out


def suite_lipschitz(ctx: SuiteContext):
    ws = ctx.ws
    b, grid = ws.basis, ws.grid
    frozen = measure_c_prime(b, ctx.rng)
    worst = {n: 0.0 for n in frozen}
    for i in range(1000):
        f1, f2 = _pair(ctx.rng, grid, near=bool(i % 2))
        diff = build_W(b, f1).adjoint() - build_W(b, f2).adjoint()
        df = grid.norm(f1 - f2)
        for n, c in frozen.items():
            val = operator_norm(diff.restrict(max_in=n))
            worst[n] = max(worst[n], val / (lipschitz_bound(n, c) * df))
    for n, c in frozen.items():
        ctx.check(f"W-star-lipschitz[n={n}]", f"||(W_f1* - W_f2*) P_n|| over the bound with frozen c'={c:.4f}, "
                  "1000 fresh pairs", "Lipschitz dependence of W_f", worst[n], 1.0)
    times = list(np.linspace(0.0, 1.0, 11))
    n = b.n_max - 1
    rows = free_transport_lipschitz(b, ws.f, ws.ham_config, times, n, frozen[n])
    ctx.check("transport-lipschitz", "W*_{U_1(t) f} along the free orbit over the Lipschitz bound",
              "Lipschitz dependence of W_f", max(m / bd if bd > 0 else 0.0 for m, bd in rows), 1.0)


@dataclass(frozen=True)
class Suite:
    name: str
    run: Callable[[SuiteContext], object]
    description: str


SUITES: dict[str, Suite] = {s.name: s for s in [
    Suite("ccr", suite_ccr, "canonical commutation relations on the truncated space"),
    Suite("resolvent", suite_resolvent, "resolvents of the field operator"),
    Suite("harmonic", suite_harmonic, "gauge harmonics, quadrature cross-check and synthesis"),
    Suite("isometry", suite_isometry, "W_f, E_f and the tensor factorization"),
    Suite("kappa", suite_kappa, "lowering maps on lifts, beta_f images and N_f functions"),
    Suite("generator-decomposition", suite_generator_decomposition, "generator difference decomposition"),
    Suite("dyson-convergence", suite_dyson, "Dyson series against the direct product of exponentials"),
    Suite("interaction-picture", suite_interaction_picture, "nested commutator series"),
    Suite("intertwiner", suite_intertwiner, "intertwiner relations and trivial characters"),
    Suite("free-covariance", suite_free_covariance, "free transport, localization and mollified orbits"),
    Suite("coherence-mechanism", suite_coherence, "coherence between neighbouring sectors"),
    Suite("seminorm", suite_seminorm, "lct seminorms"),
    Suite("lipschitz", suite_lipschitz, "Lipschitz dependence of W_f* on f"),
]}


def suite_names() -> list[str]:
    return list(SUITES)


def resolve_selection(selection) -> list[str]:
    """Suite names in registration order; ``None`` or ``"all"`` selects every suite."""
    if selection is None:
        return suite_names()
    if isinstance(selection, str):
        selection = [s.strip() for s in selection.split(",") if s.strip()]
    if "all" in selection:
        return suite_names()
    unknown = [s for s in selection if s not in SUITES]
    if unknown:
        raise UnknownSuiteError(unknown)
    return [s for s in SUITES if s in selection]


def _run_one(name: str, ws: Workspace, seed: np.random.SeedSequence):
    ctx = SuiteContext(name, ws, np.random.default_rng(seed))
    tables = SUITES[name].run(ctx) or []
    return ctx.entries, list(tables)


def run_suites(cfg: RunConfig, selection=None, workers: int | None = None) -> VerificationReport:
    """Run the selected suites and assemble the report in registration order.

    Every registered suite owns a child of one seed sequence, so the random
    data of a suite does not depend on the selection or the worker count.
    """
    names = resolve_selection(selection)
    workers = cfg.workers if workers is None else workers
    children = dict(zip(SUITES, np.random.SeedSequence(cfg.seed).spawn(len(SUITES))))
    ws = Workspace(cfg).warm()
    if workers > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda nm: _run_one(nm, ws, children[nm]), names))
    else:
        results = [_run_one(nm, ws, children[nm]) for nm in names]
    report = VerificationReport(cfg.to_dict())
    for entries, tables in results:
        report.entries.extend(entries)
        report.tables.extend(tables)
    return report


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------


_NOISE = 1e-13


def _monotone(errors) -> bool:
    return all(b <= a * (1 + 1e-9) or b < _NOISE for a, b in zip(errors[:-1], errors[1:]))


def _ratios(errors) -> list[float | None]:
    out: list[float | None] = [None]
    for a, b in zip(errors[:-1], errors[1:]):
        out.append(a / b if b > _NOISE and a > _NOISE else None)
    return out


def emit_convergence_table(cfg: RunConfig, study: str, ws: Workspace | None = None) -> ConvergenceTable:
    """Error of the Dyson series against the direct product in the top safe sector.

    ``quad_steps`` doubles the interval count from ``quad_steps / 4`` to
    ``2 quad_steps`` at a high series order; ``dyson_order`` raises the order
    from 0 to ``dyson_order + 4`` at ``4 quad_steps`` intervals.
    """
    ws = Workspace(cfg) if ws is None else ws
    dy = ws.dyson
    n = ws.basis.n_max - 1
    diffs = generator_difference(ws.ham, ws.f, [n])
    direct = gamma_direct(ws.ham, ws.f, dy.t, [n])[n]

    def err(order, steps):
        run = DysonConfig(t=dy.t, order=order, steps=steps, rule=dy.rule, tolerance=np.inf)
        return _norm(dyson_gamma(ws.ham, ws.f, run, [n], differences=diffs)[n].gamma - direct)

    if study == "quad_steps":
        order = max(dy.order, 16)
        steps = [max(2, dy.steps // 4) * 2**k for k in range(4)]
        errors = [err(order, s) for s in steps]
        return ConvergenceTable("quad_steps", "intervals", list(zip(steps, errors, _ratios(errors))),
                                _monotone(errors), f"sector {n}, order {order}, {dy.rule}, t={dy.t}")
    if study == "dyson_order":
        steps = 4 * dy.steps
        orders = list(range(dy.order + 5))
        errors = [err(k, steps) for k in orders]
        x = _norm(diffs[n].structured) * abs(dy.t)
        bounds = [x ** (k + 1) / factorial(k + 1) * np.exp(x) for k in orders]
        return ConvergenceTable("dyson_order", "order", list(zip(orders, errors, _ratios(errors))),
                                _monotone(errors), f"sector {n}, {steps} {dy.rule} intervals, t={dy.t}",
                                bounds)
    raise ValueError(f"unknown study {study!r}; expected dyson_order or quad_steps")
