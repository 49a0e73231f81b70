"""Morphisms implemented by ``W_f``, their intertwiners and covariance checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .dynamics import (DysonConfig, cumulative_integral, Hamiltonian, build_hamiltonian, dyson_gamma, evolve,
                       free_hamiltonian, gamma_direct, generator_difference,
                       localized_potentials, single_particle_propagator)
from .fields import (build_W, check_normalized, lipschitz_bound, mode_number_function,
                     w_star_difference_norm)
from .fock import BlockOperator, FockBasis, identity, operator_norm
from .observables import (SYMMETRIZED, GeneratorSum, SpectatorFrame, kappa, lift_one_body,
                          to_convention)

__all__ = [
    "Morphism",
    "IntertwinerReport",
    "make_morphism",
    "morphism_apply",
    "lift_morphism",
    "build_Y",
    "intertwiner_verify",
    "equivalence_isometry",
    "equivalence_residuals",
    "localization_check",
    "free_covariance_check",
    "free_transport_lipschitz",
    "CoherenceReport",
    "coherence_mechanism_check",
    "kappa_beta_residual",
    "CharacterReport",
    "trivial_character_check",
    "gamma_continuity",
    "orbit_lct_modulus",
    "orbit_lct_bound",
    "mollify",
    "mollified_continuity",
]


def _safe(op: BlockOperator) -> BlockOperator:
    """Restriction to sectors ``<= n_max - 1`` on both sides."""
    top = op.basis.n_max - 1
    return op.restrict(max_in=top, max_out=top)


def _safe_norm(op: BlockOperator) -> float:
    return operator_norm(_safe(op))


def _check_unitary(U: BlockOperator, tol: float = 1e-10):
    if not U.is_block_diagonal():
        raise ValueError("symmetry operator must commute with the particle number")
    for n in U.basis.sectors():
        u = U.diag(n)
        if np.linalg.norm(u @ u.conj().T - np.eye(len(u)), 2) > tol:
            raise ValueError(f"symmetry operator is not unitary on sector {n}")


def _window(basis: FockBasis, f) -> tuple[int, ...]:
    return tuple(int(j) for j in np.nonzero(np.abs(np.asarray(f)) > 0)[0])


# ---------------------------------------------------------------------------
# morphisms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Morphism:
    """``rho(A) = W A W*`` for an isometry ``W`` of band +1."""

    W: BlockOperator
    window: tuple[int, ...]
    label: str = ""

    @property
    def basis(self) -> FockBasis:
        return self.W.basis

    @property
    def unit(self) -> BlockOperator:
        return self.W @ self.W.adjoint()


def make_morphism(basis: FockBasis, f) -> Morphism:
    f = check_normalized(basis, f)
    return Morphism(build_W(basis, f), _window(basis, f), label="rho_f")


def morphism_apply(m: Morphism, A: BlockOperator) -> BlockOperator:
    """``W A W*`` for a gauge-invariant ``A``."""
    if not A.is_block_diagonal():
        raise ValueError("morphisms act on gauge-invariant (band 0) operators")
    return m.W @ A @ m.W.adjoint()


def lift_morphism(m: Morphism, U: BlockOperator) -> Morphism:
    """Morphism ``Ad U o rho o Ad U*`` implemented by ``U W U*``."""
    _check_unitary(U)
    return Morphism(U @ m.W @ U.adjoint(), m.window, label=f"lift of {m.label}")


def build_Y(basis: FockBasis, f, U: BlockOperator) -> BlockOperator:
    """Intertwiner ``W_f U W_f* U*``."""
    _check_unitary(U)
    W = build_W(basis, check_normalized(basis, f))
    return W @ U @ W.adjoint() @ U.adjoint()


@dataclass(frozen=True)
class IntertwinerReport:
    """Residuals of ``YY* = rho(1)``, ``Y*Y = lifted rho(1)`` and ``rho(A)Y = Y lifted(A)``."""

    label: str
    Y: BlockOperator
    residuals: Mapping[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(r <= self.tolerance for r in self.residuals.values())


def intertwiner_verify(basis: FockBasis, f, U: BlockOperator, sample: Sequence[BlockOperator],
                       label: str = "", tol: float = 1e-10) -> IntertwinerReport:
    """Check the intertwiner relations on sectors ``<= n_max - 1``."""
    for A in sample:
        if not A.is_block_diagonal():
            raise ValueError("sample operators must be gauge invariant")
    rho = make_morphism(basis, f)
    lifted = lift_morphism(rho, U)
    Y = build_Y(basis, f, U)
    res = {
        "Y Y* - rho(1)": _safe_norm(Y @ Y.adjoint() - rho.unit),
        "Y* Y - lifted rho(1)": _safe_norm(Y.adjoint() @ Y - lifted.unit),
        "rho(A) Y - Y lifted(A)": max((_safe_norm(morphism_apply(rho, A) @ Y
                                                  - Y @ morphism_apply(lifted, A)) for A in sample),
                                      default=0.0),
    }
    return IntertwinerReport(label, Y, res, tol)


def equivalence_isometry(basis: FockBasis, f1, f2) -> BlockOperator:
    """Partial isometry ``W_{f1} W_{f2}*``."""
    return build_W(basis, f1) @ build_W(basis, f2).adjoint()


def equivalence_residuals(basis: FockBasis, f1, f2, sample: Sequence[BlockOperator]) -> dict[str, float]:
    X = equivalence_isometry(basis, f1, f2)
    r1, r2 = make_morphism(basis, f1), make_morphism(basis, f2)
    return {
        "X X* - E_f1": _safe_norm(X @ X.adjoint() - r1.unit),
        "X* X - E_f2": _safe_norm(X.adjoint() @ X - r2.unit),
        "rho_f1(A) X - X rho_f2(A)": max((_safe_norm(morphism_apply(r1, A) @ X - X @ morphism_apply(r2, A))
                                          for A in sample), default=0.0),
        "non-invariant part": operator_norm(X) - operator_norm(BlockOperator(
            basis, {k: v for k, v in X.blocks.items() if k[0] == k[1]})),
    }


def localization_check(m: Morphism, A: BlockOperator, support: Iterable[int],
                       allow_overlap: bool = False) -> float:
    """``max(||rho(A) - A rho(1)||, ||rho(A) - rho(1) A||)`` on safe sectors.

    ``support`` lists the grid indices the observable is built from. Overlap
    with the window of ``f`` is rejected unless ``allow_overlap`` is set.
    """
    overlap = set(int(j) for j in support) & set(m.window)
    if overlap and not allow_overlap:
        raise ValueError(f"observable support overlaps the window of f at {sorted(overlap)}")
    rA = morphism_apply(m, A)
    E = m.unit
    return max(_safe_norm(rA - A @ E), _safe_norm(rA - E @ A))


# ---------------------------------------------------------------------------
# free covariance
# ---------------------------------------------------------------------------


def free_covariance_check(basis: FockBasis, f, cfg, t: float) -> float:
    """``||Ad U(t)(W_f) - W_{U_1(t) f}||`` on sectors ``<= n_max - 1``."""
    f = check_normalized(basis, f)
    H0 = free_hamiltonian(basis, cfg)
    g = single_particle_propagator(basis.grid, cfg, t) @ f
    diff = evolve(build_W(basis, f), H0, t) - build_W(basis, basis.grid.normalize(g))
    return operator_norm(diff.restrict(max_in=basis.n_max - 1))


def free_transport_lipschitz(basis: FockBasis, f, cfg, times: Sequence[float], n: int,
                             c_prime: float) -> list[tuple[float, float]]:
    """Pairs ``(measured, bound)`` for consecutive transported test functions."""
    f = check_normalized(basis, f)
    fs = [basis.grid.normalize(single_particle_propagator(basis.grid, cfg, t) @ f) for t in times]
    out = []
    for a, b in zip(fs[:-1], fs[1:]):
        out.append((w_star_difference_norm(basis, a, b, n),
                    lipschitz_bound(n, c_prime) * basis.grid.norm(a - b)))
    return out


# ---------------------------------------------------------------------------
# coherence mechanism
# ---------------------------------------------------------------------------


@dataclass
class CoherenceReport:
    """Residuals of the three parts of the coherence mechanism."""

    n: int
    lockstep: dict[str, float] = field(default_factory=dict)
    kappa_consistency: dict[str, float] = field(default_factory=dict)
    integral_interchange: dict[str, float] = field(default_factory=dict)

    def all_residuals(self) -> dict[str, float]:
        out = {}
        for part, vals in (("lockstep", self.lockstep), ("kappa", self.kappa_consistency),
                           ("integral", self.integral_interchange)):
            out.update({f"{part}: {k}": v for k, v in vals.items()})
        return out


def _mat_norm(x) -> float:
    return float(np.linalg.norm(x, 2))


def _free_integral_exact(ham: Hamiltonian, X: np.ndarray, n: int, t: float) -> np.ndarray:
    """``int_0^t e^{isH_n} X e^{-isH_n} ds`` by spectral calculus."""
    eig = ham.eigensystems[n]
    V = eig.eigenvectors
    xe = V.conj().T @ X @ V
    w = eig.eigenvalues[:, None] - eig.eigenvalues[None, :]
    small = np.abs(w * t) < 1e-8
    weight = np.where(small, t + 0.5j * w * t**2,
                      (np.exp(1j * w * t) - 1) / np.where(small, 1.0, 1j * w))
    return V @ (xe * weight) @ V.conj().T


def kappa_beta_residual(gs: GeneratorSum, f, n: int, frame: SpectatorFrame) -> float:
    """``||kappa_n(beta_f(K_{n-1})) - beta_f(kappa_{n-1}(K_{n-1}))||`` for ``K = gs``.

    The left side lowers the conjugate ``W_f K_{n-1} W_f*`` through the
    spectator frame; the right side lowers the generator sum symbolically.
    """
    basis = gs.basis
    if not 2 <= n <= basis.n_max:
        raise ValueError(f"sector {n} outside 2..{basis.n_max}")
    w_ext = build_W(frame.ext, f).block(n, n - 1)
    left = frame.lower(w_ext @ gs.on_basis(frame.ext).realize(n - 1) @ w_ext.conj().T, n)
    k_low = kappa(to_convention(gs, SYMMETRIZED, n - 1), n - 1).realize(n - 2)
    w = build_W(basis, f).block(n - 1, n - 2)
    return _mat_norm(left - w @ k_low @ w.conj().T)


def coherence_mechanism_check(ham: Hamiltonian, f, dyson: DysonConfig, n: int | None = None,
                              frame: SpectatorFrame | None = None) -> CoherenceReport:
    """Verify the coherence mechanism between sectors ``n`` and ``n - 1``.

    Part 1 runs the Dyson recursion in both sectors and compares sector
    ``n - 1`` with the direct product of exponentials; the lowering of each
    sector-``n`` Dyson term is evaluated with a spectator mode and compared
    term by term. Part 2 checks the lowering relations of the generator
    ingredients. Part 3 checks that lowering commutes with the free time
    integral of a second-quantized one-body operator.
    """
    basis = ham.basis
    f = check_normalized(basis, f)
    n = basis.n_max - 1 if n is None else n
    if not 2 <= n <= basis.n_max - 1:
        raise ValueError(f"need sectors n and n-1 both in 1..{basis.n_max - 1}, got n={n}")
    frame = SpectatorFrame(basis) if frame is None else frame
    ext_ham = build_hamiltonian(frame.ext, ham.config)
    rep = CoherenceReport(n)

    # part 1: lockstep recursion
    low = dyson_gamma(ham, f, dyson, [n - 1])[n - 1]
    direct_low = gamma_direct(ham, f, dyson.t, [n - 1])[n - 1]
    rep.lockstep["dyson(n-1) - direct(n-1)"] = _mat_norm(low.gamma - direct_low)
    high_ext = dyson_gamma(ext_ham, f, dyson, [n])[n]
    rep.lockstep["kappa(D_n,k) - D_n-1,k"] = max(
        _mat_norm(frame.lower(a, n) - b) for a, b in zip(high_ext.terms, low.terms))
    rep.lockstep["spectator leakage"] = max(frame.leakage(a, n) for a in high_ext.terms)
    direct_ext = gamma_direct(ext_ham, f, dyson.t, [n])[n]
    rep.lockstep["kappa(Gamma_n) - Gamma_n-1"] = _mat_norm(frame.lower(direct_ext, n) - direct_low)

    # part 2: generator ingredients
    pieces = localized_potentials(ham, f)
    gs_hat = GeneratorSum.single(basis, 1, pieces.O_hat1)
    lowered = kappa(to_convention(gs_hat, SYMMETRIZED, n), n).realize(n - 1)
    target = lift_one_body(basis, pieces.O_hat1, n - 1)
    rep.kappa_consistency["kappa(lift_n O_hat) - lift_n-1 O_hat"] = max(
        _mat_norm(lowered - target),
        _mat_norm(frame.lower(lift_one_body(frame.ext, pieces.O_hat1, n), n) - target))
    nf_fns = {"(1+N)^-1/2": lambda x: (1 + x) ** -0.5,
              "(1+N)^1/2": lambda x: (1 + x) ** 0.5,
              "N^-1 E": lambda x: np.where(x > 0, 1.0 / np.maximum(x, 1), 0.0),
              "E": lambda x: (x > 0).astype(float)}
    rep.kappa_consistency["kappa(b(N_f,n)) - b(N_f,n-1)"] = max(
        _mat_norm(frame.lower(mode_number_function(frame.ext, f, b, n), n)
                  - mode_number_function(basis, f, b, n - 1)) for b in nf_fns.values())
    gens = [gs_hat, GeneratorSum.single(basis, 2, pieces.V_check2)]
    rep.kappa_consistency["kappa(beta_f(K)) - beta_f(kappa(K))"] = max(
        kappa_beta_residual(gs, f, n, frame) for gs in gens)
    gd_ext = generator_difference(ext_ham, f, [n])[n]
    gd_low = generator_difference(ham, f, [n - 1])[n - 1]
    rep.kappa_consistency["kappa(A_n + B_n) - (A_n-1 + B_n-1)"] = _mat_norm(
        frame.lower(gd_ext.structured, n) - gd_low.structured)

    # part 3: free integral interchange
    H0 = ham.free_part()
    H0_ext = ext_ham.free_part()
    O = pieces.O_hat1
    t = dyson.t
    steps = dyson.intervals()
    nodes = np.linspace(0.0, t, steps + 1)
    U1 = [H0.eigensystems[1].exp(s) for s in nodes]
    form = 0.0
    evolved_high, lowered_nodes = [], []
    for s, u in zip(nodes, U1):
        Os = u @ O @ u.conj().T
        x_high = H0.propagator(n, s) @ lift_one_body(basis, O, n) @ H0.propagator(n, -s)
        form = max(form, _mat_norm(x_high - lift_one_body(basis, Os, n)))
        evolved_high.append(x_high)
        gs_s = GeneratorSum.single(basis, 1, Os)
        lowered_nodes.append(kappa(to_convention(gs_s, SYMMETRIZED, n), n).realize(n - 1))
    dt = t / steps
    integral_low = cumulative_integral(np.array(lowered_nodes), dt, dyson.rule)[-1]
    exact_low = _free_integral_exact(H0, lift_one_body(basis, O, n - 1), n - 1, t)
    rep.integral_interchange["free evolution keeps lift form"] = form
    rep.integral_interchange["kappa(int O_n) - int O_n-1 (quadrature)"] = _mat_norm(integral_low - exact_low)
    ext_integral = _free_integral_exact(H0_ext, lift_one_body(frame.ext, O, n), n, t)
    rep.integral_interchange["spectator kappa(int O_n) - int O_n-1"] = _mat_norm(
        frame.lower(ext_integral, n) - exact_low)
    return rep


# ---------------------------------------------------------------------------
# trivial character
# ---------------------------------------------------------------------------


@dataclass
class CharacterReport:
    """Scalar ``zeta`` of ``Y X*`` on ``E_f F_n`` and the lowering factor ``xi``."""

    times: tuple[float, ...]
    zeta: dict[tuple[float, int], complex] = field(default_factory=dict)
    off_scalar: dict[tuple[float, int], float] = field(default_factory=dict)
    xi: dict[tuple[float, int], complex] = field(default_factory=dict)
    xi_residual: dict[tuple[float, int], float] = field(default_factory=dict)

    def max_scalar_deviation(self) -> float:
        return max((abs(z - 1) for z in self.zeta.values()), default=0.0)

    def max_off_scalar(self) -> float:
        return max(self.off_scalar.values(), default=0.0)

    def max_xi_deviation(self) -> float:
        return max([abs(x - 1) for x in self.xi.values()] + list(self.xi_residual.values()), default=0.0)


def _intertwiner_sector(ham: Hamiltonian, W: BlockOperator, n: int, t: float) -> np.ndarray:
    """Block ``n`` of ``W e^{itH} W* e^{-itH}``."""
    w = W.block(n, n - 1)
    return w @ ham.propagator(n - 1, t) @ w.conj().T @ ham.propagator(n, -t)


def trivial_character_check(ham: Hamiltonian, f, t_grid: Sequence[float], order: int = 20,
                            steps: int = 256, sectors: Sequence[int] | None = None,
                            frame: SpectatorFrame | None = None) -> CharacterReport:
    """Check that ``Y_f(t) X(t)*`` is the scalar 1 on ``E_f F_n``.

    ``X(t)`` is the adjoint of the Dyson-series ``Gamma_f(t)``. The lowering
    factor ``xi_n`` relating ``Y_{f,n}`` and ``Y_{f,n-1}`` is fitted through a
    spectator mode and should be 1 as well.
    """
    basis = ham.basis
    f = check_normalized(basis, f)
    sectors = list(range(1, basis.n_max)) if sectors is None else list(sectors)
    frame = SpectatorFrame(basis) if frame is None else frame
    ext_ham = build_hamiltonian(frame.ext, ham.config)
    W = build_W(basis, f)
    W_ext = build_W(frame.ext, f)
    diffs = generator_difference(ham, f, sectors)
    rep = CharacterReport(tuple(float(t) for t in t_grid))
    for t in t_grid:
        dy = dyson_gamma(ham, f, DysonConfig(t=t, order=order, steps=steps, tolerance=np.inf),
                         sectors, differences=diffs)
        for n in sectors:
            w = W.block(n, n - 1)
            E = w @ w.conj().T
            Y = _intertwiner_sector(ham, W, n, t)
            Z = E @ Y @ dy[n].gamma @ E
            zeta = complex(np.trace(Z) / np.trace(E).real)
            rep.zeta[(t, n)] = zeta
            rep.off_scalar[(t, n)] = _mat_norm(Z - zeta * E)
            if n >= 2:
                y_low = _intertwiner_sector(ham, W, n - 1, t)
                y_lowered = frame.lower(_intertwiner_sector(ext_ham, W_ext, n, t), n)
                xi = complex(np.vdot(y_low, y_lowered) / np.vdot(y_low, y_low).real)
                rep.xi[(t, n)] = xi
                rep.xi_residual[(t, n)] = _mat_norm(y_lowered - xi * y_low)
    return rep


# ---------------------------------------------------------------------------
# continuity diagnostics
# ---------------------------------------------------------------------------


def gamma_continuity(ham: Hamiltonian, f, times: Sequence[float], n: int) -> list[tuple[float, float]]:
    """Pairs ``(||Gamma(t2) - Gamma(t1)||, ||C_f|| |t2 - t1|)`` for consecutive times."""
    gens = {t: gamma_direct(ham, f, t, [n])[n] for t in times}
    cnorm = _mat_norm(generator_difference(ham, f, [n])[n].direct)
    return [(_mat_norm(gens[b] - gens[a]), cnorm * abs(b - a)) for a, b in zip(times[:-1], times[1:])]


def orbit_lct_modulus(ham: Hamiltonian, f, times: Sequence[float], n: int) -> list[float]:
    """``||(Ad e^{it2 H}(W) - Ad e^{it1 H}(W)) P_n|| / |t2 - t1|`` for consecutive times."""
    W = build_W(ham.basis, f)
    orbit = [evolve(W, ham, t).restrict(max_in=n) for t in times]
    return [operator_norm(b - a) / abs(t2 - t1)
            for a, b, t1, t2 in zip(orbit[:-1], orbit[1:], times[:-1], times[1:])]


def orbit_lct_bound(ham: Hamiltonian, f, n: int) -> float:
    """``||[H, W_f] P_n||``, the Lipschitz constant of the orbit on ``P_n``."""
    W = build_W(ham.basis, f)
    return operator_norm((ham @ W - W @ ham).restrict(max_in=n))


def mollify(F: BlockOperator, ham: Hamiltonian, kernel: Callable[[np.ndarray], np.ndarray],
            t_grid: np.ndarray) -> BlockOperator:
    """Trapezoid approximation of ``int k(t) Ad e^{itH}(F) dt`` on ``t_grid``."""
    t_grid = np.asarray(t_grid, dtype=float)
    w = np.full(len(t_grid), t_grid[1] - t_grid[0])
    w[0] = w[-1] = 0.5 * (t_grid[1] - t_grid[0])
    k = kernel(t_grid)
    total = BlockOperator(F.basis)
    for wj, kj, tj in zip(w, k, t_grid):
        if kj != 0:
            total = total + evolve(F, ham, tj).scale(wj * kj)
    return total


def mollified_continuity(F: BlockOperator, ham: Hamiltonian, kernel: Callable[[np.ndarray], np.ndarray],
                         t_grid: np.ndarray, shifts: Sequence[int]) -> list[tuple[float, float]]:
    """Continuity modulus of the orbit of a mollified operator.

    ``shifts`` are integer multiples of the grid spacing. Returns pairs
    ``(||Ad e^{i tau H}(F_k) - F_k||, ||F|| |tau| sup|k'| L)`` with ``L`` the
    length of ``t_grid``. The kernel must vanish on the last ``max(shifts)``
    nodes so that the shifted sum stays on the grid.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    dt = t_grid[1] - t_grid[0]
    k = kernel(t_grid)
    if max(shifts) >= len(t_grid) or np.any(k[len(t_grid) - max(shifts):] != 0):
        raise ValueError("kernel must vanish on the nodes that the shifts push off the grid")
    Fk = mollify(F, ham, kernel, t_grid)
    lip = np.max(np.abs(np.diff(k))) / dt
    length = t_grid[-1] - t_grid[0]
    fnorm = operator_norm(F)
    out = []
    for q in shifts:
        tau = q * dt
        out.append((operator_norm(evolve(Fk, ham, tau) - Fk), fnorm * abs(tau) * lip * length))
    return out
