"""Hamiltonians with pair potentials, evolutions and the Dyson integrator.

The sector Hamiltonian is

    H_n = dGamma(P^2 + kappa^2 Q^2) + sum_{p != q} V(x_p - x_q),

the second term being the second quantization of multiplication by
``V(x_1 - x_2)`` on ``F_2``. All exponentials are taken by spectral calculus
on cached sector eigensystems.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Iterable, Mapping

import numpy as np

from .fields import build_W, check_normalized, mode_number_function
from .fock import BlockOperator, FockBasis, GridSpace, UnsafeSectorError, block_diagonal
from .observables import (lift_one_body, lift_two_body, pair_multiplication,
                          two_body_product)

__all__ = [
    "PotentialSpec",
    "HamiltonianConfig",
    "SectorEigensystem",
    "Hamiltonian",
    "DysonConfig",
    "MissingEigensystemError",
    "build_hamiltonian",
    "free_hamiltonian",
    "evolve",
    "single_particle_propagator",
    "free_evolve_single",
    "sigma_f",
    "beta",
    "LocalizedPieces",
    "localized_potentials",
    "GeneratorDifference",
    "generator_difference",
    "pull_through_residuals",
    "lowered_parts_residual",
    "hat_parts_residual",
    "gamma_direct",
    "DysonResult",
    "dyson_gamma",
    "interaction_picture_expand",
    "interaction_picture_direct",
    "interaction_tail_bound",
    "cumulative_integral",
    "time_ordered_integral",
    "riemann_map_sum",
]


class MissingEigensystemError(TypeError):
    """An evolution was requested with an operator lacking eigensystems."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PotentialSpec:
    """Even pair potential profile.

    ``gaussian``: ``s exp(-x^2 / (2 w^2))``;
    ``cosine_bump``: ``s (1 + cos(pi x / w)) / 2`` for ``|x| < w`` and 0 outside;
    ``zero``: identically 0.
    """

    kind: str = "gaussian"
    strength: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "cosine_bump", "zero"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind != "zero" and not self.width > 0:
            raise ValueError("potential width must be positive")
        if not np.isfinite(self.strength):
            raise ValueError("potential strength must be finite")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "zero" or self.strength == 0:
            return np.zeros_like(x)
        if self.kind == "gaussian":
            return self.strength * np.exp(-(x**2) / (2 * self.width**2))
        inside = np.abs(x) < self.width
        return np.where(inside, 0.5 * self.strength * (1 + np.cos(np.pi * x / self.width)), 0.0)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.strength == 0


@dataclass(frozen=True)
class HamiltonianConfig:
    kappa: float = 0.3
    potential: PotentialSpec = field(default_factory=PotentialSpec)

    def __post_init__(self):
        if not (np.isfinite(self.kappa) and self.kappa >= 0):
            raise ValueError(f"trap scale must be finite and >= 0, got {self.kappa}")

    def free(self) -> "HamiltonianConfig":
        return HamiltonianConfig(self.kappa, PotentialSpec("zero", 0.0, 1.0))


@dataclass(frozen=True)
class SectorEigensystem:
    n: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def exp(self, t: float) -> np.ndarray:
        """``e^{itH_n}``."""
        v = self.eigenvectors
        return (v * np.exp(1j * t * self.eigenvalues)) @ v.conj().T


@dataclass(frozen=True)
class DysonConfig:
    """Dyson integrator settings.

    Parameters
    ----------
    t : float
        Final time.
    order : int
        Highest retained order ``K``.
    steps : int
        Number of uniform quadrature intervals on ``[0, t]``; rounded up to
        an even number for Simpson's rule.
    rule : {"simpson", "trapezoid"}
    tolerance : float
        Threshold for the tail-bound warning.
    """

    t: float = 0.4
    order: int = 8
    steps: int = 64
    rule: str = "simpson"
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("series order must be >= 0")
        if self.steps < 2:
            raise ValueError("quadrature needs at least 2 steps")
        if self.rule not in ("simpson", "trapezoid"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if not np.isfinite(self.t):
            raise ValueError("time must be finite")

    def intervals(self) -> int:
        m = int(self.steps)
        if self.rule == "simpson" and m % 2:
            m += 1
        return m


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------


class Hamiltonian(BlockOperator):
    """Block-diagonal Hermitian operator with cached sector eigensystems."""

    __slots__ = ("config", "one_body", "pair", "eigensystems", "_free")

    def __init__(self, basis: FockBasis, per_sector: Mapping[int, np.ndarray],
                 config: HamiltonianConfig, one_body: np.ndarray, pair: np.ndarray | None):
        super().__init__(basis, {(n, n): m for n, m in per_sector.items()})
        self.config = config
        self.one_body = one_body
        self.pair = pair
        eig = {}
        for n, mat in per_sector.items():
            w, v = np.linalg.eigh(mat)
            eig[n] = SectorEigensystem(n, w, v)
        self.eigensystems = eig
        self._free = None

    def propagator(self, n: int, t: float) -> np.ndarray:
        return self.eigensystems[n].exp(t)

    def free_part(self) -> "Hamiltonian":
        """Hamiltonian with the same trap and no pair potential."""
        if self._free is None:
            self._free = self if self.pair is None else free_hamiltonian(self.basis, self.config)
        return self._free

    def potential_sector(self, n: int) -> np.ndarray:
        if self.pair is None:
            return np.zeros((self.basis.dim(n),) * 2, dtype=complex)
        return lift_two_body(self.basis, self.pair, n)


def _two_body_basis(basis: FockBasis) -> FockBasis:
    if basis.n_max >= 2:
        return basis
    return FockBasis(basis.grid, 2, spectator_modes=basis.spectator_modes)


def build_hamiltonian(basis: FockBasis, cfg: HamiltonianConfig) -> Hamiltonian:
    """Sector Hamiltonians ``H_n`` with eigensystems."""
    one = basis.pad_one_body(basis.grid.trapped_kinetic(cfg.kappa))
    pair = None
    if not cfg.potential.is_zero and basis.n_max >= 2:
        pair = pair_multiplication(basis, cfg.potential)
    per_sector = {}
    for n in basis.sectors():
        mat = lift_one_body(basis, one, n)
        if pair is not None:
            mat = mat + lift_two_body(basis, pair, n)
        per_sector[n] = 0.5 * (mat + mat.conj().T)
    return Hamiltonian(basis, per_sector, cfg, one, pair)


def free_hamiltonian(basis: FockBasis, cfg: HamiltonianConfig) -> Hamiltonian:
    """Second quantization of ``P^2 + kappa^2 Q^2``; the trap is kept."""
    return build_hamiltonian(basis, cfg.free())


def evolve(F: BlockOperator, H: BlockOperator, t: float) -> BlockOperator:
    """``e^{itH} F e^{-itH}`` block by block."""
    eig = getattr(H, "eigensystems", None)
    if eig is None:
        raise MissingEigensystemError("evolve needs a Hamiltonian with cached eigensystems")
    if t == 0:
        return F
    props = {n: e.exp(t) for n, e in eig.items()}
    return F.map_blocks(lambda a, b, m: props[a] @ m @ props[b].conj().T)


def single_particle_propagator(grid: GridSpace, cfg: HamiltonianConfig, t: float) -> np.ndarray:
    """``U_1(t) = e^{it(P^2 + kappa^2 Q^2)}`` on grid values."""
    w, v = np.linalg.eigh(grid.trapped_kinetic(cfg.kappa))
    return (v * np.exp(1j * t * w)) @ v.conj().T


def free_evolve_single(grid: GridSpace, f, cfg: HamiltonianConfig, t: float) -> np.ndarray:
    """Apply the single-particle propagator to ``f``."""
    return single_particle_propagator(grid, cfg, t) @ np.asarray(f, dtype=complex)


# ---------------------------------------------------------------------------
# sigma_f and beta_g
# ---------------------------------------------------------------------------


def _sigma_weights(basis: FockBasis, f, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``(1+N_f)^{-1/2}`` and ``(1+N_f)^{1/2}`` on ``F_n``."""
    return (mode_number_function(basis, f, lambda x: (1.0 + x) ** -0.5, n),
            mode_number_function(basis, f, lambda x: (1.0 + x) ** 0.5, n))


def _sigma_matrix(basis: FockBasis, f, mat: np.ndarray, n: int, invert: bool = False) -> np.ndarray:
    lo, hi = _sigma_weights(basis, f, n)
    return hi @ mat @ lo if invert else lo @ mat @ hi


def sigma_f(O: BlockOperator, f, invert: bool = False) -> BlockOperator:
    """``(1+N_f)^{-1/2} O (1+N_f)^{1/2}`` per sector, or the inverse map."""
    if not O.is_block_diagonal():
        raise ValueError("sigma_f needs a gauge-invariant (block-diagonal) operator")
    return O.map_blocks(lambda a, b, m: _sigma_matrix(O.basis, f, m, a, invert))


def beta(g, O: BlockOperator) -> BlockOperator:
    """``W_g O W_g*``."""
    W = build_W(O.basis, g)
    return W @ O @ W.adjoint()


# ---------------------------------------------------------------------------
# localized potentials and the generator difference
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalizedPieces:
    """Projector splittings of the one- and two-body parts relative to ``f``.

    Attributes
    ----------
    kinetic_pieces : tuple
        ``E'KE', EKE', E'KE, EKE`` with ``E' = 1 - E`` and ``K = P^2_kappa``.
    potential_pieces : tuple
        The six pieces of ``V`` on ``F_2``, in the order
        ``P0 V P0``, ``-P2 V P2``, ``-P2 V (1-2e)``, ``-(1-2e) V P2``,
        ``2 e V (1-e)``, ``2 (1-e) V e`` where ``e = E (x)_s 1``.
    """

    two_body_basis: FockBasis
    E1: np.ndarray
    kinetic: np.ndarray
    kinetic_pieces: tuple[np.ndarray, ...]
    V2: np.ndarray
    e2: np.ndarray
    potential_pieces: tuple[np.ndarray, ...]
    V_hat2: np.ndarray
    V_check2: np.ndarray
    O_hat1: np.ndarray
    O_check1: np.ndarray
    O_check2: np.ndarray

    def kinetic_completeness(self) -> float:
        return float(np.linalg.norm(sum(self.kinetic_pieces) - self.kinetic, 2))

    def potential_completeness(self) -> float:
        return float(np.linalg.norm(sum(self.potential_pieces) - self.V2, 2))


def localized_potentials(ham: Hamiltonian, f) -> LocalizedPieces:
    """Split ``P^2_kappa`` and ``V`` by the one-particle projection onto ``f``."""
    basis = ham.basis
    f = check_normalized(basis, f)
    tb = _two_body_basis(basis)
    c = basis.coords(f)
    m = basis.num_modes
    E = np.outer(c, c.conj())
    Q = np.eye(m) - E
    K = ham.one_body
    kin = (Q @ K @ Q, E @ K @ Q, Q @ K @ E, E @ K @ E)
    if ham.pair is not None and tb is basis:
        V2 = ham.pair
    else:
        V2 = pair_multiplication(tb, ham.config.potential)
    P0 = two_body_product(tb, Q, Q)
    P2 = two_body_product(tb, E, E)
    e = two_body_product(tb, E, np.eye(m))
    one = np.eye(tb.dim(2))
    pieces = (P0 @ V2 @ P0,
              -P2 @ V2 @ P2,
              -P2 @ V2 @ (one - 2 * e),
              -(one - 2 * e) @ V2 @ P2,
              2 * e @ V2 @ (one - e),
              2 * (one - e) @ V2 @ e)
    return LocalizedPieces(
        two_body_basis=tb, E1=E, kinetic=K, kinetic_pieces=kin,
        V2=V2, e2=e, potential_pieces=pieces,
        V_hat2=2.0 * V2 @ e,
        V_check2=pieces[4] + pieces[5],
        O_hat1=K @ E,
        O_check1=kin[1] + kin[2] + kin[3],
        O_check2=pieces[1] + pieces[2] + pieces[3],
    )


def _lift2(basis: FockBasis, pieces: LocalizedPieces, op2: np.ndarray, n: int) -> np.ndarray:
    if n < 2:
        return np.zeros((basis.dim(n),) * 2, dtype=complex)
    return lift_two_body(basis, op2, n)


@dataclass(frozen=True)
class GeneratorDifference:
    """Generator difference on ``F_n`` computed directly and from its pieces."""

    n: int
    direct: np.ndarray
    A: np.ndarray
    B: np.ndarray

    @property
    def structured(self) -> np.ndarray:
        return self.A + self.B

    @property
    def residual(self) -> float:
        return float(np.linalg.norm(self.direct - self.structured, 2))


def _pseudo_inverse_Nf(basis, f, n):
    return mode_number_function(basis, f, lambda x: np.where(x > 0, 1.0 / np.maximum(x, 1), 0.0), n)


def _check_pieces(ham: Hamiltonian, f, n: int, pieces: LocalizedPieces | None):
    basis = ham.basis
    if not 0 <= n <= basis.n_max - 1:
        raise UnsafeSectorError(f"sector {n} outside the safe range 0..{basis.n_max - 1}")
    return localized_potentials(ham, f) if pieces is None else pieces


def check_lowered_parts(ham: Hamiltonian, f, n: int, pieces: LocalizedPieces | None = None):
    """``(O_check, V_check)`` lifted to ``F_n``."""
    basis = ham.basis
    pieces = localized_potentials(ham, f) if pieces is None else pieces
    o_check = lift_one_body(basis, pieces.O_check1, n) + _lift2(basis, pieces, pieces.O_check2, n)
    v_check = _lift2(basis, pieces, pieces.V_check2, n)
    return o_check, v_check


def hat_parts(ham: Hamiltonian, f, n: int, pieces: LocalizedPieces | None = None):
    """``(A_hat, B_hat)`` on ``F_n``."""
    basis = ham.basis
    pieces = localized_potentials(ham, f) if pieces is None else pieces
    ninv = _pseudo_inverse_Nf(basis, f, n)
    a_hat = lift_one_body(basis, pieces.O_hat1, n) @ ninv
    b_hat = _lift2(basis, pieces, pieces.V_hat2, n) @ ninv
    return a_hat, b_hat


def generator_difference(ham: Hamiltonian, f, sectors: Iterable[int] | None = None,
                         pieces: LocalizedPieces | None = None) -> dict[int, GeneratorDifference]:
    """``(H_n - W_f H_{n-1} W_f*) E_{f,n}`` directly and as ``A_{f,n} + B_{f,n}``.

    ``A = A_hat + W sigma^{-1}(A_check) W*`` and ``B = B_hat + W sigma^{-1}(B_check) W*``
    with ``A_check = O_check - sigma(O_check)`` and ``B_check = V_check - sigma(V_check)``
    taken on ``F_{n-1}``.
    """
    basis = ham.basis
    f = check_normalized(basis, f)
    sectors = range(basis.n_max) if sectors is None else sectors
    pieces = localized_potentials(ham, f) if pieces is None else pieces
    W = build_W(basis, f)
    out = {}
    for n in sectors:
        _check_pieces(ham, f, n, pieces)
        D = basis.dim(n)
        if n == 0:
            z = np.zeros((D, D), dtype=complex)
            out[0] = GeneratorDifference(0, z, z, z)
            continue
        w = W.block(n, n - 1)
        E = w @ w.conj().T
        direct = (ham.diag(n) - w @ ham.diag(n - 1) @ w.conj().T) @ E
        a_hat, b_hat = hat_parts(ham, f, n, pieces)
        o_check, v_check = check_lowered_parts(ham, f, n - 1, pieces)
        a_check = o_check - _sigma_matrix(basis, f, o_check, n - 1)
        b_check = v_check - _sigma_matrix(basis, f, v_check, n - 1)
        A = a_hat + w @ _sigma_matrix(basis, f, a_check, n - 1, invert=True) @ w.conj().T
        B = b_hat + w @ _sigma_matrix(basis, f, b_check, n - 1, invert=True) @ w.conj().T
        out[n] = GeneratorDifference(n, direct, A, B)
    return out


def _product_map(basis: FockBasis, f, n: int) -> np.ndarray:
    """Matrix of ``Phi -> |f> (x)_s Phi`` from ``F_{n-1}`` to ``F_n``."""
    from .fields import creator
    return creator(basis, f).block(n, n - 1) / np.sqrt(n)


def pull_through_residuals(basis: FockBasis, f, O: np.ndarray, n: int) -> tuple[float, float]:
    """Residuals of the two pull-through relations for ``O`` on ``F_{n-1}``.

    (i)  ``W O W* (|f> (x)_s Phi) = |f> (x)_s sigma_f(O) Phi``;
    (ii) ``|f> (x)_s O Phi = W sigma_f^{-1}(O) W* (|f> (x)_s Phi)``.
    """
    f = check_normalized(basis, f)
    if not 1 <= n <= basis.n_max:
        raise UnsafeSectorError(f"sector {n} outside 1..{basis.n_max}")
    w = build_W(basis, f).block(n, n - 1)
    S = _product_map(basis, f, n)
    r1 = w @ O @ w.conj().T @ S - S @ _sigma_matrix(basis, f, O, n - 1)
    r2 = S @ O - w @ _sigma_matrix(basis, f, O, n - 1, invert=True) @ w.conj().T @ S
    return float(np.linalg.norm(r1, 2)), float(np.linalg.norm(r2, 2))


def lowered_parts_residual(ham: Hamiltonian, f, n: int, pieces: LocalizedPieces | None = None) -> float:
    """``||H_n - sigma_f(H_n) - (A_check + B_check)||`` on ``F_n``."""
    basis = ham.basis
    f = check_normalized(basis, f)
    H = ham.diag(n)
    o_check, v_check = check_lowered_parts(ham, f, n, pieces)
    a_check = o_check - _sigma_matrix(basis, f, o_check, n)
    b_check = v_check - _sigma_matrix(basis, f, v_check, n)
    lhs = H - _sigma_matrix(basis, f, H, n)
    return float(np.linalg.norm(lhs - a_check - b_check, 2))


def hat_parts_residual(ham: Hamiltonian, f, n: int, pieces: LocalizedPieces | None = None) -> float:
    """``||H_n S - S H_{n-1} - (A_hat + B_hat) S||`` with ``S Phi = |f> (x)_s Phi``."""
    basis = ham.basis
    f = check_normalized(basis, f)
    S = _product_map(basis, f, n)
    a_hat, b_hat = hat_parts(ham, f, n, pieces)
    r = ham.diag(n) @ S - S @ ham.diag(n - 1) - (a_hat + b_hat) @ S
    return float(np.linalg.norm(r, 2))


__all__ += ["check_lowered_parts", "hat_parts"]


# ---------------------------------------------------------------------------
# Gamma_f(t)
# ---------------------------------------------------------------------------


def _safe_sectors(basis: FockBasis, sectors):
    sectors = list(range(basis.n_max)) if sectors is None else list(sectors)
    for n in sectors:
        if not 0 <= n <= basis.n_max - 1:
            raise UnsafeSectorError(f"sector {n} outside the safe range 0..{basis.n_max - 1}")
    return sectors


def gamma_direct(ham: Hamiltonian, f, t: float, sectors: Iterable[int] | None = None) -> dict[int, np.ndarray]:
    """``e^{itH_n} e^{-it W H_{n-1} W*} E_{f,n}`` per safe sector."""
    basis = ham.basis
    f = check_normalized(basis, f)
    W = build_W(basis, f)
    out = {}
    for n in _safe_sectors(basis, sectors):
        if n == 0:
            out[0] = np.zeros((1, 1), dtype=complex)
            continue
        w = W.block(n, n - 1)
        E = w @ w.conj().T
        K = w @ ham.diag(n - 1) @ w.conj().T
        kw, kv = np.linalg.eigh(0.5 * (K + K.conj().T))
        back = (kv * np.exp(-1j * t * kw)) @ kv.conj().T
        out[n] = ham.propagator(n, t) @ back @ E
    return out


def cumulative_integral(values: np.ndarray, dt: float, rule: str = "simpson") -> np.ndarray:
    """Running integrals ``int_0^{s_j}`` of samples on a uniform grid (axis 0).

    Simpson's rule is used on pairs of intervals; at odd nodes the last
    interval is closed with the three-point formula
    ``dt (-y_{j-2} + 8 y_{j-1} + 5 y_j) / 12``.
    """
    y = np.asarray(values)
    M = y.shape[0] - 1
    out = np.zeros_like(y, dtype=complex)
    if M == 0:
        return out
    if rule == "trapezoid" or M == 1:
        out[1:] = np.cumsum(0.5 * dt * (y[1:] + y[:-1]), axis=0)
        return out
    if rule != "simpson":
        raise ValueError(f"unknown quadrature rule {rule!r}")
    out[1] = dt * (5 * y[0] + 8 * y[1] - y[2]) / 12
    for j in range(2, M + 1):
        if j % 2 == 0:
            out[j] = out[j - 2] + dt * (y[j - 2] + 4 * y[j - 1] + y[j]) / 3
        else:
            out[j] = out[j - 1] + dt * (-y[j - 2] + 8 * y[j - 1] + 5 * y[j]) / 12
    return out


def time_ordered_integral(sampler: Callable[[float], np.ndarray], t: float, steps: int,
                          rule: str = "simpson") -> np.ndarray:
    """Composite quadrature of ``int_0^t sampler(s) ds`` on ``steps`` intervals."""
    if steps < 2:
        raise ValueError("quadrature needs at least 2 steps")
    s = np.linspace(0.0, t, steps + 1)
    vals = np.array([sampler(si) for si in s])
    return cumulative_integral(vals, t / steps, rule)[-1]


def riemann_map_sum(lam: Callable[[float, np.ndarray], np.ndarray],
                    sampler: Callable[[float], np.ndarray], t: float, m: int,
                    inner_steps: int = 16, rule: str = "simpson") -> np.ndarray:
    """``sum_{l=1}^m lam(l t/m, int_{(l-1)t/m}^{l t/m} sampler(s) ds)``.

    Approximates ``int_0^t lam(s, sampler(s)) ds`` with error ``O(1/m)``.
    """
    total = None
    for l in range(1, m + 1):
        a, b = (l - 1) * t / m, l * t / m
        block = time_ordered_integral(lambda s: sampler(a + s), b - a, inner_steps, rule)
        term = lam(b, block)
        total = term if total is None else total + term
    return total


@dataclass(frozen=True)
class DysonResult:
    n: int
    gamma: np.ndarray
    term_norms: tuple[float, ...]
    generator_norm: float
    t: float
    intervals: int
    terms: tuple[np.ndarray, ...] = ()

    def term_bounds(self) -> tuple[float, ...]:
        x = self.generator_norm * abs(self.t)
        return tuple(x**k / factorial(k) for k in range(len(self.term_norms)))

    def tail_bound(self) -> float:
        x = self.generator_norm * abs(self.t)
        K = len(self.term_norms) - 1
        return x ** (K + 1) / factorial(K + 1) * np.exp(x)


_OVERFLOW_GUARD = 1e3


def dyson_gamma(ham: Hamiltonian, f, dyson: DysonConfig, sectors: Iterable[int] | None = None,
                differences: Mapping[int, GeneratorDifference] | None = None) -> dict[int, DysonResult]:
    """Order-``K`` Dyson partial sum for ``Gamma_{f,n}(t)``.

    Solves ``D_0 = E_{f,n}``, ``D_{k+1}(s) = int_0^s C(u) D_k(u) du`` with
    ``C(u) = e^{iuH_n} (A + B) e^{-iuH_n}`` in the eigenbasis of ``H_n`` and
    returns ``sum_k i^k D_k(t)``.
    """
    basis = ham.basis
    f = check_normalized(basis, f)
    sectors = _safe_sectors(basis, sectors)
    if differences is None:
        differences = generator_difference(ham, f, [n for n in sectors if n > 0])
    W = build_W(basis, f)
    M = dyson.intervals()
    s = np.linspace(0.0, dyson.t, M + 1)
    dt = dyson.t / M
    out = {}
    for n in sectors:
        if n == 0:
            z = np.zeros((1, 1), dtype=complex)
            out[0] = DysonResult(0, z, (0.0,) * (dyson.order + 1), 0.0, dyson.t, M,
                                 (z,) * (dyson.order + 1))
            continue
        w = W.block(n, n - 1)
        E = w @ w.conj().T
        gen = differences[n].structured
        cnorm = float(np.linalg.norm(gen, 2))
        if dyson.order * cnorm * abs(dyson.t) > _OVERFLOW_GUARD:
            raise OverflowError("Dyson series parameters exceed the overflow guard")
        eig = ham.eigensystems[n]
        V = eig.eigenvectors
        gen_e = V.conj().T @ gen @ V
        E_e = V.conj().T @ E @ V
        freq = eig.eigenvalues[:, None] - eig.eigenvalues[None, :]
        phases = np.exp(1j * s[:, None, None] * freq[None])
        C = phases * gen_e[None]
        D = np.broadcast_to(E_e, (M + 1,) + E_e.shape)
        total = E_e.copy()
        norms = [float(np.linalg.norm(E, 2))]
        terms = [E]
        for k in range(1, dyson.order + 1):
            D = cumulative_integral(C @ D, dt, dyson.rule)
            term = (1j ** k) * D[-1]
            total = total + term
            norms.append(float(np.linalg.norm(term, 2)))
            terms.append(V @ term @ V.conj().T)
        x = cnorm * abs(dyson.t)
        tail = x ** (dyson.order + 1) / factorial(dyson.order + 1) * np.exp(x)
        if tail > dyson.tolerance:
            warnings.warn(f"Dyson tail bound {tail:.2e} exceeds tolerance {dyson.tolerance:.1e} "
                          f"in sector {n}", RuntimeWarning, stacklevel=2)
        out[n] = DysonResult(n, V @ total @ V.conj().T, tuple(norms), cnorm, dyson.t, M, tuple(terms))
    return out


# ---------------------------------------------------------------------------
# interaction picture
# ---------------------------------------------------------------------------


def interaction_picture_direct(ham: Hamiltonian, B: np.ndarray, n: int, s: float) -> np.ndarray:
    """``e^{isH_0} e^{-isH} B e^{isH} e^{-isH_0}`` on ``F_n``."""
    L = ham.free_part().propagator(n, s) @ ham.propagator(n, -s)
    return L @ B @ L.conj().T


def interaction_picture_expand(ham: Hamiltonian, B: np.ndarray, n: int, s: float, order: int,
                               steps: int = 256, rule: str = "simpson") -> tuple[np.ndarray, tuple[float, ...]]:
    """Nested-commutator series for the interaction-picture conjugation of ``B``.

    Returns the partial sum ``B + sum_{k<=order} (-i)^k X_k(s)`` with
    ``X_k(u) = int_0^u [V(w)_0, X_{k-1}(w)] dw`` and ``V(w)_0`` the potential
    evolved by the free dynamics, together with the norms of the terms.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    B = np.asarray(B, dtype=complex)
    free = ham.free_part().eigensystems[n]
    U = free.eigenvectors
    Vn = ham.potential_sector(n)
    v_e = U.conj().T @ Vn @ U
    b_e = U.conj().T @ B @ U
    M = max(2, int(steps))
    if rule == "simpson" and M % 2:
        M += 1
    u = np.linspace(0.0, s, M + 1)
    freq = free.eigenvalues[:, None] - free.eigenvalues[None, :]
    Vu = np.exp(1j * u[:, None, None] * freq[None]) * v_e[None]
    X = np.broadcast_to(b_e, (M + 1,) + b_e.shape)
    total = b_e.copy()
    norms = [float(np.linalg.norm(B, 2))]
    for k in range(1, order + 1):
        X = cumulative_integral(Vu @ X - X @ Vu, s / M, rule)
        term = ((-1j) ** k) * X[-1]
        total = total + term
        norms.append(float(np.linalg.norm(term, 2)))
    return U @ total @ U.conj().T, tuple(norms)


def interaction_tail_bound(B_norm: float, V_norm: float, s: float, order: int, terms: int = 60) -> float:
    """``||B|| sum_{k > order} (2 ||V|| s)^k / k!``."""
    x = 2.0 * V_norm * abs(s)
    return B_norm * sum(x**k / factorial(k) for k in range(order + 1, order + 1 + terms))
