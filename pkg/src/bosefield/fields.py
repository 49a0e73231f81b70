"""Field operators, resolvents, gauge harmonics and the isometries ``W_f``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .fock import (BlockOperator, FockBasis, UnsafeSectorError, annihilator,
                   block_diagonal, creator, identity, operator_norm)

__all__ = [
    "GaugeBandDecomposition",
    "field_phi",
    "resolvent",
    "gauge_transform",
    "harmonic_component",
    "harmonic_decomposition",
    "harmonic_component_quadrature",
    "gauge_mean",
    "mode_number",
    "mode_number_function",
    "build_W",
    "projection_E",
    "symmetric_product",
    "tensor_factorize",
    "check_normalized",
    "w_star_difference_norm",
    "sigma_weight_lipschitz",
    "lipschitz_bound",
]


def check_normalized(basis: FockBasis, f, tol: float = 1e-12) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    nrm = basis.grid.norm(f)
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"single-particle vector must be normalized, got norm {nrm:.3e}")
    return f


# ---------------------------------------------------------------------------
# field and resolvent
# ---------------------------------------------------------------------------


def field_phi(basis: FockBasis, f) -> BlockOperator:
    """Truncated field ``phi(f) = a*(f) + a(f)``."""
    return creator(basis, f) + annihilator(basis, f)


def resolvent(basis: FockBasis, lam: float, f) -> BlockOperator:
    """Exact inverse of ``i lam + phi(f)`` on the truncated space.

    Parameters
    ----------
    lam : float
        Nonzero real spectral parameter.
    """
    lam = float(lam)
    if lam == 0.0:
        raise ValueError("resolvent parameter must be nonzero")
    phi = field_phi(basis, f).to_dense()
    mat = 1j * lam * np.eye(basis.total_dim) + phi
    try:
        inv = np.linalg.solve(mat, np.eye(basis.total_dim))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - phi is Hermitian
        raise RuntimeError("resolvent solve failed") from exc
    return BlockOperator.from_dense(basis, inv)


# ---------------------------------------------------------------------------
# gauge action and harmonics
# ---------------------------------------------------------------------------


def gauge_transform(F: BlockOperator, u: float) -> BlockOperator:
    """``e^{iuN} F e^{-iuN}``: block ``(n', n)`` gets the phase ``e^{iu(n'-n)}``."""
    return F.map_blocks(lambda a, b, m: np.exp(1j * u * (a - b)) * m)


def harmonic_component(F: BlockOperator, m: int) -> BlockOperator:
    """Band ``m`` part of ``F``, i.e. the blocks with ``n' - n = m``."""
    return BlockOperator(F.basis, {(a, b): blk for (a, b), blk in F.blocks.items() if a - b == m})


def gauge_mean(F: BlockOperator) -> BlockOperator:
    """Gauge-invariant part of ``F`` (harmonic ``m = 0``)."""
    return harmonic_component(F, 0)


@dataclass(frozen=True)
class GaugeBandDecomposition:
    """Harmonic components of an operator indexed by band."""

    source: BlockOperator
    components: Mapping[int, BlockOperator]

    def synthesize(self) -> BlockOperator:
        total = BlockOperator(self.source.basis)
        for m in sorted(self.components):
            total = total + self.components[m]
        return total


def harmonic_decomposition(F: BlockOperator) -> GaugeBandDecomposition:
    M = F.band_budget
    return GaugeBandDecomposition(F, {m: harmonic_component(F, m) for m in range(-M, M + 1)})


def harmonic_component_quadrature(F: BlockOperator, m: int, nodes: int | None = None) -> BlockOperator:
    """Harmonic ``m`` from the gauge Fourier integral by the trapezoid rule.

    Uses the dense number operator and ``nodes`` equispaced angles (default
    ``4M + 2`` with ``M`` the band budget). This is exact up to rounding when
    ``nodes > |m| + M``.
    """
    basis = F.basis
    M = F.band_budget
    nodes = 4 * M + 2 if nodes is None else int(nodes)
    ndiag = np.concatenate([np.full(basis.dim(n), float(n)) for n in basis.sectors()])
    dense = F.to_dense()
    acc = np.zeros_like(dense)
    for k in range(nodes):
        u = 2 * np.pi * k / nodes
        phase = np.exp(1j * u * ndiag)
        acc += np.exp(-1j * u * m) * (phase[:, None] * dense * phase.conj()[None, :])
    return BlockOperator.from_dense(basis, acc / nodes)


# ---------------------------------------------------------------------------
# mode number operator and W_f
# ---------------------------------------------------------------------------


def mode_number(basis: FockBasis, f, n: int) -> np.ndarray:
    """``N_f = a*(f) a(f)`` restricted to ``F_n``."""
    if n == 0:
        return np.zeros((1, 1), dtype=complex)
    c = basis.coords(f)
    low = np.einsum("i,iab->ab", c.conj(), basis.mode_annihilators(n))
    return low.conj().T @ low


def mode_number_function(basis: FockBasis, f, b: Callable[[np.ndarray], np.ndarray], n: int) -> np.ndarray:
    """``b(N_f)`` on ``F_n`` by Hermitian spectral calculus.

    ``N_f`` has integer spectrum when ``f`` is normalized; eigenvalues are
    rounded to the nearest integer before ``b`` is applied.
    """
    nf = mode_number(basis, f, n)
    evals, evecs = np.linalg.eigh(nf)
    ints = np.rint(evals)
    if np.max(np.abs(evals - ints), initial=0.0) > 1e-8:
        raise ValueError("mode number spectrum is not integer; is f normalized?")
    vals = np.asarray(b(ints), dtype=complex) * np.ones_like(ints)
    return (evecs * vals) @ evecs.conj().T


def build_W(basis: FockBasis, f) -> BlockOperator:
    """Isometry ``W_f = a*(f) (1 + N_f)^{-1/2}`` for normalized ``f``."""
    f = check_normalized(basis, f)
    adag = creator(basis, f)
    blocks = {}
    for n in range(basis.n_max):
        weight = mode_number_function(basis, f, lambda x: (1.0 + x) ** -0.5, n)
        blocks[(n + 1, n)] = adag.block(n + 1, n) @ weight
    return BlockOperator(basis, blocks)


def projection_E(basis: FockBasis, f) -> BlockOperator:
    """Projection ``E_f = W_f W_f*`` onto the range of ``a*(f)``."""
    W = build_W(basis, f)
    return W @ W.adjoint()


def symmetric_product(basis: FockBasis, f, phi: np.ndarray, n: int) -> np.ndarray:
    """``|f> (x)_s Phi`` for ``Phi`` in ``F_n``, equal to ``(n+1)^{-1/2} a*(f) Phi``."""
    if n + 1 > basis.n_max:
        raise UnsafeSectorError(f"cannot form a product into sector {n + 1} > {basis.n_max}")
    adag = creator(basis, f).block(n + 1, n)
    return adag @ np.asarray(phi, dtype=complex) / np.sqrt(n + 1)


def _power(op: BlockOperator, k: int) -> BlockOperator:
    out = identity(op.basis)
    for _ in range(k):
        out = op @ out
    return out


def tensor_factorize(F: BlockOperator, f) -> tuple[BlockOperator, int]:
    """Split a pure band-``m`` operator into a gauge-invariant part and powers of ``W_f``.

    Returns ``(A, m)`` with ``F = A W_f^m`` for ``m > 0``,
    ``F = (W_f*)^{|m|} A`` for ``m < 0`` and ``A = F`` for ``m = 0``.
    """
    bands = F.bands
    if len(bands) > 1:
        raise ValueError(f"operator mixes bands {sorted(bands)}")
    m = next(iter(bands)) if bands else 0
    if abs(m) > F.basis.n_max:
        raise UnsafeSectorError(f"band {m} exceeds cutoff {F.basis.n_max}")
    if m == 0:
        return F, 0
    W = build_W(F.basis, f)
    if m > 0:
        return F @ _power(W.adjoint(), m), m
    return _power(W, -m) @ F, m


def reconstruct(A: BlockOperator, m: int, f) -> BlockOperator:
    """Inverse of :func:`tensor_factorize`."""
    if m == 0:
        return A
    W = build_W(A.basis, f)
    if m > 0:
        return A @ _power(W, m)
    return _power(W.adjoint(), -m) @ A


__all__.append("reconstruct")


# ---------------------------------------------------------------------------
# Lipschitz dependence of W_f* on f
# ---------------------------------------------------------------------------


def w_star_difference_norm(basis: FockBasis, f1, f2, n: int) -> float:
    """``||(W_{f1}* - W_{f2}*) P_n||`` with ``P_n`` onto sectors ``<= n``."""
    diff = build_W(basis, f1).adjoint() - build_W(basis, f2).adjoint()
    return operator_norm(diff.restrict(max_in=n))


def sigma_weight_lipschitz(basis: FockBasis, f1, f2, n: int) -> float:
    """Ratio ``||(g(N_1) - g(N_2)) P_n|| / ||(N_1 - N_2) P_n||`` for ``g(x) = (1+x)^{-1/2}``.

    Returns 0 when the mode numbers coincide on the sectors ``<= n``.
    """
    g = lambda x: (1.0 + x) ** -0.5
    num = den = 0.0
    for k in range(n + 1):
        dg = mode_number_function(basis, f1, g, k) - mode_number_function(basis, f2, g, k)
        dn = mode_number(basis, f1, k) - mode_number(basis, f2, k)
        num = max(num, np.linalg.norm(dg, 2))
        den = max(den, np.linalg.norm(dn, 2))
    return 0.0 if den < 1e-300 else num / den


def lipschitz_bound(n: int, c_prime: float) -> float:
    """Constant ``2 sqrt(n) + 8 n c'`` multiplying ``||f1 - f2||``."""
    return 2.0 * np.sqrt(n) + 8.0 * n * c_prime
