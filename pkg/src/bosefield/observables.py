"""k-body lifts, the sector-lowering maps kappa_n and coherent sequences.

Two weight conventions are used for a k-body term ``C_k`` acting on ``F_n``:

``second_quantized``
    ``n!/(n-k)! * (C_k (x)_s 1^{n-k})``, i.e. ``sum a*..a* <..|C_k|..> a..a``.
``symmetrized``
    ``C_k (x)_s 1^{n-k}``, the compression of ``C_k (x) 1 (x) ... (x) 1`` to
    the symmetric subspace.

The two differ by ``binomial(n, k) * k!``. The lowering map acts on
symmetrized terms by the factor ``(n-k)/n`` and leaves second-quantized
terms unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import factorial
from typing import Callable, Sequence

import numpy as np

from .fields import mode_number, mode_number_function
from .fock import FockBasis

__all__ = [
    "SECOND_QUANTIZED",
    "SYMMETRIZED",
    "GeneratorTerm",
    "GeneratorSum",
    "CoherentSequence",
    "lift_one_body",
    "lift_two_body",
    "symmetrized_lift",
    "pair_kernel",
    "two_body_product",
    "symmetrized_power",
    "pair_multiplication",
    "kappa",
    "to_convention",
    "coherent_sequence_from",
    "function_of_Nf",
    "nf_polynomial",
    "SpectatorFrame",
]

SECOND_QUANTIZED = "second_quantized"
SYMMETRIZED = "symmetrized"
_CONVENTIONS = (SECOND_QUANTIZED, SYMMETRIZED)


def _falling(n: int, k: int) -> int:
    """``n!/(n-k)!``, zero when ``k > n``."""
    return factorial(n) // factorial(n - k) if k <= n else 0


def _one_body_matrix(basis: FockBasis, op) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    if op.shape == (basis.num_modes, basis.num_modes):
        return op
    return basis.pad_one_body(op)


# ---------------------------------------------------------------------------
# lifts
# ---------------------------------------------------------------------------


def lift_one_body(basis: FockBasis, op, n: int) -> np.ndarray:
    """Second quantization ``sum_ij a*_i O_ij a_j`` on ``F_n``."""
    op = _one_body_matrix(basis, op)
    if n == 0:
        return np.zeros((1, 1), dtype=complex)
    a = basis.mode_annihilators(n)
    y = np.einsum("ij,jab->iab", op, a)
    return np.einsum("iac,iab->cb", a.conj(), y)


def pair_kernel(basis: FockBasis, op2) -> np.ndarray:
    """Kernel on ``C^m (x) C^m`` of an operator on ``F_2``."""
    op2 = np.asarray(op2, dtype=complex)
    if op2.shape != (basis.dim(2), basis.dim(2)):
        raise ValueError(f"two-body operator of shape {op2.shape}, expected {(basis.dim(2),) * 2}")
    J = basis.symmetric_embedding(2)
    return J @ op2 @ J.T


def lift_two_body(basis: FockBasis, op2, n: int) -> np.ndarray:
    """Second quantization ``sum a*_i a*_j K_{ij,kl} a_k a_l`` on ``F_n``."""
    if n < 2:
        return np.zeros((basis.dim(n), basis.dim(n)), dtype=complex)
    if basis.n_max < 2:
        raise ValueError("two-body lifts need n_max >= 2")
    kern = pair_kernel(basis, op2)
    m = basis.num_modes
    t = basis.pair_annihilators(n).reshape(m * m, basis.dim(n - 2), basis.dim(n))
    y = np.einsum("pq,qab->pab", kern, t)
    return np.einsum("pac,pab->cb", t.conj(), y)


def _tensor_embed(basis: FockBasis, C, k: int) -> np.ndarray:
    """Operator on ``(C^m)^{(x)k}`` whose symmetric compression is ``C``."""
    C = np.asarray(C, dtype=complex)
    if k == 1:
        return _one_body_matrix(basis, C)
    J = basis.symmetric_embedding(k)
    return J @ C @ J.T


def symmetrized_lift(basis: FockBasis, C, k: int, n: int) -> np.ndarray:
    """``C_k (x)_s 1^{n-k}`` on ``F_n`` through the tensor-product embedding."""
    D = basis.dim(n)
    if k > n:
        return np.zeros((D, D), dtype=complex)
    if k == 0:
        return complex(np.asarray(C).reshape(-1)[0]) * np.eye(D, dtype=complex)
    m = basis.num_modes
    ck = _tensor_embed(basis, C, k)
    J = basis.symmetric_embedding(n).reshape(m**k, m ** (n - k), D)
    x = np.einsum("pq,qrb->prb", ck, J)
    return np.einsum("pra,prb->ab", J, x)


def two_body_product(basis: FockBasis, A, B) -> np.ndarray:
    """``A (x)_s B`` on ``F_2`` for one-body ``A`` and ``B``."""
    A = _one_body_matrix(basis, A)
    B = _one_body_matrix(basis, B)
    J = basis.symmetric_embedding(2)
    return J.T @ np.kron(A, B) @ J


def symmetrized_power(basis: FockBasis, A, n: int) -> np.ndarray:
    """``A (x)_s ... (x)_s A`` (``n`` factors) on ``F_n``."""
    A = _one_body_matrix(basis, A)
    if n == 0:
        return np.eye(1, dtype=complex)
    m = basis.num_modes
    J = basis.symmetric_embedding(n)
    t = J.reshape((m,) * n + (basis.dim(n),)).astype(complex)
    for axis in range(n):
        t = np.moveaxis(np.tensordot(A, t, axes=([1], [axis])), 0, axis)
    return J.T @ t.reshape(m**n, -1)


def pair_multiplication(basis: FockBasis, vfun: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Multiplication by ``V(x_i - x_j)`` on ``F_2``; zero on pairs with a spectator mode."""
    d = basis.grid.d
    x = basis.grid.x
    m = basis.num_modes
    vals = np.zeros((m, m))
    vals[:d, :d] = vfun(x[:, None] - x[None, :])
    J = basis.symmetric_embedding(2)
    return (J.T * vals.reshape(-1)) @ J


# ---------------------------------------------------------------------------
# generator sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorTerm:
    """One k-body term ``weight * C_k`` in a stated convention."""

    body: int
    matrix: np.ndarray
    weight: complex = 1.0
    convention: str = SECOND_QUANTIZED

    def __post_init__(self):
        if self.body not in (0, 1, 2):
            raise ValueError(f"only 0-, 1- and 2-body terms are supported, got {self.body}")
        if self.convention not in _CONVENTIONS:
            raise ValueError(f"unknown weight convention {self.convention!r}")


@dataclass(frozen=True)
class GeneratorSum:
    """Symbolic sum of k-body lifts, realizable on every sector."""

    basis: FockBasis
    terms: tuple[GeneratorTerm, ...] = ()

    @classmethod
    def single(cls, basis: FockBasis, body: int, matrix, weight: complex = 1.0,
               convention: str = SECOND_QUANTIZED) -> "GeneratorSum":
        return cls(basis, (GeneratorTerm(body, np.asarray(matrix, dtype=complex), weight, convention),))

    @classmethod
    def constant(cls, basis: FockBasis, c: complex = 1.0) -> "GeneratorSum":
        return cls.single(basis, 0, np.array([[1.0]]), c)

    def realize(self, n: int) -> np.ndarray:
        """Matrix of the sum on ``F_n``."""
        out = np.zeros((self.basis.dim(n), self.basis.dim(n)), dtype=complex)
        for term in self.terms:
            if term.weight == 0:
                continue
            out += term.weight * _realize_term(self.basis, term, n)
        return out

    def __add__(self, other: "GeneratorSum") -> "GeneratorSum":
        if not self.basis.same_as(other.basis):
            raise ValueError("generator sums live on different bases")
        return GeneratorSum(self.basis, self.terms + other.terms)

    def scale(self, c: complex) -> "GeneratorSum":
        return GeneratorSum(self.basis, tuple(replace(t, weight=c * t.weight) for t in self.terms))

    def on_basis(self, other: FockBasis) -> "GeneratorSum":
        """Same payloads re-expressed on a basis with extra spectator modes."""
        if other.grid != self.basis.grid or other.n_max < self.basis.n_max:
            raise ValueError("target basis must share the grid")
        terms = []
        for t in self.terms:
            if t.body == 2:
                mat = _embed_sector(self.basis, other, t.matrix, 2)
            elif t.body == 1:
                mat = _one_body_matrix(other, t.matrix[: self.basis.grid.d, : self.basis.grid.d])
            else:
                mat = t.matrix
            terms.append(replace(t, matrix=mat))
        return GeneratorSum(other, tuple(terms))


def _realize_term(basis: FockBasis, term: GeneratorTerm, n: int) -> np.ndarray:
    k = term.body
    if term.convention == SYMMETRIZED:
        return symmetrized_lift(basis, term.matrix, k, n)
    if k == 0:
        return complex(term.matrix.reshape(-1)[0]) * np.eye(basis.dim(n), dtype=complex)
    if k == 1:
        return lift_one_body(basis, term.matrix, n)
    return lift_two_body(basis, term.matrix, n)


def to_convention(gs: GeneratorSum, convention: str, n: int) -> GeneratorSum:
    """Re-weight every term so that its realization on ``F_n`` is unchanged."""
    if convention not in _CONVENTIONS:
        raise ValueError(f"unknown weight convention {convention!r}")
    terms = []
    for t in gs.terms:
        if t.convention == convention:
            terms.append(t)
            continue
        falling = _falling(n, t.body)
        if convention == SYMMETRIZED:
            weight = t.weight * falling
        else:
            weight = t.weight / falling if falling else 0.0
        terms.append(replace(t, weight=weight, convention=convention))
    return GeneratorSum(gs.basis, tuple(terms))


def kappa(gs: GeneratorSum, n: int) -> GeneratorSum:
    """Lowering map ``K_n -> K_{n-1}`` on a generator sum realized at ``n``.

    Symmetrized terms gain ``(n-k)/n`` (zero once ``k >= n``);
    second-quantized terms keep their weights. ``kappa_0 = 0``.
    """
    if n < 0:
        raise ValueError("sector index must be >= 0")
    if n == 0:
        return GeneratorSum(gs.basis, ())
    terms = []
    for t in gs.terms:
        if t.convention == SYMMETRIZED:
            factor = (n - t.body) / n if t.body < n else 0.0
            terms.append(replace(t, weight=t.weight * factor))
        else:
            terms.append(t if t.body < n else replace(t, weight=0.0))
    return GeneratorSum(gs.basis, tuple(terms))


# ---------------------------------------------------------------------------
# coherent sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoherentSequence:
    """Sector matrices ``K_0, ..., K_{n_max}`` related by the lowering maps.

    ``generator`` records the generator sum the sequence came from, when
    there is one; it is used to re-check the lowering relation.
    """

    basis: FockBasis
    matrices: tuple[np.ndarray, ...]
    generator: GeneratorSum | None = None
    label: str = ""
    bound: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "bound", max(float(np.linalg.norm(m, 2)) for m in self.matrices))

    def __getitem__(self, n: int) -> np.ndarray:
        return self.matrices[n]

    def __len__(self):
        return len(self.matrices)

    def kappa_residuals(self) -> list[float]:
        """``||kappa_n(K_n) - K_{n-1}||`` for ``n = 1..n_max``.

        The lowering is evaluated on the generator in the symmetrized
        convention and realized through the tensor-product embedding, so it
        is independent of the ladder-operator assembly of the matrices.
        """
        if self.generator is None:
            raise ValueError("sequence has no generator sum to lower")
        out = []
        for n in range(1, len(self.matrices)):
            lowered = kappa(to_convention(self.generator, SYMMETRIZED, n), n)
            out.append(float(np.linalg.norm(lowered.realize(n - 1) - self.matrices[n - 1], 2)))
        return out


def coherent_sequence_from(gs: GeneratorSum, label: str = "") -> CoherentSequence:
    """Realize a generator sum on every sector."""
    mats = tuple(gs.realize(n) for n in gs.basis.sectors())
    return CoherentSequence(gs.basis, mats, generator=gs, label=label)


def function_of_Nf(basis: FockBasis, f, b: Callable[[np.ndarray], np.ndarray]) -> CoherentSequence:
    """Sequence ``b(N_{f,n})``; its lowering is the shift ``b(N_{f,n-1})``."""
    mats = tuple(mode_number_function(basis, f, b, n) for n in basis.sectors())
    return CoherentSequence(basis, mats, label="function of N_f")


def nf_polynomial(basis: FockBasis, f, coeffs: Sequence[complex]) -> GeneratorSum:
    """Generator sum of ``c0 + c1 N_f + c2 N_f^2``.

    Uses ``N_f^2 = a*a* a a + N_f`` with the two-body payload ``E (x)_s E``.
    """
    coeffs = list(coeffs) + [0.0] * (3 - len(coeffs))
    if len(coeffs) > 3:
        raise ValueError("only polynomials of degree <= 2 are generator sums of order 2")
    c0, c1, c2 = coeffs
    c = basis.coords(f)
    E1 = np.outer(c, c.conj())
    terms = [GeneratorTerm(0, np.array([[1.0]], dtype=complex), c0),
             GeneratorTerm(1, E1, c1 + c2)]
    if c2 != 0:
        if basis.n_max < 2:
            terms.append(GeneratorTerm(2, np.zeros((basis.dim(2) or 1,) * 2, dtype=complex), 0.0))
        else:
            terms.append(GeneratorTerm(2, two_body_product(basis, E1, E1), c2))
    return GeneratorSum(basis, tuple(terms))


# ---------------------------------------------------------------------------
# spectator evaluation of the lowering map
# ---------------------------------------------------------------------------


def _embed_sector(src: FockBasis, dst: FockBasis, mat, k: int) -> np.ndarray:
    """Place a sector-``k`` matrix of ``src`` on the spectator-free states of ``dst``."""
    mat = np.asarray(mat, dtype=complex)
    pad = dst.num_modes - src.num_modes
    idx = [dst.index(tuple(row) + (0,) * pad) for row in src.occupations(k)]
    out = np.zeros((dst.dim(k), dst.dim(k)), dtype=complex)
    out[np.ix_(idx, idx)] = mat
    return out


class SpectatorFrame:
    """Extension of a basis by one decoupled spectator mode.

    Single-particle operators, pair potentials and the test function ``f``
    vanish on the spectator mode, so every operator built from them preserves
    the number of spectator particles. Restricting a sector-``n`` operator to
    states with exactly one spectator, identified with ``F_{n-1}`` through
    ``Phi -> a*(spectator) Phi``, evaluates the lowering map on composite
    expressions such as products, ``W_f``-conjugates and exponentials.
    """

    def __init__(self, basis: FockBasis):
        if basis.spectator_modes:
            raise ValueError("base basis already carries spectator modes")
        self.base = basis
        self.ext = FockBasis(basis.grid, basis.n_max, spectator_modes=1)
        self._index = {}

    def _lower_index(self, n: int) -> np.ndarray:
        if n not in self._index:
            self._index[n] = np.array([self.ext.index(tuple(row) + (1,))
                                       for row in self.base.occupations(n - 1)])
        return self._index[n]

    def lower(self, mat_ext: np.ndarray, n: int) -> np.ndarray:
        """Evaluate the lowering of an extended sector-``n`` matrix on ``F_{n-1}``."""
        if not 1 <= n <= self.base.n_max:
            raise ValueError(f"sector {n} outside 1..{self.base.n_max}")
        idx = self._lower_index(n)
        return np.asarray(mat_ext)[np.ix_(idx, idx)]

    def leakage(self, mat_ext: np.ndarray, n: int) -> float:
        """Norm of the part of ``mat_ext`` that changes the spectator number."""
        idx = self._lower_index(n)
        rest = np.setdiff1d(np.arange(self.ext.dim(n)), idx)
        return float(max(np.linalg.norm(mat_ext[np.ix_(rest, idx)], 2) if rest.size else 0.0,
                         np.linalg.norm(mat_ext[np.ix_(idx, rest)], 2) if rest.size else 0.0))

    def embed(self, mat, k: int) -> np.ndarray:
        return _embed_sector(self.base, self.ext, mat, k)
