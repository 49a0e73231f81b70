"""Grid single-particle space, truncated bosonic Fock space and block operators.

The single-particle space is a uniform one-dimensional grid with ``d`` points
and spacing ``h``. Functions on the grid are stored by their values ``f_j``;
the inner product carries the ``h`` weight. Internally the Fock space is built
on the orthonormal grid modes ``e_j = delta_j / sqrt(h)``, so the coordinates
of ``f`` in that basis are ``sqrt(h) * f``.

Operators on the truncated Fock space are stored as blocks between particle
number sectors. A block ``(n_out, n_in)`` maps ``F_{n_in}`` into ``F_{n_out}``;
its gauge band is ``n_out - n_in``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from types import MappingProxyType
from typing import Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "CapacityError",
    "UnsafeSectorError",
    "BasisMismatchError",
    "GridSpace",
    "FockBasis",
    "SectorMatrix",
    "BlockOperator",
    "build_basis",
    "creator",
    "annihilator",
    "number_operator",
    "identity",
    "block_diagonal",
    "operator_norm",
    "lct_seminorm",
    "DEFAULT_CAPACITY",
]

DEFAULT_CAPACITY = 20000


class CapacityError(ValueError):
    """A Fock sector is larger than the configured capacity."""


class UnsafeSectorError(ValueError):
    """A sector index would see truncation effects."""


class BasisMismatchError(ValueError):
    """Operands live on different Fock bases."""


# ---------------------------------------------------------------------------
# single-particle grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpace:
    """Uniform Dirichlet grid centred at the origin.

    Parameters
    ----------
    d : int
        Number of grid points.
    h : float
        Grid spacing.
    """

    d: int
    h: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"grid needs d >= 1 points, got {self.d}")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"grid spacing must be positive, got {self.h}")

    @property
    def x(self) -> np.ndarray:
        """Grid positions ``x_j = (j - (d-1)/2) h``."""
        return (np.arange(self.d) - (self.d - 1) / 2.0) * self.h

    def inner(self, f, g) -> complex:
        """Weighted inner product ``h * sum(conj(f) g)``."""
        f = self._check(f)
        g = self._check(g)
        return complex(self.h * np.vdot(f, g))

    def norm(self, f) -> float:
        return float(np.sqrt(self.inner(f, f).real))

    def normalize(self, f) -> np.ndarray:
        f = self._check(f)
        nrm = self.norm(f)
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        return f / nrm

    def coords(self, f) -> np.ndarray:
        """Coordinates of ``f`` in the orthonormal grid modes."""
        return np.sqrt(self.h) * self._check(f)

    def from_coords(self, c) -> np.ndarray:
        return np.asarray(c, dtype=complex) / np.sqrt(self.h)

    def mode(self, j: int) -> np.ndarray:
        """Normalized grid mode supported on the single point ``j``."""
        if not 0 <= j < self.d:
            raise IndexError(f"mode index {j} outside grid of {self.d} points")
        f = np.zeros(self.d, dtype=complex)
        f[j] = 1.0 / np.sqrt(self.h)
        return f

    def bump(self, start: int, end: int) -> np.ndarray:
        """Normalized smooth bump supported on the indices ``start..end``."""
        if not 0 <= start <= end < self.d:
            raise IndexError(f"window [{start}, {end}] outside grid of {self.d} points")
        width = end - start + 2
        j = np.arange(self.d)
        f = np.where((j >= start) & (j <= end), np.sin(np.pi * (j - start + 1) / width) ** 2, 0.0)
        return self.normalize(f.astype(complex))

    def position(self) -> np.ndarray:
        """Matrix of the position operator Q."""
        return np.diag(self.x).astype(complex)

    def momentum_squared(self) -> np.ndarray:
        """Three-point Dirichlet stencil for P^2 = -d^2/dx^2."""
        d, h = self.d, self.h
        p2 = np.diag(np.full(d, 2.0 / h**2))
        if d > 1:
            off = np.full(d - 1, -1.0 / h**2)
            p2 += np.diag(off, 1) + np.diag(off, -1)
        return p2.astype(complex)

    def trapped_kinetic(self, kappa: float) -> np.ndarray:
        """P^2 + kappa^2 Q^2."""
        return self.momentum_squared() + kappa**2 * self.position() @ self.position()

    def _check(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=complex)
        if f.shape != (self.d,):
            raise ValueError(f"vector of shape {f.shape} does not live on a grid of {self.d} points")
        return f


# ---------------------------------------------------------------------------
# Fock basis
# ---------------------------------------------------------------------------


def _occupations(num_modes: int, n: int) -> np.ndarray:
    """Occupation vectors with total ``n`` in descending lexicographic order.

    The one-particle sector then lists the modes in their natural order.
    """
    if num_modes == 0:
        return np.zeros((1 if n == 0 else 0, 0), dtype=np.int64)
    rows = []
    for combo in itertools.combinations_with_replacement(range(num_modes), n):
        occ = [0] * num_modes
        for i in combo:
            occ[i] += 1
        rows.append(tuple(occ))
    rows.sort(reverse=True)
    return np.array(rows, dtype=np.int64).reshape(len(rows), num_modes)


class FockBasis:
    """Occupation-number basis of every sector ``F_0 .. F_{n_max}``.

    Parameters
    ----------
    grid : GridSpace
        Single-particle grid.
    n_max : int
        Particle number cutoff.
    spectator_modes : int, optional
        Additional modes appended after the grid modes. They carry no
        geometry; single-particle operators act on them as zero. They are
        used to evaluate the sector-lowering maps on composite expressions.
    capacity : int, optional
        Largest admissible sector dimension.
    """

    def __init__(self, grid: GridSpace, n_max: int, spectator_modes: int = 0,
                 capacity: int = DEFAULT_CAPACITY):
        if n_max < 0:
            raise ValueError(f"n_max must be >= 0, got {n_max}")
        self.grid = grid
        self.n_max = int(n_max)
        self.spectator_modes = int(spectator_modes)
        self.num_modes = grid.d + self.spectator_modes
        dims = [comb(n + self.num_modes - 1, n) for n in range(self.n_max + 1)]
        if max(dims) > capacity:
            raise CapacityError(f"sector dimension {max(dims)} exceeds capacity {capacity}")
        self._occ = tuple(_occupations(self.num_modes, n) for n in range(self.n_max + 1))
        for arr in self._occ:
            arr.setflags(write=False)
        self._index = tuple({tuple(int(v) for v in row): i for i, row in enumerate(arr)}
                            for arr in self._occ)
        self._cache = {}

    # -- enumeration ------------------------------------------------------
    @property
    def dims(self) -> list[int]:
        return [len(a) for a in self._occ]

    def dim(self, n: int) -> int:
        return len(self._occ[n]) if 0 <= n <= self.n_max else 0

    def occupations(self, n: int) -> np.ndarray:
        return self._occ[n]

    def index(self, occupation) -> int:
        occupation = tuple(int(v) for v in occupation)
        return self._index[sum(occupation)][occupation]

    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)])

    @property
    def total_dim(self) -> int:
        return int(sum(self.dims))

    def sectors(self) -> range:
        return range(self.n_max + 1)

    def same_as(self, other: "FockBasis") -> bool:
        return (self is other) or (self.grid == other.grid and self.n_max == other.n_max
                                   and self.spectator_modes == other.spectator_modes)

    # -- single-particle vectors and operators -------------------------------
    def coords(self, f) -> np.ndarray:
        """Mode coordinates of a grid function, padded with zero spectator entries."""
        c = self.grid.coords(f)
        if self.spectator_modes:
            c = np.concatenate([c, np.zeros(self.spectator_modes, dtype=complex)])
        return c

    def pad_one_body(self, op) -> np.ndarray:
        """Extend a grid operator by zero on the spectator modes."""
        op = np.asarray(op, dtype=complex)
        d = self.grid.d
        if op.shape != (d, d):
            raise ValueError(f"one-body operator of shape {op.shape} on a grid of {d} points")
        if not self.spectator_modes:
            return op
        out = np.zeros((self.num_modes, self.num_modes), dtype=complex)
        out[:d, :d] = op
        return out

    # -- ladder matrices --------------------------------------------------
    def mode_annihilators(self, n: int) -> np.ndarray:
        """Stack ``a_i`` restricted to ``F_n -> F_{n-1}``, shape ``(modes, dim_{n-1}, dim_n)``."""
        key = ("ann", n)
        if key not in self._cache:
            if not 1 <= n <= self.n_max:
                raise ValueError(f"annihilator sector {n} outside 1..{self.n_max}")
            occ = self._occ[n]
            out = np.zeros((self.num_modes, self.dim(n - 1), self.dim(n)))
            target = self._index[n - 1]
            for col, row in enumerate(occ):
                for i in np.nonzero(row)[0]:
                    lowered = list(int(v) for v in row)
                    lowered[i] -= 1
                    out[i, target[tuple(lowered)], col] = np.sqrt(row[i])
            out.setflags(write=False)
            self._cache[key] = out
        return self._cache[key]

    def pair_annihilators(self, n: int) -> np.ndarray:
        """Stack ``a_k a_l`` on ``F_n -> F_{n-2}``, shape ``(modes, modes, dim_{n-2}, dim_n)``."""
        key = ("pair", n)
        if key not in self._cache:
            if not 2 <= n <= self.n_max:
                raise ValueError(f"pair annihilator sector {n} outside 2..{self.n_max}")
            a_n = self.mode_annihilators(n)
            a_m = self.mode_annihilators(n - 1)
            out = np.einsum("kab,lbc->klac", a_m, a_n)
            out.setflags(write=False)
            self._cache[key] = out
        return self._cache[key]

    def symmetric_embedding(self, n: int) -> np.ndarray:
        """Isometry ``F_n -> (C^modes)^{(x)n}``, shape ``(modes**n, dim_n)``.

        Column ``nu`` is the normalized symmetric sum over all orderings of the
        occupation pattern ``nu``.
        """
        key = ("emb", n)
        if key not in self._cache:
            m = self.num_modes
            out = np.zeros((m**n, self.dim(n)))
            if n == 0:
                out[0, 0] = 1.0
            else:
                index = self._index[n]
                from math import factorial
                for flat, tup in enumerate(itertools.product(range(m), repeat=n)):
                    occ = [0] * m
                    for i in tup:
                        occ[i] += 1
                    weight = np.prod([factorial(v) for v in occ]) / factorial(n)
                    out[flat, index[tuple(occ)]] = np.sqrt(weight)
            out.setflags(write=False)
            self._cache[key] = out
        return self._cache[key]

    def __repr__(self):
        extra = f", spectator_modes={self.spectator_modes}" if self.spectator_modes else ""
        return f"FockBasis(d={self.grid.d}, h={self.grid.h}, n_max={self.n_max}{extra})"


def build_basis(grid: GridSpace, n_max: int, capacity: int = DEFAULT_CAPACITY) -> FockBasis:
    """Enumerate the occupation basis of all sectors up to ``n_max``."""
    return FockBasis(grid, n_max, capacity=capacity)


# ---------------------------------------------------------------------------
# block operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SectorMatrix:
    """Dense matrix ``F_{n_in} -> F_{n_out}``."""

    n_out: int
    n_in: int
    data: np.ndarray

    def adjoint(self) -> "SectorMatrix":
        return SectorMatrix(self.n_in, self.n_out, self.data.conj().T)

    def __matmul__(self, other: "SectorMatrix") -> "SectorMatrix":
        if self.n_in != other.n_out:
            raise ValueError(f"sector mismatch: F_{other.n_out} does not feed F_{self.n_in}")
        return SectorMatrix(self.n_out, other.n_in, self.data @ other.data)


class BlockOperator:
    """Immutable operator on the truncated Fock space stored as sector blocks.

    Parameters
    ----------
    basis : FockBasis
    blocks : mapping
        ``(n_out, n_in) -> ndarray`` of shape ``(dim n_out, dim n_in)``.
        Blocks into sectors above ``n_max`` are dropped.
    """

    __slots__ = ("basis", "_blocks")

    def __init__(self, basis: FockBasis, blocks: Mapping[tuple[int, int], np.ndarray] | None = None):
        self.basis = basis
        store = {}
        for (n_out, n_in), mat in (blocks or {}).items():
            if not (0 <= n_in <= basis.n_max and 0 <= n_out <= basis.n_max):
                continue
            mat = np.array(mat, dtype=complex)
            if mat.shape != (basis.dim(n_out), basis.dim(n_in)):
                raise ValueError(f"block ({n_out},{n_in}) has shape {mat.shape}, "
                                 f"expected {(basis.dim(n_out), basis.dim(n_in))}")
            mat.setflags(write=False)
            store[(int(n_out), int(n_in))] = mat
        self._blocks = MappingProxyType(store)

    # -- structure ----------------------------------------------------------
    @property
    def blocks(self) -> Mapping[tuple[int, int], np.ndarray]:
        return self._blocks

    @property
    def band_budget(self) -> int:
        """Largest ``|n_out - n_in|`` among the stored blocks."""
        return max((abs(a - b) for a, b in self._blocks), default=0)

    @property
    def bands(self) -> set[int]:
        return {a - b for a, b in self._blocks}

    def block(self, n_out: int, n_in: int) -> np.ndarray:
        """Block ``(n_out, n_in)``; zero if absent."""
        if (n_out, n_in) in self._blocks:
            return self._blocks[(n_out, n_in)]
        return np.zeros((self.basis.dim(n_out), self.basis.dim(n_in)), dtype=complex)

    def sector(self, n_out: int, n_in: int) -> SectorMatrix:
        return SectorMatrix(n_out, n_in, self.block(n_out, n_in))

    def diag(self, n: int) -> np.ndarray:
        return self.block(n, n)

    def is_block_diagonal(self) -> bool:
        return all(a == b for a, b in self._blocks)

    # -- algebra ------------------------------------------------------------
    def _check_basis(self, other: "BlockOperator"):
        if not self.basis.same_as(other.basis):
            raise BasisMismatchError("operators live on different Fock bases")

    def adjoint(self) -> "BlockOperator":
        return BlockOperator(self.basis, {(b, a): m.conj().T for (a, b), m in self._blocks.items()})

    def __add__(self, other: "BlockOperator") -> "BlockOperator":
        self._check_basis(other)
        out = dict(self._blocks)
        for key, mat in other._blocks.items():
            out[key] = out[key] + mat if key in out else mat
        return BlockOperator(self.basis, out)

    def __neg__(self) -> "BlockOperator":
        return self.scale(-1.0)

    def __sub__(self, other: "BlockOperator") -> "BlockOperator":
        return self + (-other)

    def scale(self, c: complex) -> "BlockOperator":
        return BlockOperator(self.basis, {k: c * m for k, m in self._blocks.items()})

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def __matmul__(self, other: "BlockOperator") -> "BlockOperator":
        self._check_basis(other)
        by_out = {}
        for (mid, n_in), mat in other._blocks.items():
            by_out.setdefault(mid, []).append((n_in, mat))
        out = {}
        for (n_out, mid), left in self._blocks.items():
            for n_in, right in by_out.get(mid, ()):
                key = (n_out, n_in)
                prod = left @ right
                out[key] = out[key] + prod if key in out else prod
        return BlockOperator(self.basis, out)

    def map_blocks(self, fn: Callable[[int, int, np.ndarray], np.ndarray]) -> "BlockOperator":
        return BlockOperator(self.basis, {(a, b): fn(a, b, m) for (a, b), m in self._blocks.items()})

    def restrict(self, max_in: int | None = None, max_out: int | None = None) -> "BlockOperator":
        """Keep blocks with ``n_in <= max_in`` and ``n_out <= max_out``."""
        hi_in = self.basis.n_max if max_in is None else max_in
        hi_out = self.basis.n_max if max_out is None else max_out
        return BlockOperator(self.basis, {(a, b): m for (a, b), m in self._blocks.items()
                                          if a <= hi_out and b <= hi_in})

    def to_dense(self) -> np.ndarray:
        """Assemble the full matrix on ``F_0 + ... + F_{n_max}``."""
        off = self.basis.offsets()
        out = np.zeros((self.basis.total_dim, self.basis.total_dim), dtype=complex)
        for (a, b), m in self._blocks.items():
            out[off[a]:off[a + 1], off[b]:off[b + 1]] = m
        return out

    @classmethod
    def from_dense(cls, basis: FockBasis, mat: np.ndarray, tol: float = 0.0) -> "BlockOperator":
        off = basis.offsets()
        blocks = {}
        for a in basis.sectors():
            for b in basis.sectors():
                blk = mat[off[a]:off[a + 1], off[b]:off[b + 1]]
                if np.any(np.abs(blk) > tol):
                    blocks[(a, b)] = blk
        return cls(basis, blocks)

    def allclose(self, other: "BlockOperator", atol: float = 1e-12) -> bool:
        return operator_norm(self - other) <= atol

    def __repr__(self):
        return f"BlockOperator({len(self._blocks)} blocks, bands={sorted(self.bands)}, {self.basis!r})"


def block_diagonal(basis: FockBasis, per_sector: Mapping[int, np.ndarray] | Iterable[np.ndarray]) -> BlockOperator:
    """Block-diagonal operator from sector matrices indexed by ``n``."""
    if not isinstance(per_sector, Mapping):
        per_sector = dict(enumerate(per_sector))
    return BlockOperator(basis, {(n, n): m for n, m in per_sector.items()})


def identity(basis: FockBasis) -> BlockOperator:
    return block_diagonal(basis, {n: np.eye(basis.dim(n)) for n in basis.sectors()})


def number_operator(basis: FockBasis) -> BlockOperator:
    """Total particle number N, equal to ``n`` times the identity on ``F_n``."""
    return block_diagonal(basis, {n: n * np.eye(basis.dim(n)) for n in basis.sectors()})


def creator(basis: FockBasis, f) -> BlockOperator:
    """Creation operator ``a*(f)``, complex linear in ``f``.

    Blocks into ``F_{n_max + 1}`` are dropped.
    """
    c = basis.coords(f)
    blocks = {}
    for n in range(basis.n_max):
        ann = basis.mode_annihilators(n + 1)
        blocks[(n + 1, n)] = np.einsum("i,iba->ab", c, ann)
    return BlockOperator(basis, blocks)


def annihilator(basis: FockBasis, f) -> BlockOperator:
    """Annihilation operator ``a(f)``, the adjoint of ``a*(f)``."""
    return creator(basis, f).adjoint()


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def _spectral_norm(mat: np.ndarray) -> float:
    if mat.size == 0:
        return 0.0
    return float(np.linalg.norm(mat, 2))


def operator_norm(F: BlockOperator) -> float:
    """Largest singular value of the assembled operator."""
    if not F.blocks:
        return 0.0
    if F.is_block_diagonal():
        return max(_spectral_norm(m) for m in F.blocks.values())
    return _spectral_norm(F.to_dense())


def _norm_on_low_sectors(F: BlockOperator, n: int) -> float:
    """``||F P_n||`` with ``P_n`` the projection onto sectors ``<= n``."""
    return operator_norm(F.restrict(max_in=n))


def lct_seminorm(F: BlockOperator, n: int) -> float:
    """Seminorm ``||F P_n|| + ||F* P_n||``; zero for ``n < 0``.

    Raises
    ------
    UnsafeSectorError
        If ``n + band_budget(F) > n_max``.
    """
    if n < 0:
        return 0.0
    if n > F.basis.n_max - F.band_budget:
        raise UnsafeSectorError(f"seminorm index {n} with band budget {F.band_budget} "
                                f"exceeds cutoff {F.basis.n_max}")
    return _norm_on_low_sectors(F, n) + _norm_on_low_sectors(F.adjoint(), n)
