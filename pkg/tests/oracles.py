"""Independent reference constructions used by the tests.

Everything here works in first quantization on the full tensor power
``(C^d)^{(x) n}`` or on occupation-number dictionaries, and shares no code
with the package beyond the occupation labels used to order basis states.
"""

from __future__ import annotations

import itertools
from math import factorial, prod

import numpy as np


def count_occupations(d: int, n: int) -> int:
    """Number of occupation vectors with sum ``n`` by brute-force enumeration."""
    return sum(1 for occ in itertools.product(range(n + 1), repeat=d) if sum(occ) == n)


def sym_embedding(occupations, d: int, n: int) -> np.ndarray:
    """Columns: normalized symmetric tensors for each occupation vector."""
    cols = []
    for occ in occupations:
        v = np.zeros(d**n, dtype=complex)
        tuples = [t for t in itertools.product(range(d), repeat=n)
                  if all(t.count(i) == occ[i] for i in range(d))]
        for t in tuples:
            v[np.ravel_multi_index(t, (d,) * n) if n else 0] += 1.0
        cols.append(v / np.sqrt(len(tuples)))
    return np.array(cols).T if cols else np.zeros((d**n, 0))


def one_body_sum(O, n: int) -> np.ndarray:
    """``sum_i O_i`` on the n-fold tensor power."""
    d = O.shape[0]
    out = np.zeros((d**n, d**n), dtype=complex)
    for i in range(n):
        out += np.kron(np.kron(np.eye(d**i), O), np.eye(d ** (n - i - 1)))
    return out


def pair_sum(vfun, modes_x, n: int) -> np.ndarray:
    """``sum_{i != j} V(x_i - x_j)`` (ordered pairs) as a diagonal on the tensor power."""
    d = len(modes_x)
    diag = np.zeros(d**n)
    for idx, t in enumerate(itertools.product(range(d), repeat=n)):
        diag[idx] = sum(vfun(modes_x[t[i]] - modes_x[t[j]]) for i in range(n) for j in range(n) if i != j)
    return np.diag(diag).astype(complex)


def tensor_power(A, n: int) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for _ in range(n):
        out = np.kron(out, A)
    return out


def symmetric_product_first_quantized(f_coords, phi_tensor, n: int) -> np.ndarray:
    """``S_{n+1}(f (x) phi)`` for ``phi`` a symmetric tensor of rank ``n``."""
    d = len(f_coords)
    t = np.kron(f_coords, phi_tensor).reshape((d,) * (n + 1))
    acc = np.zeros_like(t)
    perms = list(itertools.permutations(range(n + 1)))
    for p in perms:
        acc += np.transpose(t, p)
    return (acc / len(perms)).reshape(-1) * np.sqrt(n + 1)


def creator_occupation_rule(occ_in, occ_out, coords) -> np.ndarray:
    """Matrix of ``a*(f)`` from ``a*_i |nu> = sqrt(nu_i + 1) |nu + e_i>``."""
    index = {tuple(o): k for k, o in enumerate(occ_out)}
    mat = np.zeros((len(occ_out), len(occ_in)), dtype=complex)
    for col, occ in enumerate(occ_in):
        for i, c in enumerate(coords):
            new = list(occ)
            new[i] += 1
            row = index.get(tuple(new))
            if row is not None:
                mat[row, col] += c * np.sqrt(occ[i] + 1)
    return mat


def hop_occupation_rule(occs, i: int, j: int) -> np.ndarray:
    """Matrix of ``a*_i a_j`` on one sector by the occupation rule."""
    index = {tuple(o): k for k, o in enumerate(occs)}
    mat = np.zeros((len(occs), len(occs)), dtype=complex)
    for col, occ in enumerate(occs):
        if occ[j] == 0:
            continue
        amp = np.sqrt(occ[j])
        new = list(occ)
        new[j] -= 1
        amp *= np.sqrt(new[i] + 1)
        new[i] += 1
        mat[index[tuple(new)], col] += amp
    return mat


def multinomial(occ) -> int:
    return factorial(sum(occ)) // prod(factorial(k) for k in occ)


def power_iteration_sup(op: np.ndarray, rng, samples: int = 4000, iters: int = 300) -> float:
    """``sup ||op v||`` over unit vectors: best of a random sample, refined by power iteration."""
    n = op.shape[1]
    vs = rng.normal(size=(samples, n)) + 1j * rng.normal(size=(samples, n))
    vs /= np.linalg.norm(vs, axis=1, keepdims=True)
    vals = np.linalg.norm(vs @ op.T, axis=1)
    v = vs[np.argmax(vals)]
    g = op.conj().T @ op
    for _ in range(iters):
        w = g @ v
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        v = w / nrm
    return float(np.linalg.norm(op @ v))


def cvec(rng, d, normalize_on=None):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return normalize_on.normalize(v) if normalize_on is not None else v


def cmat(rng, rows, cols=None):
    cols = rows if cols is None else cols
    return (rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))) / np.sqrt(max(rows, cols))
