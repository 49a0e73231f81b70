import numpy as np
import pytest
from hypothesis import given, strategies as st

from bosefield.fock import (BasisMismatchError, BlockOperator, CapacityError, FockBasis, GridSpace,
                            SectorMatrix, UnsafeSectorError, annihilator, block_diagonal, build_basis,
                            creator, identity, lct_seminorm, number_operator, operator_norm)
from oracles import cmat, count_occupations, creator_occupation_rule, cvec, power_iteration_sup


# -- grid ---------------------------------------------------------------------


def test_grid_is_centred_and_weighted():
    g = GridSpace(5, 0.25)
    assert np.allclose(g.x, [-0.5, -0.25, 0.0, 0.25, 0.5])
    f = np.ones(5)
    assert g.inner(f, f) == pytest.approx(5 * 0.25)


def test_grid_operators_hermitian_with_stencil():
    g = GridSpace(4, 0.5)
    p2 = g.momentum_squared()
    assert np.allclose(np.diag(p2), 8.0)
    assert np.allclose(np.diag(p2, 1), -4.0)
    assert np.allclose(p2, p2.conj().T)
    assert np.allclose(g.position(), np.diag(g.x))


def test_grid_rejects_bad_parameters():
    with pytest.raises(ValueError):
        GridSpace(0, 1.0)
    with pytest.raises(ValueError):
        GridSpace(3, -1.0)


def test_bump_is_normalized_and_supported_in_window():
    g = GridSpace(8, 0.5)
    f = g.bump(2, 5)
    assert g.norm(f) == pytest.approx(1.0)
    assert np.all(f[[0, 1, 6, 7]] == 0) and np.all(np.abs(f[2:6]) > 0)
    with pytest.raises(IndexError):
        g.bump(3, 8)


# -- basis --------------------------------------------------------------------


def test_dims_single_mode():
    assert build_basis(GridSpace(1, 1.0), 3).dims == [1, 1, 1, 1]


def test_dims_four_modes():
    assert build_basis(GridSpace(4, 1.0), 2).dims == [1, 4, 10]


def test_dims_default_against_brute_force_count():
    b = build_basis(GridSpace(8, 0.5), 3)
    assert b.dims == [count_occupations(8, n) for n in range(4)] == [1, 8, 36, 120]


def test_index_maps_are_mutually_inverse():
    b = FockBasis(GridSpace(3, 1.0), 3)
    for n in b.sectors():
        for k, occ in enumerate(b.occupations(n)):
            assert b.index(occ) == k


def test_enumeration_is_descending_lexicographic():
    b = FockBasis(GridSpace(3, 1.0), 2)
    occ = [tuple(o) for o in b.occupations(2)]
    assert occ == sorted(occ, reverse=True)
    assert [tuple(o) for o in b.occupations(1)] == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]


def test_capacity_error():
    with pytest.raises(CapacityError):
        FockBasis(GridSpace(10, 1.0), 6, capacity=1000)


# -- ladder operators -----------------------------------------------------------


def test_single_mode_ladder():
    g = GridSpace(1, 0.7)
    b = FockBasis(g, 3)
    ad = creator(b, g.mode(0))
    a = annihilator(b, g.mode(0))
    for n in range(3):
        assert ad.block(n + 1, n)[0, 0] == pytest.approx(np.sqrt(n + 1))
    for n in range(1, 4):
        assert a.block(n - 1, n)[0, 0] == pytest.approx(np.sqrt(n))


def test_creator_on_vacuum_gives_one_particle_state():
    g = GridSpace(4, 0.5)
    b = FockBasis(g, 2)
    f = g.bump(0, 3)
    assert np.allclose(creator(b, f).block(1, 0)[:, 0], g.coords(f))


def test_two_mode_matrix_element():
    g = GridSpace(2, 0.5)
    b = FockBasis(g, 2)
    f = (g.mode(0) + g.mode(1)) / np.sqrt(2)
    blk = creator(b, f).block(2, 1)
    assert blk[b.index((1, 1)), b.index((0, 1))] == pytest.approx(1 / np.sqrt(2))


def test_creator_matches_occupation_rule(rng):
    g = GridSpace(3, 0.4)
    b = FockBasis(g, 3)
    f = cvec(rng, 3)
    ad = creator(b, f)
    for n in range(3):
        oracle = creator_occupation_rule(b.occupations(n), b.occupations(n + 1), g.coords(f))
        assert np.allclose(ad.block(n + 1, n), oracle, atol=1e-14)


def test_creator_is_linear_and_annihilator_antilinear(rng):
    g = GridSpace(3, 0.5)
    b = FockBasis(g, 2)
    f, h = cvec(rng, 3), cvec(rng, 3)
    c = 0.3 - 1.2j
    assert (creator(b, c * f + h) - creator(b, f).scale(c) - creator(b, h)).allclose(BlockOperator(b))
    assert (annihilator(b, c * f) - annihilator(b, f).scale(np.conj(c))).allclose(BlockOperator(b))


def test_annihilator_kills_vacuum(rng):
    g = GridSpace(3, 0.5)
    b = FockBasis(g, 2)
    a = annihilator(b, cvec(rng, 3))
    assert all(k[1] != 0 for k in a.blocks)


@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_ccr_property(seed):
    rng = np.random.default_rng(seed)
    g = GridSpace(3, float(rng.uniform(0.2, 1.5)))
    b = FockBasis(g, 3)
    f, h = cvec(rng, 3, g), cvec(rng, 3, g)
    af, ah = annihilator(b, f), annihilator(b, h)
    comm = af @ ah.adjoint() - ah.adjoint() @ af - identity(b).scale(g.inner(f, h))
    assert operator_norm(comm.restrict(max_in=b.n_max - 1)) <= 1e-12
    assert operator_norm((af @ ah - ah @ af).restrict(max_in=b.n_max - 2)) <= 1e-12


def test_ccr_fails_at_the_cutoff_sector(rng):
    g = GridSpace(2, 1.0)
    b = FockBasis(g, 2)
    f = g.mode(0)
    a = annihilator(b, f)
    comm = a @ a.adjoint() - a.adjoint() @ a - identity(b)
    assert operator_norm(comm.restrict(max_in=2, max_out=2)) > 0.5


# -- number operator -------------------------------------------------------------


def test_number_operator():
    b = FockBasis(GridSpace(3, 1.0), 3)
    N = number_operator(b)
    assert np.allclose(N.diag(0), 0)
    assert np.allclose(N.diag(2), 2 * np.eye(b.dim(2)))
    u = 0.7
    expo = N.map_blocks(lambda i, j, m: np.diag(np.exp(1j * u * np.diag(m))))
    assert np.allclose(expo.diag(3), np.exp(3j * u) * np.eye(b.dim(3)))


# -- block operators ---------------------------------------------------------------


def test_band_arithmetic(rng):
    g = GridSpace(2, 1.0)
    b = FockBasis(g, 3)
    ad = creator(b, cvec(rng, 2))
    assert ad.bands == {1} and ad.adjoint().bands == {-1}
    assert (ad @ ad).bands == {2} and (ad @ ad).band_budget == 2


def test_adjoint_involution_and_sector_matrix(rng):
    b = FockBasis(GridSpace(2, 1.0), 2)
    F = BlockOperator(b, {(1, 0): cmat(rng, 2, 1), (2, 2): cmat(rng, 3)})
    assert F.adjoint().adjoint().allclose(F, atol=0)
    s = F.sector(1, 0)
    assert isinstance(s, SectorMatrix) and s.adjoint().n_out == 0
    with pytest.raises(ValueError):
        s @ s


def test_blocks_beyond_cutoff_are_dropped(rng):
    b = FockBasis(GridSpace(2, 1.0), 1)
    F = BlockOperator(b, {(2, 1): np.ones((3, 2)), (1, 0): np.ones((2, 1))})
    assert set(F.blocks) == {(1, 0)}


def test_basis_mismatch():
    b1 = FockBasis(GridSpace(2, 1.0), 2)
    b2 = FockBasis(GridSpace(3, 1.0), 2)
    with pytest.raises(BasisMismatchError):
        identity(b1) + identity(b2)


def test_operator_norm_identity():
    assert operator_norm(identity(FockBasis(GridSpace(3, 1.0), 2))) == pytest.approx(1.0)


def test_operator_norm_matches_dense_svd(rng):
    b = FockBasis(GridSpace(2, 1.0), 2)
    blocks = {(i, j): cmat(rng, b.dim(i), b.dim(j)) for i in range(3) for j in range(3)}
    F = BlockOperator(b, blocks)
    dense = np.block([[blocks[(i, j)] for j in range(3)] for i in range(3)])
    assert operator_norm(F) == pytest.approx(np.linalg.svd(dense, compute_uv=False)[0], rel=1e-12)


def test_dense_roundtrip(rng):
    b = FockBasis(GridSpace(2, 1.0), 2)
    F = creator(b, cvec(rng, 2)) + block_diagonal(b, [cmat(rng, d) for d in b.dims])
    assert BlockOperator.from_dense(b, F.to_dense()).allclose(F, atol=0)


# -- seminorms ------------------------------------------------------------------------


def test_seminorm_identity_and_zero():
    b = FockBasis(GridSpace(2, 1.0), 3)
    for n in range(4):
        assert lct_seminorm(identity(b), n) == pytest.approx(2.0)
        assert lct_seminorm(BlockOperator(b), n) == 0.0
    assert lct_seminorm(identity(b), -1) == 0.0


def test_seminorm_against_randomized_sup(rng):
    b = FockBasis(GridSpace(2, 1.0), 2)
    F = BlockOperator(b, {(1, 0): cmat(rng, 2, 1), (2, 1): cmat(rng, 3, 2)})
    dense = F.to_dense()
    low = b.offsets()[2]
    oracle = (power_iteration_sup(dense[:, :low], rng) + power_iteration_sup(dense.conj().T[:, :low], rng))
    assert lct_seminorm(F, 1) == pytest.approx(oracle, abs=1e-8)


def test_seminorm_unsafe_sector(rng):
    b = FockBasis(GridSpace(2, 1.0), 2)
    with pytest.raises(UnsafeSectorError):
        lct_seminorm(creator(b, cvec(rng, 2)), 2)
