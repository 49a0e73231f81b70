import numpy as np
import pytest

from bosefield.covariance import (build_Y, coherence_mechanism_check, equivalence_isometry,
                                  equivalence_residuals, free_covariance_check, free_transport_lipschitz,
                                  gamma_continuity, intertwiner_verify, kappa_beta_residual, lift_morphism,
                                  localization_check, make_morphism, mollified_continuity, mollify,
                                  morphism_apply, orbit_lct_bound, orbit_lct_modulus,
                                  trivial_character_check)
from bosefield.dynamics import DysonConfig, HamiltonianConfig, PotentialSpec, build_hamiltonian
from bosefield.fields import build_W, mode_number, projection_E
from bosefield.fock import FockBasis, GridSpace, block_diagonal, creator, identity, operator_norm
from bosefield.observables import GeneratorSum, SpectatorFrame
from oracles import cmat

TOL = 1e-10


def propagator(ham, t):
    return block_diagonal(ham.basis, {n: ham.propagator(n, t) for n in ham.basis.sectors()})


def random_gauge_invariant(basis, rng):
    return block_diagonal(basis, {n: cmat(rng, basis.dim(n)) for n in basis.sectors()})


def safe_norm(op):
    top = op.basis.n_max - 1
    return operator_norm(op.restrict(max_in=top, max_out=top))


# -- morphisms ----------------------------------------------------------------------


def test_morphism_unit_is_projection(default_basis, default_f):
    m = make_morphism(default_basis, default_f)
    assert m.unit.allclose(projection_E(default_basis, default_f), atol=1e-12)
    assert m.window == tuple(range(1, 7))


def test_morphism_is_multiplicative_and_star_preserving(default_basis, default_f, rng):
    m = make_morphism(default_basis, default_f)
    A, B = random_gauge_invariant(default_basis, rng), random_gauge_invariant(default_basis, rng)
    lhs = morphism_apply(m, A @ B)
    rhs = morphism_apply(m, A) @ morphism_apply(m, B)
    assert safe_norm(lhs - rhs) < 1e-12
    assert safe_norm(morphism_apply(m, A.adjoint()) - morphism_apply(m, A).adjoint()) < 1e-12


def test_morphism_rejects_band_changing(default_basis, default_f):
    m = make_morphism(default_basis, default_f)
    with pytest.raises(ValueError):
        morphism_apply(m, creator(default_basis, default_f))


def test_lift_by_identity_and_by_non_unitary(default_basis, default_f):
    m = make_morphism(default_basis, default_f)
    assert lift_morphism(m, identity(default_basis)).W.allclose(m.W)
    with pytest.raises(ValueError):
        lift_morphism(m, identity(default_basis).scale(2.0))


def test_Y_of_identity_is_unit(default_basis, default_f):
    Y = build_Y(default_basis, default_f, identity(default_basis))
    assert Y.allclose(make_morphism(default_basis, default_f).unit, atol=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.25, 0.4])
def test_intertwiner_relations_for_dynamics(default_ham, default_f, rng, t):
    U = propagator(default_ham, t)
    sample = [random_gauge_invariant(default_ham.basis, rng) for _ in range(3)]
    rep = intertwiner_verify(default_ham.basis, default_f, U, sample, tol=TOL)
    assert rep.passed, rep.residuals


def test_intertwiner_rejects_charged_sample(default_basis, default_f):
    with pytest.raises(ValueError):
        intertwiner_verify(default_basis, default_f, identity(default_basis), [creator(default_basis, default_f)])


def test_equivalence_of_orthogonal_modes(rng):
    grid = GridSpace(2, 1.0)
    basis = FockBasis(grid, 3)
    f1, f2 = grid.mode(0), grid.mode(1)
    sample = [random_gauge_invariant(basis, rng) for _ in range(3)]
    res = equivalence_residuals(basis, f1, f2, sample)
    assert all(abs(v) < 1e-12 for v in res.values()), res
    X = equivalence_isometry(basis, f1, f2)
    assert X.is_block_diagonal()


# -- localization -------------------------------------------------------------------


def test_localization_disjoint_support(default_basis, default_grid):
    f = default_grid.bump(1, 3)
    g = default_grid.mode(6)
    m = make_morphism(default_basis, f)
    A = block_diagonal(default_basis, {n: mode_number(default_basis, g, n) for n in default_basis.sectors()})
    assert localization_check(m, A, support=[6]) < 1e-12


def test_localization_overlap(default_basis, default_f):
    m = make_morphism(default_basis, default_f)
    Nf = block_diagonal(default_basis, {n: mode_number(default_basis, default_f, n)
                                        for n in default_basis.sectors()})
    with pytest.raises(ValueError):
        localization_check(m, Nf, support=range(1, 7))
    assert localization_check(m, Nf, support=range(1, 7), allow_overlap=True) == pytest.approx(1.0, abs=1e-12)


# -- free covariance ----------------------------------------------------------------


@pytest.mark.parametrize("t", [0.0, 0.1, 0.4, -0.3])
def test_free_covariance(default_basis, default_f, t):
    assert free_covariance_check(default_basis, default_f, HamiltonianConfig(), t) < TOL


def test_free_transport_lipschitz(default_basis, default_f):
    # (1+x)^{-1/2} has Lipschitz constant 1/2 on [0, inf)
    rows = free_transport_lipschitz(default_basis, default_f, HamiltonianConfig(),
                                    np.linspace(0, 0.4, 5), 2, 0.5)
    assert all(m <= b for m, b in rows)


# -- coherence mechanism ------------------------------------------------------------


def test_coherence_mechanism_defaults(default_ham, default_f):
    rep = coherence_mechanism_check(default_ham, default_f, DysonConfig(order=12, steps=64))
    res = rep.all_residuals()
    assert len(res) == 11
    quad = {"lockstep: dyson(n-1) - direct(n-1)", "integral: kappa(int O_n) - int O_n-1 (quadrature)"}
    for k, v in res.items():
        assert v < (1e-7 if k in quad else TOL), (k, v)


@pytest.mark.filterwarnings("ignore:Dyson tail bound")
def test_coherence_mechanism_without_potential():
    grid = GridSpace(5, 0.5)
    basis = FockBasis(grid, 3)
    ham = build_hamiltonian(basis, HamiltonianConfig(0.3, PotentialSpec("zero", 0.0, 1.0)))
    rep = coherence_mechanism_check(ham, grid.bump(1, 3), DysonConfig(order=12, steps=64))
    assert rep.kappa_consistency["kappa(A_n + B_n) - (A_n-1 + B_n-1)"] < TOL
    assert rep.lockstep["spectator leakage"] < TOL


def test_coherence_mechanism_at_time_zero(default_ham, default_f):
    rep = coherence_mechanism_check(default_ham, default_f, DysonConfig(t=0.0, order=2))
    assert all(v < 1e-12 for v in rep.all_residuals().values())


def test_coherence_needs_two_safe_sectors(default_ham, default_f):
    with pytest.raises(ValueError):
        coherence_mechanism_check(default_ham, default_f, DysonConfig(), n=1)
    with pytest.raises(ValueError):
        coherence_mechanism_check(default_ham, default_f, DysonConfig(), n=3)


def test_kappa_beta_residual(default_basis, default_f, rng):
    frame = SpectatorFrame(default_basis)
    gs = GeneratorSum.single(default_basis, 1, cmat(rng, default_basis.num_modes))
    assert kappa_beta_residual(gs, default_f, 2, frame) < TOL
    with pytest.raises(ValueError):
        kappa_beta_residual(gs, default_f, 1, frame)


# -- trivial character --------------------------------------------------------------


def test_trivial_character_at_time_zero(default_ham, default_f):
    rep = trivial_character_check(default_ham, default_f, [0.0], order=1, steps=4)
    assert rep.max_scalar_deviation() < 1e-13
    assert rep.max_off_scalar() < 1e-13
    assert rep.max_xi_deviation() < 1e-13


def test_trivial_character(default_ham, default_f):
    rep = trivial_character_check(default_ham, default_f, [0.2, 0.4], order=20, steps=256)
    assert set(rep.zeta) == {(t, n) for t in (0.2, 0.4) for n in (1, 2)}
    assert rep.max_scalar_deviation() < 1e-8
    assert rep.max_off_scalar() < 1e-8
    assert rep.max_xi_deviation() < TOL


# -- continuity ---------------------------------------------------------------------


def test_gamma_continuity_bound(default_ham, default_f):
    for measured, bound in gamma_continuity(default_ham, default_f, list(np.linspace(0, 0.4, 6)), 2):
        assert measured <= bound * (1 + 1e-9)


def test_orbit_lct_modulus_bound(default_ham, default_f):
    times = list(np.linspace(0, 0.4, 5))
    bound = orbit_lct_bound(default_ham, default_f, 2)
    assert max(orbit_lct_modulus(default_ham, default_f, times, 2)) <= bound * (1 + 1e-9)


def test_mollified_continuity(default_ham, default_f):
    t_grid = np.linspace(0, 1.0, 41)
    kernel = lambda t: np.where((t > 0.1) & (t < 0.8), np.sin(np.pi * (t - 0.1) / 0.7) ** 2, 0.0)
    rows = mollified_continuity(build_W(default_ham.basis, default_f), default_ham, kernel, t_grid, [1, 2, 4])
    assert all(m <= b for m, b in rows)
    with pytest.raises(ValueError):
        mollified_continuity(build_W(default_ham.basis, default_f), default_ham,
                             lambda t: np.ones_like(t), t_grid, [1])


def test_mollify_constant_kernel_of_invariant(default_ham):
    F = default_ham
    out = mollify(F, default_ham, lambda t: np.ones_like(t), np.linspace(0, 1, 11))
    assert out.allclose(F, atol=1e-10)
