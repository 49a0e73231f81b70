"""Morphisms, intertwiners and the coherence mechanism on a small grid.

Builds rho_f = Ad W_f, lifts it by the free and the interacting dynamics,
checks the intertwiner relations and the trivial character, and runs the
sector-lowering checks that tie neighbouring sectors together.

    python3 demos/intertwiner_tour.py
"""

import numpy as np

from bosefield import (DysonConfig, FockBasis, GridSpace, HamiltonianConfig, PotentialSpec,
                       block_diagonal, build_hamiltonian, coherence_mechanism_check,
                       free_covariance_check, intertwiner_verify, trivial_character_check)


def propagator(ham, t):
    return block_diagonal(ham.basis, {n: ham.propagator(n, t) for n in ham.basis.sectors()})


def main():
    grid = GridSpace(6, 0.5)
    basis = FockBasis(grid, 3)
    f = grid.bump(1, 4)
    cfg = HamiltonianConfig(0.3, PotentialSpec("gaussian", 1.0, 1.0))
    ham = build_hamiltonian(basis, cfg)
    free = ham.free_part()
    rng = np.random.default_rng(7)
    sample = [block_diagonal(basis, {n: rng.normal(size=(basis.dim(n),) * 2) for n in basis.sectors()})
              for _ in range(5)]

    for label, H in (("free", free), ("interacting", ham)):
        rep = intertwiner_verify(basis, f, propagator(H, 0.3), sample, label=label)
        worst = max(rep.residuals.values())
        print(f"{label:12s} intertwiner residual {worst:.2e}  passed={rep.passed}")

    print(f"free transport of W_f at t=0.3: {free_covariance_check(basis, f, cfg, 0.3):.2e}")

    char = trivial_character_check(ham, f, [0.1, 0.3], order=16, steps=128)
    print(f"character: |zeta - 1| <= {char.max_scalar_deviation():.2e}, "
          f"off-scalar <= {char.max_off_scalar():.2e}, |xi - 1| <= {char.max_xi_deviation():.2e}")

    coh = coherence_mechanism_check(ham, f, DysonConfig(t=0.3, order=14, steps=64))
    for name, val in coh.all_residuals().items():
        print(f"  {name:55s} {val:.2e}")


if __name__ == "__main__":
    main()
