"""Convergence of the Dyson series for Gamma_f(t) on the default configuration.

Prints the per-sector error at the default order, then the order study and
the quadrature study for the top safe sector.

    python3 demos/dyson_convergence.py
"""

import warnings

import numpy as np

from bosefield import build_hamiltonian, dyson_gamma, gamma_direct
from bosefield.config import default_config
from bosefield.suites import emit_convergence_table


def main():
    cfg = default_config()
    basis, f = cfg.basis(), cfg.test_function()
    ham = build_hamiltonian(basis, cfg.hamiltonian_config())
    dy = cfg.dyson_config()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        series = dyson_gamma(ham, f, dy)
    direct = gamma_direct(ham, f, dy.t)
    print(f"order {dy.order}, {dy.intervals()} {dy.rule} intervals, t={dy.t}")
    for n in range(1, basis.n_max):
        err = np.linalg.norm(series[n].gamma - direct[n], 2)
        print(f"  sector {n}: error {err:.3e}   tail bound {series[n].tail_bound():.3e}"
              f"   ||C|| = {series[n].generator_norm:.3f}")

    print()
    print(emit_convergence_table(cfg, "dyson_order").to_text())
    print()
    print(emit_convergence_table(cfg, "quad_steps").to_text())


if __name__ == "__main__":
    main()
