"""Watch a de-Gaussified entangled pair converge back to a Gaussian state.

A two-mode squeezed pair is made non-Gaussian by symmetric single-photon
replacement, then pushed through the iterative distillation protocol.  The
filtered object's characteristic function approaches the Gaussian with its
(unchanged) second moments; the physical state follows in fidelity.

Run:  python demos/gaussification_convergence.py
"""

import math

from cvdistill import channels, fock, protocols
from cvdistill.gaussian import extract_symmetric, thermal_filter

CUTOFF = 16
R_SQUEEZE = 0.4
ETA = math.sqrt(0.3)
BETA = 1.0


def main():
    pair = fock.fock_tmsv(R_SQUEEZE, CUTOFF)
    replaced, weight = fock.photon_replacement(pair, ETA)
    print(f"photon replacement at eta^2 = {ETA**2:.2f}: relative weight {weight:.4f}")

    filt = thermal_filter(BETA, modes=2)
    tau1 = fock.filtered_object(replaced, filt)
    h1 = protocols.charfun_from_fock(tau1)
    limit = protocols.gaussian_limit(h1.second_moments)

    print("\ncharacteristic-function distance to the Gaussian limit (|r| <= 2):")
    print(f"{'N':>4s}  {'sup deviation':>14s}")
    for n in (1, 2, 4, 8, 16, 32):
        hn = protocols.scaled_power_charfun(h1, n)
        dev = protocols.sup_deviation(hn, limit, r0=2.0)
        print(f"{n:4d}  {dev:14.3e}")

    res = channels.limit_state_cov(h1.second_moments, filt)
    print(f"\nlimit-state covariance physical: {res.physical}")
    if res.physical:
        cs = extract_symmetric(res.gamma, tol=1e-6)
        print(f"limit state (C, S) = ({cs.c:.6f}, {cs.s:.6f})")
        rho_inf = fock.fock_gaussian_cm2(cs, CUTOFF)
        state = replaced
        print("\nfidelity of the physical state against the Gaussian limit:")
        n = 1
        for _ in range(3):
            state, _ = fock.building_block(state, state, 0.5, filt, rank_tol=1e-9)
            n *= 2
            print(f"  N = {n:2d}: F = {fock.fidelity(state, rho_inf):.6f}")


if __name__ == "__main__":
    main()
