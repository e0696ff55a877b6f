"""Repeater-chain reach on symmetric two-mode states.

Pipeline per link: transmit both halves of a two-mode squeezed pair through
lossy fiber, optionally lose half the photons again inside the station
(variant ii), de-Gaussify by photon replacement and re-Gaussify — whose net
effect is the closed-form (C, S) below — then swap neighbouring links k
times until one pair spans L = 2 m l with m = 2^k links.  Entanglement is
judged by the EPR uncertainty Delta = C - S < 1.

Distances: ``transmit`` takes the per-mode fiber length l (each half of a
pair travels l, so a single link spans 2 l), while ``direct_lmax`` and
``max_distance`` quote the total end-to-end span L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channels import AffineChannel, loss_thermal
from .gaussian import SymmetricTwoMode, duan_delta, make_two_mode_squeezed

DEFAULT_L_ATT = 22.0
DEFAULT_N_TH = 1e-8
DEFAULT_LAMBDA_FACTOR = 0.99
S_SINGULAR = 1e-12
STATION_TRANSMITTANCE = 0.5

VARIANTS = ("i", "ii")


@dataclass(frozen=True)
class RepeaterConfig:
    r: float
    k: int
    length_km: float
    l_att: float = DEFAULT_L_ATT
    n_th: float = DEFAULT_N_TH
    lambda_factor: float = DEFAULT_LAMBDA_FACTOR
    variant: str = "i"
    distill: bool = True
    nested: bool = False  # re-distill after every swap; reaches less far

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("initial squeezing must be positive")
        if self.k < 0:
            raise ValueError("swap depth must be nonnegative")
        if self.length_km <= 0:
            raise ValueError("total distance must be positive")
        if not 0.0 < self.lambda_factor < 1.0:
            raise ValueError("lambda factor must lie strictly inside (0, 1)")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    @property
    def links(self) -> int:
        return 2 ** self.k


def transmit(r: float, l_km: float, l_att: float = DEFAULT_L_ATT,
             n_th: float = DEFAULT_N_TH) -> SymmetricTwoMode:
    """Two-mode squeezed pair after each half travels l_km of lossy fiber:

        C = e^(-l/l_att) cosh(2r) + (1 + 2 n_th)(1 - e^(-l/l_att)),
        S = e^(-l/l_att) sinh(2r).
    """
    if r < 0 or l_km < 0:
        raise ValueError("need r >= 0 and l >= 0")
    return loss_thermal(l_km, l_att, n_th).apply_link(make_two_mode_squeezed(r))


def station_loss(state: SymmetricTwoMode, n_th: float = DEFAULT_N_TH) -> SymmetricTwoMode:
    """Extra 50% photon loss inside the station, applied to both modes
    symmetrically: the loss/thermal map with transmittance one half."""
    ch = AffineChannel(STATION_TRANSMITTANCE,
                       (1.0 + 2.0 * n_th) * (1.0 - STATION_TRANSMITTANCE))
    return ch.apply_link(state)


def epsilon_symmetric(state: SymmetricTwoMode) -> float:
    """epsilon = (C^2 - S^2 - 1) / (2 S): zero for pure pairs, conserved by
    photon replacement and Fock-diagonal Kraus maps."""
    if state.s < S_SINGULAR:
        raise ValueError("epsilon is singular at S = 0")
    return (state.c * state.c - state.s * state.s - 1.0) / (2.0 * state.s)


def epsilon_of_link(r: float, transmittance: float, n_th: float = DEFAULT_N_TH) -> float:
    """epsilon of a transmitted pair, evaluated without cancellation.

    Writing u = 1 - T and nu = 1 + 2 n_th, the numerator C^2 - S^2 - 1
    expands exactly into the nonnegative terms

        2 nu (cosh 2r - 1) u T + 4 n_th u + 4 n_th^2 u^2,

    which stays accurate for transmittances far below float epsilon where
    the (C, S)-level formula loses everything to rounding.  T = 0 returns
    the limit: nu (cosh 2r - 1) / sinh 2r for a pure-loss line, +inf with
    thermal noise.
    """
    if not 0.0 <= transmittance <= 1.0 or r <= 0 or n_th < 0:
        raise ValueError("need r > 0, n_th >= 0 and transmittance in [0, 1]")
    nu = 1.0 + 2.0 * n_th
    c2r_m1 = math.cosh(2.0 * r) - 1.0
    s2r = math.sinh(2.0 * r)
    if transmittance == 0.0:
        return math.inf if n_th > 0 else nu * c2r_m1 / s2r
    u = 1.0 - transmittance
    num = 2.0 * nu * c2r_m1 * u * transmittance + 4.0 * n_th * u + 4.0 * n_th * n_th * u * u
    return num / (2.0 * transmittance * s2r)


def lambda_policy(eps: float, factor: float = DEFAULT_LAMBDA_FACTOR) -> float:
    """Tuning rule Lambda = factor / (1 + eps), strictly inside the
    admissible interval (0, 1/(1+eps))."""
    if not 0.0 < factor < 1.0:
        raise ValueError("factor must lie strictly inside (0, 1)")
    if eps < 0:
        raise ValueError("epsilon must be nonnegative")
    return factor / (1.0 + eps)


def distilled_state(eps: float, lam: float) -> SymmetricTwoMode:
    """Net effect of photon replacement plus full Gaussification:

        C = (Lam^2 (1 - eps^2) + 1) / ((1 - eps Lam)^2 - Lam^2),
        S = 2 Lam / ((1 - eps Lam)^2 - Lam^2),

    valid for 0 < Lam < 1/(1 + eps)."""
    if eps < 0:
        raise ValueError("epsilon must be nonnegative")
    if not 0.0 < lam < 1.0 / (1.0 + eps):
        raise ValueError(f"Lambda = {lam} outside the admissible interval (0, {1.0 / (1.0 + eps):.6g})")
    den = (1.0 - eps * lam) ** 2 - lam * lam
    return SymmetricTwoMode((lam * lam * (1.0 - eps * eps) + 1.0) / den,
                            2.0 * lam / den)


def swap(state: SymmetricTwoMode) -> SymmetricTwoMode:
    """Optimal Gaussian entanglement swap g(C, S) = (C - S^2/2C, S^2/2C);
    doubles the spanned distance, preserves the symmetric form."""
    if state.c <= 0:
        raise ValueError("C must be positive")
    shift = state.s * state.s / (2.0 * state.c)
    return SymmetricTwoMode(state.c - shift, shift)


def chain_delta(cfg: RepeaterConfig) -> float:
    """Duan Delta across the full chain of cfg.length_km.

    Per link: transmit over l = L / (2 m) per mode, apply station loss for
    variant ii (an extra factor one half of transmittance on each mode),
    distill via the closed form (skipped when cfg.distill is off), then
    swap k times.  Epsilon comes from the cancellation-free form so the
    chain stays meaningful deep into the strong-loss regime.
    """
    per_mode = cfg.length_km / (2.0 * cfg.links)
    transmittance = math.exp(-per_mode / cfg.l_att)
    if cfg.variant == "ii":
        transmittance *= STATION_TRANSMITTANCE
    nu = 1.0 + 2.0 * cfg.n_th
    # Delta of the raw link, written without cancellation
    link_delta = transmittance * math.exp(-2.0 * cfg.r) + nu * (1.0 - transmittance)
    if cfg.distill:
        eps = epsilon_of_link(cfg.r, transmittance, cfg.n_th)
        if not math.isfinite(eps):
            return link_delta  # fully thermalized: nothing left to distill
        lam = lambda_policy(eps, cfg.lambda_factor)
        link = distilled_state(eps, lam)
    else:
        link = SymmetricTwoMode(transmittance * math.cosh(2.0 * cfg.r) + nu * (1.0 - transmittance),
                                transmittance * math.sinh(2.0 * cfg.r))
        if link.s < S_SINGULAR:
            return link_delta
    state = link
    for _ in range(cfg.k):
        state = swap(state)
        if cfg.nested and cfg.distill and state.s > S_SINGULAR:
            # interleave swaps with fresh distillation; the swap map leaves
            # C^2 - S^2 - 1 unchanged, so epsilon just rescales with 1/S
            eps = epsilon_symmetric(state)
            state = distilled_state(eps, lambda_policy(eps, cfg.lambda_factor))
    return duan_delta(state)


def direct_lmax(r: float, l_att: float = DEFAULT_L_ATT, n_th: float = DEFAULT_N_TH) -> float:
    """Total span reachable by direct transmission before separability:

        l_max(r) = 2 l_att ln((1 + 2 n_th - cosh 2r + sinh 2r) / (2 n_th)).

    Unbounded for n_th = 0 (returns +inf)."""
    if r <= 0:
        raise ValueError("squeezing must be positive")
    if n_th < 0:
        raise ValueError("thermal occupation must be nonnegative")
    if n_th == 0:
        return math.inf
    return 2.0 * l_att * math.log((1.0 + 2.0 * n_th - math.exp(-2.0 * r)) / (2.0 * n_th))


def direct_lmax_limit(l_att: float = DEFAULT_L_ATT, n_th: float = DEFAULT_N_TH) -> float:
    """Large-squeezing limit of direct_lmax: 2 l_att ln(1 + 1/(2 n_th))."""
    return 2.0 * l_att * math.log(1.0 + 1.0 / (2.0 * n_th))


@dataclass(frozen=True)
class MaxDistanceResult:
    length_km: float
    delta: float
    entangled_anywhere: bool


def max_distance(r: float, k: int, variant: str = "i", distill: bool = True,
                 l_att: float = DEFAULT_L_ATT, n_th: float = DEFAULT_N_TH,
                 lambda_factor: float = DEFAULT_LAMBDA_FACTOR,
                 bracket=(1.0, 5000.0), tol_km: float = 0.1) -> MaxDistanceResult:
    """Largest total span with chain Delta < 1, by bracketing and bisection.

    Delta is checked for monotone growth in L on a coarse grid first; if the
    check fails the search falls back to a dense scan instead of assuming
    structure that is not there.
    """
    def delta_at(length):
        return chain_delta(RepeaterConfig(r, k, length, l_att, n_th,
                                          lambda_factor, variant, distill))

    lo, hi = bracket
    grid = [lo + (hi - lo) * j / 64.0 for j in range(65)]
    values = [delta_at(x) for x in grid]
    if values[0] >= 1.0:
        return MaxDistanceResult(0.0, values[0], False)
    monotone = all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    if not monotone:
        # dense scan: last grid point that is still entangled, refined locally
        idx = max(j for j, v in enumerate(values) if v < 1.0)
        lo = grid[idx]
        hi = grid[idx + 1] if idx + 1 < len(grid) else hi
    else:
        above = [j for j, v in enumerate(values) if v >= 1.0]
        if not above:
            return MaxDistanceResult(hi, values[-1], True)  # entangled across the bracket
        hi = grid[above[0]]
        lo = grid[above[0] - 1]
    while hi - lo > tol_km:
        mid = 0.5 * (lo + hi)
        if delta_at(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return MaxDistanceResult(lo, delta_at(lo), True)


@dataclass(frozen=True)
class ScanRow:
    r: float
    m: int
    variant: str
    l_max_km: float
    delta_at_lmax: float


def scan(r_grid, k_set, variants=VARIANTS, include_direct: bool = True,
         l_att: float = DEFAULT_L_ATT, n_th: float = DEFAULT_N_TH,
         lambda_factor: float = DEFAULT_LAMBDA_FACTOR, executor=None) -> list:
    """Sweep maximum distances over squeezing values and chain sizes.

    Rows are ordered r-major; for every r a direct-transmission row
    (variant "direct", m = 1) precedes the repeater rows when requested.
    """
    r_grid = [float(r) for r in r_grid]
    k_set = sorted(set(int(k) for k in k_set))
    tasks = []
    for r in r_grid:
        if include_direct:
            tasks.append(("direct", r, None))
        for variant in variants:
            for k in k_set:
                tasks.append(("chain", r, (k, variant)))

    def run(task):
        kind, r, extra = task
        if kind == "direct":
            span = direct_lmax(r, l_att, n_th)
            delta = duan_delta(transmit(r, span / 2.0, l_att, n_th))
            return ScanRow(r, 1, "direct", span, delta)
        k, variant = extra
        res = max_distance(r, k, variant, True, l_att, n_th, lambda_factor)
        return ScanRow(r, 2 ** k, variant, res.length_km, res.delta)

    if executor is None:
        return [run(t) for t in tasks]
    return list(executor.map(run, tasks))
