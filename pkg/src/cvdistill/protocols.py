"""Characteristic-function protocol engine.

All distillation flavours implemented here act on the filtered object
tau = P rho P / tr(P rho P) whose characteristic function composes
multiplicatively through a building block:

    chi'(r) = chi_A(sqrt(1-R) r) * chi_B(sqrt(R) r).

Iterating with equal inputs at R = 1/2 (recursive), or pumping a fixed
state at R_N = 1/(N+1), both land on the closed form

    chi_N(r) = chi_1(r / sqrt(N))^N,

which converges to the Gaussian with the unchanged second moments of
chi_1 on every finite ball.  Pumping with constant R = 1/2 (the compact
distillery) does not Gaussify: zeros of chi_1 persist at sqrt(2)-scaled
points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import fock as fock_mod
from .fock import FockDensityMatrix, covariance_from_fock
from .gaussian import GaussianFilter

FIRST_MOMENT_TOL = 1e-8


@dataclass(frozen=True)
class CharFunHandle:
    """An evaluatable characteristic function with its second moments.

    ``second_moments`` is the covariance matrix Gamma of the underlying
    zero-first-moment operator; for every handle produced here the value at
    r = 0 is exactly one.
    """

    fn: object
    modes: int
    second_moments: np.ndarray
    zero_first_moments: bool = True

    def __post_init__(self):
        gamma = np.asarray(self.second_moments, dtype=float)
        n = 2 * self.modes
        if gamma.shape != (n, n):
            raise ValueError(f"second-moment matrix must be {n}x{n}")
        if np.abs(gamma - gamma.T).max() > 1e-10:
            raise ValueError("second-moment matrix must be symmetric")
        object.__setattr__(self, "second_moments", 0.5 * (gamma + gamma.T))

    def __call__(self, r) -> complex:
        r = np.asarray(r, dtype=float).reshape(-1)
        if r.shape != (2 * self.modes,):
            raise ValueError(f"phase-space vector must have length {2 * self.modes}")
        return complex(self.fn(r))


def charfun_from_fock(rho: FockDensityMatrix) -> CharFunHandle:
    """Wrap a Fock state (typically a filtered object) as a handle."""
    d, gamma = covariance_from_fock(rho)
    if np.abs(d).max() > FIRST_MOMENT_TOL:
        raise ValueError(f"state has nonzero first moments (|d| = {np.abs(d).max():.3e})")
    return CharFunHandle(lambda r: fock_mod.charfun_numeric(rho, r), rho.modes, gamma)


def gaussian_limit(gamma: np.ndarray) -> CharFunHandle:
    """The Gaussian handle exp(-r^T Gamma r / 4) with the given second moments."""
    gamma = np.asarray(gamma, dtype=float)
    if np.abs(gamma - gamma.T).max() > 1e-10:
        raise ValueError("second-moment matrix must be symmetric")
    modes = gamma.shape[0] // 2
    return CharFunHandle(lambda r: np.exp(-0.25 * (r @ gamma @ r)) + 0j, modes, gamma)


def blockwise_charfun(ha: CharFunHandle, hb: CharFunHandle, reflectivity: float) -> CharFunHandle:
    """chi'(r) = chi_A(sqrt(T) r) chi_B(sqrt(R) r); Gamma' = T Gamma_A + R Gamma_B."""
    if ha.modes != hb.modes:
        raise ValueError("mode count mismatch")
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError("reflectivity must be in [0, 1]")
    st = math.sqrt(1.0 - reflectivity)
    sr = math.sqrt(reflectivity)
    gamma = (1.0 - reflectivity) * ha.second_moments + reflectivity * hb.second_moments
    return CharFunHandle(lambda r: ha.fn(st * r) * hb.fn(sr * r), ha.modes, gamma)


def _int_power(z: complex, n: int) -> complex:
    # n-fold multiplication for moderate n: winding-safe by construction
    if n <= 64:
        out = 1.0 + 0j
        for _ in range(n):
            out *= z
        return out
    return z ** n


def scaled_power_charfun(h1: CharFunHandle, n_copies: int) -> CharFunHandle:
    """The central-limit closed form chi_1(r / sqrt(N))^N."""
    if n_copies < 1:
        raise ValueError("copy count must be >= 1")
    root = math.sqrt(n_copies)
    return CharFunHandle(lambda r: _int_power(h1.fn(r / root), n_copies),
                         h1.modes, h1.second_moments)


def recursive_charfun(h1: CharFunHandle, depth: int) -> CharFunHandle:
    """Recursive protocol to the given depth: N = 2^depth copies."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if depth == 0:
        return h1
    return scaled_power_charfun(h1, 2 ** depth)


def pumping_step(hn: CharFunHandle, h1: CharFunHandle, step_index: int) -> CharFunHandle:
    """One pumping round: mix tau_N with a fresh tau_1 at R_N = 1/(N+1).

    If hn equals chi_1(r/sqrt(N))^N the output is chi_1(r/sqrt(N+1))^(N+1),
    i.e. pumping reproduces the recursive closed form at every step.
    """
    if step_index < 1:
        raise ValueError("step index must be >= 1")
    return blockwise_charfun(hn, h1, 1.0 / (step_index + 1))


def pump_charfun(h1: CharFunHandle, n_copies: int) -> CharFunHandle:
    """Iterate pumping rounds until N = n_copies raw copies are consumed."""
    h = h1
    for n in range(1, n_copies):
        h = pumping_step(h, h1, n)
    return h


def compact_step(hn: CharFunHandle, h1: CharFunHandle) -> CharFunHandle:
    """Compact-distillery round: constant reflectivity 1/2 with a fixed pump."""
    return blockwise_charfun(hn, h1, 0.5)


def compact_charfun(h1: CharFunHandle, steps: int) -> CharFunHandle:
    h = h1
    for _ in range(steps):
        h = compact_step(h, h1)
    return h


# ---------------------------------------------------------------------------
# deterministic evaluation grid and deviation metrics
# ---------------------------------------------------------------------------

def grid_directions(modes: int, n_angles: int = 16) -> np.ndarray:
    """Unit directions: n_angles per coordinate plane.

    Planes: each mode's own (X_j, P_j) plane, plus for every mode pair the
    (X_j, X_k) and (P_j, P_k) planes.  Deterministic so reports reproduce.
    """
    planes = [(2 * j, 2 * j + 1) for j in range(modes)]
    for j in range(modes):
        for k in range(j + 1, modes):
            planes.append((2 * j, 2 * k))
            planes.append((2 * j + 1, 2 * k + 1))
    dirs = []
    angles = 2.0 * np.pi * np.arange(n_angles) / n_angles
    for (i, j) in planes:
        for th in angles:
            v = np.zeros(2 * modes)
            v[i], v[j] = np.cos(th), np.sin(th)
            dirs.append(v)
    return np.array(dirs)


def evaluation_grid(modes: int, r0: float = 3.0, n_angles: int = 16,
                    radius_step: float = 0.25) -> np.ndarray:
    """Deterministic grid covering the ball |r| <= r0."""
    if r0 <= 0:
        raise ValueError("radius must be positive")
    radii = np.arange(radius_step, r0 + 1e-12, radius_step)
    dirs = grid_directions(modes, n_angles)
    return (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 2 * modes)


def sup_deviation(ha: CharFunHandle, hb: CharFunHandle, r0: float = 3.0,
                  n_angles: int = 16, radius_step: float = 0.25) -> float:
    """max |chi_A - chi_B| over the deterministic grid of the ball |r| <= r0."""
    if ha.modes != hb.modes:
        raise ValueError("mode count mismatch")
    pts = evaluation_grid(ha.modes, r0, n_angles, radius_step)
    dev = 0.0
    for r in pts:
        dev = max(dev, abs(ha.fn(r) - hb.fn(r)))
    return dev


# ---------------------------------------------------------------------------
# convergence diagnostics
# ---------------------------------------------------------------------------

def _derivative_at_zero(f, order: int, h: float = 1e-3):
    """Central finite difference of the given order at zero, one Richardson
    level on steps (h, 2h)."""
    if order not in (1, 2, 3, 4, 5, 6):
        raise ValueError("supported derivative orders: 1..6")

    def stencil(hh):
        if order == 1:
            return (f(hh) - f(-hh)) / (2.0 * hh)
        if order == 2:
            return (f(hh) - 2.0 * f(0.0) + f(-hh)) / hh ** 2
        if order == 3:
            return (f(2 * hh) - 2.0 * f(hh) + 2.0 * f(-hh) - f(-2 * hh)) / (2.0 * hh ** 3)
        if order == 4:
            return (f(2 * hh) - 4.0 * f(hh) + 6.0 * f(0.0)
                    - 4.0 * f(-hh) + f(-2 * hh)) / hh ** 4
        if order == 5:
            return (f(3 * hh) - 4.0 * f(2 * hh) + 5.0 * f(hh)
                    - 5.0 * f(-hh) + 4.0 * f(-2 * hh) - f(-3 * hh)) / (2.0 * hh ** 5)
        return (f(3 * hh) - 6.0 * f(2 * hh) + 15.0 * f(hh) - 20.0 * f(0.0)
                + 15.0 * f(-hh) - 6.0 * f(-2 * hh) + f(-3 * hh)) / hh ** 6

    d_h = stencil(h)
    d_2h = stencil(2.0 * h)
    return (4.0 * d_h - d_2h) / 3.0


def charfun_moment(handle: CharFunHandle, direction, k: int, h: float = 1e-3) -> complex:
    """<H^k> for H = direction . Q from derivatives of chi(t * direction).

    chi(t r) = sum_k (i t)^k <H^k> / k!, so <H^k> = (-i)^k d^k chi / dt^k |_0.
    """
    direction = np.asarray(direction, dtype=float).reshape(-1)
    deriv = _derivative_at_zero(lambda t: handle.fn(t * direction), k, h)
    return complex((-1j) ** k * deriv)


def wick_moment(gamma: np.ndarray, direction, k: int) -> float:
    """Gaussian moment of H = direction . Q: (k-1)!! <H^2>^(k/2), odd k -> 0."""
    if k % 2:
        return 0.0
    direction = np.asarray(direction, dtype=float).reshape(-1)
    second = 0.5 * float(direction @ np.asarray(gamma, float) @ direction)
    double_fact = 1
    for j in range(k - 1, 0, -2):
        double_fact *= j
    return double_fact * second ** (k // 2)


@dataclass(frozen=True)
class MomentRow:
    k: int
    n_copies: int
    value: complex
    wick: float

    @property
    def deviation(self) -> float:
        return abs(self.value - self.wick)


@dataclass(frozen=True)
class MomentConvergenceReport:
    direction: np.ndarray
    rows: tuple

    def deviations(self, k: int):
        return [(row.n_copies, row.deviation) for row in self.rows if row.k == k]

    def trend_ok(self, k: int, burn_in: int = 1, slack: float = 0.0) -> bool:
        devs = [d for n, d in sorted(self.deviations(k)) if n >= burn_in]
        return all(b <= a + slack for a, b in zip(devs, devs[1:]))


def moment_convergence_report(tau1: FockDensityMatrix, k_max: int, n_list,
                              direction=None, h: float = 1e-3) -> MomentConvergenceReport:
    """Moments of tau_N against the Wick values of the Gaussian limit.

    Moments come from finite differences of the closed form
    chi_1(r/sqrt(N))^N, which stays affordable at protocol sizes no Fock
    simulation can reach.  Odd orders have Wick target zero.
    """
    if k_max % 2 or k_max < 2:
        raise ValueError("k_max must be a positive even integer")
    h1 = charfun_from_fock(tau1)
    if direction is None:
        direction = np.zeros(2 * tau1.modes)
        direction[0] = 1.0
    rows = []
    for n in sorted(set(int(x) for x in n_list)):
        hn = scaled_power_charfun(h1, n)
        for k in range(1, k_max + 1):
            value = charfun_moment(hn, direction, k, h)
            rows.append(MomentRow(k, n, value, wick_moment(h1.second_moments, direction, k)))
    return MomentConvergenceReport(np.asarray(direction, float), tuple(rows))


@dataclass(frozen=True)
class MatrixElementRow:
    n_copies: int
    bra: tuple
    ket: tuple
    tau_element: complex
    rho_element_normalized: complex


@dataclass(frozen=True)
class MatrixElementReport:
    rows: tuple
    limit_tau: dict
    limit_rho_normalized: dict


def matrix_element_convergence(rho1: FockDensityMatrix, filt: GaussianFilter,
                               pairs, n_list, rank_tol: float = 1e-10) -> MatrixElementReport:
    """Fock-level matrix elements of tau_N and of rho_N / tr(P rho_N P)
    across protocol sizes, next to their Gaussian-limit values.

    ``pairs`` are (bra, ket) occupation tuples, i.e. eigenvectors of P in
    its diagonal frame.  N values must be powers of two; the recursive
    protocol is simulated physically for each.  The limit elements come from
    the Gaussian state with the filtered object's second moments synthesized
    directly in Fock space.
    """
    pairs = [(tuple(int(x) for x in np.atleast_1d(b)),
              tuple(int(x) for x in np.atleast_1d(k))) for b, k in pairs]
    h1 = charfun_from_fock(fock_mod.filtered_object(rho1, filt))
    rows = []
    for n in sorted(set(int(x) for x in n_list)):
        depth = int(round(math.log2(n))) if n > 1 else 0
        if 2 ** depth != n:
            raise ValueError("matrix-element oracle runs at powers of two only")
        rho_n = fock_mod.gaussify(rho1, depth, filt, rank_tol=rank_tol)
        tau_n = fock_mod.filtered_object(rho_n, filt)
        p = fock_mod.filter_matrix(filt, rho1.cutoff, half=True)
        prp = float(np.real(np.trace(p @ rho_n.data @ p.conj().T)))
        for bra, ket in pairs:
            rows.append(MatrixElementRow(
                n, bra, ket, tau_n.element(bra, ket),
                complex(rho_n.element(bra, ket)) / prp))
    gamma_tau = h1.second_moments
    tau_inf = _gaussian_fock_from_cov(gamma_tau, rho1.modes, rho1.cutoff)
    limit_tau = {}
    limit_rho = {}
    if tau_inf is not None:
        rho_inf = fock_mod.unfilter_object(tau_inf, filt)
        p = fock_mod.filter_matrix(filt, rho1.cutoff, half=True)
        prp = float(np.real(np.trace(p @ rho_inf.data @ p.conj().T)))
        for bra, ket in pairs:
            limit_tau[(bra, ket)] = tau_inf.element(bra, ket)
            limit_rho[(bra, ket)] = complex(rho_inf.element(bra, ket)) / prp
    return MatrixElementReport(tuple(rows), limit_tau, limit_rho)


def _gaussian_fock_from_cov(gamma, modes, cutoff):
    from .gaussian import extract_symmetric
    try:
        if modes == 1:
            return fock_mod.fock_gaussian_single_mode(gamma, cutoff)
        if modes == 2:
            return fock_mod.fock_gaussian_cm2(extract_symmetric(gamma, tol=1e-6), cutoff)
    except ValueError:
        return None
    return None


# ---------------------------------------------------------------------------
# schedules and resource accounting
# ---------------------------------------------------------------------------

class ProtocolKind(str, Enum):
    RECURSIVE = "recursive"
    REORDERED_RECURSIVE = "reordered_recursive"
    PUMPING = "pumping"
    COMPACT = "compact"


@dataclass(frozen=True)
class ProtocolSchedule:
    kind: ProtocolKind
    n_copies: int

    def __post_init__(self):
        object.__setattr__(self, "kind", ProtocolKind(self.kind))
        if self.n_copies < 1:
            raise ValueError("copy count must be >= 1")
        if self.kind in (ProtocolKind.RECURSIVE, ProtocolKind.REORDERED_RECURSIVE):
            if self.n_copies & (self.n_copies - 1):
                raise ValueError("recursive schedules need a power-of-two copy count")


@dataclass(frozen=True)
class ResourceProfile:
    memory_modes_per_location: int
    time_steps: int
    raw_copies: int


def resource_profile(schedule: ProtocolSchedule) -> ResourceProfile:
    """Memory and time accounting for single-mode halves.

    Simultaneous recursive rounds hold all 2^n copies at once; the
    temporally reordered variant squeezes that to n+1 modes per location at
    the price of running the 2^n - 1 blocks sequentially; pumping and the
    compact distillery hold two modes and take N - 1 steps.
    """
    n = schedule.n_copies
    if schedule.kind is ProtocolKind.RECURSIVE:
        depth = n.bit_length() - 1
        return ResourceProfile(n, depth, n)
    if schedule.kind is ProtocolKind.REORDERED_RECURSIVE:
        depth = n.bit_length() - 1
        return ResourceProfile(depth + 1, n - 1, n)
    return ResourceProfile(2, n - 1, n)


# ---------------------------------------------------------------------------
# finiteness check for the inverse-filter trace
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InverseFilterCheck:
    finite: bool
    margin: float
    borderline: bool


def inverse_filter_trace_check(filt: GaussianFilter, gamma_ref: np.ndarray,
                               borderline_margin: float = 0.05) -> InverseFilterCheck:
    """Whether tr(Pi^-1 tau_ref) converges for a Gaussian tau_ref.

    The trace is finite iff the reference covariance sits strictly below the
    filter covariance in the filter frame: Gamma_Pi - Gamma_ref > 0.  The
    margin is the smallest eigenvalue of that difference; near-zero margins
    are flagged as borderline rather than asserted either way.
    """
    diff = filt.pi_covariance() - np.asarray(gamma_ref, dtype=float)
    low = float(np.linalg.eigvalsh(0.5 * (diff + diff.T)).min())
    return InverseFilterCheck(low > 0.0, low, abs(low) < borderline_margin)
