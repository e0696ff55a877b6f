"""Gaussian CP maps on covariance matrices.

A Gaussian channel is carried around as the block covariance matrix

    gamma = [[gamma_AA, gamma_AB], [gamma_AB^T, gamma_BB]]

of the partially transposed Choi state; its action on a Gaussian input is
the Schur complement

    Gamma' = gamma_AA - gamma_AB (gamma_BB + Gamma)^-1 gamma_AB^T.

The A side carries the channel output, the B side couples to the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import (GaussianFilter, SymmetricTwoMode, min_physicality_eig,
                       PHYSICALITY_TOL)

COND_LIMIT = 1e12
DEFAULT_S_REG = 0.9999


class IllConditionedError(ArithmeticError):
    """Schur-complement solve too ill-conditioned to trust."""


@dataclass(frozen=True)
class GaussianChannelCJ:
    """Choi-block description of a Gaussian CP map on m modes."""

    gamma_aa: np.ndarray
    gamma_ab: np.ndarray
    gamma_bb: np.ndarray

    def __post_init__(self):
        aa = np.asarray(self.gamma_aa, dtype=float)
        ab = np.asarray(self.gamma_ab, dtype=float)
        bb = np.asarray(self.gamma_bb, dtype=float)
        n = aa.shape[0]
        if aa.shape != (n, n) or bb.shape != (n, n) or ab.shape != (n, n) or n % 2:
            raise ValueError("Choi blocks must be square of equal even dimension")
        if np.abs(aa - aa.T).max() > 1e-10 or np.abs(bb - bb.T).max() > 1e-10:
            raise ValueError("diagonal Choi blocks must be symmetric")
        object.__setattr__(self, "gamma_aa", 0.5 * (aa + aa.T))
        object.__setattr__(self, "gamma_ab", ab.copy())
        object.__setattr__(self, "gamma_bb", 0.5 * (bb + bb.T))

    @property
    def modes(self) -> int:
        return self.gamma_aa.shape[0] // 2


def apply_gaussian_channel(channel: GaussianChannelCJ, gamma: np.ndarray) -> np.ndarray:
    """Schur-complement action of the channel on an input covariance matrix."""
    gamma = np.asarray(gamma, dtype=float)
    core = channel.gamma_bb + gamma
    cond = np.linalg.cond(core)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedError(f"gamma_BB + Gamma has condition number {cond:.3e}")
    solved = np.linalg.solve(core, channel.gamma_ab.T)
    out = channel.gamma_aa - channel.gamma_ab @ solved
    return 0.5 * (out + out.T)


def _entangler_blocks(lam_per_mode) -> GaussianChannelCJ:
    """Choi blocks of 1 applied to two-mode squeezed pairs with per-mode
    tanh parameters lam_j, after the partial transpose: all blocks diagonal."""
    cs = [(1.0 + l * l) / (1.0 - l * l) for l in lam_per_mode]
    ss = [2.0 * l / (1.0 - l * l) for l in lam_per_mode]
    diag_c = np.concatenate([[c] * 2 for c in cs])
    diag_s = np.concatenate([[s] * 2 for s in ss])
    return GaussianChannelCJ(np.diag(diag_c), np.diag(diag_s), np.diag(diag_c))


def identity_channel_cj(modes: int, s_reg: float = DEFAULT_S_REG) -> GaussianChannelCJ:
    """Identity map via a finitely squeezed Choi pair (tanh parameter s_reg).

    The ideal Choi pair is unnormalizable; with s_reg < 1 the action is the
    identity up to a regularization error of order (1 - s_reg).
    """
    if not 0.0 < s_reg < 1.0:
        raise ValueError("regularization parameter must lie in (0, 1)")
    return _entangler_blocks([s_reg] * modes)


def filter_channel_cj(filt: GaussianFilter, s_reg: float = 1.0) -> GaussianChannelCJ:
    """Choi blocks of rho -> P rho P for the Gaussian filter P = Pi^(1/2).

    P multiplies the squeezed Choi pair into another two-mode squeezed pair
    with tanh parameter s_reg * exp(-beta/2), so for beta > 0 the limit
    s_reg -> 1 is finite and is used exactly by default.
    """
    lams = [s_reg * math.exp(-0.5 * b) for b in filt.betas]
    if any(l >= 1.0 for l in lams):
        raise ValueError("filter channel needs s_reg * exp(-beta/2) < 1")
    ch = _entangler_blocks(lams)
    if filt.mode_unitary is None:
        return ch
    v = np.asarray(filt.mode_unitary.matrix)
    return GaussianChannelCJ(v @ ch.gamma_aa @ v.T, v @ ch.gamma_ab @ v.T,
                             v @ ch.gamma_bb @ v.T)


@dataclass(frozen=True)
class AffineChannel:
    """Gamma -> scale * Gamma + offset * I (plus the same scaling of d)."""

    scale: float
    offset: float

    def apply(self, gamma: np.ndarray) -> np.ndarray:
        gamma = np.asarray(gamma, dtype=float)
        return self.scale * gamma + self.offset * np.eye(gamma.shape[0])

    def apply_link(self, state: SymmetricTwoMode) -> SymmetricTwoMode:
        return SymmetricTwoMode(self.scale * state.c + self.offset,
                                self.scale * state.s)

    def compose(self, other: "AffineChannel") -> "AffineChannel":
        """self after other."""
        return AffineChannel(self.scale * other.scale,
                             self.scale * other.offset + self.offset)


def loss_thermal(l_km: float, l_att: float = 22.0, n_th: float = 1e-8) -> AffineChannel:
    """Fiber attenuation with thermal background over l_km of fiber:

        Gamma -> e^(-l/l_att) Gamma + (1 + 2 n_th)(1 - e^(-l/l_att)) I.
    """
    if l_km < 0 or l_att <= 0 or n_th < 0:
        raise ValueError("need l >= 0, l_att > 0, n_th >= 0")
    t = math.exp(-l_km / l_att)
    return AffineChannel(t, (1.0 + 2.0 * n_th) * (1.0 - t))


@dataclass(frozen=True)
class LimitStateResult:
    gamma: np.ndarray
    physical: bool
    min_eig: float


def limit_state_cov(gamma_tau_inf: np.ndarray, filt: GaussianFilter,
                    s_reg: float = 1.0) -> LimitStateResult:
    """Covariance matrix of the physical limit state from that of the
    filtered limit:

        Gamma_rho = gamma_AB^T (gamma_AA - Gamma_tau)^-1 gamma_AB - gamma_BB.

    The result may fail to be physical (the filtered limit can sit outside
    the filter's range); this is reported, not raised.
    """
    ch = filter_channel_cj(filt, s_reg=s_reg)
    gamma_tau = np.asarray(gamma_tau_inf, dtype=float)
    core = ch.gamma_aa - gamma_tau
    cond = np.linalg.cond(core)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedError(f"gamma_AA - Gamma_tau has condition number {cond:.3e}")
    solved = np.linalg.solve(core, ch.gamma_ab)
    out = ch.gamma_ab.T @ solved - ch.gamma_bb
    out = 0.5 * (out + out.T)
    low = min_physicality_eig(out)
    return LimitStateResult(out, bool(low >= -PHYSICALITY_TOL), float(low))
