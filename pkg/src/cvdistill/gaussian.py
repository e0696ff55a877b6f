"""Gaussian states on phase space: first moments, covariance matrices,
symplectic maps, measurement filters, and two-mode entanglement diagnostics.

Conventions used throughout the package:

* quadrature ordering is (X1, P1, ..., Xm, Pm) with X = (a + a†)/sqrt(2),
  P = i(a† - a)/sqrt(2), so [X, P] = i;
* the covariance matrix collects symmetrized second moments with a factor
  of two, Gamma_jk = 2 Re <(Q_j - d_j)(Q_k - d_k)>, hence vacuum has
  Gamma = identity;
* the characteristic function of a Gaussian state is
  chi(r) = exp(i r.d - r^T Gamma r / 4).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PHYSICALITY_TOL = 1e-9
SYMPLECTIC_TOL = 1e-12


def symplectic_form(modes: int) -> np.ndarray:
    """Standard symplectic form for (X1, P1, ..., Xm, Pm) ordering."""
    omega = np.zeros((2 * modes, 2 * modes))
    for j in range(modes):
        omega[2 * j, 2 * j + 1] = 1.0
        omega[2 * j + 1, 2 * j] = -1.0
    return omega


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def min_physicality_eig(gamma: np.ndarray) -> float:
    """Smallest eigenvalue of Gamma + i*Omega; >= -tol for physical states."""
    m = gamma.shape[0] // 2
    h = gamma.astype(complex) + 1j * symplectic_form(m)
    return float(np.linalg.eigvalsh(h).min())


@dataclass(frozen=True)
class GaussianState:
    """Zero of the hierarchy: first moments d and covariance matrix Gamma."""

    modes: int
    d: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError("mode count must be >= 1")
        d = np.asarray(self.d, dtype=float).reshape(-1)
        gamma = np.asarray(self.gamma, dtype=float)
        n = 2 * self.modes
        if d.shape != (n,) or gamma.shape != (n, n):
            raise ValueError(f"need d of length {n} and Gamma of shape {n}x{n}")
        gamma = 0.5 * (gamma + gamma.T)  # stored exactly symmetric
        low = min_physicality_eig(gamma)
        if low < -PHYSICALITY_TOL:
            raise ValueError(f"unphysical covariance matrix: min eig(Gamma + i Omega) = {low:.3e}")
        object.__setattr__(self, "d", _frozen(d))
        object.__setattr__(self, "gamma", _frozen(gamma))

    def charfun(self, r: np.ndarray) -> complex:
        return gaussian_charfun(self, r)


def make_vacuum(modes: int) -> GaussianState:
    """m-mode vacuum: d = 0, Gamma = identity."""
    if modes < 1:
        raise ValueError("mode count must be >= 1")
    return GaussianState(modes, np.zeros(2 * modes), np.eye(2 * modes))


def gaussian_charfun(state: GaussianState, r: np.ndarray) -> complex:
    """chi(r) = exp(i r.d - r^T Gamma r / 4)."""
    r = np.asarray(r, dtype=float).reshape(-1)
    if r.shape != (2 * state.modes,):
        raise ValueError(f"phase-space vector must have length {2 * state.modes}")
    return complex(np.exp(1j * (r @ state.d) - 0.25 * (r @ state.gamma @ r)))


@dataclass(frozen=True)
class SymplecticMap:
    """Affine phase-space action Q -> M Q + shift of a Gaussian unitary."""

    matrix: np.ndarray
    shift: np.ndarray | None = None

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        n = mat.shape[0]
        if mat.shape != (n, n) or n % 2:
            raise ValueError("symplectic matrix must be square with even dimension")
        omega = symplectic_form(n // 2)
        defect = np.abs(mat @ omega @ mat.T - omega).max()
        if defect > 1e-9:
            raise ValueError(f"matrix is not symplectic: defect {defect:.3e}")
        shift = np.zeros(n) if self.shift is None else np.asarray(self.shift, dtype=float)
        if shift.shape != (n,):
            raise ValueError("shift has wrong length")
        object.__setattr__(self, "matrix", _frozen(mat))
        object.__setattr__(self, "shift", _frozen(shift))

    @property
    def modes(self) -> int:
        return self.matrix.shape[0] // 2

    def apply(self, state: GaussianState) -> GaussianState:
        if state.modes != self.modes:
            raise ValueError("mode count mismatch")
        m = self.matrix
        return GaussianState(state.modes, m @ state.d + self.shift, m @ state.gamma @ m.T)

    def compose(self, other: "SymplecticMap") -> "SymplecticMap":
        """self after other."""
        return SymplecticMap(self.matrix @ other.matrix,
                             self.matrix @ other.shift + self.shift)

    def inverse(self) -> "SymplecticMap":
        inv = np.linalg.inv(self.matrix)
        return SymplecticMap(inv, -inv @ self.shift)


def identity_map(modes: int) -> SymplecticMap:
    return SymplecticMap(np.eye(2 * modes))


def twirl_map(modes: int) -> SymplecticMap:
    """Phase-space action of the parity unitary a -> -a on every mode."""
    return SymplecticMap(-np.eye(2 * modes))


def beam_splitter_map(reflectivity: float, modes_per_side: int = 1) -> SymplecticMap:
    """Pairwise beam splitter mixing A_j with B_j, j = 1..m.

    Transmitted output: sqrt(T) A + sqrt(R) B with T = 1 - R.  The B output
    is sqrt(T) B - sqrt(R) A, the sign completing the map to a symplectic
    one.  Mode ordering of the joint system is (A1..Am, B1..Bm).
    """
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError(f"reflectivity must be in [0, 1], got {reflectivity}")
    t = np.sqrt(1.0 - reflectivity)
    r = np.sqrt(reflectivity)
    m = modes_per_side
    eye = np.eye(2 * m)
    top = np.hstack([t * eye, r * eye])
    bot = np.hstack([-r * eye, t * eye])
    return SymplecticMap(np.vstack([top, bot]))


def partial_transpose_cov(gamma: np.ndarray, b_modes) -> np.ndarray:
    """Sign-flip the P rows/columns of the given modes: Lambda Gamma Lambda."""
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.shape[0]
    if gamma.shape != (n, n) or n % 2:
        raise ValueError("covariance matrix must be square with even dimension")
    signs = np.ones(n)
    for mode in b_modes:
        idx = 2 * mode + 1
        if not 0 <= idx < n:
            raise IndexError(f"mode index {mode} out of range")
        signs[idx] = -1.0
    return gamma * np.outer(signs, signs)


def pt_sign_matrix(modes: int, b_modes) -> np.ndarray:
    """Diagonal matrix implementing the partial transpose on covariances."""
    signs = np.ones(2 * modes)
    for mode in b_modes:
        signs[2 * mode + 1] = -1.0
    return np.diag(signs)


# ---------------------------------------------------------------------------
# symmetric two-mode states: the repeater pipeline's currency
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetricTwoMode:
    """Two-mode state with covariance diag blocks C*I and off blocks (S, -S).

    Physical iff C^2 >= 1 + S^2; pure two-mode squeezed states saturate it.
    """

    c: float
    s: float

    def __post_init__(self):
        if self.c < 0 or self.s < 0:
            raise ValueError("C and S must be nonnegative")
        if self.c * self.c + PHYSICALITY_TOL * max(1.0, self.c * self.c) < 1.0 + self.s * self.s:
            raise ValueError(f"unphysical (C, S) = ({self.c}, {self.s}): C^2 < 1 + S^2")


def make_two_mode_squeezed(r: float) -> SymmetricTwoMode:
    """Pure two-mode squeezed state: C = cosh(2r), S = sinh(2r)."""
    if r < 0:
        raise ValueError("squeezing parameter must be nonnegative")
    return SymmetricTwoMode(np.cosh(2.0 * r), np.sinh(2.0 * r))


def duan_delta(state: SymmetricTwoMode) -> float:
    """EPR uncertainty Delta = C - S; the state is entangled iff Delta < 1."""
    return state.c - state.s


def embed_symmetric(state: SymmetricTwoMode) -> GaussianState:
    """Expand (C, S) into the explicit 4x4 covariance matrix, d = 0."""
    c, s = state.c, state.s
    gamma = np.array([
        [c, 0.0, s, 0.0],
        [0.0, c, 0.0, -s],
        [s, 0.0, c, 0.0],
        [0.0, -s, 0.0, c],
    ])
    return GaussianState(2, np.zeros(4), gamma)


def extract_symmetric(state_or_gamma, tol: float = 1e-8) -> SymmetricTwoMode:
    """Read (C, S) back off a covariance matrix of the symmetric form."""
    gamma = state_or_gamma.gamma if isinstance(state_or_gamma, GaussianState) else np.asarray(state_or_gamma, float)
    if gamma.shape != (4, 4):
        raise ValueError("expected a two-mode covariance matrix")
    c = 0.25 * (gamma[0, 0] + gamma[1, 1] + gamma[2, 2] + gamma[3, 3])
    s = 0.5 * (gamma[0, 2] - gamma[1, 3])
    ref = np.array([
        [c, 0.0, s, 0.0],
        [0.0, c, 0.0, -s],
        [s, 0.0, c, 0.0],
        [0.0, -s, 0.0, c],
    ])
    defect = np.abs(gamma - ref).max()
    if defect > tol * max(1.0, abs(c)):
        raise ValueError(f"covariance matrix is not of the symmetric (C, S) form: defect {defect:.3e}")
    return SymmetricTwoMode(c, s)


# ---------------------------------------------------------------------------
# Gaussian measurement filters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianFilter:
    """Invertible filter Pi = exp(-sum_j beta_j b_j† b_j), b_j = V a_j V†.

    Pi is proportional to a separable zero-mean Gaussian state; P = Pi^(1/2)
    is what multiplies states from both sides in the filtered object.  All
    beta_j must be strictly positive so that Pi stays full rank; a vacuum
    projector is modelled by a large finite beta.  ``mode_unitary`` restricts
    to local (per-mode block-diagonal) symplectic maps, which covers phase
    rotations and single-mode squeezers; None means the Fock-diagonal frame.
    """

    betas: tuple
    mode_unitary: SymplecticMap | None = None

    def __post_init__(self):
        betas = tuple(float(b) for b in np.atleast_1d(np.asarray(self.betas, dtype=float)))
        if any(b <= 0 for b in betas):
            raise ValueError("all filter strengths beta_j must be strictly positive")
        object.__setattr__(self, "betas", betas)
        if self.mode_unitary is not None:
            v = self.mode_unitary
            if v.modes != len(betas):
                raise ValueError("mode unitary acts on the wrong number of modes")
            if np.abs(v.shift).max() > 0:
                raise ValueError("filter frame must have zero displacement")
            mat = v.matrix
            for j in range(v.modes):
                block = mat[2 * j:2 * j + 2, :].copy()
                block[:, 2 * j:2 * j + 2] = 0.0
                if np.abs(block).max() > SYMPLECTIC_TOL:
                    raise ValueError("filter frame must be a local (per-mode) symplectic map")

    @property
    def modes(self) -> int:
        return len(self.betas)

    def _frame_matrix(self) -> np.ndarray:
        if self.mode_unitary is None:
            return np.eye(2 * self.modes)
        return np.asarray(self.mode_unitary.matrix)

    def pi_covariance(self) -> np.ndarray:
        """Covariance matrix of Pi normalized to a state: coth(beta/2) per mode."""
        diag = np.concatenate([[1.0 / np.tanh(b / 2.0)] * 2 for b in self.betas])
        v = self._frame_matrix()
        return v @ np.diag(diag) @ v.T

    def p_covariance(self) -> np.ndarray:
        """Covariance matrix of P = Pi^(1/2) as a state: coth(beta/4) per mode."""
        diag = np.concatenate([[1.0 / np.tanh(b / 4.0)] * 2 for b in self.betas])
        v = self._frame_matrix()
        return v @ np.diag(diag) @ v.T

    def p_eigenvalue(self, occupation) -> float:
        """Eigenvalue of P on the V-frame Fock state |n_1 .. n_m>."""
        ns = np.atleast_1d(np.asarray(occupation, dtype=int))
        if ns.shape != (self.modes,):
            raise ValueError("occupation list must have one entry per mode")
        return float(np.exp(-0.5 * sum(b * n for b, n in zip(self.betas, ns))))


def thermal_filter(beta: float, modes: int = 1) -> GaussianFilter:
    """Isotropic Fock-diagonal filter with the same beta on every mode."""
    return GaussianFilter((beta,) * modes)
