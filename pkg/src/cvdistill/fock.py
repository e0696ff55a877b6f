"""Truncated Fock-space engine: exact (up to cutoff) density-matrix
simulation of every protocol step.

Everything here is brute force on purpose: displacement operators are matrix
exponentials of the truncated quadratures, beam splitters are matrix
exponentials of the truncated two-mode generator, and the post-selected
building block is a dense tensor contraction.  This module is the oracle the
phase-space engine is validated against, so clarity and a quantified
truncation error beat speed.

Multi-mode kets live in the kron/C-order basis: the flat index of
|n_1 .. n_m> is n_1 * d^(m-1) + ... + n_m.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .gaussian import GaussianFilter, SymmetricTwoMode

DEFAULT_CUTOFF = 20
LEAKAGE_HARD = 1e-6
LEAKAGE_WARN = 1e-9
HERMITICITY_TOL = 1e-12
PSD_TOL = 1e-9
TRACE_TOL = 1e-9
WEIGHT_FLOOR = 1e-14


class LeakageError(RuntimeError):
    """Truncation leakage above the hard threshold."""


class DegeneratePostselectionError(RuntimeError):
    """Post-selection weight too small to define an output state."""


# ---------------------------------------------------------------------------
# elementary operators
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def destroy(cutoff: int) -> np.ndarray:
    a = np.zeros((cutoff, cutoff))
    for n in range(1, cutoff):
        a[n - 1, n] = math.sqrt(n)
    return a


def create(cutoff: int) -> np.ndarray:
    return destroy(cutoff).T.copy()


def number_op(cutoff: int) -> np.ndarray:
    return np.diag(np.arange(cutoff, dtype=float))


@lru_cache(maxsize=None)
def quadrature_x(cutoff: int) -> np.ndarray:
    a = destroy(cutoff)
    return (a + a.T) / math.sqrt(2.0)


@lru_cache(maxsize=None)
def quadrature_p(cutoff: int) -> np.ndarray:
    a = destroy(cutoff)
    return 1j * (a.T - a) / math.sqrt(2.0)


def embed_single_mode(op: np.ndarray, mode: int, modes: int, cutoff: int) -> np.ndarray:
    """op on one mode, identity elsewhere, in the flat kron basis."""
    out = np.array([[1.0 + 0j]])
    eye = np.eye(cutoff)
    for j in range(modes):
        out = np.kron(out, op if j == mode else eye)
    return out


def quadrature_list(modes: int, cutoff: int) -> list:
    """The 2m truncated quadratures (X1, P1, ..., Xm, Pm) as full matrices."""
    ops = []
    for j in range(modes):
        ops.append(embed_single_mode(quadrature_x(cutoff), j, modes, cutoff))
        ops.append(embed_single_mode(quadrature_p(cutoff), j, modes, cutoff))
    return ops


# ---------------------------------------------------------------------------
# density matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FockDensityMatrix:
    """Hermitian PSD operator on m modes truncated at ``cutoff`` per mode.

    ``normalized`` distinguishes physical states (trace one) from
    sub-normalized filtered objects mid-pipeline.
    """

    modes: int
    cutoff: int
    data: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        dim = self.cutoff ** self.modes
        data = np.asarray(self.data, dtype=complex)
        if data.shape != (dim, dim):
            raise ValueError(f"data must be {dim}x{dim} for {self.modes} modes at cutoff {self.cutoff}")
        herm = np.abs(data - data.conj().T).max()
        if herm > HERMITICITY_TOL * max(1.0, np.abs(data).max()):
            raise ValueError(f"operator is not Hermitian: defect {herm:.3e}")
        data = 0.5 * (data + data.conj().T)
        low = float(np.linalg.eigvalsh(data).min())
        if low < -PSD_TOL:
            raise ValueError(f"operator is not positive semidefinite: min eig {low:.3e}")
        if self.normalized:
            tr = float(np.real(np.trace(data)))
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValueError(f"state is not normalized: trace {tr}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.cutoff ** self.modes

    def mode_populations(self) -> np.ndarray:
        """Marginal Fock populations, shape (modes, cutoff)."""
        diag = np.real(np.diagonal(self.data)).reshape((self.cutoff,) * self.modes)
        pops = np.empty((self.modes, self.cutoff))
        for j in range(self.modes):
            axes = tuple(k for k in range(self.modes) if k != j)
            pops[j] = diag.sum(axis=axes) if axes else diag
        return pops

    def leakage(self) -> float:
        """Largest population sitting in the top two Fock levels of any mode."""
        pops = self.mode_populations()
        return float((pops[:, -1] + pops[:, -2]).max())

    def element(self, bra, ket) -> complex:
        """<bra| rho |ket> for Fock occupation tuples."""
        return complex(self.data[_flat_index(bra, self.cutoff), _flat_index(ket, self.cutoff)])


def _flat_index(occ, cutoff: int) -> int:
    idx = 0
    for n in np.atleast_1d(occ):
        if not 0 <= n < cutoff:
            raise IndexError(f"occupation {n} outside cutoff {cutoff}")
        idx = idx * cutoff + int(n)
    return idx


def leakage_guard(rho: FockDensityMatrix, hard: float = LEAKAGE_HARD, warn: float = LEAKAGE_WARN) -> float:
    leak = rho.leakage()
    if leak > hard:
        raise LeakageError(f"truncation leakage {leak:.3e} above hard threshold {hard:.1e}")
    if leak > warn:
        warnings.warn(f"truncation leakage {leak:.3e} above {warn:.1e}", stacklevel=2)
    return leak


def _pure(modes: int, cutoff: int, vec: np.ndarray, normalized=True) -> FockDensityMatrix:
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    return FockDensityMatrix(modes, cutoff, np.outer(vec, vec.conj()), normalized=normalized)


def fock_vacuum(modes: int, cutoff: int = DEFAULT_CUTOFF) -> FockDensityMatrix:
    vec = np.zeros(cutoff ** modes)
    vec[0] = 1.0
    return _pure(modes, cutoff, vec)


def fock_basis_state(occ, cutoff: int = DEFAULT_CUTOFF) -> FockDensityMatrix:
    occ = tuple(np.atleast_1d(occ))
    vec = np.zeros(cutoff ** len(occ))
    vec[_flat_index(occ, cutoff)] = 1.0
    return _pure(len(occ), cutoff, vec)


def fock_tmsv(r: float, cutoff: int = DEFAULT_CUTOFF) -> FockDensityMatrix:
    """Two-mode squeezed vacuum sum_n tanh^n(r) |n,n> / cosh(r), renormalized."""
    if r < 0:
        raise ValueError("squeezing parameter must be nonnegative")
    if cutoff < 2:
        raise ValueError("cutoff must be at least 2")
    amps = np.tanh(r) ** np.arange(cutoff)
    vec = np.zeros(cutoff * cutoff)
    vec[np.arange(cutoff) * (cutoff + 1)] = amps
    vec /= np.linalg.norm(vec)
    rho = _pure(2, cutoff, vec)
    leakage_guard(rho)
    return rho


def squeezed_reference(lam: float, cutoff: int = DEFAULT_CUTOFF) -> FockDensityMatrix:
    """Single-mode pure state sum_n lam^n |2n>, normalized; even support only."""
    if not 0.0 < lam < 1.0:
        raise ValueError("weight must lie strictly inside (0, 1)")
    vec = np.zeros(cutoff)
    ns = np.arange(0, cutoff, 2)
    vec[ns] = lam ** (ns // 2)
    vec /= np.linalg.norm(vec)
    rho = _pure(1, cutoff, vec)
    leakage_guard(rho)
    return rho


# ---------------------------------------------------------------------------
# displacements and the characteristic function
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _x_eigensystem(cutoff: int):
    evals, evecs = np.linalg.eigh(quadrature_x(cutoff))
    return evals, evecs.astype(complex)


def displacement_single(rx: float, rp: float, cutoff: int) -> np.ndarray:
    """Single-mode D = exp(i (rx X + rp P)) at the truncated level.

    The truncated generator satisfies rx X + rp P = R(phi) (t X) R(phi)†
    exactly, with t = |r|, phi = atan2(rp, rx) and R the Fock phase
    e^{i phi n}, so its exponential is computed through the cached
    eigensystem of X rather than a fresh expm per call.
    """
    t = math.hypot(rx, rp)
    evals, evecs = _x_eigensystem(cutoff)
    core = (evecs * np.exp(1j * t * evals)) @ evecs.conj().T
    if t == 0.0:
        return core
    phi = math.atan2(rp, rx)
    phase = np.exp(1j * phi * np.arange(cutoff))
    return (phase[:, None] * core) * phase.conj()[None, :]


def displacement(rvec, modes: int, cutoff: int) -> np.ndarray:
    """D(r) = exp(i r.Q): the truncated generator is block-local, so the
    exponential factorizes exactly into a kron of single-mode exponentials."""
    r = np.asarray(rvec, dtype=float).reshape(-1)
    if r.shape != (2 * modes,):
        raise ValueError(f"phase-space vector must have length {2 * modes}")
    out = np.array([[1.0 + 0j]])
    for j in range(modes):
        out = np.kron(out, displacement_single(r[2 * j], r[2 * j + 1], cutoff))
    return out


def charfun_numeric(rho: FockDensityMatrix, rvec) -> complex:
    """chi(r) = tr[D(r) rho] with truncated operators."""
    r = np.asarray(rvec, dtype=float).reshape(-1)
    if r.shape != (2 * rho.modes,):
        raise ValueError(f"phase-space vector must have length {2 * rho.modes}")
    d = rho.cutoff
    if rho.modes == 1:
        d1 = displacement_single(r[0], r[1], d)
        return complex(np.einsum('ij,ji->', d1, rho.data))
    if rho.modes == 2:
        d1 = displacement_single(r[0], r[1], d)
        d2 = displacement_single(r[2], r[3], d)
        rho4 = rho.data.reshape(d, d, d, d)
        return complex(np.einsum('ia,jb,abij->', d1, d2, rho4, optimize=True))
    full = displacement(r, rho.modes, rho.cutoff)
    return complex(np.einsum('ij,ji->', full, rho.data))


def covariance_from_fock(rho: FockDensityMatrix):
    """First and second moments via truncated quadratures; returns (d, Gamma)."""
    leakage_guard(rho)
    quads = quadrature_list(rho.modes, rho.cutoff)
    n = 2 * rho.modes
    d = np.array([np.real(np.trace(q @ rho.data)) for q in quads])
    gamma = np.empty((n, n))
    for j in range(n):
        qj = quads[j] - d[j] * np.eye(rho.dim)
        for k in range(j, n):
            qk = quads[k] - d[k] * np.eye(rho.dim)
            gamma[j, k] = gamma[k, j] = 2.0 * np.real(np.trace(qj @ qk @ rho.data)).item()
    return d, gamma


# ---------------------------------------------------------------------------
# Gaussian state synthesis in Fock space
# ---------------------------------------------------------------------------

def thermal_diag(nu: float, cutoff: int) -> np.ndarray:
    """Populations of the thermal state with quadrature variance nu >= 1."""
    if nu < 1.0 - 1e-12:
        raise ValueError("thermal parameter must satisfy nu >= 1")
    nbar = max(0.0, (nu - 1.0) / 2.0)
    if nbar == 0.0:
        pops = np.zeros(cutoff)
        pops[0] = 1.0
        return pops
    q = nbar / (nbar + 1.0)
    pops = (1.0 - q) * q ** np.arange(cutoff)
    return pops / pops.sum()


@lru_cache(maxsize=None)
def two_mode_squeeze_unitary(g: float, cutoff: int) -> np.ndarray:
    """exp(g (a†b† - ab)) on the flat two-mode basis."""
    a = destroy(cutoff)
    ad = a.T
    gen = g * (np.kron(ad, ad) - np.kron(a, a))
    return expm(gen)


@lru_cache(maxsize=None)
def squeeze_unitary(s: float, cutoff: int) -> np.ndarray:
    """exp(s (a†a† - aa)/2): X -> e^s X, P -> e^-s P."""
    a = destroy(cutoff)
    gen = 0.5 * s * (a.T @ a.T - a @ a)
    return expm(gen)


@lru_cache(maxsize=None)
def rotation_unitary(theta: float, cutoff: int) -> np.ndarray:
    """exp(i theta n): conjugation rotates covariances by
    R(theta) = [[cos, -sin], [sin, cos]]."""
    return np.diag(np.exp(1j * theta * np.arange(cutoff)))


def fock_gaussian_cm2(state: SymmetricTwoMode, cutoff: int = DEFAULT_CUTOFF) -> FockDensityMatrix:
    """Symmetric two-mode Gaussian state (C, S) as a Fock density matrix.

    Decomposition: two-mode squeezing of a symmetric thermal pair,
    C = nu cosh(2g), S = nu sinh(2g) with nu = sqrt(C^2 - S^2).
    """
    c, s = state.c, state.s
    nu = math.sqrt(max(c * c - s * s, 1.0))
    g = 0.5 * math.atanh(s / c) if s > 0 else 0.0
    pops = thermal_diag(nu, cutoff)
    rho_th = np.kron(np.diag(pops), np.diag(pops)).astype(complex)
    u = two_mode_squeeze_unitary(g, cutoff)
    data = u @ rho_th @ u.conj().T
    data /= np.real(np.trace(data))
    rho = FockDensityMatrix(2, cutoff, data)
    leakage_guard(rho)
    return rho


def fock_gaussian_single_mode(gamma: np.ndarray, cutoff: int = DEFAULT_CUTOFF) -> FockDensityMatrix:
    """Single-mode zero-mean Gaussian state from its 2x2 covariance matrix."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (2, 2):
        raise ValueError("expected a 2x2 covariance matrix")
    gamma = 0.5 * (gamma + gamma.T)
    nu = math.sqrt(np.linalg.det(gamma))
    if nu < 1.0 - 1e-9:
        raise ValueError("unphysical covariance matrix: det < 1")
    evals, evecs = np.linalg.eigh(gamma / nu)  # evals = e^{-2s}, e^{+2s}
    s = 0.5 * math.log(evals[1])
    # rotation taking diag(e^{2s}, e^{-2s}) onto gamma/nu; column order puts
    # the stretched axis first
    rot = np.column_stack([evecs[:, 1], evecs[:, 0]])
    if np.linalg.det(rot) < 0:
        rot[:, 1] = -rot[:, 1]
    theta = math.atan2(rot[1, 0], rot[0, 0])
    rho = np.diag(thermal_diag(nu, cutoff)).astype(complex)
    u = rotation_unitary(theta, cutoff) @ squeeze_unitary(s, cutoff)
    data = u @ rho @ u.conj().T
    data /= np.real(np.trace(data))
    out = FockDensityMatrix(1, cutoff, data)
    leakage_guard(out)
    return out


# ---------------------------------------------------------------------------
# filters at the Fock level
# ---------------------------------------------------------------------------

def _local_frame_unitary(filt: GaussianFilter, cutoff: int) -> np.ndarray | None:
    """Fock unitary of the filter's local symplectic frame, or None for identity."""
    if filt.mode_unitary is None:
        return None
    mat = np.asarray(filt.mode_unitary.matrix)
    out = np.array([[1.0 + 0j]])
    for j in range(filt.modes):
        block = mat[2 * j:2 * j + 2, 2 * j:2 * j + 2]
        # Euler form block = R(t1) diag(e^s, e^-s) R(t2) via SVD with
        # rotations forced into SO(2)
        u, sv, vt = np.linalg.svd(block)
        if np.linalg.det(u) < 0:
            u[:, 1] = -u[:, 1]
            sv = sv.copy()
            vt = vt.copy()
            vt[1, :] = -vt[1, :]
        t1 = math.atan2(u[1, 0], u[0, 0])
        t2 = math.atan2(vt[1, 0], vt[0, 0])
        s = math.log(sv[0])
        uj = rotation_unitary(t1, cutoff) @ squeeze_unitary(s, cutoff) @ rotation_unitary(t2, cutoff)
        out = np.kron(out, uj)
    return out


def filter_matrix(filt: GaussianFilter, cutoff: int, half: bool = True) -> np.ndarray:
    """P = exp(-(1/2) sum beta_j n_j) in the V-rotated frame (Pi for half=False)."""
    scale = 0.5 if half else 1.0
    diag = np.array([1.0])
    for beta in filt.betas:
        diag = np.kron(diag, np.exp(-scale * beta * np.arange(cutoff)))
    v = _local_frame_unitary(filt, cutoff)
    if v is None:
        return np.diag(diag).astype(complex)
    return v @ np.diag(diag).astype(complex) @ v.conj().T


def filtered_object(rho: FockDensityMatrix, filt: GaussianFilter):
    """tau = P rho P / tr(P rho P); the object obeying the chi-product rule."""
    if filt.modes != rho.modes:
        raise ValueError("filter acts on the wrong number of modes")
    p = filter_matrix(filt, rho.cutoff, half=True)
    raw = p @ rho.data @ p.conj().T
    weight = float(np.real(np.trace(raw)))
    if weight <= WEIGHT_FLOOR:
        raise DegeneratePostselectionError(f"filtered trace {weight:.3e} vanishes")
    return FockDensityMatrix(rho.modes, rho.cutoff, raw / weight)


def unfilter_object(tau: FockDensityMatrix, filt: GaussianFilter) -> FockDensityMatrix:
    """rho = P^-1 tau P^-1 renormalized; inverse of filtered_object."""
    p_inv = filter_matrix(filt, tau.cutoff, half=True)
    p_inv = np.linalg.inv(p_inv)
    raw = p_inv @ tau.data @ p_inv.conj().T
    tr = float(np.real(np.trace(raw)))
    return FockDensityMatrix(tau.modes, tau.cutoff, raw / tr)


# ---------------------------------------------------------------------------
# beam splitters and the protocol building block
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def beam_splitter_unitary(reflectivity: float, cutoff: int) -> np.ndarray:
    """exp(theta (a†b - ab†)) with sin(theta) = sqrt(R), on the flat (a, b) basis.

    Heisenberg action: a -> sqrt(T) a + sqrt(R) b, b -> sqrt(T) b - sqrt(R) a,
    matching the covariance-level beam_splitter_map.
    """
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError("reflectivity must be in [0, 1]")
    theta = math.asin(math.sqrt(reflectivity))
    a = destroy(cutoff)
    gen = theta * (np.kron(a.T, a) - np.kron(a, a.T))
    return expm(gen)


def _factorize(rho: FockDensityMatrix, rank_tol: float) -> np.ndarray:
    """Cholesky-like factor L with rho ~= L L†, eigenvalues below a cumulative
    mass of rank_tol dropped."""
    evals, evecs = np.linalg.eigh(rho.data)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    evals = np.clip(evals, 0.0, None)
    total = evals.sum()
    keep = evals.cumsum() <= total * (1.0 - rank_tol)
    if keep.size:
        keep[min(keep.sum(), keep.size - 1)] = True  # include the crossing eigenvalue
    keep &= evals > 0
    return evecs[:, keep] * np.sqrt(evals[keep])


def _bs_output_level_cap(rho_a, rho_b, filt, drop_tol: float) -> int:
    """Largest joint B-output photon number worth keeping.

    The beam splitter conserves total photon number, so the joint level
    distribution of the measured B output is bounded by that of the inputs;
    the Pi weight additionally suppresses level s by exp(-beta_min * s).
    Levels whose combined bound falls below drop_tol are dropped.
    """
    def total_level_pops(rho):
        pops = rho.mode_populations()
        conv = pops[0]
        for j in range(1, rho.modes):
            conv = np.convolve(conv, pops[j])
        return conv

    joint = np.convolve(total_level_pops(rho_a), total_level_pops(rho_b))
    tail = np.minimum(joint[::-1].cumsum()[::-1],
                      np.exp(-min(filt.betas) * np.arange(joint.size)))
    keep = np.nonzero(tail > drop_tol)[0]
    return int(keep[-1]) if keep.size else 0


def building_block(rho_a: FockDensityMatrix, rho_b: FockDensityMatrix,
                   reflectivity: float, filt: GaussianFilter,
                   rank_tol: float = 1e-12, drop_tol: float = 1e-14):
    """One protocol step: beam splitter, filtered measurement, post-selection.

    Mixes rho_A and rho_B pairwise on beam splitters of the given
    reflectivity, measures the B outputs with the POVM encoded by the filter
    Pi, and traces them out:

        rho' ~ tr_B[ U (rho_A x rho_B) U† (1 x Pi) ]

    Returns the renormalized output together with the relative post-selection
    weight tr[...] (not a calibrated success probability).
    """
    if rho_a.modes != rho_b.modes or rho_a.cutoff != rho_b.cutoff:
        raise ValueError("input states must share mode count and cutoff")
    if filt.modes != rho_a.modes:
        raise ValueError("filter acts on the wrong number of modes")
    m, d = rho_a.modes, rho_a.cutoff

    fa = _factorize(rho_a, rank_tol)
    fb = _factorize(rho_b, rank_tol)
    ra, rb = fa.shape[1], fb.shape[1]

    if filt.mode_unitary is None:
        level_cap = _bs_output_level_cap(rho_a, rho_b, filt, drop_tol)
    else:
        level_cap = 2 * (d - 1)  # frame may not conserve photon number
    bo = min(d, level_cap + 1)  # per-mode B-output range

    u = beam_splitter_unitary(reflectivity, d).reshape(d, d, d, d)  # [a_out, b_out, a_in, b_in]
    u_slices = []
    for j in range(m):
        uj = u
        if filt.mode_unitary is not None:
            # rotate the measured output into the filter's Fock-diagonal frame
            vj = _local_frame_unitary(
                GaussianFilter((filt.betas[j],),
                               _single_mode_submap(filt.mode_unitary, j)), d)
            uj = np.einsum('xy,aybc->axbc', vj.conj().T, u)
        u_slices.append(np.ascontiguousarray(uj[:, :bo, :, :]))

    fa_t = fa.reshape((d,) * m + (ra,))
    fb_t = fb.reshape((d,) * m + (rb,))
    out = np.zeros((d ** m, d ** m), dtype=complex)

    if m == 1:
        levels = np.arange(bo, dtype=float)
        pi_diag = np.exp(-filt.betas[0] * levels)
        pi_diag[levels > level_cap] = 0.0
        # M[a_out, b_out, i, j] = sum U[a_out,b_out,a_in,b_in] FA[a_in,i] FB[b_in,j]
        mtens = np.einsum('xyab,ai,bj->xyij', u_slices[0], fa_t, fb_t)
        y = (mtens * np.sqrt(pi_diag)[None, :, None, None]).reshape(d, -1)
        out = y @ y.conj().T
    elif m == 2:
        u1, u2 = u_slices
        b1, b2 = np.meshgrid(np.arange(bo), np.arange(bo), indexing='ij')
        pi_diag = np.exp(-(filt.betas[0] * b1 + filt.betas[1] * b2))
        pi_diag[b1 + b2 > level_cap] = 0.0
        sqrt_pi = np.sqrt(pi_diag)
        # t1[a1, b1o, b1in, a2in, i]: mode-1 splitter against the A factor
        t1 = np.einsum('xycd,cei->xydei', u1, fa_t)
        t1 = np.ascontiguousarray(t1.transpose(0, 1, 4, 3, 2))  # [a1,b1o,i,a2in,b1in]
        # batch over B-factor columns to bound the intermediate size
        chunk = max(1, int(1e7 // (d * bo * d * bo * max(ra, 1))))
        for j0 in range(0, rb, chunk):
            fb_c = fb_t[:, :, j0:j0 + chunk]                       # [b1in, b2in, j]
            cj = fb_c.shape[2]
            # g[a2, b2o, a2in, b1in, j]: mode-2 splitter against the B factor
            g = np.einsum('zwef,dfj->zwedj', u2, fb_c)
            # contract the shared (a2in, b1in) pair
            t1m = t1.reshape(d * bo * ra, d * d)
            gm = g.transpose(2, 3, 0, 1, 4).reshape(d * d, d * bo * cj)
            mm = (t1m @ gm).reshape(d, bo, ra, d, bo, cj)
            mm = mm.transpose(0, 3, 1, 4, 2, 5)  # [a1, a2, b1o, b2o, i, j]
            y = (mm * sqrt_pi[None, None, :, :, None, None]).reshape(d * d, -1)
            out += y @ y.conj().T
    else:
        raise NotImplementedError("building blocks implemented for 1 and 2 modes per side")

    weight = float(np.real(np.trace(out)))
    if weight <= WEIGHT_FLOOR:
        raise DegeneratePostselectionError(f"post-selection weight {weight:.3e} vanishes")
    return FockDensityMatrix(m, d, out / weight), weight


def _single_mode_submap(v, j):
    from .gaussian import SymplecticMap
    block = np.asarray(v.matrix)[2 * j:2 * j + 2, 2 * j:2 * j + 2]
    return SymplecticMap(block)


def gaussify(rho1: FockDensityMatrix, rounds: int, filt: GaussianFilter,
             reflectivity: float = 0.5, rank_tol: float = 1e-12):
    """Iterate the recursive protocol: rho_{2N} = block(rho_N, rho_N)."""
    rho = rho1
    for _ in range(rounds):
        rho, _ = building_block(rho, rho, reflectivity, filt, rank_tol=rank_tol)
    return rho


def pump(rho1: FockDensityMatrix, steps: int, filt: GaussianFilter,
         rank_tol: float = 1e-12):
    """Iterate the pumping protocol with reflectivity 1/(N+1) at step N."""
    rho = rho1
    for n in range(1, steps + 1):
        rho, _ = building_block(rho, rho1, 1.0 / (n + 1), filt, rank_tol=rank_tol)
    return rho


# ---------------------------------------------------------------------------
# de-Gaussification, losses, twirling
# ---------------------------------------------------------------------------

def photon_replacement_kraus(eta: float, cutoff: int) -> np.ndarray:
    """Diagonal Kraus operator of single-photon replacement at amplitude
    transmittivity eta: mix with an ancilla photon on a beam splitter of
    transmittivity eta^2 and detect exactly one photon on the reflected port.

    kappa_n = eta^(n-1) (eta^2 - n (1 - eta^2)).
    """
    n = np.arange(cutoff, dtype=float)
    with np.errstate(divide='ignore'):
        kappa = eta ** (n - 1) * (eta * eta - n * (1.0 - eta * eta))
    kappa[0] = eta
    return np.diag(kappa)


def photon_replacement(rho: FockDensityMatrix, eta: float):
    """Symmetric single-photon replacement on both modes of an entangled pair.

    The Kraus operator is diagonal in the Fock basis, which is what keeps the
    epsilon invariant unchanged.  Returns (state, weight).
    """
    if not 0.0 < eta < 1.0:
        raise ValueError("transmittivity amplitude must lie strictly inside (0, 1)")
    if rho.modes != 2:
        raise ValueError("symmetric photon replacement acts on two-mode states")
    k = photon_replacement_kraus(eta, rho.cutoff)
    kk = np.kron(k, k)
    raw = kk @ rho.data @ kk.conj().T
    weight = float(np.real(np.trace(raw)))
    if weight <= WEIGHT_FLOOR:
        raise DegeneratePostselectionError("photon replacement weight vanishes")
    return FockDensityMatrix(2, rho.cutoff, raw / weight), weight


def thermal_loss_channel(rho: FockDensityMatrix, transmittance: float,
                         n_th: float = 0.0, ancilla_in_dim: int = 3) -> FockDensityMatrix:
    """Attenuation with a thermal environment applied to every mode.

    Each mode is mixed with a thermal ancilla of mean occupation n_th on a
    beam splitter of the given transmittance and the ancilla is traced out;
    on covariances this is Gamma -> T Gamma + (1-T)(1+2 n_th) I.  The
    ancilla input is truncated at ancilla_in_dim levels (exact to
    O(n_th^ancilla_in_dim)); its output runs over the full cutoff so that
    any number of lost photons is accounted for.
    """
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError("transmittance must be in [0, 1]")
    d = rho.cutoff
    adim_in = min(ancilla_in_dim, d)
    anc = thermal_diag(1.0 + 2.0 * n_th, adim_in)
    theta = math.acos(math.sqrt(transmittance))
    a = destroy(d)
    gen = theta * (np.kron(a.T, a) - np.kron(a, a.T))
    u = expm(gen).reshape(d, d, d, d)  # [sys_out, anc_out, sys_in, anc_in]
    data = rho.data
    for mode in range(rho.modes):
        data = _apply_loss_single_mode(data, mode, rho.modes, d, u, anc, adim_in)
    return FockDensityMatrix(rho.modes, d, data)


def _apply_loss_single_mode(data, mode, modes, d, u, anc, adim_in):
    full = data.reshape((d,) * modes * 2)
    # move the target mode axes to the front on both sides
    src = (mode, modes + mode)
    full = np.moveaxis(full, src, (0, 1))
    rest = full.shape[2:]
    full = full.reshape(d, d, -1)
    # Kraus family K_{k,j} = sqrt(p_j) <k|U|j>_ancilla; k runs over every
    # possible number of lost photons
    out = np.zeros_like(full)
    for j in range(adim_in):
        if anc[j] == 0.0:
            continue
        kraus = u[:, :, :, j]  # [sys_out, anc_out = photons lost, sys_in]
        out += anc[j] * np.einsum('xka,abr,ykb->xyr', kraus, full, kraus.conj(),
                                  optimize=True)
    out = out.reshape((d, d) + rest)
    out = np.moveaxis(out, (0, 1), src)
    return out.reshape(d ** modes, d ** modes)


def parity_unitary(modes: int, cutoff: int) -> np.ndarray:
    diag = np.array([1.0])
    for _ in range(modes):
        diag = np.kron(diag, (-1.0) ** np.arange(cutoff))
    return np.diag(diag)


def twirl(rho: FockDensityMatrix) -> FockDensityMatrix:
    """T(rho) = (rho + U_T rho U_T†)/2 with U_T the parity a -> -a on all modes.

    Kills all odd moments, leaves even moments (and Gamma) unchanged.
    """
    u = parity_unitary(rho.modes, rho.cutoff)
    data = 0.5 * (rho.data + u @ rho.data @ u)
    return FockDensityMatrix(rho.modes, rho.cutoff, data, normalized=rho.normalized)


# ---------------------------------------------------------------------------
# moments and reference-state dominance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentSpec:
    """Ordered product of quadrature directions: H = prod_j (r_j . Q)."""

    factors: tuple

    def __post_init__(self):
        factors = tuple(np.asarray(f, dtype=float).reshape(-1) for f in self.factors)
        if not factors:
            raise ValueError("need at least one factor")
        if any(np.linalg.norm(f) == 0 for f in factors):
            raise ValueError("factors must be nonzero")
        object.__setattr__(self, "factors", factors)

    @staticmethod
    def power(direction, k: int) -> "MomentSpec":
        return MomentSpec(tuple(direction for _ in range(k)))


def moment(rho: FockDensityMatrix, spec: MomentSpec) -> complex:
    """tr(H_1 ... H_k rho) with the ordered product of quadrature factors."""
    leakage_guard(rho)
    quads = quadrature_list(rho.modes, rho.cutoff)
    op = np.eye(rho.dim, dtype=complex)
    for f in spec.factors:
        if f.shape != (2 * rho.modes,):
            raise ValueError("factor has the wrong length")
        h = sum(c * q for c, q in zip(f, quads))
        op = op @ h
    return complex(np.trace(op @ rho.data))


def _normally_ordered_ops(modes: int, cutoff: int, degree: int):
    """All b†^p b^q products of total degree ``degree`` across modes."""
    a = destroy(cutoff)
    ad = a.T
    singles = {}

    def single(p, q):
        if (p, q) not in singles:
            op = np.linalg.matrix_power(ad, p) @ np.linalg.matrix_power(a, q)
            singles[(p, q)] = op
        return singles[(p, q)]

    def compositions(total, slots):
        if slots == 1:
            yield (total,)
            return
        for head in range(total + 1):
            for tail in compositions(total - head, slots - 1):
                yield (head,) + tail

    ops = []
    for degrees in compositions(degree, modes):
        for ps in compositions_list(degrees):
            op = np.array([[1.0 + 0j]])
            label = []
            for j, (p, q) in enumerate(ps):
                op = np.kron(op, single(p, q))
                label.append((p, q))
            ops.append((tuple(label), op))
    return ops


def compositions_list(degrees):
    """Split each per-mode degree into (p, q) with p + q = degree."""
    if not degrees:
        yield ()
        return
    head, rest = degrees[0], degrees[1:]
    for p in range(head + 1):
        for tail in compositions_list(rest):
            yield ((p, head - p),) + tail


@dataclass(frozen=True)
class DominanceReport:
    k_max: int
    per_degree: tuple  # (k, passed, worst_margin, worst_label)

    @property
    def passed(self) -> bool:
        return all(row[1] for row in self.per_degree)


def reference_dominance_check(tau: FockDensityMatrix, tau_ref: FockDensityMatrix,
                              filt: GaussianFilter, k_max: int,
                              tol: float = 1e-10) -> DominanceReport:
    """Check the two reference-state conditions degree by degree.

    For every normally ordered product O of the filter-frame ladder operators
    with total degree k <= k_max:
      (i)  |tr(O tau)| <= |tr(O tau_ref)|;
      (ii) tr(O tau_ref) is real and nonnegative.
    Only normally ordered products need checking; general products are
    positive sums of them.  Report-only: never raises on failure.
    """
    if tau.modes != tau_ref.modes or tau.cutoff != tau_ref.cutoff:
        raise ValueError("states must share shape")
    frame = _local_frame_unitary(filt, tau.cutoff)
    data = tau.data if frame is None else frame.conj().T @ tau.data @ frame
    data_ref = tau_ref.data if frame is None else frame.conj().T @ tau_ref.data @ frame
    rows = []
    for k in range(1, k_max + 1):
        worst = 0.0
        worst_label = None
        ok = True
        for label, op in _normally_ordered_ops(tau.modes, tau.cutoff, k):
            val = complex(np.trace(op @ data))
            ref = complex(np.trace(op @ data_ref))
            # (ii): reference moments must be genuinely nonnegative reals
            if abs(ref.imag) > tol or ref.real < -tol:
                ok = False
                margin = -max(abs(ref.imag), -ref.real)
            else:
                margin = ref.real - abs(val)
                if margin < -tol:
                    ok = False
            if worst_label is None or margin < worst:
                worst = margin
                worst_label = label
        rows.append((k, ok, worst, worst_label))
    return DominanceReport(k_max, tuple(rows))


# ---------------------------------------------------------------------------
# fidelity and two-mode sector diagnostics
# ---------------------------------------------------------------------------

def _psd_sqrt(data: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(data)
    evals = np.clip(evals, 0.0, None)
    return (evecs * np.sqrt(evals)) @ evecs.conj().T


def fidelity(rho1: FockDensityMatrix, rho2: FockDensityMatrix) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2.

    Evaluated as the squared trace norm of sqrt(rho1) sqrt(rho2): singular
    values carry no square-root amplification of eigenvalue roundoff.
    """
    if rho1.dim != rho2.dim:
        raise ValueError("dimension mismatch")
    cross = _psd_sqrt(rho1.data) @ _psd_sqrt(rho2.data)
    return float(np.linalg.svd(cross, compute_uv=False).sum() ** 2)


def epsilon_fock(rho: FockDensityMatrix, tol: float = 1e-14):
    """epsilon(rho) = <1,0|rho|1,0> / <1,1|rho|0,0>; +inf when the
    denominator vanishes (the S = 0 singular case)."""
    if rho.modes != 2:
        raise ValueError("epsilon is defined for two-mode states")
    num = rho.element((1, 0), (1, 0))
    den = rho.element((1, 1), (0, 0))
    if abs(den) < tol:
        return math.inf
    return float(np.real(num / den))


def lambda_fock(rho: FockDensityMatrix) -> float:
    """Entanglement-sector ratio <1,1|rho|0,0> / <0,0|rho|0,0>.

    For a pure two-mode squeezed state this equals tanh(r); together with
    epsilon it pins the Gaussian state a vacuum-filter Gaussifier converges to.
    """
    if rho.modes != 2:
        raise ValueError("lambda ratio is defined for two-mode states")
    return float(np.real(rho.element((1, 1), (0, 0)) / rho.element((0, 0), (0, 0))))
