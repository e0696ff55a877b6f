import math

import numpy as np
import pytest

from cvdistill import channels
from cvdistill.fock import (DegeneratePostselectionError, FockDensityMatrix,
                            LeakageError, MomentSpec, beam_splitter_unitary,
                            building_block, charfun_numeric,
                            covariance_from_fock, displacement, epsilon_fock,
                            fidelity, filter_matrix, filtered_object,
                            fock_basis_state, fock_gaussian_cm2,
                            fock_gaussian_single_mode, fock_tmsv, fock_vacuum,
                            lambda_fock, moment, photon_replacement,
                            reference_dominance_check, squeezed_reference,
                            thermal_loss_channel, twirl, unfilter_object)
from cvdistill.gaussian import (SymmetricTwoMode, embed_symmetric,
                                make_two_mode_squeezed, thermal_filter)

X_DIR = np.array([1.0, 0.0])


class TestTmsv:
    def test_r_zero_is_vacuum(self):
        rho = fock_tmsv(0.0, 8)
        assert rho.data[0, 0] == pytest.approx(1.0)
        assert np.abs(rho.data).sum() == pytest.approx(1.0)

    def test_covariance_matches_closed_form(self):
        _, gamma = covariance_from_fock(fock_tmsv(0.5, 30))
        want = embed_symmetric(make_two_mode_squeezed(0.5)).gamma
        assert np.abs(gamma - want).max() < 1e-6

    def test_pure(self):
        rho = fock_tmsv(0.5, 25)
        assert np.real(np.trace(rho.data @ rho.data)) == pytest.approx(1.0, abs=1e-10)

    def test_leakage_error(self):
        with pytest.raises(LeakageError):
            fock_tmsv(2.0, 6)


class TestCharfun:
    def test_unit_trace_at_origin(self):
        rho = fock_tmsv(0.3, 12)
        assert charfun_numeric(rho, np.zeros(4)) == pytest.approx(1.0)

    def test_vacuum_pin(self):
        val = charfun_numeric(fock_vacuum(1, 20), [2.0, 0.0])
        assert val == pytest.approx(math.exp(-1.0), abs=1e-8)

    def test_single_photon_laguerre_form(self):
        # chi_|1>(r) = (1 - |r|^2/2) e^{-|r|^2/4}: Laguerre L_1 closed form
        rho = fock_basis_state((1,), 25)
        rng = np.random.default_rng(3)
        for _ in range(10):
            r = rng.uniform(-2.0, 2.0, size=2)
            rr = r @ r
            want = (1.0 - rr / 2.0) * math.exp(-rr / 4.0)
            assert charfun_numeric(rho, r) == pytest.approx(want, abs=1e-8)

    def test_displacement_unitary(self):
        d = displacement([0.3, -0.7], 1, 18)
        assert np.abs(d @ d.conj().T - np.eye(18)).max() < 1e-12


class TestCovariance:
    def test_vacuum(self):
        d, gamma = covariance_from_fock(fock_vacuum(2, 10))
        assert np.abs(d).max() < 1e-10
        assert np.abs(gamma - np.eye(4)).max() < 1e-10

    def test_tmsv_pattern(self):
        _, gamma = covariance_from_fock(fock_tmsv(0.4, 30))
        want = embed_symmetric(make_two_mode_squeezed(0.4)).gamma
        assert np.abs(gamma - want).max() < 1e-6


class TestGaussianSynthesis:
    def test_cm2_reproduces_covariance(self):
        s = SymmetricTwoMode(1.4, 0.8)
        _, gamma = covariance_from_fock(fock_gaussian_cm2(s, 24))
        assert np.abs(gamma - embed_symmetric(s).gamma).max() < 1e-8

    def test_cm2_matches_tmsv_when_pure(self):
        a = fock_gaussian_cm2(make_two_mode_squeezed(0.3), 20)
        b = fock_tmsv(0.3, 20)
        assert fidelity(a, b) == pytest.approx(1.0, abs=1e-9)

    def test_single_mode_general_covariance(self):
        gamma = np.array([[2.1, 0.4], [0.4, 0.7]])  # det > 1, rotated squeeze
        rho = fock_gaussian_single_mode(gamma, 30)
        _, out = covariance_from_fock(rho)
        assert np.abs(out - gamma).max() < 1e-7

    def test_vacuum_overlap_formula(self):
        # <0|rho|0> = 2 / sqrt(det(Gamma + I)) for zero-mean single-mode states
        gamma = np.array([[1.8, 0.3], [0.3, 0.9]])
        rho = fock_gaussian_single_mode(gamma, 30)
        want = 2.0 / math.sqrt(np.linalg.det(gamma + np.eye(2)))
        assert rho.data[0, 0].real == pytest.approx(want, abs=1e-9)


class TestBuildingBlock:
    def test_vacuum_fixed_point(self, thermal_filter_1):
        vac = fock_vacuum(1, 10)
        for refl in (0.2, 0.5, 0.8):
            out, weight = building_block(vac, vac, refl, thermal_filter_1)
            assert out.data[0, 0].real == pytest.approx(1.0, abs=1e-12)
            assert weight == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_fixed_point(self, thermal_filter_2):
        rho = fock_tmsv(0.4, 16)
        out, _ = building_block(rho, rho, 0.5, thermal_filter_2)
        assert fidelity(out, rho) == pytest.approx(1.0, abs=1e-6)

    def test_weight_monotone_in_beta(self, replaced_tmsv_20):
        weights = []
        for beta in (0.5, 1.0, 2.0, 4.0):
            _, w = building_block(replaced_tmsv_20, replaced_tmsv_20, 0.5,
                                  thermal_filter(beta, 2))
            weights.append(w)
        assert all(b <= a + 1e-12 for a, b in zip(weights, weights[1:]))

    def test_degenerate_postselection(self):
        # orthogonal-support inputs through a projector-like filter
        one = fock_basis_state((8,), 10)
        with pytest.raises(DegeneratePostselectionError):
            building_block(one, one, 0.0, thermal_filter(400.0, 1))

    def test_mode_mismatch(self, thermal_filter_1):
        with pytest.raises(ValueError):
            building_block(fock_vacuum(1, 10), fock_vacuum(1, 8), 0.5, thermal_filter_1)

    def test_beam_splitter_unitary_is_unitary(self):
        u = beam_splitter_unitary(0.3, 8)
        assert np.abs(u @ u.conj().T - np.eye(64)).max() < 1e-12


class TestFilteredObject:
    def test_vacuum_eigenstate(self, thermal_filter_1):
        tau = filtered_object(fock_vacuum(1, 10), thermal_filter_1)
        assert tau.data[0, 0].real == pytest.approx(1.0, abs=1e-12)

    def test_identity_limit(self):
        rho = fock_tmsv(0.4, 16)
        tau = filtered_object(rho, thermal_filter(1e-8, 2))
        assert fidelity(tau, rho) == pytest.approx(1.0, abs=1e-6)

    def test_unfilter_inverts(self, replaced_tmsv_20, thermal_filter_2):
        tau = filtered_object(replaced_tmsv_20, thermal_filter_2)
        back = unfilter_object(tau, thermal_filter_2)
        assert fidelity(back, replaced_tmsv_20) == pytest.approx(1.0, abs=1e-9)

    def test_vanishing_trace_raises(self):
        # a high Fock state crushed by a near-projector filter has no mass left
        with pytest.raises(DegeneratePostselectionError):
            filtered_object(fock_basis_state((9,), 12), thermal_filter(400.0, 1))

    def test_covariance_matches_schur_channel(self, thermal_filter_2):
        # independent covariance-level route through the Choi blocks
        tau = filtered_object(fock_tmsv(0.5, 28), thermal_filter_2)
        _, gamma = covariance_from_fock(tau)
        ch = channels.filter_channel_cj(thermal_filter_2)
        want = channels.apply_gaussian_channel(
            ch, embed_symmetric(make_two_mode_squeezed(0.5)).gamma)
        assert np.abs(gamma - want).max() < 1e-6


class TestPhotonReplacement:
    def test_vacuum_stays_separable(self):
        out, _ = photon_replacement(fock_vacuum(2, 10), 0.6)
        assert out.data[0, 0].real == pytest.approx(1.0, abs=1e-12)
        assert epsilon_fock(out) == math.inf  # S = 0 sentinel

    def test_epsilon_invariant_after_loss(self):
        rho = thermal_loss_channel(fock_tmsv(0.3, 20), math.exp(-1.0), 1e-8)
        before = epsilon_fock(rho)
        out, _ = photon_replacement(rho, 0.55)
        assert epsilon_fock(out) == pytest.approx(before, abs=1e-8)

    def test_element_ratio_matches_closed_form(self):
        # lossy pair at l = 22 km: epsilon from matrix elements equals the
        # (C^2 - S^2 - 1)/(2S) value of the transmitted covariance matrix
        t = math.exp(-1.0)
        rho = thermal_loss_channel(fock_tmsv(0.3, 22), t, 1e-8)
        c = t * math.cosh(0.6) + (1 + 2e-8) * (1 - t)
        s = t * math.sinh(0.6)
        want = (c * c - s * s - 1.0) / (2.0 * s)
        assert epsilon_fock(rho) == pytest.approx(want, abs=1e-6)
        out, _ = photon_replacement(rho, 0.45)
        assert epsilon_fock(out) == pytest.approx(want, abs=1e-6)

    def test_lambda_ratio_of_pure_pair(self):
        assert lambda_fock(fock_tmsv(0.4, 20)) == pytest.approx(math.tanh(0.4), abs=1e-12)

    def test_eta_range(self):
        with pytest.raises(ValueError):
            photon_replacement(fock_vacuum(2, 8), 1.0)

    def test_zero_weight_raises(self):
        # at eta^2 = 1/2 the single-photon Kraus eigenvalue vanishes
        pair = fock_basis_state((1, 1), 8)
        with pytest.raises(DegeneratePostselectionError):
            photon_replacement(pair, math.sqrt(0.5))


class TestLossChannel:
    def test_identity_at_full_transmittance(self):
        rho = fock_tmsv(0.3, 14)
        out = thermal_loss_channel(rho, 1.0, 0.0)
        assert fidelity(out, rho) == pytest.approx(1.0, abs=1e-10)

    def test_covariance_action(self):
        t, nth = 0.55, 0.01
        out = thermal_loss_channel(fock_tmsv(0.3, 22), t, nth, ancilla_in_dim=7)
        _, gamma = covariance_from_fock(out)
        want = t * embed_symmetric(make_two_mode_squeezed(0.3)).gamma \
            + (1 - t) * (1 + 2 * nth) * np.eye(4)
        assert np.abs(gamma - want).max() < 1e-8

    def test_matches_direct_synthesis(self):
        t = math.exp(-2.0)
        lossy = thermal_loss_channel(fock_tmsv(0.5, 24), t, 0.0)
        exact = fock_gaussian_cm2(SymmetricTwoMode(
            t * math.cosh(1.0) + (1 - t), t * math.sinh(1.0)), 24)
        assert fidelity(lossy, exact) == pytest.approx(1.0, abs=1e-7)


class TestTwirl:
    def _displaced_vacuum(self, cutoff=18):
        d = displacement([0.9, -0.4], 1, cutoff)
        vec = d[:, 0]
        return FockDensityMatrix(1, cutoff, np.outer(vec, vec.conj()))

    def _odd_zero_mean_state(self, cutoff=20):
        # |0> + |3> has zero first moments but a nonzero third moment
        vec = np.zeros(cutoff)
        vec[0] = vec[3] = 1.0 / math.sqrt(2.0)
        return FockDensityMatrix(1, cutoff, np.outer(vec, vec))

    def test_idempotent(self):
        rho = self._displaced_vacuum()
        once = twirl(rho)
        twice = twirl(once)
        assert np.abs(once.data - twice.data).max() < 1e-14

    def test_kills_first_moments(self):
        out = twirl(self._displaced_vacuum())
        d, _ = covariance_from_fock(out)
        assert np.abs(d).max() < 1e-12

    def test_odd_moments_vanish_even_preserved(self):
        rho = self._odd_zero_mean_state()
        assert abs(moment(rho, MomentSpec.power(X_DIR, 3))) > 0.1  # genuinely odd
        out = twirl(rho)
        for k in (1, 3, 5):
            assert abs(moment(out, MomentSpec.power(X_DIR, k))) < 1e-12
        before = moment(rho, MomentSpec.power(X_DIR, 2))
        after = moment(out, MomentSpec.power(X_DIR, 2))
        assert after == pytest.approx(before, abs=1e-12)

    def test_covariance_of_zero_mean_state_untouched(self):
        rho = self._odd_zero_mean_state()
        _, before = covariance_from_fock(rho)
        _, after = covariance_from_fock(twirl(rho))
        assert np.abs(before - after).max() < 1e-10


class TestMoments:
    def test_vacuum_variance(self):
        assert moment(fock_vacuum(1, 10), MomentSpec.power(X_DIR, 2)).real \
            == pytest.approx(0.5, abs=1e-12)

    def test_vacuum_fourth_moment(self):
        # Wick: (4-1)!! * (1/2)^2
        assert moment(fock_vacuum(1, 10), MomentSpec.power(X_DIR, 4)).real \
            == pytest.approx(0.75, abs=1e-12)

    def test_vacuum_odd_vanishes(self):
        for k in (1, 3, 5):
            assert abs(moment(fock_vacuum(1, 12), MomentSpec.power(X_DIR, k))) < 1e-13

    def test_ordered_product_complex(self):
        # tr(X P rho) on vacuum = i/2 from the commutator
        spec = MomentSpec((np.array([1.0, 0.0]), np.array([0.0, 1.0])))
        assert moment(fock_vacuum(1, 10), spec) == pytest.approx(0.5j, abs=1e-12)

    def test_wick_closure_gaussian_states(self):
        # identical-factor moments close under (k-1)!! <H^2>^(k/2)
        direction = np.array([0.6, 0.2, -0.4, 0.7])
        rho = fock_gaussian_cm2(SymmetricTwoMode(1.3, 0.6), 26)
        second = moment(rho, MomentSpec.power(direction, 2)).real
        for k, dfact in ((2, 1.0), (4, 3.0), (6, 15.0)):
            got = moment(rho, MomentSpec.power(direction, k)).real
            assert got == pytest.approx(dfact * second ** (k // 2), abs=1e-8)


class TestSqueezedReference:
    def test_small_lambda_is_vacuum(self):
        rho = squeezed_reference(1e-8, 12)
        assert rho.data[0, 0].real == pytest.approx(1.0, abs=1e-12)

    def test_even_support_only(self):
        rho = squeezed_reference(0.4, 24)
        pops = np.real(np.diagonal(rho.data))
        assert np.abs(pops[1::2]).max() < 1e-14

    def test_ladder_moments_real_positive_increasing(self):
        prev_n, prev_aa = 0.0, 0.0
        for lam in (0.1, 0.2, 0.3, 0.4, 0.5):
            rho = squeezed_reference(lam, 40)
            a = np.diag(np.sqrt(np.arange(1, 40)), k=1)
            n_val = complex(np.trace(a.conj().T @ a @ rho.data))
            aa_val = complex(np.trace(a @ a @ rho.data))
            for val in (n_val, aa_val):
                assert abs(val.imag) < 1e-12
                assert val.real > 0.0
            assert n_val.real > prev_n and aa_val.real > prev_aa
            prev_n, prev_aa = n_val.real, aa_val.real

    def test_odd_moments_vanish(self):
        rho = squeezed_reference(0.3, 20)
        for k in (1, 3, 5):
            assert abs(moment(rho, MomentSpec.power(X_DIR, k))) < 1e-12

    def test_leakage_error_near_one(self):
        with pytest.raises(LeakageError):
            squeezed_reference(0.95, 8)


class TestDominance:
    def test_self_reference_zero_margin(self, thermal_filter_1):
        tau = squeezed_reference(0.3, 20)
        report = reference_dominance_check(tau, tau, thermal_filter_1, 4)
        assert report.passed
        worst = min(row[2] for row in report.per_degree)
        assert abs(worst) < 1e-12

    def test_vacuum_dominated_by_squeezed(self, thermal_filter_1):
        report = reference_dominance_check(fock_vacuum(1, 24),
                                           squeezed_reference(0.5, 24),
                                           thermal_filter_1, 6)
        assert report.passed

    def test_heavy_fourth_moment_fails_at_k4(self, thermal_filter_1):
        # a half-weight two-photon component has a big <b†^2 b^2> moment
        heavy = 0.5 * fock_vacuum(1, 24).data + 0.5 * fock_basis_state((2,), 24).data
        tau = FockDensityMatrix(1, 24, heavy)
        report = reference_dominance_check(tau, squeezed_reference(0.05, 24),
                                           thermal_filter_1, 4)
        by_degree = {row[0]: row for row in report.per_degree}
        assert not by_degree[4][1]
        assert by_degree[4][2] < 0


class TestFidelity:
    def test_self_fidelity(self):
        rho = fock_tmsv(0.4, 16)
        assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)

    def test_orthogonal_pure_states(self):
        a = fock_basis_state((0,), 8)
        b = fock_basis_state((1,), 8)
        assert fidelity(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_symmetric(self):
        a = fock_tmsv(0.2, 14)
        b = fock_gaussian_cm2(SymmetricTwoMode(1.2, 0.4), 14)
        assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-9)


class TestConjugationInvariance:
    """U (P x P) U† = P x P for separable zero-mean Gaussian operators."""

    @staticmethod
    def _deviation(filt, cutoff):
        p = filter_matrix(filt, cutoff, half=True)
        pp = np.kron(p, p)
        sigma = (pp @ pp.conj().T)
        sigma /= np.real(np.trace(sigma))
        state = FockDensityMatrix(2, cutoff, sigma)
        worst = 0.0
        for refl in (0.25, 0.5, 0.75):
            u = beam_splitter_unitary(refl, cutoff)
            worst = max(worst, np.linalg.norm(u @ pp @ u.conj().T - pp) / np.linalg.norm(pp))
        return worst, state.leakage()

    def test_thermal_filter_commutes_exactly(self):
        # Fock-diagonal Pi is a function of the total photon number, which
        # the truncated splitter still conserves: zero deviation at any cutoff
        for cutoff in (10, 16):
            dev, _ = self._deviation(thermal_filter(1.0, 1), cutoff)
            assert dev < 1e-13

    def test_squeezed_frame_bounded_by_leakage_and_decreasing(self):
        # operator-level deviation is amplitude-like, so the mass leakage
        # enters through its square root (prefactor calibrated with margin)
        from cvdistill.gaussian import GaussianFilter, SymplecticMap
        frame = SymplecticMap(np.diag([math.exp(0.3), math.exp(-0.3)]))
        filt = GaussianFilter((1.0,), frame)
        devs = []
        for cutoff in (15, 20, 25):
            dev, leak = self._deviation(filt, cutoff)
            assert dev <= 4.0 * math.sqrt(leak)
            devs.append(dev)
        assert devs[0] > devs[1] > devs[2]


class TestEpsilonThroughProtocol:
    def test_invariant_across_vacuum_like_round(self):
        # near-projector filter: one full building-block round conserves epsilon
        t = math.exp(-1.0)
        rho = thermal_loss_channel(fock_tmsv(0.3, 20), t, 1e-8)
        rho1, _ = photon_replacement(rho, 0.5)
        before = epsilon_fock(rho1)
        out, _ = building_block(rho1, rho1, 0.5, thermal_filter(22.0, 2),
                                rank_tol=1e-13)
        assert epsilon_fock(out) == pytest.approx(before, abs=1e-8)
