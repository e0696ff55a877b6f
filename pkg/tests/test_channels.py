import math

import numpy as np
import pytest

from cvdistill import fock
from cvdistill.channels import (GaussianChannelCJ, IllConditionedError,
                                apply_gaussian_channel, filter_channel_cj,
                                identity_channel_cj, limit_state_cov,
                                loss_thermal)
from cvdistill.gaussian import (embed_symmetric, make_two_mode_squeezed,
                                min_physicality_eig, thermal_filter)


class TestIdentityChannel:
    def test_action_within_regularization(self):
        ch = identity_channel_cj(2)
        gamma = embed_symmetric(make_two_mode_squeezed(0.6)).gamma
        out = apply_gaussian_channel(ch, gamma)
        # finite squeezing leaves an error of order (1 - s_reg^2)
        assert np.abs(out - gamma).max() < 1e-3
        assert np.abs(out - gamma).max() > 0.0

    def test_tightens_with_regularization(self):
        gamma = embed_symmetric(make_two_mode_squeezed(0.6)).gamma
        coarse = apply_gaussian_channel(identity_channel_cj(2, 0.999), gamma)
        fine = apply_gaussian_channel(identity_channel_cj(2, 0.999999), gamma)
        assert np.abs(fine - gamma).max() < np.abs(coarse - gamma).max()


class TestFilterChannel:
    def test_vacuum_fixed(self):
        ch = filter_channel_cj(thermal_filter(1.3, 1))
        out = apply_gaussian_channel(ch, np.eye(2))
        assert np.abs(out - np.eye(2)).max() < 1e-12

    def test_semigroup_in_beta(self):
        # filtering twice at beta equals once at 2*beta
        gamma = embed_symmetric(make_two_mode_squeezed(0.5)).gamma
        one = filter_channel_cj(thermal_filter(0.7, 2))
        two = filter_channel_cj(thermal_filter(1.4, 2))
        once = apply_gaussian_channel(one, apply_gaussian_channel(one, gamma))
        assert np.abs(once - apply_gaussian_channel(two, gamma)).max() < 1e-8

    def test_matches_fock_filtering(self):
        filt = thermal_filter(1.0, 2)
        tau = fock.filtered_object(fock.fock_tmsv(0.5, 28), filt)
        _, gamma_fock = fock.covariance_from_fock(tau)
        out = apply_gaussian_channel(filter_channel_cj(filt),
                                     embed_symmetric(make_two_mode_squeezed(0.5)).gamma)
        assert np.abs(out - gamma_fock).max() < 1e-6

    def test_output_symmetric_and_physical(self):
        ch = filter_channel_cj(thermal_filter(0.8, 2))
        gamma = embed_symmetric(make_two_mode_squeezed(1.0)).gamma
        out = apply_gaussian_channel(ch, gamma)
        assert np.abs(out - out.T).max() == 0.0
        assert min_physicality_eig(out) > -1e-9

    def test_beta_zero_limit_is_identity(self):
        ch = filter_channel_cj(thermal_filter(1e-8, 1))
        gamma = np.diag([1.7, 0.9])
        out = apply_gaussian_channel(ch, gamma)
        assert np.abs(out - gamma).max() < 1e-6


class TestLossThermal:
    def test_zero_distance_identity(self):
        ch = loss_thermal(0.0)
        gamma = embed_symmetric(make_two_mode_squeezed(0.3)).gamma
        assert np.array_equal(ch.apply(gamma), gamma)

    def test_infinite_distance_thermalizes(self):
        ch = loss_thermal(1e9, 22.0, 0.5)
        out = ch.apply(embed_symmetric(make_two_mode_squeezed(1.0)).gamma)
        assert np.abs(out - 2.0 * np.eye(4)).max() < 1e-12

    def test_closed_form_link(self):
        s = loss_thermal(22.0, 22.0, 1e-8).apply_link(make_two_mode_squeezed(0.5))
        t = math.exp(-1.0)
        assert s.c == pytest.approx(t * math.cosh(1.0) + (1 + 2e-8) * (1 - t), abs=1e-14)
        assert s.s == pytest.approx(t * math.sinh(1.0), abs=1e-14)

    def test_semigroup(self):
        a, b = loss_thermal(13.0), loss_thermal(9.0)
        both = loss_thermal(22.0)
        gamma = embed_symmetric(make_two_mode_squeezed(0.8)).gamma
        assert np.abs(a.apply(b.apply(gamma)) - both.apply(gamma)).max() < 1e-12

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            loss_thermal(-1.0)


class TestLimitState:
    def test_near_identity_filter(self):
        gamma_tau = embed_symmetric(make_two_mode_squeezed(0.4)).gamma
        res = limit_state_cov(gamma_tau, thermal_filter(1e-7, 2))
        assert res.physical
        assert np.abs(res.gamma - gamma_tau).max() < 1e-5

    def test_round_trip(self):
        filt = thermal_filter(1.0, 2)
        gamma_rho = embed_symmetric(make_two_mode_squeezed(0.5)).gamma
        gamma_tau = apply_gaussian_channel(filter_channel_cj(filt), gamma_rho)
        res = limit_state_cov(gamma_tau, filt)
        assert res.physical
        assert np.abs(res.gamma - gamma_rho).max() < 1e-8

    def test_matches_fock_unfiltering(self):
        # independent route: invert the filter on the Fock state directly
        filt = thermal_filter(1.0, 2)
        rho = fock.fock_tmsv(0.4, 25)
        tau = fock.filtered_object(rho, filt)
        _, gamma_tau = fock.covariance_from_fock(tau)
        res = limit_state_cov(gamma_tau, filt)
        back = fock.unfilter_object(tau, filt)
        _, gamma_back = fock.covariance_from_fock(back)
        assert np.abs(res.gamma - gamma_back).max() < 1e-6

    def test_unphysical_limit_flagged(self):
        # a filtered limit hotter than the filter itself has no preimage
        res = limit_state_cov(3.0 * np.eye(2), thermal_filter(1.0, 1))
        assert not res.physical

    def test_singular_core_raises(self):
        filt = thermal_filter(1.0, 1)
        gamma_aa = filter_channel_cj(filt).gamma_aa
        with pytest.raises(IllConditionedError):
            limit_state_cov(gamma_aa, filt)


class TestBlockValidation:
    def test_dimension_check(self):
        with pytest.raises(ValueError):
            GaussianChannelCJ(np.eye(2), np.eye(2), np.eye(4))

    def test_symmetry_check(self):
        bad = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(ValueError):
            GaussianChannelCJ(bad, np.eye(2), np.eye(2))

    def test_ill_conditioned_apply(self):
        ch = GaussianChannelCJ(np.eye(2), np.eye(2), np.eye(2))
        with pytest.raises(IllConditionedError):
            apply_gaussian_channel(ch, np.diag([0.0, 1e-13 - 1.0]))