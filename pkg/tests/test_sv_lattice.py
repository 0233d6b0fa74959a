import math

import numpy as np
import pytest

from firstlook.contracts import GbmParams, OptionContract, SvParams
from firstlook.gbm_lattice import LatticeMethod, MethodKind, binomial_price_sum, closed_form_price
from firstlook.sv_lattice import (
    build_censored_lattice,
    censored_transition,
    lattice_to_csv,
    nearest_grid_index,
    price_sv_option,
    vol_mean_path,
)

# empirical SSP-slot configuration: two-week option on a 0.7417 CPM slot
SSP_SV = SvParams(spot_M0=0.7417, sigma0=0.8723, kappa=96.4953, theta=0.2959, delta=14.9874)
SSP_CONTRACT = OptionContract(strike=0.0223, expiry_T=0.0384, rate_r=0.05, steps_n=14, ctr=0.03)


class TestVolMeanPath:
    def test_initial_value(self):
        assert vol_mean_path(SSP_SV, 0.0) == pytest.approx(0.8723, rel=1e-15)

    def test_no_reversion_is_flat(self):
        sv = SvParams(spot_M0=1.0, sigma0=0.5, kappa=0.0, theta=0.9, delta=0.1)
        for t in (0.0, 0.1, 1.0, 10.0):
            assert vol_mean_path(sv, t) == 0.5

    def test_ssp_horizon_value(self):
        # mpmath 40-digit: 0.2959 + (0.8723-0.2959)*exp(-96.4953*0.0384)
        assert vol_mean_path(SSP_SV, 0.0384) == pytest.approx(0.31007361792708218, rel=1e-12)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            vol_mean_path(SSP_SV, -0.1)


class TestNearestGridIndex:
    def test_on_grid_point(self):
        g = 0.25 * math.sqrt(0.01)
        assert nearest_grid_index(3 * g, 0.25, 0.01) == 3

    def test_tie_rounds_up(self):
        g = 0.4 * math.sqrt(0.04)
        assert nearest_grid_index(2.5 * g, 0.4, 0.04) == 3

    def test_negative_tie_rounds_toward_larger(self):
        g = 0.4 * math.sqrt(0.04)
        assert nearest_grid_index(-2.5 * g, 0.4, 0.04) == -2

    def test_ssp_spot_regression(self):
        # frozen: ln(0.7417) against the week-one grid of the SSP configuration
        dt = 0.0384 / 14
        sigma1 = vol_mean_path(SSP_SV, dt)
        assert nearest_grid_index(math.log(0.7417), sigma1, dt) == -8

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            nearest_grid_index(0.1, 0.0, 0.01)
        with pytest.raises(ValueError):
            nearest_grid_index(0.1, 0.5, 0.0)


class TestCensoredTransition:
    def test_zero_displacement_splits_evenly(self):
        q_up, q_down = censored_transition(0.6, 0.0, 0.5, 0.01)
        assert q_up == pytest.approx(0.3)
        assert q_down == pytest.approx(0.3)

    def test_upper_censoring(self):
        g = 0.5 * math.sqrt(0.01)
        q_up, q_down = censored_transition(0.6, 2 * g, 0.5, 0.01)
        assert q_up == 0.6
        assert q_down == 0.0

    def test_lower_censoring(self):
        g = 0.5 * math.sqrt(0.01)
        q_up, q_down = censored_transition(0.6, -2 * g, 0.5, 0.01)
        assert q_up == 0.0
        assert q_down == 0.6

    def test_mass_split_exact(self):
        for k_adj in np.linspace(-0.1, 0.1, 21):
            q_up, q_down = censored_transition(0.37, float(k_adj), 0.5, 0.01)
            assert q_up + q_down == pytest.approx(0.37, abs=1e-15)
            assert 0.0 <= q_up <= 0.37


def level_mass_deviation(lattice):
    return max(abs(math.fsum(lattice.qs[k]) - 1.0) for k in range(lattice.n_steps + 1))


class TestBuild:
    def test_single_step(self):
        sv = SvParams(spot_M0=1.0, sigma0=0.5, kappa=3.0, theta=0.75, delta=0.35)
        c = OptionContract(strike=0.03, expiry_T=0.1, rate_r=0.05, steps_n=1, ctr=0.03)
        lat = build_censored_lattice(sv, c)
        assert len(lat.xs) == 2
        assert lat.q_ups[0][0] + lat.q_downs[0][0] == pytest.approx(1.0, abs=1e-15)

    def test_ssp_lattice_levels_and_mass(self):
        lat = build_censored_lattice(SSP_SV, SSP_CONTRACT)
        assert len(lat.xs) == 15
        for k in range(15):
            assert lat.xs[k].size == k + 1
        assert level_mass_deviation(lat) < 1e-12

    def test_recombination_step_two(self):
        lat = build_censored_lattice(SSP_SV, SSP_CONTRACT)
        for j in lat.js:
            steps = np.diff(j)
            assert (steps == -2).all()

    def test_nodes_on_incoming_grid(self):
        lat = build_censored_lattice(SSP_SV, SSP_CONTRACT)
        dt = SSP_CONTRACT.dt
        for k in range(1, 15):
            sigma_k = lat.vol_path[k]
            spacing = sigma_k * math.sqrt(dt)
            drift = (0.05 - 0.5 * sigma_k * sigma_k) * dt
            offsets = (lat.xs[k] - drift) / spacing
            assert np.allclose(offsets, np.round(offsets), atol=1e-9)

    def test_censoring_bounds_everywhere(self):
        lat = build_censored_lattice(SSP_SV, SSP_CONTRACT)
        for k in range(14):
            q, up, down = lat.qs[k], lat.q_ups[k], lat.q_downs[k]
            assert (up >= -1e-15).all() and (up <= q + 1e-15).all()
            assert np.allclose(up + down, q, atol=1e-15)

    def test_uncensored_nodes_keep_conditional_drift(self):
        lat = build_censored_lattice(SSP_SV, SSP_CONTRACT)
        dt = SSP_CONTRACT.dt
        checked = 0
        for k in range(14):
            sigma_next = lat.vol_path[k + 1]
            drift = (0.05 - 0.5 * sigma_next * sigma_next) * dt
            x, q = lat.xs[k], lat.qs[k]
            up, down = lat.q_ups[k], lat.q_downs[k]
            x_next = lat.xs[k + 1]
            for i in range(k + 1):
                if q[i] <= 0 or up[i] <= 0 or up[i] >= q[i]:
                    continue
                mean_inc = (up[i] * x_next[i] + down[i] * x_next[i + 1]) / q[i] - x[i]
                assert mean_inc == pytest.approx(drift, abs=1e-12)
                checked += 1
        assert checked > 0

    def test_constant_vol_spacing_is_constant(self):
        sv = SvParams(spot_M0=2.0, sigma0=0.5, kappa=0.0, theta=0.5, delta=0.0)
        c = OptionContract(strike=0.005, expiry_T=31 / 365, rate_r=0.05, steps_n=40, ctr=0.3)
        lat = build_censored_lattice(sv, c)
        spacings = {round(float(lat.xs[k][0] - lat.xs[k][1]), 12) for k in range(1, 41)}
        assert len(spacings) == 1

    def test_random_parameter_sets_conserve_mass(self):
        rng = np.random.default_rng(20130208)
        for _ in range(25):
            sv = SvParams(
                spot_M0=float(rng.uniform(0.1, 30.0)),
                sigma0=float(rng.uniform(0.1, 1.5)),
                kappa=float(rng.uniform(0.0, 100.0)),
                theta=float(rng.uniform(0.0, 1.5)),
                delta=float(rng.uniform(0.0, 15.0)),
            )
            c = OptionContract(
                strike=float(rng.uniform(0.0, 0.1)),
                expiry_T=float(rng.uniform(0.01, 0.5)),
                rate_r=float(rng.uniform(0.0, 0.1)),
                steps_n=int(rng.integers(2, 80)),
                ctr=0.03,
            )
            lat = build_censored_lattice(sv, c)
            assert level_mass_deviation(lat) < 1e-12

    def test_nonfinite_build_reports_location(self):
        sv = SvParams(spot_M0=1.0, sigma0=1e200, kappa=0.0, theta=0.0, delta=0.0)
        c = OptionContract(strike=0.03, expiry_T=1.0, rate_r=0.05, steps_n=2, ctr=0.03)
        with pytest.raises(ValueError, match="level"):
            build_censored_lattice(sv, c)


class TestPricing:
    def test_unreachable_strike_prices_zero(self):
        c = OptionContract(strike=1e6, expiry_T=0.0384, rate_r=0.05, steps_n=14, ctr=0.03)
        res = price_sv_option(build_censored_lattice(SSP_SV, c))
        assert res.price == 0.0

    def test_backward_induction_matches_terminal_sum(self):
        res = price_sv_option(build_censored_lattice(SSP_SV, SSP_CONTRACT))
        assert res.backward_price == pytest.approx(res.price, abs=1e-12)

    def test_sv_price_below_constant_vol_price(self):
        # falling volatility path carries less risk than its starting level
        sv_price = price_sv_option(build_censored_lattice(SSP_SV, SSP_CONTRACT)).price
        crr = binomial_price_sum(
            GbmParams(spot_M0=0.7417, sigma=0.8723),
            SSP_CONTRACT,
            LatticeMethod(MethodKind.CRR),
        )
        assert sv_price < crr

    def test_constant_vol_converges_to_closed_form(self):
        sv = SvParams(spot_M0=2.0, sigma0=0.5, kappa=0.0, theta=0.5, delta=0.0)
        c = OptionContract(strike=0.005, expiry_T=31 / 365, rate_r=0.05, steps_n=300, ctr=0.3)
        res = price_sv_option(build_censored_lattice(sv, c))
        benchmark = closed_form_price(GbmParams(spot_M0=2.0, sigma=0.5), c)
        assert res.price == pytest.approx(benchmark, rel=0.01)

    def test_monotone_in_strike_and_spot(self):
        def price(strike, spot):
            sv = SvParams(spot_M0=spot, sigma0=0.8723, kappa=96.4953, theta=0.2959, delta=14.9874)
            c = OptionContract(strike=strike, expiry_T=0.0384, rate_r=0.05, steps_n=14, ctr=0.03)
            return price_sv_option(build_censored_lattice(sv, c)).price

        assert price(0.01, 0.7417) >= price(0.0223, 0.7417) >= price(0.04, 0.7417)
        assert price(0.0223, 0.9) >= price(0.0223, 0.7417) >= price(0.0223, 0.5)

    def test_csv_dump_shape(self, tmp_path):
        lat = build_censored_lattice(SSP_SV, SSP_CONTRACT)
        out = tmp_path / "lattice.csv"
        with open(out, "w", newline="") as fh:
            lattice_to_csv(lat, fh)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "level,node,x,J,K,Q,q_up,q_down,option_value"
        assert len(lines) == 1 + sum(k + 1 for k in range(15))
        # terminal rows leave transition columns empty
        last = lines[-1].split(",")
        assert last[0] == "14" and last[3] == "" and last[6] == ""

    def test_node_views(self):
        lat = build_censored_lattice(SSP_SV, SSP_CONTRACT)
        root = lat.level_nodes(0)[0]
        assert root.q_mass == 1.0
        assert root.x == 0.0
        assert root.j is not None
        terminal = lat.level_nodes(14)
        assert len(terminal) == 15
        assert all(n.j is None and n.q_up is None for n in terminal)
        assert len(list(lat.levels)) == 15
