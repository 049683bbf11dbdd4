import math

import pytest

from funnelnav.dynamics import AxisDisturbance, DisturbanceProfile, DragCoeffs, VesselParams
from funnelnav.errors import InsufficientSamples
from funnelnav.feasibility import (
    estimate_bounds,
    terminal_surge_speed,
    terminal_yaw_rate,
)
from funnelnav.scenario import benign_scenario, long_run_scenario


def powerful_quiet_scenario():
    """Zero disturbance, zero drag, huge actuator authority."""
    sc = benign_scenario()
    sc.vessel = VesselParams(drag=DragCoeffs(0, 0, 0, 0, 0, 0))
    sc.disturbance = DisturbanceProfile.zero()
    data = sc.to_dict()
    data["controller"]["F_T_max"] = 1e6
    from funnelnav.scenario import Scenario
    out = Scenario.from_dict(data)
    out.min_thrust_floor = 1e4
    return out


class TestEstimateBounds:
    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamples):
            estimate_bounds(benign_scenario(), n_samples=99)

    def test_quiet_powerful_scenario_passes_everything(self):
        rep = estimate_bounds(powerful_quiet_scenario(), n_samples=400, seed=0)
        assert rep.passed
        assert all(rep.verdicts[c] for c in ("thrust_floor", "surge_authority", "torque_authority", "initial_bearing"))
        assert rep.margins["surge_authority"] > 0.0
        assert rep.margins["torque_authority"] > 0.0

    def test_overwhelming_disturbance_fails_surge_condition(self):
        sc = benign_scenario()
        authority = sc.controller.F_T_max * math.cos(sc.controller.alpha_r_max)
        sc.disturbance = DisturbanceProfile(
            x=AxisDisturbance(bias=2.0 * authority), seed=1)
        rep = estimate_bounds(sc, n_samples=400, seed=0)
        assert not rep.verdicts["surge_authority"]
        assert rep.margins["surge_authority"] < 0.0
        assert not rep.passed

    def test_surge_authority_is_cos_scaled_thrust(self):
        sc = benign_scenario()
        rep = estimate_bounds(sc, n_samples=200, seed=0)
        authority = rep.margins["surge_authority"] + rep.F_bar_u
        assert authority == pytest.approx(
            sc.controller.F_T_max * math.cos(math.pi / 6.0), rel=1e-12)
        assert authority == pytest.approx(0.8660254037844387 * sc.controller.F_T_max, rel=1e-12)

    def test_monotone_in_thrust_limit(self):
        # raising F_T_max can only widen the surge margin here (the sampled
        # velocity envelope is pinned by 1.5 v_max, not the terminal speed)
        sc1 = benign_scenario()
        assert terminal_surge_speed(sc1) > 1.5 * sc1.v_max
        rep1 = estimate_bounds(sc1, n_samples=300, seed=5)
        data = sc1.to_dict()
        data["controller"]["F_T_max"] *= 2.0
        from funnelnav.scenario import Scenario
        sc2 = Scenario.from_dict(data)
        rep2 = estimate_bounds(sc2, n_samples=300, seed=5)
        assert rep2.margins["surge_authority"] > rep1.margins["surge_authority"]
        assert rep1.verdicts["surge_authority"] <= rep2.verdicts["surge_authority"]

    def test_running_max_nondecreasing_in_samples(self):
        sc = long_run_scenario()
        small = estimate_bounds(sc, n_samples=200, seed=3)
        big = estimate_bounds(sc, n_samples=600, seed=3)
        assert big.F_bar_u >= small.F_bar_u
        assert big.F_bar_r >= small.F_bar_r

    def test_achieving_sample_recorded(self):
        rep = estimate_bounds(long_run_scenario(), n_samples=300, seed=2)
        for best in (rep.achieving_sample_u, rep.achieving_sample_r):
            assert {"t", "u", "v", "r", "psi"} <= set(best)

    def test_long_run_scenario_is_feasible(self):
        rep = estimate_bounds(long_run_scenario(), n_samples=800)
        assert rep.passed

    def test_report_serializes(self, tmp_path):
        rep = estimate_bounds(benign_scenario(), n_samples=150, seed=0)
        out = tmp_path / "feas.json"
        rep.save_json(out)
        import json
        data = json.loads(out.read_text())
        assert set(data["verdicts"]) == {"thrust_floor", "surge_authority", "torque_authority", "initial_bearing"}
        assert data["passed"] == rep.passed


class TestTerminalRates:
    def test_surge_terminal_balances_drag(self):
        sc = benign_scenario()
        u = terminal_surge_speed(sc)
        d = sc.vessel.drag
        assert d.d1_u * u + d.d2_u * u * u == pytest.approx(sc.controller.F_T_max, rel=1e-9)

    def test_yaw_terminal_balances_drag(self):
        sc = benign_scenario()
        r = terminal_yaw_rate(sc)
        d = sc.vessel.drag
        torque = sc.vessel.Delta_x * sc.controller.F_T_max * math.sin(sc.controller.alpha_r_max)
        assert d.d1_r * r + d.d2_r * r * r == pytest.approx(torque, rel=1e-9)
