import copy
import random

import pytest

from ngridsim.dispatch import (DispatchOutcome, NGridState, PrechargePolicy,
                               connected_step, initial_state, islanded_step,
                               ramp_capacity, sr_capacity)
from ngridsim.fleet import (DeferrableTask, ElectricVehicle, HourlyProfile,
                            HvacAsset, NGrid, StorageUnit)
from fuzzing import (check_islanded_invariants, random_islanded_case,
                     snapshot_pre_dispatch)
from oracles import power_balance_residual

H = 24


def make_ngrid(base=0.0, pv=0.0, bess=None, evs=(), hvac=None, deferrables=()):
    return NGrid(id="T1", feeder_id="F1",
                 base_load=HourlyProfile.constant(base, H),
                 pv=HourlyProfile.constant(pv, H),
                 bess=bess, evs=tuple(evs), hvac=hvac, deferrables=tuple(deferrables))


def always_plugged_ev(capacity, p_max, soc):
    return ElectricVehicle(battery=StorageUnit(capacity, p_max, soc),
                           plug_hours=frozenset(range(H)), soc_on_arrival_kwh=soc)


class TestIslandedStep:
    def test_bess_covers_deficit(self):
        ng = make_ngrid(base=5.0, pv=2.0, bess=StorageUnit(20.0, 5.0, 10.0))
        out, state = islanded_step(ng, initial_state(ng), 0)
        assert out.bess_kw == pytest.approx(3.0)
        assert out.ens_kw == 0.0
        assert state.bess_soc_kwh == pytest.approx(7.0)

    def test_energy_limited_discharge_leaves_ens(self):
        ng = make_ngrid(base=5.0, pv=0.0, bess=StorageUnit(20.0, 5.0, 1.0))
        out, _ = islanded_step(ng, initial_state(ng), 0)
        assert out.bess_kw == pytest.approx(1.0)
        assert out.ens_kw == pytest.approx(4.0)

    def test_saturated_sinks_spill(self):
        ng = make_ngrid(base=0.0, pv=3.0, bess=StorageUnit(10.0, 5.0, 10.0))
        out, _ = islanded_step(ng, initial_state(ng), 0)
        assert out.spilled_kw == pytest.approx(3.0)
        assert out.ens_kw == 0.0

    def test_surplus_routed_ev_first(self):
        ev = always_plugged_ev(capacity=10.0, p_max=2.0, soc=8.0)  # 2 kWh headroom
        ng = make_ngrid(base=1.0, pv=6.0, bess=StorageUnit(10.0, 5.0, 0.0), evs=[ev])
        out, _ = islanded_step(ng, initial_state(ng), 0)
        assert out.ev_kw == pytest.approx(-2.0)
        assert out.bess_kw == pytest.approx(-3.0)
        assert out.spilled_kw == 0.0

    def test_hvac_curtailed_then_restored(self):
        hvac = HvacAsset(HourlyProfile.constant(2.0, H), HourlyProfile.constant(0.5, H))
        # Deficit hour: HVAC held at floor.
        ng = make_ngrid(base=1.0, pv=1.0, hvac=hvac)
        out, _ = islanded_step(ng, initial_state(ng), 0)
        assert out.hvac_kw == pytest.approx(0.5)
        assert out.ens_kw == pytest.approx(0.5)
        # Big surplus: restored to normal, rest spills.
        ng = make_ngrid(base=1.0, pv=6.0, hvac=hvac)
        out, _ = islanded_step(ng, initial_state(ng), 0)
        assert out.hvac_kw == pytest.approx(2.0)
        assert out.spilled_kw == pytest.approx(3.0)

    def test_deferrable_served_only_from_surplus(self):
        task = DeferrableTask(energy_kwh=3.0, power_kw=1.0, earliest_hour=0, deadline_hour=23)
        ng = make_ngrid(base=0.0, pv=2.0, deferrables=[task])
        out, state = islanded_step(ng, initial_state(ng), 5)
        assert out.deferrable_kw == pytest.approx(1.0)  # power-capped
        assert out.spilled_kw == pytest.approx(1.0)
        assert state.deferred_energy_kwh[0] == pytest.approx(2.0)

    def test_deadline_shortfall_becomes_ens(self):
        task = DeferrableTask(energy_kwh=3.0, power_kw=1.0, earliest_hour=0, deadline_hour=5)
        ng = make_ngrid(base=2.0, pv=0.0, deferrables=[task])
        out, state = islanded_step(ng, initial_state(ng), 5)
        assert out.ens_kw == pytest.approx(2.0 + 3.0)  # unmet base plus expired task
        assert state.deferred_energy_kwh[0] == 0.0

    def test_ev_proportional_allocation(self):
        ev1 = always_plugged_ev(capacity=50.0, p_max=4.0, soc=40.0)
        ev2 = always_plugged_ev(capacity=50.0, p_max=2.0, soc=40.0)
        ng = make_ngrid(base=3.0, pv=0.0, evs=[ev1, ev2])
        out, _ = islanded_step(ng, initial_state(ng), 0)
        assert out.ev_kw_each[0] == pytest.approx(2.0)
        assert out.ev_kw_each[1] == pytest.approx(1.0)
        assert out.ens_kw == 0.0

    def test_boundary_net_load_zero_is_noop(self):
        ng = make_ngrid(base=2.0, pv=2.0, bess=StorageUnit(10.0, 5.0, 5.0))
        out, _ = islanded_step(ng, initial_state(ng), 0)
        assert out.bess_kw == 0.0
        assert out.ens_kw == 0.0 and out.spilled_kw == 0.0

    def test_bad_state_rejected(self):
        ng = make_ngrid(bess=StorageUnit(10.0, 5.0, 5.0))
        state = initial_state(ng)
        state.bess_soc_kwh = 12.0
        with pytest.raises(ValueError):
            islanded_step(ng, state, 0)

    def test_fuzz_invariants(self):
        rng = random.Random(42)
        for _ in range(500):
            ngrid, state, hour = random_islanded_case(rng)
            pre_bess, pre_ev = snapshot_pre_dispatch(ngrid, state, hour)
            out, state = islanded_step(ngrid, state, hour)
            check_islanded_invariants(ngrid, pre_bess, pre_ev, out, state)


class TestConnectedStep:
    def test_recharges_toward_full(self):
        ng = make_ngrid(base=4.0, pv=1.0, bess=StorageUnit(10.0, 5.0, 8.0))
        out, state = connected_step(ng, initial_state(ng), 0)
        assert out.bess_kw == pytest.approx(-2.0)
        assert out.grid_kw == pytest.approx(5.0)
        assert state.bess_soc_kwh == pytest.approx(10.0)

    def test_surplus_exported_not_spilled(self):
        ng = make_ngrid(base=0.0, pv=5.0, bess=StorageUnit(10.0, 5.0, 10.0))
        out, _ = connected_step(ng, initial_state(ng), 0)
        assert out.grid_kw == pytest.approx(-5.0)
        assert out.spilled_kw == 0.0 and out.ens_kw == 0.0

    def test_deferrable_served_at_earliest_hour(self):
        task = DeferrableTask(energy_kwh=3.0, power_kw=1.0, earliest_hour=10, deadline_hour=14)
        ng = make_ngrid(base=1.0, deferrables=[task])
        state = initial_state(ng)
        out, state = connected_step(ng, state, 9)
        assert out.deferrable_kw == 0.0
        out, state = connected_step(ng, state, 10)
        assert out.deferrable_kw == pytest.approx(1.0)
        assert state.deferred_energy_kwh[0] == pytest.approx(2.0)

    def test_power_balance(self):
        ev = always_plugged_ev(capacity=60.0, p_max=7.0, soc=30.0)
        hvac = HvacAsset(HourlyProfile.constant(1.5, H), HourlyProfile.constant(0.5, H))
        ng = make_ngrid(base=2.0, pv=1.0, bess=StorageUnit(10.0, 5.0, 3.0),
                        evs=[ev], hvac=hvac)
        out, _ = connected_step(ng, initial_state(ng), 0)
        assert abs(power_balance_residual(out)) <= 1e-9

    def test_sor_precharge_policy_limits_target(self):
        from ngridsim.sor import SorTable
        table = SorTable({("F1", h): (0.5 if h == 2 else 0.0) for h in range(H)})
        policy = PrechargePolicy(mode="sor", sor=table)
        ng = make_ngrid(base=1.0, bess=StorageUnit(10.0, 5.0, 0.0))
        out, state = connected_step(ng, initial_state(ng), 0, policy)
        # Worst next-hours risk is 0.5 -> target 5 kWh from empty.
        assert state.bess_soc_kwh == pytest.approx(5.0)
        assert out.bess_kw == pytest.approx(-5.0)


class TestSrCapacity:
    def _outcome(self, connected=True, hour=0, bess_kw=0.0, ev_each=(), hvac_kw=0.0):
        return DispatchOutcome(hour=hour, connected=connected, served_load_kw=0.0,
                               ens_kw=0.0, spilled_kw=0.0, pv_kw=0.0, bess_kw=bess_kw,
                               ev_kw=sum(ev_each), hvac_kw=hvac_kw, deferrable_kw=0.0,
                               grid_kw=0.0, ev_kw_each=tuple(ev_each))

    def test_discharging_headroom(self):
        ng = make_ngrid(bess=StorageUnit(30.0, 5.0, 20.0))
        state = NGridState(bess_soc_kwh=20.0, ev_soc_kwh=[], deferred_energy_kwh=[])
        offer = sr_capacity(ng, state, self._outcome(bess_kw=2.0))
        assert offer.bess_sr_kw == pytest.approx(3.0)

    def test_charging_mode_capped_by_stored_energy(self):
        ng = make_ngrid(bess=StorageUnit(30.0, 5.0, 2.0))
        state = NGridState(bess_soc_kwh=2.0, ev_soc_kwh=[], deferred_energy_kwh=[])
        offer = sr_capacity(ng, state, self._outcome(bess_kw=-4.0))
        assert offer.bess_sr_kw == pytest.approx(2.0)

    def test_unplugged_ev_offers_nothing(self):
        ev = ElectricVehicle(battery=StorageUnit(60.0, 7.0, 30.0),
                             plug_hours=frozenset({5}), soc_on_arrival_kwh=30.0)
        ng = make_ngrid(evs=[ev])
        state = NGridState(bess_soc_kwh=0.0, ev_soc_kwh=[30.0], deferred_energy_kwh=[])
        offer = sr_capacity(ng, state, self._outcome(hour=0, ev_each=(0.0,)))
        assert offer.ev_sr_kw == 0.0

    def test_hvac_comfort_floor_cap(self):
        hvac = HvacAsset(HourlyProfile.constant(3.0, H), HourlyProfile.constant(1.0, H))
        ng = make_ngrid(hvac=hvac)
        state = NGridState(bess_soc_kwh=0.0, ev_soc_kwh=[], deferred_energy_kwh=[])
        offer = sr_capacity(ng, state, self._outcome(hvac_kw=3.0))
        assert offer.hvac_sr_kw == pytest.approx(2.0)

    def test_islanded_offer_is_error(self):
        ng = make_ngrid()
        state = NGridState(bess_soc_kwh=0.0, ev_soc_kwh=[], deferred_energy_kwh=[])
        with pytest.raises(ValueError):
            sr_capacity(ng, state, self._outcome(connected=False))

    def test_components_bounded_by_p_max(self):
        rng = random.Random(1)
        for _ in range(100):
            p_max = rng.uniform(1.0, 8.0)
            cap = rng.uniform(2.0, 40.0)
            soc = rng.uniform(0.0, cap)
            power = rng.uniform(-p_max, p_max)
            ng = make_ngrid(bess=StorageUnit(cap, p_max, soc))
            state = NGridState(bess_soc_kwh=soc, ev_soc_kwh=[], deferred_energy_kwh=[])
            offer = sr_capacity(ng, state, self._outcome(bess_kw=power))
            assert 0.0 <= offer.bess_sr_kw <= p_max + 1e-12


class TestRampCapacity:
    def _outcome(self, **kw):
        return TestSrCapacity()._outcome(**kw)

    def test_islanded_zero(self):
        ng = make_ngrid(bess=StorageUnit(10.0, 5.0, 10.0))
        state = NGridState(bess_soc_kwh=10.0, ev_soc_kwh=[], deferred_energy_kwh=[])
        ramp = ramp_capacity(ng, state, self._outcome(connected=False))
        assert (ramp.ru_kw, ramp.rd_kw) == (0.0, 0.0)

    def test_idle_full_bess(self):
        ng = make_ngrid(bess=StorageUnit(10.0, 5.0, 10.0))
        state = NGridState(bess_soc_kwh=10.0, ev_soc_kwh=[], deferred_energy_kwh=[])
        ramp = ramp_capacity(ng, state, self._outcome())
        assert ramp.ru_kw == pytest.approx(5.0)
        assert ramp.rd_kw == 0.0

    def test_idle_empty_bess(self):
        ng = make_ngrid(bess=StorageUnit(10.0, 5.0, 0.0))
        state = NGridState(bess_soc_kwh=0.0, ev_soc_kwh=[], deferred_energy_kwh=[])
        ramp = ramp_capacity(ng, state, self._outcome())
        assert ramp.ru_kw == 0.0
        assert ramp.rd_kw == pytest.approx(5.0)

    def test_ru_non_increasing_in_delivery_hours(self):
        ng = make_ngrid(bess=StorageUnit(10.0, 5.0, 4.0))
        state = NGridState(bess_soc_kwh=4.0, ev_soc_kwh=[], deferred_energy_kwh=[])
        outcome = self._outcome(bess_kw=1.0)
        values = [ramp_capacity(ng, state, outcome, delivery_hours=d).ru_kw
                  for d in (0.5, 1.0, 2.0, 4.0)]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))

    def test_derate_scales_power_limits(self):
        ng = make_ngrid(bess=StorageUnit(20.0, 5.0, 10.0))
        state = NGridState(bess_soc_kwh=10.0, ev_soc_kwh=[], deferred_energy_kwh=[])
        full = ramp_capacity(ng, state, self._outcome())
        derated = ramp_capacity(ng, state, self._outcome(), derate=0.5)
        assert derated.ru_kw == pytest.approx(full.ru_kw * 0.5)
        assert derated.rd_kw == pytest.approx(full.rd_kw * 0.5)


class TestSufficiency:
    def test_enough_storage_means_zero_ens(self):
        ng = make_ngrid(base=2.0, pv=0.0, bess=StorageUnit(60.0, 5.0, 60.0))
        state = initial_state(ng)
        total_ens = 0.0
        for h in range(H):
            out, state = islanded_step(ng, state, h)
            total_ens += out.ens_kw
        assert total_ens == 0.0

    def test_soc_stays_in_bounds_under_random_outage_patterns(self):
        rng = random.Random(9)
        ev = always_plugged_ev(capacity=30.0, p_max=4.0, soc=10.0)
        ng = make_ngrid(base=3.0, pv=2.0, bess=StorageUnit(10.0, 5.0, 5.0), evs=[ev])
        for _ in range(50):
            state = initial_state(ng)
            for h in range(H):
                if rng.random() < 0.5:
                    _, state = islanded_step(ng, state, h)
                else:
                    _, state = connected_step(ng, state, h)
                assert -1e-9 <= state.bess_soc_kwh <= 10.0 + 1e-9
                assert -1e-9 <= state.ev_soc_kwh[0] <= 30.0 + 1e-9
