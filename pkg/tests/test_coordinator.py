import random

import pytest

from ecofence.coordinator import (
    BackgroundReading,
    ControllerConfig,
    Geofence,
    GeofenceCoordinator,
    Powertrain,
    VehicleMode,
    VehicleSnapshot,
    compute_limit,
    members,
    single_vehicle_mode,
    toss_polluting,
)


def snap(vid, pos=(0.0, 0.0), speed=30.0, euro=4, powertrain=Powertrain.HYBRID, density=1.0):
    return VehicleSnapshot(
        vehicle_id=vid,
        position=pos,
        speed=speed,
        euro_class=euro,
        powertrain=powertrain,
        density_weight=density,
    )


def make_coordinator(table, **kwargs):
    config = kwargs.pop("config", ControllerConfig())
    rng = kwargs.pop("rng", random.Random("test:toss"))
    return GeofenceCoordinator(config, table, rng, **kwargs)


# -- lifecycle -----------------------------------------------------------------


def test_detection_creates_fence(table):
    coord = make_coordinator(table)
    fence = coord.on_detection("tag-1", (0.0, 0.0), 5.0, detecting_vehicle_id="v1")
    assert fence.center == (0.0, 0.0)
    assert fence.created_at == 5.0
    assert fence.last_detection_at == 5.0
    assert fence.radius == 100.0


def test_detection_recenters_existing_fence(table):
    coord = make_coordinator(table)
    coord.on_detection("tag-1", (0.0, 0.0), 5.0)
    fence = coord.on_detection("tag-1", (30.0, 0.0), 8.0)
    assert len(coord.fences) == 1
    assert fence.center == (30.0, 0.0)
    assert fence.created_at == 5.0
    assert fence.last_detection_at == 8.0


def test_two_cyclists_two_fences(table):
    coord = make_coordinator(table)
    coord.on_detection("tag-1", (0.0, 0.0), 1.0)
    coord.on_detection("tag-2", (500.0, 0.0), 1.0)
    assert sorted(coord.fences) == ["tag-1", "tag-2"]


def test_expiry_boundary_is_inclusive(table):
    coord = make_coordinator(table)
    coord.on_detection("tag-1", (0.0, 0.0), 10.0)
    assert coord.expire(30.0) == []
    assert "tag-1" in coord.fences
    coord.expire(30.1)
    assert coord.fences == {}


def test_expiry_restores_controlled_members(table):
    coord = make_coordinator(table)
    coord.on_detection("tag-1", (0.0, 0.0), 0.0)
    snapshots = {"v1": snap("v1"), "v2": snap("v2", pos=(10.0, 0.0))}
    commands = coord.step(0.0, snapshots, background_level=0.0)
    assert commands  # both commanded at the first tick
    restect = coord.step(21.0, snapshots, background_level=0.0)
    assert coord.fences == {}
    restored = {c.vehicle_id: c.mode for c in restect}
    assert restored == {"v1": VehicleMode.POLLUTING, "v2": VehicleMode.POLLUTING}


def test_expiry_no_fences_is_noop(table):
    coord = make_coordinator(table)
    assert coord.expire(100.0) == []


# -- membership ----------------------------------------------------------------


def test_members_boundary_inclusive():
    fence = Geofence("f", (0.0, 0.0), 100.0, 0.0, 0.0)
    positions = {"on_edge": (60.0, 80.0), "outside": (100.1, 0.0), "inside": (1.0, 1.0)}
    assert members(fence, positions) == {"on_edge", "inside"}


def test_members_empty_fleet():
    fence = Geofence("f", (0.0, 0.0), 100.0, 0.0, 0.0)
    assert members(fence, {}) == set()


# -- budget --------------------------------------------------------------------


def test_compute_limit_examples():
    config = ControllerConfig(allowable_limit=1.0)
    assert compute_limit(config, BackgroundReading.from_level(0.0, config)) == 1.0
    assert compute_limit(config, BackgroundReading.from_level(1.5, config)) == -0.5
    assert compute_limit(config, BackgroundReading.from_level(0.4, config)) == pytest.approx(0.6)


def test_background_reading_delta():
    config = ControllerConfig(allowable_limit=1.0)
    reading = BackgroundReading.from_level(1.5, config)
    assert reading.delta == pytest.approx(0.5)


# -- decisions -----------------------------------------------------------------


def test_decision_tick_extremes_ignore_draw(table):
    # x=1 (slack budget) commands polluting on every tick and x=0 (negative
    # budget) commands electric on every tick, whatever the draws say
    coord = make_coordinator(table)
    coord.on_detection("tag-1", (0.0, 0.0), 0.0)
    snapshots = {"a": snap("a", speed=10.0), "b": snap("b", speed=10.0)}
    for t in range(50):
        coord.on_detection("tag-1", (0.0, 0.0), float(t))
        coord.step(float(t), snapshots, background_level=0.0)
    rows = [r for r in coord.command_log if r.assignment is not None]
    assert len(rows) == 100
    assert all(r.assignment == 1.0 and r.commanded_mode == "polluting" for r in rows)

    coord = make_coordinator(table)
    coord.on_detection("tag-1", (0.0, 0.0), 0.0)
    for t in range(50):
        coord.on_detection("tag-1", (0.0, 0.0), float(t))
        coord.step(float(t), snapshots, background_level=2.0)
    rows = [r for r in coord.command_log if r.assignment is not None]
    assert len(rows) == 100
    assert all(r.assignment == 0.0 and r.commanded_mode == "electric" for r in rows)


def test_decision_tick_negative_budget_all_electric(table):
    coord = make_coordinator(table)
    coord.on_detection("tag-1", (0.0, 0.0), 0.0)
    snapshots = {f"v{i}": snap(f"v{i}", pos=(float(i), 0.0)) for i in range(4)}
    commands = coord.step(0.0, snapshots, background_level=1.5)
    assert {c.mode for c in commands} == {VehicleMode.ELECTRIC}
    assert len(commands) == 4


def test_decision_tick_expected_spend_within_budget(table):
    coord = make_coordinator(table)
    coord.on_detection("tag-1", (0.0, 0.0), 0.0)
    snapshots = {
        f"v{i}": snap(f"v{i}", pos=(float(i), 0.0), euro=1 + i % 4, density=1.0 + i % 3)
        for i in range(10)
    }
    coord.step(0.0, snapshots, background_level=0.0)
    spend = sum(
        r.assignment * r.emission_rate for r in coord.command_log if r.assignment is not None
    )
    assert spend <= 1.0 + 1e-9


def test_pure_ev_member_always_electric(table):
    coord = make_coordinator(table)
    coord.on_detection("tag-1", (0.0, 0.0), 0.0)
    snapshots = {"ev": snap("ev", powertrain=Powertrain.PURE_EV), "hv": snap("hv")}
    commands = coord.step(0.0, snapshots, background_level=0.0)
    ev_commands = [c for c in commands if c.vehicle_id == "ev"]
    assert [c.mode for c in ev_commands] == [VehicleMode.ELECTRIC]
    ev_row = next(r for r in coord.command_log if r.vehicle_id == "ev")
    assert ev_row.assignment == 1.0  # zero-rate vehicles enter the problem at x=1
    assert ev_row.emission_rate == 0.0


def test_pure_ice_member_never_commanded(table):
    coord = make_coordinator(table)
    fence = coord.on_detection("tag-1", (0.0, 0.0), 0.0)
    snapshots = {"ice": snap("ice", powertrain=Powertrain.PURE_ICE), "hv": snap("hv")}
    commands = coord.step(0.0, snapshots, background_level=0.0)
    assert all(c.vehicle_id != "ice" for c in commands)
    assert all(r.vehicle_id != "ice" for r in coord.command_log)
    assert "ice" in fence.member_ids  # geometrically still a member


def test_members_outside_are_never_commanded(table):
    coord = make_coordinator(table)
    coord.on_detection("tag-1", (0.0, 0.0), 0.0)
    snapshots = {"in": snap("in"), "far": snap("far", pos=(500.0, 0.0))}
    commands = coord.step(0.0, snapshots, background_level=0.0)
    assert {c.vehicle_id for c in commands} == {"in"}


def test_vehicle_leaving_fence_reverts_next_step(table):
    coord = make_coordinator(table)
    coord.on_detection("tag-1", (0.0, 0.0), 0.0)
    coord.step(0.0, {"v1": snap("v1")}, background_level=0.0)
    commands = coord.step(1.0, {"v1": snap("v1", pos=(300.0, 0.0))}, background_level=0.0)
    assert [(c.vehicle_id, c.mode) for c in commands] == [("v1", VehicleMode.POLLUTING)]
    restored_row = coord.command_log[-1]
    assert restored_row.assignment is None
    assert restored_row.commanded_mode == "polluting"


def test_actuation_latency_delays_effect(table):
    config = ControllerConfig.hil_emulation()
    assert config.tau == 5.0 and config.actuation_latency == 5.0
    coord = make_coordinator(table, config=config)
    coord.on_detection("tag-1", (0.0, 0.0), 0.0)
    commands = coord.step(0.0, {"v1": snap("v1")}, background_level=0.0)
    assert commands[0].effective_time == 5.0


def test_fresh_solve_when_membership_changes_between_solves(table):
    config = ControllerConfig(tau=10.0, switch_interval=1.0)
    coord = make_coordinator(table, config=config)
    coord.on_detection("tag-1", (0.0, 0.0), 0.0)
    coord.step(0.0, {"v1": snap("v1")}, background_level=0.0)
    # new member appears before the next scheduled solve; it must be re-solved
    snapshots = {"v1": snap("v1"), "v2": snap("v2", pos=(5.0, 0.0))}
    commands = coord.step(1.0, snapshots, background_level=0.0)
    assert {c.vehicle_id for c in commands} == {"v1", "v2"}


def test_force_detector_electric(table):
    config = ControllerConfig(force_detector_electric=True)
    coord = make_coordinator(table, config=config)
    coord.on_detection("tag-1", (0.0, 0.0), 0.0, detecting_vehicle_id="v1")
    snapshots = {"v1": snap("v1"), "v2": snap("v2", pos=(3.0, 0.0))}
    commands = coord.step(0.0, snapshots, background_level=0.0)
    modes = {c.vehicle_id: c.mode for c in commands}
    assert modes["v1"] == VehicleMode.ELECTRIC
    detector_rows = [r for r in coord.command_log if r.vehicle_id == "v1"]
    assert all(r.assignment is None for r in detector_rows)


# -- coin toss ------------------------------------------------------------------


def test_toss_extremes_are_exact():
    rng = random.Random(1)
    assert all(toss_polluting(1.0, rng)[0] for _ in range(1000))
    assert not any(toss_polluting(0.0, rng)[0] for _ in range(1000))


def test_toss_frequency_near_half():
    rng = random.Random("42:toss")
    hits = sum(1 for _ in range(10_000) if toss_polluting(0.5, rng)[0])
    assert 0.48 <= hits / 10_000 <= 0.52


# -- single-vehicle mode ---------------------------------------------------------


def test_single_vehicle_mode_rule():
    config = ControllerConfig()
    assert single_vehicle_mode(0.0, 0.0, config) == VehicleMode.ELECTRIC
    assert single_vehicle_mode(0.0, 20.0, config) == VehicleMode.ELECTRIC
    assert single_vehicle_mode(0.0, 20.1, config) == VehicleMode.POLLUTING
    assert single_vehicle_mode(None, 5.0, config) == VehicleMode.POLLUTING


def test_single_vehicle_step_cycle(table):
    coord = make_coordinator(table, single_vehicle=True)
    snapshots = {"v1": snap("v1")}
    coord.on_detection("tag-1", (0.0, 0.0), 0.0, detecting_vehicle_id="v1")
    assert coord.fences == {}  # no fences in this mode
    commands = coord.step(0.0, snapshots, background_level=0.0)
    assert [(c.vehicle_id, c.mode) for c in commands] == [("v1", VehicleMode.ELECTRIC)]
    # refreshed detections keep it electric with no re-issued command
    coord.on_detection("tag-1", (0.0, 0.0), 5.0, detecting_vehicle_id="v1")
    assert coord.step(6.0, snapshots, background_level=0.0) == []
    assert coord.step(25.0, snapshots, background_level=0.0) == []  # 25 - 5 <= 20
    commands = coord.step(25.1, snapshots, background_level=0.0)
    assert [(c.vehicle_id, c.mode) for c in commands] == [("v1", VehicleMode.POLLUTING)]


def test_config_validation():
    with pytest.raises(ValueError):
        ControllerConfig(tau=0.0)
    with pytest.raises(ValueError):
        ControllerConfig(expiry_timeout=-1.0)
    with pytest.raises(ValueError):
        ControllerConfig(actuation_latency=-0.1)
    with pytest.raises(ValueError):
        ControllerConfig(radius=0.0)
    assert ControllerConfig(switch_interval=2.0).toss_interval == 2.0
    assert ControllerConfig(tau=3.0).toss_interval == 3.0


def test_budget_in_expectation_over_many_ticks(table):
    # long horizon, static membership: every tick's expected spend stays
    # within the budget
    coord = make_coordinator(table)
    coord.on_detection("tag-1", (0.0, 0.0), 0.0)
    snapshots = {
        f"v{i}": snap(f"v{i}", pos=(float(i), 0.0), euro=1 + i % 4) for i in range(8)
    }
    for t in range(400):
        coord.on_detection("tag-1", (0.0, 0.0), float(t))
        coord.step(float(t), snapshots, background_level=0.0)
    spend_by_tick = {}
    for row in coord.command_log:
        if row.assignment is not None:
            spend_by_tick.setdefault(row.sim_time, 0.0)
            spend_by_tick[row.sim_time] += row.assignment * row.emission_rate
    assert len(spend_by_tick) == 400
    assert all(v <= 1.0 + 1e-9 for v in spend_by_tick.values())
