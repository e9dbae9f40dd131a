"""Geofence lifecycle and probabilistic mode commands.

The coordinator is the single decision authority of the system.  It owns
the set of active geofences (created when a vehicle detects a cyclist,
re-centred on every detection, removed after a detection-free timeout),
derives the emission budget from a background pollution reading, solves
the assignment problem for the vehicles inside each fence, and enacts the
result by a weighted coin toss per vehicle: polluting with probability
``x_i``, electric otherwise.

All state mutation happens through a serialized sequence of
``on_detection`` / ``step`` calls made by the simulation loop; the object
holds no threads or global state and can be moved wholesale between
execution contexts.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum

from .emissions import CoefficientTable, Pollutant, vehicle_emission_rate
from .optimizer import Assignment, GeofenceProblem, ProblemEntry, solve

Position = tuple[float, float]


class VehicleMode(Enum):
    POLLUTING = "polluting"
    ELECTRIC = "electric"


class Powertrain(Enum):
    HYBRID = "hybrid"
    PURE_EV = "pure_ev"
    PURE_ICE = "pure_ice"


@dataclass(frozen=True)
class ControllerConfig:
    """Timing and budget parameters of the decision loop.

    ``tau`` is the interval between optimization decisions,
    ``switch_interval`` the interval between coin tosses (defaults to
    ``tau`` so every decision is enacted immediately).  ``allowable_limit``
    is the fixed aggregate allowance the background reading is referenced
    against.  ``actuation_latency`` delays the effect of every command;
    the HIL-emulation preset uses it to mimic a real drivetrain.
    """

    tau: float = 1.0
    expiry_timeout: float = 20.0
    allowable_limit: float = 1.0
    actuation_latency: float = 0.0
    switch_interval: float | None = None
    radius: float = 100.0
    force_detector_electric: bool = False

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.expiry_timeout <= 0:
            raise ValueError("expiry_timeout must be positive")
        if self.actuation_latency < 0:
            raise ValueError("actuation_latency must be non-negative")
        if self.switch_interval is not None and self.switch_interval <= 0:
            raise ValueError("switch_interval must be positive")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if not math.isfinite(self.allowable_limit):
            raise ValueError("allowable_limit must be finite")

    @property
    def toss_interval(self) -> float:
        return self.switch_interval if self.switch_interval is not None else self.tau

    @classmethod
    def hil_emulation(cls, **overrides) -> "ControllerConfig":
        """Preset mimicking a real vehicle: 5 s decisions, 5 s actuation."""
        params = {"tau": 5.0, "actuation_latency": 5.0}
        params.update(overrides)
        return cls(**params)


@dataclass(frozen=True)
class BackgroundReading:
    """Background pollution inside the fence, as level and headroom delta.

    ``delta`` is the level minus the allowable limit; a positive delta
    means background alone already exceeds the allowance.
    """

    level: float
    delta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.level) and math.isfinite(self.delta)):
            raise ValueError("background reading must be finite")

    @classmethod
    def from_level(cls, level: float, config: ControllerConfig) -> "BackgroundReading":
        return cls(level=level, delta=level - config.allowable_limit)


def compute_limit(config: ControllerConfig, background: BackgroundReading) -> float:
    """Emission budget for the fence: allowance minus measured background.

    May be <= 0, in which case the downstream solve commands every vehicle
    electric.
    """
    return config.allowable_limit - background.level


@dataclass
class Geofence:
    """A circular regulated zone bound to one detected cyclist tag."""

    fence_id: str
    center: Position
    radius: float
    created_at: float
    last_detection_at: float
    member_ids: tuple[str, ...] = ()
    last_detector_id: str | None = None

    def is_active(self, now: float, timeout: float) -> bool:
        return now - self.last_detection_at <= timeout


@dataclass(frozen=True)
class VehicleSnapshot:
    """What the coordinator is told about one vehicle at a decision instant.

    ``density_weight`` is the cyclist-density weight of the road edge the
    vehicle currently occupies; ``speed`` is its current speed in km/h.
    """

    vehicle_id: str
    position: Position
    speed: float
    euro_class: int
    powertrain: Powertrain
    density_weight: float
    mode: VehicleMode = VehicleMode.POLLUTING


@dataclass(frozen=True)
class ModeCommand:
    """An instruction to a vehicle, effective after the actuation latency."""

    vehicle_id: str
    mode: VehicleMode
    issued_at: float
    effective_time: float


@dataclass(frozen=True)
class CommandRecord:
    """One append-only audit row per issued command.

    Assignment fields are None for restore commands (fence expiry or a
    vehicle leaving the fence) and for single-vehicle-mode commands.
    """

    sim_time: float
    fence_id: str
    vehicle_id: str
    density: float | None
    emission_rate: float | None
    assignment: float | None
    draw: float | None
    commanded_mode: str
    effective_time: float


def euclidean(a: Position, b: Position) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def members(fence: Geofence, positions: dict[str, Position]) -> set[str]:
    """Vehicle ids within the fence radius (boundary inclusive)."""
    return {
        vid for vid, pos in positions.items() if euclidean(pos, fence.center) <= fence.radius
    }


def toss_polluting(x: float, rng: random.Random) -> tuple[bool, float]:
    """Weighted coin toss: polluting iff the uniform draw lands below x.

    Draws are from [0, 1), so x = 1 is always polluting and x = 0 never is.
    """
    u = rng.random()
    return u < x, u


def single_vehicle_mode(last_detection_at: float | None, now: float, config: ControllerConfig) -> VehicleMode:
    """Mode rule for single-vehicle operation: electric while a detection
    is fresher than the expiry timeout, polluting otherwise."""
    if last_detection_at is None:
        return VehicleMode.POLLUTING
    if now - last_detection_at <= config.expiry_timeout:
        return VehicleMode.ELECTRIC
    return VehicleMode.POLLUTING


class GeofenceCoordinator:
    """Serialized decision authority over fences, budgets and mode commands.

    The simulation loop feeds it detections and one ``step`` call per time
    step; it returns the mode commands to schedule.  With
    ``control_enabled=False`` it still tracks fence lifecycle (so baseline
    runs record comparable fence state) but never solves, never draws from
    the toss stream and never issues commands.
    """

    def __init__(
        self,
        config: ControllerConfig,
        table: CoefficientTable,
        rng: random.Random,
        pollutant: Pollutant = Pollutant.CO,
        control_enabled: bool = True,
        single_vehicle: bool = False,
    ) -> None:
        self.config = config
        self.table = table
        self.rng = rng
        self.pollutant = pollutant
        self.control_enabled = control_enabled
        self.single_vehicle = single_vehicle
        self.fences: dict[str, Geofence] = {}
        self.command_log: list[CommandRecord] = []
        self._assignments: dict[str, Assignment] = {}
        self._solved_members: dict[str, tuple[str, ...]] = {}
        self._next_solve: dict[str, float] = {}
        self._next_toss: dict[str, float] = {}
        self._controlled: dict[str, str] = {}  # hybrid vehicle -> fence id
        self._single_seen: dict[str, tuple[float, str]] = {}  # vehicle -> (time, cyclist)
        self._single_electric: set[str] = set()

    # -- lifecycle ---------------------------------------------------------

    def on_detection(
        self,
        cyclist_id: str,
        position: Position,
        now: float,
        detecting_vehicle_id: str | None = None,
    ) -> Geofence | None:
        """Register a detection: create or re-centre the cyclist's fence.

        The fence centre is the detecting vehicle's location, the only
        cyclist-position proxy the system has.  In single-vehicle mode no
        fence is kept; the detecting vehicle's own timer is refreshed.
        """
        if self.single_vehicle:
            if detecting_vehicle_id is not None:
                self._single_seen[detecting_vehicle_id] = (now, cyclist_id)
            return None
        fence = self.fences.get(cyclist_id)
        if fence is None:
            fence = Geofence(
                fence_id=cyclist_id,
                center=position,
                radius=self.config.radius,
                created_at=now,
                last_detection_at=now,
                last_detector_id=detecting_vehicle_id,
            )
            self.fences[cyclist_id] = fence
            self._next_solve[cyclist_id] = now
            self._next_toss[cyclist_id] = now
        else:
            fence.center = position
            fence.last_detection_at = now
            fence.last_detector_id = detecting_vehicle_id
        return fence

    def expire(self, now: float) -> list[ModeCommand]:
        """Drop fences whose last detection is stale and restore their members.

        A fence is retained at exactly the timeout boundary and removed
        strictly after it.
        """
        commands: list[ModeCommand] = []
        for fence_id in list(self.fences):
            fence = self.fences[fence_id]
            if not fence.is_active(now, self.config.expiry_timeout):
                del self.fences[fence_id]
                self._assignments.pop(fence_id, None)
                self._solved_members.pop(fence_id, None)
                self._next_solve.pop(fence_id, None)
                self._next_toss.pop(fence_id, None)
                for vid in sorted(v for v, f in self._controlled.items() if f == fence_id):
                    commands.append(self._restore(vid, fence_id, now))
        return commands

    def _restore(self, vehicle_id: str, fence_id: str, now: float) -> ModeCommand:
        del self._controlled[vehicle_id]
        effective = now + self.config.actuation_latency
        self.command_log.append(
            CommandRecord(
                sim_time=now,
                fence_id=fence_id,
                vehicle_id=vehicle_id,
                density=None,
                emission_rate=None,
                assignment=None,
                draw=None,
                commanded_mode=VehicleMode.POLLUTING.value,
                effective_time=effective,
            )
        )
        return ModeCommand(vehicle_id, VehicleMode.POLLUTING, now, effective)

    # -- decisions ---------------------------------------------------------

    def _controllable(self, fence: Geofence, snapshots: dict[str, VehicleSnapshot]) -> list[VehicleSnapshot]:
        """Fence members the coordinator may command, ascending vehicle id.

        Pure-ICE vehicles cannot switch drivetrain and are left alone; the
        optional detector forcing removes the detecting vehicle from the
        problem as well (it is commanded electric directly).
        """
        out = []
        for vid in fence.member_ids:
            snap = snapshots[vid]
            if snap.powertrain is Powertrain.PURE_ICE:
                continue
            if self.config.force_detector_electric and vid == fence.last_detector_id:
                continue
            out.append(snap)
        return out

    def build_problem(
        self,
        fence: Geofence,
        snapshots: dict[str, VehicleSnapshot],
        background: BackgroundReading,
    ) -> GeofenceProblem:
        """Assemble the assignment problem for one fence.

        Emission rates are recomputed from each member's current speed at
        every decision; pure EVs enter with a zero rate so the solver hands
        them probability 1 at no budget cost.
        """
        entries = []
        for snap in self._controllable(fence, snapshots):
            if snap.powertrain is Powertrain.PURE_EV:
                rate = 0.0
            else:
                rate = vehicle_emission_rate(snap.euro_class, self.pollutant, snap.speed, self.table)
            entries.append(ProblemEntry(snap.vehicle_id, snap.density_weight, rate))
        return GeofenceProblem(entries=tuple(entries), limit=compute_limit(self.config, background))

    def decision_tick(
        self,
        fence: Geofence,
        snapshots: dict[str, VehicleSnapshot],
        background: BackgroundReading,
        now: float,
    ) -> list[ModeCommand]:
        """Solve the fence's problem and toss every member's coin.

        One uniform draw is consumed per controllable member in ascending
        vehicle-id order.  Pure EVs keep their draw for stream stability but
        are always commanded electric; they have no engine to pollute with.
        """
        problem = self.build_problem(fence, snapshots, background)
        assignment = solve(problem)
        self._assignments[fence.fence_id] = assignment
        self._solved_members[fence.fence_id] = tuple(e.vehicle_id for e in problem.entries)
        return self._toss_fence(fence, problem, assignment, snapshots, now)

    def _toss_fence(
        self,
        fence: Geofence,
        problem: GeofenceProblem,
        assignment: Assignment,
        snapshots: dict[str, VehicleSnapshot],
        now: float,
    ) -> list[ModeCommand]:
        commands: list[ModeCommand] = []
        effective = now + self.config.actuation_latency
        forced_detector: str | None = None
        if self.config.force_detector_electric and fence.last_detector_id in fence.member_ids:
            snap = snapshots[fence.last_detector_id]
            if snap.powertrain is not Powertrain.PURE_ICE:
                forced_detector = fence.last_detector_id
        for entry in problem.entries:
            snap = snapshots[entry.vehicle_id]
            x = assignment.values[entry.vehicle_id]
            polluting, draw = toss_polluting(x, self.rng)
            if snap.powertrain is Powertrain.PURE_EV:
                mode = VehicleMode.ELECTRIC
            else:
                mode = VehicleMode.POLLUTING if polluting else VehicleMode.ELECTRIC
                self._controlled[entry.vehicle_id] = fence.fence_id
            commands.append(ModeCommand(entry.vehicle_id, mode, now, effective))
            self.command_log.append(
                CommandRecord(
                    sim_time=now,
                    fence_id=fence.fence_id,
                    vehicle_id=entry.vehicle_id,
                    density=entry.density,
                    emission_rate=entry.emission_rate,
                    assignment=x,
                    draw=draw,
                    commanded_mode=mode.value,
                    effective_time=effective,
                )
            )
        if forced_detector is not None:
            self._controlled[forced_detector] = fence.fence_id
            commands.append(ModeCommand(forced_detector, VehicleMode.ELECTRIC, now, effective))
            self.command_log.append(
                CommandRecord(
                    sim_time=now,
                    fence_id=fence.fence_id,
                    vehicle_id=forced_detector,
                    density=None,
                    emission_rate=None,
                    assignment=None,
                    draw=None,
                    commanded_mode=VehicleMode.ELECTRIC.value,
                    effective_time=effective,
                )
            )
        return commands

    # -- per-step driver -----------------------------------------------------

    def step(
        self,
        now: float,
        snapshots: dict[str, VehicleSnapshot],
        background_level: float,
    ) -> list[ModeCommand]:
        """Advance the coordinator one simulation step.

        Order: expire stale fences, recompute memberships, restore vehicles
        that left every fence, then solve/toss each fence at its cadence.
        Membership changes force a fresh solve so the expected-rate budget
        always reflects the vehicles actually being tossed.
        """
        if self.single_vehicle:
            return self._single_step(now, snapshots)
        commands = self.expire(now)
        positions = {vid: snap.position for vid, snap in snapshots.items()}
        for fence in self.fences.values():
            fence.member_ids = tuple(sorted(members(fence, positions)))
        for vid in sorted(self._controlled):
            if vid not in snapshots:
                del self._controlled[vid]  # vehicle left the network
                continue
            if not any(vid in f.member_ids for f in self.fences.values()):
                commands.append(self._restore(vid, self._controlled[vid], now))
        if not self.control_enabled:
            return commands
        background = BackgroundReading.from_level(background_level, self.config)
        for fence_id in sorted(self.fences):
            fence = self.fences[fence_id]
            controllable = tuple(s.vehicle_id for s in self._controllable(fence, snapshots))
            solve_due = now >= self._next_solve[fence_id]
            toss_due = now >= self._next_toss[fence_id]
            if toss_due and not solve_due:
                solve_due = self._solved_members.get(fence_id) != controllable
            if solve_due:
                self._next_solve[fence_id] = now + self.config.tau
            if toss_due:
                self._next_toss[fence_id] = now + self.config.toss_interval
            if solve_due and toss_due:
                commands.extend(self.decision_tick(fence, snapshots, background, now))
            elif solve_due:
                problem = self.build_problem(fence, snapshots, background)
                self._assignments[fence_id] = solve(problem)
                self._solved_members[fence_id] = tuple(e.vehicle_id for e in problem.entries)
            elif toss_due:
                problem = self.build_problem(fence, snapshots, background)
                commands.extend(
                    self._toss_fence(fence, problem, self._assignments[fence_id], snapshots, now)
                )
        return commands

    def _single_step(self, now: float, snapshots: dict[str, VehicleSnapshot]) -> list[ModeCommand]:
        """Single-vehicle operation: each detector goes electric for the
        timeout window after its own detections, then reverts."""
        commands: list[ModeCommand] = []
        effective = now + self.config.actuation_latency
        for vid in sorted(self._single_seen):
            last, cyclist_id = self._single_seen[vid]
            if vid not in snapshots:
                del self._single_seen[vid]
                self._single_electric.discard(vid)
                continue
            if snapshots[vid].powertrain is Powertrain.PURE_ICE:
                continue
            mode = single_vehicle_mode(last, now, self.config)
            if mode is VehicleMode.ELECTRIC and vid not in self._single_electric:
                self._single_electric.add(vid)
            elif mode is VehicleMode.POLLUTING and vid in self._single_electric:
                self._single_electric.discard(vid)
                del self._single_seen[vid]
                if snapshots[vid].powertrain is Powertrain.PURE_EV:
                    continue
            else:
                continue
            commands.append(ModeCommand(vid, mode, now, effective))
            self.command_log.append(
                CommandRecord(
                    sim_time=now,
                    fence_id=cyclist_id,
                    vehicle_id=vid,
                    density=None,
                    emission_rate=None,
                    assignment=None,
                    draw=None,
                    commanded_mode=mode.value,
                    effective_time=effective,
                )
            )
        return commands

    def active_fences(self) -> list[Geofence]:
        return [self.fences[fid] for fid in sorted(self.fences)]

    def current_assignment(self, fence_id: str) -> Assignment | None:
        return self._assignments.get(fence_id)
