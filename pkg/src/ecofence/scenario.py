"""Scenario files: schema, validation and canonical round-tripping.

A scenario is a JSON document describing the road network, the fleet spawn
table, the cyclist route and the control configuration.  Loading collects
*all* schema violations (with field paths) instead of failing on the first
one.  See the README for the documented schema; `Scenario.to_dict` emits
the canonical form, and loading that form back yields an equal scenario.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Any

from .coordinator import ControllerConfig, Powertrain
from .network import Edge, RoadNetwork

BackgroundSeries = tuple[tuple[float, float], ...]

_POWERTRAINS = {p.value: p for p in Powertrain}


class ScenarioError(Exception):
    """Scenario or density file failed validation; carries all violations."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class FleetEntry:
    vehicle_id: str
    spawn_time: float
    route: tuple[str, ...]
    euro_class: int | None = None  # None: drawn from the seeded spawn stream
    speed: float | None = None  # None: follow each edge's speed limit
    powertrain: Powertrain = Powertrain.HYBRID


@dataclass(frozen=True)
class CyclistSpec:
    cyclist_id: str
    route: tuple[str, ...]
    speed: float
    spawn_time: float = 0.0


@dataclass(frozen=True)
class Scenario:
    name: str
    horizon: float
    dt: float
    network: RoadNetwork
    fleet: tuple[FleetEntry, ...]
    cyclists: tuple[CyclistSpec, ...]
    controller: ControllerConfig
    control_enabled: bool = True
    single_vehicle: bool = False
    detection_range: float = 10.0
    background: BackgroundSeries = ((0.0, 0.0),)

    def background_at(self, t: float) -> float:
        """Piecewise-constant background level at time ``t``."""
        level = self.background[0][1]
        for when, value in self.background:
            if when <= t:
                level = value
            else:
                break
        return level

    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def to_dict(self) -> dict[str, Any]:
        """Canonical JSON-ready form; load(to_dict()) round-trips."""
        edges = [
            {
                "edge_id": e.edge_id,
                "points": [[x, y] for x, y in e.points],
                "speed_limit": e.speed_limit,
                "density_weight": e.density_weight,
            }
            for e in sorted(self.network.edges.values(), key=lambda e: e.edge_id)
        ]
        fleet = [
            {
                "vehicle_id": f.vehicle_id,
                "spawn_time": f.spawn_time,
                "route": list(f.route),
                "euro_class": f.euro_class,
                "speed": f.speed,
                "powertrain": f.powertrain.value,
            }
            for f in self.fleet
        ]
        cyclists = [
            {
                "cyclist_id": c.cyclist_id,
                "spawn_time": c.spawn_time,
                "route": list(c.route),
                "speed": c.speed,
            }
            for c in self.cyclists
        ]
        return {
            "name": self.name,
            "horizon": self.horizon,
            "dt": self.dt,
            "network": {"edges": edges},
            "fleet": fleet,
            "cyclists": cyclists,
            "control": {
                "enabled": self.control_enabled,
                "single_vehicle": self.single_vehicle,
                "radius": self.controller.radius,
                "limit": self.controller.allowable_limit,
                "tau": self.controller.tau,
                "switch_interval": self.controller.switch_interval,
                "expiry_timeout": self.controller.expiry_timeout,
                "detection_range": self.detection_range,
                "actuation_latency": self.controller.actuation_latency,
                "force_detector_electric": self.controller.force_detector_electric,
                "background": [[t, v] for t, v in self.background],
            },
        }


def _number(data: dict, key: str, problems: list[str], where: str, default=None):
    value = data.get(key, default)
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        problems.append(f"{where}.{key}: must be a finite number, got {value!r}")
        return default
    return float(value)


def _parse_background(raw: Any, problems: list[str], where: str) -> BackgroundSeries:
    if raw is None:
        return ((0.0, 0.0),)
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        if not math.isfinite(raw):
            problems.append(f"{where}: background must be finite")
            return ((0.0, 0.0),)
        return ((0.0, float(raw)),)
    if not isinstance(raw, list) or not raw:
        problems.append(f"{where}: background must be a number or [[time, level], ...]")
        return ((0.0, 0.0),)
    series: list[tuple[float, float]] = []
    for i, pair in enumerate(raw):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in pair)
        ):
            problems.append(f"{where}[{i}]: breakpoint must be [time, level]")
            return ((0.0, 0.0),)
        series.append((float(pair[0]), float(pair[1])))
    if series[0][0] != 0.0:
        problems.append(f"{where}: first breakpoint must be at time 0")
    for (t0, _), (t1, _) in zip(series, series[1:]):
        if t1 <= t0:
            problems.append(f"{where}: breakpoint times must be strictly increasing")
            break
    return tuple(series)


def parse_scenario(data: dict[str, Any]) -> Scenario:
    """Build a Scenario from parsed JSON, collecting every violation."""
    problems: list[str] = []
    name = data.get("name", "unnamed")
    horizon = _number(data, "horizon", problems, "scenario")
    if horizon is None or horizon <= 0:
        problems.append("scenario.horizon: must be a positive number")
        horizon = 1.0
    dt = _number(data, "dt", problems, "scenario", default=1.0)
    if dt is None or dt <= 0:
        problems.append("scenario.dt: must be a positive number")
        dt = 1.0

    edges: dict[str, Edge] = {}
    raw_edges = data.get("network", {}).get("edges", [])
    if not raw_edges:
        problems.append("network.edges: must not be empty")
    for i, raw in enumerate(raw_edges):
        where = f"network.edges[{i}]"
        eid = raw.get("edge_id")
        if not isinstance(eid, str) or not eid:
            problems.append(f"{where}.edge_id: must be a non-empty string")
            continue
        if eid in edges:
            problems.append(f"{where}.edge_id: duplicate edge {eid!r}")
            continue
        points_raw = raw.get("points", [])
        points = []
        ok = True
        for j, pt in enumerate(points_raw):
            if (
                not isinstance(pt, list)
                or len(pt) != 2
                or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in pt)
            ):
                problems.append(f"{where}.points[{j}]: must be [x, y]")
                ok = False
                break
            points.append((float(pt[0]), float(pt[1])))
        if not ok:
            continue
        speed_limit = _number(raw, "speed_limit", problems, where)
        weight = _number(raw, "density_weight", problems, where, default=1.0)
        try:
            edges[eid] = Edge(
                edge_id=eid,
                points=tuple(points),
                speed_limit=speed_limit if speed_limit is not None else 0.0,
                density_weight=weight if weight is not None else 1.0,
            )
        except ValueError as exc:
            problems.append(f"{where}: {exc}")
    network = RoadNetwork(edges=edges)

    def parse_route(raw: dict, where: str) -> tuple[str, ...]:
        route_raw = raw.get("route", [])
        if not isinstance(route_raw, list) or not all(isinstance(e, str) for e in route_raw):
            problems.append(f"{where}.route: must be a list of edge ids")
            return ()
        repeat = raw.get("repeat", 1)
        if not isinstance(repeat, int) or isinstance(repeat, bool) or repeat < 1:
            problems.append(f"{where}.repeat: must be a positive integer")
            repeat = 1
        route = tuple(route_raw) * repeat
        if edges:
            route_issues = network.route_problems(tuple(route_raw), where)
            if not route_issues and repeat > 1:
                # the repeat seam must chain too
                route_issues = network.route_problems(
                    (route_raw[-1], route_raw[0]), where + ".repeat-seam"
                )
            problems.extend(route_issues)
        return route

    fleet: list[FleetEntry] = []
    seen_vehicles: set[str] = set()
    for i, raw in enumerate(data.get("fleet", [])):
        where = f"fleet[{i}]"
        vid = raw.get("vehicle_id")
        if not isinstance(vid, str) or not vid:
            problems.append(f"{where}.vehicle_id: must be a non-empty string")
            vid = f"?fleet{i}"
        elif vid in seen_vehicles:
            problems.append(f"{where}.vehicle_id: duplicate vehicle {vid!r}")
        seen_vehicles.add(vid)
        spawn_time = _number(raw, "spawn_time", problems, where, default=0.0)
        if spawn_time is None or spawn_time < 0:
            problems.append(f"{where}.spawn_time: must be >= 0")
            spawn_time = 0.0
        euro_class = raw.get("euro_class")
        if euro_class is not None and euro_class not in (1, 2, 3, 4):
            problems.append(f"{where}.euro_class: must be 1..4 or null, got {euro_class!r}")
            euro_class = None
        speed = _number(raw, "speed", problems, where)
        if speed is not None and speed <= 0:
            problems.append(f"{where}.speed: must be positive when given")
            speed = None
        pt_raw = raw.get("powertrain", "hybrid")
        powertrain = _POWERTRAINS.get(pt_raw)
        if powertrain is None:
            problems.append(
                f"{where}.powertrain: must be one of {sorted(_POWERTRAINS)}, got {pt_raw!r}"
            )
            powertrain = Powertrain.HYBRID
        fleet.append(
            FleetEntry(
                vehicle_id=vid,
                spawn_time=spawn_time,
                route=parse_route(raw, where),
                euro_class=euro_class,
                speed=speed,
                powertrain=powertrain,
            )
        )
    # canonical spawn order: by time, then id
    fleet.sort(key=lambda f: (f.spawn_time, f.vehicle_id))

    cyclists: list[CyclistSpec] = []
    raw_cyclists = data.get("cyclists")
    if raw_cyclists is None:
        single = data.get("cyclist")
        raw_cyclists = [single] if single is not None else []
    seen_cyclists: set[str] = set()
    for i, raw in enumerate(raw_cyclists):
        where = f"cyclists[{i}]"
        cid = raw.get("cyclist_id")
        if not isinstance(cid, str) or not cid:
            problems.append(f"{where}.cyclist_id: must be a non-empty string")
            cid = f"?cyclist{i}"
        elif cid in seen_cyclists:
            problems.append(f"{where}.cyclist_id: duplicate cyclist {cid!r}")
        seen_cyclists.add(cid)
        speed = _number(raw, "speed", problems, where)
        if speed is None or speed <= 0:
            problems.append(f"{where}.speed: must be a positive number")
            speed = 1.0
        spawn_time = _number(raw, "spawn_time", problems, where, default=0.0)
        if spawn_time is None or spawn_time < 0:
            problems.append(f"{where}.spawn_time: must be >= 0")
            spawn_time = 0.0
        cyclists.append(
            CyclistSpec(cyclist_id=cid, route=parse_route(raw, where), speed=speed, spawn_time=spawn_time)
        )
    cyclists.sort(key=lambda c: (c.spawn_time, c.cyclist_id))

    control = data.get("control", {})
    where = "control"
    enabled = control.get("enabled", True)
    single_vehicle = control.get("single_vehicle", False)
    force_detector = control.get("force_detector_electric", False)
    for flag_name, flag in (
        ("enabled", enabled),
        ("single_vehicle", single_vehicle),
        ("force_detector_electric", force_detector),
    ):
        if not isinstance(flag, bool):
            problems.append(f"{where}.{flag_name}: must be true or false")
    radius = _number(control, "radius", problems, where, default=100.0)
    limit = _number(control, "limit", problems, where, default=1.0)
    tau = _number(control, "tau", problems, where, default=1.0)
    switch_interval = _number(control, "switch_interval", problems, where)
    timeout = _number(control, "expiry_timeout", problems, where, default=20.0)
    detection_range = _number(control, "detection_range", problems, where, default=10.0)
    latency = _number(control, "actuation_latency", problems, where, default=0.0)
    background = _parse_background(control.get("background"), problems, f"{where}.background")
    if detection_range is None or detection_range <= 0:
        problems.append(f"{where}.detection_range: must be positive")
        detection_range = 10.0
    try:
        controller = ControllerConfig(
            tau=tau if tau is not None else 1.0,
            expiry_timeout=timeout if timeout is not None else 20.0,
            allowable_limit=limit if limit is not None else 1.0,
            actuation_latency=latency if latency is not None else 0.0,
            switch_interval=switch_interval,
            radius=radius if radius is not None else 100.0,
            force_detector_electric=bool(force_detector),
        )
    except ValueError as exc:
        problems.append(f"{where}: {exc}")
        controller = ControllerConfig()

    if problems:
        raise ScenarioError(problems)
    return Scenario(
        name=str(name),
        horizon=horizon,
        dt=dt,
        network=network,
        fleet=tuple(fleet),
        cyclists=tuple(cyclists),
        controller=controller,
        control_enabled=bool(enabled),
        single_vehicle=bool(single_vehicle),
        detection_range=detection_range,
        background=background,
    )


def load_scenario(path) -> Scenario:
    """Load and validate a scenario JSON file."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ScenarioError([f"{path}: not valid JSON ({exc})"]) from None
    if not isinstance(data, dict):
        raise ScenarioError([f"{path}: top level must be an object"])
    return parse_scenario(data)


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(scenario.to_dict(), handle, indent=2)
        handle.write("\n")


def load_density_file(path, network: RoadNetwork) -> dict[str, float]:
    """Load per-edge cyclist-density weights (CSV: edge_id,weight).

    Unknown edges and weights below 1.0 are rejected; all violations are
    reported together.
    """
    problems: list[str] = []
    weights: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if parts == ["edge_id", "weight"]:
                continue
            if len(parts) != 2:
                problems.append(f"line {lineno}: expected 'edge_id,weight'")
                continue
            eid, raw_weight = parts
            try:
                weight = float(raw_weight)
            except ValueError:
                problems.append(f"line {lineno}: weight {raw_weight!r} is not a number")
                continue
            if eid not in network.edges:
                problems.append(f"line {lineno}: unknown edge {eid!r}")
                continue
            if not math.isfinite(weight) or weight < 1.0:
                problems.append(f"line {lineno}: weight must be >= 1.0, got {weight}")
                continue
            if eid in weights:
                problems.append(f"line {lineno}: duplicate edge {eid!r}")
                continue
            weights[eid] = weight
    if problems:
        raise ScenarioError(problems)
    return weights


def with_density(scenario: Scenario, weights: dict[str, float]) -> Scenario:
    return replace(scenario, network=scenario.network.with_density_weights(weights))
