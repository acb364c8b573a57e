"""Road geometry, vehicle flow, and car-following kinematics.

The road network is a parameterised circular two-lane loop; vehicles enter
one after another from a fixed point and keep a safe gap behind their
leader with a simple accelerate-or-brake rule. Because there is no
overtaking, ring order equals spawn order for the whole run, which keeps
leader lookup O(1) and the stepper O(n).

A :class:`StaticWorld` with fixed positions and no kinematics is provided
for protocol-only experiments (for example a line of parked vehicles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .domain import RSU as _RSU_ROLE
from .domain import EntityId, RoleKind


@dataclass(frozen=True)
class MobilityConfig:
    route_length: float = 4000.0
    lane_count: int = 2
    intersection_count: int = 4
    target_speed: float = 13.0
    accel: float = 2.0
    standstill_gap: float = 2.0
    vehicle_length: float = 4.5
    entry_headway: float = 2.0
    dt: float = 0.5
    rsu_count: int = 10
    queue_lookahead: float = 50.0  # downstream window for queue detection


@dataclass
class VehicleKinematics:
    entity: EntityId
    position: float  # arc metres along the route
    lane: int = 0
    speed: float = 0.0
    target_speed: float = 13.0
    length: float = 4.5


@dataclass(frozen=True)
class RoadSegment:
    road: str
    start: float
    end: float  # arc interval [start, end) along the loop


class CircularWorld:
    """Mutable mobility state for one trial."""

    def __init__(
        self,
        cfg: MobilityConfig,
        spawn_queue: Sequence[EntityId],
        roads: Optional[Sequence[RoadSegment]] = None,
    ) -> None:
        self.cfg = cfg
        self.route_length = cfg.route_length
        self.spawn_queue: List[EntityId] = list(spawn_queue)
        self.next_spawn_index = 0
        self.next_spawn_time = 0.0
        self.vehicles: List[VehicleKinematics] = []  # ring order = spawn order
        self._index: Dict[EntityId, int] = {}
        self.blockages: List[float] = []
        n = max(1, cfg.rsu_count)
        self.rsus: List[Tuple[EntityId, float]] = [
            (EntityId(i, _RSU_ROLE), i * cfg.route_length / n) for i in range(n)
        ]
        if roads is None:
            quarter = cfg.route_length / 4
            roads = [
                RoadSegment("X", 0.0, quarter),
                RoadSegment("Y", quarter, 2 * quarter),
                RoadSegment("Z", 2 * quarter, 3 * quarter),
                RoadSegment("W", 3 * quarter, cfg.route_length),
            ]
        self.roads: List[RoadSegment] = list(roads)
        self.check_invariants = False

    # -- geometry ----------------------------------------------------------

    def _radius(self) -> float:
        return self.route_length / (2 * math.pi)

    def point_of_arc(self, arc: float) -> Tuple[float, float]:
        theta = 2 * math.pi * (arc % self.route_length) / self.route_length
        r = self._radius()
        return (r * math.cos(theta), r * math.sin(theta))

    def arc_of(self, entity: EntityId) -> float:
        if entity.role.kind is RoleKind.RSU:
            for rsu, arc in self.rsus:
                if rsu == entity:
                    return arc
            raise KeyError(entity)
        return self.vehicles[self._index[entity]].position

    def position_of(self, entity: EntityId) -> Tuple[float, float]:
        return self.point_of_arc(self.arc_of(entity))

    def road_at(self, arc: float) -> str:
        arc %= self.route_length
        for segment in self.roads:
            if segment.start <= arc < segment.end:
                return segment.road
        return self.roads[-1].road

    def entities(self) -> List[EntityId]:
        return [v.entity for v in self.vehicles] + [rsu for rsu, _ in self.rsus]

    def arc_gap(self, behind: float, ahead: float) -> float:
        return (ahead - behind) % self.route_length

    def chord_for_radius(self, radius: float) -> float:
        """Arc length whose chord equals ``radius`` (radio range on the loop)."""
        r = self._radius()
        half = min(1.0, radius / (2 * r))
        return 2 * r * math.asin(half)

    # -- spawning ----------------------------------------------------------

    @property
    def fleet_size(self) -> int:
        return len(self.spawn_queue)

    @property
    def spawned_count(self) -> int:
        return len(self.vehicles)

    def inject_flow(self, now: float) -> None:
        """Spawn the next queued vehicle at the entry point when the entry
        gap is clear; deferred spawns retry on the next step."""
        while (
            self.next_spawn_index < len(self.spawn_queue)
            and now >= self.next_spawn_time
        ):
            if not self._entry_clear():
                return
            entity = self.spawn_queue[self.next_spawn_index]
            vehicle = VehicleKinematics(
                entity=entity,
                position=0.0,
                speed=0.0,
                target_speed=self.cfg.target_speed,
                length=self.cfg.vehicle_length,
            )
            self._index[entity] = len(self.vehicles)
            self.vehicles.append(vehicle)
            self.next_spawn_index += 1
            self.next_spawn_time = now + self.cfg.entry_headway

    def _entry_clear(self) -> bool:
        required = self.cfg.vehicle_length + self.cfg.standstill_gap
        for vehicle in self.vehicles:
            ahead = self.arc_gap(0.0, vehicle.position)
            if ahead < required or self.route_length - ahead < required:
                return False
        return True

    # -- kinematics --------------------------------------------------------

    def leader_gap(self, i: int) -> float:
        """Clear distance ahead of vehicle i, bounded by any blockage."""
        vehicle = self.vehicles[i]
        gap = math.inf
        if len(self.vehicles) > 1:
            leader = self.vehicles[i - 1]  # ring order: previous spawn is ahead
            gap = self.arc_gap(vehicle.position, leader.position) - leader.length
        for blockage in self.blockages:
            gap = min(gap, self.arc_gap(vehicle.position, blockage))
        return gap

    def step(self, dt: float) -> None:
        if dt <= 0:
            raise ValueError("dt must be positive")
        cfg = self.cfg
        speeds: List[float] = []
        for i, vehicle in enumerate(self.vehicles):
            desired = min(vehicle.target_speed, vehicle.speed + cfg.accel * dt)
            gap = self.leader_gap(i)
            if math.isfinite(gap):
                # cap the advance so the standstill gap survives even if the
                # leader does not move this step
                desired = min(desired, max(0.0, (gap - cfg.standstill_gap) / dt))
            speeds.append(desired)
        for vehicle, speed in zip(self.vehicles, speeds):
            vehicle.speed = speed
            vehicle.position = (vehicle.position + speed * dt) % self.route_length
        if self.check_invariants:
            self._assert_no_overlap()

    def _assert_no_overlap(self) -> None:
        n = len(self.vehicles)
        if n < 2:
            return
        for i, vehicle in enumerate(self.vehicles):
            leader = self.vehicles[i - 1]
            gap = self.arc_gap(vehicle.position, leader.position) - leader.length
            if gap < self.cfg.standstill_gap - 1e-9:
                raise AssertionError(
                    f"gap violation: {vehicle.entity} at {gap:.3f} m behind {leader.entity}"
                )

    # -- protocol-facing queries ------------------------------------------

    def neighbours_within(self, center: EntityId, radius: float) -> List[EntityId]:
        """All entities within Euclidean range of ``center``, excluding it."""
        if radius <= 0:
            raise ValueError("radius must be positive")
        cx, cy = self.position_of(center)
        found: List[EntityId] = []
        for entity in self.entities():
            if entity == center:
                continue
            x, y = self.position_of(entity)
            if math.hypot(x - cx, y - cy) <= radius:
                found.append(entity)
        return found

    def downstream_of(self, a: EntityId, b: EntityId) -> bool:
        """True iff b lies ahead of a along the travel direction, within half
        the loop; the diametrically-opposite tie resolves to False."""
        for entity in (a, b):
            if entity.role.kind is RoleKind.RSU:
                raise ValueError("downstream ordering is defined for vehicles only")
        ahead = self.arc_gap(self.arc_of(a), self.arc_of(b))
        return 0.0 < ahead < self.route_length / 2

    def queue_ahead(self, entity: EntityId) -> bool:
        """A slower or stopped obstruction within the lookahead window."""
        i = self._index[entity]
        vehicle = self.vehicles[i]
        for blockage in self.blockages:
            if self.arc_gap(vehicle.position, blockage) <= self.cfg.queue_lookahead:
                return True
        if len(self.vehicles) < 2:
            return False
        leader = self.vehicles[i - 1]
        ahead = self.arc_gap(vehicle.position, leader.position) - leader.length
        if ahead > self.cfg.queue_lookahead:
            return False
        return leader.speed < vehicle.speed or leader.speed < 0.1

    # -- incidents ---------------------------------------------------------

    def add_blockage(self, arc: float) -> None:
        self.blockages.append(arc % self.route_length)

    def remove_blockage(self, arc: float) -> None:
        arc %= self.route_length
        self.blockages = [b for b in self.blockages if b != arc]


class StaticWorld:
    """Fixed entity positions in the plane; no kinematics.

    Useful for protocol experiments on hand-laid topologies such as a line
    of parked vehicles with known spacing.
    """

    def __init__(self, positions: Dict[EntityId, Tuple[float, float]]) -> None:
        self.positions = dict(positions)

    def entities(self) -> List[EntityId]:
        return list(self.positions)

    def position_of(self, entity: EntityId) -> Tuple[float, float]:
        return self.positions[entity]

    def inject_flow(self, now: float) -> None:
        pass

    def step(self, dt: float) -> None:
        pass

    def neighbours_within(self, center: EntityId, radius: float) -> List[EntityId]:
        if radius <= 0:
            raise ValueError("radius must be positive")
        cx, cy = self.positions[center]
        found = []
        for entity, (x, y) in self.positions.items():
            if entity == center:
                continue
            if math.hypot(x - cx, y - cy) <= radius:
                found.append(entity)
        return found

    def downstream_of(self, a: EntityId, b: EntityId) -> bool:
        for entity in (a, b):
            if entity.role.kind is RoleKind.RSU:
                raise ValueError("downstream ordering is defined for vehicles only")
        return self.positions[b][0] > self.positions[a][0]


def step(world: CircularWorld, dt: float) -> CircularWorld:
    world.step(dt)
    return world


def neighbours_within(world, center: EntityId, radius: float) -> List[EntityId]:
    return world.neighbours_within(center, radius)


def downstream_of(world, a: EntityId, b: EntityId) -> bool:
    return world.downstream_of(a, b)


def inject_flow(world: CircularWorld, now: float) -> CircularWorld:
    world.inject_flow(now)
    return world
