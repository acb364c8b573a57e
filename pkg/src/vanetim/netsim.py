"""Deterministic discrete-event engine.

One engine instance runs one trial: a seeded event queue drives mobility
steps, radio broadcasts with range-limited delivery, wired infrastructure
links, protocol timers, and scripted incident events. Identical
(setup, seed) pairs produce byte-identical traces.

Relays are store-carry-forward: a vehicle holds a newly received message
for a jittered hold time before the forwarding decision runs, so
dissemination advances at roughly one hop per hold period. High-priority
official messages use a much shorter hold.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from . import scenarios as _scenarios
from .domain import (
    ActionSource,
    EntityId,
    Message,
    MessageIdSource,
    MessageKind,
    POLICE,
    Priority,
    RESOLUTION_KINDS,
    Role,
    RoleKind,
    TA as TA_ROLE,
    TA_REPORT_KINDS,
    VEHICLE,
    make_message,
    relayed_copy,
)
from .metrics import TrialMetrics
from .mobility import CircularWorld, MobilityConfig
from .protocol import (
    Arm,
    BROADCAST_REPORT_KINDS,
    Broadcast,
    DEFAULT_PROTOCOL_CONFIG,
    EntityState,
    IncidentStatus,
    OfficialState,
    ProtocolConfig,
    ReceivedMessage,
    RsuState,
    ServiceDirectory,
    TaState,
    VehicleState,
    Wired,
    handle_official,
    handle_official_timer,
    handle_rsu,
    handle_rsu_timer,
    handle_service_query,
    handle_ta,
    handle_ta_timer,
    relay_decision,
    rsu_scripted_resolution,
)
from .relay import RelayPolicy, record_seen

#: kinds the RSU handles through protocol rules rather than plain relaying
_RSU_PROTOCOL_KINDS = (
    frozenset({MessageKind.ACCIDENT, MessageKind.AVOID_ROAD, MessageKind.ADDRESSING_INCIDENT})
    | RESOLUTION_KINDS
    | TA_REPORT_KINDS
    | BROADCAST_REPORT_KINDS
)


@dataclass(frozen=True)
class NetConfig:
    radio_range: float = 300.0
    hop_latency: float = 0.01
    wired_latency: float = 0.005
    loss: float = 0.0
    relay_hold: float = 35.0       # store-carry-forward hold before relaying
    relay_jitter: float = 0.2      # +/- fraction applied to the hold
    official_hold: float = 0.5     # hold for high-priority messages
    detectors_enabled: bool = False


@dataclass(frozen=True)
class TrialSetup:
    script: "_scenarios.ScenarioScript"
    policy: RelayPolicy
    vehicles: int
    police: int = 0
    duration: float = 1500.0
    warmup: float = 500.0
    net: NetConfig = NetConfig()
    mobility: MobilityConfig = MobilityConfig()
    protocol: ProtocolConfig = DEFAULT_PROTOCOL_CONFIG

    def validate(self) -> None:
        if self.warmup >= self.duration:
            raise ValueError("warm-up must end before the run does")
        reporter = self.script.reporter
        if reporter.startswith("V") and reporter[1:].isdigit():
            needed = int(reporter[1:]) + 1
            if self.vehicles < needed:
                raise ValueError(
                    f"scenario reporter {reporter} requires at least {needed} vehicles"
                )
        if self.police < self.script.min_police:
            raise ValueError(
                f"scenario {self.script.name!r} requires at least "
                f"{self.script.min_police} police vehicles"
            )
        if self.script.report_time < self.warmup:
            raise ValueError("incident report must not fall inside the warm-up")


@dataclass(frozen=True)
class TraceRecord:
    time: float
    sender: str
    sender_class: RoleKind
    receiver: str  # "*" for radio broadcasts
    msg_id: str
    kind: MessageKind
    road: str
    hops: int
    source: ActionSource

    def to_line(self) -> str:
        return (
            f"{self.time:.6f},{self.sender},{self.receiver},{self.msg_id},"
            f"{self.kind.value},{self.road},{self.hops},{self.source.value}"
        )


def write_trace(trace: List[TraceRecord], path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            for record in trace:
                handle.write(record.to_line() + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def parse_trace(path) -> List[TraceRecord]:
    from .domain import role_of_label

    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for raw in handle:
            t, sender, receiver, msg_id, kind, road, hops, source = raw.strip().split(",")
            records.append(
                TraceRecord(
                    time=float(t),
                    sender=sender,
                    sender_class=role_of_label(sender),
                    receiver=receiver,
                    msg_id=msg_id,
                    kind=MessageKind(kind),
                    road=road,
                    hops=int(hops),
                    source=ActionSource(source),
                )
            )
    return records


class Engine:
    """One trial's executor; single logical thread, fully isolated state."""

    def __init__(self, setup: TrialSetup, seed: int) -> None:
        setup.validate()
        self.setup = setup
        self.seed = seed
        self.rng = random.Random(seed)
        self.ids = MessageIdSource()
        self.trace: List[TraceRecord] = []
        self.metrics = TrialMetrics()
        self.dropped_duplicates = 0
        self.now = 0.0
        self._queue: List[tuple] = []
        self._seq = 0
        self.coordinator: Optional[EntityId] = None
        self._report_ids: set = set()

        script = setup.script
        regulars = [EntityId(i, VEHICLE) for i in range(setup.vehicles)]
        officials = [EntityId(i, POLICE) for i in range(setup.police)]
        slot = min(script.reporter_index + 1, len(regulars))
        spawn_queue = regulars[:slot] + officials + regulars[slot:]
        self.world = CircularWorld(setup.mobility, spawn_queue)
        self.registry = ServiceDirectory(
            entries=tuple(script.services), route_length=setup.mobility.route_length
        )

        self.states: Dict[EntityId, EntityState] = {}
        for entity in regulars:
            self.states[entity] = VehicleState(entity=entity, cfg=setup.protocol)
        for entity in officials:
            self.states[entity] = OfficialState(
                entity=entity,
                cfg=setup.protocol,
                responder=(entity.label == script.responder),
            )
        self.ta = EntityId(0, TA_ROLE)
        self.states[self.ta] = TaState(entity=self.ta, cfg=setup.protocol)
        rsus = [rsu for rsu, _ in self.world.rsus]
        for i, (rsu, arc) in enumerate(self.world.rsus):
            neighbours = (rsus[i - 1], rsus[(i + 1) % len(rsus)])
            self.states[rsu] = RsuState(
                entity=rsu,
                cfg=setup.protocol,
                neighbours=neighbours,
                ta=self.ta,
                position=arc,
            )
        self._histories: Dict[EntityId, "object"] = {}
        self._label_index = {entity.label: entity for entity in self.states}

    # -- scheduling --------------------------------------------------------

    def _schedule(self, at: float, tag: str, payload) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (at, self._seq, tag, payload))

    # -- transmissions -----------------------------------------------------

    def _record(
        self,
        msg: Message,
        sender: EntityId,
        receiver: str,
        source: ActionSource,
    ) -> None:
        record = TraceRecord(
            time=self.now,
            sender=sender.label,
            sender_class=sender.role.kind,
            receiver=receiver,
            msg_id=msg.id,
            kind=msg.kind,
            road=msg.road,
            hops=msg.hops,
            source=source,
        )
        self.trace.append(record)
        self.metrics.count(msg.kind, sender.role.kind, source)
        script = self.setup.script
        if (
            script.blockage
            and msg.kind in RESOLUTION_KINDS
            and msg.road == script.road
            and self.world.blockages
        ):
            self.world.blockages.clear()

    def broadcast(
        self,
        msg: Message,
        sender: EntityId,
        now: float,
        source: ActionSource = ActionSource.ORIGIN,
        downstream_only: bool = False,
    ) -> List[Tuple[float, EntityId]]:
        """Transmit once; schedule one delivery per in-range receiver."""
        self._record(msg, sender, "*", source)
        deliveries: List[Tuple[float, EntityId]] = []
        net = self.setup.net
        for receiver in self.world.neighbours_within(sender, net.radio_range):
            if downstream_only:
                if receiver.role.kind is RoleKind.RSU:
                    continue
                if not self.world.downstream_of(sender, receiver):
                    continue
            if net.loss > 0 and self.rng.random() < net.loss:
                continue
            at = now + net.hop_latency
            # a radio hop is counted at delivery: the receiver's copy carries
            # one more hop than the sender's, so a hop-limit policy cuts off
            # after exactly max_hops transmissions from the origin
            self._schedule(at, "deliver", (relayed_copy(msg), receiver, sender))
            deliveries.append((at, receiver))
        return deliveries

    def wired_send(
        self, msg: Message, sender: EntityId, to: EntityId, now: float
    ) -> Tuple[float, EntityId]:
        for endpoint in (sender, to):
            if endpoint.role.kind not in (RoleKind.RSU, RoleKind.TA):
                raise ValueError("wired links join infrastructure nodes only")
        self._record(msg, sender, to.label, ActionSource.WIRED)
        at = now + self.setup.net.wired_latency
        self._schedule(at, "deliver", (msg, to, sender))
        return at, to

    def _hold_delay(self, msg: Message) -> float:
        net = self.setup.net
        if msg.priority is Priority.OFFICIAL:
            return net.official_hold
        jitter = self.rng.uniform(1 - net.relay_jitter, 1 + net.relay_jitter)
        return net.relay_hold * jitter

    # -- action execution --------------------------------------------------

    def _execute(self, entity: EntityId, actions) -> None:
        for action in actions:
            if isinstance(action, Broadcast):
                at = max(action.at, self.now)
                self._schedule(
                    at,
                    "send",
                    (action.message, entity, action.source, action.downstream_only),
                )
            elif isinstance(action, Wired):
                self._schedule(
                    max(action.at, self.now), "wired", (action.message, entity, action.to)
                )
            elif isinstance(action, Arm):
                self._schedule(action.at, "timer", (entity, action.token))
            else:
                raise TypeError(f"unknown action: {action!r}")

    # -- delivery dispatch -------------------------------------------------

    def _deliver(self, msg: Message, receiver: EntityId, sender: EntityId) -> None:
        state = self.states[receiver]
        kind = receiver.role.kind
        if kind is RoleKind.TA:
            reporting = sender if sender.role.kind is RoleKind.RSU else None
            self._execute(receiver, handle_ta(state, msg, self.now, reporting_rsu=reporting))
            return
        if kind is RoleKind.RSU:
            if msg.id in self._report_ids and self.coordinator is None:
                self.coordinator = receiver
            if msg.kind is MessageKind.SERVICE_QUERY:
                if msg.id not in state.seen:
                    record_seen(state.seen, msg.id, self.now)
                    self._execute(
                        receiver,
                        handle_service_query(
                            state, msg, self.registry, self.now, ids=self.ids
                        ),
                    )
                return
            if msg.kind in _RSU_PROTOCOL_KINDS:
                self._execute(
                    receiver,
                    handle_rsu(state, msg, sender.role, self.now, ids=self.ids),
                )
                return
            self._schedule_relay(state, msg)
            return
        # vehicles and official vehicles
        first = msg.id not in state.seen
        if kind is RoleKind.OFFICIAL_VEHICLE:
            actions = handle_official(
                state, ReceivedMessage(msg, sender.role), self.now, ids=self.ids
            )
            self._execute(receiver, actions)
        if first:
            record_seen(state.seen, msg.id, self.now)
            self._schedule(
                self.now + self._hold_delay(msg), "timer", (receiver, ("relay", msg))
            )
        else:
            self.dropped_duplicates += 1

    def _schedule_relay(self, state: EntityState, msg: Message) -> None:
        if msg.id in state.seen:
            self.dropped_duplicates += 1
            return
        record_seen(state.seen, msg.id, self.now)
        self._schedule(
            self.now + self._hold_delay(msg), "timer", (state.entity, ("relay", msg))
        )

    # -- timers ------------------------------------------------------------

    def _fire_timer(self, entity: EntityId, token: tuple) -> None:
        state = self.states[entity]
        name = token[0]
        if name == "relay":
            msg = token[1]
            self._execute(entity, relay_decision(state, msg, self.setup.policy, self.now))
        elif name in ("rsu-report", "rsu-restricted"):
            self._execute(entity, handle_rsu_timer(state, token, self.now))
        elif name.startswith("official-"):
            self._execute(
                entity, handle_official_timer(state, token, self.now, ids=self.ids)
            )
        elif name == "ta-resolve":
            self._execute(entity, handle_ta_timer(state, token, self.now, ids=self.ids))
        else:
            raise ValueError(f"unknown timer token: {token!r}")

    # -- scripted events ---------------------------------------------------

    def originate(
        self,
        entity: EntityId,
        kind: MessageKind,
        road: str,
        now: float,
        *,
        payload: Optional[str] = None,
    ) -> Message:
        """Create and broadcast a fresh report from an entity."""
        msg = make_message(kind, road, entity, now, ids=self.ids, payload=payload)
        state = self.states[entity]
        record_seen(state.seen, msg.id, now)
        record_seen(state.relayed, msg.id, now)
        self.broadcast(msg, entity, now, ActionSource.ORIGIN)
        return msg

    def _run_script_event(self, name: str, payload) -> None:
        script = self.setup.script
        if name == "report":
            reporter = self._label_index[script.reporter]
            if script.blockage and reporter in self.world._index:
                self.world.add_blockage(self.world.arc_of(reporter))
            msg = self.originate(
                reporter, script.kind, script.road, self.now, payload=script.payload
            )
            self._report_ids.add(msg.id)
        elif name == "timed-resolution":
            rsu = self.coordinator
            if rsu is None:
                return
            state = self.states[rsu]
            self._execute(
                rsu, rsu_scripted_resolution(state, script.road, self.now, ids=self.ids)
            )
        elif name == "vehicle-clear":
            reporter = self._label_index[script.reporter]
            self.originate(reporter, MessageKind.CLEARED_ROAD, script.road, self.now)
        else:
            raise ValueError(f"unknown script event: {name!r}")

    # -- detectors ---------------------------------------------------------

    def _run_detectors(self) -> None:
        from .protocol import SpeedHistory, detect_congestion, detect_jam

        for vehicle in self.world.vehicles:
            entity = vehicle.entity
            history = self._histories.get(entity)
            if history is None:
                history = SpeedHistory()
                self._histories[entity] = history
            history.record(self.now, vehicle.speed)
            road = self.world.road_at(vehicle.position)
            jam = detect_jam(
                history,
                self.world.queue_ahead(entity),
                self.now,
                origin=entity,
                road=road,
                ids=self.ids,
            )
            if jam is not None:
                state = self.states[entity]
                record_seen(state.seen, jam.id, self.now)
                record_seen(state.relayed, jam.id, self.now)
                self.broadcast(jam, entity, self.now, ActionSource.ORIGIN)
            slow = detect_congestion(
                history, self.now, origin=entity, road=road, ids=self.ids
            )
            if slow is not None:
                state = self.states[entity]
                record_seen(state.seen, slow.id, self.now)
                record_seen(state.relayed, slow.id, self.now)
                self.broadcast(slow, entity, self.now, ActionSource.ORIGIN)

    # -- main loop ---------------------------------------------------------

    def run(self) -> Tuple[List[TraceRecord], TrialMetrics]:
        setup = self.setup
        script = setup.script
        dt = setup.mobility.dt
        steps = int(setup.duration / dt)
        for i in range(steps + 1):
            self._schedule(i * dt, "step", None)
        self._schedule(script.report_time, "script", ("report", None))
        resolution = script.resolution
        if isinstance(resolution, _scenarios.TimedResolution):
            self._schedule(resolution.at, "script", ("timed-resolution", None))
        elif isinstance(resolution, _scenarios.VehicleClearResolution):
            self._schedule(resolution.at, "script", ("vehicle-clear", None))
        # official and authority resolutions are event-driven, not scheduled

        while self._queue:
            at, _, tag, payload = heapq.heappop(self._queue)
            if at > setup.duration:
                break
            self.now = at
            if tag == "step":
                if self.world.spawned_count < self.world.fleet_size:
                    self.world.inject_flow(at)
                self.world.step(dt)
                if setup.net.detectors_enabled and at >= setup.warmup:
                    self._run_detectors()
            elif tag == "deliver":
                msg, receiver, sender = payload
                self._deliver(msg, receiver, sender)
            elif tag == "send":
                msg, sender, source, downstream_only = payload
                self.broadcast(msg, sender, at, source, downstream_only)
            elif tag == "wired":
                msg, sender, to = payload
                self.wired_send(msg, sender, to, at)
            elif tag == "timer":
                entity, token = payload
                self._fire_timer(entity, token)
            elif tag == "script":
                self._run_script_event(payload[0], payload[1])
            else:
                raise ValueError(f"unknown event tag: {tag!r}")
        return self.trace, self.metrics


def broadcast(
    engine: Engine, msg: Message, sender: EntityId, now: float
) -> List[Tuple[float, EntityId]]:
    return engine.broadcast(msg, sender, now)


def wired_send(
    engine: Engine, msg: Message, sender: EntityId, to: EntityId, now: float
) -> Tuple[float, EntityId]:
    return engine.wired_send(msg, sender, to, now)


def run_trial(setup: TrialSetup, seed: int) -> Tuple[List[TraceRecord], TrialMetrics]:
    """Execute one seeded trial; pure function of (setup, seed)."""
    return Engine(setup, seed).run()
