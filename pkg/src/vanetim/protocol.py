"""Per-role message handlers.

Handlers are pure functions of (state, event): they mutate only the state
they are given and return a list of outgoing actions for the engine to
execute. No handler performs I/O or touches the event queue directly.

Timing defaults that the source material leaves open (burst spacing,
periodic announcement intervals, authority service delay, official-vehicle
travel and on-site service time) live in :class:`ProtocolConfig` and are
overridable per run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple, Union

from .domain import (
    ActionSource,
    EntityId,
    Message,
    MessageIdSource,
    MessageKind,
    Priority,
    RESOLUTION_FOR,
    RESOLUTION_KINDS,
    Role,
    RoleKind,
    TA_REPORT_KINDS,
    make_message,
)
from .relay import RelayPolicy, SeenStore, record_seen, should_relay


class ProtocolOrderError(RuntimeError):
    """An event arrived out of the order the incident lifecycle allows."""


# ---------------------------------------------------------------------------
# outgoing actions


@dataclass(frozen=True)
class Broadcast:
    message: Message
    at: float
    source: ActionSource
    downstream_only: bool = False


@dataclass(frozen=True)
class Wired:
    message: Message
    to: EntityId
    at: float


@dataclass(frozen=True)
class Arm:
    """Request a timer; the engine calls back with the token at ``at``."""

    token: tuple
    at: float


OutgoingAction = Union[Broadcast, Wired, Arm]


@dataclass(frozen=True)
class ProtocolConfig:
    burst_interval: float = 2.0       # spacing between repeats within one burst
    cleared_repeats: int = 3          # road-clear re-announcements per RSU
    attending_period: float = 5.0     # official-vehicle periodic announcements
    restricted_period: float = 10.0   # restricted-movement re-announcements
    report_period: float = 10.0       # RSU re-announcement of open reports
    ta_service_delay: float = 60.0    # authority turnaround for escalations
    travel_time: float = 60.0         # official vehicle: acknowledgement -> arrival
    service_time: float = 120.0       # official vehicle: arrival -> resolution


DEFAULT_PROTOCOL_CONFIG = ProtocolConfig()


# ---------------------------------------------------------------------------
# incident lifecycle ledger


class IncidentStatus(Enum):
    OPEN = "open"
    BEING_ATTENDED = "being-attended"
    RESOLVED = "resolved"


_FORWARD = {
    IncidentStatus.OPEN: {IncidentStatus.BEING_ATTENDED, IncidentStatus.RESOLVED},
    IncidentStatus.BEING_ATTENDED: {IncidentStatus.RESOLVED},
    IncidentStatus.RESOLVED: set(),
}


class IncidentLedger:
    """Per-road incident status with timestamped, forward-only transitions."""

    def __init__(self) -> None:
        self._history: Dict[str, List[Tuple[IncidentStatus, float]]] = {}

    def status(self, road: str) -> Optional[IncidentStatus]:
        entries = self._history.get(road)
        return entries[-1][0] if entries else None

    def history(self, road: str) -> List[Tuple[IncidentStatus, float]]:
        return list(self._history.get(road, []))

    def open(self, road: str, now: float) -> None:
        current = self.status(road)
        if current in (IncidentStatus.OPEN, IncidentStatus.BEING_ATTENDED):
            return
        # a resolved road may see a fresh incident episode
        self._history.setdefault(road, []).append((IncidentStatus.OPEN, now))

    def _advance(self, road: str, to: IncidentStatus, now: float) -> None:
        current = self.status(road)
        if current is None:
            raise ProtocolOrderError(f"no incident open on road {road!r}")
        if to is current:
            return
        if to not in _FORWARD[current]:
            raise ProtocolOrderError(
                f"illegal transition {current.value} -> {to.value} on road {road!r}"
            )
        self._history[road].append((to, now))

    def attend(self, road: str, now: float) -> None:
        self._advance(road, IncidentStatus.BEING_ATTENDED, now)

    def resolve(self, road: str, now: float) -> None:
        self._advance(road, IncidentStatus.RESOLVED, now)


# ---------------------------------------------------------------------------
# RSU rebroadcast rule table


@dataclass(frozen=True)
class RuleRow:
    same_count: int
    derived_count: int = 0
    derived_kind: Optional[MessageKind] = None


class RsuRuleTable:
    """Burst counts per (incoming kind, sender class, first-receipt flag).

    Lookups on unpopulated rows yield zero repeats. The default table covers
    the accident lifecycle exactly; other incident kinds are handled by the
    generic announcement path.
    """

    def __init__(self, rows: Optional[Dict[tuple, RuleRow]] = None) -> None:
        self.rows = dict(DEFAULT_RULE_ROWS if rows is None else rows)

    def lookup(self, kind: MessageKind, sender: RoleKind, first: bool) -> RuleRow:
        return self.rows.get((kind, sender, first), RuleRow(0))


DEFAULT_RULE_ROWS: Dict[tuple, RuleRow] = {
    (MessageKind.ACCIDENT, RoleKind.REGULAR_VEHICLE, True): RuleRow(
        3, 3, MessageKind.AVOID_ROAD
    ),
    (MessageKind.ACCIDENT, RoleKind.REGULAR_VEHICLE, False): RuleRow(2),
    (MessageKind.ACCIDENT, RoleKind.RSU, True): RuleRow(2, 2, MessageKind.AVOID_ROAD),
    (MessageKind.AVOID_ROAD, RoleKind.REGULAR_VEHICLE, True): RuleRow(2),
    (MessageKind.AVOID_ROAD, RoleKind.RSU, True): RuleRow(3),
    (MessageKind.SORTED_ROAD, RoleKind.OFFICIAL_VEHICLE, True): RuleRow(
        0, 3, MessageKind.CLEARED_ROAD
    ),
    (MessageKind.CLEARED_ROAD, RoleKind.OFFICIAL_VEHICLE, True): RuleRow(3),
    (MessageKind.CLEARED_ROAD, RoleKind.RSU, True): RuleRow(3),
    (MessageKind.ADDRESSING_INCIDENT, RoleKind.OFFICIAL_VEHICLE, True): RuleRow(
        0, 1, MessageKind.ACK
    ),
}

DEFAULT_RULE_TABLE = RsuRuleTable()

#: Report kinds an RSU announces itself rather than escalating or relaying.
BROADCAST_REPORT_KINDS = frozenset(
    {
        MessageKind.TRAFFIC_JAM,
        MessageKind.CONGESTION,
        MessageKind.OBSTACLE,
        MessageKind.STRANDED_VEHICLE,
        MessageKind.DIVERSION,
    }
)


# ---------------------------------------------------------------------------
# entity state


@dataclass
class EntityState:
    entity: EntityId
    seen: SeenStore = field(default_factory=SeenStore)
    relayed: SeenStore = field(default_factory=SeenStore)
    cfg: ProtocolConfig = DEFAULT_PROTOCOL_CONFIG

    @property
    def role(self) -> Role:
        return self.entity.role


@dataclass
class VehicleState(EntityState):
    pass


@dataclass
class RsuState(EntityState):
    neighbours: Tuple[EntityId, ...] = ()
    ta: Optional[EntityId] = None
    position: float = 0.0  # arc metres along the route
    table: RsuRuleTable = field(default_factory=RsuRuleTable)
    ledger: IncidentLedger = field(default_factory=IncidentLedger)
    applied: Set[Tuple[str, RoleKind]] = field(default_factory=set)
    escalated: Set[str] = field(default_factory=set)
    replied_queries: Set[str] = field(default_factory=set)
    announcing: Dict[str, Message] = field(default_factory=dict)
    restricted: Dict[str, Message] = field(default_factory=dict)


class OfficialPhase(Enum):
    ADDRESSING = "addressing"
    EN_ROUTE = "en-route"
    ON_SITE = "on-site"
    DONE = "done"


@dataclass
class OfficialIncident:
    road: str
    report: Message
    addressing_id: str
    phase: OfficialPhase = OfficialPhase.ADDRESSING


@dataclass
class OfficialState(EntityState):
    responder: bool = True
    incidents: Dict[str, OfficialIncident] = field(default_factory=dict)


@dataclass
class TaState(EntityState):
    pending: Set[str] = field(default_factory=set)


#: kinds an official vehicle responds to in person
OFFICIAL_RESPONSE_KINDS = {
    MessageKind.ACCIDENT: MessageKind.SORTED_ROAD,
    MessageKind.OBSTACLE: MessageKind.OBSTACLE_CLEARED,
    MessageKind.STRANDED_VEHICLE: MessageKind.CLEARED_ROAD,
}


# ---------------------------------------------------------------------------
# events fed to official vehicles


@dataclass(frozen=True)
class ReceivedMessage:
    message: Message
    sender_role: Role


@dataclass(frozen=True)
class ArrivalAtIncident:
    road: str


@dataclass(frozen=True)
class IncidentResolved:
    road: str


OfficialEvent = Union[ReceivedMessage, ArrivalAtIncident, IncidentResolved]


# ---------------------------------------------------------------------------
# shared relay decision


def relay_decision(
    state: EntityState, msg: Message, policy: RelayPolicy, now: float
) -> List[OutgoingAction]:
    """Forward an unseen copy if the policy admits it; dedup is permanent.

    The copy is retransmitted as received: its hop count was already
    advanced when the radio delivery happened, so a hop-limit policy sees
    the number of transmissions the copy has traversed.
    """
    if not should_relay(policy, msg, now, state.relayed, state.role):
        return []
    record_seen(state.relayed, msg.id, now)
    return [Broadcast(msg, at=now, source=ActionSource.RELAY)]


def handle_vehicle(
    state: EntityState, msg: Message, policy: RelayPolicy, now: float
) -> List[OutgoingAction]:
    if state.role.kind is not RoleKind.REGULAR_VEHICLE:
        raise ValueError("handle_vehicle requires a regular vehicle")
    return relay_decision(state, msg, policy, now)


# ---------------------------------------------------------------------------
# RSU handlers


def _burst(
    msg: Message, count: int, now: float, interval: float
) -> List[OutgoingAction]:
    return [
        Broadcast(msg, at=now + i * interval, source=ActionSource.BURST)
        for i in range(count)
    ]


def handle_rsu(
    state: RsuState,
    msg: Message,
    sender_role: Role,
    now: float,
    *,
    ids: Optional[MessageIdSource] = None,
) -> List[OutgoingAction]:
    """Dispatch one received message through the RSU's announcement rules."""
    if state.role.kind is not RoleKind.RSU:
        raise ValueError("handle_rsu requires an RSU")
    kind = msg.kind
    if kind in (MessageKind.ACCIDENT, MessageKind.AVOID_ROAD):
        return _rsu_table_driven(state, msg, sender_role, now, ids)
    if kind in RESOLUTION_KINDS:
        return handle_rsu_resolution(state, msg, sender_role, now, ids=ids)
    if kind in TA_REPORT_KINDS:
        return _rsu_escalate(state, msg, now)
    if kind in BROADCAST_REPORT_KINDS:
        return _rsu_announce_report(state, msg, sender_role, now)
    if kind is MessageKind.SERVICE_QUERY:
        raise ValueError("service queries go through handle_service_query")
    if kind is MessageKind.ADDRESSING_INCIDENT:
        return _rsu_acknowledge_official(state, msg, sender_role, now, ids)
    # anything else an RSU treats as a plain relay candidate (engine path)
    return []


def _first_receipt(state: RsuState, msg: Message) -> bool:
    return msg.id not in state.seen


def _apply_once(state: RsuState, msg: Message, sender: RoleKind, first: bool) -> bool:
    key = (msg.id, sender, first)
    if key in state.applied:
        return False
    state.applied.add(key)
    return True


def _rsu_table_driven(
    state: RsuState,
    msg: Message,
    sender_role: Role,
    now: float,
    ids: Optional[MessageIdSource],
) -> List[OutgoingAction]:
    if state.ledger.status(msg.road) is IncidentStatus.RESOLVED:
        return []
    first = _first_receipt(state, msg)
    record_seen(state.seen, msg.id, now)
    if not _apply_once(state, msg, sender_role.kind, first):
        return []
    row = state.table.lookup(msg.kind, sender_role.kind, first)
    if row.same_count == 0 and row.derived_count == 0:
        return []

    actions: List[OutgoingAction] = []
    if msg.kind is MessageKind.ACCIDENT:
        state.ledger.open(msg.road, now)
    actions.extend(_burst(msg, row.same_count, now, state.cfg.burst_interval))
    if row.derived_count and row.derived_kind is not None:
        derived = make_message(
            row.derived_kind, msg.road, state.entity, now, ids=ids, correlation=msg.id
        )
        offset = row.same_count * state.cfg.burst_interval
        actions.extend(
            _burst(derived, row.derived_count, now + offset, state.cfg.burst_interval)
        )
    if (
        msg.kind is MessageKind.ACCIDENT
        and first
        and sender_role.kind is not RoleKind.RSU
    ):
        actions.extend(Wired(msg, to=n, at=now) for n in state.neighbours)
    return actions


def _rsu_escalate(state: RsuState, msg: Message, now: float) -> List[OutgoingAction]:
    """Authority-class reports go straight to the TA over the wired link."""
    first = _first_receipt(state, msg)
    record_seen(state.seen, msg.id, now)
    if not first or msg.id in state.escalated or state.ta is None:
        return []
    state.escalated.add(msg.id)
    state.ledger.open(msg.road, now)
    return [Wired(msg, to=state.ta, at=now)]


def _rsu_announce_report(
    state: RsuState, msg: Message, sender_role: Role, now: float
) -> List[OutgoingAction]:
    """Announce an open report three times, notify peers, then re-announce
    periodically until the road is cleared."""
    if state.ledger.status(msg.road) is IncidentStatus.RESOLVED:
        return []
    first = _first_receipt(state, msg)
    record_seen(state.seen, msg.id, now)
    if not first:
        return []
    state.ledger.open(msg.road, now)
    state.announcing[msg.road] = msg
    actions: List[OutgoingAction] = list(_burst(msg, 3, now, state.cfg.burst_interval))
    # flood along the backbone ring so every zone learns of the incident;
    # message-id dedup terminates the flood after one lap
    actions.extend(Wired(msg, to=n, at=now) for n in state.neighbours)
    actions.append(
        Arm(("rsu-report", msg.road), at=now + 3 * state.cfg.burst_interval)
    )
    return actions


def _rsu_acknowledge_official(
    state: RsuState,
    msg: Message,
    sender_role: Role,
    now: float,
    ids: Optional[MessageIdSource],
) -> List[OutgoingAction]:
    first = _first_receipt(state, msg)
    record_seen(state.seen, msg.id, now)
    if not _apply_once(state, msg, sender_role.kind, first):
        return []
    row = state.table.lookup(msg.kind, sender_role.kind, first)
    if row.derived_count == 0:
        return []
    ack = make_message(
        MessageKind.ACK, msg.road, state.entity, now, ids=ids, correlation=msg.id
    )
    actions: List[OutgoingAction] = [
        Broadcast(ack, at=now, source=ActionSource.ORIGIN)
    ]
    state.ledger.open(msg.road, now)
    if state.ledger.status(msg.road) is IncidentStatus.OPEN:
        state.ledger.attend(msg.road, now)
    if msg.road not in state.restricted:
        restricted = make_message(
            MessageKind.RESTRICTED_MOVEMENT,
            msg.road,
            state.entity,
            now,
            ids=ids,
            correlation=msg.id,
        )
        state.restricted[msg.road] = restricted
        actions.append(Broadcast(restricted, at=now, source=ActionSource.ORIGIN))
        actions.append(
            Arm(("rsu-restricted", msg.road), at=now + state.cfg.restricted_period)
        )
    return actions


def handle_rsu_resolution(
    state: RsuState,
    msg: Message,
    sender_role: Role,
    now: float,
    *,
    ids: Optional[MessageIdSource] = None,
) -> List[OutgoingAction]:
    """Close the incident and spread the road-clear status.

    A first-seen clearance is flooded along the backbone ring so every
    zone hears it (message-id dedup terminates the flood). If this RSU
    holds an open incident for the road, it also resolves the incident and
    announces the road-clear status ``cleared_repeats`` times; clearances
    for roads with no open incident are only forwarded.
    """
    if state.role.kind is not RoleKind.RSU:
        raise ValueError("handle_rsu_resolution requires an RSU")
    first = _first_receipt(state, msg)
    record_seen(state.seen, msg.id, now)
    actions: List[OutgoingAction] = []
    if first:
        actions.extend(Wired(msg, to=n, at=now) for n in state.neighbours)
    status = state.ledger.status(msg.road)
    if status in (None, IncidentStatus.RESOLVED):
        return actions
    state.ledger.resolve(msg.road, now)
    state.announcing.pop(msg.road, None)
    state.restricted.pop(msg.road, None)

    repeats = state.cfg.cleared_repeats
    row = state.table.lookup(msg.kind, sender_role.kind, first)
    if row.same_count or row.derived_count:
        repeats = max(row.same_count, row.derived_count)

    if msg.kind is MessageKind.CLEARED_ROAD:
        cleared = msg
    else:
        cleared = make_message(
            MessageKind.CLEARED_ROAD,
            msg.road,
            state.entity,
            now,
            ids=ids,
            correlation=msg.id,
        )
    actions.extend(_burst(cleared, repeats, now, state.cfg.burst_interval))
    if cleared.id != msg.id:
        actions.extend(Wired(cleared, to=n, at=now) for n in state.neighbours)
    return actions


def rsu_scripted_resolution(
    state: RsuState, road: str, now: float, *, ids: Optional[MessageIdSource] = None
) -> List[OutgoingAction]:
    """Timed clearance for runs with no attending entity: the coordinating
    RSU originates the road-clear flow itself."""
    status = state.ledger.status(road)
    if status in (None, IncidentStatus.RESOLVED):
        return []
    state.ledger.resolve(road, now)
    state.announcing.pop(road, None)
    state.restricted.pop(road, None)
    cleared = make_message(MessageKind.CLEARED_ROAD, road, state.entity, now, ids=ids)
    record_seen(state.seen, cleared.id, now)
    actions: List[OutgoingAction] = list(
        _burst(cleared, state.cfg.cleared_repeats, now, state.cfg.burst_interval)
    )
    actions.extend(Wired(cleared, to=n, at=now) for n in state.neighbours)
    return actions


def handle_rsu_timer(
    state: RsuState, token: tuple, now: float
) -> List[OutgoingAction]:
    """Periodic re-announcements; timers disarm once the road is cleared."""
    name, road = token[0], token[1]
    if name == "rsu-report":
        msg = state.announcing.get(road)
        if msg is None or state.ledger.status(road) is IncidentStatus.RESOLVED:
            return []
        return [
            Broadcast(msg, at=now, source=ActionSource.BURST),
            Arm(token, at=now + state.cfg.report_period),
        ]
    if name == "rsu-restricted":
        msg = state.restricted.get(road)
        if msg is None or state.ledger.status(road) is not IncidentStatus.BEING_ATTENDED:
            return []
        return [
            Broadcast(msg, at=now, source=ActionSource.BURST),
            Arm(token, at=now + state.cfg.restricted_period),
        ]
    raise ValueError(f"unknown RSU timer token: {token!r}")


# ---------------------------------------------------------------------------
# service directory


@dataclass(frozen=True)
class ServiceEntry:
    category: str
    road: str
    position: float  # arc metres along the route


@dataclass(frozen=True)
class ServiceDirectory:
    entries: Tuple[ServiceEntry, ...] = ()
    route_length: float = 4000.0

    def nearest(self, category: str, origin: float) -> Optional[ServiceEntry]:
        candidates = [e for e in self.entries if e.category == category]
        if not candidates:
            return None

        def ring_distance(entry: ServiceEntry) -> float:
            d = abs(entry.position - origin) % self.route_length
            return min(d, self.route_length - d)

        return min(candidates, key=lambda e: (ring_distance(e), e.road))


def handle_service_query(
    state: RsuState,
    msg: Message,
    registry: ServiceDirectory,
    now: float,
    *,
    ids: Optional[MessageIdSource] = None,
) -> List[OutgoingAction]:
    """Answer a service lookup with the nearest registered entry."""
    if state.role.kind is not RoleKind.RSU:
        raise ValueError("handle_service_query requires an RSU")
    record_seen(state.seen, msg.id, now)
    if msg.id in state.replied_queries:
        return []
    state.replied_queries.add(msg.id)
    category = msg.payload or ""
    entry = registry.nearest(category, state.position)
    reply = make_message(
        MessageKind.SERVICE_REPLY,
        entry.road if entry else msg.road,
        state.entity,
        now,
        ids=ids,
        correlation=msg.id,
        payload=category if entry else "no-result",
    )
    return [Broadcast(reply, at=now, source=ActionSource.ORIGIN)]


# ---------------------------------------------------------------------------
# official vehicles


def handle_official(
    state: OfficialState,
    event: OfficialEvent,
    now: float,
    *,
    ids: Optional[MessageIdSource] = None,
) -> List[OutgoingAction]:
    if state.role.kind is not RoleKind.OFFICIAL_VEHICLE:
        raise ValueError("handle_official requires an official vehicle")
    if isinstance(event, ReceivedMessage):
        return _official_receive(state, event.message, now, ids)
    if isinstance(event, ArrivalAtIncident):
        incident = state.incidents.get(event.road)
        if incident is None:
            raise ProtocolOrderError(f"arrival with no incident on {event.road!r}")
        incident.phase = OfficialPhase.ON_SITE
        return [Arm(("official-resolve", event.road), at=now + state.cfg.service_time)]
    if isinstance(event, IncidentResolved):
        incident = state.incidents.get(event.road)
        if incident is None or incident.phase is OfficialPhase.DONE:
            raise ProtocolOrderError(
                f"resolution with no open incident on {event.road!r}"
            )
        incident.phase = OfficialPhase.DONE
        done_kind = OFFICIAL_RESPONSE_KINDS[incident.report.kind]
        done = make_message(
            done_kind,
            event.road,
            state.entity,
            now,
            ids=ids,
            correlation=incident.report.id,
        )
        record_seen(state.seen, done.id, now)
        record_seen(state.relayed, done.id, now)
        return [Broadcast(done, at=now, source=ActionSource.ORIGIN)]
    raise ValueError(f"unknown official event: {event!r}")


def _official_receive(
    state: OfficialState, msg: Message, now: float, ids: Optional[MessageIdSource]
) -> List[OutgoingAction]:
    if msg.kind in OFFICIAL_RESPONSE_KINDS and state.responder:
        if msg.road in state.incidents:
            return []
        addressing = make_message(
            MessageKind.ADDRESSING_INCIDENT,
            msg.road,
            state.entity,
            now,
            ids=ids,
            correlation=msg.id,
        )
        record_seen(state.seen, addressing.id, now)
        record_seen(state.relayed, addressing.id, now)
        state.incidents[msg.road] = OfficialIncident(
            road=msg.road, report=msg, addressing_id=addressing.id
        )
        return [Broadcast(addressing, at=now, source=ActionSource.ORIGIN)]
    if msg.kind is MessageKind.ACK:
        incident = _incident_for_ack(state, msg)
        if incident is None or incident.phase is not OfficialPhase.ADDRESSING:
            return []
        incident.phase = OfficialPhase.EN_ROUTE
        return [
            Arm(("official-announce", incident.road), at=now),
            Arm(("official-arrival", incident.road), at=now + state.cfg.travel_time),
        ]
    return []


def _incident_for_ack(state: OfficialState, ack: Message) -> Optional[OfficialIncident]:
    for incident in state.incidents.values():
        if ack.correlation == incident.addressing_id:
            return incident
    return None


def handle_official_timer(
    state: OfficialState, token: tuple, now: float, *, ids: Optional[MessageIdSource] = None
) -> List[OutgoingAction]:
    name, road = token[0], token[1]
    incident = state.incidents.get(road)
    if incident is None:
        return []
    if name == "official-announce":
        if incident.phase is OfficialPhase.DONE:
            return []
        actions: List[OutgoingAction] = []
        free = make_message(
            MessageKind.FREE_ROAD,
            road,
            state.entity,
            now,
            ids=ids,
            correlation=incident.report.id,
        )
        record_seen(state.seen, free.id, now)
        record_seen(state.relayed, free.id, now)
        actions.append(
            Broadcast(free, at=now, source=ActionSource.ORIGIN, downstream_only=True)
        )
        if incident.phase is OfficialPhase.EN_ROUTE:
            attending = make_message(
                MessageKind.ATTENDING,
                road,
                state.entity,
                now,
                ids=ids,
                correlation=incident.report.id,
            )
            record_seen(state.seen, attending.id, now)
            record_seen(state.relayed, attending.id, now)
            actions.append(Broadcast(attending, at=now, source=ActionSource.ORIGIN))
        actions.append(Arm(token, at=now + state.cfg.attending_period))
        return actions
    if name == "official-arrival":
        return handle_official(state, ArrivalAtIncident(road), now, ids=ids)
    if name == "official-resolve":
        return handle_official(state, IncidentResolved(road), now, ids=ids)
    raise ValueError(f"unknown official timer token: {token!r}")


# ---------------------------------------------------------------------------
# traffic authority


def handle_ta(
    state: TaState, msg: Message, now: float, *, reporting_rsu: Optional[EntityId] = None
) -> List[OutgoingAction]:
    """Schedule a resolution notice back to the reporting RSU after the
    configured service delay; non-authority kinds are dropped."""
    if state.role.kind is not RoleKind.TA:
        raise ValueError("handle_ta requires the TA")
    if msg.kind not in TA_REPORT_KINDS:
        return []
    record_seen(state.seen, msg.id, now)
    if msg.id in state.pending:
        return []
    state.pending.add(msg.id)
    return [
        Arm(
            ("ta-resolve", msg.road, msg.kind, msg.id, reporting_rsu),
            at=now + state.cfg.ta_service_delay,
        )
    ]


def handle_ta_timer(
    state: TaState, token: tuple, now: float, *, ids: Optional[MessageIdSource] = None
) -> List[OutgoingAction]:
    _, road, kind, report_id, reporting_rsu = token
    resolution = make_message(
        RESOLUTION_FOR[kind], road, state.entity, now, ids=ids, correlation=report_id
    )
    if reporting_rsu is None:
        return []
    return [Wired(resolution, to=reporting_rsu, at=now)]


# ---------------------------------------------------------------------------
# local condition detectors


class SpeedHistory:
    """Time-ordered speed samples with incremental run tracking.

    Keeps enough history to cover both the stationary window and the
    slow-band window, and remembers whether the current episode already
    produced a report so each episode reports at most once.
    """

    STATIONARY_SPEED = 0.1   # m/s
    BAND_LOW = 1.0           # m/s
    BAND_HIGH = 13.0         # m/s

    def __init__(self, window: float = 120.0) -> None:
        self.window = window
        self.samples: List[Tuple[float, float]] = []
        self.stationary_since: Optional[float] = None
        self.band_since: Optional[float] = None
        self.jam_reported = False
        self.congestion_reported = False

    def span(self) -> float:
        if len(self.samples) < 2:
            return 0.0
        return self.samples[-1][0] - self.samples[0][0]

    def record(self, now: float, speed: float) -> None:
        if self.samples and now <= self.samples[-1][0]:
            raise ValueError("samples must be strictly increasing in time")
        self.samples.append((now, speed))
        while self.samples and now - self.samples[0][0] > self.window:
            self.samples.pop(0)

        if speed < self.STATIONARY_SPEED:
            if self.stationary_since is None:
                self.stationary_since = now
        else:
            self.stationary_since = None
            self.jam_reported = False

        if self.BAND_LOW <= speed <= self.BAND_HIGH:
            if self.band_since is None:
                self.band_since = now
        else:
            self.band_since = None
            self.congestion_reported = False


def detect_jam(
    history: SpeedHistory,
    queue_ahead: bool,
    now: float,
    *,
    origin: Optional[EntityId] = None,
    road: str = "X",
    ids: Optional[MessageIdSource] = None,
) -> Optional[Message]:
    """One report per stop: stationary strictly longer than 30 s with a
    queue ahead."""
    if history.jam_reported or not queue_ahead:
        return None
    if history.stationary_since is None:
        return None
    if now - history.stationary_since <= 30.0:
        return None
    history.jam_reported = True
    if origin is None:
        origin = EntityId(0)
    return make_message(MessageKind.TRAFFIC_JAM, road, origin, now, ids=ids)


def detect_congestion(
    history: SpeedHistory,
    now: float,
    *,
    origin: Optional[EntityId] = None,
    road: str = "X",
    ids: Optional[MessageIdSource] = None,
) -> Optional[Message]:
    """One report per episode: speed inside the slow band continuously for
    60 to 90 seconds."""
    if history.congestion_reported:
        return None
    if history.band_since is None:
        return None
    duration = now - history.band_since
    if not (60.0 <= duration <= 90.0):
        return None
    history.congestion_reported = True
    if origin is None:
        origin = EntityId(0)
    return make_message(MessageKind.CONGESTION, road, origin, now, ids=ids)
