"""Core vocabulary shared by every module: entities, roles, message kinds, messages.

All values here are plain immutable dataclasses; they carry no behaviour
beyond construction-time validation and can be copied freely between
simulation contexts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional


class ClockInversionError(ValueError):
    """A timestamp earlier than a message's creation time was supplied."""


class RoleKind(Enum):
    REGULAR_VEHICLE = "vehicle"
    OFFICIAL_VEHICLE = "official"
    RSU = "rsu"
    TA = "ta"


class OfficialService(Enum):
    POLICE = "police"
    AMBULANCE = "ambulance"
    FIRE_SERVICE = "fire"


@dataclass(frozen=True)
class Role:
    kind: RoleKind
    service: Optional[OfficialService] = None

    def __post_init__(self) -> None:
        if self.kind is RoleKind.OFFICIAL_VEHICLE and self.service is None:
            raise ValueError("official vehicles must declare a service branch")
        if self.kind is not RoleKind.OFFICIAL_VEHICLE and self.service is not None:
            raise ValueError("only official vehicles carry a service branch")


VEHICLE = Role(RoleKind.REGULAR_VEHICLE)
POLICE = Role(RoleKind.OFFICIAL_VEHICLE, OfficialService.POLICE)
AMBULANCE = Role(RoleKind.OFFICIAL_VEHICLE, OfficialService.AMBULANCE)
FIRE_SERVICE = Role(RoleKind.OFFICIAL_VEHICLE, OfficialService.FIRE_SERVICE)
RSU = Role(RoleKind.RSU)
TA = Role(RoleKind.TA)

_LABEL_PREFIX = {
    RoleKind.REGULAR_VEHICLE: "V",
    RoleKind.OFFICIAL_VEHICLE: "P",
    RoleKind.RSU: "RSU",
    RoleKind.TA: "TA",
}

_SERVICE_PREFIX = {
    OfficialService.POLICE: "P",
    OfficialService.AMBULANCE: "AMB",
    OfficialService.FIRE_SERVICE: "FS",
}


@dataclass(frozen=True, order=True)
class EntityId:
    index: int
    role: Role = VEHICLE

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError("entity index must be non-negative")

    @property
    def label(self) -> str:
        if self.role.kind is RoleKind.OFFICIAL_VEHICLE:
            return f"{_SERVICE_PREFIX[self.role.service]}{self.index}"
        if self.role.kind is RoleKind.TA:
            return "TA"
        return f"{_LABEL_PREFIX[self.role.kind]}{self.index}"

    def __str__(self) -> str:
        return self.label


def role_of_label(label: str) -> RoleKind:
    """Recover the role class from a trace label such as ``V17`` or ``RSU3``."""
    if label == "TA":
        return RoleKind.TA
    if label.startswith("RSU"):
        return RoleKind.RSU
    if label.startswith(("AMB", "FS")) or (label.startswith("P") and label[1:].isdigit()):
        return RoleKind.OFFICIAL_VEHICLE
    if label.startswith("V"):
        return RoleKind.REGULAR_VEHICLE
    raise ValueError(f"unrecognised entity label: {label!r}")


class MessageKind(Enum):
    ACCIDENT = "accident"
    AVOID_ROAD = "avoid-road"
    RESTRICTED_MOVEMENT = "restricted-movement"
    ATTENDING = "attending"
    SORTED_ROAD = "sorted-road"
    CLEARED_ROAD = "cleared-road"
    TRAFFIC_JAM = "traffic-jam"
    CONGESTION = "congestion"
    OBSTACLE = "obstacle"
    OBSTACLE_CLEARED = "obstacle-cleared"
    DIVERSION = "diversion"
    STRANDED_VEHICLE = "stranded-vehicle"
    DEBRIS = "debris"
    DEBRIS_RESOLVED = "debris-resolved"
    SERVICE_QUERY = "service-query"
    SERVICE_REPLY = "service-reply"
    ROAD_DEFECT = "road-defect"
    DEFECT_RESOLVED = "defect-resolved"
    FLOOD = "flood"
    FLOOD_RESOLVED = "flood-resolved"
    SIGNAL_MALFUNCTION = "signal-malfunction"
    SIGNAL_RESOLVED = "signal-resolved"
    ADDRESSING_INCIDENT = "addressing-incident"
    ACK = "ack"
    FREE_ROAD = "free-road"


#: Incident reports that infrastructure escalates straight to the authority.
TA_REPORT_KINDS = frozenset(
    {
        MessageKind.DEBRIS,
        MessageKind.ROAD_DEFECT,
        MessageKind.FLOOD,
        MessageKind.SIGNAL_MALFUNCTION,
    }
)

#: Resolution notices matched to the report kind they close out.
RESOLUTION_FOR = {
    MessageKind.DEBRIS: MessageKind.DEBRIS_RESOLVED,
    MessageKind.ROAD_DEFECT: MessageKind.DEFECT_RESOLVED,
    MessageKind.FLOOD: MessageKind.FLOOD_RESOLVED,
    MessageKind.SIGNAL_MALFUNCTION: MessageKind.SIGNAL_RESOLVED,
}

#: Every kind that marks a road incident as closed when an RSU receives it.
RESOLUTION_KINDS = frozenset(
    {
        MessageKind.SORTED_ROAD,
        MessageKind.CLEARED_ROAD,
        MessageKind.OBSTACLE_CLEARED,
        MessageKind.DEBRIS_RESOLVED,
        MessageKind.DEFECT_RESOLVED,
        MessageKind.FLOOD_RESOLVED,
        MessageKind.SIGNAL_RESOLVED,
    }
)


class Priority(Enum):
    NORMAL = "normal"
    OFFICIAL = "official"


class ActionSource(Enum):
    """Why a transmission happened, recorded per trace line."""

    ORIGIN = "origin"
    RELAY = "relay"
    BURST = "burst"
    WIRED = "wired"


@dataclass(frozen=True)
class Message:
    id: str
    kind: MessageKind
    road: str
    origin: EntityId
    created_at: float
    hops: int = 0
    priority: Priority = Priority.NORMAL
    correlation: Optional[str] = None
    payload: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.road:
            raise ValueError("road label must be non-empty")
        if self.created_at < 0:
            raise ValueError("creation time must be non-negative")
        if self.hops < 0:
            raise ValueError("hop count must be non-negative")


class MessageIdSource:
    """Per-run allocator of unique message ids; deterministic given call order."""

    def __init__(self, prefix: str = "m") -> None:
        self._prefix = prefix
        self._counter = itertools.count()

    def next(self) -> str:
        return f"{self._prefix}{next(self._counter):05d}"


_DEFAULT_IDS = MessageIdSource()


def make_message(
    kind: MessageKind,
    road: str,
    origin: EntityId,
    now: float,
    *,
    ids: Optional[MessageIdSource] = None,
    correlation: Optional[str] = None,
    payload: Optional[str] = None,
) -> Message:
    """Originate a fresh message; priority follows the origin's role."""
    if not isinstance(origin, EntityId):
        raise ValueError("unknown origin entity")
    if not isinstance(kind, MessageKind):
        raise ValueError(f"unknown message kind: {kind!r}")
    if now < 0:
        raise ValueError("origination time must be non-negative")
    source = ids if ids is not None else _DEFAULT_IDS
    priority = (
        Priority.OFFICIAL
        if origin.role.kind is RoleKind.OFFICIAL_VEHICLE
        else Priority.NORMAL
    )
    return Message(
        id=source.next(),
        kind=kind,
        road=road,
        origin=origin,
        created_at=now,
        hops=0,
        priority=priority,
        correlation=correlation,
        payload=payload,
    )


def age(msg: Message, now: float) -> float:
    """Seconds elapsed since the message was originated."""
    if now < msg.created_at:
        raise ClockInversionError(
            f"clock inversion: now={now} precedes created_at={msg.created_at}"
        )
    return now - msg.created_at


def relayed_copy(msg: Message) -> Message:
    """The copy a forwarder transmits: identical except for one more hop."""
    return replace(msg, hops=msg.hops + 1)
