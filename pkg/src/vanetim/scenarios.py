"""The incident scenario catalogue and the trace-conformance checker.

Each catalogue entry is a declarative script (who reports what, where,
when, and how the incident resolves) paired with a sequence specification:
a partial order of message patterns with repetition bounds. The checker
validates a finished trace against a spec; relayed copies may interleave
freely, so ordering constraints compare first occurrences only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple, Union

from .domain import ActionSource, MessageKind, RoleKind
from .protocol import ServiceEntry


# ---------------------------------------------------------------------------
# resolution modes


@dataclass(frozen=True)
class TimedResolution:
    """The coordinating RSU closes the incident at a scripted time."""

    at: float = 850.0


@dataclass(frozen=True)
class VehicleClearResolution:
    """The reporting vehicle notices the road is clear at a scripted time."""

    at: float = 850.0


@dataclass(frozen=True)
class OfficialResolution:
    """An official vehicle attends; timing follows the protocol config."""


@dataclass(frozen=True)
class AuthorityResolution:
    """The TA services the report after its configured delay."""


@dataclass(frozen=True)
class NoResolution:
    """Request/reply exchanges with no incident lifecycle."""


Resolution = Union[
    TimedResolution,
    VehicleClearResolution,
    OfficialResolution,
    AuthorityResolution,
    NoResolution,
]


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    reporter: str                  # entity label, e.g. "V17" or "P0"
    kind: MessageKind
    spec_id: str
    road: str = "X"
    report_time: float = 550.0
    resolution: Resolution = TimedResolution()
    reporter_index: int = 17       # slot after which officials are spawned
    min_police: int = 0
    responder: Optional[str] = None
    blockage: bool = False
    payload: Optional[str] = None
    services: Tuple[ServiceEntry, ...] = ()


# ---------------------------------------------------------------------------
# sequence specifications


@dataclass(frozen=True)
class Step:
    key: str
    kind: MessageKind
    from_role: Optional[RoleKind] = None
    to_role: Optional[RoleKind] = None      # matched against wired receivers
    source: Optional[ActionSource] = None
    min_count: int = 1
    max_count: Optional[int] = None
    after: Tuple[str, ...] = ()


@dataclass(frozen=True)
class SequenceSpec:
    spec_id: str
    steps: Tuple[Step, ...]


@dataclass(frozen=True)
class StepResult:
    key: str
    satisfied: bool
    count: int
    first_index: Optional[int]
    reason: str = ""


@dataclass(frozen=True)
class ConformanceReport:
    spec_id: str
    results: Tuple[StepResult, ...]
    passed: bool

    def summary(self) -> str:
        lines = [f"sequence {self.spec_id}: {'PASS' if self.passed else 'FAIL'}"]
        for result in self.results:
            mark = "ok " if result.satisfied else "VIOLATION"
            lines.append(
                f"  [{mark}] {result.key}: count={result.count}"
                + (f" ({result.reason})" if result.reason else "")
            )
        return "\n".join(lines)


def _matches(record, step: Step) -> bool:
    if record.kind is not step.kind:
        return False
    if step.from_role is not None and record.sender_class is not step.from_role:
        return False
    if step.source is not None and record.source is not step.source:
        return False
    if step.to_role is not None:
        if record.receiver == "*":
            return False
        from .domain import role_of_label

        if role_of_label(record.receiver) is not step.to_role:
            return False
    return True


def check_conformance(trace, spec: SequenceSpec) -> ConformanceReport:
    """Validate a finished trace against a sequence spec.

    Violations are data, not errors: the report lists each constraint with
    the first offending trace index where applicable.
    """
    firsts: Dict[str, Optional[int]] = {}
    counts: Dict[str, int] = {}
    for step in spec.steps:
        first = None
        n = 0
        for i, record in enumerate(trace):
            if _matches(record, step):
                n += 1
                if first is None:
                    first = i
        firsts[step.key] = first
        counts[step.key] = n

    results: List[StepResult] = []
    for step in spec.steps:
        n = counts[step.key]
        first = firsts[step.key]
        satisfied = True
        reason = ""
        if n < step.min_count:
            satisfied = False
            reason = f"expected at least {step.min_count}, saw {n}"
        elif step.max_count is not None and n > step.max_count:
            satisfied = False
            reason = f"expected at most {step.max_count}, saw {n}"
        else:
            for prior in step.after:
                prior_first = firsts.get(prior)
                if prior_first is None:
                    satisfied = False
                    reason = f"must follow {prior!r}, which never occurred"
                    break
                if first is not None and first < prior_first:
                    satisfied = False
                    reason = f"occurred at index {first} before {prior!r} at {prior_first}"
                    break
        results.append(StepResult(step.key, satisfied, n, first, reason))
    passed = all(r.satisfied for r in results)
    return ConformanceReport(spec.spec_id, tuple(results), passed)


# ---------------------------------------------------------------------------
# spec catalogue

V = RoleKind.REGULAR_VEHICLE
O = RoleKind.OFFICIAL_VEHICLE
R = RoleKind.RSU
T = RoleKind.TA
ORIGIN = ActionSource.ORIGIN
RELAY = ActionSource.RELAY
BURST = ActionSource.BURST
WIRED = ActionSource.WIRED


def _escalation_steps(report: MessageKind, resolved: MessageKind) -> Tuple[Step, ...]:
    return (
        Step("report", report, from_role=V, source=ORIGIN, max_count=1),
        Step("escalate", report, from_role=R, to_role=T, source=WIRED, after=("report",)),
        Step("resolve", resolved, from_role=T, to_role=R, source=WIRED, after=("escalate",)),
        Step("cleared", MessageKind.CLEARED_ROAD, from_role=R, source=BURST,
             min_count=3, after=("resolve",)),
    )


def _report_steps(report: MessageKind, origin_role: RoleKind = V) -> Tuple[Step, ...]:
    return (
        Step("report", report, from_role=origin_role, source=ORIGIN, max_count=1),
        Step("announce", report, from_role=R, source=BURST, min_count=3, after=("report",)),
        Step("peer-notify", report, from_role=R, to_role=R, source=WIRED,
             min_count=1, after=("report",)),
    )


SEQUENCE_SPECS: Dict[str, SequenceSpec] = {}


def _register(spec: SequenceSpec) -> SequenceSpec:
    SEQUENCE_SPECS[spec.spec_id] = spec
    return spec


_register(SequenceSpec(
    "accident-announce",
    (
        Step("report", MessageKind.ACCIDENT, from_role=V, source=ORIGIN, max_count=1),
        Step("vehicle-relay", MessageKind.ACCIDENT, from_role=V, source=RELAY,
             after=("report",)),
        Step("rsu-announce", MessageKind.ACCIDENT, from_role=R, source=BURST,
             min_count=3, after=("report",)),
        Step("avoid", MessageKind.AVOID_ROAD, from_role=R, source=BURST,
             min_count=3, after=("report",)),
        Step("peer-notify", MessageKind.ACCIDENT, from_role=R, to_role=R,
             source=WIRED, min_count=1, after=("report",)),
        Step("cleared", MessageKind.CLEARED_ROAD, from_role=R, source=BURST,
             min_count=3, after=("rsu-announce",)),
        Step("cleared-peer", MessageKind.CLEARED_ROAD, from_role=R, to_role=R,
             source=WIRED, min_count=1, after=("cleared",)),
    ),
))

_register(SequenceSpec(
    "accident-official",
    (
        Step("report", MessageKind.ACCIDENT, from_role=V, source=ORIGIN, max_count=1),
        Step("addressing", MessageKind.ADDRESSING_INCIDENT, from_role=O,
             source=ORIGIN, max_count=1, after=("report",)),
        Step("ack", MessageKind.ACK, from_role=R, after=("addressing",)),
        Step("restricted", MessageKind.RESTRICTED_MOVEMENT, from_role=R,
             after=("addressing",)),
        Step("free-road", MessageKind.FREE_ROAD, from_role=O, source=ORIGIN,
             after=("ack",)),
        Step("attending", MessageKind.ATTENDING, from_role=O, source=ORIGIN,
             after=("ack",)),
        Step("sorted", MessageKind.SORTED_ROAD, from_role=O, source=ORIGIN,
             max_count=1, after=("attending",)),
        Step("cleared", MessageKind.CLEARED_ROAD, from_role=R, source=BURST,
             min_count=3, after=("sorted",)),
    ),
))

_register(SequenceSpec(
    "traffic-jam",
    _report_steps(MessageKind.TRAFFIC_JAM) + (
        Step("clear", MessageKind.CLEARED_ROAD, from_role=V, source=ORIGIN,
             max_count=1, after=("announce",)),
        Step("cleared", MessageKind.CLEARED_ROAD, from_role=R, source=BURST,
             min_count=3, after=("clear",)),
    ),
))

_register(SequenceSpec(
    "congestion",
    _report_steps(MessageKind.CONGESTION) + (
        Step("clear", MessageKind.CLEARED_ROAD, from_role=V, source=ORIGIN,
             max_count=1, after=("announce",)),
        Step("cleared", MessageKind.CLEARED_ROAD, from_role=R, source=BURST,
             min_count=3, after=("clear",)),
    ),
))

_register(SequenceSpec(
    "obstacle",
    _report_steps(MessageKind.OBSTACLE) + (
        Step("addressing", MessageKind.ADDRESSING_INCIDENT, from_role=O,
             source=ORIGIN, max_count=1, after=("report",)),
        Step("attending", MessageKind.ATTENDING, from_role=O, source=ORIGIN,
             after=("addressing",)),
        Step("removed", MessageKind.OBSTACLE_CLEARED, from_role=O, source=ORIGIN,
             max_count=1, after=("attending",)),
        Step("cleared", MessageKind.CLEARED_ROAD, from_role=R, source=BURST,
             min_count=3, after=("removed",)),
    ),
))

_register(SequenceSpec(
    "diversion",
    _report_steps(MessageKind.DIVERSION, origin_role=O) + (
        Step("cleared", MessageKind.CLEARED_ROAD, from_role=R, source=BURST,
             min_count=3, after=("announce",)),
    ),
))

_register(SequenceSpec(
    "stranded-vehicle",
    _report_steps(MessageKind.STRANDED_VEHICLE) + (
        Step("addressing", MessageKind.ADDRESSING_INCIDENT, from_role=O,
             source=ORIGIN, max_count=1, after=("report",)),
        Step("attending", MessageKind.ATTENDING, from_role=O, source=ORIGIN,
             after=("addressing",)),
        Step("official-clear", MessageKind.CLEARED_ROAD, from_role=O,
             source=ORIGIN, max_count=1, after=("attending",)),
        Step("cleared", MessageKind.CLEARED_ROAD, from_role=R, source=BURST,
             min_count=3, after=("official-clear",)),
    ),
))

_register(SequenceSpec(
    "debris", _escalation_steps(MessageKind.DEBRIS, MessageKind.DEBRIS_RESOLVED)
))
_register(SequenceSpec(
    "road-defect", _escalation_steps(MessageKind.ROAD_DEFECT, MessageKind.DEFECT_RESOLVED)
))
_register(SequenceSpec(
    "flood", _escalation_steps(MessageKind.FLOOD, MessageKind.FLOOD_RESOLVED)
))
_register(SequenceSpec(
    "signal-malfunction",
    _escalation_steps(MessageKind.SIGNAL_MALFUNCTION, MessageKind.SIGNAL_RESOLVED),
))

_register(SequenceSpec(
    "service-lookup",
    (
        Step("query", MessageKind.SERVICE_QUERY, from_role=V, source=ORIGIN, max_count=1),
        Step("reply", MessageKind.SERVICE_REPLY, from_role=R, source=ORIGIN,
             after=("query",)),
    ),
))

_register(SequenceSpec(
    "service-lookup-petrol",
    (
        Step("query", MessageKind.SERVICE_QUERY, from_role=V, source=ORIGIN, max_count=1),
        Step("reply", MessageKind.SERVICE_REPLY, from_role=R, source=ORIGIN,
             after=("query",)),
    ),
))


# ---------------------------------------------------------------------------
# scenario catalogue

_PETROL = (ServiceEntry("petrol-pump", "X", 500.0),)

SCENARIOS: Dict[str, ScenarioScript] = {
    script.name: script
    for script in (
        ScenarioScript(
            name="accident",
            reporter="V17",
            kind=MessageKind.ACCIDENT,
            spec_id="accident-announce",
            blockage=True,
            resolution=TimedResolution(850.0),
        ),
        ScenarioScript(
            name="accident-police",
            reporter="V17",
            kind=MessageKind.ACCIDENT,
            spec_id="accident-official",
            blockage=True,
            min_police=1,
            responder="P0",
            resolution=OfficialResolution(),
        ),
        ScenarioScript(
            name="traffic-jam",
            reporter="V17",
            kind=MessageKind.TRAFFIC_JAM,
            spec_id="traffic-jam",
            resolution=VehicleClearResolution(850.0),
        ),
        ScenarioScript(
            name="congestion",
            reporter="V17",
            kind=MessageKind.CONGESTION,
            spec_id="congestion",
            resolution=VehicleClearResolution(850.0),
        ),
        ScenarioScript(
            name="obstacle",
            reporter="V17",
            kind=MessageKind.OBSTACLE,
            spec_id="obstacle",
            min_police=1,
            responder="P0",
            resolution=OfficialResolution(),
        ),
        ScenarioScript(
            name="diversion",
            reporter="P0",
            kind=MessageKind.DIVERSION,
            spec_id="diversion",
            min_police=1,
            resolution=TimedResolution(850.0),
        ),
        ScenarioScript(
            name="stranded-vehicle",
            reporter="V17",
            kind=MessageKind.STRANDED_VEHICLE,
            spec_id="stranded-vehicle",
            min_police=1,
            responder="P0",
            resolution=OfficialResolution(),
        ),
        ScenarioScript(
            name="debris",
            reporter="V17",
            kind=MessageKind.DEBRIS,
            spec_id="debris",
            resolution=AuthorityResolution(),
        ),
        ScenarioScript(
            name="service-discovery",
            reporter="V17",
            kind=MessageKind.SERVICE_QUERY,
            spec_id="service-lookup-petrol",
            payload="petrol-pump",
            services=_PETROL,
            resolution=NoResolution(),
        ),
        ScenarioScript(
            name="road-defect",
            reporter="V17",
            kind=MessageKind.ROAD_DEFECT,
            spec_id="road-defect",
            resolution=AuthorityResolution(),
        ),
        ScenarioScript(
            name="flood",
            reporter="V17",
            kind=MessageKind.FLOOD,
            spec_id="flood",
            resolution=AuthorityResolution(),
        ),
        ScenarioScript(
            name="signal-malfunction",
            reporter="V17",
            kind=MessageKind.SIGNAL_MALFUNCTION,
            spec_id="signal-malfunction",
            resolution=AuthorityResolution(),
        ),
    )
}


def build_scenario(name: str, **overrides) -> ScenarioScript:
    """Look up a catalogue scenario, optionally overriding script fields."""
    if name not in SCENARIOS:
        known = ", ".join(sorted(SCENARIOS))
        raise KeyError(f"unknown scenario {name!r}; valid names: {known}")
    script = SCENARIOS[name]
    return replace(script, **overrides) if overrides else script


def spec_for(script: ScenarioScript) -> SequenceSpec:
    return SEQUENCE_SPECS[script.spec_id]
