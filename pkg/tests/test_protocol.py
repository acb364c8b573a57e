import pytest

from vanetim.domain import (
    EntityId,
    MessageIdSource,
    MessageKind,
    POLICE,
    RSU,
    TA,
    VEHICLE,
    make_message,
    relayed_copy,
)
from vanetim.protocol import (
    Arm,
    Broadcast,
    DEFAULT_RULE_ROWS,
    IncidentLedger,
    IncidentStatus,
    OfficialPhase,
    OfficialState,
    ProtocolOrderError,
    ReceivedMessage,
    IncidentResolved,
    RsuRuleTable,
    RsuState,
    RuleRow,
    ServiceDirectory,
    ServiceEntry,
    SpeedHistory,
    TaState,
    VehicleState,
    Wired,
    detect_congestion,
    detect_jam,
    handle_official,
    handle_official_timer,
    handle_rsu,
    handle_service_query,
    handle_ta,
    handle_ta_timer,
    handle_vehicle,
    relay_decision,
)
from vanetim.relay import FRESH60, HOP4, record_seen

V17 = EntityId(17, VEHICLE)
P0 = EntityId(0, POLICE)
RSU0 = EntityId(0, RSU)
RSU1 = EntityId(1, RSU)
RSU9 = EntityId(9, RSU)
TA0 = EntityId(0, TA)


def fresh_rsu(index=0):
    return RsuState(entity=EntityId(index, RSU), neighbours=(RSU9, RSU1), ta=TA0)


def broadcasts(actions, kind=None):
    out = [a for a in actions if isinstance(a, Broadcast)]
    if kind is not None:
        out = [a for a in out if a.message.kind is kind]
    return out


def wired(actions, kind=None):
    out = [a for a in actions if isinstance(a, Wired)]
    if kind is not None:
        out = [a for a in out if a.message.kind is kind]
    return out


class TestRuleTable:
    def test_exactly_nine_populated_rows(self):
        assert len(DEFAULT_RULE_ROWS) == 9

    def test_unpopulated_rows_yield_zero(self):
        table = RsuRuleTable()
        row = table.lookup(MessageKind.FLOOD, VEHICLE.kind, True)
        assert row == RuleRow(0)

    def test_accident_from_vehicle_first_receipt(self):
        state = fresh_rsu()
        msg = make_message(MessageKind.ACCIDENT, "X", V17, 550.0)
        actions = handle_rsu(state, msg, VEHICLE, 550.0, ids=MessageIdSource())
        assert len(broadcasts(actions, MessageKind.ACCIDENT)) == 3
        assert len(broadcasts(actions, MessageKind.AVOID_ROAD)) == 3
        assert len(wired(actions, MessageKind.ACCIDENT)) == 2  # both neighbours
        assert state.ledger.status("X") is IncidentStatus.OPEN

    def test_accident_from_rsu(self):
        state = fresh_rsu()
        msg = make_message(MessageKind.ACCIDENT, "X", V17, 550.0)
        actions = handle_rsu(state, msg, RSU, 551.0, ids=MessageIdSource())
        assert len(broadcasts(actions, MessageKind.ACCIDENT)) == 2
        assert len(broadcasts(actions, MessageKind.AVOID_ROAD)) == 2
        assert wired(actions) == []

    def test_avoid_road_from_rsu(self):
        state = fresh_rsu()
        msg = make_message(MessageKind.AVOID_ROAD, "X", RSU1, 551.0)
        actions = handle_rsu(state, msg, RSU, 551.0, ids=MessageIdSource())
        assert len(broadcasts(actions, MessageKind.AVOID_ROAD)) == 3
        assert len(actions) == 3

    def test_avoid_road_from_vehicle(self):
        state = fresh_rsu()
        msg = make_message(MessageKind.AVOID_ROAD, "X", RSU1, 551.0)
        actions = handle_rsu(state, msg, VEHICLE, 560.0, ids=MessageIdSource())
        assert len(broadcasts(actions, MessageKind.AVOID_ROAD)) == 2
        assert len(actions) == 2

    def test_stale_accident_from_vehicle(self):
        state = fresh_rsu()
        msg = make_message(MessageKind.ACCIDENT, "X", V17, 550.0)
        handle_rsu(state, msg, VEHICLE, 550.0, ids=MessageIdSource())
        # the same report arrives again from another vehicle; incident open
        actions = handle_rsu(state, msg, VEHICLE, 580.0, ids=MessageIdSource())
        assert len(broadcasts(actions, MessageKind.ACCIDENT)) == 2
        assert broadcasts(actions, MessageKind.AVOID_ROAD) == []
        third = handle_rsu(state, msg, VEHICLE, 590.0, ids=MessageIdSource())
        assert third == []  # stale row fires once

    def test_accident_on_resolved_road_ignored(self):
        state = fresh_rsu()
        state.ledger.open("X", 500.0)
        state.ledger.resolve("X", 540.0)
        msg = make_message(MessageKind.ACCIDENT, "X", V17, 550.0)
        assert handle_rsu(state, msg, VEHICLE, 550.0, ids=MessageIdSource()) == []


class TestRsuResolution:
    def test_sorted_road_from_police(self):
        state = fresh_rsu()
        state.ledger.open("X", 550.0)
        msg = make_message(MessageKind.SORTED_ROAD, "X", P0, 700.0)
        actions = handle_rsu(state, msg, POLICE, 700.0, ids=MessageIdSource())
        assert len(broadcasts(actions, MessageKind.CLEARED_ROAD)) == 3
        assert len(wired(actions, MessageKind.CLEARED_ROAD)) == 2
        assert state.ledger.status("X") is IncidentStatus.RESOLVED

    def test_cleared_road_from_rsu(self):
        state = fresh_rsu()
        state.ledger.open("X", 550.0)
        msg = make_message(MessageKind.CLEARED_ROAD, "X", RSU1, 700.0)
        actions = handle_rsu(state, msg, RSU, 700.0, ids=MessageIdSource())
        assert len(broadcasts(actions, MessageKind.CLEARED_ROAD)) == 3

    def test_clearance_without_open_incident_not_rebroadcast(self):
        state = fresh_rsu()
        msg = make_message(MessageKind.CLEARED_ROAD, "X", RSU1, 700.0)
        actions = handle_rsu(state, msg, RSU, 700.0, ids=MessageIdSource())
        assert broadcasts(actions) == []  # only forwarded along the backbone
        assert all(isinstance(a, Wired) for a in actions)


class TestIncidentLedger:
    def test_lifecycle(self):
        ledger = IncidentLedger()
        ledger.open("X", 550.0)
        ledger.attend("X", 560.0)
        ledger.resolve("X", 700.0)
        assert ledger.status("X") is IncidentStatus.RESOLVED
        assert [s for s, _ in ledger.history("X")] == [
            IncidentStatus.OPEN,
            IncidentStatus.BEING_ATTENDED,
            IncidentStatus.RESOLVED,
        ]

    def test_resolve_without_open_raises(self):
        with pytest.raises(ProtocolOrderError):
            IncidentLedger().resolve("X", 1.0)

    def test_backward_transition_raises(self):
        ledger = IncidentLedger()
        ledger.open("X", 1.0)
        ledger.resolve("X", 2.0)
        with pytest.raises(ProtocolOrderError):
            ledger.attend("X", 3.0)

    def test_reopen_after_resolution(self):
        ledger = IncidentLedger()
        ledger.open("X", 1.0)
        ledger.resolve("X", 2.0)
        ledger.open("X", 3.0)  # a fresh episode on the same road
        assert ledger.status("X") is IncidentStatus.OPEN

    def test_double_open_is_noop(self):
        ledger = IncidentLedger()
        ledger.open("X", 1.0)
        ledger.open("X", 2.0)
        assert len(ledger.history("X")) == 1


class TestOfficialFlow:
    def _respond(self, ids):
        state = OfficialState(entity=P0, responder=True)
        report = make_message(MessageKind.ACCIDENT, "X", V17, 550.0, ids=ids)
        actions = handle_official(state, ReceivedMessage(report, VEHICLE), 551.0, ids=ids)
        return state, report, actions

    def test_report_triggers_addressing(self):
        ids = MessageIdSource()
        state, _, actions = self._respond(ids)
        assert len(actions) == 1
        assert actions[0].message.kind is MessageKind.ADDRESSING_INCIDENT
        assert state.incidents["X"].phase is OfficialPhase.ADDRESSING

    def test_ack_starts_travel_and_announcements(self):
        ids = MessageIdSource()
        state, _, actions = self._respond(ids)
        addressing = actions[0].message
        ack = make_message(
            MessageKind.ACK, "X", RSU0, 552.0, ids=ids, correlation=addressing.id
        )
        out = handle_official(state, ReceivedMessage(ack, RSU), 552.0, ids=ids)
        assert {a.token[0] for a in out if isinstance(a, Arm)} == {
            "official-announce",
            "official-arrival",
        }
        assert state.incidents["X"].phase is OfficialPhase.EN_ROUTE

    def test_announce_timer_sends_free_road_and_attending(self):
        ids = MessageIdSource()
        state, _, actions = self._respond(ids)
        addressing = actions[0].message
        ack = make_message(
            MessageKind.ACK, "X", RSU0, 552.0, ids=ids, correlation=addressing.id
        )
        handle_official(state, ReceivedMessage(ack, RSU), 552.0, ids=ids)
        out = handle_official_timer(state, ("official-announce", "X"), 552.0, ids=ids)
        kinds = [a.message.kind for a in out if isinstance(a, Broadcast)]
        assert kinds == [MessageKind.FREE_ROAD, MessageKind.ATTENDING]
        free = [a for a in out if isinstance(a, Broadcast)][0]
        assert free.downstream_only  # free-road clears the path ahead only
        assert any(isinstance(a, Arm) for a in out)  # periodic re-arm

    def test_arrival_then_resolution(self):
        ids = MessageIdSource()
        state, report, actions = self._respond(ids)
        addressing = actions[0].message
        ack = make_message(
            MessageKind.ACK, "X", RSU0, 552.0, ids=ids, correlation=addressing.id
        )
        handle_official(state, ReceivedMessage(ack, RSU), 552.0, ids=ids)
        arrival = handle_official_timer(state, ("official-arrival", "X"), 612.0, ids=ids)
        assert state.incidents["X"].phase is OfficialPhase.ON_SITE
        assert [a.token[0] for a in arrival] == ["official-resolve"]
        done = handle_official_timer(state, ("official-resolve", "X"), 732.0, ids=ids)
        assert len(done) == 1
        assert done[0].message.kind is MessageKind.SORTED_ROAD
        assert done[0].message.correlation == report.id
        assert state.incidents["X"].phase is OfficialPhase.DONE

    def test_resolution_without_incident_is_order_violation(self):
        state = OfficialState(entity=P0, responder=True)
        with pytest.raises(ProtocolOrderError):
            handle_official(state, IncidentResolved("X"), 700.0)

    def test_non_responder_ignores_reports(self):
        state = OfficialState(entity=P0, responder=False)
        report = make_message(MessageKind.ACCIDENT, "X", V17, 550.0)
        assert handle_official(state, ReceivedMessage(report, VEHICLE), 551.0) == []


class TestTrafficAuthority:
    def test_flood_resolved_after_delay(self):
        ids = MessageIdSource()
        state = TaState(entity=TA0)
        report = make_message(MessageKind.FLOOD, "X", V17, 600.0, ids=ids)
        actions = handle_ta(state, report, 600.0, reporting_rsu=RSU0)
        assert len(actions) == 1
        arm = actions[0]
        assert arm.at == 600.0 + state.cfg.ta_service_delay
        out = handle_ta_timer(state, arm.token, arm.at, ids=ids)
        assert len(out) == 1
        assert out[0].message.kind is MessageKind.FLOOD_RESOLVED
        assert out[0].to == RSU0

    def test_signal_malfunction_resolution_kind(self):
        ids = MessageIdSource()
        state = TaState(entity=TA0)
        report = make_message(MessageKind.SIGNAL_MALFUNCTION, "X", V17, 600.0, ids=ids)
        (arm,) = handle_ta(state, report, 600.0, reporting_rsu=RSU0)
        (out,) = handle_ta_timer(state, arm.token, arm.at, ids=ids)
        assert out.message.kind is MessageKind.SIGNAL_RESOLVED

    def test_non_authority_kind_dropped(self):
        state = TaState(entity=TA0)
        report = make_message(MessageKind.ACCIDENT, "X", V17, 600.0)
        assert handle_ta(state, report, 600.0, reporting_rsu=RSU0) == []

    def test_duplicate_report_scheduled_once(self):
        state = TaState(entity=TA0)
        report = make_message(MessageKind.FLOOD, "X", V17, 600.0)
        assert len(handle_ta(state, report, 600.0, reporting_rsu=RSU0)) == 1
        assert handle_ta(state, report, 601.0, reporting_rsu=RSU1) == []


class TestServiceDirectory:
    def test_query_returns_registered_road(self):
        state = fresh_rsu()
        registry = ServiceDirectory((ServiceEntry("petrol-pump", "X", 500.0),))
        query = make_message(
            MessageKind.SERVICE_QUERY, "Y", V17, 600.0, payload="petrol-pump"
        )
        (reply,) = handle_service_query(
            state, query, registry, 600.0, ids=MessageIdSource()
        )
        assert reply.message.kind is MessageKind.SERVICE_REPLY
        assert reply.message.road == "X"

    def test_empty_registry_gives_empty_reply(self):
        state = fresh_rsu()
        query = make_message(
            MessageKind.SERVICE_QUERY, "Y", V17, 600.0, payload="parking"
        )
        (reply,) = handle_service_query(
            state, query, ServiceDirectory(), 600.0, ids=MessageIdSource()
        )
        assert reply.message.payload == "no-result"

    def test_nearest_by_route_distance(self):
        # brute-force oracle over the registry entries
        entries = (
            ServiceEntry("restaurant", "Y", 1200.0),
            ServiceEntry("restaurant", "W", 3600.0),
        )
        registry = ServiceDirectory(entries, route_length=4000.0)
        origin = 3900.0

        def ring(p):
            d = abs(p - origin) % 4000.0
            return min(d, 4000.0 - d)

        oracle = min(entries, key=lambda e: ring(e.position))
        assert registry.nearest("restaurant", origin) == oracle
        assert oracle.road == "W"

    def test_query_answered_once(self):
        state = fresh_rsu()
        registry = ServiceDirectory((ServiceEntry("petrol-pump", "X", 500.0),))
        query = make_message(
            MessageKind.SERVICE_QUERY, "Y", V17, 600.0, payload="petrol-pump"
        )
        assert len(handle_service_query(state, query, registry, 600.0)) == 1
        assert handle_service_query(state, query, registry, 601.0) == []


class TestDetectors:
    def _history(self, speed, seconds, dt=1.0):
        history = SpeedHistory()
        t = 0.0
        while t <= seconds:
            history.record(t, speed)
            t += dt
        return history, t - dt

    def test_jam_after_31s_with_queue(self):
        history, now = self._history(0.05, 31.0)
        msg = detect_jam(history, True, now, origin=V17)
        assert msg is not None and msg.kind is MessageKind.TRAFFIC_JAM
        # once per episode
        assert detect_jam(history, True, now + 1.0, origin=V17) is None

    def test_jam_requires_queue_ahead(self):
        history, now = self._history(0.05, 31.0)
        assert detect_jam(history, False, now, origin=V17) is None

    def test_jam_boundary_is_strict(self):
        history, now = self._history(0.0, 30.0)
        assert detect_jam(history, True, now, origin=V17) is None

    def test_congestion_in_window(self):
        history, now = self._history(5.0, 70.0)
        msg = detect_congestion(history, now, origin=V17)
        assert msg is not None and msg.kind is MessageKind.CONGESTION
        assert detect_congestion(history, now + 1.0, origin=V17) is None

    def test_congestion_below_window(self):
        history, now = self._history(5.0, 59.0)
        assert detect_congestion(history, now, origin=V17) is None

    def test_crawl_speed_is_jam_path_not_congestion(self):
        history, now = self._history(0.5, 70.0)
        assert detect_congestion(history, now, origin=V17) is None

    def test_moving_again_resets_episode(self):
        history = SpeedHistory()
        for t in range(0, 32):
            history.record(float(t), 0.0)
        assert detect_jam(history, True, 31.0, origin=V17) is not None
        history.record(32.0, 5.0)   # moving again ends the episode
        for t in range(33, 90):
            history.record(float(t), 0.0)
        assert detect_jam(history, True, 89.0, origin=V17) is not None

    def test_samples_must_advance_in_time(self):
        history = SpeedHistory()
        history.record(1.0, 0.0)
        with pytest.raises(ValueError):
            history.record(1.0, 0.0)


class TestRelayDecision:
    def test_copy_forwarded_as_received(self):
        # hop counting happens at radio delivery, so the relayed copy keeps
        # the hop count it arrived with
        state = VehicleState(entity=EntityId(3, VEHICLE))
        msg = make_message(MessageKind.ACCIDENT, "X", V17, 550.0)
        (out,) = relay_decision(state, relayed_copy(msg), HOP4, 551.0)
        assert out.message.hops == 1
        assert out.message.id == msg.id

    def test_dedup_is_permanent(self):
        state = VehicleState(entity=EntityId(3, VEHICLE))
        msg = make_message(MessageKind.ACCIDENT, "X", V17, 550.0)
        relay_decision(state, msg, HOP4, 551.0)
        assert relay_decision(state, msg, HOP4, 560.0) == []

    def test_policy_block_yields_no_action(self):
        state = VehicleState(entity=EntityId(3, VEHICLE))
        msg = make_message(MessageKind.ACCIDENT, "X", V17, 550.0)
        assert relay_decision(state, msg, FRESH60, 650.0) == []
        # a blocked message is recorded only on actual relay
        assert relay_decision(state, msg, HOP4, 651.0) != []

    def test_handle_vehicle_requires_regular_vehicle(self):
        state = OfficialState(entity=P0)
        msg = make_message(MessageKind.ACCIDENT, "X", V17, 550.0)
        with pytest.raises(ValueError):
            handle_vehicle(state, msg, HOP4, 551.0)
