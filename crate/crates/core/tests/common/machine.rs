//! Random request/phase scripts replayed against the pure connection machine.

use awci::backend::{BackendError, ConnectionPhase, FailureReason};
use awci::connection::{
    is_legal_transition, AttemptId, ConnectRequest, ConnectionMachine, Effect, LinkState, MachineEvent, Rejection,
    Step,
};
use awci::model::{validate_psk, NetworkSnapshot};
use proptest::prelude::*;

use super::{ssid, view};

#[derive(Debug, Clone)]
pub enum Op {
    Connect { target: usize, with_psk: bool },
    Disconnect,
    Phase { stale: usize, phase: ConnectionPhase },
    DisconnectDone { stale: usize, ok: bool },
}

fn arb_phase() -> impl Strategy<Value = ConnectionPhase> {
    prop_oneof![
        Just(ConnectionPhase::Authenticating),
        Just(ConnectionPhase::Connecting),
        Just(ConnectionPhase::Connected),
        prop_oneof![
            Just(FailureReason::AuthFailed),
            Just(FailureReason::Timeout),
            Just(FailureReason::NotFound),
            Just(FailureReason::BackendError),
        ]
        .prop_map(ConnectionPhase::Failed),
    ]
}

pub fn arb_op() -> impl Strategy<Value = Op> {
    prop_oneof![
        2 => (0usize..3, any::<bool>()).prop_map(|(target, with_psk)| Op::Connect { target, with_psk }),
        1 => Just(Op::Disconnect),
        4 => (0usize..3, arb_phase()).prop_map(|(stale, phase)| Op::Phase { stale, phase }),
        1 => (0usize..3, any::<bool>()).prop_map(|(stale, ok)| Op::DisconnectDone { stale, ok }),
    ]
}

/// "Secure" (secure), "Open" (open); "Ghost" is not listed.
fn world() -> (NetworkSnapshot, [&'static str; 3]) {
    let snap = NetworkSnapshot::ranked(vec![view("Secure", 70, true, 1), view("Open", 60, false, 1)], 0);
    (snap, ["Secure", "Open", "Ghost"])
}

fn attempt_of(effect: &Effect) -> AttemptId {
    match effect {
        Effect::StartConnect { attempt, .. } | Effect::CancelConnect { attempt } | Effect::StartDisconnect { attempt } => {
            *attempt
        }
    }
}

/// Checks one step against the state it started from. Returns the number
/// of state changes.
fn check_step(before: LinkState, step: &Step, machine: &ConnectionMachine) -> usize {
    let mut at = before;
    let mut changes = 0;
    for event in &step.events {
        if let MachineEvent::StateChanged { from, state } = event {
            assert_eq!(*from, at);
            assert!(is_legal_transition(at, state.state()), "{at} -> {}", state.state());
            at = state.state();
            changes += 1;
        }
    }
    assert_eq!(at, machine.state().state());
    changes
}

fn check_invariants(m: &ConnectionMachine) {
    let s = m.state();
    let active = matches!(s.state(), LinkState::Authenticating | LinkState::Connecting | LinkState::Disconnecting);
    assert_eq!(m.attempt_in_flight(), active, "{s:?}");
    assert_eq!(s.ssid().is_some(), s.state() != LinkState::Disconnected, "{s:?}");
    if s.failure().is_some() {
        assert_eq!(s.state(), LinkState::Disconnected);
    }
}

pub fn run_script(ops: &[Op]) -> (usize, usize) {
    let (snapshot, names) = world();
    let mut m = ConnectionMachine::new();
    let mut attempts: Vec<AttemptId> = Vec::new();
    let (mut transitions, mut events) = (0, 0);
    for op in ops {
        let before = m.state().clone();
        let current = m.current_attempt();
        let pick = |stale: usize| -> Option<AttemptId> {
            if stale == 0 {
                current
            } else {
                attempts.iter().rev().nth(stale - 1).copied()
            }
        };
        let step = match op.clone() {
            Op::Connect { target, with_psk } => {
                let psk = with_psk.then(|| validate_psk("password1").unwrap());
                let req = ConnectRequest::new(ssid(names[target]), psk);
                let result = m.request_connect(req, &snapshot);
                let expected_rejection = if before.state() != LinkState::Disconnected {
                    Some(Rejection::Busy)
                } else if target == 2 {
                    Some(Rejection::UnknownSsid)
                } else if target == 0 && !with_psk {
                    Some(Rejection::PskRequired)
                } else {
                    None
                };
                match (result, expected_rejection) {
                    (Err(got), Some(want)) => {
                        assert_eq!(got, want);
                        assert_eq!(m.state(), &before, "rejection must not change state");
                        continue;
                    }
                    (Ok(step), None) => {
                        let first = if target == 0 { LinkState::Authenticating } else { LinkState::Connecting };
                        assert_eq!(m.state().state(), first);
                        assert!(m.state().failure().is_none());
                        step
                    }
                    (got, want) => panic!("connect from {before:?}: got {got:?}, wanted {want:?}"),
                }
            }
            Op::Disconnect => match m.request_disconnect() {
                Ok(step) => {
                    assert!(!matches!(before.state(), LinkState::Disconnected | LinkState::Disconnecting));
                    step
                }
                Err(r) => {
                    let want = if before.state() == LinkState::Disconnected {
                        Rejection::NotConnected
                    } else {
                        Rejection::Busy
                    };
                    assert_eq!(r, want);
                    continue;
                }
            },
            Op::Phase { stale, phase } => {
                let Some(id) = pick(stale) else { continue };
                let step = m.on_phase(id, phase);
                if Some(id) != current {
                    assert!(step.events.is_empty(), "stale phase changed state");
                }
                step
            }
            Op::DisconnectDone { stale, ok } => {
                let Some(id) = pick(stale) else { continue };
                let result = if ok { Ok(()) } else { Err(BackendError::Unavailable("stub".into())) };
                let step = m.on_disconnect_complete(id, result);
                if Some(id) != current || before.state() != LinkState::Disconnecting {
                    assert!(step.events.is_empty());
                }
                step
            }
        };
        transitions += check_step(before.state(), &step, &m);
        events += step
            .events
            .iter()
            .filter(|e| matches!(e, MachineEvent::StateChanged { .. }))
            .count();
        if let Some(effect) = &step.effect {
            let id = attempt_of(effect);
            if !attempts.contains(&id) {
                attempts.push(id);
            }
        }
        check_invariants(&m);
    }
    (transitions, events)
}
