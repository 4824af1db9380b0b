//! Generators for every wire message shape.

use awci::backend::FailureReason;
use awci::connection::{ConnectionState, Failure, LinkState};
use awci::gateway::{ClientMessage, ErrorCode, ServerEvent};
use awci::model::diff_snapshots;
use proptest::prelude::*;

use super::{arb_snapshot, ssid};

pub fn arb_code() -> impl Strategy<Value = ErrorCode> {
    prop_oneof![
        Just(ErrorCode::AuthFailed),
        Just(ErrorCode::NotConnected),
        Just(ErrorCode::Busy),
        Just(ErrorCode::UnknownSsid),
        Just(ErrorCode::PskRequired),
        Just(ErrorCode::PskInvalid),
        Just(ErrorCode::BadRequest),
        Just(ErrorCode::Timeout),
        Just(ErrorCode::NotFound),
        Just(ErrorCode::BackendError),
    ]
}

pub fn arb_state() -> impl Strategy<Value = ConnectionState> {
    let name = prop::sample::select(super::SSID_POOL);
    prop_oneof![
        Just(ConnectionState::disconnected()),
        name.clone().prop_map(|n| ConnectionState::failed(Failure { reason: FailureReason::AuthFailed, ssid: ssid(n) })),
        (
            prop::sample::select(vec![
                LinkState::Authenticating,
                LinkState::Connecting,
                LinkState::Connected,
                LinkState::Disconnecting
            ]),
            name
        )
            .prop_map(|(s, n)| ConnectionState::active(s, ssid(n))),
    ]
}

pub fn arb_event() -> impl Strategy<Value = ServerEvent> {
    prop_oneof![
        (arb_snapshot(), arb_state()).prop_map(|(s, st)| ServerEvent::hello(s.networks, &st)),
        (arb_snapshot(), arb_snapshot()).prop_map(|(a, b)| ServerEvent::networks(&diff_snapshots(&a, &b))),
        arb_state().prop_map(|st| ServerEvent::state(&st)),
        (arb_code(), "\\PC{0,40}").prop_map(|(c, m)| ServerEvent::error(c, m)),
    ]
}

pub fn arb_client() -> impl Strategy<Value = ClientMessage> {
    prop_oneof![
        ("\\PC{1,32}", proptest::option::of("[ -~]{8,63}")).prop_map(|(ssid, psk)| ClientMessage::Connect { ssid, psk }),
        Just(ClientMessage::Disconnect {}),
        Just(ClientMessage::Scan {}),
    ]
}
