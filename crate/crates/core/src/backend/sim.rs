//! Deterministic wireless simulator.
//!
//! Scan results are a pure function of the environment and the virtual time
//! elapsed since the backend was created. Virtual time is tokio time, so tests
//! running with a paused clock are fully deterministic.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::mpsc;
use tokio::time::Instant;

use super::{BackendError, ConnectionPhase, FailureReason, PhaseStream, WirelessBackend};
use crate::model::{
    clamp_dbm, validate_psk, validate_ssid, AccessPoint, Bssid, Psk, Security, Ssid,
    MAX_SIGNAL_DBM, MIN_SIGNAL_DBM,
};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("environment file is not valid: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("environment invariant violated: {0}")]
    InvariantViolation(String),
}

/// Periodic triangle-wave offset applied to an AP's base signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalDrift {
    pub period_ms: u64,
    pub amplitude_db: i32,
}

impl SignalDrift {
    /// Offset in dB at time `t_ms`, ranging over `[-amplitude, amplitude]`.
    pub fn offset_at(&self, t_ms: u64) -> i64 {
        let period = self.period_ms as i64;
        let amp = self.amplitude_db as i64;
        let phase = (t_ms % self.period_ms) as i64;
        amp - (4 * amp * (phase - period / 2).abs()) / period
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimAccessPoint {
    pub ap: AccessPoint,
    pub appear_at_ms: u64,
    pub disappear_at_ms: Option<u64>,
    pub signal_drift: Option<SignalDrift>,
}

impl SimAccessPoint {
    pub fn visible_at(&self, t_ms: u64) -> bool {
        self.appear_at_ms <= t_ms && self.disappear_at_ms.is_none_or(|end| t_ms < end)
    }

    pub fn dbm_at(&self, t_ms: u64) -> i32 {
        let drift = self.signal_drift.map_or(0, |d| d.offset_at(t_ms));
        clamp_dbm(self.ap.signal_dbm as i64 + drift)
    }
}

#[derive(Debug, Clone)]
pub struct SimEnvironment {
    pub interface_name: String,
    pub aps: Vec<SimAccessPoint>,
    pub auth: HashMap<Ssid, Psk>,
    pub auth_delay_ms: u64,
    pub connect_delay_ms: u64,
    pub disconnect_delay_ms: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvFile {
    #[serde(default = "default_interface")]
    interface: String,
    #[serde(default)]
    auth_delay_ms: u64,
    #[serde(default)]
    connect_delay_ms: u64,
    #[serde(default)]
    disconnect_delay_ms: u64,
    #[serde(default)]
    auth: BTreeMap<String, String>,
    #[serde(default)]
    aps: Vec<ApFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApFile {
    ssid: String,
    bssid: String,
    signal_dbm: i32,
    secure: bool,
    channel: u32,
    #[serde(default)]
    appear_at_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    disappear_at_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signal_drift: Option<SignalDrift>,
}

fn default_interface() -> String {
    "wlan0".to_owned()
}

fn violation(msg: impl Into<String>) -> EnvError {
    EnvError::InvariantViolation(msg.into())
}

impl SimEnvironment {
    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let file: EnvFile = serde_json::from_str(text)?;
        if file.interface.is_empty() {
            return Err(violation("interface name is empty"));
        }

        let mut auth = HashMap::new();
        for (name, secret) in &file.auth {
            let ssid = validate_ssid(name.as_bytes())
                .map_err(|e| violation(format!("auth entry {name:?}: {e}")))?;
            let psk = validate_psk(secret)
                .map_err(|e| violation(format!("auth entry for {name:?}: {e}")))?;
            auth.insert(ssid, psk);
        }

        let mut aps = Vec::with_capacity(file.aps.len());
        for (i, ap) in file.aps.into_iter().enumerate() {
            let ctx = |msg: String| violation(format!("aps[{i}]: {msg}"));
            let ssid = validate_ssid(ap.ssid.as_bytes()).map_err(|e| ctx(e.to_string()))?;
            let bssid: Bssid = ap.bssid.parse().map_err(|e: crate::model::BssidParseError| ctx(e.to_string()))?;
            if !(MIN_SIGNAL_DBM..=MAX_SIGNAL_DBM).contains(&ap.signal_dbm) {
                return Err(ctx(format!("signal_dbm {} outside [-100, -10]", ap.signal_dbm)));
            }
            if ap.channel == 0 {
                return Err(ctx("channel must be positive".into()));
            }
            if let Some(end) = ap.disappear_at_ms {
                if end <= ap.appear_at_ms {
                    return Err(ctx(format!(
                        "disappear_at_ms {end} is not after appear_at_ms {}",
                        ap.appear_at_ms
                    )));
                }
            }
            if let Some(drift) = ap.signal_drift {
                if drift.period_ms == 0 || drift.amplitude_db < 0 {
                    return Err(ctx("signal_drift needs a positive period and non-negative amplitude".into()));
                }
            }
            if ap.secure && !auth.contains_key(&ssid) {
                return Err(ctx(format!("protected network {:?} has no auth entry", ap.ssid)));
            }
            let security = Security::from_secure(ap.secure);
            let access_point = AccessPoint::new(ssid, bssid, ap.signal_dbm, security, ap.channel)
                .expect("channel checked above");
            aps.push(SimAccessPoint {
                ap: access_point,
                appear_at_ms: ap.appear_at_ms,
                disappear_at_ms: ap.disappear_at_ms,
                signal_drift: ap.signal_drift,
            });
        }

        Ok(SimEnvironment {
            interface_name: file.interface,
            aps,
            auth,
            auth_delay_ms: file.auth_delay_ms,
            connect_delay_ms: file.connect_delay_ms,
            disconnect_delay_ms: file.disconnect_delay_ms,
        })
    }

    /// Access points visible at `t_ms`, in file order.
    pub fn scan_at(&self, t_ms: u64) -> Vec<AccessPoint> {
        self.aps
            .iter()
            .filter(|sim| sim.visible_at(t_ms))
            .map(|sim| AccessPoint {
                signal_dbm: sim.dbm_at(t_ms),
                ..sim.ap.clone()
            })
            .collect()
    }

    fn visible_security(&self, ssid: &Ssid, t_ms: u64) -> Option<Security> {
        self.aps
            .iter()
            .filter(|sim| &sim.ap.ssid == ssid && sim.visible_at(t_ms))
            .max_by_key(|sim| sim.dbm_at(t_ms))
            .map(|sim| sim.ap.security)
    }
}

pub fn load_environment(path: impl AsRef<Path>) -> Result<SimEnvironment, EnvError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| EnvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    SimEnvironment::from_json(&text)
}

pub struct SimBackend {
    env: Arc<SimEnvironment>,
    epoch: Instant,
    associated: Arc<Mutex<Option<Ssid>>>,
    link_up: AtomicBool,
}

impl SimBackend {
    /// Virtual time starts at zero now.
    pub fn new(env: SimEnvironment) -> Self {
        SimBackend {
            env: Arc::new(env),
            epoch: Instant::now(),
            associated: Arc::new(Mutex::new(None)),
            link_up: AtomicBool::new(true),
        }
    }

    pub fn environment(&self) -> &SimEnvironment {
        &self.env
    }

    pub fn now_ms(&self) -> u64 {
        self.epoch.elapsed().as_millis() as u64
    }

    /// Fault injection: while down, every scan fails with `InterfaceDown`.
    pub fn set_link_up(&self, up: bool) {
        self.link_up.store(up, Ordering::SeqCst);
    }

    pub fn associated(&self) -> Option<Ssid> {
        self.associated.lock().unwrap().clone()
    }

    fn check_interface(&self, interface: &str) -> Result<(), BackendError> {
        if interface != self.env.interface_name || !self.link_up.load(Ordering::SeqCst) {
            return Err(BackendError::InterfaceDown(interface.to_owned()));
        }
        Ok(())
    }
}

/// Sleeps unless the consumer hangs up first. Returns false on hang-up.
async fn wait_or_cancel(tx: &mpsc::Sender<ConnectionPhase>, delay_ms: u64) -> bool {
    tokio::select! {
        _ = tokio::time::sleep(Duration::from_millis(delay_ms)) => true,
        _ = tx.closed() => false,
    }
}

#[async_trait]
impl WirelessBackend for SimBackend {
    async fn scan(&self, interface: &str) -> Result<Vec<AccessPoint>, BackendError> {
        self.check_interface(interface)?;
        Ok(self.env.scan_at(self.now_ms()))
    }

    fn begin_connect(&self, interface: &str, ssid: &Ssid, psk: Option<&Psk>) -> PhaseStream {
        let (tx, rx) = mpsc::channel(4);
        let env = Arc::clone(&self.env);
        let associated = Arc::clone(&self.associated);
        let target = if self.check_interface(interface).is_ok() {
            env.visible_security(ssid, self.now_ms())
        } else {
            None
        };
        let ssid = ssid.clone();
        let psk = psk.cloned();

        tokio::spawn(async move {
            let Some(security) = target else {
                let _ = tx.send(ConnectionPhase::Failed(FailureReason::NotFound)).await;
                return;
            };
            if security.is_secure() {
                if tx.send(ConnectionPhase::Authenticating).await.is_err()
                    || !wait_or_cancel(&tx, env.auth_delay_ms).await
                {
                    return;
                }
                let expected = env.auth.get(&ssid);
                if expected.is_none() || expected != psk.as_ref() {
                    let _ = tx.send(ConnectionPhase::Failed(FailureReason::AuthFailed)).await;
                    return;
                }
            }
            if tx.send(ConnectionPhase::Connecting).await.is_err()
                || !wait_or_cancel(&tx, env.connect_delay_ms).await
            {
                return;
            }
            *associated.lock().unwrap() = Some(ssid);
            if tx.send(ConnectionPhase::Connected).await.is_err() {
                *associated.lock().unwrap() = None;
            }
        });
        rx
    }

    async fn begin_disconnect(&self, _interface: &str) -> Result<(), BackendError> {
        if self.associated().is_none() {
            return Ok(());
        }
        tokio::time::sleep(Duration::from_millis(self.env.disconnect_delay_ms)).await;
        *self.associated.lock().unwrap() = None;
        Ok(())
    }
}
