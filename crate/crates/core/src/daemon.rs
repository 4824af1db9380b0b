//! Wires the backend, scan loop, connection manager and gateway together.

use std::net::SocketAddr;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::JoinHandle;
use tokio_util::sync::CancellationToken;
use tracing::{error, info, warn};

use crate::backend::sim::EnvError;
use crate::backend::{load_environment, BackendKind, SimBackend, SystemBackend, WirelessBackend};
use crate::config::DaemonConfig;
use crate::connection::{ConnectionManager, EventSink, ManagerConfig};
use crate::gateway::{router, Gateway, Hub};
use crate::model::{NetworkDiff, NetworkSnapshot};
use crate::scan::{ScanLoop, SnapshotPublisher};

pub const SHUTDOWN_DEADLINE: Duration = Duration::from_secs(3);

#[derive(Debug, Error)]
pub enum StartError {
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error("cannot load simulator environment: {0}")]
    Environment(#[from] EnvError),
    #[error("the sim backend needs an environment file")]
    MissingEnvironment,
}

/// Feeds published snapshots to the connection manager, then to clients.
struct Publisher {
    hub: Arc<Hub>,
    latest: watch::Sender<NetworkSnapshot>,
}

impl SnapshotPublisher for Publisher {
    fn publish(&self, diff: &NetworkDiff, snapshot: &NetworkSnapshot) {
        self.latest.send_replace(snapshot.clone());
        self.hub.publish_networks(diff, snapshot);
    }
}

pub fn build_backend(config: &DaemonConfig) -> Result<Arc<dyn WirelessBackend>, StartError> {
    match config.backend {
        BackendKind::Sim => {
            let path = config.env_file.as_ref().ok_or(StartError::MissingEnvironment)?;
            let env = load_environment(path)?;
            if env.interface_name != config.interface {
                warn!(
                    target: "daemon",
                    configured = %config.interface,
                    simulated = %env.interface_name,
                    "interface does not match the simulator environment; scans will fail"
                );
            }
            info!(target: "daemon", path = %path.display(), aps = env.aps.len(), "loaded simulator environment");
            Ok(Arc::new(SimBackend::new(env)))
        }
        BackendKind::System => Ok(Arc::new(SystemBackend::new(config.commands.clone()))),
    }
}

/// A running daemon. Dropping it does not stop it; call [`Daemon::shutdown`].
pub struct Daemon {
    local_addr: SocketAddr,
    hub: Arc<Hub>,
    manager: ConnectionManager,
    shutdown: CancellationToken,
    server: JoinHandle<()>,
    workers: Vec<JoinHandle<()>>,
}

impl Daemon {
    pub async fn start(config: &DaemonConfig) -> Result<Daemon, StartError> {
        let backend = build_backend(config)?;
        Self::start_with_backend(config, backend).await
    }

    pub async fn start_with_backend(
        config: &DaemonConfig,
        backend: Arc<dyn WirelessBackend>,
    ) -> Result<Daemon, StartError> {
        let listener = TcpListener::bind(config.listen)
            .await
            .map_err(|source| StartError::Bind {
                addr: config.listen,
                source,
            })?;
        let local_addr = listener.local_addr().map_err(|source| StartError::Bind {
            addr: config.listen,
            source,
        })?;

        let shutdown = CancellationToken::new();
        let hub = Arc::new(Hub::default());
        let (latest_tx, latest_rx) = watch::channel(NetworkSnapshot::default());

        let (manager, manager_task) = ConnectionManager::spawn(
            Arc::clone(&backend),
            ManagerConfig {
                interface: config.interface.clone(),
                connect_timeout: config.connect_timeout,
            },
            latest_rx,
            Arc::clone(&hub) as Arc<dyn EventSink>,
            shutdown.clone(),
        );

        let mut scan_loop = ScanLoop::new(Arc::clone(&backend), config.interface.clone(), config.scan);
        if !backend.scans_while_connecting() {
            scan_loop = scan_loop.pause_when(manager.busy());
        }
        let nudge = scan_loop.nudge_handle();
        let publisher = Publisher {
            hub: Arc::clone(&hub),
            latest: latest_tx,
        };
        let scan_task = tokio::spawn(scan_loop.run(publisher, shutdown.clone()));

        let gateway = Arc::new(Gateway::new(Arc::clone(&hub), manager.clone(), nudge));
        let app = router(gateway, config.ui_dir.clone());
        let stop = shutdown.clone();
        let server = tokio::spawn(async move {
            let result = axum::serve(listener, app)
                .with_graceful_shutdown(stop.cancelled_owned())
                .await;
            if let Err(e) = result {
                error!(target: "daemon", error = %e, "http server failed");
            }
        });

        info!(
            target: "daemon",
            listen = %local_addr,
            backend = %config.backend,
            interface = %config.interface,
            "serving"
        );
        Ok(Daemon {
            local_addr,
            hub,
            manager,
            shutdown,
            server,
            workers: vec![manager_task, scan_task],
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    pub fn manager(&self) -> &ConnectionManager {
        &self.manager
    }

    /// Stops accepting sessions, closes live ones, and waits up to
    /// [`SHUTDOWN_DEADLINE`] for everything to wind down. Returns false if the
    /// deadline passed.
    pub async fn shutdown(self) -> bool {
        info!(target: "daemon", "shutting down");
        self.hub.shutdown();
        self.shutdown.cancel();
        let mut tasks = self.workers;
        tasks.push(self.server);
        let all = futures::future::join_all(tasks);
        match tokio::time::timeout(SHUTDOWN_DEADLINE, all).await {
            Ok(_) => true,
            Err(_) => {
                warn!(target: "daemon", "shutdown deadline passed with tasks still running");
                false
            }
        }
    }
}

async fn termination_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = term.recv() => {}
                    _ = tokio::signal::ctrl_c() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

/// Runs until SIGTERM or SIGINT.
pub async fn run(config: DaemonConfig) -> ExitCode {
    let daemon = match Daemon::start(&config).await {
        Ok(d) => d,
        Err(e) => {
            eprintln!("awci: {e}");
            return ExitCode::from(1);
        }
    };
    termination_signal().await;
    daemon.shutdown().await;
    ExitCode::SUCCESS
}
