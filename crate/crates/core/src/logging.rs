//! Line-oriented logs on stderr: timestamp, level, component, message.

use tracing_subscriber::filter::Directive;
use tracing_subscriber::EnvFilter;

pub const DEFAULT_FILTER: &str = "info";

/// Targets that dump raw socket payloads at debug or trace. Client frames
/// carry passphrases, so these stay at info whatever the operator asks for.
const PAYLOAD_TARGETS: &[&str] = &["tungstenite", "tokio_tungstenite", "axum::extract::ws"];

/// Builds the daemon's filter from `tracing` directive syntax, for example
/// `debug` or `info,gateway=trace`. Invalid filters fall back to the default.
pub fn filter(directives: Option<&str>) -> EnvFilter {
    let mut filter = directives
        .and_then(|f| EnvFilter::try_new(f).ok())
        .unwrap_or_else(|| EnvFilter::new(DEFAULT_FILTER));
    for target in PAYLOAD_TARGETS {
        let directive: Directive = format!("{target}=info").parse().expect("static directive");
        filter = filter.add_directive(directive);
    }
    filter
}

/// Installs the global subscriber.
pub fn init(directives: Option<&str>) {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter(directives))
        .with_writer(std::io::stderr)
        .with_ansi(false)
        .with_target(true)
        .try_init();
}
