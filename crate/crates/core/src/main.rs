use std::collections::HashMap;
use std::process::ExitCode;

use awci::config::{parse_config, ParseOutcome};

fn main() -> ExitCode {
    let env: HashMap<String, String> = std::env::vars().collect();
    let config = match parse_config(std::env::args_os(), &env) {
        Ok(ParseOutcome::Run(config)) => *config,
        Ok(ParseOutcome::Exit(text)) => {
            print!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            if !e.0.ends_with('\n') {
                eprintln!();
            }
            return ExitCode::from(2);
        }
    };
    awci::logging::init(config.log_filter.as_deref());

    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("awci: cannot start runtime: {e}");
            return ExitCode::from(1);
        }
    };
    runtime.block_on(awci::daemon::run(config))
}
