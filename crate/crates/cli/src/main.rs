use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use tvdbar_cli::{commands, long_version, Cli};

fn main() -> ExitCode {
    let version: &'static str = Box::leak(long_version().into_boxed_str());
    let matches = Cli::command().long_version(version).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .init();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("tvdbar: cannot configure {} threads: {e}", cli.threads);
            return ExitCode::from(1);
        }
    }
    match commands::dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tvdbar: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
