use clap::Parser;

use earlyexit_cli::commands::{dispatch, Cli};
use earlyexit_cli::UsageError;

/// Exit codes: 0 success, 1 domain/validation error, 2 usage error
/// (clap handles unknown flags and missing arguments itself, also with 2).
fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = if err.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            };
            std::process::exit(code);
        }
    }
}
