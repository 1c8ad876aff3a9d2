use std::process::ExitCode;

use clap::Parser;

mod cmd;

fn main() -> ExitCode {
    let cli = match cmd::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    cmd::init_logging(cli.log_level);
    if let Err(e) = cmd::init_threads() {
        cmd::report(&e);
        return ExitCode::from(2);
    }
    match cmd::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            cmd::report(&e);
            ExitCode::from(1)
        }
    }
}
