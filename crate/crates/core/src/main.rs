use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(pann::cli::run_args(std::env::args_os()))
}
