use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(compcomp::cli::run(std::env::args_os()))
}
