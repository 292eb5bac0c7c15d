use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mrta_planner::cli::run(std::env::args_os()))
}
