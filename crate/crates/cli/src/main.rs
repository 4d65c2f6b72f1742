use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(seqmeas_cli::run(std::env::args_os()))
}
