use std::process::ExitCode;

fn main() -> ExitCode {
    evnerf::cli::main_with_args(std::env::args_os())
}
