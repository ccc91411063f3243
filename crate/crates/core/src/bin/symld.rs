use std::process::ExitCode;

fn main() -> ExitCode {
    symld::cli::main_with_args(std::env::args_os())
}
