use std::process::ExitCode;

fn main() -> ExitCode {
    dwlab::main_with_args(std::env::args_os())
}
