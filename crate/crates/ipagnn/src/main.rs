use std::process::ExitCode;

fn main() -> ExitCode {
    ipagnn::cli::main_with_args(std::env::args_os())
}
