use std::process::ExitCode;

fn main() -> ExitCode {
    nestegg::cli::run(std::env::args_os())
}
