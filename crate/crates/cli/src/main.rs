use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(renewal_gauss::run(std::env::args_os()))
}
