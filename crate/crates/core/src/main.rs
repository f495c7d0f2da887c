use std::process::ExitCode;

fn main() -> ExitCode {
    mvrank::cli::main_entry()
}
