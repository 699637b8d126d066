use std::process::ExitCode;

fn main() -> ExitCode {
    randeq::cli::main_entry()
}
