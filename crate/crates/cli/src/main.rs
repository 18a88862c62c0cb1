use clap::Parser;

use sepguard_cli::{configure_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    configure_threads();
    let (code, text) = run(&cli);
    if !text.is_empty() {
        if code == sepguard_cli::EXIT_ERROR {
            eprint!("{text}");
        } else {
            print!("{text}");
        }
    }
    std::process::exit(code as i32);
}
