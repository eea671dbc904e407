use clap::Parser;

use mogen::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
