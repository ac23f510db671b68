use clap::Parser;

use episteme::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    let (output, code) = execute(&cli);
    print!("{output}");
    std::process::exit(code);
}
