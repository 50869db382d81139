use clap::Parser;
use shuffledp_cli::commands::{emit, execute, output_of, Cli};

fn main() {
    let cli = Cli::parse();
    let result = execute(&cli.command).and_then(|v| emit(&v, output_of(&cli.command)));
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
