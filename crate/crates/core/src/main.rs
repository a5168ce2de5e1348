use clap::Parser;

use discrete_conformal::cli;

fn main() {
    let parsed = cli::Cli::parse();
    std::process::exit(cli::run(&parsed));
}
