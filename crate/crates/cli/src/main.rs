use clap::Parser;

use dicke_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dicke_cli::run(&cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
