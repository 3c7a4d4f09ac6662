use clap::Parser;

fn main() {
    let cli = gi_cli::Cli::parse();
    std::process::exit(gi_cli::execute(cli));
}
