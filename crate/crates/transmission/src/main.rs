use clap::Parser;

fn main() {
    let cli = transmission::cli::Cli::parse();
    std::process::exit(transmission::cli::main_with(cli));
}
