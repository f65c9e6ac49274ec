use clap::Parser;

fn main() {
    let cli = spinsqueeze::cli::Cli::parse();
    std::process::exit(spinsqueeze::cli::main_with(cli));
}
