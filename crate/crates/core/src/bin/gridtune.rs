use clap::Parser;

fn main() {
    std::process::exit(gridtune::cli::dispatch(gridtune::cli::Cli::parse()));
}
