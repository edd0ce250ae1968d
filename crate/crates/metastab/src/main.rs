use clap::Parser;

fn main() {
    std::process::exit(metastab::cli::run(metastab::cli::Cli::parse()));
}
