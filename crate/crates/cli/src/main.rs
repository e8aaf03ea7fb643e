use clap::Parser;

fn main() {
    std::process::exit(backscatter_cli::main_with(backscatter_cli::Cli::parse()));
}
