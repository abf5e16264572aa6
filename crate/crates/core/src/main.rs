use clap::Parser;

fn main() {
    std::process::exit(cavmem::cli::main_with(cavmem::cli::Args::parse()));
}
