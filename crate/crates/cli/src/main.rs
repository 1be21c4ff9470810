use clap::Parser;

fn main() {
    let args = dce_cli::Args::parse();
    if let Err(e) = dce_cli::run(&args) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
