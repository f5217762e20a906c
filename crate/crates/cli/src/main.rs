use clap::Parser;

fn main() {
    let cli = simshap_cli::Cli::parse();
    if let Err(err) = simshap_cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
