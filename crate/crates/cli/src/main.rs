mod commands;
mod error;
mod output;

use clap::Parser;

fn main() {
    let cli = commands::Cli::parse();
    let level = if cli.global.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = commands::dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
