use clap::Parser;
use nlror::cli::{execute, Cli};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    execute(Cli::parse())
}
