use clap::Parser;
use rwmlab_harness::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
