use clap::Parser;
use rigid_witness_cli::{execute, Cli};

fn main() {
    // Usage errors exit with status 2 from inside clap.
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
    if let Err(e) = execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
