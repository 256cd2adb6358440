use clap::Parser;

use admixfit::cli::{exit_code, run, Cli};

fn main() {
    env_logger::init();
    if let Ok(t) = std::env::var("ADMIXFIT_THREADS") {
        match t.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: ADMIXFIT_THREADS must be a positive integer, got '{}'", t);
                std::process::exit(2);
            }
        }
    }
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    if let Err(e) = run(cli, &argv) {
        eprintln!("error: {}", e);
        std::process::exit(exit_code(&e));
    }
}
