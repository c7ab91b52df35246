use clap::Parser;
use kapitza_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for line in report {
                println!("{line}");
            }
        }
        Err(e) => {
            eprintln!("kapitza: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
