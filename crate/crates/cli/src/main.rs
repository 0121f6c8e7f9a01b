use clap::Parser;
use kpath_cli::args::Cli;
use kpath_cli::{run, Failure};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(f) = run(cli) {
        match &f {
            Failure::Usage(msg) => eprintln!("error: {msg}"),
            Failure::Data(e) => eprintln!("error: {e:#}"),
        }
        std::process::exit(f.exit_code());
    }
}
