use std::process::ExitCode;

use clap::Parser;

use semilpp_cli::commands::{run, Command};

#[derive(Debug, Parser)]
#[command(name = "semilpp", version, about = "Experiments on semi-discrete last passage percolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok((artifacts, paths)) => {
            let r = &artifacts.report;
            println!("{} seed={} pass={} runtime={:.2}s", r.name, r.seed, r.pass, r.runtime_seconds);
            for (k, v) in &r.statistics {
                println!("  {k} = {v}");
            }
            for p in &paths {
                println!("wrote {}", p.display());
            }
            if r.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
