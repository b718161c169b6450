//! Scripted multi-frame driver; see `rayfleet::harness::drive` for the
//! command language.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rayfleet::harness::cli::{RunArgs, EXIT_ERROR};
use rayfleet::harness::drive::{drive_rank, read_script};
use rayfleet::harness::launch::{child_endpoint, first_error, run_inproc, spawn_tcp_ranks, HarnessError, TransportKind};

#[derive(Parser, Debug)]
#[command(name = "dpdrive", about = "Apply a command script on N collaborating ranks")]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    /// command script, read by rank 0
    #[arg(long)]
    script: PathBuf,
}

fn run(cli: &Cli) -> Result<i32, HarnessError> {
    let job = cli.run.job()?;
    if let Some(ep) = child_endpoint() {
        let ep = ep?;
        let script = if ep.rank() == 0 { Some(read_script(&cli.script)?) } else { None };
        drive_rank(ep, &job, script.as_deref())?;
        return Ok(0);
    }
    match cli.run.transport {
        TransportKind::Inproc => {
            let script = read_script(&cli.script)?;
            let results = run_inproc(cli.run.ranks as usize, |ep| {
                let mine = (ep.rank() == 0).then_some(script.as_str());
                drive_rank(ep, &job, mine).map(Some)
            });
            for path in first_error(results)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
        TransportKind::Tcp => {
            let args: Vec<OsString> = std::env::args_os().skip(1).collect();
            let code = spawn_tcp_ranks(cli.run.ranks as usize, &args)?;
            Ok(if code == 0 { 0 } else { EXIT_ERROR })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("dpdrive: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
