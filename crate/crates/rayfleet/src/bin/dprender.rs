//! Renders one frame of a scene on N ranks. Rank 0 writes the image.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rayfleet::harness::cli::{RunArgs, EXIT_ERROR};
use rayfleet::harness::image::write_image;
use rayfleet::harness::launch::{child_endpoint, render_inproc, render_rank, spawn_tcp_ranks, HarnessError, RenderOutput, TransportKind};
use rayfleet::harness::metrics;

#[derive(Parser, Debug)]
#[command(name = "dprender", about = "Data-parallel render of a scene file")]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    /// .ppm (8-bit sRGB) or .pfm (float)
    #[arg(long)]
    out: PathBuf,
    /// per-epoch exchange counters as JSON
    #[arg(long)]
    metrics: Option<PathBuf>,
}

fn write_outputs(cli: &Cli, out: &RenderOutput) -> Result<(), HarnessError> {
    write_image(&cli.out, &out.image)?;
    if let Some(path) = &cli.metrics {
        let m = out.metrics.clone().unwrap_or_default();
        std::fs::write(path, metrics::to_json(&m))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<i32, HarnessError> {
    let job = cli.run.job()?;
    if let Some(ep) = child_endpoint() {
        if let Some(out) = render_rank(ep?, &job)? {
            write_outputs(cli, &out)?;
        }
        return Ok(0);
    }
    match cli.run.transport {
        TransportKind::Inproc => {
            let out = render_inproc(cli.run.ranks as usize, &job)?;
            write_outputs(cli, &out)?;
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
            eprintln!("dprender: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
