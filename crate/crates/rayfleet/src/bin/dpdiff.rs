//! Compares two images: MAE, RMSE, max difference and the count of pixels
//! over a threshold. Exits 1 when MAE exceeds the tolerance.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rayfleet::harness::cli::{EXIT_DIFF, EXIT_ERROR, EXIT_OK};
use rayfleet::harness::diff::{amplified_difference, compare};
use rayfleet::harness::image::{read_image, write_image};

#[derive(Parser, Debug)]
#[command(name = "dpdiff", about = "Per-pixel difference of two PPM/PFM images")]
struct Cli {
    a: PathBuf,
    b: PathBuf,
    /// amplified difference image
    #[arg(long)]
    out: Option<PathBuf>,
    /// print the metrics
    #[arg(long)]
    report: bool,
    /// largest MAE that still exits 0
    #[arg(long, default_value_t = 0.0)]
    tolerance: f64,
    /// per-channel difference counted as "over"
    #[arg(long, default_value_t = 1.0 / 255.0)]
    threshold: f64,
    /// gain applied to the difference image
    #[arg(long, default_value_t = 10.0)]
    gain: f32,
}

fn run(cli: &Cli) -> Result<i32, String> {
    let a = read_image(&cli.a).map_err(|e| format!("{}: {e}", cli.a.display()))?;
    let b = read_image(&cli.b).map_err(|e| format!("{}: {e}", cli.b.display()))?;
    let r = compare(&a, &b, cli.threshold).map_err(|e| e.to_string())?;
    if cli.report {
        println!("mae {:e}", r.mae);
        println!("rmse {:e}", r.rmse);
        println!("max_abs {:e}", r.max_abs);
        println!("over_threshold {} of {} ({:.4}%)", r.over_threshold, r.pixels, 100.0 * r.over_fraction());
    }
    if let Some(out) = &cli.out {
        write_image(out, &amplified_difference(&a, &b, cli.gain)).map_err(|e| format!("{}: {e}", out.display()))?;
    }
    Ok(if r.mae <= cli.tolerance { EXIT_OK } else { EXIT_DIFF })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("dpdiff: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
