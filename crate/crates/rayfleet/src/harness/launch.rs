//! Running a rank program on N ranks: threads over the in-process transport,
//! or child processes over TCP.

use std::ffi::OsString;
use std::net::{SocketAddr, TcpListener};
use std::path::PathBuf;
use std::process::Command;
use std::str::FromStr;

use rayfleet_core::wavefront::FrameMetrics;

use super::image::Image;
use super::scene::SceneFile;
use super::world::{build_rank, BuildError, FrameSetup};
use crate::api::{ApiError, Device, WaitMode, DEVICE};
use crate::comm::{inproc_group, CommError, Endpoint, TcpConfig, TcpTransport, ENV_NRANKS, ENV_RANK, ENV_ROOT_ADDR};
use crate::device::DeviceKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransportKind {
    Inproc,
    Tcp,
}

impl FromStr for TransportKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "inproc" => Ok(TransportKind::Inproc),
            "tcp" => Ok(TransportKind::Tcp),
            _ => Err(format!("unknown transport `{s}` (inproc|tcp)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Api(#[from] ApiError),
    #[error("{0}")]
    Comm(CommError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("script line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Other(String),
}

impl From<CommError> for HarnessError {
    fn from(e: CommError) -> Self {
        HarnessError::Comm(e)
    }
}

#[derive(Clone, Debug)]
pub struct RenderJob {
    pub device: DeviceKind,
    pub scene: SceneFile,
    pub base_dir: PathBuf,
    pub setup: FrameSetup,
}

#[derive(Clone, Debug)]
pub struct RenderOutput {
    pub image: Image,
    pub metrics: Option<FrameMetrics>,
}

/// One rank's whole life: create the device, build the local world, render
/// one frame collaboratively, release the device. Rank 0 returns the image.
pub fn render_rank(endpoint: Box<dyn Endpoint>, job: &RenderJob) -> Result<Option<RenderOutput>, HarnessError> {
    let mut dev = Device::new(endpoint, job.device);
    let result = (|| {
        let objs = build_rank(&mut dev, &job.scene, &job.base_dir, &job.setup)?;
        dev.render_frame(objs.frame)?;
        dev.frame_ready(objs.frame, WaitMode::Wait)?;
        Ok::<_, HarnessError>(dev.frame_buffer(objs.frame).map(|fb| RenderOutput {
            image: Image::from_frame(fb),
            metrics: dev.frame_metrics(objs.frame).cloned(),
        }))
    })();
    match result {
        Ok(out) => {
            dev.release(DEVICE)?;
            Ok(out)
        }
        // dropping the device hangs up on the peers, which unblocks them
        Err(e) => Err(e),
    }
}

/// Runs `program` on `n` threads, one rank each, and returns the results in
/// rank order.
pub fn run_inproc<T, F>(n: usize, program: F) -> Vec<Result<T, HarnessError>>
where
    T: Send,
    F: Fn(Box<dyn Endpoint>) -> Result<T, HarnessError> + Sync,
{
    let group = inproc_group(n);
    std::thread::scope(|s| {
        let handles: Vec<_> = group
            .into_iter()
            .map(|ep| {
                let program = &program;
                s.spawn(move || program(Box::new(ep)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(HarnessError::Other("rank panicked".into()))))
            .collect()
    })
}

/// The first error by rank, or rank 0's output.
pub fn first_error<T>(results: Vec<Result<Option<T>, HarnessError>>) -> Result<T, HarnessError> {
    let mut root = None;
    for (rank, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) if rank == 0 => root = v,
            Ok(_) => {}
            Err(e) => return Err(e),
        }
    }
    root.ok_or_else(|| HarnessError::Other("rank 0 produced no output".into()))
}

pub fn render_inproc(n: usize, job: &RenderJob) -> Result<RenderOutput, HarnessError> {
    first_error(run_inproc(n, |ep| render_rank(ep, job)))
}

/// When this process was spawned as a TCP rank, connects it to its peers.
pub fn child_endpoint() -> Option<Result<Box<dyn Endpoint>, CommError>> {
    std::env::var_os(ENV_RANK)?;
    Some(TcpConfig::from_env().and_then(|cfg| TcpTransport::connect(&cfg)).map(|g| Box::new(g) as Box<dyn Endpoint>))
}

fn free_local_addr() -> std::io::Result<SocketAddr> {
    // the port may in principle be taken again before rank 0 binds it
    TcpListener::bind("127.0.0.1:0")?.local_addr()
}

/// Re-executes the current binary `n` times with `args` and the rank
/// environment, and waits for every child. Returns the worst exit code.
pub fn spawn_tcp_ranks(n: usize, args: &[OsString]) -> Result<i32, HarnessError> {
    let exe = std::env::current_exe()?;
    let addr = free_local_addr()?;
    let mut children = Vec::with_capacity(n);
    for rank in 0..n {
        let child = Command::new(&exe)
            .args(args)
            .env(ENV_RANK, rank.to_string())
            .env(ENV_NRANKS, n.to_string())
            .env(ENV_ROOT_ADDR, addr.to_string())
            .spawn();
        match child {
            Ok(c) => children.push(c),
            Err(e) => {
                for mut c in children {
                    let _ = c.kill();
                    let _ = c.wait();
                }
                return Err(e.into());
            }
        }
    }
    let mut worst = 0;
    for mut c in children {
        let code = c.wait()?.code().unwrap_or(2);
        worst = worst.max(code);
    }
    Ok(worst)
}
