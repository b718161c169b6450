//! Scripted driver. Rank 0 reads the script and broadcasts one command at a
//! time; every rank applies it, so renders stay collaborative.
//!
//! ```text
//! CAMERA px py pz dx dy dz ux uy uz fovy
//! RESIZE w h
//! RENDER out.ppm
//! QUIT
//! ```
//!
//! Blank lines and `#` comments are skipped. End of script means QUIT.

use std::path::{Path, PathBuf};

use rayfleet_core::Vec3;

use super::image::{write_image, Image};
use super::launch::{HarnessError, RenderJob};
use super::world::build_rank;
use crate::api::{Device, ParamValue, WaitMode, DEVICE};
use crate::comm::Endpoint;

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Camera { position: [f32; 3], direction: [f32; 3], up: [f32; 3], fovy: f32 },
    Resize(u32, u32),
    Render(PathBuf),
    Quit,
}

/// Parses one line. `Ok(None)` for blank lines and comments.
pub fn parse_line(line: &str) -> Result<Option<Command>, String> {
    let line = line.split('#').next().unwrap_or("").trim();
    let mut words = line.split_whitespace();
    let Some(op) = words.next() else {
        return Ok(None);
    };
    let rest: Vec<&str> = words.collect();
    let floats = |n: usize| -> Result<Vec<f32>, String> {
        if rest.len() != n {
            return Err(format!("{op} takes {n} arguments, got {}", rest.len()));
        }
        rest.iter().map(|w| w.parse::<f32>().map_err(|_| format!("`{w}` is not a number"))).collect()
    };
    let cmd = match op {
        "CAMERA" => {
            let f = floats(10)?;
            let dir = Vec3::new(f[3], f[4], f[5]);
            let up = Vec3::new(f[6], f[7], f[8]);
            let right = dir.cross(up);
            if dir.is_zero() || right.length() < 1e-6 * dir.length() * up.length() {
                return Err("camera direction is zero or parallel to up".into());
            }
            if !(f[9] > 0.0 && f[9] < 180.0) {
                return Err(format!("fovy {} is outside (0, 180)", f[9]));
            }
            Command::Camera { position: [f[0], f[1], f[2]], direction: [f[3], f[4], f[5]], up: [f[6], f[7], f[8]], fovy: f[9] }
        }
        "RESIZE" => {
            if rest.len() != 2 {
                return Err(format!("RESIZE takes 2 arguments, got {}", rest.len()));
            }
            let dim = |w: &str| match w.parse::<u32>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(format!("`{w}` is not a positive size")),
            };
            Command::Resize(dim(rest[0])?, dim(rest[1])?)
        }
        "RENDER" => match rest.as_slice() {
            [path] => Command::Render(PathBuf::from(path)),
            _ => return Err("RENDER takes one output path".into()),
        },
        "QUIT" if rest.is_empty() => Command::Quit,
        "QUIT" => return Err("QUIT takes no arguments".into()),
        other => return Err(format!("unknown command `{other}`")),
    };
    Ok(Some(cmd))
}

const ABORT: u8 = b'!';
const CMD: u8 = b'>';

/// Rank 0 passes the script text; other ranks pass `None`. Returns the images
/// written, on rank 0.
pub fn drive_rank(endpoint: Box<dyn Endpoint>, job: &RenderJob, script: Option<&str>) -> Result<Vec<PathBuf>, HarnessError> {
    let mut dev = Device::new(endpoint, job.device);
    let objs = build_rank(&mut dev, &job.scene, &job.base_dir, &job.setup)?;
    let mut lines = script.map(|s| s.lines().enumerate());
    let mut size = job.setup.size;
    let mut written = Vec::new();
    loop {
        // rank 0 picks the next command, or the parse error to abort with
        let mut msg = Vec::new();
        if let Some(lines) = &mut lines {
            msg = vec![CMD];
            msg.extend_from_slice(b"QUIT");
            for (no, text) in lines.by_ref() {
                match parse_line(text) {
                    Ok(None) => continue,
                    Ok(Some(_)) => {
                        msg = vec![CMD];
                        msg.extend_from_slice(text.trim().as_bytes());
                    }
                    Err(e) => {
                        msg = vec![ABORT];
                        msg.extend_from_slice(format!("{}\n{e}", no + 1).as_bytes());
                    }
                }
                break;
            }
        }
        let msg = dev.broadcast(0, msg)?;
        let body = String::from_utf8_lossy(msg.get(1..).unwrap_or_default()).into_owned();
        if msg.first() == Some(&ABORT) {
            let (line, e) = body.split_once('\n').unwrap_or(("0", &body));
            dev.release(DEVICE)?;
            return Err(HarnessError::Parse { line: line.parse().unwrap_or(0), msg: e.to_string() });
        }
        let cmd = parse_line(&body)
            .ok()
            .flatten()
            .ok_or_else(|| HarnessError::Other(format!("malformed broadcast command `{body}`")))?;
        match cmd {
            Command::Camera { position, direction, up, fovy } => {
                dev.set_parameter(objs.camera, "position", ParamValue::Float3(position))?;
                let dir = Vec3::from_array(direction).normalize();
                let up = dir.cross(Vec3::from_array(up)).cross(dir).normalize();
                dev.set_parameter(objs.camera, "direction", ParamValue::vec3(dir))?;
                dev.set_parameter(objs.camera, "up", ParamValue::vec3(up))?;
                dev.set_parameter(objs.camera, "fovy", ParamValue::Float(fovy))?;
                dev.commit_parameters(objs.camera)?;
            }
            Command::Resize(w, h) => {
                size = [w, h];
                dev.set_parameter(objs.frame, "size", ParamValue::Int2([w as i64, h as i64]))?;
                dev.commit_parameters(objs.frame)?;
                dev.set_parameter(objs.camera, "aspect", ParamValue::Float(w as f32 / h as f32))?;
                dev.commit_parameters(objs.camera)?;
            }
            Command::Render(out) => {
                dev.render_frame(objs.frame)?;
                dev.frame_ready(objs.frame, WaitMode::Wait)?;
                if let Some(fb) = dev.frame_buffer(objs.frame) {
                    debug_assert_eq!([fb.width, fb.height], size);
                    write_image(&out, &Image::from_frame(fb))?;
                    written.push(out);
                }
            }
            Command::Quit => {
                dev.release(DEVICE)?;
                return Ok(written);
            }
        }
    }
}

/// Reads a script file relative to the working directory.
pub fn read_script(path: &Path) -> Result<String, HarnessError> {
    Ok(std::fs::read_to_string(path)?)
}
