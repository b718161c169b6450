//! PPM (8-bit, gamma-encoded) and PFM (float, linear) images.
//!
//! In memory, rows run bottom to top like the frame buffer. PFM stores rows
//! that way too; PPM stores them top to bottom.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rayfleet_core::render::FrameBuffer;

/// Linear RGB image, rows bottom to top.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<[f32; 3]>,
}

impl Image {
    pub fn from_frame(fb: &FrameBuffer) -> Image {
        Image { width: fb.width, height: fb.height, rgb: fb.color.iter().map(|c| [c[0], c[1], c[2]]).collect() }
    }
}

/// Clamp to `[0, 1]`, encode with gamma 1/2.2, round to 8 bits.
pub fn encode_srgb8(v: f32) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (255.0 * (v as f64).powf(1.0 / 2.2)).round() as u8
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    let w = img.width as usize;
    for row in (0..img.height as usize).rev() {
        for px in &img.rgb[row * w..(row + 1) * w] {
            out.extend(px.iter().map(|&c| encode_srgb8(c)));
        }
    }
    out
}

pub fn encode_pfm(img: &Image) -> Vec<u8> {
    // negative scale marks little-endian samples
    let mut out = format!("PF\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    for px in &img.rgb {
        for c in px {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

/// Writes PFM for a `.pfm` path and PPM otherwise.
pub fn write_image(path: &Path, img: &Image) -> io::Result<()> {
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("pfm") => encode_pfm(img),
        _ => encode_ppm(img),
    };
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)
}

/// Whitespace-separated header tokens, skipping `#` comments; returns the
/// tokens and the offset just past the single whitespace byte that ends the
/// last one.
fn header(bytes: &[u8], count: usize) -> io::Result<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(invalid("truncated image header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if i >= bytes.len() {
        return Err(invalid("image has no pixel data"));
    }
    Ok((tokens, i + 1))
}

fn dims(tokens: &[String]) -> io::Result<(u32, u32)> {
    let parse = |s: &String| s.parse::<u32>().map_err(|_| invalid(format!("bad image dimension {s:?}")));
    Ok((parse(&tokens[1])?, parse(&tokens[2])?))
}

pub fn decode_image(bytes: &[u8]) -> io::Result<Image> {
    let (tokens, at) = header(bytes, 4)?;
    let (width, height) = dims(&tokens)?;
    let n = width as usize * height as usize;
    let data = &bytes[at..];
    match tokens[0].as_str() {
        "P6" => {
            if tokens[3] != "255" {
                return Err(invalid("only 8-bit PPM is supported"));
            }
            if data.len() != n * 3 {
                return Err(invalid(format!("PPM has {} data bytes, expected {}", data.len(), n * 3)));
            }
            let w = width as usize;
            let mut rgb = vec![[0.0; 3]; n];
            for (file_row, chunk) in data.chunks_exact(w * 3).enumerate() {
                let row = height as usize - 1 - file_row;
                for (x, px) in chunk.chunks_exact(3).enumerate() {
                    rgb[row * w + x] = [px[0] as f32 / 255.0, px[1] as f32 / 255.0, px[2] as f32 / 255.0];
                }
            }
            Ok(Image { width, height, rgb })
        }
        "PF" => {
            let scale: f32 = tokens[3].parse().map_err(|_| invalid("bad PFM scale"))?;
            if data.len() != n * 12 {
                return Err(invalid(format!("PFM has {} data bytes, expected {}", data.len(), n * 12)));
            }
            let word = |c: &[u8]| {
                let b: [u8; 4] = c.try_into().unwrap();
                if scale < 0.0 {
                    f32::from_le_bytes(b)
                } else {
                    f32::from_be_bytes(b)
                }
            };
            let rgb = data.chunks_exact(12).map(|p| [word(&p[0..4]), word(&p[4..8]), word(&p[8..12])]).collect();
            Ok(Image { width, height, rgb })
        }
        other => Err(invalid(format!("unsupported image type {other:?}"))),
    }
}

pub fn read_image(path: &Path) -> io::Result<Image> {
    decode_image(&fs::read(path)?)
}
