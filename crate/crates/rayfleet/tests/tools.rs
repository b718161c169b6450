use std::path::{Path, PathBuf};
use std::process::Command;

use rayfleet::harness::image::{decode_image, encode_pfm, encode_srgb8, read_image, write_image, Image};
use rayfleet::harness::scene::{generate_box_grid, load, BoxGridSpec};

fn scenes() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes")
}

fn image(w: u32, h: u32, f: impl Fn(usize) -> [f32; 3]) -> Image {
    Image { width: w, height: h, rgb: (0..(w * h) as usize).map(f).collect() }
}

fn dpdiff(args: &[&Path], extra: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dpdiff")).args(args).args(extra).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn report_value(report: &str, key: &str) -> f64 {
    let line = report.lines().find(|l| l.starts_with(key)).unwrap();
    line.split_whitespace().nth(1).unwrap().parse().unwrap()
}

#[test]
fn srgb_encode_points() {
    assert_eq!(encode_srgb8(1.0), 255);
    assert_eq!(encode_srgb8(7.0), 255);
    assert_eq!(encode_srgb8(0.0), 0);
    assert_eq!(encode_srgb8(0.5), 186);
}

#[test]
fn pfm_round_trip_is_bit_exact() {
    let img = image(7, 3, |i| [i as f32 * 0.1, -1e-30, f32::MAX / (i as f32 + 1.0)]);
    let back = decode_image(&encode_pfm(&img)).unwrap();
    let bits = |im: &Image| im.rgb.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&img));
}

#[test]
fn dpdiff_metrics_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ppm");
    let b = dir.path().join("b.ppm");
    let c = dir.path().join("c.ppm");
    let base = image(64, 64, |i| [0.0, (i % 7) as f32 / 7.0, 1.0]);
    write_image(&a, &base).unwrap();
    // change one channel of one pixel by one 8-bit step
    let mut bytes = std::fs::read(&a).unwrap();
    let header = b"P6\n64 64\n255\n".len();
    bytes[header + 3 * 100] = 1;
    std::fs::write(&b, bytes).unwrap();
    write_image(&c, &image(32, 64, |_| [0.0; 3])).unwrap();

    let (code, report) = dpdiff(&[&a, &a], &["--report"]);
    assert_eq!(code, 0);
    assert_eq!(report_value(&report, "mae"), 0.0);

    let (code, report) = dpdiff(&[&a, &b], &["--report", "--out", dir.path().join("d.ppm").to_str().unwrap()]);
    assert_eq!(code, 1);
    let expected = 1.0 / (255.0 * 4096.0 * 3.0);
    assert!((report_value(&report, "mae") / expected - 1.0).abs() < 1e-6);
    assert!(report.contains("over_threshold 0 of 4096"), "{report}");
    assert!(read_image(&dir.path().join("d.ppm")).is_ok());

    let (code, _) = dpdiff(&[&a, &b], &["--tolerance", "1e-6"]);
    assert_eq!(code, 0);
    let (code, _) = dpdiff(&[&a, &c], &[]);
    assert_eq!(code, 2);
}

#[test]
fn box_grid_assignment() {
    let scene = load(&scenes().join("boxes-4x4x4.json")).unwrap();
    let spec: BoxGridSpec = scene
        .entities
        .iter()
        .find_map(|e| match &e.shape {
            rayfleet::harness::scene::Shape::BoxGrid(g) => Some(*g),
            _ => None,
        })
        .unwrap();
    let four = generate_box_grid(&spec, 4);
    assert_eq!(four.iter().map(Vec::len).sum::<usize>(), 64);
    assert!(four.iter().all(|r| !r.is_empty()));
    assert_eq!(generate_box_grid(&spec, 4), four);
    assert_eq!(generate_box_grid(&spec, 1), vec![(0..64).collect::<Vec<u32>>()]);
}

#[test]
fn bundled_scenes_load() {
    for name in ["boxes-4x4x4", "sphere-field", "checker-volume", "cornell-lite"] {
        load(&scenes().join(format!("{name}.json"))).unwrap();
    }
}

fn dpdrive(dir: &Path, script: &str, ranks: &str, device: &str) -> std::process::Output {
    let path = dir.join("script.txt");
    std::fs::write(&path, script).unwrap();
    Command::new(env!("CARGO_BIN_EXE_dpdrive"))
        .current_dir(dir)
        .args(["--scene", scenes().join("boxes-4x4x4.json").to_str().unwrap()])
        .args(["--ranks", ranks, "--device", device, "--renderer", "raycast", "--size", "32x24", "--spp", "1"])
        .args(["--script", path.to_str().unwrap()])
        .output()
        .unwrap()
}

#[test]
fn dpdrive_renders_each_request() {
    let dir = tempfile::tempdir().unwrap();
    let script = "# two views, then a resize\n\
        CAMERA 9 7.5 11 -0.6 -0.35 -0.7 0 1 0 45\nRENDER one.pfm\n\
        CAMERA 0 3 12 0 -0.1 -1 0 1 0 30\nRENDER two.pfm\n\
        RESIZE 40 20\nRENDER three.ppm\nQUIT\n";
    let out = dpdrive(dir.path(), script, "3", "composite");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let one = read_image(&dir.path().join("one.pfm")).unwrap();
    let two = read_image(&dir.path().join("two.pfm")).unwrap();
    let three = read_image(&dir.path().join("three.ppm")).unwrap();
    assert_eq!((one.width, one.height), (32, 24));
    assert_ne!(one, two);
    assert_eq!((three.width, three.height), (40, 20));
}

#[test]
fn dpdrive_reports_the_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpdrive(dir.path(), "RENDER a.pfm\nZOOM 2\nRENDER b.pfm\n", "2", "wavefront");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert!(dir.path().join("a.pfm").exists());
    assert!(!dir.path().join("b.pfm").exists());
}

#[test]
fn dprender_tcp_matches_inproc() {
    let dir = tempfile::tempdir().unwrap();
    let run = |transport: &str, out: &str| {
        let st = Command::new(env!("CARGO_BIN_EXE_dprender"))
            .args(["--scene", scenes().join("sphere-field.json").to_str().unwrap()])
            .args(["--ranks", "2", "--transport", transport, "--size", "48x32", "--spp", "1"])
            .args(["--out", dir.path().join(out).to_str().unwrap()])
            .status()
            .unwrap();
        assert!(st.success());
        std::fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(run("inproc", "a.pfm"), run("tcp", "b.pfm"));
}

#[test]
fn dprender_fails_cleanly_on_a_bad_scene() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema":"rayfleet-scene/0","camera":{"position":[0,0,0],"direction":[0,0,-1]},"entities":[]}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dprender"))
        .args(["--scene", bad.to_str().unwrap(), "--out", dir.path().join("x.ppm").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}
