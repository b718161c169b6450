//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary so the lines always show; exits nonzero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::thread;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayfleet::api::{ApiError, Device, ParamValue, WaitMode, DEVICE};
use rayfleet::comm::{inproc_group, Endpoint};
use rayfleet::device::DeviceKind;
use rayfleet::harness::diff::compare;
use rayfleet::harness::image::{decode_image, encode_pfm, encode_ppm, Image};
use rayfleet::harness::launch::{render_inproc, RenderJob, RenderOutput};
use rayfleet::harness::scene::{base_dir, load};
use rayfleet::harness::world::{build_rank, FrameSetup};
use rayfleet::kernels::bvh::Bvh;
use rayfleet::kernels::composite::{composite_and_gather, composite_pixel, CompositeContext, Fragment, MISS_DEPTH};
use rayfleet::kernels::geometry::{Primitive, Ray, Shape, Sphere, Triangle};
use rayfleet::kernels::render::RenderMode;
use rayfleet::kernels::wavefront::EpochKind;
use rayfleet::kernels::Vec3;

type Outcome = Result<String, String>;

fn scene_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(format!("{name}.json"))
}

fn job(name: &str, device: DeviceKind, mode: RenderMode, spp: u32) -> RenderJob {
    let path = scene_path(name);
    let scene = load(&path).expect("bundled scene loads");
    let mut setup = FrameSetup::from_scene(&scene, mode);
    setup.spp = spp;
    RenderJob { device, scene, base_dir: base_dir(&path), setup }
}

fn render(job: &RenderJob, ranks: usize) -> Result<RenderOutput, String> {
    render_inproc(ranks, job).map_err(|e| format!("render at N={ranks} failed: {e}"))
}

fn pfm(job: &RenderJob, ranks: usize) -> Result<Vec<u8>, String> {
    Ok(encode_pfm(&render(job, ranks)?.image))
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// The boxes scene as pinned by the partition criterion.
fn boxes_pathtraced() -> RenderJob {
    let mut j = job("boxes-4x4x4", DeviceKind::Wavefront, RenderMode::PathTracer, 16);
    j.setup.bounces = 5;
    j.setup.seed = 7;
    j.setup.size = [256, 256];
    j
}

/// Composite pass-through with a single centred sample per pixel, where
/// compositing per-rank pixels equals rendering the union.
fn boxes_composited() -> RenderJob {
    job("boxes-4x4x4", DeviceKind::Composite, RenderMode::Raycast, 1)
}

fn c1_partition_invariance() -> Outcome {
    let start = Instant::now();
    let j = boxes_pathtraced();
    let reference = pfm(&j, 1)?;
    for n in [2, 4, 8] {
        let other = pfm(&j, n)?;
        let mae = compare(&decode_image(&reference).unwrap(), &decode_image(&other).unwrap(), 0.0).unwrap().mae;
        check(other == reference, format!("N={n} differs from N=1 (MAE {mae:e})"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs <= 120.0, format!("took {secs:.1} s"))?;
    Ok(format!("N=1,2,4,8 PFMs bit-identical in {secs:.1} s"))
}

fn c2_composite_opaque() -> Outcome {
    let j = boxes_composited();
    let union = pfm(&j, 1)?;
    for n in [2, 4] {
        check(pfm(&j, n)? == union, format!("composite at N={n} differs from the N=1 union render"))?;
    }
    Ok("composite N=2,4 equal the N=1 union render bit-for-bit".into())
}

fn eight_bit(img: &Image) -> Image {
    decode_image(&encode_ppm(img)).unwrap()
}

fn c3_shadow_gap() -> Outcome {
    let wave = job("boxes-4x4x4", DeviceKind::Wavefront, RenderMode::PathTracer, 16);
    let comp = job("boxes-4x4x4", DeviceKind::Composite, RenderMode::PathTracer, 16);
    check(wave.scene.lights.directional.is_some(), "scene has no directional light")?;
    let threshold = 4.0 / 255.0;
    let gap4 = compare(&eight_bit(&render(&comp, 4)?.image), &eight_bit(&render(&wave, 4)?.image), threshold).unwrap();
    let gap1 = compare(&eight_bit(&render(&comp, 1)?.image), &eight_bit(&render(&wave, 1)?.image), threshold).unwrap();
    check(gap4.over_fraction() > 0.01, format!("only {:.2}% of pixels differ at N=4", 100.0 * gap4.over_fraction()))?;
    check(gap1.mae == 0.0, format!("N=1 gap is not zero (MAE {:e})", gap1.mae))?;
    Ok(format!(
        "N=4: {:.1}% of pixels differ by >4/255; N=1: MAE 0",
        100.0 * gap4.over_fraction()
    ))
}

/// Sort by depth (rank breaks ties), blend front to back; a miss fragment
/// ends the list as the backdrop, otherwise the background does.
fn oracle(frags: &[(usize, Fragment)], background: [f32; 4]) -> [f64; 4] {
    let mut sorted: Vec<_> = frags.to_vec();
    sorted.sort_by(|a, b| a.1.z.partial_cmp(&b.1.z).unwrap().then(a.0.cmp(&b.0)));
    let mut acc = [0.0f64; 4];
    let mut over = |c: [f32; 4]| {
        let w = (1.0 - acc[3]) * c[3] as f64;
        for k in 0..3 {
            acc[k] += w * c[k] as f64;
        }
        acc[3] += w;
    };
    let mut backdrop = background;
    for (_, f) in &sorted {
        if f.z == MISS_DEPTH {
            backdrop = f.rgba;
            break;
        }
        over(f.rgba);
    }
    over(backdrop);
    acc
}

fn c4_over_operator() -> Outcome {
    let a = Fragment { rgba: [1.0, 0.0, 0.0, 0.5], z: 1.0 };
    let b = Fragment { rgba: [0.0, 0.0, 1.0, 0.5], z: 2.0 };
    let pre = composite_pixel(&[a, b], [0.0; 4]);
    check(pre == [0.5, 0.0, 0.25, 0.75], format!("worked example gave {pre:?}"))?;
    check(composite_pixel(&[b, a], [0.0; 4]) == pre, "worked example depends on input order")?;
    let opaque = composite_pixel(&[a, b], [0.0, 0.0, 0.0, 1.0]);
    check(opaque == [0.5, 0.0, 0.25, 1.0], format!("worked example over black gave {opaque:?}"))?;

    let mut rng = StdRng::seed_from_u64(4);
    let mut sets = 0;
    let mut worst = 0.0f64;
    while sets < 10_000 {
        let ranks = rng.gen_range(1..=8usize);
        let pixels = rng.gen_range(1..=300usize).min(10_000 - sets);
        let background = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
        let per_rank: Vec<Vec<Fragment>> = (0..ranks)
            .map(|_| {
                (0..pixels)
                    .map(|_| {
                        if rng.gen_bool(0.2) {
                            Fragment { rgba: background, z: MISS_DEPTH }
                        } else {
                            let z = if rng.gen_bool(0.1) { 1.0 } else { rng.gen_range(0.0..100.0) };
                            Fragment { rgba: [rng.gen(), rng.gen(), rng.gen(), rng.gen()], z }
                        }
                    })
                    .collect()
            })
            .collect();
        let ctx = CompositeContext::new(pixels as u32, 1, ranks);
        let group = inproc_group(ranks);
        let fb = thread::scope(|s| {
            let hs: Vec<_> = group
                .into_iter()
                .zip(&per_rank)
                .map(|(mut g, frags)| s.spawn(move || composite_and_gather(&mut g, &ctx, frags, background, 0).unwrap()))
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).next().unwrap().unwrap()
        });
        for p in 0..pixels {
            let frags: Vec<_> = (0..ranks).map(|r| (r, per_rank[r][p])).collect();
            let want = oracle(&frags, background);
            for k in 0..4 {
                worst = worst.max((fb.color[p][k] as f64 - want[k]).abs());
            }
        }
        sets += pixels;
    }
    check(worst <= 1e-6, format!("max deviation {worst:e} over {sets} sets"))?;
    Ok(format!("worked example exact; {sets} random sets within {worst:.1e}"))
}

fn c5_volume_bricks() -> Outcome {
    let j = job("checker-volume", DeviceKind::Wavefront, RenderMode::Raycast, 1);
    let v = match &j.scene.entities[0].shape {
        rayfleet::harness::scene::Shape::Volume(v) => v.clone(),
        _ => return Err("checker-volume has no volume".into()),
    };
    check(v.bricks.iter().product::<u32>() == 4, "checker-volume is not split into 4 bricks")?;
    check(v.step.is_some(), "checker-volume does not fix its step")?;
    check(pfm(&j, 4)? == pfm(&j, 1)?, "4 ranks with one brick each differ from 1 rank holding all bricks")?;
    Ok("4 bricks on 4 ranks equal 1 rank bit-for-bit".into())
}

/// Builds the sphere field at a small size on each rank of `n`.
fn small_device(n: usize) -> (Vec<Device>, Vec<rayfleet::harness::world::RankObjects>) {
    let mut j = job("sphere-field", DeviceKind::Wavefront, RenderMode::Raycast, 1);
    j.setup.size = [16, 12];
    let built: Vec<_> = thread::scope(|s| {
        let hs: Vec<_> = inproc_group(n)
            .into_iter()
            .map(|g| {
                let j = &j;
                s.spawn(move || {
                    let mut dev = Device::new(Box::new(g) as Box<dyn Endpoint>, j.device);
                    let o = build_rank(&mut dev, &j.scene, &j.base_dir, &j.setup).unwrap();
                    (dev, o)
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    built.into_iter().unzip()
}

fn on_devices<R: Send>(devs: &mut [Device], f: impl Fn(&mut Device) -> R + Sync) -> Vec<R> {
    thread::scope(|s| {
        let hs: Vec<_> = devs.iter_mut().map(|d| s.spawn(|| f(d))).collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

fn c6_collaborative() -> Outcome {
    let n = 4;
    // (a) one rank disagrees on fovy
    let (mut devs, objs) = small_device(n);
    let cams: Vec<_> = objs.iter().map(|o| o.camera).collect();
    let frames: Vec<_> = objs.iter().map(|o| o.frame).collect();
    let results = on_devices(&mut devs, |d| {
        let r = d.rank();
        if r == 2 {
            d.set_parameter(cams[r], "fovy", ParamValue::Float(33.0)).unwrap();
            d.commit_parameters(cams[r]).unwrap();
        }
        d.render_frame(frames[r])
    });
    let all_consistency = results.iter().all(|r| matches!(r, Err(ApiError::ConsistencyError { .. })));
    check(all_consistency, format!("fovy mismatch gave {results:?}"))?;
    on_devices(&mut devs, |d| d.release(DEVICE).unwrap());

    // (b) renderFrame is a barrier, under random delays
    let (mut devs, objs) = small_device(n);
    let frames: Vec<_> = objs.iter().map(|o| o.frame).collect();
    let times = on_devices(&mut devs, |d| {
        let r = d.rank();
        let mut rng = StdRng::seed_from_u64(600 + r as u64);
        (0..100)
            .map(|_| {
                thread::sleep(Duration::from_millis(rng.gen_range(0..=200)));
                let entry = Instant::now();
                d.render_frame(frames[r]).unwrap();
                let exit = Instant::now();
                d.frame_ready(frames[r], WaitMode::Wait).unwrap();
                (entry, exit)
            })
            .collect::<Vec<_>>()
    });
    for i in 0..100 {
        let max_entry = times.iter().map(|t| t[i].0).max().unwrap();
        let min_exit = times.iter().map(|t| t[i].1).min().unwrap();
        check(max_entry <= min_exit, format!("call {i}: a rank left renderFrame before the last one entered"))?;
    }

    // (c) mapFrame away from rank 0
    let views = on_devices(&mut devs, |d| {
        let v = d.map_frame(frames[d.rank()], "color").unwrap();
        (v.width, v.height, v.defined)
    });
    check(views[0] == (16, 12, true), format!("rank 0 mapped {:?}", views[0]))?;
    check(views[1..].iter().all(|&v| v == (0, 0, false)), format!("other ranks mapped {:?}", &views[1..]))?;

    // (d) lock-step release
    let start = Instant::now();
    let released = on_devices(&mut devs, |d| d.release(DEVICE).map(|_| start.elapsed()));
    let slowest = released.iter().map(|r| r.clone().map_err(|e| e.to_string())).collect::<Result<Vec<_>, _>>()?;
    let slowest = slowest.into_iter().max().unwrap();
    check(slowest < Duration::from_secs(5), format!("release took {slowest:?}"))?;
    Ok(format!("(a) ConsistencyError x{n} (b) 100 barriers held (c) 0x0 flagged (d) released in {slowest:.0?}"))
}

fn c7_metrics() -> Outcome {
    let n = 4u64;
    let j = job("boxes-4x4x4", DeviceKind::Wavefront, RenderMode::PathTracer, 1);
    let m = render(&j, n as usize)?.metrics.ok_or("no metrics at rank 0")?;
    check(m.epoch_count() > 0, "no epochs recorded")?;
    let mut kinds = [0; 3];
    for e in 0..m.epoch_count() {
        let steps: Vec<_> = m.steps.iter().filter(|s| s.epoch == e).collect();
        let active = steps[0].active_rays;
        let sent = m.sent_in_epoch(e);
        check(sent == active * n, format!("epoch {e}: sent {sent} != {active}*{n}"))?;
        kinds[match steps[0].kind {
            EpochKind::Path => 0,
            EpochKind::Volume => 1,
            EpochKind::Shadow => 2,
        }] += 1;
        for s in steps {
            let sent: u64 = s.per_rank.iter().map(|r| r.sent).sum();
            let recv: u64 = s.per_rank.iter().map(|r| r.recv).sum();
            check(sent == recv, format!("epoch {e} step {}: sent {sent} recv {recv}", s.step))?;
        }
    }
    Ok(format!("{} epochs (path {}, volume {}, shadow {}): sent = activeRays*N, sent = recv", m.epoch_count(), kinds[0], kinds[1], kinds[2]))
}

fn c8_bvh_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(88);
    let point = |rng: &mut StdRng, e: f32| Vec3::new(rng.gen_range(-e..e), rng.gen_range(-e..e), rng.gen_range(-e..e));
    let prims: Vec<Primitive> = (0..100)
        .map(|i| {
            let shape = if i % 2 == 0 {
                let c = point(&mut rng, 4.0);
                Shape::Triangle(Triangle { v0: c + point(&mut rng, 1.0), v1: c + point(&mut rng, 1.0), v2: c + point(&mut rng, 1.0) })
            } else {
                Shape::Sphere(Sphere { center: point(&mut rng, 4.0), radius: rng.gen_range(0.05..0.8) })
            };
            Primitive { shape, prim_id: 5000 + i as u64, material: 0 }
        })
        .collect();
    let bvh = Bvh::build(prims.clone());
    let (mut hits, mut mismatches) = (0, 0);
    for _ in 0..10_000 {
        let o = point(&mut rng, 8.0);
        let ray = Ray::new(o, (point(&mut rng, 3.0) - o).normalize());
        let mut best: Option<(f32, u64)> = None;
        for p in &prims {
            if let Some(t) = p.intersect(&ray, ray.t_min, ray.t_max) {
                if best.map_or(true, |b| (t, p.prim_id) < b) {
                    best = Some((t, p.prim_id));
                }
            }
        }
        let got = bvh.closest_hit(&ray, ray.t_min, ray.t_max).map(|h| (h.t.to_bits(), h.prim_id));
        hits += best.is_some() as usize;
        mismatches += (got != best.map(|(t, id)| (t.to_bits(), id))) as usize;
    }
    check(mismatches == 0, format!("{mismatches} mismatches"))?;
    Ok(format!("10000 rays, {hits} hits, 0 mismatches"))
}

fn dprender_tcp(j: &RenderJob, name: &str, extra: &[&str], out: &Path) -> Result<Vec<u8>, String> {
    let device = match j.device {
        DeviceKind::Composite => "composite",
        DeviceKind::Wavefront => "wavefront",
    };
    let renderer = match j.setup.mode {
        RenderMode::Raycast => "raycast",
        RenderMode::PathTracer => "pathtracer",
    };
    let status = Command::new(env!("CARGO_BIN_EXE_dprender"))
        .args(["--scene", scene_path(name).to_str().unwrap(), "--device", device, "--renderer", renderer])
        .args(["--ranks", "4", "--transport", "tcp", "--spp", &j.setup.spp.to_string()])
        .args(extra)
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| format!("cannot run dprender: {e}"))?;
    check(status.success(), format!("dprender exited with {status}"))?;
    std::fs::read(out).map_err(|e| e.to_string())
}

fn c9_transport() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = boxes_pathtraced();
    let tcp1 = dprender_tcp(&p, "boxes-4x4x4", &["--bounces", "5", "--seed", "7", "--size", "256x256"], &dir.path().join("c1.pfm"))?;
    check(tcp1 == pfm(&p, 4)?, "criterion 1 over tcp differs from inproc")?;
    let c = boxes_composited();
    let tcp2 = dprender_tcp(&c, "boxes-4x4x4", &[], &dir.path().join("c2.pfm"))?;
    check(tcp2 == pfm(&c, 4)?, "criterion 2 over tcp differs from inproc")?;
    Ok("criteria 1 and 2 at N=4 over tcp are bit-identical to inproc".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("partition invariance", c1_partition_invariance),
        ("compositing correctness (opaque)", c2_composite_opaque),
        ("global-shadow gap", c3_shadow_gap),
        ("over-operator oracle", c4_over_operator),
        ("volume brick equivalence", c5_volume_bricks),
        ("collaborative semantics", c6_collaborative),
        ("metrics identity", c7_metrics),
        ("BVH oracle", c8_bvh_oracle),
        ("transport equivalence", c9_transport),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
