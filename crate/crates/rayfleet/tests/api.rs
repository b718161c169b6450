use std::thread;
use std::time::{Duration, Instant};

use rayfleet::api::{ApiError, ArrayData, ChannelData, Device, Handle, ObjectKind, ParamValue, WaitMode, DEVICE};
use rayfleet::comm::{inproc_group, Endpoint};
use rayfleet::device::DeviceKind;
use rayfleet::harness::scene::box_mesh;
use rayfleet::kernels::{Solo, Vec3};

struct Objs {
    frame: Handle,
    world: Handle,
    camera: Handle,
}

fn commit(dev: &mut Device, kind: ObjectKind, subtype: &str, params: Vec<(&str, ParamValue)>) -> Handle {
    let h = dev.new_object(kind, subtype).unwrap();
    for (k, v) in params {
        dev.set_parameter(h, k, v).unwrap();
    }
    dev.commit_parameters(h).unwrap();
    h
}

/// A world of axis-aligned boxes, a lit raycast renderer, and a 64×64 frame.
fn boxes_world(dev: &mut Device, boxes: &[([f32; 3], [f32; 3])]) -> Objs {
    let mat = commit(dev, ObjectKind::Material, "matte", vec![("color", ParamValue::Float3([0.7, 0.5, 0.3]))]);
    let mut surfaces = Vec::new();
    for (k, (lo, hi)) in boxes.iter().enumerate() {
        let m = box_mesh(Vec3::from_array(*lo), Vec3::from_array(*hi));
        let g = commit(
            dev,
            ObjectKind::Geometry,
            "triangle",
            vec![
                ("vertex.position", ParamValue::Array(ArrayData::from_vec3(&m.positions))),
                ("primitive.index", ParamValue::Array(ArrayData::from_u32x3(&m.indices))),
                ("globalPrimBase", ParamValue::Int(1000 * dev.rank() as i64 + 12 * k as i64)),
            ],
        );
        surfaces.push(commit(
            dev,
            ObjectKind::Surface,
            "default",
            vec![("geometry", ParamValue::Object(g)), ("material", ParamValue::Object(mat))],
        ));
    }
    let light = commit(dev, ObjectKind::Light, "ambient", vec![("radiance", ParamValue::Float3([0.5; 3]))]);
    let world = commit(
        dev,
        ObjectKind::World,
        "default",
        vec![
            ("surface", ParamValue::Array(ArrayData::from_handles(&surfaces))),
            ("light", ParamValue::Array(ArrayData::from_handles(&[light]))),
        ],
    );
    let camera = commit(
        dev,
        ObjectKind::Camera,
        "perspective",
        vec![("position", ParamValue::Float3([0.5, 0.5, 6.0])), ("fovy", ParamValue::Float(60.0))],
    );
    let renderer = commit(dev, ObjectKind::Renderer, "raycast", Vec::new());
    let frame = commit(
        dev,
        ObjectKind::Frame,
        "default",
        vec![
            ("size", ParamValue::Int2([64, 64])),
            ("world", ParamValue::Object(world)),
            ("camera", ParamValue::Object(camera)),
            ("renderer", ParamValue::Object(renderer)),
        ],
    );
    Objs { frame, world, camera }
}

/// Runs `f` once per rank on devices over an in-process group.
fn on_ranks<R, F>(n: usize, kind: DeviceKind, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(&mut Device) -> R + Sync,
{
    let group = inproc_group(n);
    thread::scope(|s| {
        let hs: Vec<_> = group
            .into_iter()
            .map(|g| {
                let f = &f;
                s.spawn(move || {
                    let mut dev = Device::new(Box::new(g) as Box<dyn Endpoint>, kind);
                    f(&mut dev)
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

fn solo() -> Device {
    Device::new(Box::new(Solo), DeviceKind::Wavefront)
}

#[test]
fn frame_and_world_ordinals_count_per_kind() {
    let mut dev = solo();
    let f0 = dev.new_object(ObjectKind::Frame, "default").unwrap();
    let w0 = dev.new_object(ObjectKind::World, "default").unwrap();
    let w1 = dev.new_object(ObjectKind::World, "default").unwrap();
    let s = dev.new_object(ObjectKind::Surface, "default").unwrap();
    assert_eq!(dev.object(f0).unwrap().ordinal, Some(0));
    assert_eq!(dev.object(w0).unwrap().ordinal, Some(0));
    assert_eq!(dev.object(w1).unwrap().ordinal, Some(1));
    assert_eq!(dev.object(s).unwrap().ordinal, None);
}

#[test]
fn unknown_subtype_is_rejected() {
    let mut dev = solo();
    assert!(matches!(dev.new_object(ObjectKind::Geometry, "curve"), Err(ApiError::UnknownSubtype { .. })));
    assert!(matches!(dev.new_object(ObjectKind::Renderer, "default"), Err(ApiError::UnknownSubtype { .. })));
}

#[test]
fn parameters_stage_until_commit() {
    let mut dev = solo();
    let cam = dev.new_object(ObjectKind::Camera, "perspective").unwrap();
    dev.set_parameter(cam, "fovy", ParamValue::Float(60.0)).unwrap();
    assert!(!dev.object(cam).unwrap().committed.contains_key("fovy"));
    dev.set_parameter(cam, "fovy", ParamValue::Float(30.0)).unwrap();
    dev.commit_parameters(cam).unwrap();
    assert_eq!(dev.object(cam).unwrap().committed.get("fovy"), Some(&ParamValue::Float(30.0)));
    let before = dev.object(cam).unwrap().committed.clone();
    dev.commit_parameters(cam).unwrap();
    assert_eq!(dev.object(cam).unwrap().committed, before);
}

#[test]
fn bad_frame_size_fails_validation() {
    let mut dev = solo();
    let f = dev.new_object(ObjectKind::Frame, "default").unwrap();
    dev.set_parameter(f, "size", ParamValue::Int2([0, 64])).unwrap();
    assert!(matches!(dev.commit_parameters(f), Err(ApiError::ValidationError(_))));
}

#[test]
fn release_counts_references() {
    let mut dev = solo();
    let s = dev.new_object(ObjectKind::Surface, "default").unwrap();
    dev.retain(s).unwrap();
    dev.release(s).unwrap();
    assert_eq!(dev.object(s).unwrap().ref_count, 1);
    dev.release(s).unwrap();
    assert!(matches!(dev.object(s), Err(ApiError::InvalidHandle(_))));
    assert!(matches!(dev.release(s), Err(ApiError::DoubleRelease(_))));
}

#[test]
fn single_rank_render_and_wait_modes() {
    let mut dev = solo();
    let o = boxes_world(&mut dev, &[([0.0; 3], [1.0; 3])]);
    assert!(matches!(dev.frame_ready(o.frame, WaitMode::Wait), Err(ApiError::NoRenderInFlight(_))));
    dev.render_frame(o.frame).unwrap();
    assert!(dev.frame_ready(o.frame, WaitMode::Wait).unwrap());
    assert!(dev.frame_ready(o.frame, WaitMode::NoWait).unwrap());
    let view = dev.map_frame(o.frame, "color").unwrap();
    assert_eq!((view.width, view.height, view.defined), (64, 64, true));
    let ChannelData::Color(px) = view.data else { panic!("color view") };
    assert_eq!(px.len(), 64 * 64);
    assert!(matches!(dev.map_frame(o.frame, "normal"), Err(ApiError::UnknownChannel(_))));
    dev.release(DEVICE).unwrap();
}

#[test]
fn ranks_may_hold_different_surface_counts() {
    let out = on_ranks(2, DeviceKind::Wavefront, |dev| {
        let boxes: Vec<_> = (0..if dev.rank() == 0 { 3 } else { 5 })
            .map(|k| {
                let x = k as f32 * 0.3 - 1.0 + dev.rank() as f32 * 0.1;
                ([x, 0.0, 0.0], [x + 0.1, 0.1, 0.1])
            })
            .collect();
        let o = boxes_world(dev, &boxes);
        dev.render_frame(o.frame).unwrap();
        dev.frame_ready(o.frame, WaitMode::Wait).unwrap();
        let v = dev.map_frame(o.frame, "color").unwrap();
        let r = (v.width, v.height, v.defined);
        dev.release(DEVICE).unwrap();
        r
    });
    assert_eq!(out, vec![(64, 64, true), (0, 0, false)]);
}

#[test]
fn mismatched_fovy_is_a_consistency_error_everywhere() {
    let out = on_ranks(4, DeviceKind::Wavefront, |dev| {
        let o = boxes_world(dev, &[([0.0; 3], [1.0; 3])]);
        if dev.rank() == 2 {
            dev.set_parameter(o.camera, "fovy", ParamValue::Float(45.0)).unwrap();
            dev.commit_parameters(o.camera).unwrap();
        }
        let r = dev.render_frame(o.frame);
        dev.release(DEVICE).unwrap();
        r
    });
    for r in out {
        assert!(matches!(r, Err(ApiError::ConsistencyError { .. })), "{r:?}");
    }
}

#[test]
fn world_bounds_are_the_union() {
    let out = on_ranks(2, DeviceKind::Wavefront, |dev| {
        let lo = if dev.rank() == 0 { 0.0 } else { 2.0 };
        let o = boxes_world(dev, &[([lo; 3], [lo + 1.0; 3])]);
        let before = dev.get_property(o.world, "bounds", WaitMode::NoWait).unwrap();
        let after = dev.get_property(o.world, "bounds", WaitMode::Wait).unwrap();
        let cached = dev.get_property(o.world, "bounds", WaitMode::NoWait).unwrap();
        dev.release(DEVICE).unwrap();
        (before, after, cached)
    });
    for (before, after, cached) in out {
        assert_eq!(before, None);
        assert_eq!(after, Some(ParamValue::Box3([0.0, 0.0, 0.0, 3.0, 3.0, 3.0])));
        assert_eq!(cached, after);
    }
}

#[test]
fn single_rank_bounds_are_local() {
    let mut dev = solo();
    let o = boxes_world(&mut dev, &[([-1.0, 0.0, 0.5], [1.0, 2.0, 0.75])]);
    let b = dev.get_property(o.world, "bounds", WaitMode::Wait).unwrap();
    assert_eq!(b, Some(ParamValue::Box3([-1.0, 0.0, 0.5, 1.0, 2.0, 0.75])));
}

#[test]
fn composite_contexts_follow_frame_size() {
    let mut dev = Device::new(Box::new(Solo), DeviceKind::Composite);
    let o = boxes_world(&mut dev, &[([0.0; 3], [1.0; 3])]);
    let ctx = *dev.composite_context(o.frame).unwrap();
    assert_eq!((ctx.width, ctx.height), (64, 64));
    let other = commit(&mut dev, ObjectKind::Frame, "default", vec![("size", ParamValue::Int2([8, 4]))]);
    dev.set_parameter(o.frame, "size", ParamValue::Int2([128, 128])).unwrap();
    dev.commit_parameters(o.frame).unwrap();
    let ctx = dev.composite_context(o.frame).unwrap();
    assert_eq!(ctx.width as usize * ctx.height as usize, 16384);
    let ctx2 = dev.composite_context(other).unwrap();
    assert_eq!((ctx2.width, ctx2.height), (8, 4));
    dev.render_frame(o.frame).unwrap();
    dev.frame_ready(o.frame, WaitMode::Wait).unwrap();
    assert_eq!(dev.map_frame(o.frame, "depth").unwrap().width, 128);
}

#[test]
fn device_release_is_lock_step() {
    let start = Instant::now();
    let exits = on_ranks(4, DeviceKind::Composite, |dev| {
        let o = boxes_world(dev, &[([0.0; 3], [1.0; 3])]);
        dev.render_frame(o.frame).unwrap();
        dev.frame_ready(o.frame, WaitMode::Wait).unwrap();
        thread::sleep(Duration::from_millis(40 * dev.rank() as u64));
        let entry = Instant::now();
        dev.release(DEVICE).unwrap();
        (entry, Instant::now())
    });
    let last_entry = exits.iter().map(|e| e.0).max().unwrap();
    assert!(exits.iter().all(|e| e.1 >= last_entry));
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn commits_during_a_render_apply_to_the_next_frame() {
    let mut dev = solo();
    let o = boxes_world(&mut dev, &[([0.0; 3], [1.0; 3])]);
    dev.render_frame(o.frame).unwrap();
    dev.set_parameter(o.frame, "size", ParamValue::Int2([32, 16])).unwrap();
    dev.commit_parameters(o.frame).unwrap();
    dev.frame_ready(o.frame, WaitMode::Wait).unwrap();
    assert_eq!(dev.map_frame(o.frame, "color").unwrap().width, 64);
    dev.render_frame(o.frame).unwrap();
    dev.frame_ready(o.frame, WaitMode::Wait).unwrap();
    let v = dev.map_frame(o.frame, "color").unwrap();
    assert_eq!((v.width, v.height), (32, 16));
}
