//! Rendering must not depend on how the scene is split across ranks.

use proptest::prelude::*;
use rayfleet::device::DeviceKind;
use rayfleet::harness::launch::{render_inproc, RenderJob};
use rayfleet::harness::scene::SceneFile;
use rayfleet::harness::world::FrameSetup;
use rayfleet::kernels::render::RenderMode;
use serde_json::json;

fn scene(assign_seed: u64, grid_seed: u64, with_volume: bool) -> SceneFile {
    let mut entities = vec![
        json!({"triangles": {"positions": [[-4, 0, -4], [-4, 0, 4], [4, 0, 4], [-4, 0, -4], [4, 0, 4], [4, 0, -4]]},
               "assign": "hashed", "assignSeed": assign_seed}),
        json!({"boxGrid": {"n": 2, "boxSize": 0.5, "gap": 0.3, "seed": grid_seed, "center": [0, 1, 0]},
               "material": {"albedo": [0.9, 0.4, 0.2]}}),
        json!({"spheres": {"scatter": {"count": 9, "min": [-2, 0.2, -2], "max": [2, 2, 2], "radius": [0.1, 0.3], "seed": grid_seed}},
               "assign": "hashed", "assignSeed": assign_seed ^ 5}),
    ];
    if with_volume {
        entities.push(json!({"volume": {"dims": [9, 9, 9], "origin": [-1, 0, -1], "spacing": [0.25, 0.25, 0.25],
            "checker": {"cell": 2, "low": 0.2, "high": 0.8}, "bricks": [2, 2, 2],
            "tf": {"domain": [0, 1], "points": [[0, 0.2, 0.3, 0.9, 0.1], [1, 0.9, 0.6, 0.2, 0.4]]}},
            "assign": "hashed", "assignSeed": assign_seed ^ 9}));
    }
    serde_json::from_value(json!({
        "schema": "rayfleet-scene/1",
        "camera": {"position": [3, 3, 5], "lookAt": [0, 0.8, 0]},
        "lights": {"directional": {"direction": [0.5, -1, -0.2]}, "ambient": [0.1, 0.1, 0.1]},
        "renderer": {"background": [0.2, 0.2, 0.3, 1]},
        "entities": entities,
    }))
    .unwrap()
}

fn render(scene: &SceneFile, mode: RenderMode, ranks: usize) -> Vec<u32> {
    let job = RenderJob {
        device: DeviceKind::Wavefront,
        scene: scene.clone(),
        base_dir: Default::default(),
        setup: FrameSetup { mode, size: [20, 16], spp: 2, bounces: 4, seed: 3 },
    };
    let out = render_inproc(ranks, &job).unwrap();
    out.image.rgb.iter().flatten().map(|v| v.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn image_bits_do_not_depend_on_rank_count(
        ranks in 2usize..=5,
        assign_seed: u64,
        grid_seed: u64,
        with_volume: bool,
        pathtrace: bool,
    ) {
        let mode = if pathtrace { RenderMode::PathTracer } else { RenderMode::Raycast };
        let s = scene(assign_seed, grid_seed, with_volume);
        let one = render(&s, mode, 1);
        let distinct: std::collections::HashSet<_> = one.iter().collect();
        prop_assert!(distinct.len() > 20, "degenerate image");
        prop_assert_eq!(one, render(&s, mode, ranks));
    }

    #[test]
    fn every_ring_step_conserves_rays(ranks in 1usize..=4, assign_seed: u64) {
        let job = RenderJob {
            device: DeviceKind::Wavefront,
            scene: scene(assign_seed, 1, true),
            base_dir: Default::default(),
            setup: FrameSetup { mode: RenderMode::PathTracer, size: [12, 12], spp: 1, bounces: 3, seed: 0 },
        };
        let m = render_inproc(ranks, &job).unwrap().metrics.unwrap();
        prop_assert!(!m.steps.is_empty());
        for s in &m.steps {
            let sent: u64 = s.per_rank.iter().map(|r| r.sent).sum();
            let recv: u64 = s.per_rank.iter().map(|r| r.recv).sum();
            prop_assert_eq!(sent, recv);
            prop_assert_eq!(s.per_rank.len(), ranks);
        }
    }
}
