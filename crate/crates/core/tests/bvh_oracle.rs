use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rayfleet_core::bvh::Bvh;
use rayfleet_core::geometry::{Primitive, Ray, Shape, Sphere, Triangle};
use rayfleet_core::Vec3;

fn rand_point(rng: &mut StdRng, extent: f32) -> Vec3 {
    Vec3::new(rng.gen_range(-extent..extent), rng.gen_range(-extent..extent), rng.gen_range(-extent..extent))
}

fn random_prims(rng: &mut StdRng, count: usize) -> Vec<Primitive> {
    (0..count)
        .map(|i| {
            let shape = if i % 2 == 0 {
                let c = rand_point(rng, 4.0);
                Shape::Triangle(Triangle {
                    v0: c + rand_point(rng, 1.0),
                    v1: c + rand_point(rng, 1.0),
                    v2: c + rand_point(rng, 1.0),
                })
            } else {
                Shape::Sphere(Sphere { center: rand_point(rng, 4.0), radius: rng.gen_range(0.05..0.8) })
            };
            Primitive { shape, prim_id: 1000 + i as u64, material: 0 }
        })
        .collect()
}

fn random_ray(rng: &mut StdRng) -> Ray {
    let origin = rand_point(rng, 8.0);
    let target = rand_point(rng, 3.0);
    Ray::new(origin, (target - origin).normalize())
}

/// Every primitive tested, smallest (t, id) kept.
fn brute(prims: &[Primitive], ray: &Ray) -> Option<(u32, u64)> {
    let mut best: Option<(f32, u64)> = None;
    for p in prims {
        if let Some(t) = p.intersect(ray, ray.t_min, ray.t_max) {
            best = match best {
                Some((bt, bid)) if (bt, bid) <= (t, p.prim_id) => Some((bt, bid)),
                _ => Some((t, p.prim_id)),
            };
        }
    }
    best.map(|(t, id)| (t.to_bits(), id))
}

#[test]
fn closest_hit_matches_brute_force() {
    let mut rng = StdRng::seed_from_u64(8);
    let prims = random_prims(&mut rng, 100);
    let bvh = Bvh::build(prims.clone());
    let mut hits = 0;
    for _ in 0..10_000 {
        let ray = random_ray(&mut rng);
        let got = bvh.closest_hit(&ray, ray.t_min, ray.t_max).map(|h| (h.t.to_bits(), h.prim_id));
        let want = brute(&prims, &ray);
        assert_eq!(got, want, "ray {ray:?}");
        hits += got.is_some() as usize;
    }
    // the suite is only meaningful if a good share of rays hit something
    assert!(hits > 2_000, "{hits}");
}

#[test]
fn submission_order_does_not_matter() {
    let mut rng = StdRng::seed_from_u64(9);
    let mut prims = random_prims(&mut rng, 100);
    // duplicates force id tie-breaks
    let dupes: Vec<Primitive> =
        prims.iter().take(10).map(|p| Primitive { prim_id: p.prim_id + 500, ..*p }).collect();
    prims.extend(dupes);
    let rays: Vec<Ray> = (0..2_000).map(|_| random_ray(&mut rng)).collect();
    let reference = Bvh::build(prims.clone());
    let expected: Vec<_> =
        rays.iter().map(|r| reference.closest_hit(r, r.t_min, r.t_max).map(|h| (h.t.to_bits(), h.prim_id))).collect();
    for _ in 0..5 {
        prims.shuffle(&mut rng);
        let bvh = Bvh::build(prims.clone());
        for (r, e) in rays.iter().zip(&expected) {
            assert_eq!(bvh.closest_hit(r, r.t_min, r.t_max).map(|h| (h.t.to_bits(), h.prim_id)), *e);
        }
    }
}
