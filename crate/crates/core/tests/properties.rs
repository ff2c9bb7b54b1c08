//! Property tests: serialization round trips, seminorm kernel facts, and
//! unit-norm preservation along the flow.

use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hmlab_core::domain::{build_domain, DomainKind};
use hmlab_core::field::SphereField;
use hmlab_core::io::{load_field, save_field};
use hmlab_core::vec3;

fn random_unit_field(kind: DomainKind, n: usize, seed: u64) -> SphereField {
    let grid = Arc::new(build_domain(kind, n).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = SphereField::constant(grid.clone(), [0.0, 0.0, 1.0]);
    let sample = |rng: &mut ChaCha8Rng| {
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let r = (1.0 - z * z).sqrt();
        [r * phi.cos(), r * phi.sin(), z]
    };
    for idx in 0..grid.num_nodes() {
        if grid.inside[idx] {
            field.node_values[idx] = sample(&mut rng);
        }
    }
    for v in field.vertex_values.iter_mut() {
        *v = sample(&mut rng);
    }
    field
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn save_load_is_identity(seed in any::<u64>(), kind_idx in 0usize..3) {
        let kind = [DomainKind::Cube, DomainKind::Ball, DomainKind::HalfBall][kind_idx];
        let field = random_unit_field(kind, 9, seed);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.sfld");
        save_field(&field, &path).unwrap();
        let loaded = load_field(&path).unwrap();
        for idx in 0..field.grid.num_nodes() {
            if field.grid.inside[idx] {
                prop_assert_eq!(field.node_values[idx], loaded.node_values[idx]);
            }
        }
        for (a, b) in field.vertex_values.iter().zip(&loaded.vertex_values) {
            prop_assert_eq!(a, b);
        }
        // resaving reproduces identical bytes
        let path2 = dir.path().join("g.sfld");
        save_field(&loaded, &path2).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn chord_triangle_inequality(ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
                                 bx in -1.0f64..1.0, by in -1.0f64..1.0, bz in -1.0f64..1.0,
                                 cx in -1.0f64..1.0, cy in -1.0f64..1.0, cz in -1.0f64..1.0) {
        // the kernel numerator |a - b| obeys the triangle bound through any
        // intermediate value, the surrogate for subadditivity of the seminorm
        let norm_or_e3 = |v: [f64; 3]| {
            if vec3::norm(v) < 1e-9 { [0.0, 0.0, 1.0] } else { vec3::normalize(v) }
        };
        let a = norm_or_e3([ax, ay, az]);
        let b = norm_or_e3([bx, by, bz]);
        let c = norm_or_e3([cx, cy, cz]);
        prop_assert!(vec3::dist(a, b) <= vec3::dist(a, c) + vec3::dist(c, b) + 1e-12);
    }
}
