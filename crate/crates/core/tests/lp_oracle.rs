mod common;

use common::{enumerate_vertices, random_lp};
use evarkit::lp::{LinearProgram, LpStatus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check(lp: &LinearProgram) {
    let sol = lp.solve().unwrap();
    let (status, value) = enumerate_vertices(lp);
    assert_eq!(sol.status, status, "{lp:?}");
    match status {
        LpStatus::Optimal => {
            assert!((sol.value - value).abs() <= 1e-9 * (1.0 + value.abs()), "{lp:?}");
            let scale = 1.0 + lp.b_ub.iter().chain(&lp.b_eq).fold(0.0f64, |a, b| a.max(b.abs()));
            assert!(lp.primal_residual(&sol.point) <= 1e-9 * scale);
            let dv = lp.dual_value(&sol.duals);
            assert!((dv - sol.value).abs() <= 1e-8 * (1.0 + sol.value.abs()));
            assert!(lp.complementary_slackness(&sol.point, &sol.duals) <= 1e-8);
        }
        LpStatus::Infeasible => assert!(lp.is_farkas_certificate(&sol.duals, 1e-9), "{lp:?}"),
        LpStatus::Unbounded => {
            assert!(lp.is_improving_ray(sol.ray.as_ref().unwrap(), 1e-9), "{lp:?}")
        }
    }
}

#[test]
fn random_programs_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut counts = [0usize; 3];
    for _ in 0..400 {
        let lp = random_lp(&mut rng);
        check(&lp);
        counts[lp.solve().unwrap().status as usize] += 1;
    }
    assert!(counts.iter().all(|&c| c > 10), "status mix {counts:?}");
}
