use swarmnav_core::ppo::compute_gae;
use swarmnav_core::sim::{ScenarioKind, ScenarioSpec, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

#[test]
fn network_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let e = network_gradient_error(seed);
        assert!(e < 1e-4, "seed {seed}: {e}");
    }
}

#[test]
fn ppo_loss_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let e = ppo_gradient_error(seed);
        assert!(e < 1e-4, "seed {seed}: {e}");
    }
}

#[test]
fn gae_recursion_equals_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let n = rng.gen_range(1..40);
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.1)).collect();
        let (g, lam, boot) = (rng.gen_range(0.8..1.0), rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0));
        let (adv, targets) = compute_gae(&r, &v, &d, boot, g, lam).unwrap();
        for (t, (a, e)) in adv.iter().zip(gae_expansion(&r, &v, &d, boot, g, lam)).enumerate() {
            assert!((a - e).abs() < 1e-12);
            assert!((targets[t] - (a + v[t])).abs() < 1e-12);
        }
        let zeros = vec![0.0; n];
        let (mc, _) = compute_gae(&r, &zeros, &d, 0.0, g, 1.0).unwrap();
        for (a, e) in mc.iter().zip(reward_to_go(&r, &d, g)) {
            assert!((a - e).abs() < 1e-10);
        }
    }
}

#[test]
fn contact_flags_match_all_pairs_oracle() {
    let spec = ScenarioSpec::scaled(ScenarioKind::RandomObstacle, 100.0);
    let mut world = World::new(spec.world_config(50, 4).unwrap(), spec).unwrap();
    let (checked, bad) = collision_mismatches(&mut world, 300, 9);
    assert!(checked > 5000);
    assert_eq!(bad, 0);
}
