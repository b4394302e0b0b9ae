mod oracle;

use oracle::{dense_landscape, diagram, random_points};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use topocause::landscape::{landscape, landscape_l2_distance, landscape_sup_distance};
use topocause::{bottleneck_distance, GridSpec, LandscapeConfig};

fn config(k: usize, hi: f64, nodes: usize) -> LandscapeConfig {
    LandscapeConfig::new(k, GridSpec::new(0.0, hi, nodes).unwrap()).unwrap()
}

#[test]
fn matches_dense_definition() {
    let mut rng = StdRng::seed_from_u64(31);
    for _ in 0..200 {
        let pts = random_points(&mut rng, 8);
        let k = rng.gen_range(1..=5);
        let cfg = config(k, 4.0, rng.gen_range(2..80));
        let got = landscape(&diagram(&pts), &cfg).unwrap();
        let want = dense_landscape(&pts, &cfg.grid.nodes(), k);
        for (layer, row) in want.iter().enumerate() {
            for (g, v) in row.iter().enumerate() {
                assert!((got.get(layer, g) - v).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn layers_are_ordered() {
    let mut rng = StdRng::seed_from_u64(32);
    for _ in 0..200 {
        let cfg = config(4, 4.0, 64);
        let l = landscape(&diagram(&random_points(&mut rng, 8)), &cfg).unwrap();
        for k in 1..4 {
            assert!(l.layer(k).iter().zip(l.layer(k - 1)).all(|(lo, hi)| lo <= hi));
        }
        assert!(l.values().iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn sup_distance_bounded_by_bottleneck() {
    let mut rng = StdRng::seed_from_u64(33);
    let cfg = config(3, 4.0, 256);
    for _ in 0..500 {
        let a = diagram(&random_points(&mut rng, 8));
        let b = diagram(&random_points(&mut rng, 8));
        let la = landscape(&a, &cfg).unwrap();
        let lb = landscape(&b, &cfg).unwrap();
        let sup = landscape_sup_distance(&la, &lb).unwrap();
        assert!(sup <= bottleneck_distance(&a, &b).unwrap() + 1e-9);
    }
}

#[test]
fn l2_bounded_by_sup() {
    let mut rng = StdRng::seed_from_u64(34);
    for _ in 0..200 {
        let k = rng.gen_range(1..=4);
        let nodes = rng.gen_range(2..300);
        let cfg = config(k, 4.0, nodes);
        let la = landscape(&diagram(&random_points(&mut rng, 8)), &cfg).unwrap();
        let lb = landscape(&diagram(&random_points(&mut rng, 8)), &cfg).unwrap();
        let l2 = landscape_l2_distance(&la, &lb).unwrap();
        let sup = landscape_sup_distance(&la, &lb).unwrap();
        let bound = sup * ((k * nodes) as f64 * cfg.grid.spacing()).sqrt();
        assert!(l2 <= bound + 1e-12);
    }
}

#[test]
fn l2_converges_under_refinement() {
    let a = diagram(&[(0.0, 1.0), (0.5, 2.0)]);
    let b = diagram(&[(0.0, 1.4)]);
    let dist = |nodes| {
        let cfg = config(2, 3.0, nodes);
        landscape_l2_distance(&landscape(&a, &cfg).unwrap(), &landscape(&b, &cfg).unwrap()).unwrap()
    };
    let (coarse, fine) = (dist(301), dist(3001));
    assert!((coarse - fine).abs() < 0.01 * fine);
}
