use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use topocause::estimands::{
    adjusted_topological_effect, freeze_landscape_config, stratum_summaries, tate_hat, tcate_hat,
    unadjusted_topological_contrast, MIN_CELL_SIZE,
};
use topocause::filtration::vr0_diagram;
use topocause::synth::{draw_observational_2d, Design2D, SeededRng};
use topocause::{
    wasserstein_distance, DiagramMetric, InfiniteBarPolicy, ObservationalSample, Record, SummaryConfig,
};

fn observed(seed: u64, n: usize) -> ObservationalSample {
    draw_observational_2d(&Design2D::default(), n, &mut SeededRng::new(seed, 0))
        .unwrap()
        .sample
}

fn relabeled(sample: &ObservationalSample, map: impl Fn(u32) -> u32) -> ObservationalSample {
    let records = sample
        .records()
        .iter()
        .map(|r| Record { z: map(r.z), ..r.clone() })
        .collect();
    ObservationalSample::new(records).unwrap()
}

fn shuffled(sample: &ObservationalSample, seed: u64) -> ObservationalSample {
    let mut records = sample.records().to_vec();
    records.shuffle(&mut StdRng::seed_from_u64(seed));
    ObservationalSample::new(records).unwrap()
}

fn effects(sample: &ObservationalSample) -> (f64, f64, f64) {
    let summary = SummaryConfig::default();
    let lcfg = freeze_landscape_config(sample, &summary, 3, 256).unwrap();
    let s = stratum_summaries(sample, &summary, &lcfg).unwrap();
    (
        tate_hat(&s, DiagramMetric::default()).unwrap().value.magnitude(),
        tate_hat(&s, DiagramMetric::Bottleneck).unwrap().value.magnitude(),
        adjusted_topological_effect(&s).unwrap().value.magnitude(),
    )
}

fn close(a: (f64, f64, f64), b: (f64, f64, f64)) -> bool {
    (a.0 - b.0).abs() <= 1e-12 && (a.1 - b.1).abs() <= 1e-12 && (a.2 - b.2).abs() <= 1e-12
}

#[test]
fn invariant_under_stratum_relabeling() {
    for seed in 0..5 {
        let s = observed(seed, 300);
        let base = effects(&s);
        assert!(close(base, effects(&relabeled(&s, |z| 1 - z))));
        assert!(close(base, effects(&relabeled(&s, |z| 40 + 7 * z))));
    }
}

#[test]
fn invariant_under_record_order() {
    for seed in 0..5 {
        let s = observed(seed, 300);
        let base = effects(&s);
        for k in 0..3 {
            assert!(close(base, effects(&shuffled(&s, 100 + k))));
        }
    }
}

#[test]
fn weights_sum_to_one() {
    for seed in 0..20 {
        let s = observed(seed, 97 + seed as usize);
        let total: f64 = s.stratum_weights().values().sum();
        assert!((total - 1.0).abs() <= 1e-12);
        let summary = SummaryConfig::default();
        let lcfg = freeze_landscape_config(&s, &summary, 3, 64).unwrap();
        let summaries = stratum_summaries(&s, &summary, &lcfg).unwrap();
        let est = tate_hat(&summaries, DiagramMetric::default()).unwrap();
        assert!((est.weights.values().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn tcate_recomputed_from_raw_clouds() {
    let s = observed(3, 400);
    let summary = SummaryConfig::default();
    let lcfg = freeze_landscape_config(&s, &summary, 3, 128).unwrap();
    let summaries = stratum_summaries(&s, &summary, &lcfg).unwrap();
    let est = tate_hat(&summaries, DiagramMetric::Wasserstein(2.0)).unwrap();
    let n = s.len() as f64;
    let mut total = 0.0;
    for st in &summaries {
        let d0 = vr0_diagram(&s.cell_cloud(0, st.z, MIN_CELL_SIZE).unwrap(), InfiniteBarPolicy::Dropped);
        let d1 = vr0_diagram(&s.cell_cloud(1, st.z, MIN_CELL_SIZE).unwrap(), InfiniteBarPolicy::Dropped);
        let direct = wasserstein_distance(&d1, &d0, 2.0).unwrap();
        assert_eq!(tcate_hat(st, DiagramMetric::Wasserstein(2.0)).unwrap(), direct);
        assert_eq!(est.per_stratum[&st.z], direct);
        total += (st.n0 + st.n1) as f64 / n * direct;
    }
    assert!((est.value.magnitude() - total).abs() <= 1e-12);
}

#[test]
fn effects_nonnegative() {
    for seed in 0..10 {
        let s = observed(seed, 200);
        let (w, b, adj) = effects(&s);
        assert!(w >= 0.0 && b >= 0.0 && adj >= 0.0);
        let summary = SummaryConfig::default();
        let lcfg = freeze_landscape_config(&s, &summary, 3, 64).unwrap();
        let un = unadjusted_topological_contrast(&s, &summary, &lcfg).unwrap();
        assert!(un.value.magnitude() >= 0.0);
    }
}
