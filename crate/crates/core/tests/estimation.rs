use proptest::prelude::*;
use pu_kit::ecdf::{binomial_inversion, dkw_radius};
use pu_kit::mpe::{bbe_estimate, naive_ratio_estimate, top_bin_diagnostics, BbeConfig};
use pu_kit::synth::{gen_anchor_task, Generator};
use pu_kit::{generate, RandomSeed, TailCdf, TaskSpec, ThresholdGrid};
use rand::Rng;

fn uniform_scores(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RandomSeed(seed).rng(0);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// sup_z |q̂(z) − (1 − z)| for uniform scores, attained at the jump points.
fn tail_sup_deviation(scores: &[f64]) -> f64 {
    let tail = TailCdf::new(scores).unwrap();
    let n = tail.n() as f64;
    tail.sorted_scores()
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            // just at and just above z
            let at = (n - i as f64) / n;
            let above = (n - i as f64 - 1.0) / n;
            (at - (1.0 - z)).abs().max((above - (1.0 - z)).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn dkw_band_covers_uniform_tail() {
    let (n, delta, trials) = (500, 0.1, 500);
    let radius = dkw_radius(n, delta).unwrap();
    let hits = (0..trials).filter(|&t| tail_sup_deviation(&uniform_scores(n, 1000 + t)) <= radius).count();
    assert!(hits as f64 >= (1.0 - delta) * trials as f64, "coverage {hits}/{trials}");
}

#[test]
fn contaminated_top_bin_overestimates() {
    // positives Uniform[0.3,1], negatives Uniform[0,0.7]: every bin below 0.7
    // holds negatives, and the anchor [0.7,1] is pure
    let mut bias = 0.0;
    for seed in 0..20 {
        let spec = TaskSpec::new(Generator::CustomScore { pos: [0.3, 1.0], neg: [0.0, 0.7] }, 0.5, 400, 400);
        let data = generate(&spec, RandomSeed(seed)).unwrap();
        let z_p: Vec<f64> = data.samples().positives().rows().map(|x| x[0]).collect();
        let z_u: Vec<f64> = data.samples().unlabeled().rows().map(|x| x[0]).collect();
        bias += bbe_estimate(&z_p, &z_u, &BbeConfig::default()).unwrap().alpha_hat - 0.5;
    }
    assert!(bias / 20.0 > 0.0, "mean bias {}", bias / 20.0);
}

#[test]
fn anchor_task_top_bin_is_pure() {
    let data = gen_anchor_task(0.3, 0.5, 2000, 2000, RandomSeed(3)).unwrap();
    let z_p: Vec<f64> = data.samples().positives().rows().map(|x| x[0] / 3.0).collect();
    let z_u: Vec<f64> = data.samples().unlabeled().rows().map(|x| x[0] / 3.0).collect();
    let grid = ThresholdGrid::from_scores(&z_p, &z_u).unwrap();
    let diag = top_bin_diagnostics(&z_u, data.truth().map(|t| t.labels()), &grid).unwrap();
    for row in diag.rows.iter().filter(|r| r.c > 2.0 / 3.0) {
        assert_eq!(row.purity.unwrap_or(1.0), 1.0, "threshold {}", row.c);
    }
}

#[test]
fn naive_never_exceeds_bbe_ratio_at_its_threshold() {
    let z_p = uniform_scores(300, 1);
    let z_u = uniform_scores(300, 2);
    let bbe = bbe_estimate(&z_p, &z_u, &BbeConfig::default()).unwrap();
    let naive = naive_ratio_estimate(&z_p, &z_u).unwrap();
    assert!(naive.alpha_hat <= bbe.alpha_hat);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binomial_inversion_monotone(n in 1usize..400, k_frac in 0.0f64..=1.0, d1 in 0.01f64..0.5, d2 in 0.01f64..0.5) {
        let p = (k_frac * n as f64).floor() / n as f64;
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let tight = binomial_inversion(n, p, hi).unwrap();
        let loose = binomial_inversion(n, p, lo).unwrap();
        prop_assert!(loose + 1e-9 >= tight);
        prop_assert!(tight <= 1.0 - p + 1e-9);
        let bigger = binomial_inversion(2 * n, p, hi).unwrap();
        prop_assert!(bigger <= tight + 1e-8);
    }

    #[test]
    fn bbe_estimate_is_its_own_ratio(zp in prop::collection::vec(0.0f64..=1.0, 1..60), zu in prop::collection::vec(0.0f64..=1.0, 1..60)) {
        let est = bbe_estimate(&zp, &zu, &BbeConfig::default()).unwrap();
        prop_assert!(est.q_p_at_c > 0.0);
        prop_assert!((est.alpha_hat - est.q_u_at_c / est.q_p_at_c).abs() < 1e-12);
        prop_assert_eq!(est.alpha_clamped, est.alpha_hat.clamp(0.0, 1.0));
    }
}
