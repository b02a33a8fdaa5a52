use arw_core::block_stats::{
    drift, excursion_max_mass, hoeffding_tail, log_hoeffding_tail, log_scale_drift_bound, occupation,
    reference_log_a, sample_excursion_max, simulate_w, standard_hoeffding_tail, truncated_excursion_mean, JumpLawSpec,
    JumpSampler,
};
use arw_core::rng::SplitMix64;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use proptest::prelude::*;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest |position| reached by a simple random walk started at 0 before
/// it returns to 0, capped at `cap`.
fn excursion_max(rng: &mut ChaCha8Rng, cap: i64) -> i64 {
    let mut x = if rng.next_u32() & 1 == 0 { 1i64 } else { -1 };
    let mut best = 1;
    while x != 0 && best < cap {
        x += if rng.next_u32() & 1 == 0 { 1 } else { -1 };
        best = best.max(x.abs());
    }
    best
}

fn within(count: u64, total: u64, p: f64, z: f64) -> bool {
    let freq = count as f64 / total as f64;
    (freq - p).abs() <= z * (p * (1.0 - p) / total as f64).sqrt()
}

#[test]
fn simulated_excursions_follow_the_excursion_max_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let total = 1_000_000u64;
    let mut bins = [0u64; 12];
    for _ in 0..total {
        bins[excursion_max(&mut rng, 11) as usize] += 1;
    }
    for z in 1..=10u64 {
        let p = 1.0 / (z * (z + 1)) as f64;
        assert!(within(bins[z as usize], total, p, 4.0), "z = {z}: {} of {total}", bins[z as usize]);
    }
}

#[test]
fn sampler_matches_the_excursion_max_law() {
    let mut rng = SplitMix64::new(77);
    let total = 1_000_000u64;
    let mut bins = [0u64; 11];
    for _ in 0..total {
        let z = sample_excursion_max(&mut rng);
        assert!(z >= 1);
        if z <= 10 {
            bins[z as usize] += 1;
        }
    }
    for z in 1..=10u64 {
        let p = excursion_max_mass(z).to_f64().unwrap();
        assert!(within(bins[z as usize], total, p, 4.0), "z = {z}");
    }
}

fn grid() -> Vec<JumpLawSpec> {
    let mut out = Vec::new();
    for &lambda in &[0.0, 0.2, 1.0, 2.5, 5.0] {
        for &(a, k) in &[(3u64, 9u64), (6, 36), (12, 144), (48, 2304)] {
            for v in [0, 1, a / 3, a / 2, a] {
                out.push(JumpLawSpec::new(lambda, a, k, v).unwrap());
            }
        }
    }
    out
}

#[test]
fn laws_are_normalised_and_means_match_closed_forms() {
    for s in grid() {
        let d = drift(&s).unwrap();
        let (y, yt) = (s.y_law(), s.y_tilde_law());
        assert_eq!(y.total_mass(), BigRational::one(), "{s:?}");
        assert_eq!(yt.total_mass(), BigRational::one(), "{s:?}");
        assert!(y.is_nonnegative() && yt.is_nonnegative());
        assert_eq!(y.mean(), d.y);
        assert_eq!(yt.mean(), d.y_tilde);
        let gap = BigRational::from_integer(BigInt::from(s.v + 1)) * s.delta();
        assert_eq!(d.y_tilde - d.y, gap);
        let lowest = -(s.v as i64);
        assert_eq!(yt.support.first(), Some(&lowest));
        assert_eq!(yt.support.last(), Some(&1));
    }
}

#[test]
fn one_step_drift_at_unit_rate() {
    let s = JumpLawSpec::new(1.0, 6, 36, 1).unwrap();
    assert_eq!(drift(&s).unwrap().y, BigRational::new(1.into(), 4.into()));
    let m = s.y_law().masses_f64();
    assert_eq!(m, vec![0.25, 0.25, 0.5]);
}

#[test]
fn harmonic_mean_of_capped_excursion() {
    // Direct sum of min(z, v) P(Z = z) over z < v plus v P(Z >= v).
    for v in 1..30u64 {
        let mut direct = BigRational::new(v.into(), 1.into()) * BigRational::new(1.into(), v.into());
        for z in 1..v {
            direct += BigRational::new(z.into(), 1.into()) * excursion_max_mass(z);
        }
        assert_eq!(direct, truncated_excursion_mean(v));
    }
}

fn mean_and_se(samples: impl Iterator<Item = i64>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0f64, 0f64, 0f64);
    for x in samples {
        let x = x as f64;
        n += 1.0;
        s += x;
        s2 += x * x;
    }
    let mean = s / n;
    (mean, ((s2 / n - mean * mean) / n).sqrt())
}

#[test]
fn sampler_means_match_drift() {
    let specs = [
        JumpLawSpec::new(0.2, 48, 2304, 16).unwrap(),
        JumpLawSpec::new(1.0, 6, 36, 2).unwrap(),
        JumpLawSpec::new(1.0, 6, 13, 1).unwrap(),
        JumpLawSpec::new(5.0, 12, 144, 12).unwrap(),
        JumpLawSpec::new(0.5, 3, 9, 0).unwrap(),
    ];
    for (i, s) in specs.iter().enumerate() {
        let d = drift(s).unwrap();
        let sampler = JumpSampler::new(s).unwrap();
        let mut rng = SplitMix64::new(1000 + i as u64);
        let (m, se) = mean_and_se((0..1_000_000).map(|_| sampler.sample_y(&mut rng)));
        assert!((m - d.y_f64()).abs() <= 4.0 * se, "{s:?}: Y mean {m} vs {}", d.y_f64());
        let lo = -(s.v as i64);
        let (m, se) = mean_and_se((0..1_000_000).map(|_| {
            let y = sampler.sample_y_tilde(&mut rng);
            assert!((lo..=1).contains(&y));
            y
        }));
        assert!((m - d.y_tilde_f64()).abs() <= 4.0 * se, "{s:?}: Y~ mean {m} vs {}", d.y_tilde_f64());
    }
}

#[test]
fn unit_cap_law_has_three_points() {
    let s = JumpLawSpec::new(2.0, 6, 36, 1).unwrap();
    let sampler = JumpSampler::new(&s).unwrap();
    let mut rng = SplitMix64::new(3);
    let mut c = [0u64; 3];
    let total = 300_000u64;
    for _ in 0..total {
        c[(sampler.sample_y(&mut rng) + 1) as usize] += 1;
    }
    assert!(within(c[0], total, 1.0 / 6.0, 4.0));
    assert!(within(c[1], total, 1.0 / 6.0, 4.0));
    assert!(within(c[2], total, 2.0 / 3.0, 4.0));
}

#[test]
fn log_scale_bound_chain_at_reference_size() {
    for &lambda in &[1.0, 2.0, 5.0] {
        let b = log_scale_drift_bound(lambda, reference_log_a(lambda)).unwrap();
        assert!(b.y_bound <= -48.0, "{b:?}");
        assert!(b.y_tilde_bound <= -40.0, "{b:?}");
    }
}

#[test]
fn log_scale_bound_dominates_exact_drift_at_desk_sizes() {
    for &lambda in &[0.0, 0.2, 1.0, 5.0] {
        for a in (6..=300u64).step_by(3) {
            let s = JumpLawSpec::new(lambda, a, a * a, a / 3).unwrap();
            let d = drift(&s).unwrap();
            let b = log_scale_drift_bound(lambda, (a as f64).ln()).unwrap();
            assert!(d.y_f64() <= b.y_bound + 1e-12, "a {a}: {} > {}", d.y_f64(), b.y_bound);
            assert!(d.y_tilde_f64() <= b.y_tilde_bound + 1e-12, "a {a}");
        }
    }
}

#[test]
fn tail_formula_is_reproduced() {
    assert_eq!(hoeffding_tail(2.0, 1.0, -3.0).unwrap(), (-16.0f64).exp());
    assert_eq!(log_hoeffding_tail(8.0, 0.75, -2.0).unwrap(), -2.0 * 0.75 * 0.25 * 8.0);
}

#[test]
fn tail_bound_instances_beat_exp_minus_a() {
    for a in (12..=10_000u32).step_by(6) {
        let a = a as f64;
        assert!(log_hoeffding_tail(a / 6.0, 1.0, -40.0).unwrap() <= -a);
        assert!(log_hoeffding_tail(2.0 * a / 3.0, 0.75, -40.0).unwrap() <= -a);
    }
}

fn tail_frequency(spec: &JumpLawSpec, b: f64, gamma: f64, trials: u64, seed: u64) -> f64 {
    let sampler = JumpSampler::new(spec).unwrap();
    let n = (b * gamma).round() as usize;
    let mut rng = SplitMix64::new(seed);
    let hits = (0..trials).filter(|_| ((0..n).map(|_| sampler.sample_y_tilde(&mut rng)).sum::<i64>() as f64) > -b);
    hits.count() as f64 / trials as f64
}

#[test]
fn textbook_bound_holds_for_simulated_sums() {
    let s = JumpLawSpec::new(0.2, 48, 2304, 16).unwrap();
    let nu = drift(&s).unwrap().y_tilde_f64();
    for &b in &[16.0, 32.0] {
        let freq = tail_frequency(&s, b, 1.0, 200_000, 9);
        assert!(freq <= standard_hoeffding_tail(b, 1.0, nu).unwrap());
    }
}

/// The stated bound at `a = 48`, `λ = 0.2`, with `b = a/6`, `γ = 1`,
/// `v = a/3` and `ν` the exact mean. The simulated tail is about 0.51
/// against a bound of about 0.40: summands reach down to `−a/3`, outside
/// the `[−b, 1]` range the bound is stated for, and the exponent has no
/// range factor. Kept as a record of the gap.
#[test]
#[ignore = "the stated tail bound is below the simulated frequency at this size"]
fn stated_bound_against_simulated_sums() {
    let s = JumpLawSpec::new(0.2, 48, 2304, 16).unwrap();
    let nu = drift(&s).unwrap().y_tilde_f64();
    let freq = tail_frequency(&s, 8.0, 1.0, 1_000_000, 9);
    let bound = hoeffding_tail(8.0, 1.0, nu).unwrap();
    assert!(freq <= bound, "frequency {freq} above bound {bound}");
}

#[test]
fn chain_starts_at_zero_and_moves_down_only_without_sleep() {
    for seed in 0..5 {
        let w = simulate_w(0.0, 10_000, &mut SplitMix64::new(seed)).unwrap();
        assert_eq!(w[0], 0);
        assert!(w.windows(2).all(|p| p[1] <= p[0]));
        let w = simulate_w(1.0, 10_000, &mut SplitMix64::new(seed)).unwrap();
        assert_eq!(w[0], 0);
        assert!(w.windows(2).all(|p| p[1] <= p[0] + 1));
    }
}

fn mean_occupation(lambda: f64, lo: u64, hi: u64) -> f64 {
    (0..20)
        .map(|s| occupation(&simulate_w(lambda, 50_000, &mut SplitMix64::new(s)).unwrap(), lo, hi))
        .sum::<f64>()
        / 20.0
}

#[test]
fn time_above_a_third_grows_with_the_sleep_rate() {
    // W is unbounded above; at λ = 5 it settles far beyond a, so its time
    // in [a/3, a] alone is not monotone. Time at or above a/3 is.
    let a = 12;
    let up: Vec<f64> = [0.2, 1.0, 5.0].iter().map(|&l| mean_occupation(l, a / 3, u64::MAX)).collect();
    assert!(up[0] < up[1] && up[1] < up[2], "{up:?}");
    let band: Vec<f64> = [0.2, 1.0].iter().map(|&l| mean_occupation(l, a / 3, a)).collect();
    assert!(band[0] < band[1], "{band:?}");
}

proptest! {
    #[test]
    fn tail_bound_decreases_in_b(b in 1u32..500, extra in 1u32..50, nu in -100.0f64..-1.01) {
        let t1 = log_hoeffding_tail(b as f64, 1.0, nu).unwrap();
        let t2 = log_hoeffding_tail((b + extra) as f64, 1.0, nu).unwrap();
        prop_assert!(t2 < t1);
    }

    #[test]
    fn tail_bound_decreases_in_distance(b in 1u32..500, nu in -100.0f64..-1.01, more in 0.01f64..10.0) {
        let t1 = log_hoeffding_tail(b as f64, 1.0, nu).unwrap();
        let t2 = log_hoeffding_tail(b as f64, 1.0, nu - more).unwrap();
        prop_assert!(t2 < t1);
    }

    #[test]
    fn dominating_law_sits_above(lambda in 0.0f64..10.0, a in 1u64..40, v_frac in 0.0f64..=1.0) {
        let k = a * a + 2 * a + 1;
        let v = ((a as f64) * v_frac).floor() as u64;
        let s = JumpLawSpec::new(lambda, a, k, v).unwrap();
        let (y, yt) = (s.y_law(), s.y_tilde_law());
        for x in -(v as i64)..=1 {
            prop_assert!(yt.cdf(x) <= y.cdf(x));
        }
        prop_assert!(yt.is_nonnegative());
    }
}
