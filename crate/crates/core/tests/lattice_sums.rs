use lrk_core::inequality::{convolution_sum_i, intcal_regime_check, Regime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn tail_bound_covers_a_doubled_cube() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..30 {
        let d = rng.gen_range(1..=3usize);
        let x: Vec<i64> = (0..d).map(|_| rng.gen_range(-4..=4)).collect();
        let k = rng.gen_range(0.2..3.0);
        let l = d as f64 - k + rng.gen_range(0.3..2.0);
        let l = l.max(0.1);
        let xn = x.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
        let t = ((4.0 * xn).ceil() as i64).max(8);
        let coarse = convolution_sum_i(&x, k, l, t).unwrap();
        let fine = convolution_sum_i(&x, k, l, 2 * t).unwrap();
        let change = (fine.value() - coarse.value()).abs();
        assert!(
            change < coarse.tail_bound,
            "x = {x:?}, k = {k}, l = {l}, T = {t}: change {change} vs bound {}",
            coarse.tail_bound
        );
        assert!(fine.partial >= coarse.partial && fine.partial <= coarse.partial + coarse.tail_bound);
    }
}

#[test]
fn borderline_regime_needs_a_positive_delta() {
    let up = intcal_regime_check(2.0, 3.0, 3, 64, 0.1).unwrap();
    assert_eq!(up.regime, Regime::II);
    assert!(up.stable, "growth {} over the outer dyadic window", up.growth);
    let down = intcal_regime_check(2.0, 3.0, 3, 64, -0.1).unwrap();
    assert!(down.growth_between(16.0, 64.0) > 0.10, "{}", down.growth_between(16.0, 64.0));
    assert!(!down.stable);
}
