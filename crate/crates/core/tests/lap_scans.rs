use lrk_core::green::LadderConfig;
use lrk_core::grid::{GridFn, Potential};
use lrk_core::kernel::kernel_kl;
use lrk_core::lap::{holder_modulus, kernel_nullity_scan, perturbed_resolvent_apply, ScanSettings};
use lrk_core::quadrature::QuadratureConfig;
use lrk_core::resolvent::{Side, SpectralParam};
use lrk_core::symbol::apply_h0;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn l2(values: &[Complex64]) -> f64 {
    values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn holder_modulus_shrinks_with_the_gap() {
    let st = ScanSettings::default();
    let z = SpectralParam::new(6.0, 0.1, Side::Plus).unwrap();
    let mut previous = f64::INFINITY;
    for k in 0..4 {
        let gap = 0.05 / 2f64.powi(k);
        let w = SpectralParam::new(6.0, 0.1 - gap, Side::Plus).unwrap();
        let m = holder_modulus(None, 3, &z, &w, 1.5, 3, &st).unwrap();
        assert!(m.value > 0.0 && m.value < previous, "gap {gap}: {} after {previous}", m.value);
        previous = m.value;
    }
}

#[test]
fn weak_potential_keeps_holder_modulus_comparable() {
    let st = ScanSettings::default();
    let z = SpectralParam::new(6.0, 0.1, Side::Plus).unwrap();
    let w = SpectralParam::new(6.0, 0.05, Side::Plus).unwrap();
    let v = Potential::finite(3, &[(vec![0, 0, 0], -0.5)]).unwrap();
    let free = holder_modulus(None, 3, &z, &w, 1.5, 3, &st).unwrap().value;
    let pert = holder_modulus(Some(&v), 3, &z, &w, 1.5, 3, &st).unwrap().value;
    assert!(pert <= 2.0 * free, "{pert} vs {free}");
}

#[test]
fn resolvent_identity_on_random_pairs() {
    let cfg = QuadratureConfig::default();
    let lc = LadderConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let mut sites = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let x: Vec<i64> = (0..3).map(|_| rng.gen_range(-1..=1)).collect();
            sites.push((x, rng.gen_range(-1.0..1.0)));
        }
        let v = Potential::finite(3, &sites).unwrap();
        let f = GridFn::from_fn(3, 1, |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let z = SpectralParam::new(rng.gen_range(-1.0..13.0), rng.gen_range(0.5..2.0), Side::Plus).unwrap();
        let u = perturbed_resolvent_apply(&v, &z, &f, 6, &lc, &cfg).unwrap().value;
        let h = apply_h0(&u);
        let mut res = Vec::new();
        for i in 0..u.len() {
            let x = u.site(i);
            if h.is_interior(&x) {
                res.push(h.value.values()[i] + u.values()[i] * (v.get(&x) - z.z()) - f.get(&x));
            }
        }
        let r = l2(&res);
        assert!(r <= 1e-6 * l2(f.values()), "residual {r} at z = {}", z.z());
    }
}

#[test]
fn zero_energy_resonance_shows_as_near_nullity() {
    let cfg = QuadratureConfig::default();
    let k0 = kernel_kl(3, 2.0, 0, &cfg).unwrap().real(&[0, 0, 0]).unwrap();
    let v = Potential::finite(3, &[(vec![0, 0, 0], -1.0 / k0)]).unwrap();
    let out = kernel_nullity_scan(&v, &[0.01], Side::Plus, &ScanSettings::default()).unwrap();
    assert!(out[0].sigma_min <= 0.05, "{:?}", out[0]);
}
