use std::sync::{Arc, OnceLock};

use lrk_core::format::fmt_f64;
use lrk_core::grid::{GridFn, Potential};
use lrk_core::kernel::{kernel_kl, KernelTable};
use lrk_core::ops::{convolve, lorentz_quasinorm, weighted_norm};
use lrk_core::quadrature::QuadratureConfig;
use lrk_core::resolvent::resolvent_kernel;
use lrk_core::symbol::{apply_h0, grad_h0, h0};
use lrk_core::threshold::{classify_state, solve_threshold_state_with, ThresholdState, TOL_SUM, TOL_TAIL};
use num_complex::Complex64;
use proptest::prelude::*;

fn small_kernel() -> &'static KernelTable {
    static K: OnceLock<KernelTable> = OnceLock::new();
    K.get_or_init(|| resolvent_kernel(Complex64::new(5.0, 0.5), 3, 6, &QuadratureConfig::default()).unwrap())
}

fn resonance() -> &'static ThresholdState {
    static S: OnceLock<ThresholdState> = OnceLock::new();
    S.get_or_init(|| {
        let k = Arc::new(kernel_kl(3, 2.0, 12, &QuadratureConfig::default()).unwrap());
        let k0 = k.real(&[0, 0, 0]).unwrap();
        let v = Potential::finite(3, &[(vec![0, 0, 0], -1.0 / k0)]).unwrap();
        solve_threshold_state_with(&v, k, 6).unwrap().remove(0)
    })
}

fn torus_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-std::f64::consts::PI..std::f64::consts::PI, d)
}

fn grid_values(d: usize, radius: i64) -> impl Strategy<Value = GridFn> {
    let n = ((2 * radius + 1) as usize).pow(d as u32);
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n).prop_map(move |v| {
        let mut g = GridFn::zeros(d, radius);
        for (slot, (re, im)) in g.values_mut().iter_mut().zip(v) {
            *slot = Complex64::new(re, im);
        }
        g
    })
}

fn inner(a: &GridFn, b: &GridFn) -> Complex64 {
    a.values().iter().zip(b.values()).map(|(p, q)| p.conj() * q).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn symbol_range_and_gradient(xi in (1usize..=4).prop_flat_map(torus_point)) {
        let d = xi.len() as f64;
        let v = h0(&xi);
        prop_assert!((0.0..=4.0 * d).contains(&v));
        let g = grad_h0(&xi);
        let h = 1e-5;
        let mut err = 0.0f64;
        for j in 0..xi.len() {
            let (mut p, mut m) = (xi.clone(), xi.clone());
            p[j] += h;
            m[j] -= h;
            let fd = (h0(&p) - h0(&m)) / (2.0 * h);
            err = err.max((fd - g[j]).abs());
        }
        let scale = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-8 * scale.max(1.0), "{err} vs {scale}");
    }

    #[test]
    fn symbol_is_hyperoctahedrally_invariant(xi in torus_point(3), flips in prop::collection::vec(any::<bool>(), 3), rot in 0usize..3) {
        let mut y: Vec<f64> = xi.iter().zip(&flips).map(|(&c, &f)| if f { -c } else { c }).collect();
        y.rotate_left(rot);
        prop_assert!((h0(&xi) - h0(&y)).abs() <= 1e-14 * h0(&xi).max(1.0));
    }

    #[test]
    fn laplacian_is_symmetric(u in grid_values(3, 2), v in grid_values(3, 2)) {
        let (u, v) = (u.resized(3), v.resized(3));
        let (hu, hv) = (apply_h0(&u).value, apply_h0(&v).value);
        let a = inner(&u, &hv);
        let b = inner(&hu, &v);
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn weighted_norm_grows_with_weight(u in grid_values(2, 3), s in -2.0..2.0f64, ds in 0.0..1.0f64) {
        prop_assert!(weighted_norm(&u, s) <= weighted_norm(&u, s + ds) * (1.0 + 1e-14));
    }

    #[test]
    fn convolution_is_linear(f in grid_values(3, 1), g in grid_values(3, 1), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let k = small_kernel();
        let mut mix = f.clone();
        mix.scale(Complex64::new(a, 0.0));
        mix.axpy(Complex64::new(b, 0.0), &g);
        let lhs = convolve(k, &mix, 3).unwrap();
        let mut rhs = convolve(k, &f, 3).unwrap();
        rhs.scale(Complex64::new(a, 0.0));
        rhs.axpy(Complex64::new(b, 0.0), &convolve(k, &g, 3).unwrap());
        let scale = lhs.max_abs().max(1e-300);
        for (p, q) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((p - q).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn diagonal_lorentz_is_lebesgue(u in grid_values(2, 2), p in prop::sample::select(vec![1.0f64, 2.0, 4.0])) {
        let plain = u.values().iter().map(|v| v.norm().powf(p)).sum::<f64>().powf(1.0 / p);
        let q = lorentz_quasinorm(&u, p, p).unwrap();
        prop_assert!((q - plain).abs() <= 1e-12 * plain);
    }

    #[test]
    fn grid_text_round_trip(u in grid_values(2, 2)) {
        let mut buf = Vec::new();
        u.write_text(&mut buf).unwrap();
        let back = GridFn::read_text(&buf[..], 2, 2).unwrap();
        prop_assert_eq!(back, u);
    }

    #[test]
    fn decimal_format_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn classification_depends_only_on_the_ray(re in -3.0..3.0f64, im in -3.0..3.0f64) {
        prop_assume!(re.hypot(im) > 1e-3);
        let st = resonance();
        let base = classify_state(st, TOL_SUM, TOL_TAIL);
        prop_assert_eq!(classify_state(&st.scaled(Complex64::new(re, im)), TOL_SUM, TOL_TAIL), base);
    }
}

#[test]
fn laplacian_origin_form() {
    for d in 1..=4 {
        let e = GridFn::delta(d, &vec![0; d], 2);
        let he = apply_h0(&e).value;
        assert_eq!(inner(&e, &he), Complex64::new(2.0 * d as f64, 0.0));
    }
}
