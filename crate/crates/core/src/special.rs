//! Special functions used by the kernel and resolvent integrators.

use num_complex::Complex64;

const RESCALE: f64 = 1e250;

/// `exp(-x) I_n(x)` for `n = 0..=nmax`, by Miller's backward recurrence with
/// the normalization `sum_{n in Z} exp(-x) I_n(x) = 1`.
pub fn scaled_bessel_i(x: f64, nmax: usize) -> Vec<f64> {
    assert!(x >= 0.0);
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = nmax + 20 + (10.0 * x.sqrt()).ceil() as usize + if x < 1.0 { 0 } else { 10 };
    let mut above = 0.0f64;
    let mut cur = 1e-280f64;
    let mut total = 0.0f64;
    for n in (1..=start).rev() {
        // cur = I_n, above = I_{n+1}; produce I_{n-1}
        let below = (2.0 * n as f64 / x) * cur + above;
        if n <= nmax {
            out[n] = cur;
        }
        total += 2.0 * cur;
        above = cur;
        cur = below;
        if cur.abs() > RESCALE {
            let s = 1.0 / RESCALE;
            cur *= s;
            above *= s;
            total *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    out[0] = cur;
    total += cur;
    for v in out.iter_mut() {
        *v /= total;
    }
    out
}

/// `J_n(x)` for `n = 0..=nmax`, by Miller's backward recurrence normalized with
/// `J_0 + 2 sum J_{2k} = 1`.
pub fn bessel_j(x: f64, nmax: usize) -> Vec<f64> {
    assert!(x >= 0.0);
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let base = (nmax as f64).max(x);
    let mut start = (base + 30.0 * x.cbrt() + 40.0).ceil() as usize;
    start += start % 2;
    let mut above = 0.0f64;
    let mut cur = 1e-280f64;
    let mut norm = 0.0f64;
    for n in (1..=start).rev() {
        let below = (2.0 * n as f64 / x) * cur - above;
        if n <= nmax {
            out[n] = cur;
        }
        if n % 2 == 0 {
            norm += 2.0 * cur;
        }
        above = cur;
        cur = below;
        if cur.abs() > RESCALE {
            let s = 1.0 / RESCALE;
            cur *= s;
            above *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    out[0] = cur;
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Coefficients `a_k(n)` of the Hankel expansion
/// `H^(1)_n(z) ~ sqrt(2/(pi z)) e^{i(z - n pi/2 - pi/4)} sum_k i^k a_k(n) z^{-k}`.
pub fn hankel_coeffs(n: u32, kmax: usize) -> Vec<f64> {
    let mu = 4.0 * (n as f64).powi(2);
    let mut a = Vec::with_capacity(kmax + 1);
    a.push(1.0);
    for k in 1..=kmax {
        let odd = (2 * k - 1) as f64;
        let prev = a[k - 1];
        a.push(prev * (mu - odd * odd) / (k as f64 * 8.0));
    }
    a
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Generalized exponential integral `E_p(w) = int_1^inf e^{-w s} s^{-p} ds` for
/// `Re w >= 0`, `p > 1`.
pub fn expint(p: f64, w: Complex64) -> Complex64 {
    assert!(p > 1.0, "expint requires p > 1");
    if w.norm() == 0.0 {
        return Complex64::new(1.0 / (p - 1.0), 0.0);
    }
    if w.norm() >= 1.0 {
        expint_cf(p, w)
    } else {
        expint_series(p, w)
    }
}

fn expint_cf(p: f64, w: Complex64) -> Complex64 {
    let tiny = Complex64::new(1e-30, 0.0);
    let mut b = w + p;
    let mut c = Complex64::new(1.0, 0.0) / tiny;
    let mut d = Complex64::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 1..100_000 {
        let an = -(i as f64) * (p - 1.0 + i as f64);
        b += 2.0;
        d = Complex64::new(1.0, 0.0) / (d * an + b);
        c = b + Complex64::new(an, 0.0) / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h * (-w).exp()
}

fn expint_series(p: f64, w: Complex64) -> Complex64 {
    let n = p.round();
    let is_int = (p - n).abs() < 1e-14;
    if !is_int {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..200 {
            if k > 0 {
                term *= -w / k as f64;
            }
            let t = term / (1.0 - p + k as f64);
            sum += t;
            if t.norm() < 1e-18 * sum.norm().max(1e-300) && k > 2 {
                break;
            }
        }
        return w.powf(p - 1.0) * gamma(1.0 - p) - sum;
    }
    let n = n as i64;
    let nm1 = (n - 1) as i32;
    let mut psi = -EULER_GAMMA;
    for m in 1..n {
        psi += 1.0 / m as f64;
    }
    let mut fact = 1.0;
    for m in 1..n {
        fact *= m as f64;
    }
    let lead = (-w).powi(nm1) / fact * (psi - w.ln());
    let mut sum = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    for k in 0..200i64 {
        if k > 0 {
            term *= -w / k as f64;
        }
        if k != n - 1 {
            let t = term / (k - n + 1) as f64;
            sum += t;
            if k > n && t.norm() < 1e-18 * sum.norm().max(1e-300) {
                break;
            }
        }
    }
    lead - sum
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from the defining series / integrals evaluated independently.
    fn bessel_i_series(n: usize, x: f64) -> f64 {
        let mut term = (x / 2.0).powi(n as i32);
        for k in 1..=n {
            term /= k as f64;
        }
        let mut sum = 0.0;
        for k in 0..200 {
            sum += term;
            term *= (x / 2.0).powi(2) / ((k + 1) as f64 * (k + 1 + n) as f64);
        }
        sum
    }

    fn bessel_j_series(n: usize, x: f64) -> f64 {
        let mut term = (x / 2.0).powi(n as i32);
        for k in 1..=n {
            term /= k as f64;
        }
        let mut sum = 0.0;
        for k in 0..200 {
            sum += term;
            term *= -(x / 2.0).powi(2) / ((k + 1) as f64 * (k + 1 + n) as f64);
        }
        sum
    }

    #[test]
    fn modified_bessel_matches_series() {
        for &x in &[1e-8, 0.3, 2.0, 7.5, 20.0] {
            let v = scaled_bessel_i(x, 12);
            for n in 0..=12 {
                let r = (-x).exp() * bessel_i_series(n, x);
                assert!((v[n] - r).abs() <= 1e-14 * r.abs() + 1e-300, "n={n} x={x}: {} vs {}", v[n], r);
            }
        }
    }

    #[test]
    fn modified_bessel_large_argument() {
        // exp(-x) I_n(x) ~ (2 pi x)^{-1/2} (1 - (4n^2-1)/(8x) + ...)
        let x = 2.0e5;
        let v = scaled_bessel_i(x, 3);
        for n in 0..=3u32 {
            let a = hankel_coeffs(n, 6);
            let mut s = 0.0;
            for (k, ak) in a.iter().enumerate() {
                s += if k % 2 == 0 { 1.0 } else { -1.0 } * ak / x.powi(k as i32);
            }
            let r = s / (2.0 * std::f64::consts::PI * x).sqrt();
            assert!((v[n as usize] - r).abs() < 1e-12 * r, "n={n}");
        }
    }

    #[test]
    fn bessel_j_matches_series() {
        for &x in &[1e-6, 0.5, 3.0, 7.0, 11.0] {
            let v = bessel_j(x, 15);
            for n in 0..=15 {
                let r = bessel_j_series(n, x);
                assert!((v[n] - r).abs() <= 1e-12, "n={n} x={x}: {} vs {}", v[n], r);
            }
        }
    }

    #[test]
    fn bessel_j_large_argument_hankel() {
        let x = 3000.0;
        let v = bessel_j(x, 20);
        for n in [0u32, 5, 20] {
            let a = hankel_coeffs(n, 20);
            let omega = x - n as f64 * std::f64::consts::FRAC_PI_2 - std::f64::consts::FRAC_PI_4;
            let mut s = Complex64::new(0.0, 0.0);
            for (k, ak) in a.iter().enumerate() {
                s += Complex64::new(0.0, 1.0).powi(k as i32) * (ak / x.powi(k as i32));
            }
            let r = ((2.0 / (std::f64::consts::PI * x)).sqrt() * Complex64::from_polar(1.0, omega) * s).re;
            assert!((v[n as usize] - r).abs() < 1e-13, "n={n}: {} vs {r}", v[n as usize]);
        }
    }

    fn expint_quad(p: f64, w: Complex64) -> Complex64 {
        // s = 1/u^2 maps [1, inf) to (0, 1]; integrate with a fine midpoint rule
        let n = 400_000;
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let t = 1.0 / (u * u);
            s += (-w * t).exp() * t.powf(-p) * (2.0 / (u * u * u));
        }
        s / n as f64
    }

    #[test]
    fn expint_against_quadrature() {
        for &p in &[1.5, 2.5, 2.0, 3.0, 4.5] {
            for &w in &[
                Complex64::new(0.3, 0.0),
                Complex64::new(0.2, -0.5),
                Complex64::new(2.0, 3.0),
                Complex64::new(0.5, 4.0),
                Complex64::new(5.0, 0.0),
            ] {
                let a = expint(p, w);
                let b = expint_quad(p, w);
                assert!((a - b).norm() < 1e-7 * (1.0 + b.norm()), "p={p} w={w}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn expint_branches_agree_at_unit_modulus() {
        for &p in &[1.5, 2.0, 3.5] {
            for k in 0..8 {
                let w = Complex64::from_polar(1.0, -1.5 + k as f64 * 0.4);
                let a = expint_cf(p, w);
                let b = expint_series(p, w);
                assert!((a - b).norm() < 1e-12, "p={p} w={w}");
            }
        }
    }
}
