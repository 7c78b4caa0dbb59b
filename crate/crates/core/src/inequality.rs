//! Brute-force checks of lattice convolution inequalities, kernel decay
//! bounds and weighted (Hardy / HLS type) bounds for `H0^{-1}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::japanese;
use crate::kernel::kernel_kl;
use crate::ops::{fft_size, operator_norm_estimate, BoxConvolution, BoxOperator, ClosureOp, CubeFft, NormEstimate};
use crate::quadrature::{gauss_legendre, QuadratureConfig};
use crate::special::gamma;
use crate::sum::pairwise_sum;
use crate::symbol::h0;

/// Partial lattice sum over the cube `|y|_inf <= T` with a tail majorant and
/// an asymptotic tail estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvolutionSum {
    pub partial: f64,
    /// Certified: `partial <= I <= partial + tail_bound`.
    pub tail_bound: f64,
    /// Exterior integral of `|y|^{-k-l}` over the cube complement.
    pub tail_estimate: f64,
    pub tail_radius: i64,
}

impl ConvolutionSum {
    /// Best estimate `partial + tail_estimate`, clamped to the certified
    /// interval.
    pub fn value(&self) -> f64 {
        self.partial + self.tail_estimate.min(self.tail_bound)
    }
}

fn unit_sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// `int_{|u|_inf > 1} |u|^{-m} du = 2d/(m-d) int_{[-1,1]^{d-1}} (1+|w|^2)^{-m/2} dw`.
fn cube_exterior_constant(m: f64, d: usize) -> f64 {
    let (t, w) = gauss_legendre(24);
    let face = if d == 1 {
        1.0
    } else {
        let n = t.len();
        let mut acc = Vec::with_capacity(n.pow((d - 1) as u32));
        let mut idx = vec![0usize; d - 1];
        loop {
            let r2: f64 = idx.iter().map(|&i| t[i] * t[i]).sum();
            let wt: f64 = idx.iter().map(|&i| w[i]).product();
            acc.push(wt * (1.0 + r2).powf(-m / 2.0));
            let mut j = 0;
            while j < d - 1 {
                idx[j] += 1;
                if idx[j] < n {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == d - 1 {
                break;
            }
        }
        pairwise_sum(&acc)
    };
    2.0 * d as f64 / (m - d as f64) * face
}

/// `I(x) = sum_y <x - y>^{-k} <y>^{-l}` over `|y|_inf <= tail_radius`, plus
/// the tail majorant
/// `(1 - |x|/(T+1))^{-k} (1 - sqrt(d)/(2T+1))^{-m} |S^{d-1}| (T+1/2)^{d-m} / (m-d)`
/// with `m = k + l`, from comparing each lattice term with the integral over
/// its unit cell.
pub fn convolution_sum_i(x: &[i64], k: f64, l: f64, tail_radius: i64) -> Result<ConvolutionSum> {
    let d = x.len();
    if d == 0 {
        return invalid("empty site");
    }
    let m = k + l;
    if !(m > d as f64) {
        return invalid(format!("non-summable: k + l = {m} <= d = {d}"));
    }
    if k < 0.0 || l < 0.0 {
        return invalid("k and l must be nonnegative");
    }
    let xn = x.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    let t = tail_radius;
    if (t as f64) < 4.0 * xn || t < 1 {
        return invalid("tail radius must be at least 4|x| and positive");
    }
    let partial = cube_sum(x, k, l, t);
    let tf = t as f64;
    let a = xn / (tf + 1.0);
    let cell = 1.0 - (d as f64).sqrt() / (2.0 * tf + 1.0);
    if cell <= 0.0 {
        return invalid("tail radius too small for the cell comparison");
    }
    let tail_bound = (1.0 - a).powf(-k) * cell.powf(-m) * unit_sphere_area(d) * (tf + 0.5).powf(d as f64 - m)
        / (m - d as f64);
    let tail_estimate = cube_exterior_constant(m, d) * (tf + 0.5).powf(d as f64 - m);
    Ok(ConvolutionSum { partial, tail_bound, tail_estimate, tail_radius: t })
}

fn cube_sum(x: &[i64], k: f64, l: f64, t: i64) -> f64 {
    let d = x.len();
    let span = t + x.iter().map(|c| c.abs()).max().unwrap_or(0);
    let max_sq = d as i64 * span * span;
    // <z>^{-k} depends on |z|^2 only
    let tabulate = max_sq <= 20_000_000;
    let (tk, tl) = if tabulate {
        let tk: Vec<f64> = (0..=max_sq).map(|s| (1.0 + s as f64).powf(-k / 2.0)).collect();
        let tl: Vec<f64> = (0..=(d as i64 * t * t)).map(|s| (1.0 + s as f64).powf(-l / 2.0)).collect();
        (tk, tl)
    } else {
        (Vec::new(), Vec::new())
    };
    let wk = |s: i64| if tabulate { tk[s as usize] } else { (1.0 + s as f64).powf(-k / 2.0) };
    let wl = |s: i64| if tabulate { tl[s as usize] } else { (1.0 + s as f64).powf(-l / 2.0) };
    let side = 2 * t + 1;
    let slices: Vec<f64> = (0..side)
        .into_par_iter()
        .map(|i0| {
            let y0 = i0 - t;
            let mut terms = Vec::new();
            let mut y = vec![0i64; d];
            y[0] = y0;
            let inner = side.pow((d - 1) as u32);
            for flat in 0..inner {
                let mut f = flat;
                for j in (1..d).rev() {
                    y[j] = f % side - t;
                    f /= side;
                }
                let mut sy = 0i64;
                let mut sxy = 0i64;
                for j in 0..d {
                    sy += y[j] * y[j];
                    let z = x[j] - y[j];
                    sxy += z * z;
                }
                terms.push(wk(sxy) * wl(sy));
            }
            pairwise_sum(&terms)
        })
        .collect();
    pairwise_sum(&slices)
}

/// Case split of the convolution bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// `k, l < d < k + l`: envelope `<x>^{d-k-l}`.
    I,
    /// `0 < k < d = l`: envelope `<x>^{delta-k}`.
    II,
    /// `0 < k < d < l`: envelope `<x>^{-k}`.
    III,
    /// `k = d < l`: envelope `<x>^{-d}`.
    IV,
}

impl Regime {
    pub fn classify(k: f64, l: f64, d: usize) -> Result<Regime> {
        let df = d as f64;
        let r = if k < df && l < df && k + l > df {
            Regime::I
        } else if k > 0.0 && k < df && l == df {
            Regime::II
        } else if k > 0.0 && k < df && l > df {
            Regime::III
        } else if k == df && l > df {
            Regime::IV
        } else {
            return invalid(format!("(k, l, d) = ({k}, {l}, {d}) lies in no regime"));
        };
        Ok(r)
    }

    pub fn tag(self) -> &'static str {
        match self {
            Regime::I => "i",
            Regime::II => "ii",
            Regime::III => "iii",
            Regime::IV => "iv",
        }
    }

    pub fn exponent(self, k: f64, l: f64, d: usize, delta: f64) -> f64 {
        match self {
            Regime::I => d as f64 - k - l,
            Regime::II => delta - k,
            Regime::III => -k,
            Regime::IV => -(d as f64),
        }
    }
}

/// Growth above which a running sup counts as unstable.
pub const GROWTH_LIMIT: f64 = 0.10;

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeCheck {
    pub k: f64,
    pub l: f64,
    pub d: usize,
    pub regime: Regime,
    pub delta: f64,
    pub exponent: f64,
    pub r_max: i64,
    /// `(site, I(x), I(x) / <x>^exponent)` in increasing `|x|`.
    pub samples: Vec<(Vec<i64>, f64, f64)>,
    pub sup_ratio: f64,
    /// `S(R) / S(R/2) - 1` for the running sup `S(r) = sup_{|x| <= r}`.
    pub growth: f64,
    pub stable: bool,
}

impl RegimeCheck {
    /// Running sup of the ratio over sampled `|x| <= r`.
    pub fn running_sup(&self, r: f64) -> f64 {
        self.samples
            .iter()
            .filter(|(x, _, _)| x.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt() <= r + 1e-9)
            .map(|s| s.2)
            .fold(0.0, f64::max)
    }

    pub fn growth_between(&self, r_lo: f64, r_hi: f64) -> f64 {
        self.running_sup(r_hi) / self.running_sup(r_lo) - 1.0
    }
}

/// Sample sites on the first axis and the main diagonal at roughly
/// geometric radii up to `r_max`, plus the origin.
pub fn regime_sample_sites(d: usize, r_max: i64) -> Vec<Vec<i64>> {
    let mut radii: Vec<i64> = vec![0];
    let mut r = 1.0f64;
    while r <= r_max as f64 + 1e-9 {
        let ri = r.round() as i64;
        if radii.last() != Some(&ri) {
            radii.push(ri);
        }
        r *= 2f64.sqrt();
    }
    if radii.last() != Some(&r_max) {
        radii.push(r_max);
    }
    let mut sites = Vec::new();
    for &r in &radii {
        let mut a = vec![0i64; d];
        a[0] = r;
        sites.push(a);
        if d > 1 && r > 0 {
            let c = (r as f64 / (d as f64).sqrt()).round() as i64;
            if c > 0 {
                sites.push(vec![c; d]);
            }
        }
    }
    sites.sort_by(|a, b| {
        let na: i64 = a.iter().map(|c| c * c).sum();
        let nb: i64 = b.iter().map(|c| c * c).sum();
        na.cmp(&nb).then(a.cmp(b))
    });
    sites.dedup();
    sites
}

/// Ratios `I(x) / envelope(x)` on [`regime_sample_sites`] with tail radius
/// `max(4|x|, 32)`; stable when the running sup grows by at most
/// [`GROWTH_LIMIT`] from `R/2` to `R`. `delta` enters regime (ii) only.
pub fn intcal_regime_check(k: f64, l: f64, d: usize, r_max: i64, delta: f64) -> Result<RegimeCheck> {
    let regime = Regime::classify(k, l, d)?;
    if r_max < 2 {
        return invalid("need R >= 2");
    }
    let exponent = regime.exponent(k, l, d, delta);
    let sites = regime_sample_sites(d, r_max);
    let mut samples = Vec::with_capacity(sites.len());
    for x in sites {
        let xn = x.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
        let t = ((4.0 * xn).ceil() as i64).max(32);
        let s = convolution_sum_i(&x, k, l, t)?;
        let v = s.value();
        let ratio = v / japanese(&x).powf(exponent);
        samples.push((x, v, ratio));
    }
    let mut check =
        RegimeCheck { k, l, d, regime, delta, exponent, r_max, samples, sup_ratio: 0.0, growth: 0.0, stable: false };
    check.sup_ratio = check.running_sup(r_max as f64);
    check.growth = check.growth_between(r_max as f64 / 2.0, r_max as f64);
    check.stable = check.growth <= GROWTH_LIMIT;
    Ok(check)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelBoundCheck {
    pub l: f64,
    pub d: usize,
    pub radius: i64,
    /// `sup_{1 <= |x| <= R} |K_l(x)| <x>^{d-l}`.
    pub sup: f64,
    /// Maxima of the weighted kernel on `2^j <= |x| < 2^{j+1}`.
    pub shell_max: Vec<f64>,
    /// `max / min` of the shell maxima.
    pub dyadic_ratio: f64,
    pub max_error: f64,
    pub kernel_fingerprint: String,
}

pub fn kernel_bound_check(l: f64, d: usize, radius: i64, cfg: &QuadratureConfig) -> Result<KernelBoundCheck> {
    if !(l > 0.0 && l < d as f64) {
        return invalid("need 0 < l < d");
    }
    let table = kernel_kl(d, l, radius, cfg)?;
    let mut shells: Vec<f64> = Vec::new();
    for a in table.sym_index().representatives() {
        let r = a.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
        if r < 1.0 || r > radius as f64 {
            continue;
        }
        let w = table.real(&a)?.abs() * japanese(&a).powf(d as f64 - l);
        let j = r.log2().floor() as usize;
        if shells.len() <= j {
            shells.resize(j + 1, 0.0);
        }
        shells[j] = shells[j].max(w);
    }
    let sup = shells.iter().copied().fold(0.0, f64::max);
    let min = shells.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(KernelBoundCheck {
        l,
        d,
        radius,
        sup,
        dyadic_ratio: sup / min,
        shell_max: shells,
        max_error: table.max_error(),
        kernel_fingerprint: table.fingerprint(),
    })
}

fn check_hls_params(alpha: f64, beta: f64, d: usize) -> Result<()> {
    if d < 3 {
        return invalid("weighted H0^{-1} bounds need d >= 3");
    }
    if !(alpha + beta >= 2.0) {
        return invalid("need alpha + beta >= 2");
    }
    let floor = if d == 3 { 0.5 } else { 0.0 };
    if !(alpha > floor && beta > floor) {
        return invalid(format!("need alpha, beta > {floor} in d = {d}"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct HlsReport {
    pub alpha: f64,
    pub beta: f64,
    pub d: usize,
    pub boxes: Vec<i64>,
    pub norms: Vec<NormEstimate>,
    /// `norm(L_{k+1}) / norm(L_k)`.
    pub ratios: Vec<f64>,
    pub kernel_error: f64,
    pub kernel_fingerprint: String,
}

/// `||<x>^{-alpha} H0^{-1} <x>^{-beta}||` on each box, with `H0^{-1}` the
/// convolution by `K_2`.
pub fn hls_hardy_check(
    alpha: f64,
    beta: f64,
    d: usize,
    boxes: &[i64],
    cfg: &QuadratureConfig,
    max_iters: usize,
) -> Result<HlsReport> {
    check_hls_params(alpha, beta, d)?;
    if boxes.is_empty() || !boxes.windows(2).all(|w| w[0] < w[1]) || boxes[0] < 1 {
        return invalid("boxes must be positive and strictly increasing");
    }
    let table = kernel_kl(d, 2.0, 2 * boxes[boxes.len() - 1], cfg)?;
    let norms = boxes
        .iter()
        .map(|&l| Ok(operator_norm_estimate(&BoxConvolution::new(&table, l)?.with_weights(alpha, beta), max_iters)))
        .collect::<Result<Vec<_>>>()?;
    let ratios = norms.windows(2).map(|w| w[1].value / w[0].value).collect();
    Ok(HlsReport {
        alpha,
        beta,
        d,
        boxes: boxes.to_vec(),
        norms,
        ratios,
        kernel_error: table.max_error(),
        kernel_fingerprint: table.fingerprint(),
    })
}

/// `int_{T^3} dxi / h0(xi)` from Watson's closed form for
/// `int (1 - (cos a + cos b + cos c)/3)^{-1}`, which is six times larger.
pub fn watson_constant() -> f64 {
    let w3 = 6f64.sqrt() / (32.0 * PI.powi(3))
        * gamma(1.0 / 24.0)
        * gamma(5.0 / 24.0)
        * gamma(7.0 / 24.0)
        * gamma(11.0 / 24.0);
    w3 / 6.0
}

/// Fourier-side estimate of `||<x>^{-alpha} H0^{-1} <x>^{-beta}||` on
/// `[-L, L]^3`: the multiplier `1/h0` sampled on the half-shifted grid
/// `((k + 1/2)/M)`, whose kernel is an alternating image sum, with the
/// constant image term at the origin replaced by Watson's integral.
pub fn hardy_fourier_oracle(alpha: f64, beta: f64, radius: i64, m: usize, max_iters: usize) -> Result<NormEstimate> {
    check_hls_params(alpha, beta, 3)?;
    let n = (2 * radius + 1) as usize;
    if m < 2 * n {
        return invalid("grid too small for the box");
    }
    let m = fft_size(m);
    let d = 3;
    let fft = CubeFft::new(d, m);
    let total = m.pow(3);
    let shift = |k: usize| (k as f64 + 0.5) / m as f64;
    let inv_symbol: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|i| {
            let xi = [shift(i / (m * m)), shift((i / m) % m), shift(i % m)];
            1.0 / h0(&xi)
        })
        .collect();
    let mean = pairwise_sum(&inv_symbol) / total as f64;
    let correction = watson_constant() - mean;
    let sites: Vec<[i64; 3]> = (0..n.pow(3))
        .map(|i| {
            let c = |v: usize| v as i64 - radius;
            [c(i / (n * n)), c((i / n) % n), c(i % n)]
        })
        .collect();
    let weight = |x: &[i64; 3], p: f64| japanese(x).powf(-p);
    let left: Vec<f64> = sites.iter().map(|x| weight(x, alpha)).collect();
    let right: Vec<f64> = sites.iter().map(|x| weight(x, beta)).collect();
    let slot = |x: &[i64; 3]| {
        let w = |c: i64| c.rem_euclid(m as i64) as usize;
        (w(x[0]) * m + w(x[1])) * m + w(x[2])
    };
    let phase = |x: &[i64; 3], sign: f64| {
        Complex64::from_polar(1.0, sign * PI * (x[0] + x[1] + x[2]) as f64 / m as f64)
    };
    let apply = |u: &[Complex64], pre: &[f64], post: &[f64]| -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        let mut sum = Complex64::new(0.0, 0.0);
        for (i, x) in sites.iter().enumerate() {
            let g = u[i] * pre[i];
            sum += g;
            buf[slot(x)] = g * phase(x, -1.0);
        }
        fft.transform(&mut buf, false);
        buf.par_iter_mut().zip(&inv_symbol).for_each(|(b, s)| *b *= s);
        fft.transform(&mut buf, true);
        let scale = 1.0 / total as f64;
        sites
            .iter()
            .enumerate()
            .map(|(i, x)| (buf[slot(x)] * phase(x, 1.0) * scale + sum * correction) * post[i])
            .collect()
    };
    let op = ClosureOp {
        n: sites.len(),
        forward: |u: &[Complex64]| apply(u, &right, &left),
        adjoint: |u: &[Complex64]| apply(u, &left, &right),
    };
    if op.len() == 0 {
        return Err(Error::InvalidParameter("empty box".into()));
    }
    Ok(operator_norm_estimate(&op, max_iters))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_closed_form() {
        let s = convolution_sum_i(&[0], 1.0, 1.0, 2000).unwrap();
        let exact = PI / PI.tanh();
        assert!(s.partial <= exact && exact <= s.partial + s.tail_bound, "{s:?}");
        assert!((s.value() - exact).abs() < 1e-6);
    }

    #[test]
    fn basic_properties() {
        assert!(convolution_sum_i(&[0, 0, 0], 1.0, 1.0, 8).is_err());
        assert!(convolution_sum_i(&[4, 0, 0], 2.0, 2.0, 8).is_err());
        let s = convolution_sum_i(&[0, 0, 0], 2.0, 4.0, 8).unwrap();
        assert!(s.partial >= 1.0);
        let a = convolution_sum_i(&[2, -1, 3], 2.0, 3.0, 16).unwrap();
        let b = convolution_sum_i(&[-2, 1, -3], 2.0, 3.0, 16).unwrap();
        assert!((a.partial - b.partial).abs() <= 1e-12 * a.partial);
    }

    #[test]
    fn cube_constant_matches_sphere_in_one_dimension() {
        assert!((cube_exterior_constant(3.0, 1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn regime_classification() {
        assert_eq!(Regime::classify(2.0, 2.0, 3).unwrap(), Regime::I);
        assert_eq!(Regime::classify(2.0, 3.0, 3).unwrap(), Regime::II);
        assert_eq!(Regime::classify(2.0, 4.0, 3).unwrap(), Regime::III);
        assert_eq!(Regime::classify(3.0, 4.0, 3).unwrap(), Regime::IV);
        assert!(Regime::classify(1.0, 1.0, 3).is_err());
        assert!(Regime::classify(3.0, 3.0, 3).is_err());
    }

    #[test]
    fn watson_value() {
        assert!((watson_constant() - 0.252_731_009_858_663).abs() < 1e-12);
    }

    #[test]
    fn fourier_oracle_matches_kernel_route() {
        let cfg = QuadratureConfig::default();
        let direct = hls_hardy_check(1.0, 1.0, 3, &[4], &cfg, 60).unwrap().norms[0].value;
        let oracle = hardy_fourier_oracle(1.0, 1.0, 4, 64, 60).unwrap().value;
        assert!((direct - oracle).abs() <= 1e-3 * direct, "{direct} {oracle}");
    }

    #[test]
    fn regime_window_growth() {
        let c = intcal_regime_check(3.0, 4.0, 2, 16, 0.1);
        assert!(c.is_err());
        let c = intcal_regime_check(1.5, 2.0, 2, 16, 0.1).unwrap();
        assert_eq!(c.regime, Regime::II);
        assert!(c.running_sup(16.0) >= c.running_sup(8.0));
        assert_eq!(c.growth, c.growth_between(8.0, 16.0));
    }

    #[test]
    fn hls_parameter_ranges() {
        let cfg = QuadratureConfig::default();
        assert!(hls_hardy_check(0.5, 1.5, 3, &[4], &cfg, 30).is_err());
        assert!(hls_hardy_check(0.9, 0.9, 3, &[4], &cfg, 30).is_err());
        assert!(hls_hardy_check(1.0, 1.0, 2, &[4], &cfg, 30).is_err());
        assert!(hls_hardy_check(1.0, 1.0, 3, &[4], &cfg, 30).is_ok());
    }
}
