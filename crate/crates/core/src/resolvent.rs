//! Resolvent kernels `G_z(x) = int_{T^d} e^{2 pi i x.xi} (h0(xi) - z)^{-1} dxi`.
//!
//! For `Im z > 0` the default route is the time integral
//!
//! `G_z(x) = i int_0^inf e^{i(z - 2d)t} prod_j i^{x_j} J_{x_j}(2t) dt`,
//!
//! split at `T0`: Gauss-Legendre panels on `[0, T0]` and, beyond `T0`, the
//! Hankel expansion of each Bessel factor integrated term by term through
//! generalized exponential integrals. Many spectral parameters share the same
//! Bessel products, so a [`TimePlan`] evaluates them together as one matrix
//! product.
//!
//! [`resolvent_kernel_trapezoid`] is the torus route: the last coordinate is
//! integrated in closed form and the remaining `d - 1` by the shifted
//! trapezoid rule with a grid scaled to `1 / Im z`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::kernel::{resolvent_below_spectrum, KernelKind, KernelTable};
use crate::quadrature::{composite_gl, torus_nodes, QuadratureConfig};
use crate::special::{bessel_j, expint, hankel_coeffs};
use crate::sum::pairwise_sum_c;
use crate::symindex::SymIndex;

/// Which side of the real axis a boundary value is taken from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Side::Plus => '+',
            Side::Minus => '-',
        }
    }
}

/// `z = lambda + i side eps`; `eps = 0` denotes the boundary value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralParam {
    pub lambda: f64,
    pub eps: f64,
    pub side: Side,
}

impl SpectralParam {
    pub fn new(lambda: f64, eps: f64, side: Side) -> Result<Self> {
        if !(eps >= 0.0) || !lambda.is_finite() {
            return invalid(format!("spectral parameter needs eps >= 0 and finite lambda (got {lambda}, {eps})"));
        }
        Ok(SpectralParam { lambda, eps, side })
    }

    pub fn from_z(z: Complex64) -> Self {
        let side = if z.im < 0.0 { Side::Minus } else { Side::Plus };
        SpectralParam { lambda: z.re, eps: z.im.abs(), side }
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.lambda, self.side.sign() * self.eps)
    }
}

const GL_ORDER: usize = 16;
const HANKEL_TERMS: usize = 24;

/// Shared Bessel-product data for evaluating `G_z` on `[-L, L]^d` at many `z`.
pub struct TimePlan {
    d: usize,
    index: SymIndex,
    reps: Vec<Vec<i64>>,
    t0: f64,
    /// per representative: `2^d` sign patterns x `HANKEL_TERMS` coefficients,
    /// phase factors already applied
    tail_coeffs: Vec<Vec<Complex64>>,
    cfg: QuadratureConfig,
}

impl TimePlan {
    pub fn new(d: usize, radius: i64, cfg: &QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        if d < 1 || radius < 0 {
            return invalid("plan needs d >= 1 and radius >= 0");
        }
        let index = SymIndex::new(d, radius);
        let reps = index.representatives();
        let t0 = (0.5 * (radius * radius) as f64).max(30.0);
        let tail_coeffs = reps.par_iter().map(|a| hankel_product(a, t0)).collect();
        Ok(TimePlan { d, index, reps, t0, tail_coeffs, cfg: cfg.clone() })
    }

    pub fn radius(&self) -> i64 {
        self.index.radius()
    }

    /// Kernel tables for every `z` (all with `Im z > 0`).
    pub fn evaluate(&self, zs: &[Complex64]) -> Result<Vec<KernelTable>> {
        if zs.iter().any(|z| !(z.im > 0.0)) {
            return invalid("time-domain route needs Im z > 0");
        }
        self.evaluate_closed(zs)
    }

    /// Boundary values `G_{lambda + i0}` evaluated directly at `eps = 0`. The
    /// time integral converges absolutely for `d >= 3`.
    pub fn evaluate_boundary(&self, lambdas: &[f64]) -> Result<Vec<KernelTable>> {
        if self.d < 3 {
            return invalid("direct boundary values need d >= 3");
        }
        let zs: Vec<Complex64> = lambdas.iter().map(|&l| Complex64::new(l, 0.0)).collect();
        self.evaluate_closed(&zs)
    }

    fn evaluate_closed(&self, zs: &[Complex64]) -> Result<Vec<KernelTable>> {
        if zs.is_empty() {
            return Ok(Vec::new());
        }
        let d = self.d as f64;
        let omega_max = zs.iter().map(|z| (z.re - 2.0 * d).abs()).fold(0.0, f64::max) + 2.0 * d + 1.0;
        // fine rule: omega * h = 6 per 16-point panel, scaled by N/64
        let h_fine = 6.0 / omega_max * (64.0 / self.cfg.n as f64);
        let panels = ((self.t0 / h_fine).ceil() as usize).max(2);
        let panels = panels + panels % 2;
        let fine = self.numeric(zs, panels)?;
        let coarse = self.numeric(zs, panels / 2)?;
        let tails = self.tails(zs);
        let mut out = Vec::with_capacity(zs.len());
        for (iz, z) in zs.iter().enumerate() {
            let n = self.reps.len();
            let mut values = Vec::with_capacity(n);
            let mut errors = Vec::with_capacity(n);
            let mut unconverged = Vec::with_capacity(n);
            for e in 0..n {
                let v = fine[iz][e] + tails[iz][e].0;
                let err = (fine[iz][e] - coarse[iz][e]).norm() + tails[iz][e].1 + 1e-14 * v.norm();
                values.push(v);
                errors.push(err);
                unconverged.push(!(err <= self.cfg.target_rel * v.norm().max(1e-300)) || !v.re.is_finite());
            }
            let config = format!("time;d={};z={},{};L={};{}", self.d, z.re, z.im, self.radius(), self.cfg.canonical());
            out.push(KernelTable::from_parts(
                self.index.clone(),
                KernelKind::Resolvent { z: *z },
                values,
                errors,
                unconverged,
                config,
                self.cfg.n,
                self.cfg.r,
            ));
        }
        Ok(out)
    }

    /// `i * i^{|a|} int_0^{T0} e^{i(z-2d)t} prod_j J_{a_j}(2t) dt` for all z and reps.
    fn numeric(&self, zs: &[Complex64], panels: usize) -> Result<Vec<Vec<Complex64>>> {
        let (t, w) = composite_gl(0.0, self.t0, panels, GL_ORDER);
        let nmax = self.radius() as usize;
        let nz = zs.len();
        let ne = self.reps.len();
        let d2 = 2.0 * self.d as f64;
        // rows: Re and Im of the complex weights, one pair per z
        let mut acc = vec![0.0f64; 2 * nz * ne];
        const CHUNK: usize = 1024;
        let mut start = 0;
        while start < t.len() {
            let end = (start + CHUNK).min(t.len());
            let k = end - start;
            let jt: Vec<Vec<f64>> = t[start..end].par_iter().map(|&ti| bessel_j(2.0 * ti, nmax)).collect();
            let mut a = vec![0.0f64; 2 * nz * k];
            for (iz, z) in zs.iter().enumerate() {
                for i in 0..k {
                    let ti = t[start + i];
                    let c = Complex64::from_polar(w[start + i] * (-z.im * ti).exp(), (z.re - d2) * ti);
                    a[(2 * iz) * k + i] = c.re;
                    a[(2 * iz + 1) * k + i] = c.im;
                }
            }
            let mut b = vec![0.0f64; k * ne];
            b.par_chunks_mut(ne).enumerate().for_each(|(i, row)| {
                let jrow = &jt[i];
                for (e, rep) in self.reps.iter().enumerate() {
                    let mut p = 1.0;
                    for &aj in rep {
                        p *= jrow[aj as usize];
                    }
                    row[e] = p;
                }
            });
            unsafe {
                matrixmultiply::dgemm(
                    2 * nz,
                    k,
                    ne,
                    1.0,
                    a.as_ptr(),
                    k as isize,
                    1,
                    b.as_ptr(),
                    ne as isize,
                    1,
                    1.0,
                    acc.as_mut_ptr(),
                    ne as isize,
                    1,
                );
            }
            start = end;
        }
        let i = Complex64::new(0.0, 1.0);
        Ok((0..nz)
            .map(|iz| {
                (0..ne)
                    .map(|e| {
                        let m: i64 = self.reps[e].iter().sum();
                        let phase = i.powi((m % 4) as i32 + 1);
                        phase * Complex64::new(acc[(2 * iz) * ne + e], acc[(2 * iz + 1) * ne + e])
                    })
                    .collect()
            })
            .collect())
    }

    /// Hankel tail beyond `T0` for all z and reps, with a truncation estimate.
    fn tails(&self, zs: &[Complex64]) -> Vec<Vec<(Complex64, f64)>> {
        let d = self.d;
        let t0 = self.t0;
        zs.iter()
            .map(|z| {
                // E-integrals per sigma = sum of signs (index sigma + d over step 2) and power m
                let mut q = vec![Complex64::new(0.0, 0.0); (d + 1) * HANKEL_TERMS];
                for (k, sigma) in (0..=d).map(|k| (k, 2 * k as i64 - d as i64)).collect::<Vec<_>>() {
                    let omega = z.re - 2.0 * d as f64 + 2.0 * sigma as f64;
                    let w = Complex64::new(z.im, -omega) * t0;
                    for m in 0..HANKEL_TERMS {
                        let p = d as f64 / 2.0 + m as f64;
                        q[k * HANKEL_TERMS + m] = expint(p, w) * t0.powf(1.0 - p);
                    }
                }
                let pref = Complex64::new(0.0, 1.0) * PI.powf(-(d as f64) / 2.0) / 2f64.powi(d as i32);
                self.tail_coeffs
                    .iter()
                    .zip(&self.reps)
                    .map(|(coeffs, rep)| {
                        let m: i64 = rep.iter().sum();
                        let phase = Complex64::new(0.0, 1.0).powi((m % 4) as i32);
                        let mut total = Complex64::new(0.0, 0.0);
                        let mut last = 0.0;
                        for s in 0..(1usize << d) {
                            let k = (s.count_ones()) as usize; // number of + signs
                            let row = &coeffs[s * HANKEL_TERMS..(s + 1) * HANKEL_TERMS];
                            for mm in 0..HANKEL_TERMS {
                                total += row[mm] * q[k * HANKEL_TERMS + mm];
                            }
                            last += (row[HANKEL_TERMS - 1] * q[k * HANKEL_TERMS + HANKEL_TERMS - 1]).norm();
                        }
                        (pref * phase * total, last * pref.norm())
                    })
                    .collect()
            })
            .collect()
    }
}

/// Coefficients of `t^{-m}` in `prod_j S_{s_j}(a_j, t) e^{-i s_j (a_j pi/2 + pi/4)}`
/// for each sign pattern `s` (bit set = `+`), where
/// `S_+(a, t) = sum_k i^k a_k(a) (2t)^{-k}` and `S_- = conj(S_+)`.
fn hankel_product(a: &[i64], _t0: f64) -> Vec<Complex64> {
    let d = a.len();
    let mut out = vec![Complex64::new(0.0, 0.0); (1 << d) * HANKEL_TERMS];
    let series: Vec<[Vec<Complex64>; 2]> = a
        .iter()
        .map(|&aj| {
            let c = hankel_coeffs(aj as u32, HANKEL_TERMS);
            let plus: Vec<Complex64> = (0..HANKEL_TERMS)
                .map(|k| Complex64::new(0.0, 1.0).powi(k as i32) * (c[k] / 2f64.powi(k as i32)))
                .collect();
            let minus: Vec<Complex64> = plus.iter().map(|v| v.conj()).collect();
            [minus, plus]
        })
        .collect();
    for s in 0..(1usize << d) {
        let mut poly = vec![Complex64::new(0.0, 0.0); HANKEL_TERMS];
        poly[0] = Complex64::new(1.0, 0.0);
        let mut phase = 0.0;
        for j in 0..d {
            let plus = s >> j & 1 == 1;
            let sign = if plus { 1.0 } else { -1.0 };
            phase -= sign * (a[j] as f64 * PI / 2.0 + PI / 4.0);
            let f = &series[j][plus as usize];
            let mut next = vec![Complex64::new(0.0, 0.0); HANKEL_TERMS];
            for (i, p) in poly.iter().enumerate() {
                if p.norm() == 0.0 {
                    continue;
                }
                for k in 0..(HANKEL_TERMS - i) {
                    next[i + k] += p * f[k];
                }
            }
            poly = next;
        }
        let ph = Complex64::from_polar(1.0, phase);
        for m in 0..HANKEL_TERMS {
            out[s * HANKEL_TERMS + m] = poly[m] * ph;
        }
    }
    out
}

/// `G_z` on `[-L, L]^d`. Non-real `z` uses the time route (conjugated for
/// `Im z < 0`); real `z` outside `[0, 4d]` uses the heat route. Real `z` in
/// the spectrum is rejected here: boundary values need a side and the
/// epsilon ladder.
pub fn resolvent_kernel(z: Complex64, d: usize, radius: i64, cfg: &QuadratureConfig) -> Result<KernelTable> {
    if z.im > 0.0 {
        return Ok(TimePlan::new(d, radius, cfg)?.evaluate(&[z])?.remove(0));
    }
    if z.im < 0.0 {
        return Ok(resolvent_kernel(z.conj(), d, radius, cfg)?.conj());
    }
    let top = 4.0 * d as f64;
    if z.re < 0.0 {
        return resolvent_below_spectrum(d, z.re, radius, cfg);
    }
    if z.re > top {
        // u(x) -> (-1)^{|x|_1} u(x) maps h0 to 4d - h0
        let t = resolvent_below_spectrum(d, top - z.re, radius, cfg)?;
        let reps = t.sym_index().representatives();
        let values = reps
            .iter()
            .zip(t.rep_values())
            .map(|(a, v)| if a.iter().sum::<i64>() % 2 == 0 { -v } else { *v })
            .collect();
        let unconv = reps.iter().map(|a| t.is_unconverged(a)).collect();
        return Ok(KernelTable::from_parts(
            t.sym_index().clone(),
            KernelKind::Resolvent { z },
            values,
            t.rep_errors().to_vec(),
            unconv,
            format!("heat-resolvent-reflected;d={d};z={};L={radius};{}", z.re, cfg.canonical()),
            cfg.n,
            cfg.r,
        ));
    }
    invalid(format!("z = {z} lies on the spectrum [0, {top}]; a side tag and the epsilon ladder are required"))
}

/// Torus route for `G_z`, `Im z != 0`: trapezoid in `d - 1` coordinates with
/// the last coordinate integrated exactly,
/// `int_0^1 e^{2 pi i c t} / (A - 2 cos 2 pi t) dt = rho^{|c|} / (A - 2 rho)`,
/// `rho = (A - sqrt(A^2 - 4)) / 2`, `|rho| < 1`. The grid per axis is
/// `max(N, 64 / |Im z|)` rounded to even; the error estimate compares with
/// half that grid.
pub fn resolvent_kernel_trapezoid(z: Complex64, d: usize, radius: i64, cfg: &QuadratureConfig) -> Result<KernelTable> {
    cfg.validate()?;
    if z.im == 0.0 {
        return invalid("trapezoid route needs Im z != 0");
    }
    let index = SymIndex::new(d, radius);
    let reps = index.representatives();
    let mut n = (cfg.n as f64).max(64.0 / z.im.abs()).ceil() as usize;
    n += n % 2;
    let fine = trapezoid_table(z, d, radius, n, &reps);
    let coarse = trapezoid_table(z, d, radius, n / 2, &reps);
    let errors: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (f - c).norm() + 1e-14 * f.norm()).collect();
    let unconverged = errors.iter().zip(&fine).map(|(e, f)| !(*e <= cfg.target_rel * f.norm())).collect();
    let config = format!("trapezoid;d={d};z={},{};L={radius};{}", z.re, z.im, cfg.canonical());
    Ok(KernelTable::from_parts(index, KernelKind::Resolvent { z }, fine, errors, unconverged, config, n, cfg.r))
}

fn trapezoid_table(z: Complex64, d: usize, radius: i64, n: usize, reps: &[Vec<i64>]) -> Vec<Complex64> {
    let nodes = torus_nodes(n);
    let cosines: Vec<f64> = nodes.iter().map(|t| (2.0 * PI * t).cos()).collect();
    let dm = d - 1;
    let total = n.pow(dm as u32);
    let l = radius as usize;
    // For every node of the (d-1)-grid: rho and 1/(A - 2 rho); then
    // F_c(node) = rho^c / (A - 2 rho) for c = 0..=L.
    // Values are accumulated per representative with separable phases.
    let phase: Vec<Vec<Complex64>> = (0..=l)
        .map(|c| nodes.iter().map(|t| Complex64::from_polar(1.0, 2.0 * PI * c as f64 * t)).collect())
        .collect();
    let chunk = n.pow((dm.saturating_sub(1)) as u32).max(1);
    let partial: Vec<Vec<Complex64>> = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|blk| {
            let mut acc = vec![Complex64::new(0.0, 0.0); reps.len()];
            let mut idx = vec![0usize; dm];
            let mut pw = vec![Complex64::new(0.0, 0.0); l + 1];
            for flat in blk * chunk..((blk + 1) * chunk).min(total) {
                let mut f = flat;
                for k in (0..dm).rev() {
                    idx[k] = f % n;
                    f /= n;
                }
                let mut a = Complex64::new(2.0 * d as f64, 0.0) - z;
                for &k in &idx {
                    a -= 2.0 * cosines[k];
                }
                let s = (a * a - 4.0).sqrt();
                let mut rho = (a - s) / 2.0;
                if rho.norm() > 1.0 {
                    rho = (a + s) / 2.0;
                }
                let base = Complex64::new(1.0, 0.0) / (a - 2.0 * rho);
                pw[0] = base;
                for c in 1..=l {
                    pw[c] = pw[c - 1] * rho;
                }
                for (e, rep) in reps.iter().enumerate() {
                    // representative is sorted; put the largest entry on the
                    // closed-form axis, the rest on grid axes
                    let mut v = pw[rep[d - 1] as usize];
                    for (k, &ik) in idx.iter().enumerate() {
                        v *= phase[rep[k] as usize][ik];
                    }
                    acc[e] += v;
                }
            }
            acc
        })
        .collect();
    let scale = 1.0 / total as f64;
    (0..reps.len())
        .map(|e| {
            let col: Vec<Complex64> = partial.iter().map(|p| p[e]).collect();
            pairwise_sum_c(&col) * scale
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kernel_kl;

    #[test]
    fn conjugation_symmetry() {
        let cfg = QuadratureConfig::default();
        let z = Complex64::new(3.0, 0.4);
        let a = resolvent_kernel(z, 3, 2, &cfg).unwrap();
        let b = resolvent_kernel(z.conj(), 3, 2, &cfg).unwrap();
        for (u, v) in a.rep_values().iter().zip(b.rep_values()) {
            assert_eq!(*u, v.conj());
        }
    }

    #[test]
    fn below_spectrum_real_and_bounded() {
        let t = resolvent_kernel(Complex64::new(-1.0, 0.0), 3, 2, &QuadratureConfig::default()).unwrap();
        let g0 = t.value(&[0, 0, 0]).unwrap();
        assert!(g0.im == 0.0 && g0.re > 1.0 / 13.0 && g0.re < 1.0);
    }

    #[test]
    fn time_route_matches_heat_route_off_axis() {
        // z = -1 + i 1e-3 is close to the real heat-route value
        let cfg = QuadratureConfig::default();
        let a = resolvent_kernel(Complex64::new(-1.0, 0.0), 3, 4, &cfg).unwrap();
        let b = resolvent_kernel(Complex64::new(-1.0, 1e-9), 3, 4, &cfg).unwrap();
        for (u, v) in a.rep_values().iter().zip(b.rep_values()) {
            assert!((u - v).norm() < 1e-8, "{u} vs {v}");
        }
    }

    #[test]
    fn time_and_trapezoid_routes_agree() {
        let cfg = QuadratureConfig::default();
        for z in [Complex64::new(6.0, 0.1), Complex64::new(2.0, 0.5), Complex64::new(13.0, 0.3)] {
            let a = resolvent_kernel(z, 3, 3, &cfg).unwrap();
            let b = resolvent_kernel_trapezoid(z, 3, 3, &cfg).unwrap();
            for ((u, v), e) in a.rep_values().iter().zip(b.rep_values()).zip(b.rep_errors()) {
                assert!((u - v).norm() < 1e-9 + 10.0 * e, "z={z}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn approaches_k2_at_zero() {
        // G_{i eps}(0) -> K_2(0) as eps -> 0 with O(sqrt eps) deviation
        let cfg = QuadratureConfig::default();
        let k = kernel_kl(3, 2.0, 1, &cfg).unwrap().real(&[0, 0, 0]).unwrap();
        let g = resolvent_kernel(Complex64::new(0.0, 1e-6), 3, 1, &cfg).unwrap().value(&[0, 0, 0]).unwrap();
        assert!((g.re - k).abs() < 1e-3 && g.im > 0.0, "{g} vs {k}");
    }

    #[test]
    fn rejects_real_z_in_spectrum() {
        assert!(resolvent_kernel(Complex64::new(4.0, 0.0), 3, 1, &QuadratureConfig::default()).is_err());
        assert!(resolvent_kernel_trapezoid(Complex64::new(4.0, 0.0), 3, 1, &QuadratureConfig::default()).is_err());
    }
}
