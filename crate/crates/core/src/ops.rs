//! Operations on box-truncated lattice functions: weighted norms, direct and
//! FFT-based convolutions, Lorentz quasi-norms and operator-norm estimates.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::grid::{japanese, GridFn};
use crate::kernel::KernelTable;
use crate::sum::{pairwise_sum, pairwise_sum_c};

/// `(sum_x <x>^{2s} |u(x)|^2)^{1/2}` over the box of `u`.
pub fn weighted_norm(u: &GridFn, s: f64) -> f64 {
    let terms: Vec<f64> = (0..u.len())
        .into_par_iter()
        .map(|i| {
            let x = u.site(i);
            japanese(&x).powf(2.0 * s) * u.values()[i].norm_sqr()
        })
        .collect();
    pairwise_sum(&terms).sqrt()
}

/// Exact direct sum `sum_{y in supp f} K(x - y) f(y)` for `|x|_inf <= out_radius`.
pub fn convolve(k: &KernelTable, f: &GridFn, out_radius: i64) -> Result<GridFn> {
    if k.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: k.dim(), got: f.dim() });
    }
    if out_radius < 0 {
        return invalid("output radius must be nonnegative");
    }
    let support = f.support();
    for (y, _) in &support {
        let (j, &yj) = y.iter().enumerate().max_by_key(|(_, c)| c.abs()).expect("d >= 1");
        if out_radius + yj.abs() > k.radius() {
            let mut offset = vec![0i64; y.len()];
            offset[j] = if yj > 0 { -(out_radius + yj) } else { out_radius - yj };
            return Err(Error::MissingOffset { offset });
        }
    }
    let d = f.dim();
    Ok(GridFn::from_fn(d, out_radius, |x| {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut off = vec![0i64; d];
        for (y, fy) in &support {
            for j in 0..d {
                off[j] = x[j] - y[j];
            }
            acc += k.get(&off).expect("coverage checked") * fy;
        }
        acc
    }))
}

/// Lorentz quasi-norm `p^{1/r} (int_0^inf m(a)^{r/p} a^{r-1} da)^{1/r}` with
/// respect to counting measure, evaluated exactly on the step distribution
/// function. `r = inf` gives `sup_a a m(a)^{1/p}`.
pub fn lorentz_quasinorm(u: &GridFn, p: f64, r: f64) -> Result<f64> {
    if !(p >= 1.0) || !(r >= 1.0) {
        return invalid("Lorentz exponents must satisfy p, r >= 1");
    }
    if p.is_infinite() && r.is_finite() {
        return invalid("Lorentz space with p = inf requires r = inf");
    }
    let mut a: Vec<f64> = u.values().iter().map(|v| v.norm()).filter(|&v| v > 0.0).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    if a.is_empty() {
        return Ok(0.0);
    }
    if r.is_infinite() {
        let exp = if p.is_infinite() { 0.0 } else { 1.0 / p };
        return Ok(a.iter().enumerate().map(|(k, v)| v * ((k + 1) as f64).powf(exp)).fold(0.0, f64::max));
    }
    let terms: Vec<f64> = (0..a.len())
        .map(|k| {
            let next = a.get(k + 1).map_or(0.0, |v| v.powf(r));
            ((k + 1) as f64).powf(r / p) * (a[k].powf(r) - next) / r
        })
        .collect();
    Ok(p.powf(1.0 / r) * pairwise_sum(&terms).powf(1.0 / r))
}

/// A linear map on a box, given by its action and the action of its adjoint
/// on dense value vectors in lexicographic site order.
pub trait BoxOperator: Sync {
    fn len(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
    fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64>;
}

/// Operator from a pair of closures.
pub struct ClosureOp<F, G> {
    pub n: usize,
    pub forward: F,
    pub adjoint: G,
}

impl<F, G> BoxOperator for ClosureOp<F, G>
where
    F: Fn(&[Complex64]) -> Vec<Complex64> + Sync,
    G: Fn(&[Complex64]) -> Vec<Complex64> + Sync,
{
    fn len(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (self.forward)(x)
    }
    fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        (self.adjoint)(x)
    }
}

/// Largest singular value estimate with its convergence data.
#[derive(Clone, Debug, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    /// `||A*A v - theta v|| / theta` for the returned Ritz vector.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

const NORM_TOL: f64 = 1e-10;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let t: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x.conj() * y).collect();
    pairwise_sum_c(&t)
}

fn norm(a: &[Complex64]) -> f64 {
    let t: Vec<f64> = a.iter().map(|x| x.norm_sqr()).collect();
    pairwise_sum(&t).sqrt()
}

fn normal_op(op: &dyn BoxOperator, v: &[Complex64]) -> Vec<Complex64> {
    op.apply_adjoint(&op.apply(v))
}

/// Plain power iteration on `A*A` from the normalized all-ones vector,
/// stopping when the Rayleigh quotient changes by less than `1e-10`
/// relative.
pub fn power_norm_estimate(op: &dyn BoxOperator, max_iters: usize) -> NormEstimate {
    let n = op.len();
    let mut v = vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n];
    let mut theta = 0.0;
    let mut w = normal_op(op, &v);
    for it in 1..=max_iters {
        let next = dot(&v, &w).re;
        let wn = norm(&w);
        let residual = if next > 0.0 {
            let r: Vec<Complex64> = w.iter().zip(&v).map(|(a, b)| a - b * next).collect();
            norm(&r) / next
        } else {
            0.0
        };
        if wn == 0.0 {
            return NormEstimate { value: 0.0, residual: 0.0, iterations: it, converged: true };
        }
        let done = (next - theta).abs() <= NORM_TOL * next;
        theta = next;
        if done {
            return NormEstimate { value: theta.sqrt(), residual, iterations: it, converged: true };
        }
        v = w.iter().map(|x| x / wn).collect();
        w = normal_op(op, &v);
    }
    let residual = {
        let r: Vec<Complex64> = w.iter().zip(&v).map(|(a, b)| a - b * theta).collect();
        norm(&r) / theta.max(f64::MIN_POSITIVE)
    };
    NormEstimate { value: theta.max(0.0).sqrt(), residual, iterations: max_iters, converged: false }
}

/// Largest singular value of `A` by Lanczos on `A*A` with full
/// reorthogonalization, started from the normalized all-ones vector. The
/// Krylov space contains every power iterate, so the estimate is never below
/// the power-iteration Rayleigh quotient after the same number of products.
/// Stops when the top Ritz value changes by less than `1e-10` relative.
pub fn operator_norm_estimate(op: &dyn BoxOperator, max_iters: usize) -> NormEstimate {
    let n = op.len();
    let mut basis: Vec<Vec<Complex64>> = vec![vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n]];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut theta_prev = 0.0;
    let max_iters = max_iters.min(n).max(1);
    for it in 1..=max_iters {
        let v = basis.last().expect("nonempty");
        let mut w = normal_op(op, v);
        let a = dot(v, &w).re;
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= qi * c);
            }
        }
        let b = norm(&w);
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imax, theta) =
            eig.eigenvalues.iter().enumerate().fold((0, f64::MIN), |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc });
        let last = eig.eigenvectors[(k - 1, imax)].abs();
        let residual = if theta > 0.0 { b * last / theta } else { 0.0 };
        let stalled = b <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE);
        if theta <= 0.0 && stalled {
            return NormEstimate { value: 0.0, residual: 0.0, iterations: it, converged: true };
        }
        if (theta - theta_prev).abs() <= NORM_TOL * theta || stalled || residual <= NORM_TOL {
            return NormEstimate { value: theta.sqrt(), residual, iterations: it, converged: true };
        }
        theta_prev = theta;
        if it == max_iters {
            return NormEstimate { value: theta.sqrt(), residual, iterations: it, converged: false };
        }
        beta.push(b);
        basis.push(w.into_iter().map(|x| x / b).collect());
    }
    unreachable!("loop returns")
}

/// Multi-dimensional complex FFT on a cube of side `m`.
pub(crate) struct CubeFft {
    d: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl CubeFft {
    pub(crate) fn new(d: usize, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        CubeFft { d, m, forward: planner.plan_fft_forward(m), inverse: planner.plan_fft_inverse(m) }
    }

    /// Unnormalized in both directions.
    pub(crate) fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let fft = if inverse { &self.inverse } else { &self.forward };
        let m = self.m;
        let total = data.len();
        let mut lines = vec![Complex64::new(0.0, 0.0); total];
        for axis in 0..self.d {
            let stride = m.pow((self.d - 1 - axis) as u32);
            if stride == 1 {
                data.par_chunks_mut(m).for_each(|line| fft.process(line));
                continue;
            }
            // gather lines along `axis` into contiguous rows, transform, scatter
            let block = stride * m;
            lines.par_chunks_mut(m).enumerate().for_each(|(li, line)| {
                let outer = li / stride;
                let inner = li % stride;
                let base = outer * block + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
                fft.process(line);
            });
            data.par_chunks_mut(block).enumerate().for_each(|(outer, chunk)| {
                for inner in 0..stride {
                    let li = outer * stride + inner;
                    for k in 0..m {
                        chunk[inner + k * stride] = lines[li * m + k];
                    }
                }
            });
        }
    }
}

pub(crate) fn fft_size(min: usize) -> usize {
    (min..).find(|&n| {
        let mut k = n;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        k == 1
    })
    .expect("smooth size exists")
}

/// Box-restricted convolution `u -> (sum_{y in box} K(x - y) u(y))_{x in box}`
/// through a zero-padded FFT, with optional diagonal weights on both sides.
pub struct BoxConvolution {
    d: usize,
    radius: i64,
    fft: CubeFft,
    spectrum: Vec<Complex64>,
    adjoint_spectrum: Vec<Complex64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl BoxConvolution {
    /// `kernel` must cover offsets up to `2 * radius`.
    pub fn new(kernel: &KernelTable, radius: i64) -> Result<Self> {
        let d = kernel.dim();
        if kernel.radius() < 2 * radius {
            let mut offset = vec![0i64; d];
            offset[0] = 2 * radius;
            return Err(Error::MissingOffset { offset });
        }
        let n = (2 * radius + 1) as usize;
        let m = fft_size(2 * n - 1);
        let fft = CubeFft::new(d, m);
        let total = m.pow(d as u32);
        let mut c = vec![Complex64::new(0.0, 0.0); total];
        let mut cadj = vec![Complex64::new(0.0, 0.0); total];
        let span = 2 * radius;
        let mut off = vec![0i64; d];
        for idx in 0..total {
            let mut f = idx;
            let mut inside = true;
            for j in (0..d).rev() {
                let k = (f % m) as i64;
                f /= m;
                off[j] = if k <= span { k } else { k - m as i64 };
                inside &= off[j].abs() <= span;
            }
            if inside {
                let v = kernel.get(&off).expect("radius checked");
                c[idx] = v;
                let neg: Vec<i64> = off.iter().map(|o| -o).collect();
                cadj[idx] = kernel.get(&neg).expect("radius checked").conj();
            }
        }
        fft.transform(&mut c, false);
        fft.transform(&mut cadj, false);
        let len = n.pow(d as u32);
        Ok(BoxConvolution {
            d,
            radius,
            fft,
            spectrum: c,
            adjoint_spectrum: cadj,
            left: vec![1.0; len],
            right: vec![1.0; len],
        })
    }

    /// Multiply by `<x>^{-a}` on the left and `<x>^{-b}` on the right.
    pub fn with_weights(mut self, a: f64, b: f64) -> Self {
        let g = GridFn::zeros(self.d, self.radius);
        for i in 0..g.len() {
            let w = japanese(&g.site(i));
            self.left[i] = w.powf(-a);
            self.right[i] = w.powf(-b);
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    fn run(&self, x: &[Complex64], spectrum: &[Complex64], pre: &[f64], post: &[f64]) -> Vec<Complex64> {
        let n = (2 * self.radius + 1) as usize;
        let m = self.fft.m;
        let d = self.d;
        let mut buf = vec![Complex64::new(0.0, 0.0); m.pow(d as u32)];
        let mut coords = vec![0usize; d];
        for (i, v) in x.iter().enumerate() {
            let mut f = i;
            for j in (0..d).rev() {
                coords[j] = f % n;
                f /= n;
            }
            let idx = coords.iter().fold(0usize, |acc, &c| acc * m + c);
            buf[idx] = v * pre[i];
        }
        self.fft.transform(&mut buf, false);
        buf.par_iter_mut().zip(spectrum).for_each(|(b, s)| *b *= s);
        self.fft.transform(&mut buf, true);
        let scale = 1.0 / buf.len() as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let mut f = i;
            for j in (0..d).rev() {
                coords[j] = f % n;
                f /= n;
            }
            let idx = coords.iter().fold(0usize, |acc, &c| acc * m + c);
            *o = buf[idx] * (scale * post[i]);
        }
        out
    }
}

impl BoxOperator for BoxConvolution {
    fn len(&self) -> usize {
        self.left.len()
    }
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.run(x, &self.spectrum, &self.right, &self.left)
    }
    fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.run(x, &self.adjoint_spectrum, &self.left, &self.right)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kernel_kl;
    use crate::quadrature::QuadratureConfig;
    use crate::symbol::apply_h0;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn weighted_norm_examples() {
        assert!((weighted_norm(&GridFn::delta(3, &[0, 0, 0], 2), 1.7) - 1.0).abs() < 1e-15);
        assert!((weighted_norm(&GridFn::delta(3, &[1, 0, 0], 2), 1.0) - 2f64.sqrt()).abs() < 1e-15);
        let mut u = GridFn::delta(3, &[0, 0, 0], 2);
        u.set(&[1, 0, 0], c(1.0));
        assert!((weighted_norm(&u, 0.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lorentz_examples() {
        let u = GridFn::delta(2, &[0, 0], 1);
        assert!((lorentz_quasinorm(&u, 2.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((lorentz_quasinorm(&u, 2.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        let mut v = u.clone();
        v.set(&[1, 0], c(1.0));
        assert!((lorentz_quasinorm(&v, 2.0, f64::INFINITY).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(lorentz_quasinorm(&v, f64::INFINITY, 2.0).is_err());
    }

    #[test]
    fn convolve_examples_and_coverage() {
        let k = kernel_kl(3, 2.0, 4, &QuadratureConfig::default()).unwrap();
        let out = convolve(&k, &GridFn::delta(3, &[0, 0, 0], 0), 2).unwrap();
        for i in 0..out.len() {
            let x = out.site(i);
            assert_eq!(out.values()[i], k.value(&x).unwrap());
        }
        let mut f = GridFn::delta(3, &[0, 0, 0], 1);
        f.set(&[1, 0, 0], c(1.0));
        let g = convolve(&k, &f, 1).unwrap();
        let expect = k.value(&[0, 0, 0]).unwrap() + k.value(&[-1, 0, 0]).unwrap();
        assert!((g.get(&[0, 0, 0]) - expect).norm() < 1e-15);
        match convolve(&k, &f, 4) {
            Err(Error::MissingOffset { offset }) => assert_eq!(offset, vec![-5, 0, 0]),
            other => panic!("expected missing offset, got {other:?}"),
        }
    }

    #[test]
    fn green_identity_for_k2() {
        let k = kernel_kl(3, 2.0, 10, &QuadratureConfig::default()).unwrap();
        let u = convolve(&k, &GridFn::delta(3, &[0, 0, 0], 0), 10).unwrap();
        let r = apply_h0(&u);
        let mut worst: f64 = 0.0;
        for i in 0..u.len() {
            let x = u.site(i);
            if r.is_interior(&x) {
                let target = if x.iter().all(|&c| c == 0) { 1.0 } else { 0.0 };
                worst = worst.max((r.value.values()[i] - target).norm());
            }
        }
        assert!(worst <= 10.0 * k.max_error(), "residual {worst}, kernel error {}", k.max_error());
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let k = kernel_kl(2, 1.0, 6, &QuadratureConfig::default()).unwrap();
        let op = BoxConvolution::new(&k, 3).unwrap().with_weights(0.5, 1.0);
        let g = GridFn::from_fn(2, 3, |x| Complex64::new(x[0] as f64 * 0.3 + 1.0, x[1] as f64 - 0.2));
        let fast = op.apply(g.values());
        let mut weighted = g.clone();
        for i in 0..g.len() {
            weighted.values_mut()[i] *= japanese(&g.site(i)).powf(-1.0);
        }
        let slow = convolve(&k, &weighted, 3).unwrap();
        for i in 0..g.len() {
            let w = japanese(&g.site(i)).powf(-0.5);
            assert!((fast[i] - slow.values()[i] * w).norm() < 1e-12);
        }
    }

    #[test]
    fn norm_estimates() {
        let id = ClosureOp { n: 50, forward: |x: &[Complex64]| x.to_vec(), adjoint: |x: &[Complex64]| x.to_vec() };
        assert!((operator_norm_estimate(&id, 100).value - 1.0).abs() < 1e-10);
        assert!((power_norm_estimate(&id, 100).value - 1.0).abs() < 1e-10);

        let g = GridFn::zeros(3, 8);
        let w: Vec<f64> = (0..g.len()).map(|i| 1.0 / japanese(&g.site(i))).collect();
        let mul = |x: &[Complex64]| x.iter().zip(&w).map(|(a, b)| a * b).collect::<Vec<_>>();
        let op = ClosureOp { n: g.len(), forward: mul, adjoint: mul };
        assert!((operator_norm_estimate(&op, 500).value - 1.0).abs() < 1e-10);

        let h = |x: &[Complex64]| {
            let mut u = GridFn::zeros(3, 8);
            u.values_mut().copy_from_slice(x);
            apply_h0(&u).value.values().to_vec()
        };
        let hop = ClosureOp { n: g.len(), forward: h, adjoint: h };
        let est = operator_norm_estimate(&hop, 500);
        assert!(est.converged && est.value <= 12.0 + 1e-6 && est.value > 0.98 * 12.0, "{est:?}");
        let slow = power_norm_estimate(&hop, 5000);
        assert!(slow.value <= est.value + 1e-9);
    }
}
