//! Zero-energy states of `H0 + V` for finitely supported `V` through the
//! Birman-Schwinger system `u + K_2 * (V u) = 0` on `supp V`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{euclid, sup_norm, GridFn, Potential};
use crate::kernel::{continuum_constant, kernel_kl, KernelTable};
use crate::quadrature::QuadratureConfig;
use crate::sum::pairwise_sum;

/// `M[x, y] = K_2(x - y) V(y)` on the support of `V`.
#[derive(Clone, Debug)]
pub struct BSMatrix {
    pub sites: Vec<Vec<i64>>,
    pub potential: Vec<f64>,
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<Complex64>,
    /// `|V(y)|` times the kernel error estimate of each entry.
    pub entry_errors: DMatrix<f64>,
}

pub fn birman_schwinger_matrix(v: &Potential, k: &KernelTable) -> Result<BSMatrix> {
    if v.dim() != k.dim() {
        return Err(Error::DimensionMismatch { expected: k.dim(), got: v.dim() });
    }
    let support = v.support();
    if support.is_empty() {
        return invalid("potential has empty support");
    }
    let n = support.len();
    let mut m = DMatrix::zeros(n, n);
    let mut e = DMatrix::zeros(n, n);
    for (i, (x, _)) in support.iter().enumerate() {
        for (j, (y, vy)) in support.iter().enumerate() {
            let off: Vec<i64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            m[(i, j)] = k.real(&off)? * vy;
            e[(i, j)] = k.error(&off)? * vy.abs();
        }
    }
    let mut eigenvalues: Vec<Complex64> = m.clone().complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(BSMatrix {
        sites: support.iter().map(|(x, _)| x.clone()).collect(),
        potential: support.iter().map(|(_, v)| *v).collect(),
        matrix: m,
        eigenvalues,
        entry_errors: e,
    })
}

fn reach(v: &Potential) -> i64 {
    v.support().iter().map(|(y, _)| sup_norm(y)).max().unwrap_or(0)
}

/// Couplings `g` at which `H0 + g V0` has a zero-energy state:
/// `-1 / mu` over the nonzero real eigenvalues `mu` of the Birman-Schwinger
/// matrix of `V0`, sorted ascending. Empty for `V0 = 0`.
pub fn threshold_couplings(v0: &Potential, cfg: &QuadratureConfig) -> Result<Vec<f64>> {
    if v0.support().is_empty() {
        return Ok(Vec::new());
    }
    let k = kernel_kl(v0.dim(), 2.0, 2 * reach(v0), cfg)?;
    let bs = birman_schwinger_matrix(v0, &k)?;
    let mut g: Vec<f64> = bs
        .eigenvalues
        .iter()
        .filter(|mu| mu.norm() > 1e-12 && mu.im.abs() <= 1e-10 * mu.norm())
        .map(|mu| -1.0 / mu.re)
        .collect();
    g.sort_by(f64::total_cmp);
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Resonance,
    Eigenfunction,
    Indeterminate,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::Resonance => "resonance",
            Classification::Eigenfunction => "eigenfunction",
            Classification::Indeterminate => "indeterminate",
        }
    }
}

/// A solution of `(H0 + V) u = 0` built from a Birman-Schwinger null vector.
#[derive(Clone, Debug)]
pub struct ThresholdState {
    /// The eigenvalue of `M` closest to `-1`.
    pub eigenvalue: Complex64,
    pub sites: Vec<Vec<i64>>,
    /// `u` on the support, normalized to `max |u| = 1` with the first
    /// maximal entry positive real.
    pub null_vector: Vec<Complex64>,
    /// `||(I + M) u_S|| / ||u_S||`.
    pub null_residual: f64,
    /// `sum_y V(y) u(y)`.
    pub s0: Complex64,
    /// `u` on the dense box.
    pub u: GridFn,
    sources: Vec<(Vec<i64>, Complex64)>,
    kernel: Arc<KernelTable>,
}

impl ThresholdState {
    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    /// Largest sup-norm radius at which `u` can be evaluated.
    pub fn eval_radius(&self) -> i64 {
        let r = self.sources.iter().map(|(y, _)| sup_norm(y)).max().unwrap_or(0);
        self.kernel.radius() - r
    }

    /// `u(x)`: the null vector on the support, `-sum_y K_2(x - y) V(y) u(y)` elsewhere.
    pub fn eval(&self, x: &[i64]) -> Result<Complex64> {
        if let Some(i) = self.sites.iter().position(|s| s.as_slice() == x) {
            return Ok(self.null_vector[i]);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut off = vec![0i64; x.len()];
        for (y, s) in &self.sources {
            for j in 0..off.len() {
                off[j] = x[j] - y[j];
            }
            acc -= self.kernel.value(&off)? * s;
        }
        Ok(acc)
    }

    /// `sum_y |V(y) u(y)|`.
    pub fn source_l1(&self) -> f64 {
        self.sources.iter().map(|(_, s)| s.norm()).sum()
    }

    pub fn kernel(&self) -> &KernelTable {
        &self.kernel
    }

    /// The same state with `u` multiplied by `c`.
    pub fn scaled(&self, c: Complex64) -> ThresholdState {
        let mut st = self.clone();
        st.null_vector.iter_mut().for_each(|v| *v *= c);
        st.u.scale(c);
        st.s0 *= c;
        st.sources.iter_mut().for_each(|(_, s)| *s *= c);
        st
    }
}

/// Solve with `u` stored densely on `[-out_radius, out_radius]^d`.
pub fn solve_threshold_state(v: &Potential, out_radius: i64, cfg: &QuadratureConfig) -> Result<Vec<ThresholdState>> {
    let r = reach(v);
    let k = kernel_kl(v.dim(), 2.0, (out_radius + r).max(2 * r), cfg)?;
    solve_threshold_state_with(v, Arc::new(k), out_radius)
}

/// Solve against a given `K_2` table. States can be evaluated lazily out to
/// the table radius minus the reach of `supp V`.
pub fn solve_threshold_state_with(v: &Potential, k: Arc<KernelTable>, dense_radius: i64) -> Result<Vec<ThresholdState>> {
    let bs = birman_schwinger_matrix(v, &k)?;
    let n = bs.sites.len();
    let target = Complex64::new(-1.0, 0.0);
    let (nearest, dist) = bs
        .eigenvalues
        .iter()
        .map(|mu| (*mu, (mu - target).norm()))
        .fold((target, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
    if dist > 1e-6 {
        return Err(Error::NotAtThreshold { nearest: format!("{nearest}"), distance: dist });
    }
    let multiplicity = bs.eigenvalues.iter().filter(|mu| (*mu - nearest).norm() <= 1e-8).count().max(1);
    let a = DMatrix::<f64>::identity(n, n) + &bs.matrix;
    let svd = a.clone().svd(true, true);
    let vt = svd.v_t.as_ref().expect("requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let mut states = Vec::with_capacity(multiplicity);
    for &col in order.iter().take(multiplicity) {
        let mut w: Vec<f64> = vt.row(col).iter().copied().collect();
        let max = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let first = w.iter().position(|x| x.abs() >= max * (1.0 - 1e-12)).expect("nonzero vector");
        let scale = 1.0 / w[first];
        w.iter_mut().for_each(|x| *x *= scale);
        let wv = nalgebra::DVector::from_vec(w.clone());
        let residual = (&a * &wv).norm() / wv.norm();
        let null_vector: Vec<Complex64> = w.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        let sources: Vec<(Vec<i64>, Complex64)> =
            bs.sites.iter().zip(&bs.potential).zip(&null_vector).map(|((y, vy), u)| (y.clone(), u * vy)).collect();
        let s0 = sources.iter().map(|(_, s)| s).sum();
        let mut st = ThresholdState {
            eigenvalue: nearest,
            sites: bs.sites.clone(),
            null_vector,
            null_residual: residual,
            s0,
            u: GridFn::zeros(v.dim(), 0),
            sources,
            kernel: k.clone(),
        };
        if dense_radius > st.eval_radius() {
            return invalid(format!("kernel radius {} too small for dense radius {dense_radius}", k.radius()));
        }
        let d = v.dim();
        let vals: Vec<Complex64> = (0..(2 * dense_radius as usize + 1).pow(d as u32))
            .into_par_iter()
            .map(|i| {
                let mut x = vec![0i64; d];
                let side = 2 * dense_radius + 1;
                let mut f = i as i64;
                for j in (0..d).rev() {
                    x[j] = f % side - dense_radius;
                    f /= side;
                }
                st.eval(&x).expect("radius checked")
            })
            .collect();
        let mut u = GridFn::zeros(d, dense_radius);
        u.values_mut().copy_from_slice(&vals);
        st.u = u;
        states.push(st);
    }
    Ok(states)
}

/// Shell sums of `|u|^2` over cubes `|x|_inf <= L`.
#[derive(Clone, Debug, PartialEq)]
pub struct L2Diagnostic {
    pub radii: Vec<i64>,
    /// Trapezoid-weighted partial sums: interior of the cube plus half of its
    /// boundary layer.
    pub partial_sums: Vec<f64>,
    pub increments: Vec<f64>,
    /// `increment[k] / increment[k + 1]`.
    pub ratios: Vec<f64>,
    pub l2_consistent: bool,
}

/// Ratio required per radius doubling, with a 10% allowance for the
/// finite-radius corrections of an exact `L^{-1}` tail.
pub const L2_RATIO: f64 = 2.0;
pub const L2_RATIO_SLACK: f64 = 0.1;

/// Sums of `|u|^2` over `|x|_inf = r` for `r = 0..=max_radius`.
pub fn cube_shell_sums<F>(d: usize, max_radius: i64, eval: F) -> Vec<f64>
where
    F: Fn(&[i64]) -> Complex64 + Sync,
{
    let side = 2 * max_radius + 1;
    let per_slice = side.pow(d as u32 - 1) as usize;
    let slices: Vec<Vec<f64>> = (-max_radius..=max_radius)
        .into_par_iter()
        .map(|x0| {
            let mut bins = vec![Vec::new(); max_radius as usize + 1];
            let mut x = vec![0i64; d];
            x[0] = x0;
            for i in 0..per_slice {
                let mut f = i as i64;
                for j in (1..d).rev() {
                    x[j] = f % side - max_radius;
                    f /= side;
                }
                bins[sup_norm(&x) as usize].push(eval(&x).norm_sqr());
            }
            bins.iter().map(|b| pairwise_sum(b)).collect()
        })
        .collect();
    (0..=max_radius as usize).map(|r| pairwise_sum(&slices.iter().map(|s| s[r]).collect::<Vec<_>>())).collect()
}

/// l2-membership probe over the given radii (increasing). Consistent when
/// every increment is zero or the last increment ratio is at least
/// `L2_RATIO * (1 - L2_RATIO_SLACK)`.
pub fn l2_membership<F>(d: usize, radii: &[i64], eval: F) -> Result<L2Diagnostic>
where
    F: Fn(&[i64]) -> Complex64 + Sync,
{
    if radii.len() < 3 || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] < 1 {
        return invalid("l2 probe needs at least three increasing radii >= 1");
    }
    let shells = cube_shell_sums(d, *radii.last().expect("nonempty"), eval);
    let partial_sums: Vec<f64> = radii
        .iter()
        .map(|&l| pairwise_sum(&shells[..l as usize]) + 0.5 * shells[l as usize])
        .collect();
    let increments: Vec<f64> = partial_sums.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios: Vec<f64> = increments.windows(2).map(|w| w[0] / w[1]).collect();
    let total = partial_sums.last().copied().unwrap_or(0.0);
    let zero = increments.iter().all(|&i| i.abs() <= 1e-15 * total.max(f64::MIN_POSITIVE));
    let last = ratios.last().copied().unwrap_or(f64::NAN);
    let l2_consistent = zero || last >= L2_RATIO * (1.0 - L2_RATIO_SLACK) || increments.last() == Some(&0.0);
    Ok(L2Diagnostic { radii: radii.to_vec(), partial_sums, increments, ratios, l2_consistent })
}

pub const TOL_SUM: f64 = 1e-8;
pub const TOL_TAIL: f64 = 1e-3;

/// Resonance / eigenfunction decision. A nonzero source sum means a
/// resonance for `d = 3, 4` and an eigenfunction for `d >= 5`. A vanishing
/// source sum enters the eigenfunction branch, confirmed when the cube-shell
/// sums of `|u|^2` over the outer half of the dense box are each below
/// `tol_tail` times the total.
pub fn classify_state(st: &ThresholdState, tol_sum: f64, tol_tail: f64) -> Classification {
    let d = st.dim();
    if st.s0.norm() > tol_sum * st.source_l1() {
        return match d {
            3 | 4 => Classification::Resonance,
            d if d >= 5 => Classification::Eigenfunction,
            _ => Classification::Indeterminate,
        };
    }
    let l = st.u.radius();
    if l < 2 {
        return Classification::Indeterminate;
    }
    let shells = cube_shell_sums(d, l, |x| st.u.get(x));
    let total = pairwise_sum(&shells);
    let outer = shells[(l / 2) as usize + 1..].iter().cloned().fold(0.0, f64::max);
    if outer <= tol_tail * total {
        Classification::Eigenfunction
    } else {
        Classification::Indeterminate
    }
}

/// Power-law fit of shell maxima.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub residual: f64,
    pub r1: i64,
    pub r2: i64,
}

/// Least-squares fit of `log max_{r <= |x| < r+1} |u(x)|` against `log r`
/// over integer shells `r` in `[r1, r2]`.
pub fn decay_fit(u: &GridFn, r1: i64, r2: i64) -> Result<DecayFit> {
    if r1 < 1 || r2 <= r1 || r2 > u.radius() {
        return invalid(format!("decay fit needs 1 <= R1 < R2 <= box radius (got {r1}, {r2}, box {})", u.radius()));
    }
    if r2 - r1 + 1 < 5 {
        return invalid("decay fit needs at least five shells");
    }
    let mut maxima = vec![0.0f64; (r2 - r1 + 1) as usize];
    for (i, v) in u.values().iter().enumerate() {
        let x = u.site(i);
        let r = euclid(&x).floor() as i64;
        if r >= r1 && r <= r2 {
            let m = &mut maxima[(r - r1) as usize];
            *m = m.max(v.norm());
        }
    }
    if maxima.iter().any(|&m| m == 0.0) {
        return Err(Error::EmptyShells { r1: r1 as f64, r2: r2 as f64 });
    }
    let pts: Vec<(f64, f64)> =
        maxima.iter().enumerate().map(|(i, m)| (((r1 + i as i64) as f64).ln(), m.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = pts.iter().map(|p| (p.1 - intercept - slope * p.0).abs()).fold(0.0, f64::max);
    Ok(DecayFit { exponent: slope, amplitude: intercept.exp(), residual, r1, r2 })
}

/// `max_{R1 <= |x| <= R2} |u(x) + c_d |x|^{2-d} s0| / (c_d |x|^{2-d} |s0|)`.
pub fn asymptote_check(st: &ThresholdState, r1: f64, r2: f64) -> Result<f64> {
    let d = st.dim();
    if st.s0.norm() == 0.0 {
        return Err(Error::LeadingTermVanishes);
    }
    let reach = (r2.ceil() as i64).min(st.eval_radius());
    if (reach as f64) < r2 {
        return invalid(format!("state evaluable only to radius {}", st.eval_radius()));
    }
    let cd = continuum_constant(d);
    let side = 2 * reach + 1;
    let total = side.pow(d as u32);
    let worst: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut x = vec![0i64; d];
            let mut f = i;
            for j in (0..d).rev() {
                x[j] = f % side - reach;
                f /= side;
            }
            let r = euclid(&x);
            if r < r1 || r > r2 {
                return 0.0;
            }
            let lead = cd * r.powf(2.0 - d as f64);
            let u = if st.u.contains(&x) { st.u.get(&x) } else { st.eval(&x).expect("radius checked") };
            (u + st.s0 * lead).norm() / (lead * st.s0.norm())
        })
        .collect();
    Ok(worst.into_iter().fold(0.0, f64::max))
}
