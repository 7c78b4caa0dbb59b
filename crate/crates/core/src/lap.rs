//! Perturbed resolvent `R(z) = (I + R0(z) V)^{-1} R0(z)` for finitely
//! supported `V`, weighted-norm scans of the boundary values and the
//! nullity scan of `I + R0(lambda +- i0) V` on the support of `V`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::green::{boundary_kernels, support_reach, ExtrapolationLadder, LadderConfig};
use crate::grid::{japanese, sup_norm, GridFn, Potential};
use crate::kernel::KernelTable;
use crate::ops::{convolve, operator_norm_estimate, BoxConvolution, BoxOperator, ClosureOp, NormEstimate};
use crate::quadrature::QuadratureConfig;
use crate::resolvent::{resolvent_kernel, Side, SpectralParam};

/// Systems with smallest singular value below this are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-10;

/// Distance kept from the band edges in perturbed scans.
pub const EPS1: f64 = 0.25;

/// Numerical settings shared by the scans.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanSettings {
    pub ladder: LadderConfig,
    pub quadrature: QuadratureConfig,
    /// Cap on Lanczos steps per norm estimate.
    pub max_iters: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings { ladder: LadderConfig::default(), quadrature: QuadratureConfig::default(), max_iters: 60 }
    }
}

impl ScanSettings {
    pub fn canonical(&self) -> String {
        format!("{};{};iters={}", self.ladder.canonical(), self.quadrature.canonical(), self.max_iters)
    }
}

/// `M = I + (G_z(a - b) V(b))_{a, b in supp V}` with its inverse.
#[derive(Clone, Debug)]
pub struct SiteSystem {
    pub sites: Vec<Vec<i64>>,
    pub potential: Vec<f64>,
    pub matrix: DMatrix<Complex64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    inverse: DMatrix<Complex64>,
}

impl SiteSystem {
    /// Builds and inverts the system; fails with `Singular` below
    /// [`SINGULAR_TOL`].
    pub fn new(k: &KernelTable, v: &Potential) -> Result<Self> {
        let (sites, potential, matrix, sigma_min, sigma_max) = site_matrix(k, v)?;
        if !(sigma_min >= SINGULAR_TOL) {
            return Err(Error::Singular { sigma_min });
        }
        let inverse = matrix.clone().full_piv_lu().try_inverse().ok_or(Error::Singular { sigma_min })?;
        Ok(SiteSystem { sites, potential, matrix, sigma_min, sigma_max, inverse })
    }

    pub fn condition(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let b = nalgebra::DVector::from_column_slice(rhs);
        (&self.inverse * b).iter().copied().collect()
    }
}

type SiteMatrix = (Vec<Vec<i64>>, Vec<f64>, DMatrix<Complex64>, f64, f64);

fn site_matrix(k: &KernelTable, v: &Potential) -> Result<SiteMatrix> {
    let support = v.support();
    let n = support.len();
    let d = k.dim();
    let mut m = DMatrix::<Complex64>::identity(n, n);
    let mut off = vec![0i64; d];
    for (a, (xa, _)) in support.iter().enumerate() {
        for (b, (xb, vb)) in support.iter().enumerate() {
            for j in 0..d {
                off[j] = xa[j] - xb[j];
            }
            m[(a, b)] += k.value(&off)? * *vb;
        }
    }
    let sv = m.clone().singular_values();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let (sites, pot) = support.into_iter().unzip();
    Ok((sites, pot, m, if n == 0 { 1.0 } else { smin }, if n == 0 { 1.0 } else { smax }))
}

/// Free kernel at `z`: the closed-form routes for `eps > 0`, the
/// extrapolated boundary value for `eps = 0`.
pub fn free_kernel(
    d: usize,
    z: &SpectralParam,
    radius: i64,
    ladder: &LadderConfig,
    cfg: &QuadratureConfig,
) -> Result<(KernelTable, Option<ExtrapolationLadder>)> {
    if z.eps > 0.0 {
        return Ok((resolvent_kernel(z.z(), d, radius, cfg)?, None));
    }
    let bk = boundary_kernels(d, &[z.lambda], z.side, radius, ladder, cfg)?.remove(0);
    Ok((bk.table, Some(bk.ladder)))
}

#[derive(Clone, Debug)]
pub struct PerturbedResult {
    pub value: GridFn,
    pub sigma_min: f64,
    pub condition: f64,
    /// Present for boundary values.
    pub ladder: Option<ExtrapolationLadder>,
}

fn potential_reach(v: &Potential) -> i64 {
    v.support().iter().map(|(x, _)| sup_norm(x)).max().unwrap_or(0)
}

/// `R(z) f` on `[-out_radius, out_radius]^d`: one solve on `supp V` and
/// two convolutions with the free kernel.
pub fn perturbed_resolvent_apply(
    v: &Potential,
    z: &SpectralParam,
    f: &GridFn,
    out_radius: i64,
    ladder: &LadderConfig,
    cfg: &QuadratureConfig,
) -> Result<PerturbedResult> {
    let d = f.dim();
    if v.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: v.dim() });
    }
    let rf = support_reach(f);
    let rv = potential_reach(v);
    let big = out_radius.max(rv);
    let (k, lad) = free_kernel(d, z, big + rf.max(rv), ladder, cfg)?;
    let r0f = convolve(&k, f, big)?;
    if v.support().is_empty() {
        return Ok(PerturbedResult { value: r0f.resized(out_radius), sigma_min: 1.0, condition: 1.0, ladder: lad });
    }
    let sys = SiteSystem::new(&k, v)?;
    let rhs: Vec<Complex64> = sys.sites.iter().map(|x| r0f.get(x)).collect();
    let w = sys.solve(&rhs);
    let src: Vec<(Vec<i64>, Complex64)> =
        sys.sites.iter().zip(&sys.potential).zip(&w).map(|((x, vx), wx)| (x.clone(), wx * *vx)).collect();
    let mut out = r0f.resized(out_radius);
    let corr = convolve(&k, &GridFn::from_sites(d, &src, 0)?, out_radius)?;
    out.axpy(Complex64::new(-1.0, 0.0), &corr);
    Ok(PerturbedResult { value: out, sigma_min: sys.sigma_min, condition: sys.condition(), ladder: lad })
}

/// `<x>^{-s} R <x>^{-s}` on the box `[-L, L]^d` as a dense-vector operator,
/// with `R = R0 - R0 V M^{-1} R0` restricted to the box.
pub struct WeightedResolvent {
    conv: BoxConvolution,
    weight: Vec<f64>,
    site_index: Vec<usize>,
    potential: Vec<f64>,
    inverse: DMatrix<Complex64>,
    /// `G(x - a)` over the box for each site `a`.
    columns: Vec<Vec<Complex64>>,
    /// `conj G(a - y)` over the box for each site `a`.
    rows: Vec<Vec<Complex64>>,
    pub sigma_min: f64,
}

impl WeightedResolvent {
    /// `kernel` must cover offsets up to `2 L`; `supp V` must lie in the box.
    pub fn new(kernel: &KernelTable, v: Option<&Potential>, radius: i64, s: f64) -> Result<Self> {
        let d = kernel.dim();
        let conv = BoxConvolution::new(kernel, radius)?;
        let grid = GridFn::zeros(d, radius);
        let weight: Vec<f64> = (0..grid.len()).map(|i| japanese(&grid.site(i)).powf(-s)).collect();
        let empty = Potential::zero(d);
        let v = v.unwrap_or(&empty);
        if v.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.dim() });
        }
        if potential_reach(v) > radius {
            return invalid("potential support exceeds the box");
        }
        let (sites, potential, inverse, sigma_min) = if v.support().is_empty() {
            (Vec::new(), Vec::new(), DMatrix::zeros(0, 0), 1.0)
        } else {
            let sys = SiteSystem::new(kernel, v)?;
            let sigma_min = sys.sigma_min;
            (sys.sites, sys.potential, sys.inverse, sigma_min)
        };
        let mut off = vec![0i64; d];
        let mut x = vec![0i64; d];
        let mut columns = Vec::with_capacity(sites.len());
        let mut rows = Vec::with_capacity(sites.len());
        for a in &sites {
            let mut col = Vec::with_capacity(grid.len());
            let mut row = Vec::with_capacity(grid.len());
            for i in 0..grid.len() {
                grid.decode(i, &mut x);
                for j in 0..d {
                    off[j] = x[j] - a[j];
                }
                col.push(kernel.value(&off)?);
                for o in off.iter_mut() {
                    *o = -*o;
                }
                row.push(kernel.value(&off)?.conj());
            }
            columns.push(col);
            rows.push(row);
        }
        let site_index = sites.iter().map(|a| grid.index(a).expect("inside box")).collect();
        Ok(WeightedResolvent { conv, weight, site_index, potential, inverse, columns, rows, sigma_min })
    }
}

impl BoxOperator for WeightedResolvent {
    fn len(&self) -> usize {
        self.weight.len()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let t: Vec<Complex64> = x.iter().zip(&self.weight).map(|(a, w)| a * w).collect();
        let mut r = self.conv.apply(&t);
        if !self.site_index.is_empty() {
            let c = nalgebra::DVector::from_iterator(self.site_index.len(), self.site_index.iter().map(|&i| r[i]));
            let q = &self.inverse * c;
            for (a, col) in self.columns.iter().enumerate() {
                let coef = q[a] * self.potential[a];
                r.iter_mut().zip(col).for_each(|(ri, g)| *ri -= g * coef);
            }
        }
        r.iter_mut().zip(&self.weight).for_each(|(ri, w)| *ri *= w);
        r
    }

    fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        let t: Vec<Complex64> = x.iter().zip(&self.weight).map(|(a, w)| a * w).collect();
        let mut r = self.conv.apply_adjoint(&t);
        if !self.site_index.is_empty() {
            let c = nalgebra::DVector::from_iterator(
                self.site_index.len(),
                self.site_index.iter().zip(&self.potential).map(|(&i, v)| r[i] * *v),
            );
            let q = self.inverse.adjoint() * c;
            for (b, row) in self.rows.iter().enumerate() {
                r.iter_mut().zip(row).for_each(|(ri, g)| *ri -= g * q[b]);
            }
        }
        r.iter_mut().zip(&self.weight).for_each(|(ri, w)| *ri *= w);
        r
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LapEntry {
    pub lambda: f64,
    pub radius: i64,
    /// Infinite when the site system is singular.
    pub norm: f64,
    pub residual: f64,
    pub iterations: usize,
    pub norm_converged: bool,
    pub ladder_diagnostic: f64,
    pub ladder_converged: bool,
    pub sigma_min: f64,
    pub kernel_fingerprint: String,
}

impl LapEntry {
    pub fn flagged(&self) -> bool {
        !(self.norm.is_finite() && self.norm_converged && self.ladder_converged)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LapScanReport {
    pub s: f64,
    pub side: Side,
    pub lambdas: Vec<f64>,
    pub boxes: Vec<i64>,
    /// Lambda-major, box-minor.
    pub entries: Vec<LapEntry>,
    /// `norm(L_{k+1}) / norm(L_k)` per lambda.
    pub ratios: Vec<Vec<f64>>,
}

impl LapScanReport {
    pub fn entry(&self, il: usize, ib: usize) -> &LapEntry {
        &self.entries[il * self.boxes.len() + ib]
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.norm.is_finite())
    }

    /// Relative growth between the last two boxes, maximized over lambda.
    pub fn max_final_growth(&self) -> f64 {
        self.ratios.iter().filter_map(|r| r.last()).map(|r| r - 1.0).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn sorted(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

/// Weighted norms `||<x>^{-s} R(lambda +- i0) <x>^{-s}||` on each box, with
/// `R = R0` when `v` is `None`.
pub fn lap_scan(
    v: Option<&Potential>,
    d: usize,
    s: f64,
    lambdas: &[f64],
    side: Side,
    boxes: &[i64],
    settings: &ScanSettings,
) -> Result<LapScanReport> {
    if !(s >= 1.0) {
        return invalid("weight exponent s must be >= 1");
    }
    if lambdas.is_empty() || boxes.is_empty() || !sorted(lambdas) || !boxes.windows(2).all(|w| w[0] < w[1]) {
        return invalid("lambda grid and box list must be nonempty and strictly increasing");
    }
    if boxes[0] < 1 {
        return invalid("boxes must have radius >= 1");
    }
    if let Some(v) = v {
        if v.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.dim() });
        }
        let top = 4.0 * d as f64;
        if lambdas.iter().any(|&l| !(l > EPS1 && l < top - EPS1)) {
            return invalid(format!("perturbed scans need lambda in ({EPS1}, {})", top - EPS1));
        }
    }
    let kernel_radius = 2 * boxes[boxes.len() - 1];
    let mut entries = Vec::with_capacity(lambdas.len() * boxes.len());
    const CHUNK: usize = 8;
    for chunk in lambdas.chunks(CHUNK) {
        let kernels = boundary_kernels(d, chunk, side, kernel_radius, &settings.ladder, &settings.quadrature)?;
        for bk in &kernels {
            let ladder_converged = bk.ladder.converged && bk.table.unconverged_count() == 0;
            for &l in boxes {
                let entry = match WeightedResolvent::new(&bk.table, v, l, s) {
                    Ok(op) => {
                        let est = operator_norm_estimate(&op, settings.max_iters);
                        LapEntry {
                            lambda: bk.lambda,
                            radius: l,
                            norm: est.value,
                            residual: est.residual,
                            iterations: est.iterations,
                            norm_converged: est.converged,
                            ladder_diagnostic: bk.ladder.diagnostic,
                            ladder_converged,
                            sigma_min: op.sigma_min,
                            kernel_fingerprint: bk.table.fingerprint(),
                        }
                    }
                    Err(Error::Singular { sigma_min }) => LapEntry {
                        lambda: bk.lambda,
                        radius: l,
                        norm: f64::INFINITY,
                        residual: f64::NAN,
                        iterations: 0,
                        norm_converged: false,
                        ladder_diagnostic: bk.ladder.diagnostic,
                        ladder_converged,
                        sigma_min,
                        kernel_fingerprint: bk.table.fingerprint(),
                    },
                    Err(e) => return Err(e),
                };
                entries.push(entry);
            }
        }
    }
    let nb = boxes.len();
    let ratios = entries.chunks(nb).map(|row| row.windows(2).map(|w| w[1].norm / w[0].norm).collect()).collect();
    Ok(LapScanReport { s, side, lambdas: lambdas.to_vec(), boxes: boxes.to_vec(), entries, ratios })
}

/// `||<x>^{-s} (R(z) - R(z')) <x>^{-s}||` on the box `[-L, L]^d`.
pub fn holder_modulus(
    v: Option<&Potential>,
    d: usize,
    z1: &SpectralParam,
    z2: &SpectralParam,
    s: f64,
    radius: i64,
    settings: &ScanSettings,
) -> Result<NormEstimate> {
    if !(s > 1.0) {
        return invalid("Hoelder modulus needs s > 1");
    }
    let (k1, _) = free_kernel(d, z1, 2 * radius, &settings.ladder, &settings.quadrature)?;
    let a = WeightedResolvent::new(&k1, v, radius, s)?;
    if z1 == z2 {
        let zero = ClosureOp {
            n: a.len(),
            forward: |x: &[Complex64]| vec![Complex64::new(0.0, 0.0); x.len()],
            adjoint: |x: &[Complex64]| vec![Complex64::new(0.0, 0.0); x.len()],
        };
        return Ok(operator_norm_estimate(&zero, settings.max_iters));
    }
    let (k2, _) = free_kernel(d, z2, 2 * radius, &settings.ladder, &settings.quadrature)?;
    let b = WeightedResolvent::new(&k2, v, radius, s)?;
    let diff = ClosureOp {
        n: a.len(),
        forward: |x: &[Complex64]| a.apply(x).iter().zip(b.apply(x)).map(|(p, q)| p - q).collect(),
        adjoint: |x: &[Complex64]| a.apply_adjoint(x).iter().zip(b.apply_adjoint(x)).map(|(p, q)| p - q).collect(),
    };
    Ok(operator_norm_estimate(&diff, settings.max_iters))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NullityEntry {
    pub lambda: f64,
    pub sigma_min: f64,
    pub ladder_diagnostic: f64,
    pub ladder_converged: bool,
    /// Empty when no kernel was needed.
    pub kernel_fingerprint: String,
}

/// Smallest singular value of `I + (G_{lambda +- i0}(a - b) V(b))` on
/// `supp V` for each `lambda`.
pub fn kernel_nullity_scan(
    v: &Potential,
    lambdas: &[f64],
    side: Side,
    settings: &ScanSettings,
) -> Result<Vec<NullityEntry>> {
    let d = v.dim();
    if v.support().is_empty() {
        return Ok(lambdas
            .iter()
            .map(|&lambda| NullityEntry {
                lambda,
                sigma_min: 1.0,
                ladder_diagnostic: 0.0,
                ladder_converged: true,
                kernel_fingerprint: String::new(),
            })
            .collect());
    }
    let radius = (2 * potential_reach(v)).max(1);
    let kernels = boundary_kernels(d, lambdas, side, radius, &settings.ladder, &settings.quadrature)?;
    kernels
        .iter()
        .map(|bk| {
            let (_, _, _, sigma_min, _) = site_matrix(&bk.table, v)?;
            Ok(NullityEntry {
                lambda: bk.lambda,
                sigma_min,
                ladder_diagnostic: bk.ladder.diagnostic,
                ladder_converged: bk.ladder.converged && bk.table.unconverged_count() == 0,
                kernel_fingerprint: bk.table.fingerprint(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::apply_h0;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn box_norm(u: &GridFn) -> f64 {
        u.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    fn residual(v: &Potential, z: Complex64, w: &GridFn, f: &GridFn) -> f64 {
        let h = apply_h0(w);
        let mut worst: f64 = 0.0;
        for i in 0..w.len() {
            let x = w.site(i);
            if !h.is_interior(&x) {
                continue;
            }
            let r = h.value.values()[i] + w.values()[i] * (v.get(&x) - z) - f.get(&x);
            worst = worst.max(r.norm());
        }
        worst
    }

    #[test]
    fn zero_potential_returns_free_resolvent() {
        let cfg = QuadratureConfig::default();
        let z = SpectralParam::new(6.0, 1.0, Side::Plus).unwrap();
        let f = GridFn::delta(3, &[0, 0, 0], 1);
        let r = perturbed_resolvent_apply(&Potential::zero(3), &z, &f, 4, &LadderConfig::default(), &cfg).unwrap();
        let k = resolvent_kernel(z.z(), 3, 4, &cfg).unwrap();
        let free = convolve(&k, &f, 4).unwrap();
        assert_eq!(r.value, free);
    }

    #[test]
    fn resolvent_identity_residual_and_bound() {
        let cfg = QuadratureConfig::default();
        let lc = LadderConfig::default();
        let v = Potential::finite(3, &[(vec![0, 0, 0], -0.5)]).unwrap();
        let f = GridFn::delta(3, &[0, 0, 0], 1);
        let z = SpectralParam::new(6.0, 1.0, Side::Plus).unwrap();
        let w = perturbed_resolvent_apply(&v, &z, &f, 8, &lc, &cfg).unwrap();
        assert!(residual(&v, z.z(), &w.value, &f) <= 1e-6);

        let z = SpectralParam::new(0.0, 20.0, Side::Plus).unwrap();
        let w = perturbed_resolvent_apply(&v, &z, &f, 4, &lc, &cfg).unwrap();
        assert!(box_norm(&w.value) <= 1.2 / 20.0);
    }

    #[test]
    fn side_conjugation() {
        let cfg = QuadratureConfig::default();
        let lc = LadderConfig::default();
        let v = Potential::finite(3, &[(vec![0, 0, 0], -0.5), (vec![1, 0, 0], 0.3)]).unwrap();
        let mut f = GridFn::delta(3, &[0, 0, 0], 1);
        f.set(&[0, 1, 0], c(2.0));
        let p = perturbed_resolvent_apply(&v, &SpectralParam::new(5.0, 0.0, Side::Plus).unwrap(), &f, 3, &lc, &cfg).unwrap();
        let m = perturbed_resolvent_apply(&v, &SpectralParam::new(5.0, 0.0, Side::Minus).unwrap(), &f, 3, &lc, &cfg).unwrap();
        for (a, b) in p.value.values().iter().zip(m.value.values()) {
            assert!((a - b.conj()).norm() <= 1e-8);
        }
    }

    #[test]
    fn free_norm_below_spectrum() {
        let st = ScanSettings::default();
        let rep = lap_scan(None, 3, 1.0, &[-1.0], Side::Plus, &[3, 4], &st).unwrap();
        for e in &rep.entries {
            assert!(e.norm <= 1.0 + 1e-3 && e.norm > 0.0, "{e:?}");
            assert!(!e.flagged());
        }
    }

    #[test]
    fn weighted_operator_matches_dense_action() {
        let cfg = QuadratureConfig::default();
        let z = SpectralParam::new(5.0, 0.5, Side::Plus).unwrap();
        let k = resolvent_kernel(z.z(), 3, 4, &cfg).unwrap();
        let v = Potential::finite(3, &[(vec![0, 0, 0], -0.5), (vec![0, 0, 1], 0.25)]).unwrap();
        let op = WeightedResolvent::new(&k, Some(&v), 2, 1.0).unwrap();
        let n = op.len();
        let grid = GridFn::zeros(3, 2);
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let y: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64 * 0.7).cos(), 0.1 * i as f64)).collect();
        // forward action against perturbed_resolvent_apply on weighted input
        let mut f = GridFn::zeros(3, 2);
        for i in 0..n {
            f.values_mut()[i] = x[i] * japanese(&grid.site(i)).powi(-1);
        }
        let direct = perturbed_resolvent_apply(&v, &z, &f, 2, &LadderConfig::default(), &cfg).unwrap();
        let ax = op.apply(&x);
        for i in 0..n {
            let want = direct.value.values()[i] * japanese(&grid.site(i)).powi(-1);
            assert!((ax[i] - want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
        // adjoint consistency
        let aty = op.apply_adjoint(&y);
        let lhs: Complex64 = y.iter().zip(&ax).map(|(a, b)| a.conj() * b).sum();
        let rhs: Complex64 = aty.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
        assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm());
    }

    #[test]
    fn correction_lies_in_range_of_free_resolvent_on_support() {
        let cfg = QuadratureConfig::default();
        let z = SpectralParam::new(3.0, 0.7, Side::Plus).unwrap();
        let v = Potential::finite(3, &[(vec![0, 0, 0], -0.5), (vec![1, 0, 0], 0.4)]).unwrap();
        let f = GridFn::delta(3, &[0, 2, 0], 2);
        let r = perturbed_resolvent_apply(&v, &z, &f, 3, &LadderConfig::default(), &cfg).unwrap();
        let k = resolvent_kernel(z.z(), 3, 6, &cfg).unwrap();
        let free = convolve(&k, &f, 3).unwrap();
        let mut diff = r.value.clone();
        diff.axpy(c(-1.0), &free);
        let sites = [vec![0i64, 0, 0], vec![1, 0, 0]];
        let a = DMatrix::from_fn(diff.len(), 2, |i, j| {
            let x = diff.site(i);
            let off: Vec<i64> = x.iter().zip(&sites[j]).map(|(p, q)| p - q).collect();
            k.value(&off).unwrap()
        });
        let b = nalgebra::DVector::from_column_slice(diff.values());
        let coef = a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
        let res = (&a * coef - &b).norm();
        assert!(res <= 1e-8 * (1.0 + b.norm()), "{res}");
    }

    #[test]
    fn nullity_of_zero_potential_is_one() {
        let st = ScanSettings::default();
        let out = kernel_nullity_scan(&Potential::zero(3), &[1.0, 4.0], Side::Plus, &st).unwrap();
        assert!(out.iter().all(|e| e.sigma_min == 1.0));
    }

    #[test]
    fn holder_modulus_vanishes_on_the_diagonal() {
        let st = ScanSettings::default();
        let z = SpectralParam::new(6.0, 0.1, Side::Plus).unwrap();
        let m = holder_modulus(None, 3, &z, &z, 1.5, 3, &st).unwrap();
        assert!(m.value.abs() <= 1e-12);
    }

    #[test]
    fn perturbed_scan_rejects_edge_lambdas() {
        let v = Potential::finite(3, &[(vec![0, 0, 0], -0.5)]).unwrap();
        assert!(lap_scan(Some(&v), 3, 1.0, &[0.1], Side::Plus, &[2], &ScanSettings::default()).is_err());
        assert!(lap_scan(None, 3, 0.5, &[1.0], Side::Plus, &[2], &ScanSettings::default()).is_err());
    }
}
