//! The free resolvent as an operator: `H0^{-1}` at the bottom of the
//! spectrum, boundary values `R0(lambda +- i0)` through an epsilon ladder,
//! and the quadratic form on the left of Stone's formula.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::grid::{sup_norm, GridFn};
use crate::kernel::{kernel_kl, KernelKind, KernelTable};
use crate::ops::convolve;
use crate::quadrature::QuadratureConfig;
use crate::resolvent::{Side, TimePlan};
use crate::symbol::critical_data;

/// Epsilon schedule and acceptance thresholds for boundary values.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderConfig {
    pub eps0: f64,
    pub ratio: f64,
    pub rungs: usize,
    pub tol: f64,
    pub near_tol: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig { eps0: 0.1, ratio: 0.5, rungs: 8, tol: 1e-3, near_tol: 5e-2 }
    }
}

impl LadderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0) || !(self.ratio > 0.0 && self.ratio < 1.0) || self.rungs < 2 {
            return invalid("ladder needs eps0 > 0, ratio in (0, 1) and at least two rungs");
        }
        Ok(())
    }

    pub fn schedule(&self) -> Vec<f64> {
        (0..self.rungs).map(|k| self.eps0 * self.ratio.powi(k as i32)).collect()
    }

    pub fn canonical(&self) -> String {
        format!("eps0={};ratio={};rungs={};tol={:e};near={:e}", self.eps0, self.ratio, self.rungs, self.tol, self.near_tol)
    }
}

/// Extrapolation variable: the limit is a power series in `eps` away from
/// thresholds and in `sqrt(eps)` on them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LadderVariable {
    Eps,
    SqrtEps,
}

/// How a given `lambda` is extrapolated.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderPlan {
    pub eps: Vec<f64>,
    pub variable: LadderVariable,
    pub near_threshold: bool,
    pub tolerance: f64,
}

pub fn ladder_plan(d: usize, lambda: f64, cfg: &LadderConfig) -> LadderPlan {
    let eps = cfg.schedule();
    let dist = critical_data(d).threshold_distance(lambda);
    let eps_min = *eps.last().expect("at least two rungs");
    let variable = if dist <= eps_min { LadderVariable::SqrtEps } else { LadderVariable::Eps };
    let near_threshold = dist <= 2.0 * cfg.eps0;
    let tolerance = if near_threshold { cfg.near_tol } else { cfg.tol };
    LadderPlan { eps, variable, near_threshold, tolerance }
}

/// Values along the epsilon ladder and their extrapolated limit.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtrapolationLadder {
    pub eps: Vec<f64>,
    pub values: Vec<Complex64>,
    pub limit: Complex64,
    /// Last increment of the extrapolation tableau relative to the limit.
    pub diagnostic: f64,
    pub variable: LadderVariable,
    pub near_threshold: bool,
    pub converged: bool,
}

/// Neville tableau evaluated at `t = 0`. Returns the limit through all points
/// and the magnitude of the last diagonal increment.
pub fn richardson(t: &[f64], values: &[Complex64]) -> (Complex64, f64) {
    let m = t.len();
    assert!(m >= 2 && values.len() == m);
    let mut p = values.to_vec();
    let mut prev_diag = values[0];
    let mut incr = 0.0;
    for j in 1..m {
        for i in (j..m).rev() {
            p[i] = (p[i] * t[i - j] - p[i - 1] * t[i]) / (t[i - j] - t[i]);
        }
        incr = (p[j] - prev_diag).norm();
        prev_diag = p[j];
    }
    (p[m - 1], incr)
}

fn ladder_nodes(plan: &LadderPlan) -> Vec<f64> {
    match plan.variable {
        LadderVariable::Eps => plan.eps.clone(),
        LadderVariable::SqrtEps => plan.eps.iter().map(|e| e.sqrt()).collect(),
    }
}

/// Extrapolate one scalar sequence.
pub fn extrapolate_scalar(plan: &LadderPlan, values: Vec<Complex64>) -> ExtrapolationLadder {
    let (limit, incr) = richardson(&ladder_nodes(plan), &values);
    let diagnostic = incr / limit.norm().max(f64::MIN_POSITIVE);
    let diagnostic = if incr == 0.0 { 0.0 } else { diagnostic };
    ExtrapolationLadder {
        eps: plan.eps.clone(),
        values,
        limit,
        diagnostic,
        variable: plan.variable,
        near_threshold: plan.near_threshold,
        converged: diagnostic <= plan.tolerance,
    }
}

/// Extrapolate many sequences sharing one ladder. The returned ladder
/// carries the rung values of the component with the largest limit and the
/// diagnostic `max |increment| / max |limit|`.
fn extrapolate_vector(plan: &LadderPlan, rungs: &[Vec<Complex64>]) -> (Vec<Complex64>, Vec<f64>, ExtrapolationLadder) {
    let t = ladder_nodes(plan);
    let n = rungs[0].len();
    let mut limits = Vec::with_capacity(n);
    let mut incrs = Vec::with_capacity(n);
    for e in 0..n {
        let v: Vec<Complex64> = rungs.iter().map(|r| r[e]).collect();
        let (l, i) = richardson(&t, &v);
        limits.push(l);
        incrs.push(i);
    }
    let (imax, scale) =
        limits.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
    let worst = incrs.iter().cloned().fold(0.0, f64::max);
    let diagnostic = if worst == 0.0 { 0.0 } else { worst / scale.max(f64::MIN_POSITIVE) };
    let ladder = ExtrapolationLadder {
        eps: plan.eps.clone(),
        values: rungs.iter().map(|r| r[imax]).collect(),
        limit: limits.get(imax).copied().unwrap_or_default(),
        diagnostic,
        variable: plan.variable,
        near_threshold: plan.near_threshold,
        converged: diagnostic <= plan.tolerance,
    };
    (limits, incrs, ladder)
}

/// Boundary-value kernel `G_{lambda +- i0}` on `[-L, L]^d`, entrywise
/// extrapolated from the ladder. By linearity, convolving with this table
/// equals extrapolating the per-rung convolutions.
#[derive(Clone, Debug)]
pub struct BoundaryKernel {
    pub lambda: f64,
    pub side: Side,
    pub table: KernelTable,
    pub ladder: ExtrapolationLadder,
}

/// Rung tables for every `lambda` from one shared Bessel-product plan.
pub fn ladder_tables(
    d: usize,
    lambdas: &[f64],
    side: Side,
    radius: i64,
    ladder: &LadderConfig,
    cfg: &QuadratureConfig,
) -> Result<Vec<Vec<KernelTable>>> {
    ladder.validate()?;
    let plan = TimePlan::new(d, radius, cfg)?;
    let eps = ladder.schedule();
    let zs: Vec<Complex64> =
        lambdas.iter().flat_map(|&l| eps.iter().map(move |&e| Complex64::new(l, e))).collect();
    let mut tables = plan.evaluate(&zs)?;
    if side == Side::Minus {
        tables = tables.iter().map(|t| t.conj()).collect();
    }
    let mut out = Vec::with_capacity(lambdas.len());
    let mut it = tables.into_iter();
    for _ in lambdas {
        out.push(it.by_ref().take(eps.len()).collect());
    }
    Ok(out)
}

pub fn boundary_kernels(
    d: usize,
    lambdas: &[f64],
    side: Side,
    radius: i64,
    ladder: &LadderConfig,
    cfg: &QuadratureConfig,
) -> Result<Vec<BoundaryKernel>> {
    let rungs = ladder_tables(d, lambdas, side, radius, ladder, cfg)?;
    Ok(lambdas
        .iter()
        .zip(rungs)
        .map(|(&lambda, tabs)| {
            let plan = ladder_plan(d, lambda, ladder);
            let values: Vec<Vec<Complex64>> = tabs.iter().map(|t| t.rep_values().to_vec()).collect();
            let (limits, incrs, lad) = extrapolate_vector(&plan, &values);
            let rung_err: Vec<f64> = (0..limits.len())
                .map(|e| tabs.iter().map(|t| t.rep_errors()[e]).fold(0.0, f64::max))
                .collect();
            let errors: Vec<f64> = incrs.iter().zip(&rung_err).map(|(a, b)| a + b).collect();
            let scale = limits.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let unconverged = errors.iter().map(|e| !(*e <= plan.tolerance * scale)).collect();
            let z = Complex64::new(lambda, 0.0);
            let config = format!(
                "ladder;side={};d={d};lambda={lambda};L={radius};{};{}",
                side.symbol(),
                ladder.canonical(),
                cfg.canonical()
            );
            let table = KernelTable::from_parts(
                tabs[0].sym_index().clone(),
                KernelKind::Resolvent { z },
                limits,
                errors,
                unconverged,
                config,
                cfg.n,
                cfg.r,
            );
            BoundaryKernel { lambda, side, table, ladder: lad }
        })
        .collect())
}

pub(crate) fn support_reach(f: &GridFn) -> i64 {
    f.support().iter().map(|(y, _)| sup_norm(y)).max().unwrap_or(0)
}

/// `H0^{-1} f = K_2 * f` on `[-out_radius, out_radius]^d` (`d >= 3`), with
/// the largest kernel error estimate used.
pub fn h0_inverse_apply(f: &GridFn, out_radius: i64, cfg: &QuadratureConfig) -> Result<(GridFn, f64)> {
    let d = f.dim();
    if d < 3 {
        return invalid("H0 is not invertible on weighted spaces for d < 3");
    }
    let k = kernel_kl(d, 2.0, out_radius + support_reach(f), cfg)?;
    Ok((convolve(&k, f, out_radius)?, k.max_error()))
}

/// `R0(lambda +- i0) f` on the output box via pointwise extrapolation of
/// `R0(lambda +- i eps_k) f`.
pub fn boundary_value_resolvent(
    lambda: f64,
    side: Side,
    f: &GridFn,
    out_radius: i64,
    ladder: &LadderConfig,
    cfg: &QuadratureConfig,
) -> Result<(GridFn, ExtrapolationLadder)> {
    let d = f.dim();
    let plan = ladder_plan(d, lambda, ladder);
    if f.support().is_empty() {
        let lad = extrapolate_scalar(&plan, vec![Complex64::new(0.0, 0.0); plan.eps.len()]);
        return Ok((GridFn::zeros(d, out_radius), lad));
    }
    let tabs = ladder_tables(d, &[lambda], side, out_radius + support_reach(f), ladder, cfg)?.remove(0);
    let rungs: Vec<Vec<Complex64>> =
        tabs.iter().map(|t| convolve(t, f, out_radius).map(|g| g.values().to_vec())).collect::<Result<_>>()?;
    let (limits, _, lad) = extrapolate_vector(&plan, &rungs);
    let mut out = GridFn::zeros(d, out_radius);
    out.values_mut().copy_from_slice(&limits);
    Ok((out, lad))
}

/// `(f, R0(z) f) = sum_{x,y} conj(f(x)) G_z(x - y) f(y)`.
pub fn quadratic_form(k: &KernelTable, f: &GridFn, g: &GridFn) -> Result<Complex64> {
    let gs = g.support();
    let fs = f.support();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut off = vec![0i64; f.dim()];
    for (x, fx) in &fs {
        for (y, gy) in &gs {
            for j in 0..off.len() {
                off[j] = x[j] - y[j];
            }
            acc += fx.conj() * k.value(&off)? * gy;
        }
    }
    Ok(acc)
}

/// Left side of Stone's formula, `(1/pi) Im (f, R0(lambda +- i0) f)`,
/// extrapolating the scalar form rather than the kernel. Since
/// `Im (h0 - lambda - i eps)^{-1} -> pi delta(h0 - lambda)`, this equals
/// `int |f^|^2 dmu` with `dmu = dsigma / |grad h0|`. For side `-` the value
/// is the negative of that integral.
#[derive(Clone, Debug, PartialEq)]
pub struct StoneLhs {
    pub value: f64,
    pub ladder: ExtrapolationLadder,
    /// Fingerprints of the rung tables.
    pub kernel_fingerprints: Vec<String>,
}

pub fn stone_lhs(f: &GridFn, lambda: f64, side: Side, ladder: &LadderConfig, cfg: &QuadratureConfig) -> Result<StoneLhs> {
    let d = f.dim();
    let plan = ladder_plan(d, lambda, ladder);
    let reach = 2 * support_reach(f);
    let (values, kernel_fingerprints) = if f.support().is_empty() {
        (vec![Complex64::new(0.0, 0.0); plan.eps.len()], Vec::new())
    } else {
        let tabs = ladder_tables(d, &[lambda], side, reach, ladder, cfg)?.remove(0);
        let values = tabs.iter().map(|t| quadratic_form(t, f, f)).collect::<Result<_>>()?;
        (values, tabs.iter().map(|t| t.fingerprint()).collect())
    };
    let lad = extrapolate_scalar(&plan, values);
    Ok(StoneLhs { value: lad.limit.im / PI, ladder: lad, kernel_fingerprints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::weighted_norm;
    use crate::resolvent::resolvent_kernel;
    use crate::symbol::apply_h0;

    #[test]
    fn richardson_recovers_polynomials() {
        let t: Vec<f64> = (0..6).map(|k| 0.1 / 2f64.powi(k)).collect();
        let v: Vec<Complex64> = t.iter().map(|x| Complex64::new(2.0 + 3.0 * x - x * x * x, -x)).collect();
        let (l, incr) = richardson(&t, &v);
        assert!((l - Complex64::new(2.0, 0.0)).norm() < 1e-12 && incr < 1e-12);
    }

    #[test]
    fn schedule_and_plan() {
        let cfg = LadderConfig::default();
        let e = cfg.schedule();
        assert_eq!(e.len(), 8);
        assert!(e.windows(2).all(|w| w[1] < w[0]));
        let p = ladder_plan(3, 4.0, &cfg);
        assert_eq!(p.variable, LadderVariable::SqrtEps);
        assert!(p.near_threshold && p.tolerance == 5e-2);
        let q = ladder_plan(3, 2.0, &cfg);
        assert_eq!(q.variable, LadderVariable::Eps);
        assert!(!q.near_threshold && q.tolerance == 1e-3);
    }

    #[test]
    fn zero_input_gives_zero() {
        let f = GridFn::zeros(3, 1);
        let cfg = QuadratureConfig::default();
        let (u, lad) = boundary_value_resolvent(2.0, Side::Plus, &f, 2, &LadderConfig::default(), &cfg).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert!(lad.converged);
        assert_eq!(stone_lhs(&f, 2.0, Side::Plus, &LadderConfig::default(), &cfg).unwrap().value, 0.0);
    }

    #[test]
    fn side_conjugation() {
        let cfg = QuadratureConfig::default();
        let mut f = GridFn::delta(3, &[0, 0, 0], 1);
        f.set(&[1, 0, 0], Complex64::new(0.5, 0.0));
        let lc = LadderConfig::default();
        let (p, _) = boundary_value_resolvent(3.0, Side::Plus, &f, 3, &lc, &cfg).unwrap();
        let (m, _) = boundary_value_resolvent(3.0, Side::Minus, &f, 3, &lc, &cfg).unwrap();
        for (a, b) in p.values().iter().zip(m.values()) {
            assert!((a - b.conj()).norm() < 1e-8);
        }
    }

    #[test]
    fn ladder_below_spectrum_matches_real_kernel() {
        let cfg = QuadratureConfig::default();
        let direct = resolvent_kernel(Complex64::new(-1.0, 0.0), 3, 4, &cfg).unwrap();
        let bk = boundary_kernels(3, &[-1.0], Side::Plus, 4, &LadderConfig::default(), &cfg).unwrap().remove(0);
        assert!(bk.ladder.converged);
        for (a, b) in bk.table.rep_values().iter().zip(direct.rep_values()) {
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn ladder_matches_direct_boundary_value() {
        let cfg = QuadratureConfig::default();
        let lambdas = [0.5, 2.0, 4.0, 6.5, 8.0];
        let direct = TimePlan::new(3, 6, &cfg).unwrap().evaluate_boundary(&lambdas).unwrap();
        let lad = boundary_kernels(3, &lambdas, Side::Plus, 6, &LadderConfig::default(), &cfg).unwrap();
        for (bk, dt) in lad.iter().zip(&direct) {
            let tol = if bk.ladder.near_threshold { 1e-3 } else { 1e-8 };
            assert!(bk.ladder.converged, "lambda {}", bk.lambda);
            for (a, b) in bk.table.rep_values().iter().zip(dt.rep_values()) {
                assert!((a - b).norm() < tol * dt.rep_values()[0].norm(), "lambda {}: {a} vs {b}", bk.lambda);
            }
        }
    }

    #[test]
    fn boundary_value_solves_helmholtz() {
        // (H0 - lambda) R0(lambda + i0) delta_0 = delta_0 inside the box
        let cfg = QuadratureConfig::default();
        let f = GridFn::delta(3, &[0, 0, 0], 0);
        let (u, lad) = boundary_value_resolvent(2.0, Side::Plus, &f, 5, &LadderConfig::default(), &cfg).unwrap();
        assert!(lad.converged);
        let hu = apply_h0(&u);
        for i in 0..u.len() {
            let x = u.site(i);
            if hu.is_interior(&x) {
                let target = if x.iter().all(|&c| c == 0) { 1.0 } else { 0.0 };
                let r = hu.value.values()[i] - 2.0 * u.values()[i];
                assert!((r - target).norm() < 1e-8, "{x:?}: {r}");
            }
        }
    }

    #[test]
    fn stone_lhs_sign_and_form_symmetry() {
        let cfg = QuadratureConfig::default();
        let lc = LadderConfig::default();
        let f = GridFn::from_sites(3, &[(vec![0, 0, 0], Complex64::new(1.0, 0.0)), (vec![0, 1, 0], Complex64::new(-0.7, 0.0))], 1)
            .unwrap();
        let g = GridFn::from_sites(3, &[(vec![1, 0, 0], Complex64::new(0.3, 0.0)), (vec![0, 0, 0], Complex64::new(2.0, 0.0))], 1)
            .unwrap();
        for lambda in [0.7, 5.0, 9.5] {
            assert!(stone_lhs(&f, lambda, Side::Plus, &lc, &cfg).unwrap().value >= -1e-10);
            let plus = boundary_kernels(3, &[lambda], Side::Plus, 2, &lc, &cfg).unwrap().remove(0).table;
            let minus = boundary_kernels(3, &[lambda], Side::Minus, 2, &lc, &cfg).unwrap().remove(0).table;
            // real f, g: (f, R(+) g) = (g, R(+) f) = conj((g, R(-) f))
            let a = quadratic_form(&plus, &f, &g).unwrap();
            let b = quadratic_form(&plus, &g, &f).unwrap();
            let c = quadratic_form(&minus, &g, &f).unwrap().conj();
            assert!((a - c).norm() < 1e-8, "{a} vs {c}");
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
    }
    #[test]
    fn h0_inverse_identity_and_weighted_norm() {
        let cfg = QuadratureConfig::default();
        let f = GridFn::delta(3, &[0, 0, 0], 0);
        let (u16, err) = h0_inverse_apply(&f, 16, &cfg).unwrap();
        let r = apply_h0(&u16);
        for i in 0..u16.len() {
            let x = u16.site(i);
            if r.is_interior(&x) {
                let target = if x.iter().all(|&c| c == 0) { 1.0 } else { 0.0 };
                assert!((r.value.values()[i] - target).norm() <= 10.0 * err);
            }
        }
        let (u32, _) = h0_inverse_apply(&f, 32, &cfg).unwrap();
        let (a, b) = (weighted_norm(&u16, -1.5), weighted_norm(&u32, -1.5));
        assert!((b / a - 1.0).abs() < 0.02, "{a} {b}");
    }
}
