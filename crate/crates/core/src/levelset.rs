//! Level sets `M_lambda = {h0 = lambda}` sampled through graph charts.
//!
//! Chart `(j, +-)` writes `xi_j = +-g(xi')` with
//! `sin(pi g) = sqrt(lambda/4 - sum_{k != j} sin^2(pi xi_k))`. The parameter
//! domain `xi' in [-1/2, 1/2)^{d-1}` is cut into midpoint cells; each point
//! belongs to the chart whose partial derivative `|d_j h0|` is largest (ties
//! to the lowest `j`, sign from `xi_j`). Cells near the critical set
//! `Sigma_lambda` are subdivided, and points with `|grad h0|` below the
//! cutoff are excised with their weight recorded.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::{GridFn, Potential};
use crate::sum::{pairwise_sum, pairwise_sum_c};
use crate::symbol::{critical_data, grad_h0, h0};

#[derive(Clone, Debug, PartialEq)]
pub struct MeshSample {
    pub xi: Vec<f64>,
    /// Chart axis and sign.
    pub chart: (usize, i8),
    pub sigma: f64,
    pub mu: f64,
}

#[derive(Clone, Debug)]
pub struct LevelSetMesh {
    pub lambda: f64,
    pub d: usize,
    /// Midpoint cells per parameter axis before grading.
    pub refinement: usize,
    pub cutoff: f64,
    /// Whether `lambda` is a threshold (nonempty critical set).
    pub graded: bool,
    pub samples: Vec<MeshSample>,
    pub excised_sigma: f64,
    pub excised_mu: f64,
}

/// Default `|grad h0|` excision cutoff.
pub const DEFAULT_CUTOFF: f64 = 0.05;

fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - y;
            let t = t - t.round();
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

struct Cell {
    center: Vec<f64>,
    size: f64,
}

enum Outcome {
    Kept(MeshSample),
    Excised { sigma: f64, mu: f64 },
    Skip,
}

fn chart_point(lambda: f64, j: usize, sign: f64, xp: &[f64]) -> Option<Vec<f64>> {
    let d = xp.len() + 1;
    let q = lambda / 4.0 - xp.iter().map(|t| (PI * t).sin().powi(2)).sum::<f64>();
    if !(0.0..=1.0).contains(&q) {
        return None;
    }
    let g = q.sqrt().asin() / PI;
    let mut xi = Vec::with_capacity(d);
    xi.extend_from_slice(&xp[..j]);
    xi.push(sign * g);
    xi.extend_from_slice(&xp[j..]);
    // Newton polish along the chart axis
    for _ in 0..4 {
        let r = h0(&xi) - lambda;
        if r.abs() <= 1e-14 * lambda {
            break;
        }
        let dj = 4.0 * PI * (2.0 * PI * xi[j]).sin();
        if dj.abs() < 1e-300 {
            break;
        }
        xi[j] -= r / dj;
    }
    Some(xi)
}

fn owner(grad: &[f64]) -> usize {
    let mut best = 0;
    for (k, g) in grad.iter().enumerate() {
        if g.abs() > grad[best].abs() {
            best = k;
        }
    }
    best
}

fn evaluate_cell(lambda: f64, j: usize, sign: f64, cell: &Cell, d: usize, cutoff: f64) -> Outcome {
    let Some(xi) = chart_point(lambda, j, sign, &cell.center) else {
        return Outcome::Skip;
    };
    let grad = grad_h0(&xi);
    if owner(&grad) != j {
        return Outcome::Skip;
    }
    let s = if xi[j] >= 0.0 { 1.0 } else { -1.0 };
    if s != sign {
        return Outcome::Skip;
    }
    let gn = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let dj = grad[j].abs();
    let area = cell.size.powi(d as i32 - 1);
    let sigma = area * gn / dj;
    let mu = area / dj;
    if gn < cutoff || (h0(&xi) - lambda).abs() > 1e-10 {
        return Outcome::Excised { sigma, mu };
    }
    Outcome::Kept(MeshSample { xi, chart: (j, sign as i8), sigma, mu })
}

/// Sample `M_lambda` for `lambda` in `(0, 4d)` with `refinement` cells per
/// parameter axis and excision cutoff `cutoff` on `|grad h0|`.
pub fn level_set_mesh(lambda: f64, d: usize, refinement: usize, cutoff: f64) -> Result<LevelSetMesh> {
    if d < 2 {
        return invalid("level-set meshing needs d >= 2");
    }
    if !(lambda > 0.0 && lambda < 4.0 * d as f64) {
        return invalid(format!("lambda = {lambda} must lie strictly inside (0, {})", 4 * d));
    }
    if refinement < 2 || !(cutoff > 0.0) {
        return invalid("mesh needs refinement >= 2 and a positive cutoff");
    }
    let model = critical_data(d);
    let sigma_set: Vec<Vec<f64>> = model
        .critical_points
        .iter()
        .filter(|c| (c.value - lambda).abs() <= 1e-12)
        .map(|c| c.xi.clone())
        .collect();
    let graded = !sigma_set.is_empty();
    // finest cell: well inside the excised ball |xi - z| ~ cutoff / (8 pi^2)
    let s_min = cutoff / (8.0 * PI * PI) / 8.0;
    let n = refinement;
    let h = 1.0 / n as f64;
    let dm = d - 1;
    let coarse = n.pow(dm as u32);
    let charts: Vec<(usize, f64)> = (0..d).flat_map(|j| [(j, 1.0), (j, -1.0)]).collect();
    let per_chart: Vec<(Vec<MeshSample>, f64, f64)> = charts
        .par_iter()
        .map(|&(j, sign)| {
            let mut kept = Vec::new();
            let mut ex_sigma = Vec::new();
            let mut ex_mu = Vec::new();
            let mut stack: Vec<Cell> = Vec::new();
            for c in 0..coarse {
                let mut f = c;
                let mut center = vec![0.0; dm];
                for k in (0..dm).rev() {
                    center[k] = ((f % n) as f64 + 0.5) * h - 0.5;
                    f /= n;
                }
                stack.push(Cell { center, size: h });
                while let Some(cell) = stack.pop() {
                    if graded && cell.size > s_min {
                        let near = chart_point(lambda, j, sign, &cell.center)
                            .map(|xi| sigma_set.iter().map(|z| torus_dist(&xi, z)).fold(f64::INFINITY, f64::min))
                            .unwrap_or(f64::INFINITY);
                        if near < 2.0 * cell.size * (d as f64).sqrt() {
                            // push children in reverse so they are visited in lexicographic order
                            let half = cell.size / 2.0;
                            for child in (0..1usize << dm).rev() {
                                let center: Vec<f64> = (0..dm)
                                    .map(|k| {
                                        let bit = (child >> (dm - 1 - k)) & 1;
                                        cell.center[k] + if bit == 1 { half / 2.0 } else { -half / 2.0 }
                                    })
                                    .collect();
                                stack.push(Cell { center, size: half });
                            }
                            continue;
                        }
                    }
                    match evaluate_cell(lambda, j, sign, &cell, d, cutoff) {
                        Outcome::Kept(s) => kept.push(s),
                        Outcome::Excised { sigma, mu } => {
                            ex_sigma.push(sigma);
                            ex_mu.push(mu);
                        }
                        Outcome::Skip => {}
                    }
                }
            }
            (kept, pairwise_sum(&ex_sigma), pairwise_sum(&ex_mu))
        })
        .collect();
    let mut samples = Vec::new();
    let mut es = Vec::new();
    let mut em = Vec::new();
    for (k, s, m) in per_chart {
        samples.extend(k);
        es.push(s);
        em.push(m);
    }
    Ok(LevelSetMesh {
        lambda,
        d,
        refinement,
        cutoff,
        graded,
        samples,
        excised_sigma: pairwise_sum(&es),
        excised_mu: pairwise_sum(&em),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Measure {
    Sigma,
    Mu,
}

impl LevelSetMesh {
    pub fn weights(&self, m: Measure) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| match m {
                Measure::Sigma => s.sigma,
                Measure::Mu => s.mu,
            })
            .collect()
    }

    /// Text export: chart axis, sign, coordinates, sigma-weight, mu-weight.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# level set d={} lambda={} refinement={} cutoff={}", self.d, self.lambda, self.refinement, self.cutoff)?;
        for s in &self.samples {
            let coords: Vec<String> = s.xi.iter().map(|v| crate::format::fmt_f64(*v)).collect();
            writeln!(
                w,
                "{} {} {} {} {}",
                s.chart.0,
                if s.chart.1 > 0 { '+' } else { '-' },
                coords.join(" "),
                crate::format::fmt_f64(s.sigma),
                crate::format::fmt_f64(s.mu)
            )?;
        }
        Ok(())
    }
}

/// `sum_w weight_w * integrand(xi_w)` in sample order.
pub fn surface_integral<F: Fn(&[f64]) -> f64 + Sync>(mesh: &LevelSetMesh, m: Measure, integrand: F) -> f64 {
    let terms: Vec<f64> = mesh
        .samples
        .par_iter()
        .map(|s| {
            let w = match m {
                Measure::Sigma => s.sigma,
                Measure::Mu => s.mu,
            };
            w * integrand(&s.xi)
        })
        .collect();
    pairwise_sum(&terms)
}

/// `f^(xi) = sum_x e^{-2 pi i x.xi} f(x)`.
pub fn fourier_at(support: &[(Vec<i64>, Complex64)], xi: &[f64]) -> Complex64 {
    let terms: Vec<Complex64> = support
        .iter()
        .map(|(x, v)| {
            let phase: f64 = x.iter().zip(xi).map(|(a, b)| *a as f64 * b).sum();
            v * Complex64::from_polar(1.0, -2.0 * PI * phase)
        })
        .collect();
    pairwise_sum_c(&terms)
}

/// Values of `f^` at the samples and `(sum mu |f^|^2)^{1/2}`.
pub fn restrict_fourier(f: &GridFn, mesh: &LevelSetMesh) -> (Vec<Complex64>, f64) {
    let support = f.support();
    let values: Vec<Complex64> = mesh.samples.par_iter().map(|s| fourier_at(&support, &s.xi)).collect();
    let terms: Vec<f64> = values.iter().zip(&mesh.samples).map(|(v, s)| s.mu * v.norm_sqr()).collect();
    let norm = pairwise_sum(&terms).sqrt();
    (values, norm)
}

/// `int_{M_lambda} |f^|^2 dmu`.
pub fn stone_rhs(f: &GridFn, mesh: &LevelSetMesh) -> f64 {
    restrict_fourier(f, mesh).1.powi(2)
}

/// `max_w |(V u)^(xi_w)|`.
pub fn vanishing_test(u: &GridFn, v: &Potential, mesh: &LevelSetMesh) -> f64 {
    let vu: Vec<(Vec<i64>, Complex64)> = v
        .support()
        .into_iter()
        .map(|(x, vx)| {
            let ux = u.get(&x);
            (x, ux * vx)
        })
        .filter(|(_, s)| s.norm() > 0.0)
        .collect();
    mesh.samples.par_iter().map(|s| fourier_at(&vu, &s.xi).norm()).reduce(|| 0.0, f64::max)
}

/// Autocorrelation `g(z) = sum_w mu_w e^{2 pi i z.xi_w}` for `|z|_inf <= 2L`,
/// so that `||f^||^2_{L^2(mu)} = sum_{x,y} conj(f(x)) f(y) g(x - y)` for any
/// `f` supported in `[-L, L]^d`.
pub struct RestrictionGram {
    radius: i64,
    g: GridFn,
}

impl RestrictionGram {
    pub fn new(mesh: &LevelSetMesh, radius: i64) -> Self {
        let d = mesh.d;
        let span = 2 * radius;
        let side = (2 * span + 1) as usize;
        let total = side.pow(d as u32);
        const CHUNK: usize = 256;
        let partial: Vec<Vec<Complex64>> = mesh
            .samples
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = vec![Complex64::new(0.0, 0.0); total];
                let mut phases = vec![Complex64::new(0.0, 0.0); d * side];
                for s in chunk {
                    for j in 0..d {
                        for k in 0..side {
                            let z = k as f64 - span as f64;
                            phases[j * side + k] = Complex64::from_polar(1.0, 2.0 * PI * z * s.xi[j]);
                        }
                    }
                    accumulate(&mut acc, &phases, d, side, s.mu);
                }
                acc
            })
            .collect();
        let mut g = GridFn::zeros(d, span);
        for (i, v) in g.values_mut().iter_mut().enumerate() {
            let col: Vec<Complex64> = partial.iter().map(|p| p[i]).collect();
            *v = pairwise_sum_c(&col);
        }
        RestrictionGram { radius, g }
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    /// `||f^||^2_{L^2(mu)}`.
    pub fn norm_sq(&self, f: &GridFn) -> Result<f64> {
        let support = f.support();
        if support.iter().any(|(x, _)| x.iter().any(|c| c.abs() > self.radius)) {
            return invalid("function support exceeds the Gram radius");
        }
        let d = f.dim();
        let rows: Vec<Complex64> = support
            .par_iter()
            .map(|(x, fx)| {
                let mut off = vec![0i64; d];
                let terms: Vec<Complex64> = support
                    .iter()
                    .map(|(y, fy)| {
                        for j in 0..d {
                            off[j] = x[j] - y[j];
                        }
                        fx.conj() * fy * self.g.get(&off)
                    })
                    .collect();
                pairwise_sum_c(&terms)
            })
            .collect();
        Ok(pairwise_sum_c(&rows).re)
    }
}

fn accumulate(acc: &mut [Complex64], phases: &[Complex64], d: usize, side: usize, w: f64) {
    // acc[z] += w prod_j phases[j][z_j], lexicographic with the last axis fastest
    let mut partial = vec![Complex64::new(w, 0.0); d + 1];
    let mut idx = vec![0usize; d];
    let total = acc.len();
    for flat in 0..total {
        // recompute prefix products only from the first changed axis
        let mut first = d;
        let mut f = flat;
        for j in (0..d).rev() {
            let k = f % side;
            f /= side;
            if idx[j] != k || flat == 0 {
                first = j;
            }
            idx[j] = k;
        }
        for j in first..d {
            partial[j + 1] = partial[j] * phases[j * side + idx[j]];
        }
        acc[flat] += partial[d];
    }
}

/// Check that a point lies on the level set.
pub fn on_level_set(xi: &[f64], lambda: f64) -> bool {
    (h0(xi) - lambda).abs() <= 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_examples() {
        assert!(on_level_set(&[0.25, 0.25, 0.0], 4.0));
        assert!(on_level_set(&[0.25, 0.0, 0.0], 2.0));
        let g = grad_h0(&[0.25, 0.25, 0.0]);
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((1.0 / gn - 1.0 / (4.0 * PI * 2f64.sqrt())).abs() < 1e-15);
        assert!((1.0 / gn - 0.05627).abs() < 1e-5);
    }

    #[test]
    fn rejects_lambda_outside_band() {
        assert!(level_set_mesh(0.0, 3, 10, 0.05).is_err());
        assert!(level_set_mesh(12.0, 3, 10, 0.05).is_err());
        assert!(level_set_mesh(13.0, 3, 10, 0.05).is_err());
    }

    #[test]
    fn samples_on_level_set_with_consistent_weights() {
        for lambda in [2.0, 4.0] {
            let m = level_set_mesh(lambda, 3, 40, 0.05).unwrap();
            assert_eq!(m.graded, lambda == 4.0);
            for s in &m.samples {
                assert!((h0(&s.xi) - lambda).abs() <= 1e-10);
                let g = grad_h0(&s.xi);
                let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((s.mu - s.sigma / gn).abs() <= 1e-14 * s.mu);
            }
        }
    }

    #[test]
    fn surface_area_converges() {
        let a: Vec<f64> = [50, 100, 200]
            .iter()
            .map(|&n| surface_integral(&level_set_mesh(2.0, 3, n, 0.05).unwrap(), Measure::Sigma, |_| 1.0))
            .collect();
        assert!((a[2] / a[1] - 1.0).abs() < 0.02 && (a[1] / a[0] - 1.0).abs() < 0.02, "{a:?}");
        let zero = surface_integral(&level_set_mesh(2.0, 3, 20, 0.05).unwrap(), Measure::Sigma, |_| 0.0);
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn restriction_examples_and_gram() {
        let mesh = level_set_mesh(4.0, 3, 40, 0.05).unwrap();
        let total_mu = surface_integral(&mesh, Measure::Mu, |_| 1.0);
        let (vals, n0) = restrict_fourier(&GridFn::delta(3, &[0, 0, 0], 1), &mesh);
        assert!(vals.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert!((n0 * n0 - total_mu).abs() < 1e-12 * total_mu);
        let (vals, n1) = restrict_fourier(&GridFn::delta(3, &[1, 0, 0], 1), &mesh);
        assert!(vals.iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
        assert!((n1 - n0).abs() < 1e-12 * n0);

        let mut f = GridFn::delta(3, &[0, 0, 0], 1);
        f.set(&[1, 0, 0], Complex64::new(-1.0, 0.0));
        let direct = surface_integral(&mesh, Measure::Mu, |xi| (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -2.0 * PI * xi[0])).norm_sqr());
        let (_, nf) = restrict_fourier(&f, &mesh);
        assert!((nf * nf - direct).abs() <= 1e-10 * direct);
        let gram = RestrictionGram::new(&mesh, 1);
        assert!((gram.norm_sq(&f).unwrap() - direct).abs() <= 1e-10 * direct);
    }

    #[test]
    fn vanishing_examples() {
        let mesh = level_set_mesh(4.0, 3, 20, 0.05).unwrap();
        let u = GridFn::delta(3, &[0, 0, 0], 1);
        assert_eq!(vanishing_test(&u, &Potential::zero(3), &mesh), 0.0);
        let v = Potential::finite(3, &[(vec![0, 0, 0], 1.0)]).unwrap();
        assert!((vanishing_test(&u, &v, &mesh) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stone_rhs_of_zero() {
        let mesh = level_set_mesh(2.0, 3, 20, 0.05).unwrap();
        assert_eq!(stone_rhs(&GridFn::zeros(3, 1), &mesh), 0.0);
    }
}
