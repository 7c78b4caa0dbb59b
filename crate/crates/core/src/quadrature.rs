//! Quadrature rules on the torus and on intervals.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::sum::pairwise_sum_c;

/// Settings for singular torus quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureConfig {
    /// Grid points per axis for torus rules; time-domain rules scale their
    /// node density with `n / 64`.
    pub n: usize,
    /// Radius of the singular patch around the origin.
    pub r: f64,
    /// Whether the analytic continuum part is added back.
    pub continuum_tail: bool,
    pub target_rel: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { n: 64, r: 0.125, continuum_tail: true, target_rel: 1e-6 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 16 || self.n % 2 != 0 {
            return invalid(format!("grid size N must be even and at least 16 (got {})", self.n));
        }
        if !(self.r > 0.0 && self.r <= 0.25) {
            return invalid(format!("cutoff radius must lie in (0, 1/4] (got {})", self.r));
        }
        if !(self.target_rel > 0.0) {
            return invalid("target relative error must be positive");
        }
        Ok(())
    }

    pub fn canonical(&self) -> String {
        format!("N={};r={};tail={};target={:e}", self.n, self.r, self.continuum_tail, self.target_rel)
    }

    pub fn doubled(&self) -> Self {
        QuadratureConfig { n: 2 * self.n, ..self.clone() }
    }
}

/// Midpoint-shifted nodes `(m + 1/2)/n - 1/2`, `m = 0..n`.
pub fn torus_nodes(n: usize) -> Vec<f64> {
    (0..n).map(|m| (m as f64 + 0.5) / n as f64 - 0.5).collect()
}

/// Equal-weight tensor rule on `T^d` with `n^d` shifted nodes. Summation is a
/// fixed pairwise tree over the node lattice.
pub fn trapezoid_integral<F>(d: usize, n: usize, f: F) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    if n < 4 {
        return invalid(format!("trapezoid rule needs at least 4 points per axis (got {n})"));
    }
    if d == 0 {
        return invalid("dimension must be positive");
    }
    let nodes = torus_nodes(n);
    let partial: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|m| {
            let mut xi = vec![0.0; d];
            xi[0] = nodes[m];
            nested_sum(&f, &nodes, &mut xi, 1)
        })
        .collect();
    Ok(pairwise_sum_c(&partial) / (n as f64).powi(d as i32))
}

fn nested_sum<F: Fn(&[f64]) -> Complex64>(f: &F, nodes: &[f64], xi: &mut Vec<f64>, axis: usize) -> Complex64 {
    if axis == xi.len() {
        return f(xi);
    }
    let mut vals = Vec::with_capacity(nodes.len());
    for &t in nodes {
        xi[axis] = t;
        vals.push(nested_sum(f, nodes, xi, axis + 1));
    }
    pairwise_sum_c(&vals)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite Gauss-Legendre rule on `[a, b]` with `panels` equal panels.
pub fn composite_gl(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(lo + 0.5 * h * (xi + 1.0));
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}
