//! The lattice symbol `h0(xi) = 4 sum sin^2(pi xi_j)`, its critical set, and
//! the nearest-neighbour stencil of `H0`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridFn;

/// Point of the torus reduced to the fundamental domain `[-1/2, 1/2)^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPoint {
    xi: Vec<f64>,
}

impl TorusPoint {
    pub fn new(xi: &[f64]) -> Self {
        TorusPoint { xi: xi.iter().map(|&t| reduce(t)).collect() }
    }

    pub fn coords(&self) -> &[f64] {
        &self.xi
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }
}

/// Reduce mod 1 into `[-1/2, 1/2)`; `1/2` maps to `-1/2`.
pub fn reduce(t: f64) -> f64 {
    let mut y = t - (t + 0.5).floor();
    if y >= 0.5 {
        y -= 1.0;
    }
    if y < -0.5 {
        y += 1.0;
    }
    y
}

pub fn h0(xi: &[f64]) -> f64 {
    xi.iter().map(|&t| (PI * t).sin().powi(2)).sum::<f64>() * 4.0
}

pub fn grad_h0(xi: &[f64]) -> Vec<f64> {
    xi.iter().map(|&t| 4.0 * PI * (2.0 * PI * t).sin()).collect()
}

/// Critical point of `h0` together with its Morse index and critical value.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPoint {
    pub xi: Vec<f64>,
    pub morse_index: usize,
    pub value: f64,
}

/// Threshold structure of `h0` in dimension `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolModel {
    pub d: usize,
    pub thresholds: Vec<f64>,
    pub critical_points: Vec<CriticalPoint>,
}

impl SymbolModel {
    pub fn h0(&self, xi: &TorusPoint) -> Result<f64> {
        self.check(xi)?;
        Ok(h0(xi.coords()))
    }

    pub fn grad_h0(&self, xi: &TorusPoint) -> Result<Vec<f64>> {
        self.check(xi)?;
        Ok(grad_h0(xi.coords()))
    }

    fn check(&self, xi: &TorusPoint) -> Result<()> {
        if xi.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: xi.dim() });
        }
        Ok(())
    }

    /// Elliptic thresholds are the extreme values 0 and 4d.
    pub fn is_elliptic_index(&self, morse_index: usize) -> bool {
        morse_index == 0 || morse_index == self.d
    }

    /// Distance from `lambda` to the nearest threshold.
    pub fn threshold_distance(&self, lambda: f64) -> f64 {
        self.thresholds.iter().map(|t| (lambda - t).abs()).fold(f64::INFINITY, f64::min)
    }
}

/// Enumerate the `2^d` critical points `xi in {0, 1/2}^d`.
pub fn critical_data(d: usize) -> SymbolModel {
    assert!(d >= 1, "dimension must be positive");
    let critical_points = (0..1usize << d)
        .map(|mask| {
            let xi: Vec<f64> = (0..d).map(|j| if mask >> j & 1 == 1 { 0.5 } else { 0.0 }).collect();
            let morse_index = mask.count_ones() as usize;
            CriticalPoint { xi, morse_index, value: 4.0 * morse_index as f64 }
        })
        .collect();
    SymbolModel { d, thresholds: (0..=d).map(|k| 4.0 * k as f64).collect(), critical_points }
}

/// Result of applying `H0` on a box with zero extension outside it.
#[derive(Clone, Debug)]
pub struct StencilOutput {
    pub value: GridFn,
    /// Width of the layer next to the box boundary where truncation enters.
    pub boundary_depth: i64,
}

impl StencilOutput {
    /// Sites whose stencil saw only genuine box values.
    pub fn is_interior(&self, x: &[i64]) -> bool {
        x.iter().all(|c| c.abs() <= self.value.radius() - self.boundary_depth)
    }
}

/// `(H0 u)(x) = 2d u(x) - sum_{|e|=1} u(x+e)` on the box of `u`.
pub fn apply_h0(u: &GridFn) -> StencilOutput {
    let d = u.dim();
    let side = u.side();
    let r = u.radius();
    let mut out = GridFn::zeros(d, r);
    let vals = u.values();
    let mut strides = vec![1usize; d];
    for k in (0..d.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * side;
    }
    let mut x = vec![0i64; d];
    let diag = Complex64::new(2.0 * d as f64, 0.0);
    for i in 0..vals.len() {
        u.decode(i, &mut x);
        let mut acc = diag * vals[i];
        for k in 0..d {
            if x[k] < r {
                acc -= vals[i + strides[k]];
            }
            if x[k] > -r {
                acc -= vals[i - strides[k]];
            }
        }
        out.values_mut()[i] = acc;
    }
    StencilOutput { value: out, boundary_depth: 1 }
}
