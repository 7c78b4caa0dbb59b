//! Functions on truncated lattice boxes `[-L, L]^d`.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::format::fmt_f64;

/// Complex-valued function on the box `[-radius, radius]^d`, stored densely in
/// lexicographic order (last coordinate fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFn {
    d: usize,
    radius: i64,
    values: Vec<Complex64>,
}

impl GridFn {
    pub fn zeros(d: usize, radius: i64) -> Self {
        assert!(d >= 1 && radius >= 0);
        let side = (2 * radius + 1) as usize;
        GridFn {
            d,
            radius,
            values: vec![Complex64::new(0.0, 0.0); side.pow(d as u32)],
        }
    }

    /// Unit mass at `site`; the box radius is the smallest that holds it unless
    /// a larger one is requested.
    pub fn delta(d: usize, site: &[i64], radius: i64) -> Self {
        let mut g = GridFn::zeros(d, radius.max(sup_norm(site)));
        g.set(site, Complex64::new(1.0, 0.0));
        g
    }

    pub fn from_fn(d: usize, radius: i64, mut f: impl FnMut(&[i64]) -> Complex64) -> Self {
        let mut g = GridFn::zeros(d, radius);
        let mut x = vec![0i64; d];
        for i in 0..g.values.len() {
            g.decode(i, &mut x);
            g.values[i] = f(&x);
        }
        g
    }

    /// Build from a list of sites and values; the radius is the smallest box
    /// containing all sites (or `min_radius`, whichever is larger).
    pub fn from_sites(d: usize, entries: &[(Vec<i64>, Complex64)], min_radius: i64) -> Result<Self> {
        let mut radius = min_radius.max(0);
        for (x, _) in entries {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
            radius = radius.max(sup_norm(x));
        }
        let mut g = GridFn::zeros(d, radius);
        for (x, v) in entries {
            let i = g.index(x).expect("site inside box");
            g.values[i] += *v;
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn side(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.d && x.iter().all(|&c| c.abs() <= self.radius)
    }

    /// Linear index of a site, `None` outside the box.
    pub fn index(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let side = self.side() as i64;
        let mut i = 0i64;
        for &c in x {
            i = i * side + (c + self.radius);
        }
        Some(i as usize)
    }

    /// Coordinates of the site with linear index `i`.
    pub fn decode(&self, mut i: usize, out: &mut [i64]) {
        let side = self.side();
        for k in (0..self.d).rev() {
            out[k] = (i % side) as i64 - self.radius;
            i /= side;
        }
    }

    pub fn site(&self, i: usize) -> Vec<i64> {
        let mut x = vec![0; self.d];
        self.decode(i, &mut x);
        x
    }

    /// Value at `x`; zero outside the box (zero extension).
    pub fn get(&self, x: &[i64]) -> Complex64 {
        match self.index(x) {
            Some(i) => self.values[i],
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn set(&mut self, x: &[i64], v: Complex64) {
        let i = self.index(x).expect("site outside box");
        self.values[i] = v;
    }

    /// Nonzero entries in lexicographic site order.
    pub fn support(&self) -> Vec<(Vec<i64>, Complex64)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
            .map(|(i, v)| (self.site(i), *v))
            .collect()
    }

    /// Copy onto a box of a different radius (truncating or zero-padding).
    pub fn resized(&self, radius: i64) -> GridFn {
        GridFn::from_fn(self.d, radius, |x| self.get(x))
    }

    pub fn scale(&mut self, a: Complex64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    /// `self + a * other` on the box of `self`.
    pub fn axpy(&mut self, a: Complex64, other: &GridFn) {
        let mut x = vec![0; self.d];
        for i in 0..self.values.len() {
            self.decode(i, &mut x);
            self.values[i] += a * other.get(&x);
        }
    }

    pub fn conj(&self) -> GridFn {
        GridFn {
            d: self.d,
            radius: self.radius,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// One record per nonzero site: coordinates, real part, imaginary part.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (x, v) in self.support() {
            let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{} {} {}", coords.join(" "), fmt_f64(v.re), fmt_f64(v.im))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R, d: usize, min_radius: i64) -> Result<GridFn> {
        let mut entries = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != d + 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 1,
                    d + 2,
                    toks.len()
                )));
            }
            let x = toks[..d]
                .iter()
                .map(|t| t.parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let re: f64 = toks[d].parse().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let im: f64 = toks[d + 1].parse().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            entries.push((x, Complex64::new(re, im)));
        }
        GridFn::from_sites(d, &entries, min_radius)
    }
}

pub fn sup_norm(x: &[i64]) -> i64 {
    x.iter().map(|c| c.abs()).max().unwrap_or(0)
}

pub fn euclid(x: &[i64]) -> f64 {
    (x.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt()
}

/// Japanese bracket `<x> = (1 + |x|^2)^{1/2}`.
pub fn japanese(x: &[i64]) -> f64 {
    (1.0 + x.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt()
}

/// Decay class of a potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decay {
    Finite,
    /// `|V(x)| <= c <x>^{-exponent}` with `exponent > 2`.
    Envelope { c: f64, exponent: f64 },
}

/// Real potential on a box together with its decay descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    grid: GridFn,
    decay: Decay,
}

impl Potential {
    /// Finitely supported potential from `(site, value)` pairs.
    pub fn finite(d: usize, entries: &[(Vec<i64>, f64)]) -> Result<Self> {
        let cs: Vec<(Vec<i64>, Complex64)> =
            entries.iter().map(|(x, v)| (x.clone(), Complex64::new(*v, 0.0))).collect();
        Ok(Potential { grid: GridFn::from_sites(d, &cs, 0)?, decay: Decay::Finite })
    }

    pub fn zero(d: usize) -> Self {
        Potential { grid: GridFn::zeros(d, 0), decay: Decay::Finite }
    }

    pub fn from_grid(grid: GridFn, decay: Decay) -> Result<Self> {
        if grid.values().iter().any(|v| v.im != 0.0 || !v.re.is_finite()) {
            return invalid("potential values must be real and finite");
        }
        if let Decay::Envelope { c, exponent } = decay {
            if exponent <= 2.0 {
                return invalid("envelope exponent must exceed 2");
            }
            let mut x = vec![0; grid.dim()];
            for i in 0..grid.len() {
                grid.decode(i, &mut x);
                if grid.values()[i].re.abs() > c * japanese(&x).powf(-exponent) * (1.0 + 1e-12) {
                    return invalid(format!("value at {x:?} exceeds the stated envelope"));
                }
            }
        }
        Ok(Potential { grid, decay })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn decay(&self) -> Decay {
        self.decay
    }

    pub fn grid(&self) -> &GridFn {
        &self.grid
    }

    pub fn get(&self, x: &[i64]) -> f64 {
        self.grid.get(x).re
    }

    /// Nonzero sites and values in lexicographic order.
    pub fn support(&self) -> Vec<(Vec<i64>, f64)> {
        self.grid.support().into_iter().map(|(x, v)| (x, v.re)).collect()
    }

    pub fn scaled(&self, g: f64) -> Potential {
        let mut grid = self.grid.clone();
        grid.scale(Complex64::new(g, 0.0));
        let decay = match self.decay {
            Decay::Finite => Decay::Finite,
            Decay::Envelope { c, exponent } => Decay::Envelope { c: c * g.abs(), exponent },
        };
        Potential { grid, decay }
    }

    pub fn sup(&self) -> f64 {
        self.grid.max_abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let g = GridFn::zeros(3, 2);
        for i in 0..g.len() {
            assert_eq!(g.index(&g.site(i)), Some(i));
        }
        assert_eq!(g.index(&[3, 0, 0]), None);
        assert_eq!(g.get(&[9, 9, 9]), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn support_matches_nonzeros() {
        let mut g = GridFn::zeros(2, 3);
        g.set(&[1, -2], Complex64::new(2.0, 0.0));
        g.set(&[-3, 0], Complex64::new(0.0, 1.0));
        let s = g.support();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].0, vec![-3, 0]);
        assert_eq!(s[1].0, vec![1, -2]);
    }

    #[test]
    fn text_roundtrip() {
        let mut g = GridFn::zeros(3, 2);
        g.set(&[0, 1, -2], Complex64::new(0.1, -1.0 / 3.0));
        g.set(&[2, 2, 2], Complex64::new(1e-300, 7.0));
        let mut buf = Vec::new();
        g.write_text(&mut buf).unwrap();
        let h = GridFn::read_text(&buf[..], 3, 2).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn envelope_is_enforced() {
        let g = GridFn::from_sites(1, &[(vec![3], Complex64::new(1.0, 0.0))], 0).unwrap();
        assert!(Potential::from_grid(g.clone(), Decay::Envelope { c: 1.0, exponent: 3.0 }).is_err());
        assert!(Potential::from_grid(g, Decay::Envelope { c: 100.0, exponent: 3.0 }).is_ok());
    }
}
