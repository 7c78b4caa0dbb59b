//! Kernel tables `K_l(x) = int_{T^d} e^{2 pi i x.xi} h0(xi)^{-l/2} dxi` and
//! resolvent tables `G_z(x)`, with per-entry error estimates and a text cache.
//!
//! `K_l` is evaluated through the heat-kernel representation
//!
//! `K_l(x) = Gamma(l/2)^{-1} int_0^inf t^{l/2-1} prod_j e^{-2t} I_{x_j}(2t) dt`,
//!
//! integrated in `log t` with composite Gauss-Legendre panels. The large-`t`
//! piece uses the Gaussian expansion of the lattice heat kernel with its first
//! correction and is integrated in closed form. Error estimates compare the
//! rule with a rule of twice the node density.
//!
//! [`kernel_kl_fourier`] is an independent route through the torus integral:
//! smooth cutoff of the singular patch, radial continuum transform of the
//! cutoff part, shifted trapezoid rule for the bounded remainder.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::format::{fingerprint, fmt_f64};
use crate::grid::GridFn;
use crate::quadrature::{composite_gl, gauss_legendre, trapezoid_integral, QuadratureConfig};
use crate::special::{gamma, scaled_bessel_i};
use crate::sum::pairwise_sum;
use crate::symbol::h0;
use crate::symindex::SymIndex;

/// What a table holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelKind {
    /// Inverse Fourier coefficients of `h0^{-l/2}`.
    Kl { l: f64 },
    /// Inverse Fourier coefficients of `(h0 - z)^{-1}`.
    Resolvent { z: Complex64 },
}

impl KernelKind {
    fn tag(&self) -> &'static str {
        match self {
            KernelKind::Kl { .. } => "K",
            KernelKind::Resolvent { .. } => "G",
        }
    }

    fn param(&self) -> String {
        match self {
            KernelKind::Kl { l } => fmt_f64(*l),
            KernelKind::Resolvent { z } => format!("{},{}", fmt_f64(z.re), fmt_f64(z.im)),
        }
    }
}

/// Kernel values on `[-L, L]^d`, stored once per symmetry orbit.
#[derive(Clone, Debug)]
pub struct KernelTable {
    index: SymIndex,
    kind: KernelKind,
    values: Vec<Complex64>,
    errors: Vec<f64>,
    unconverged: Vec<bool>,
    config: String,
    n: usize,
    r: f64,
}

impl KernelTable {
    pub(crate) fn from_parts(
        index: SymIndex,
        kind: KernelKind,
        values: Vec<Complex64>,
        errors: Vec<f64>,
        unconverged: Vec<bool>,
        config: String,
        n: usize,
        r: f64,
    ) -> Self {
        assert_eq!(values.len(), index.len());
        assert_eq!(errors.len(), index.len());
        assert_eq!(unconverged.len(), index.len());
        KernelTable { index, kind, values, errors, unconverged, config, n, r }
    }

    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    pub fn radius(&self) -> i64 {
        self.index.radius()
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn sym_index(&self) -> &SymIndex {
        &self.index
    }

    /// Orbit representatives in storage order with their values.
    pub fn rep_values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn rep_errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn get(&self, x: &[i64]) -> Option<Complex64> {
        self.index.rank(x).map(|i| self.values[i])
    }

    /// Value at `x` or an error naming the uncovered offset.
    pub fn value(&self, x: &[i64]) -> Result<Complex64> {
        self.get(x).ok_or_else(|| Error::MissingOffset { offset: x.to_vec() })
    }

    pub fn real(&self, x: &[i64]) -> Result<f64> {
        self.value(x).map(|v| v.re)
    }

    pub fn error(&self, x: &[i64]) -> Result<f64> {
        self.index.rank(x).map(|i| self.errors[i]).ok_or_else(|| Error::MissingOffset { offset: x.to_vec() })
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().fold(0.0, |m, &e| m.max(e))
    }

    pub fn unconverged_count(&self) -> usize {
        self.unconverged.iter().filter(|&&u| u).count()
    }

    pub fn is_unconverged(&self, x: &[i64]) -> bool {
        self.index.rank(x).map(|i| self.unconverged[i]).unwrap_or(true)
    }

    /// Dense copy on `[-radius, radius]^d` (radius at most the table radius).
    pub fn to_grid(&self, radius: i64) -> Result<GridFn> {
        if radius > self.radius() {
            return Err(Error::MissingOffset { offset: vec![radius; self.dim()] });
        }
        Ok(GridFn::from_fn(self.dim(), radius, |x| self.values[self.index.rank(x).unwrap()]))
    }

    pub fn header(&self) -> String {
        format!(
            "LRK1 {} {} {} {} {} {}",
            self.dim(),
            self.kind.tag(),
            self.kind.param(),
            self.radius(),
            self.n,
            fmt_f64(self.r)
        )
    }

    /// Fingerprint of the construction parameters (kind, box, quadrature).
    pub fn fingerprint(&self) -> String {
        fingerprint(&format!("{}|{}", self.header(), self.config))
    }

    /// Same table with every value conjugated.
    pub fn conj(&self) -> KernelTable {
        let kind = match self.kind {
            KernelKind::Resolvent { z } => KernelKind::Resolvent { z: z.conj() },
            k => k,
        };
        KernelTable {
            values: self.values.iter().map(|v| v.conj()).collect(),
            kind,
            ..self.clone()
        }
    }

    /// Cache format: header line, then one record per offset of the full box in
    /// lexicographic order: coordinates, value (real, or real and imaginary
    /// parts), error estimate.
    pub fn write_cache<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "{}", self.header())?;
        writeln!(w, "# config {}", self.config)?;
        let d = self.dim();
        let probe = GridFn::zeros(d, self.radius());
        let mut x = vec![0i64; d];
        let mut line = String::new();
        for i in 0..probe.len() {
            probe.decode(i, &mut x);
            let k = self.index.rank(&x).unwrap();
            line.clear();
            for c in &x {
                line.push_str(&c.to_string());
                line.push(' ');
            }
            let v = self.values[k];
            match self.kind {
                KernelKind::Kl { .. } => line.push_str(&fmt_f64(v.re)),
                KernelKind::Resolvent { .. } => {
                    line.push_str(&fmt_f64(v.re));
                    line.push(' ');
                    line.push_str(&fmt_f64(v.im));
                }
            }
            line.push(' ');
            line.push_str(&fmt_f64(self.errors[k]));
            if self.unconverged[k] {
                line.push_str(" unconverged");
            }
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_cache<R: BufRead>(r: R) -> Result<KernelTable> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty kernel file".into()))??;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 7 || toks[0] != "LRK1" {
            return Err(Error::Parse(format!("bad kernel header: {header}")));
        }
        let perr = |e: &dyn std::fmt::Display| Error::Parse(format!("bad kernel header: {e}"));
        let d: usize = toks[1].parse().map_err(|e| perr(&e))?;
        let kind = match toks[2] {
            "K" => KernelKind::Kl { l: toks[3].parse().map_err(|e| perr(&e))? },
            "G" => {
                let (a, b) = toks[3].split_once(',').ok_or_else(|| perr(&"complex parameter"))?;
                KernelKind::Resolvent {
                    z: Complex64::new(a.parse().map_err(|e| perr(&e))?, b.parse().map_err(|e| perr(&e))?),
                }
            }
            other => return Err(perr(&format!("unknown kind {other}"))),
        };
        let radius: i64 = toks[4].parse().map_err(|e| perr(&e))?;
        let n: usize = toks[5].parse().map_err(|e| perr(&e))?;
        let r: f64 = toks[6].parse().map_err(|e| perr(&e))?;
        let index = SymIndex::new(d, radius);
        let mut values = vec![Complex64::new(f64::NAN, 0.0); index.len()];
        let mut errors = vec![f64::NAN; index.len()];
        let mut unconverged = vec![false; index.len()];
        let mut config = String::new();
        let ncols = d + if matches!(kind, KernelKind::Kl { .. }) { 2 } else { 3 };
        for line in lines {
            let line = line?;
            if let Some(c) = line.strip_prefix("# config ") {
                config = c.to_string();
                continue;
            }
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() < ncols {
                return Err(Error::Parse(format!("short kernel record: {line}")));
            }
            let x: Vec<i64> = t[..d]
                .iter()
                .map(|s| s.parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(e.to_string()))?;
            let k = index.rank(&x).ok_or_else(|| Error::Parse(format!("offset outside box: {line}")))?;
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(e.to_string()));
            let (v, e) = match kind {
                KernelKind::Kl { .. } => (Complex64::new(num(t[d])?, 0.0), num(t[d + 1])?),
                KernelKind::Resolvent { .. } => (Complex64::new(num(t[d])?, num(t[d + 1])?), num(t[d + 2])?),
            };
            values[k] = v;
            errors[k] = e;
            unconverged[k] = t.get(ncols).map(|s| *s == "unconverged").unwrap_or(false);
        }
        if values.iter().any(|v| v.re.is_nan()) {
            return Err(Error::Parse("kernel file does not cover its box".into()));
        }
        Ok(KernelTable { index, kind, values, errors, unconverged, config, n, r })
    }
}

/// On-disk store of kernel tables keyed by construction fingerprint.
#[derive(Clone, Debug)]
pub struct KernelCache {
    dir: PathBuf,
}

impl KernelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        KernelCache { dir: dir.into() }
    }

    /// Cache rooted at `$LRK_CACHE_DIR`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os("LRK_CACHE_DIR").map(KernelCache::new)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("lrk1-{}.txt", fingerprint(key)))
    }

    /// Load the table stored under `key` or compute and store it. The file is
    /// written to a temporary name and renamed, so concurrent writers of the
    /// same key leave one complete file.
    pub fn get_or_compute(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<KernelTable>,
    ) -> Result<KernelTable> {
        let path = self.path(key);
        if let Ok(f) = fs::File::open(&path) {
            if let Ok(t) = KernelTable::read_cache(BufReader::new(f)) {
                if t.config == key {
                    return Ok(t);
                }
            }
        }
        let mut t = compute()?;
        t.config = key.to_string();
        fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!(".{}.{}", fingerprint(key), std::process::id()));
        t.write_cache(fs::File::create(&tmp)?)?;
        fs::rename(&tmp, &path)?;
        Ok(t)
    }
}

/// `c_d = Gamma(d/2 - 1) / (4 pi^{d/2})`.
pub fn continuum_constant(d: usize) -> f64 {
    gamma(d as f64 / 2.0 - 1.0) / (4.0 * PI.powf(d as f64 / 2.0))
}

/// Leading asymptotics `c_d |x|^{2-d}` of `K_2`.
pub fn continuum_tail(x: &[f64]) -> Result<f64> {
    let d = x.len();
    if d < 3 {
        return invalid(format!("continuum tail needs d >= 3 (got {d})"));
    }
    let r = x.iter().map(|t| t * t).sum::<f64>().sqrt();
    if r == 0.0 {
        return invalid("continuum tail is singular at x = 0");
    }
    Ok(continuum_constant(d) * r.powf(2.0 - d as f64))
}

const GL_ORDER: usize = 16;
const T_MIN: f64 = 1e-10;

/// Log-spaced composite Gauss-Legendre rule on `[t_min, t_max]`; weights include
/// the Jacobian `dt = t ds`.
pub(crate) struct LogRule {
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    pub panel: usize,
}

pub(crate) fn log_rule(t_min: f64, t_max: f64, panel_width: f64) -> LogRule {
    let (a, b) = (t_min.ln(), t_max.ln());
    let panels = ((b - a) / panel_width).ceil().max(1.0) as usize;
    let (s, ws) = composite_gl(a, b, panels, GL_ORDER);
    let t: Vec<f64> = s.iter().map(|v| v.exp()).collect();
    let w = ws.iter().zip(&t).map(|(wi, ti)| wi * ti).collect();
    LogRule { t, w, panel: GL_ORDER }
}

/// Sum `weights[i] * prod_j table[a_j][i]` panel by panel, then pairwise over
/// panels.
pub(crate) fn heat_entry(table: &[Vec<f64>], weights: &[f64], a: &[i64], panel: usize, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    let n = weights.len();
    let rows: Vec<&[f64]> = a.iter().map(|&k| table[k as usize].as_slice()).collect();
    let mut i = 0;
    while i < n {
        let end = (i + panel).min(n);
        let mut s = 0.0;
        for k in i..end {
            let mut p = weights[k];
            for r in &rows {
                p *= r[k];
            }
            s += p;
        }
        buf.push(s);
        i = end;
    }
    pairwise_sum(buf)
}

/// Transposed table `out[n][i] = e^{-2 t_i} I_n(2 t_i)` for `n <= nmax`.
pub(crate) fn heat_table(ts: &[f64], nmax: usize) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = ts.par_iter().map(|&t| scaled_bessel_i(2.0 * t, nmax)).collect();
    (0..=nmax).map(|n| cols.iter().map(|c| c[n]).collect()).collect()
}

/// Closed form of `int_T^inf t^{a-1} e^{-b/t} dt` for `a < 0`, `0 <= b <= T`.
fn tail_moment(a: f64, b: f64, t: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = t.powf(a); // (-b)^k T^{a-k} / k!
    for k in 0..200 {
        let contrib = term / (k as f64 - a);
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs() {
            break;
        }
        term *= -b / (t * (k + 1) as f64);
    }
    sum
}

/// Large-`t` contribution: `prod_j e^{-2t} I_{a_j}(2t)` replaced by
/// `(4 pi t)^{-d/2} e^{-|a|^2/4t} prod_j (1 + 1/(16t) - a_j^2/(16t^2) + a_j^4/(192 t^3))`.
/// Returns the integral against `t^{alpha - 1}` over `[T, inf)` and a bound on
/// the neglected next order.
fn heat_tail(a: &[i64], alpha: f64, t0: f64) -> (f64, f64) {
    let d = a.len();
    let mut poly = vec![1.0f64];
    for &aj in a {
        let a2 = (aj * aj) as f64;
        let f = [1.0, 1.0 / 16.0, -a2 / 16.0, a2 * a2 / 192.0];
        let mut next = vec![0.0; poly.len() + 3];
        for (i, p) in poly.iter().enumerate() {
            for (k, fk) in f.iter().enumerate() {
                next[i + k] += p * fk;
            }
        }
        poly = next;
    }
    let b = a.iter().map(|&c| (c * c) as f64).sum::<f64>() / 4.0;
    let pref = (4.0 * PI).powf(-(d as f64) / 2.0);
    let beta = alpha - d as f64 / 2.0;
    let mut total = 0.0;
    for (m, c) in poly.iter().enumerate() {
        if *c != 0.0 {
            total += c * tail_moment(beta - m as f64, b, t0);
        }
    }
    let lead = tail_moment(beta, b, t0).abs();
    let amax = a.iter().map(|c| c.abs()).max().unwrap_or(0) as f64;
    let scale = (1.0 + amax * amax / t0).powi(4);
    (pref * total, pref * lead * scale * d as f64 / (t0 * t0))
}

/// Evaluate a heat-route integral `int_0^inf phi(t) prod_j p_t(a_j) dt` for all
/// orbit representatives, where `phi(t) = t^{alpha-1} * g(t)`.
struct HeatSpec<'a> {
    alpha: f64,
    damping: f64,
    scale: f64,
    tail: bool,
    t_max: f64,
    panel_width: f64,
    reps: &'a [Vec<i64>],
    nmax: usize,
}

fn heat_integrate(plan: &HeatSpec) -> (Vec<f64>, Vec<f64>) {
    let rule = log_rule(T_MIN, plan.t_max, plan.panel_width);
    let weights: Vec<f64> = rule
        .t
        .iter()
        .zip(&rule.w)
        .map(|(t, w)| w * t.powf(plan.alpha - 1.0) * (-plan.damping * t).exp() * plan.scale)
        .collect();
    let table = heat_table(&rule.t, plan.nmax);
    let d = plan.reps.first().map(|a| a.len()).unwrap_or(1);
    plan.reps
        .par_iter()
        .map_init(Vec::new, |buf, a| {
            let body = heat_entry(&table, &weights, a, rule.panel, buf);
            // [0, T_MIN]: p_t(a) ~ t^a / a! (1 - 2t) per axis at leading order
            let m: i64 = a.iter().sum();
            let fact: f64 = a.iter().map(|&k| (1..=k).map(|v| v as f64).product::<f64>()).product();
            let e = plan.alpha + m as f64;
            let head = plan.scale * (T_MIN.powf(e) / e - 2.0 * d as f64 * T_MIN.powf(e + 1.0) / (e + 1.0)) / fact;
            let (tail, tail_err) = if plan.tail {
                let (v, err) = heat_tail(a, plan.alpha, plan.t_max);
                (v * plan.scale, err * plan.scale)
            } else {
                (0.0, 0.0)
            };
            (body + head + tail, tail_err)
        })
        .unzip()
}

/// `K_l` on `[-L, L]^d` by the heat-kernel route.
/// Construction string recorded by [`kernel_kl`]; usable as a cache key.
pub fn kernel_kl_config(d: usize, l: f64, radius: i64, cfg: &QuadratureConfig) -> String {
    format!("heat;d={d};l={l};L={radius};{}", cfg.canonical())
}

pub fn kernel_kl(d: usize, l: f64, radius: i64, cfg: &QuadratureConfig) -> Result<KernelTable> {
    cfg.validate()?;
    if d < 1 || !(l > 0.0 && l < d as f64) {
        return invalid(format!("kernel K_l needs 0 < l < d (got l={l}, d={d})"));
    }
    if radius < 0 {
        return invalid("box radius must be nonnegative");
    }
    let index = SymIndex::new(d, radius);
    let reps = index.representatives();
    let r2 = d as f64 * (radius * radius) as f64;
    let t_max = (4.0 * r2).max(2000.0);
    let width = 32.0 / cfg.n as f64;
    let mk = |w: f64| HeatSpec {
        alpha: l / 2.0,
        damping: 0.0,
        scale: 1.0 / gamma(l / 2.0),
        tail: true,
        t_max,
        panel_width: w,
        reps: &reps,
        nmax: radius as usize,
    };
    let (coarse, _) = heat_integrate(&mk(width));
    let (fine, tail_err) = heat_integrate(&mk(width / 2.0));
    let mut values = Vec::with_capacity(reps.len());
    let mut errors = Vec::with_capacity(reps.len());
    let mut unconverged = Vec::with_capacity(reps.len());
    for k in 0..reps.len() {
        let err = (fine[k] - coarse[k]).abs() + tail_err[k] + 64.0 * f64::EPSILON * fine[k].abs();
        values.push(Complex64::new(fine[k], 0.0));
        errors.push(err);
        unconverged.push(!(err <= cfg.target_rel * fine[k].abs()) || !fine[k].is_finite());
    }
    let config = kernel_kl_config(d, l, radius, cfg);
    Ok(KernelTable::from_parts(index, KernelKind::Kl { l }, values, errors, unconverged, config, cfg.n, cfg.r))
}

/// Real resolvent kernel `(h0 - z)^{-1}` for real `z < 0` via
/// `int_0^inf e^{z t} prod_j p_t(x_j) dt`.
pub(crate) fn resolvent_below_spectrum(d: usize, z: f64, radius: i64, cfg: &QuadratureConfig) -> Result<KernelTable> {
    if !(z < 0.0) {
        return invalid("heat-route resolvent requires z < 0");
    }
    let index = SymIndex::new(d, radius);
    let reps = index.representatives();
    let t_max = 60.0 / -z + 10.0;
    let width = 32.0 / cfg.n as f64;
    let mk = |w: f64| HeatSpec {
        alpha: 1.0,
        damping: -z,
        scale: 1.0,
        tail: false,
        t_max,
        panel_width: w,
        reps: &reps,
        nmax: radius as usize,
    };
    let (coarse, _) = heat_integrate(&mk(width));
    let (fine, _) = heat_integrate(&mk(width / 2.0));
    let errors: Vec<f64> = fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| (f - c).abs() + 64.0 * f64::EPSILON * f.abs() + (-z * t_max).exp())
        .collect();
    let unconverged = errors.iter().zip(&fine).map(|(e, f)| !(*e <= cfg.target_rel * f.abs())).collect();
    let config = format!("heat-resolvent;d={d};z={z};L={radius};{}", cfg.canonical());
    Ok(KernelTable::from_parts(
        index,
        KernelKind::Resolvent { z: Complex64::new(z, 0.0) },
        fine.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        errors,
        unconverged,
        config,
        cfg.n,
        cfg.r,
    ))
}

/// Smooth radial cutoff: 1 on `[0, r]`, 0 beyond `2r`.
pub fn cutoff(rho: f64, r: f64) -> f64 {
    if rho <= r {
        return 1.0;
    }
    if rho >= 2.0 * r {
        return 0.0;
    }
    let s = (2.0 * r - rho) / r;
    let f = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
    f(s) / (f(s) + f(1.0 - s))
}

/// `J_nu(z) / z^nu` by its power series (entire in `z`).
fn bessel_j_over_power(nu: f64, z: f64) -> f64 {
    let q = -(z * z) / 4.0;
    let mut term = 1.0 / (2f64.powf(nu) * gamma(nu + 1.0));
    let mut sum = term;
    for m in 1..400 {
        term *= q / (m as f64 * (m as f64 + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `int_{R^d} e^{2 pi i x.xi} chi(|xi|) (4 pi^2 |xi|^2)^{-l/2} dxi` by the radial
/// Hankel transform.
fn continuum_cutoff_part(d: usize, l: f64, x: &[i64], r: f64) -> f64 {
    let nu = d as f64 / 2.0 - 1.0;
    let rx = x.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    // substitution rho = 2r s^q removes the rho^{d-1-l} endpoint behaviour
    let q = 1.0 / (d as f64 - l);
    let (gx, gw) = gauss_legendre(48);
    let panels = 64;
    let mut total = 0.0;
    for p in 0..panels {
        let (lo, hi) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
        for (xi, wi) in gx.iter().zip(&gw) {
            let s = lo + 0.5 * (hi - lo) * (xi + 1.0);
            let w = 0.5 * (hi - lo) * wi;
            let rho = 2.0 * r * s.powf(q);
            let drho = 2.0 * r * q * s.powf(q - 1.0);
            let z = 2.0 * PI * rx * rho;
            // 2 pi |x|^{-nu} J_nu(2 pi |x| rho) rho^{nu+1} = 2 pi (2 pi)^nu rho^{2nu+1} [J_nu(z)/z^nu]
            let radial = 2.0 * PI * (2.0 * PI).powf(nu) * rho.powf(2.0 * nu + 1.0) * bessel_j_over_power(nu, z);
            total += w * drho * cutoff(rho, r) * (2.0 * PI * rho).powf(-l) * radial;
        }
    }
    total
}

/// One entry of `K_l` by the torus route; returns the value and the
/// grid-doubling error estimate.
pub fn kernel_kl_fourier(d: usize, l: f64, x: &[i64], cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    if !(l > 0.0 && l < d as f64) {
        return invalid(format!("kernel K_l needs 0 < l < d (got l={l}, d={d})"));
    }
    let r = cfg.r;
    let xf: Vec<f64> = x.iter().map(|&c| c as f64).collect();
    let remainder = |n: usize| -> Result<f64> {
        let v = trapezoid_integral(d, n, |xi| {
            let rho = xi.iter().map(|t| t * t).sum::<f64>().sqrt();
            let mut f = h0(xi).powf(-l / 2.0);
            if cfg.continuum_tail {
                f -= cutoff(rho, r) * (4.0 * PI * PI * rho * rho).powf(-l / 2.0);
            }
            let phase = 2.0 * PI * xi.iter().zip(&xf).map(|(a, b)| a * b).sum::<f64>();
            Complex64::new(f * phase.cos(), 0.0)
        })?;
        Ok(v.re)
    };
    let patch = if cfg.continuum_tail { continuum_cutoff_part(d, l, x, r) } else { 0.0 };
    let coarse = remainder(cfg.n)? + patch;
    let fine = remainder(2 * cfg.n)? + patch;
    Ok((fine, (fine - coarse).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuum_examples() {
        assert!((continuum_tail(&[5.0, 0.0, 0.0]).unwrap() - 0.0159155).abs() < 1e-6);
        assert!((continuum_tail(&[1.0, 0.0, 0.0, 0.0]).unwrap() - 1.0 / (4.0 * PI * PI)).abs() < 1e-15);
        let a = continuum_tail(&[3.0, 4.0, 0.0]).unwrap();
        let b = continuum_tail(&[5.0, 0.0, 0.0]).unwrap();
        assert!((a - b).abs() < 1e-16);
        assert!(continuum_tail(&[0.0; 3]).is_err());
        assert!(continuum_tail(&[1.0, 1.0]).is_err());
        assert!((continuum_constant(3) - 1.0 / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn tail_moment_matches_direct_sum() {
        // int_T^inf t^{a-1} e^{-b/t} dt with a=-3/2, b=3, T=50 against a fine rule in u = 1/t
        let (a, b, t0) = (-1.5, 3.0, 50.0);
        let n = 200_000;
        let h = (1.0 / t0) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) * h;
            s += u.powf(-a - 1.0) * (-b * u).exp() * h;
        }
        assert!((tail_moment(a, b, t0) - s).abs() < 1e-8 * s);
    }

    #[test]
    fn cutoff_is_a_partition() {
        assert_eq!(cutoff(0.1, 0.125), 1.0);
        assert_eq!(cutoff(0.3, 0.125), 0.0);
        let m = cutoff(0.1875, 0.125);
        assert!((m - 0.5).abs() < 1e-12);
    }

    #[test]
    fn k2_origin_three_dimensions() {
        let t = kernel_kl(3, 2.0, 2, &QuadratureConfig::default()).unwrap();
        let v = t.real(&[0, 0, 0]).unwrap();
        // classical simple-cubic value W/6 with W = 1.516386059...
        assert!((v - 1.516_386_059_151_978 / 6.0).abs() < 1e-10, "{v}");
        assert_eq!(t.get(&[1, 0, 0]), t.get(&[0, -1, 0]));
        assert_eq!(t.unconverged_count(), 0);
    }

    #[test]
    fn fourier_route_agrees_near_origin() {
        let t = kernel_kl(3, 2.0, 2, &QuadratureConfig::default()).unwrap();
        let cfg = QuadratureConfig { n: 32, ..Default::default() };
        for x in [[0i64, 0, 0], [1, 0, 0], [1, 1, 0], [2, 1, 0]] {
            let (v, err) = kernel_kl_fourier(3, 2.0, &x, &cfg).unwrap();
            let h = t.real(&x).unwrap();
            assert!((v - h).abs() < 1e-3, "x={x:?}: {v} vs {h} (err {err})");
        }
    }

    #[test]
    fn cache_roundtrip() {
        let t = kernel_kl(2, 1.0, 3, &QuadratureConfig::default()).unwrap();
        let mut buf = Vec::new();
        t.write_cache(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("LRK1 2 K 1.0000000000000000e0 3 64 1.2500000000000000e-1\n"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 49);
        let u = KernelTable::read_cache(&buf[..]).unwrap();
        assert_eq!(u.rep_values(), t.rep_values());
        assert_eq!(u.rep_errors(), t.rep_errors());
        assert_eq!(u.fingerprint(), t.fingerprint());
    }
}
