use std::f64::consts::PI;

use lrk_core::inequality::{
    convolution_sum_i, hardy_fourier_oracle, hls_hardy_check, intcal_regime_check, kernel_bound_check, GROWTH_LIMIT,
};
use lrk_core::quadrature::QuadratureConfig;

use crate::args::{AuditArgs, AuditRegime, Cli};
use crate::error::{usage, CliError};
use crate::report::{emit, flag, num, CsvReport};
use crate::Status;

pub fn run(cli: &Cli, a: &AuditArgs, quad: &QuadratureConfig) -> Result<Status, CliError> {
    if a.d == 0 {
        return usage("d must be positive");
    }
    let fp = cli.config_fingerprint(quad, None, "");
    let (bytes, pass, warned) = match a.regime {
        AuditRegime::Intcal => intcal(a, fp)?,
        AuditRegime::Kernel => kernel(a, quad, fp)?,
        AuditRegime::Hls => hls(a, quad, fp)?,
        AuditRegime::Sum => sum(a, fp)?,
    };
    emit(cli, &bytes)?;
    Ok(Status::from_checks(pass, warned, cli.strict))
}

type Outcome = (Vec<u8>, bool, bool);

fn intcal(a: &AuditArgs, fp: String) -> Result<Outcome, CliError> {
    let c = intcal_regime_check(a.k, a.l, a.d, a.r_max, a.delta)?;
    let mut report = CsvReport::new(
        &["k", "l", "d", "regime", "delta", "exponent", "R", "samples", "sup_ratio", "growth", "stable"],
        fp,
    )?;
    report.row(
        vec![
            num(c.k),
            num(c.l),
            c.d.to_string(),
            c.regime.tag().to_string(),
            num(c.delta),
            num(c.exponent),
            c.r_max.to_string(),
            c.samples.len().to_string(),
            num(c.sup_ratio),
            num(c.growth),
            flag(c.stable),
        ],
        &[],
        "",
    )?;
    Ok((report.finish()?, c.stable, false))
}

fn kernel(a: &AuditArgs, quad: &QuadratureConfig, fp: String) -> Result<Outcome, CliError> {
    let c = kernel_bound_check(a.l, a.d, a.radius, quad)?;
    // Growth of the running sup when the outermost dyadic shell is added.
    let (last, inner) = c.shell_max.split_last().expect("at least one shell");
    let inner_sup = inner.iter().copied().fold(0.0, f64::max);
    let growth = if inner_sup > 0.0 { c.sup / inner_sup - 1.0 } else { 0.0 };
    let stable = c.sup.is_finite() && growth <= GROWTH_LIMIT;
    let mut report = CsvReport::new(
        &["l", "d", "L", "sup", "outer_shell_max", "dyadic_ratio", "growth", "max_error", "stable"],
        fp,
    )?;
    let warnings: &[&str] = if c.max_error > quad.target_rel { &["kernel_error_above_target"] } else { &[] };
    report.row(
        vec![
            num(c.l),
            c.d.to_string(),
            c.radius.to_string(),
            num(c.sup),
            num(*last),
            num(c.dyadic_ratio),
            num(growth),
            num(c.max_error),
            flag(stable),
        ],
        warnings,
        &c.kernel_fingerprint,
    )?;
    Ok((report.finish()?, stable, !warnings.is_empty()))
}

fn hls(a: &AuditArgs, quad: &QuadratureConfig, fp: String) -> Result<Outcome, CliError> {
    let r = hls_hardy_check(a.alpha, a.beta, a.d, &a.boxes, quad, a.iters)?;
    let last = *a.boxes.last().expect("validated nonempty");
    let oracle = if a.oracle {
        if a.d != 3 {
            return usage("the Fourier-side estimate is available for d = 3 only");
        }
        let m = (5 * last as usize).max(2 * (2 * last as usize + 1));
        Some(hardy_fourier_oracle(a.alpha, a.beta, last, m, a.iters)?)
    } else {
        None
    };
    let mut report = CsvReport::new(
        &["alpha", "beta", "d", "L", "norm", "residual", "growth", "oracle", "oracle_gap", "pass"],
        fp,
    )?;
    let (mut all_pass, mut warned) = (true, false);
    for (i, (&b, n)) in r.boxes.iter().zip(&r.norms).enumerate() {
        let growth = if i == 0 { None } else { Some(r.ratios[i - 1] - 1.0) };
        let mut pass = growth.map_or(true, |g| g < a.tol);
        let (o, gap) = match (&oracle, b == last) {
            (Some(o), true) => {
                let gap = (n.value - o.value).abs() / o.value;
                pass &= gap <= a.oracle_tol;
                (num(o.value), num(gap))
            }
            _ => (String::new(), String::new()),
        };
        all_pass &= pass;
        let mut warnings = Vec::new();
        if !n.converged || oracle.as_ref().is_some_and(|o| b == last && !o.converged) {
            warnings.push("norm_unconverged");
            warned = true;
        }
        report.row(
            vec![
                num(a.alpha),
                num(a.beta),
                a.d.to_string(),
                b.to_string(),
                num(n.value),
                num(n.residual),
                growth.map(num).unwrap_or_default(),
                o,
                gap,
                flag(pass),
            ],
            &warnings,
            &r.kernel_fingerprint,
        )?;
    }
    Ok((report.finish()?, all_pass, warned))
}

fn sum(a: &AuditArgs, fp: String) -> Result<Outcome, CliError> {
    let x = if a.x.is_empty() { vec![0i64; a.d] } else { a.x.clone() };
    if x.len() != a.d {
        return usage(format!("--x has {} coordinates, expected {}", x.len(), a.d));
    }
    let s = convolution_sum_i(&x, a.k, a.l, a.tail)?;
    // Sum over Z of 1 / (1 + y^2).
    let closed = (a.d == 1 && x[0] == 0 && a.k + a.l == 2.0).then(|| PI / PI.tanh());
    let pass = closed.map_or(true, |c| {
        let slack = 1e-12 * c;
        c >= s.partial - slack && c <= s.partial + s.tail_bound + slack
    });
    let mut report = CsvReport::new(
        &["x", "k", "l", "T", "partial", "tail_bound", "tail_estimate", "value", "closed_form", "closed_gap", "pass"],
        fp,
    )?;
    let site: Vec<String> = x.iter().map(|c| c.to_string()).collect();
    report.row(
        vec![
            site.join(" "),
            num(a.k),
            num(a.l),
            s.tail_radius.to_string(),
            num(s.partial),
            num(s.tail_bound),
            num(s.tail_estimate),
            num(s.value()),
            closed.map(num).unwrap_or_default(),
            closed.map(|c| num((s.value() - c).abs())).unwrap_or_default(),
            flag(pass),
        ],
        &[],
        "",
    )?;
    Ok((report.finish()?, pass, false))
}
