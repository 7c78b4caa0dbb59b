use std::sync::Arc;

use lrk_core::quadrature::QuadratureConfig;
use lrk_core::threshold::{
    asymptote_check, classify_state, decay_fit, solve_threshold_state_with, threshold_couplings, TOL_SUM, TOL_TAIL,
};
use lrk_core::Potential;
use serde_json::{json, Map, Value};

use crate::args::{Cli, ResonanceArgs};
use crate::error::{usage, CliError};
use crate::kernel::cached_kernel;
use crate::parse::{parse_potential, parse_shells};
use crate::report::{emit_json, json_complex, json_num};
use crate::Status;

/// Dense box radius used when `--L` is not given.
fn default_radius(d: usize) -> i64 {
    match d {
        3 => 24,
        4 => 12,
        _ => 8,
    }
}

fn reach(v: &Potential) -> i64 {
    v.support().iter().map(|(x, _)| x.iter().map(|c| c.abs()).max().unwrap_or(0)).max().unwrap_or(0)
}

/// Drop couplings that repeat a degenerate eigenvalue.
fn distinct(mut g: Vec<f64>) -> Vec<f64> {
    g.dedup_by(|b, a| (*a - *b).abs() <= 1e-9 * a.abs().max(b.abs()));
    g
}

pub fn run(cli: &Cli, a: &ResonanceArgs, quad: &QuadratureConfig) -> Result<Status, CliError> {
    if a.d < 3 {
        return usage("zero-energy states need d >= 3");
    }
    let v0 = parse_potential(&a.potential, a.d)?;
    let radius = a.radius.unwrap_or_else(|| default_radius(a.d));
    if radius < 2 {
        return usage("dense box radius must be at least 2");
    }
    let (r1, r2) = match &a.shells {
        Some(s) => parse_shells(s)?,
        None => ((radius / 2).max(1), radius),
    };
    if r1 < 1 || r2 <= r1 || r2 > radius {
        return usage(format!("shells must satisfy 1 <= r1 < r2 <= L (got {r1}:{r2}, L = {radius})"));
    }

    let couplings = distinct(threshold_couplings(&v0, quad)?);
    let mut warnings: Vec<String> = Vec::new();
    let mut states = Vec::new();
    let mut fingerprints = Vec::new();
    if !couplings.is_empty() {
        let table = Arc::new(cached_kernel(a.d, 2.0, radius + reach(&v0), quad)?);
        if table.unconverged_count() > 0 {
            warnings.push(format!("{} kernel entries unconverged", table.unconverged_count()));
        }
        fingerprints.push(table.fingerprint());
        for &g in &couplings {
            for st in solve_threshold_state_with(&v0.scaled(g), table.clone(), radius)? {
                let mut state_warnings: Vec<String> = Vec::new();
                let (exponent, fit_residual) = match decay_fit(&st.u, r1, r2) {
                    Ok(f) => (json_num(f.exponent), json_num(f.residual)),
                    Err(e) => {
                        state_warnings.push(format!("decay fit: {e}"));
                        (Value::Null, Value::Null)
                    }
                };
                let asymptote = match asymptote_check(&st, r1 as f64, r2 as f64) {
                    Ok(r) => json_num(r),
                    Err(e) => {
                        state_warnings.push(format!("asymptote: {e}"));
                        Value::Null
                    }
                };
                states.push(json!({
                    "coupling": json_num(g),
                    "eigenvalue": json_complex(st.eigenvalue),
                    "null_residual": json_num(st.null_residual),
                    "s0": json_complex(st.s0),
                    "classification": classify_state(&st, TOL_SUM, TOL_TAIL).name(),
                    "decay_exponent": exponent,
                    "decay_fit_residual": fit_residual,
                    "asymptote_residual": asymptote,
                    "notes": state_warnings,
                }));
            }
        }
    }

    let potential: Vec<Value> =
        v0.support().iter().map(|(x, g)| json!({ "site": x, "value": json_num(*g) })).collect();
    let mut report = Map::new();
    report.insert("command".into(), json!("resonance"));
    report.insert("d".into(), json!(a.d));
    report.insert("potential".into(), Value::Array(potential));
    report.insert("dense_radius".into(), json!(radius));
    report.insert("shells".into(), json!([r1, r2]));
    report.insert("couplings".into(), Value::Array(couplings.iter().map(|g| json_num(*g)).collect()));
    report.insert("states".into(), Value::Array(states));
    report.insert("warnings".into(), json!(warnings));
    report.insert("config_fingerprint".into(), json!(cli.config_fingerprint(quad, Some(&v0), "")));
    report.insert("kernel_fingerprints".into(), json!(fingerprints));
    emit_json(cli, &Value::Object(report))?;
    Ok(Status::from_checks(true, !warnings.is_empty(), cli.strict))
}
