use lrk_core::lap::{kernel_nullity_scan, lap_scan, ScanSettings};
use lrk_core::quadrature::QuadratureConfig;
use lrk_core::Potential;

use crate::args::{Cli, LapArgs};
use crate::error::{usage, CliError};
use crate::parse::parse_potential;
use crate::report::{combined_fingerprint, emit, flag, num, CsvReport};
use crate::Status;

pub fn run(cli: &Cli, a: &LapArgs, quad: &QuadratureConfig) -> Result<Status, CliError> {
    if a.d == 0 {
        return usage("d must be positive");
    }
    let v = match &a.potential {
        Some(s) => Some(parse_potential(s, a.d)?),
        None => None,
    };
    let settings = ScanSettings { quadrature: quad.clone(), max_iters: a.iters, ..ScanSettings::default() };
    let fp = cli.config_fingerprint(quad, v.as_ref(), &settings.canonical());
    let (bytes, pass, warned) = if a.nullity {
        let v = v.unwrap_or_else(|| Potential::zero(a.d));
        nullity(a, &v, &settings, fp)?
    } else {
        norms(a, v.as_ref(), &settings, fp)?
    };
    emit(cli, &bytes)?;
    Ok(Status::from_checks(pass, warned, cli.strict))
}

fn norms(a: &LapArgs, v: Option<&Potential>, settings: &ScanSettings, fp: String) -> Result<(Vec<u8>, bool, bool), CliError> {
    let scan = lap_scan(v, a.d, a.s, &a.grid.0, a.side, &a.boxes, settings)?;
    let mut columns: Vec<String> = vec!["lambda".into()];
    columns.extend(a.boxes.iter().map(|b| format!("norm_L{b}")));
    columns.extend(["growth", "sigma_min", "pass"].map(String::from));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut report = CsvReport::new(&cols, fp)?;
    let (mut all_pass, mut warned) = (true, false);
    for (il, &lambda) in scan.lambdas.iter().enumerate() {
        let entries: Vec<_> = (0..scan.boxes.len()).map(|ib| scan.entry(il, ib)).collect();
        let growth = scan.ratios[il].last().map(|r| r - 1.0).unwrap_or(0.0);
        let pass = entries.iter().all(|e| e.norm.is_finite()) && growth < a.growth_tol;
        all_pass &= pass;
        let mut warnings = Vec::new();
        if entries.iter().any(|e| !e.norm_converged) {
            warnings.push("norm_unconverged");
        }
        if entries.iter().any(|e| !e.ladder_converged) {
            warnings.push("ladder_unconverged");
        }
        warned |= !warnings.is_empty();
        let mut fps: Vec<String> = entries.iter().map(|e| e.kernel_fingerprint.clone()).collect();
        fps.dedup();
        let mut row = vec![num(lambda)];
        row.extend(entries.iter().map(|e| num(e.norm)));
        row.push(num(growth));
        row.push(num(entries.last().expect("boxes nonempty").sigma_min));
        row.push(flag(pass));
        report.row(row, &warnings, &combined_fingerprint(&fps))?;
    }
    Ok((report.finish()?, all_pass, warned))
}

fn nullity(a: &LapArgs, v: &Potential, settings: &ScanSettings, fp: String) -> Result<(Vec<u8>, bool, bool), CliError> {
    let entries = kernel_nullity_scan(v, &a.grid.0, a.side, settings)?;
    let mut report = CsvReport::new(&["lambda", "sigma_min", "ladder_diagnostic", "pass"], fp)?;
    let (mut all_pass, mut warned) = (true, false);
    for e in &entries {
        let pass = e.sigma_min >= a.sigma_tol;
        all_pass &= pass;
        let warnings: &[&str] = if e.ladder_converged { &[] } else { &["ladder_unconverged"] };
        warned |= !warnings.is_empty();
        report.row(
            vec![num(e.lambda), num(e.sigma_min), num(e.ladder_diagnostic), flag(pass)],
            warnings,
            &e.kernel_fingerprint,
        )?;
    }
    Ok((report.finish()?, all_pass, warned))
}
