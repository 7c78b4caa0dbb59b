use lrk_core::green::{stone_lhs, LadderConfig};
use lrk_core::levelset::{level_set_mesh, stone_rhs};
use lrk_core::quadrature::QuadratureConfig;
use lrk_core::symbol::critical_data;

use crate::args::{Cli, StoneArgs};
use crate::error::{usage, CliError};
use crate::parse::parse_test_vector;
use crate::report::{combined_fingerprint, emit, flag, num, CsvReport};
use crate::Status;

const TOL: f64 = 1e-2;
const TOL_THRESHOLD: f64 = 5e-2;

pub fn run(cli: &Cli, a: &StoneArgs, quad: &QuadratureConfig) -> Result<Status, CliError> {
    if a.d == 0 {
        return usage("d must be positive");
    }
    let lambdas = a.lambdas()?;
    let f = parse_test_vector(&a.f, a.d)?;
    let ladder = LadderConfig::default();
    let crit = critical_data(a.d);
    let top = 4.0 * a.d as f64;

    let extra: Vec<String> = f.support().iter().map(|(x, v)| format!("{x:?}:{}", num(v.re))).collect();
    let mut report = CsvReport::new(
        &["lambda", "side", "lhs", "rhs", "gap", "tol", "pass", "ladder_diagnostic", "mesh_samples", "excised_mu"],
        cli.config_fingerprint(quad, None, &extra.join(";")),
    )?;
    let mut all_pass = true;
    let mut warned = false;
    for &lambda in &lambdas {
        let lhs = stone_lhs(&f, lambda, a.side, &ladder, quad)?;
        let (rhs, samples, excised) = if lambda > 0.0 && lambda < top {
            let mesh = level_set_mesh(lambda, a.d, a.mesh, a.cutoff)?;
            (stone_rhs(&f, &mesh), mesh.samples.len(), mesh.excised_mu)
        } else {
            (0.0, 0, 0.0)
        };
        let signed = a.side.sign() * lhs.value;
        let gap = if rhs != 0.0 { (signed - rhs).abs() / rhs.abs() } else { (signed - rhs).abs() };
        let tol = a.tol.unwrap_or(if crit.threshold_distance(lambda) < 1e-9 { TOL_THRESHOLD } else { TOL });
        let pass = gap <= tol;
        all_pass &= pass;
        let mut warnings = Vec::new();
        if !lhs.ladder.converged {
            warnings.push("ladder_unconverged");
            warned = true;
        }
        report.row(
            vec![
                num(lambda),
                a.side.symbol().to_string(),
                num(lhs.value),
                num(rhs),
                num(gap),
                num(tol),
                flag(pass),
                num(lhs.ladder.diagnostic),
                samples.to_string(),
                num(excised),
            ],
            &warnings,
            &combined_fingerprint(&lhs.kernel_fingerprints),
        )?;
    }
    emit(cli, &report.finish()?)?;
    Ok(Status::from_checks(all_pass, warned, cli.strict))
}
