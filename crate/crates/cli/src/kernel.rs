use std::f64::consts::PI;

use lrk_core::kernel::{kernel_kl, kernel_kl_config, KernelCache, KernelTable};
use lrk_core::quadrature::QuadratureConfig;
use lrk_core::special::gamma;

use crate::args::{Cli, KernelArgs};
use crate::error::{usage, CliError};
use crate::report::{emit, num};
use crate::Status;

/// `K_l` on a box, through `$LRK_CACHE_DIR` when set.
pub fn cached_kernel(d: usize, l: f64, radius: i64, quad: &QuadratureConfig) -> Result<KernelTable, CliError> {
    let key = kernel_kl_config(d, l, radius, quad);
    Ok(match KernelCache::from_env() {
        Some(cache) => cache.get_or_compute(&key, || kernel_kl(d, l, radius, quad))?,
        None => kernel_kl(d, l, radius, quad)?,
    })
}

/// Leading coefficient of `K_l(x) ~ c |x|^{l-d}`.
fn continuum_coefficient(d: usize, l: f64) -> f64 {
    let d = d as f64;
    gamma((d - l) / 2.0) / (2f64.powf(l) * PI.powf(d / 2.0) * gamma(l / 2.0))
}

/// `max |K_l(x) |x|^{d-l} / c - 1|` over `L/2 <= |x| <= L`.
fn decay_deviation(t: &KernelTable, l: f64) -> Result<Option<f64>, CliError> {
    let radius = t.radius();
    if radius < 2 {
        return Ok(None);
    }
    let d = t.dim();
    let c = continuum_coefficient(d, l);
    let mut worst = 0.0f64;
    for x in t.sym_index().representatives() {
        let r = x.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        if r < radius as f64 / 2.0 || r > radius as f64 {
            continue;
        }
        let w = t.real(&x)? * r.powf(d as f64 - l);
        worst = worst.max((w / c - 1.0).abs());
    }
    Ok(Some(worst))
}

pub fn run(cli: &Cli, a: &KernelArgs, quad: &QuadratureConfig) -> Result<Status, CliError> {
    if a.d == 0 || !(a.l > 0.0 && a.l < a.d as f64) {
        return usage(format!("kernel needs d >= 1 and 0 < l < d (got d = {}, l = {})", a.d, a.l));
    }
    if a.radius < 0 {
        return usage("box radius must be nonnegative");
    }
    let table = cached_kernel(a.d, a.l, a.radius, quad)?;
    let mut bytes = Vec::new();
    table.write_cache(&mut bytes)?;
    emit(cli, &bytes)?;

    let origin = vec![0i64; a.d];
    let unconverged = table.unconverged_count();
    let mut summary = format!(
        "K_{}(0) = {}  max_error = {}  unconverged = {}  entries = {}",
        a.l,
        num(table.real(&origin)?),
        num(table.max_error()),
        unconverged,
        (2 * a.radius + 1).pow(a.d as u32)
    );
    if let Some(dev) = decay_deviation(&table, a.l)? {
        summary.push_str(&format!("  decay_deviation[L/2,L] = {}", num(dev)));
    }
    summary.push_str(&format!(
        "  config_fingerprint = {}  kernel_fingerprint = {}",
        cli.config_fingerprint(quad, None, ""),
        table.fingerprint()
    ));
    if cli.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    if unconverged > 0 && !cli.allow_unconverged {
        eprintln!("lrk: {unconverged} kernel entries did not reach the target accuracy");
        return Ok(Status::NonConvergence);
    }
    Ok(Status::Success)
}
