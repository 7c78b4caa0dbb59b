//! Parsers for the textual argument formats.

use std::fs;
use std::path::Path;

use lrk_core::resolvent::Side;
use lrk_core::{Complex64, GridFn, Potential};

use crate::error::{usage, CliError};

/// Points `lo + i step` for `i = 0, 1, ..` up to `hi`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// `lo:hi:step` into a [`Grid`].
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:step, got '{s}'"));
    }
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number '{t}': {e}"));
    let (lo, hi, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(format!("need lo <= hi and step > 0 in '{s}'"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok(Grid((0..count).map(|i| lo + i as f64 * step).collect()))
}

pub fn parse_side(s: &str) -> Result<Side, String> {
    match s {
        "+" | "plus" => Ok(Side::Plus),
        "-" | "minus" => Ok(Side::Minus),
        _ => Err(format!("side must be + or -, got '{s}'")),
    }
}

/// `r1:r2` with integer radii.
pub fn parse_shells(s: &str) -> Result<(i64, i64), CliError> {
    let Some((a, b)) = s.split_once(':') else {
        return usage(format!("expected r1:r2, got '{s}'"));
    };
    match (a.trim().parse(), b.trim().parse()) {
        (Ok(r1), Ok(r2)) => Ok((r1, r2)),
        _ => usage(format!("expected integer radii in '{s}'")),
    }
}

fn parse_site(t: &str, d: usize) -> Result<Vec<i64>, CliError> {
    let x: Vec<i64> = t
        .split(',')
        .map(|c| c.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad site '{t}': {e}")))?;
    if x.len() != d {
        return usage(format!("site '{t}' has {} coordinates, expected {d}", x.len()));
    }
    Ok(x)
}

/// Inline `x1,..,xd:value;...` entries.
pub fn parse_inline_sites(s: &str, d: usize) -> Result<Vec<(Vec<i64>, f64)>, CliError> {
    let mut out = Vec::new();
    for item in s.split(';').map(str::trim).filter(|t| !t.is_empty()) {
        let Some((site, value)) = item.rsplit_once(':') else {
            return usage(format!("expected x1,..,xd:value, got '{item}'"));
        };
        let v: f64 = value.trim().parse().map_err(|e| CliError::Usage(format!("bad value '{value}': {e}")))?;
        out.push((parse_site(site, d)?, v));
    }
    Ok(out)
}

/// Whitespace-separated `x1 .. xd value` lines; `#` starts a comment.
fn parse_site_file(text: &str, d: usize) -> Result<Vec<(Vec<i64>, f64)>, CliError> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != d + 1 {
            return usage(format!("potential line '{line}' needs {} columns", d + 1));
        }
        let x = parse_site(&cols[..d].join(","), d)?;
        let v: f64 = cols[d].parse().map_err(|e| CliError::Usage(format!("bad value '{}': {e}", cols[d])))?;
        out.push((x, v));
    }
    Ok(out)
}

/// A potential from `none`, an existing file, or an inline list.
pub fn parse_potential(s: &str, d: usize) -> Result<Potential, CliError> {
    let entries = if s.trim() == "none" {
        Vec::new()
    } else if Path::new(s).is_file() {
        parse_site_file(&fs::read_to_string(s)?, d)?
    } else {
        parse_inline_sites(s, d)?
    };
    if entries.iter().any(|(_, v)| !v.is_finite()) {
        return usage("potential values must be finite");
    }
    Ok(Potential::finite(d, &entries)?)
}

/// Stable text form of a potential for fingerprints.
pub fn potential_canonical(v: &Potential) -> String {
    v.support()
        .iter()
        .map(|(x, g)| format!("{x:?}:{}", lrk_core::format::fmt_f64(*g)))
        .collect::<Vec<_>>()
        .join(";")
}

/// Test vector: `delta0`, `delta0+e1`, or inline entries.
pub fn parse_test_vector(s: &str, d: usize) -> Result<GridFn, CliError> {
    let mut e1 = vec![0i64; d];
    e1[0] = 1;
    let entries = match s.trim() {
        "delta0" => vec![(vec![0i64; d], 1.0)],
        "delta0+e1" => vec![(vec![0i64; d], 1.0), (e1, 1.0)],
        other => parse_inline_sites(other, d)?,
    };
    if entries.is_empty() {
        return usage("test vector has no entries");
    }
    let entries: Vec<(Vec<i64>, Complex64)> = entries.into_iter().map(|(x, v)| (x, Complex64::new(v, 0.0))).collect();
    Ok(GridFn::from_sites(d, &entries, 0)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts_endpoints() {
        assert_eq!(parse_grid("0.25:11.75:0.25").unwrap().0.len(), 47);
        assert_eq!(parse_grid("2:2:1").unwrap().0, vec![2.0]);
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn inline_potential() {
        let v = parse_potential("0,0,0:-0.5; 1,0,0:0.25", 3).unwrap();
        assert_eq!(v.get(&[0, 0, 0]), -0.5);
        assert_eq!(v.get(&[1, 0, 0]), 0.25);
        assert!(parse_potential("0,0:1", 3).is_err());
        assert!(parse_potential("none", 3).unwrap().support().is_empty());
    }

    #[test]
    fn file_potential() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        fs::write(&p, "# well\n0 0 0 -1.5\n0 1 0 2\n").unwrap();
        let v = parse_potential(p.to_str().unwrap(), 3).unwrap();
        assert_eq!(v.support().len(), 2);
        assert_eq!(v.get(&[0, 1, 0]), 2.0);
    }

    #[test]
    fn test_vectors() {
        let f = parse_test_vector("delta0+e1", 3).unwrap();
        assert_eq!(f.support().len(), 2);
        assert!(parse_test_vector("", 3).is_err());
        assert_eq!(parse_side("-").unwrap(), Side::Minus);
    }
}
