//! Report serialization: every number is written with 17 significant digits.

use std::fs;
use std::io::Write;
use std::str::FromStr;

use lrk_core::format::{fingerprint, fmt_f64};
use lrk_core::Complex64;
use serde_json::{Number, Value};

use crate::args::Cli;
use crate::error::CliError;

/// Decimal text of `x`; `inf`, `-inf` or `nan` for non-finite values.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        fmt_f64(x)
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON number with 17 significant digits, `null` if not finite.
pub fn json_num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&fmt_f64(x)).expect("formatted float is a JSON number"))
    } else {
        Value::Null
    }
}

pub fn json_complex(z: Complex64) -> Value {
    Value::Array(vec![json_num(z.re), json_num(z.im)])
}

/// One fingerprint standing for an ordered list of kernel fingerprints.
pub fn combined_fingerprint(parts: &[String]) -> String {
    if parts.is_empty() {
        String::new()
    } else {
        fingerprint(&parts.join("|"))
    }
}

/// CSV report whose rows all share the trailing fingerprint columns.
pub struct CsvReport {
    writer: csv::Writer<Vec<u8>>,
    config_fingerprint: String,
}

impl CsvReport {
    pub fn new(columns: &[&str], config_fingerprint: String) -> Result<Self, CliError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = columns.to_vec();
        header.extend(["warnings", "config_fingerprint", "kernel_fingerprint"]);
        writer.write_record(&header)?;
        Ok(CsvReport { writer, config_fingerprint })
    }

    pub fn row(&mut self, fields: Vec<String>, warnings: &[&str], kernel_fingerprint: &str) -> Result<(), CliError> {
        let mut rec = fields;
        rec.push(warnings.join(";"));
        rec.push(self.config_fingerprint.clone());
        rec.push(kernel_fingerprint.to_string());
        self.writer.write_record(&rec)?;
        Ok(())
    }

    pub fn finish(self) -> Result<Vec<u8>, CliError> {
        self.writer.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }
}

/// Write to `--out`, or stdout.
pub fn emit(cli: &Cli, bytes: &[u8]) -> Result<(), CliError> {
    match &cli.out {
        Some(p) => fs::write(p, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn emit_json(cli: &Cli, v: &Value) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    emit(cli, &bytes)
}

pub fn flag(b: bool) -> String {
    if b { "true" } else { "false" }.into()
}
