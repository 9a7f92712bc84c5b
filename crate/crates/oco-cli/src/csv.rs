//! Per-round CSV output.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;

pub const HEADER: &str = "round,loss,cum_loss,competitor_cum_loss,regret,bound";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub round: usize,
    pub loss: f64,
    pub cum_loss: f64,
    pub competitor_cum_loss: f64,
    pub regret: f64,
    /// Empty cell when the run has no bound.
    pub bound: Option<f64>,
}

/// Positional decimal with 12 significant digits; `inf`, `-inf` and `nan` for non-finite values.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    // scientific formatting does the rounding; the digits are then placed positionally
    let sci = format!("{:.11e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let body = if exp >= 11 {
        format!("{digits}{}", "0".repeat((exp - 11) as usize))
    } else if exp >= 0 {
        let split = (exp + 1) as usize;
        format!("{}.{}", &digits[..split], &digits[split..])
    } else {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    };
    format!("{sign}{body}")
}

pub fn format_csv(rows: &[Row]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in rows {
        let bound = r.bound.map(format_number).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.round,
            format_number(r.loss),
            format_number(r.cum_loss),
            format_number(r.competitor_cum_loss),
            format_number(r.regret),
            bound
        )
        .expect("writing to a String");
    }
    out
}

pub fn emit_csv(rows: &[Row], path: &Path) -> Result<(), CliError> {
    write_text(path, &format_csv(rows))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.display().to_string(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: usize) -> Row {
        Row { round: t, loss: 0.25, cum_loss: 0.25 * t as f64, competitor_cum_loss: 0.0, regret: 0.25 * t as f64, bound: None }
    }

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.25), "0.250000000000");
        assert_eq!(format_number(100.0), "100.000000000");
        assert_eq!(format_number(-1.0 / 3.0), "-0.333333333333");
        assert_eq!(format_number(1234567.891234567), "1234567.89123");
        assert_eq!(format_number(1e-5), "0.0000100000000000");
        assert_eq!(format_number(2e13), "20000000000000");
        assert_eq!(format_number(9.9999999999999), "10.0000000000");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(f64::INFINITY), "inf");
        for v in [0.1, 1.234567, -2.5e-7, 6.02e23, 47.9583152331] {
            let back: f64 = format_number(v).parse().unwrap();
            assert!((back - v).abs() <= 1e-11 * v.abs());
        }
    }

    #[test]
    fn header_only_and_line_count() {
        assert_eq!(format_csv(&[]), format!("{HEADER}\n"));
        let text = format_csv(&[row(1), row(2), row(3)]);
        assert_eq!(text.lines().count(), 4);
        assert!(text.ends_with('\n'));
        assert_eq!(text.lines().nth(1).unwrap(), "1,0.250000000000,0.250000000000,0,0.250000000000,");
    }

    #[test]
    fn emit_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("a.csv");
        emit_csv(&[row(1)], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format_csv(&[row(1)]));
        let blocked = dir.path().join("a.csv").join("x.csv");
        std::fs::write(dir.path().join("a.csv"), "").unwrap();
        assert!(matches!(emit_csv(&[], &blocked), Err(CliError::Io { .. })));
    }
}
