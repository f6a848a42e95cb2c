//! CSV output: `#` comment header carrying the resolved config, one column
//! header row, LF line endings, floats with 9 significant digits.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;

/// Formats `v` with 9 significant digits, fixed notation for moderate
/// magnitudes and exponent notation otherwise.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub enum Cell {
    F(f64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::S(if v { "true".into() } else { "false".into() })
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::S(v.to_string())
    }
}

pub struct Table {
    comments: Vec<String>,
    writer: ::csv::Writer<Vec<u8>>,
    width: usize,
}

impl Table {
    pub fn new(cfg: &RunConfig, columns: &[&str]) -> Self {
        let comments = cfg.to_string().lines().map(str::to_string).collect();
        let mut writer = ::csv::WriterBuilder::new()
            .terminator(::csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(columns).expect("in-memory write");
        Self {
            comments,
            writer,
            width: columns.len(),
        }
    }

    pub fn comment(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.comments.push(format!("{key} = {value}"));
        self
    }

    pub fn row<I, C>(&mut self, cells: I)
    where
        I: IntoIterator<Item = C>,
        C: Into<Cell>,
    {
        let rec: Vec<String> = cells
            .into_iter()
            .map(|c| match c.into() {
                Cell::F(v) => fmt_f64(v),
                Cell::S(s) => s,
            })
            .collect();
        debug_assert_eq!(rec.len(), self.width);
        self.writer.write_record(&rec).expect("in-memory write");
    }

    pub fn render(self) -> String {
        let body = self.writer.into_inner().expect("in-memory flush");
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(std::str::from_utf8(&body).expect("utf-8 cells"));
        out
    }

    pub fn write(self, dir: &Path, name: &str) -> io::Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, self.render())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Command;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1");
        assert_eq!(fmt_f64(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_f64(-2.0 / 3.0 * 1e3), "-666.666667");
        assert_eq!(fmt_f64(1.2345678912e12), "1.23456789e12");
        assert_eq!(fmt_f64(1.5e-7), "1.5e-7");
        assert_eq!(fmt_f64(0.99999999996), "1");
        assert_eq!(fmt_f64(123456789.4), "123456789");
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn header_then_rows() {
        let cfg = RunConfig::resolve(Command::Blowup, None, &[]).unwrap();
        let mut t = Table::new(&cfg, &["x", "kind"]);
        t.comment("time", 3);
        t.row([Cell::F(0.5), Cell::from("a,b")]);
        let s = t.render();
        assert!(s.starts_with("# command = blowup\n# model = karma\n"));
        assert!(s.contains("# time = 3\nx,kind\n0.5,\"a,b\"\n"));
        assert!(!s.contains('\r'));
    }
}
