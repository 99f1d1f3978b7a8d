//! Plain CSV tables: numeric formatting and header-checked reading.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// `v` with 12 significant digits, shortest of fixed or exponent form.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { format!("{v}") };
    }
    let exp = v.abs().log10().floor() as i32;
    let s = if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{v:.11e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{e}")
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistory {
    pub x: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

impl FieldHistory {
    pub fn at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// Long format: columns `x, t, value`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["x", "t", "value"]);
        for s in &self.snapshots {
            for (x, v) in self.x.iter().zip(&s.values) {
                t.push(vec![*x, s.t, *v]);
            }
        }
        t
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.to_table().write(w)
    }
}

/// A numeric table with named columns and `#`-prefixed trailer lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub footer: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn require(&self, names: &[&str]) -> Result<()> {
        for n in names {
            if !self.columns.iter().any(|c| c == n) {
                return Err(Error::MissingColumn(n.to_string()));
            }
        }
        if self.rows.is_empty() {
            return Err(Error::EmptyTable);
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|&v| fmt_sig(v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        for f in &self.footer {
            writeln!(w, "# {f}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = loop {
            match lines.next() {
                Some(l) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        break l;
                    }
                }
                None => return Err(Error::EmptyTable),
            }
        };
        let mut t = Table {
            columns: header.split(',').map(|c| c.trim().to_string()).collect(),
            ..Default::default()
        };
        for l in lines {
            let l = l?;
            let l = l.trim();
            if l.is_empty() {
                continue;
            }
            if let Some(f) = l.strip_prefix('#') {
                t.footer.push(f.trim().to_string());
                continue;
            }
            let row = l
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidParameter(format!("bad CSV number in `{l}`: {e}")))?;
            if row.len() != t.columns.len() {
                return Err(Error::InvalidParameter(format!(
                    "row `{l}` has {} fields",
                    row.len()
                )));
            }
            t.rows.push(row);
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.175_201_193_635_044), "0.175201193635");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(-2.5e-9), "-2.5e-9");
        assert_eq!(fmt_sig(123_456.789_012_345), "123456.789012");
        assert_eq!(fmt_sig(1e300), "1e300");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(-0.0), "0");
    }

    #[test]
    fn round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.0 / 3.0, 2e-20]);
        t.push(vec![-4.0, 7.25]);
        t.footer.push("fit slope=1".into());
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = Table::read(buf.as_slice()).unwrap();
        assert_eq!(back.columns, t.columns);
        assert_eq!(back.footer, t.footer);
        assert!((back.rows[0][0] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(back.rows[1], vec![-4.0, 7.25]);
    }

    #[test]
    fn missing_and_empty() {
        let t = Table::read("a,b\n".as_bytes()).unwrap();
        assert!(matches!(t.require(&["a"]), Err(Error::EmptyTable)));
        assert!(matches!(t.require(&["c"]), Err(Error::MissingColumn(_))));
        assert!(matches!(Table::read("".as_bytes()), Err(Error::EmptyTable)));
    }
}
