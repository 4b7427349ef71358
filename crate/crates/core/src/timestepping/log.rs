//! Per-step diagnostics of a run.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Diagnostics of one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub e_vol: f64,
    pub e_bnd: f64,
    pub divnorm: f64,
    pub umax: f64,
    /// Flow rate through each outlet.
    pub flow: Vec<f64>,
    /// Mean pressure on each outlet.
    pub pressure: Vec<f64>,
}

/// Sequence of [`LogRecord`]s with a fixed number of outlets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeriesLog {
    pub n_outlets: usize,
    pub records: Vec<LogRecord>,
}

impl TimeSeriesLog {
    pub fn new(n_outlets: usize) -> Self {
        Self { n_outlets, records: Vec::new() }
    }

    pub fn push(&mut self, r: LogRecord) {
        debug_assert_eq!(r.flow.len(), self.n_outlets);
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn header(&self) -> String {
        let mut h = String::from("t,E_vol,E_bnd,divnorm,umax");
        for k in 1..=self.n_outlets {
            h.push_str(&format!(",Q_{k}"));
        }
        for k in 1..=self.n_outlets {
            h.push_str(&format!(",P_{k}"));
        }
        h
    }

    pub fn write_csv_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.header())?;
        for r in &self.records {
            write!(w, "{:e},{:e},{:e},{:e},{:e}", r.t, r.e_vol, r.e_bnd, r.divnorm, r.umax)?;
            for x in r.flow.iter().chain(&r.pressure) {
                write!(w, ",{x:e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv_to(std::io::BufWriter::new(f))
    }

    /// Time average of the flow rate through outlet `k` (0-based) over records with `t ≥ from`.
    pub fn mean_flow(&self, k: usize, from: f64) -> f64 {
        let sel: Vec<f64> = self.records.iter().filter(|r| r.t >= from).map(|r| r.flow[k]).collect();
        sel.iter().sum::<f64>() / sel.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_rows() {
        let mut log = TimeSeriesLog::new(2);
        log.push(LogRecord { t: 0.001, e_vol: 1.0, e_bnd: 0.5, divnorm: 0.0, umax: 2.0, flow: vec![1.0, 2.0], pressure: vec![3.0, 4.0] });
        let mut buf = Vec::new();
        log.write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,E_vol,E_bnd,divnorm,umax,Q_1,Q_2,P_1,P_2");
        assert_eq!(lines.next().unwrap().split(',').count(), 9);
    }
}
