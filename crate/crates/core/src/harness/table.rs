use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::diagnostics::format_f64;

pub const TABLE_COLUMNS: &str = "level,m,h,dt,M,p,error,stderr,order";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub m: usize,
    pub h: f64,
    pub dt: f64,
    /// Number of paths (1 for deterministic rows).
    pub paths: usize,
    pub p: f64,
    pub error: f64,
    /// Standard error of `error` (0 for deterministic rows).
    pub stderr: f64,
    /// `log₂(e_prev / e)`; absent on the first row.
    pub order: Option<f64>,
    /// `L²` error where the table holds `L¹` errors against an exact solution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2_error: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn push(&mut self, mut row: ConvergenceRow) {
        row.order = self.rows.last().map(|prev| (prev.error / row.error).log2());
        self.rows.push(row);
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }

    /// Least-squares slope of `log e` against `log h`.
    pub fn fitted_order(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.h.ln(), r.error.ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{TABLE_COLUMNS}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.level,
                r.m,
                format_f64(r.h),
                format_f64(r.dt),
                r.paths,
                format_f64(r.p),
                format_f64(r.error),
                format_f64(r.stderr),
                r.order.map(format_f64).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(level: usize, m: usize, error: f64) -> ConvergenceRow {
        ConvergenceRow {
            level,
            m,
            h: 1.0 / m as f64,
            dt: 0.1 / m as f64,
            paths: 1,
            p: 1.0,
            error,
            stderr: 0.0,
            order: None,
            l2_error: None,
        }
    }

    #[test]
    fn orders_are_log2_ratios() {
        let mut t = ConvergenceTable::default();
        t.push(row(0, 16, 0.4));
        t.push(row(1, 32, 0.2));
        t.push(row(2, 64, 0.05));
        assert_eq!(t.rows[0].order, None);
        assert_eq!(t.rows[1].order, Some(1.0));
        assert_eq!(t.rows[2].order, Some(2.0));
        assert!(t.strictly_decreasing());
        assert!((t.fitted_order() - 1.5).abs() < 0.2);
    }

    #[test]
    fn csv_has_contract_columns() {
        let mut t = ConvergenceTable::default();
        t.push(row(0, 16, 0.4));
        t.push(row(1, 32, 0.2));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], TABLE_COLUMNS);
        assert!(lines[1].ends_with(','));
        assert_eq!(lines[2].split(',').count(), 9);
    }
}
