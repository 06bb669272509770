use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::Result;

/// One inequality check: `margin = lhs - rhs` in the units the check is
/// stated in (logs for the tree bound), `sigma` its Monte Carlo error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub check_name: String,
    pub params: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub sigma: f64,
}

impl LedgerRow {
    pub fn new(check_name: &str, params: String, lhs: f64, rhs: f64, sigma: f64) -> Self {
        Self { check_name: check_name.to_string(), params, lhs, rhs, margin: lhs - rhs, sigma }
    }

    /// Non-negative margin, allowing `sigmas` standard errors.
    pub fn passes(&self, sigmas: f64) -> bool {
        self.margin + sigmas * self.sigma >= 0.0
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Ledger {
    rows: Vec<LedgerRow>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: LedgerRow) {
        log::debug!("{} [{}]: margin {:.6e} ± {:.2e}", row.check_name, row.params, row.margin, row.sigma);
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    pub fn violations(&self, sigmas: f64) -> Vec<&LedgerRow> {
        self.rows.iter().filter(|r| !r.passes(sigmas)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for row in &self.rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_schema() {
        let mut ledger = Ledger::new();
        ledger.push(LedgerRow::new("treebound", "h=2;m=1".into(), 1.5, 1.0, 0.0));
        ledger.push(LedgerRow::new("compare", "h=2".into(), 1.0, 1.2, 0.1));
        let mut buf = Vec::new();
        ledger.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("check_name,params,lhs,rhs,margin,sigma\n"));
        let rows: Vec<LedgerRow> =
            csv::Reader::from_reader(text.as_bytes()).deserialize().map(|r| r.unwrap()).collect();
        assert_eq!(rows, ledger.rows());
        assert_eq!(ledger.violations(3.0).len(), 0);
        assert_eq!(ledger.violations(1.0).len(), 1);
    }
}
