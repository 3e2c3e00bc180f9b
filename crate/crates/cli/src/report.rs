//! Metrics with declared tolerances, and the report written next to the
//! artifacts of every analysis.

use std::path::Path;

use serde::Serialize;

use scatlab::io::{write_csv, write_json, fmt17};

use crate::config::GridConfig;
use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Below,
    Above,
}

impl Relation {
    fn holds(self, value: f64, tolerance: f64) -> bool {
        match self {
            Relation::AtMost => value <= tolerance,
            Relation::AtLeast => value >= tolerance,
            Relation::Below => value < tolerance,
            Relation::Above => value > tolerance,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Below => "<",
            Relation::Above => ">",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub verdict: Verdict,
}

impl Metric {
    /// NaN never passes.
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, tolerance: f64) -> Self {
        let verdict = if relation.holds(value, tolerance) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            name: name.into(),
            value,
            tolerance,
            relation,
            verdict,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self::new(name, value, Relation::AtMost, tolerance)
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self::new(name, value, Relation::AtLeast, tolerance)
    }

    /// A yes/no check recorded as 1 or 0 against 1.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn line(&self) -> String {
        let v = if self.passed() { "PASS" } else { "FAIL" };
        format!(
            "{v} {}: {:.6e} {} {:.6e}",
            self.name,
            self.value,
            self.relation.symbol(),
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub grid: GridConfig,
    pub level: Option<u32>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl Provenance {
    pub fn new(grid: &GridConfig, level: Option<u32>, threads: Option<usize>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            grid: grid.clone(),
            level,
            seed: None,
            threads,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub scenario_hash: String,
    pub analysis: String,
    pub metrics: Vec<Metric>,
    pub provenance: Provenance,
    /// Wall clock seconds; kept out of the CSVs so they stay reproducible.
    pub runtime_seconds: f64,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.metrics.iter().all(Metric::passed)
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    /// `report.json` and `metrics.csv`.
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let value = serde_json::to_value(self).expect("report serializes");
        write_json(&dir.join("report.json"), &value)?;
        let header: Vec<String> = ["name", "value", "relation", "tolerance", "verdict"]
            .map(String::from)
            .to_vec();
        let rows = self.metrics.iter().map(|m| {
            vec![
                m.name.clone(),
                fmt17(m.value),
                m.relation.symbol().to_string(),
                fmt17(m.tolerance),
                if m.passed() { "pass" } else { "fail" }.to_string(),
            ]
        });
        write_csv(&dir.join("metrics.csv"), &header, rows)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts() {
        assert!(Metric::at_most("a", 1.0, 1.0).passed());
        assert!(!Metric::new("b", 1.0, Relation::Below, 1.0).passed());
        assert!(!Metric::at_most("c", f64::NAN, 1.0).passed());
        assert!(!Metric::at_least("d", f64::NAN, 1.0).passed());
        assert!(Metric::flag("e", true).passed());
        assert!(!Metric::flag("f", false).passed());
    }
}
