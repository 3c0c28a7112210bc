//! Verification report: one record per check, deterministic JSON, runtimes kept apart in
//! a sidecar so reruns compare byte for byte.

use crate::config::ExperimentConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use teichlab::{LabError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    /// Unique across the report.
    pub name: String,
    /// The identity or inequality being exercised.
    pub anchor: String,
    pub values: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub passed: bool,
    /// Reported but not part of the overall status.
    pub exploratory: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub config: ExperimentConfig,
    pub passed: bool,
    pub total: usize,
    pub failed: Vec<String>,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Io(format!("report: {e}")))
    }
}

/// Collects checks and their runtimes in execution order.
#[derive(Debug, Default)]
pub struct ReportBuilder {
    checks: Vec<Check>,
    runtimes: BTreeMap<String, f64>,
    suite: String,
}

/// Fluent constructor for one check.
pub struct CheckSpec {
    check: Check,
}

impl CheckSpec {
    pub fn value(mut self, key: &str, v: f64) -> Self {
        self.check.values.insert(key.to_string(), v);
        self
    }

    pub fn tolerance(mut self, t: f64) -> Self {
        self.check.tolerance = t;
        self
    }

    pub fn exploratory(mut self) -> Self {
        self.check.exploratory = true;
        self
    }
}

impl ReportBuilder {
    pub fn begin_suite(&mut self, suite: &str) {
        self.suite = suite.to_string();
    }

    pub fn spec(&self, name: &str, anchor: &str) -> CheckSpec {
        CheckSpec {
            check: Check {
                suite: self.suite.clone(),
                name: name.to_string(),
                anchor: anchor.to_string(),
                values: BTreeMap::new(),
                tolerance: 0.0,
                passed: false,
                exploratory: false,
                error: None,
            },
        }
    }

    /// Records a finished check. Non-finite values count as failures.
    pub fn push(&mut self, spec: CheckSpec, passed: bool) {
        let mut c = spec.check;
        let finite = c.values.values().all(|v| v.is_finite());
        c.passed = passed && finite;
        assert!(self.checks.iter().all(|o| o.name != c.name), "duplicate check name {}", c.name);
        self.checks.push(c);
    }

    /// A computation that failed before it could be judged is recorded as a failed check.
    pub fn push_error(&mut self, name: &str, anchor: &str, err: &LabError) {
        let mut spec = self.spec(name, anchor);
        spec.check.error = Some(err.to_string());
        self.push(spec, false);
    }

    pub fn record_runtime(&mut self, key: &str, seconds: f64) {
        *self.runtimes.entry(key.to_string()).or_insert(0.0) += seconds;
    }

    pub fn runtimes(&self) -> &BTreeMap<String, f64> {
        &self.runtimes
    }

    pub fn len(&self) -> usize {
        self.checks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checks.is_empty()
    }

    pub fn finish(self, config: ExperimentConfig) -> (VerificationReport, BTreeMap<String, f64>) {
        let failed: Vec<String> = self.checks.iter().filter(|c| !c.passed && !c.exploratory).map(|c| c.name.clone()).collect();
        let report = VerificationReport { config, passed: failed.is_empty(), total: self.checks.len(), failed, checks: self.checks };
        (report, self.runtimes)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_ignores_exploratory_failures() {
        let mut b = ReportBuilder::default();
        b.begin_suite("demo");
        b.push(b.spec("a", "identity").value("x", 1.0), true);
        b.push(b.spec("b", "probe").exploratory(), false);
        let (r, _) = b.finish(ExperimentConfig::default());
        assert!(r.passed);
        assert_eq!(r.total, 2);
        let back = VerificationReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back.to_json(), r.to_json());
    }

    #[test]
    fn non_finite_values_fail() {
        let mut b = ReportBuilder::default();
        b.push(b.spec("a", "identity").value("x", f64::NAN), true);
        b.push_error("b", "identity", &LabError::LineSearchFailed(3));
        let (r, _) = b.finish(ExperimentConfig::default());
        assert!(!r.passed);
        assert_eq!(r.failed, vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    #[should_panic(expected = "duplicate")]
    fn names_are_unique() {
        let mut b = ReportBuilder::default();
        b.push(b.spec("a", "x"), true);
        b.push(b.spec("a", "x"), true);
    }
}
