//! Flat JSON experiment configuration. Every field has a default so a partial file (or no
//! file) is valid; `validate` enforces the documented ranges.

use serde::{Deserialize, Serialize};
use std::path::Path;
use teichlab::{LabError, Result};

pub const SUITES: [&str; 7] = ["fuchsian", "fem", "metric", "harmonic", "variation", "wp", "all"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: String,
    /// Mesh refinement level, `0..=8`.
    pub refine: i64,
    /// Word-length cutoff of the Poincaré series, `1..=8`.
    pub depth: i64,
    pub normalize: bool,
    /// Target differentials as real seed coefficients `(c0, c1, c2)`.
    pub seeds: Vec<[f64; 3]>,
    /// Differential used to build the deformed surface domain.
    pub domain_seed: [f64; 3],
    /// Slice point of the deformed surface domain, in units of `1/sup|ν|`.
    pub domain_z: [f64; 2],
    /// z-grid step in units of `1/sup|ν|`; the Richardson pass halves it.
    pub grid_step: f64,
    pub grid_size: i64,
    /// t-grid step as a fraction of the Wolf threshold.
    pub t_step: f64,
    pub t_count: i64,
    pub powers: Vec<f64>,
    pub classes: Vec<Vec<usize>>,
    pub curve_system: Vec<Vec<usize>>,
    pub circle_samples: i64,
    /// Random sections for the block-operator audits.
    pub w_samples: i64,
    pub random_seed: u64,
    pub out_dir: String,
    pub svg: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            suite: "all".into(),
            refine: 5,
            depth: 6,
            normalize: true,
            seeds: vec![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 1.0]],
            domain_seed: [1.0, 0.0, 1.0],
            domain_z: [0.3, 0.1],
            grid_step: 0.02,
            grid_size: 3,
            t_step: 0.02,
            t_count: 9,
            powers: vec![5.0 / 6.0, 0.9, 1.0, 0.5],
            classes: vec![vec![0], vec![1]],
            curve_system: vec![vec![0], vec![1], vec![2], vec![3]],
            circle_samples: 512,
            w_samples: 10,
            random_seed: 7,
            out_dir: "lab_out".into(),
            svg: false,
        }
    }
}

fn bad(field: &str, reason: impl Into<String>) -> LabError {
    LabError::config(field, reason)
}

fn words(field: &str, ws: &[Vec<usize>]) -> Result<()> {
    if ws.is_empty() {
        return Err(bad(field, "needs at least one word"));
    }
    for (i, w) in ws.iter().enumerate() {
        if w.is_empty() || w.iter().any(|&k| k >= teichlab::fuchsian::SIDES) {
            return Err(bad(&format!("{field}[{i}]"), format!("word {w:?} must be non-empty with letters in 0..8")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| bad("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Pretty JSON with a trailing newline; parsing it back and re-serializing is the identity.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !SUITES.contains(&self.suite.as_str()) {
            return Err(bad("suite", format!("{:?} is not one of {SUITES:?}", self.suite)));
        }
        if !(0..=teichlab::mesh::MAX_REFINE as i64).contains(&self.refine) {
            return Err(bad("refine", format!("{} outside 0..=8", self.refine)));
        }
        if !(1..=8).contains(&self.depth) {
            return Err(bad("depth", format!("{} outside 1..=8", self.depth)));
        }
        if self.seeds.is_empty() {
            return Err(bad("seeds", "needs at least one seed"));
        }
        for (i, s) in self.seeds.iter().chain(std::iter::once(&self.domain_seed)).enumerate() {
            let field = if i < self.seeds.len() { format!("seeds[{i}]") } else { "domain_seed".into() };
            if s.iter().any(|c| !c.is_finite()) || (s[0] == 0.0 && s[2] == 0.0) {
                return Err(bad(&field, "needs finite coefficients with a non-zero even part"));
            }
        }
        let z = self.domain_z[0].hypot(self.domain_z[1]);
        if !z.is_finite() || z >= teichlab::metric::BELTRAMI_LIMIT {
            return Err(bad("domain_z", format!("|z| sup|nu| = {z} must stay below 0.5")));
        }
        if self.grid_size < 3 || self.grid_size % 2 == 0 || self.grid_size > 9 {
            return Err(bad("grid_size", "odd, between 3 and 9"));
        }
        let reach = self.grid_step * (self.grid_size / 2) as f64 * std::f64::consts::SQRT_2;
        if !(self.grid_step > 0.0) || reach >= teichlab::metric::BELTRAMI_LIMIT {
            return Err(bad("grid_step", "positive, with the grid corners inside |z| sup|nu| < 0.5"));
        }
        if self.t_count < 5 || self.t_count % 2 == 0 || self.t_count > 33 {
            return Err(bad("t_count", "odd, between 5 and 33"));
        }
        if !(self.t_step > 0.0) || self.t_step * (self.t_count / 2) as f64 > 0.15 {
            return Err(bad("t_step", "positive, with the ray inside 0.15 of the threshold"));
        }
        if self.powers.is_empty() || self.powers.iter().any(|c| !(*c > 0.0 && *c <= 2.0)) {
            return Err(bad("powers", "exponents in (0, 2]"));
        }
        words("classes", &self.classes)?;
        if self.classes.len() < 2 {
            return Err(bad("classes", "the log-sum check needs two classes"));
        }
        words("curve_system", &self.curve_system)?;
        if self.circle_samples < 64 || self.circle_samples % 4 != 0 || self.circle_samples > 1 << 14 {
            return Err(bad("circle_samples", "a multiple of 4 in 64..=16384"));
        }
        if !(1..=1000).contains(&self.w_samples) {
            return Err(bad("w_samples", "between 1 and 1000"));
        }
        if self.out_dir.is_empty() {
            return Err(bad("out_dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn runs(&self, suite: &str) -> bool {
        self.suite == "all" || self.suite == suite
    }
}

/// Worker count: `LAB_THREADS` if set, else the available parallelism.
pub fn worker_threads() -> Result<usize> {
    match std::env::var("LAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(bad("LAB_THREADS", format!("{v:?} is not a positive integer"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let s = c.to_json();
        let back = ExperimentConfig::from_json(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), s);
    }

    #[test]
    fn negative_refine_names_the_field() {
        let e = ExperimentConfig::from_json(r#"{"refine": -1}"#).unwrap_err();
        assert!(matches!(e, LabError::ConfigInvalid { ref field, .. } if field == "refine"), "{e}");
    }

    #[test]
    fn partial_files_take_defaults() {
        let c = ExperimentConfig::from_json(r#"{"suite": "fuchsian", "refine": 2}"#).unwrap();
        assert_eq!(c.depth, 6);
        assert!(c.runs("fuchsian") && !c.runs("wp"));
    }

    #[test]
    fn range_violations_are_rejected() {
        for (text, field) in [
            (r#"{"refine": 9}"#, "refine"),
            (r#"{"depth": 0}"#, "depth"),
            (r#"{"suite": "everything"}"#, "suite"),
            (r#"{"grid_size": 4}"#, "grid_size"),
            (r#"{"grid_step": 0.4}"#, "grid_step"),
            (r#"{"t_step": 0.1}"#, "t_step"),
            (r#"{"seeds": [[0, 1, 0]]}"#, "seeds[0]"),
            (r#"{"classes": [[0], [9]]}"#, "classes[1]"),
            (r#"{"circle_samples": 102}"#, "circle_samples"),
        ] {
            match ExperimentConfig::from_json(text) {
                Err(LabError::ConfigInvalid { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(matches!(ExperimentConfig::from_json(r#"{"bogus": 1}"#), Err(LabError::ConfigInvalid { .. })));
    }
}
