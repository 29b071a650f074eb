use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::spec::ExperimentSpec;
use crate::error::Result;
use crate::optimize::{TrainTrajectory, TRAJECTORY_HEADER};

pub const NEURONS_HEADER: &str = "j,init_x,init_y,final_x,final_y";

/// One named pass/fail check with the value that decided it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssertionOutcome {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl AssertionOutcome {
    /// Passes iff `value < threshold`.
    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        let name = name.into();
        AssertionOutcome {
            passed: value < threshold,
            detail: format!("{name}: {value} < {threshold}"),
            name,
            value,
            threshold,
        }
    }

    /// Passes iff `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        let name = name.into();
        AssertionOutcome {
            passed: value <= threshold,
            detail: format!("{name}: {value} <= {threshold}"),
            name,
            value,
            threshold,
        }
    }

    /// Passes iff `value > threshold`.
    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        let name = name.into();
        AssertionOutcome {
            passed: value > threshold,
            detail: format!("{name}: {value} > {threshold}"),
            name,
            value,
            threshold,
        }
    }
}

/// Unit directions of neuron `j` before and after training (2-D inputs).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronRow {
    pub j: usize,
    pub init: [f64; 2],
    pub last: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub spec_hash: String,
    pub name: String,
    pub kind: String,
    pub seeds: Vec<u64>,
    pub passed: bool,
    pub assertions: Vec<AssertionOutcome>,
    pub metrics: BTreeMap<String, f64>,
    pub details: serde_json::Value,
    /// `(label, trajectory)`; the first is written as `trajectory.csv`.
    #[serde(skip)]
    pub trajectories: Vec<(String, TrainTrajectory)>,
    #[serde(skip)]
    pub neurons: Vec<NeuronRow>,
    /// Extra CSV files as `(file name, contents)`.
    #[serde(skip)]
    pub tables: Vec<(String, String)>,
    /// Kept out of every artifact so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl ExperimentResult {
    pub fn new(spec: &ExperimentSpec) -> Self {
        ExperimentResult {
            spec_hash: spec.hash(),
            name: spec.name.clone(),
            kind: spec.kind.label().into(),
            seeds: spec.seeds.clone(),
            passed: true,
            assertions: Vec::new(),
            metrics: BTreeMap::new(),
            details: serde_json::Value::Null,
            trajectories: Vec::new(),
            neurons: Vec::new(),
            tables: Vec::new(),
            wall_clock_secs: 0.0,
        }
    }

    pub fn check(&mut self, outcome: AssertionOutcome) {
        self.passed &= outcome.passed;
        self.assertions.push(outcome);
    }

    pub fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssertionOutcome> {
        self.assertions.iter().filter(|a| !a.passed)
    }

    pub fn neurons_csv(&self) -> String {
        let mut s = String::from(NEURONS_HEADER);
        s.push('\n');
        for n in &self.neurons {
            let _ = writeln!(s, "{},{},{},{},{}", n.j, n.init[0], n.init[1], n.last[0], n.last[1]);
        }
        s
    }

    /// `summary.json`: the spec, its hash, assertions, metrics and details.
    pub fn summary_json(&self, spec: &ExperimentSpec) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            spec: &'a ExperimentSpec,
            #[serde(flatten)]
            result: &'a ExperimentResult,
        }
        let mut s = serde_json::to_string_pretty(&Summary { spec, result: self })?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `summary.json`, `trajectory.csv`, `neurons.csv` (when present),
    /// extra tables, and `runs/<label>/trajectory.csv` for every run.
    pub fn write_artifacts(&self, spec: &ExperimentSpec, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.json"), self.summary_json(spec)?)?;
        let primary = match self.trajectories.first() {
            Some((_, t)) => t.to_csv_string(),
            None => format!("{TRAJECTORY_HEADER}\n"),
        };
        fs::write(dir.join("trajectory.csv"), primary)?;
        if !self.neurons.is_empty() {
            fs::write(dir.join("neurons.csv"), self.neurons_csv())?;
        }
        for (name, body) in &self.tables {
            fs::write(dir.join(name), body)?;
        }
        if self.trajectories.len() > 1 {
            for (label, t) in &self.trajectories {
                let sub = dir.join("runs").join(label);
                fs::create_dir_all(&sub)?;
                fs::write(sub.join("trajectory.csv"), t.to_csv_string())?;
            }
        }
        Ok(())
    }
}
