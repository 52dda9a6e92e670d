//! Run report schema: every requested test appears exactly once with a
//! pass/fail verdict; the JSON is byte-stable for a fixed config except for
//! the trailing runtime field.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub test: String,
    pub statistic: f64,
    /// p-value where the test has one, otherwise a sigma-distance
    pub p: f64,
    pub pass: bool,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateRecord {
    pub name: String,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: crate::Config,
    pub verdicts: Vec<Verdict>,
    pub estimates: Vec<EstimateRecord>,
    pub artifacts: Vec<String>,
    pub runtime_secs: f64,
}

impl RunReport {
    pub fn new(config: crate::Config) -> Self {
        RunReport {
            config,
            verdicts: Vec::new(),
            estimates: Vec::new(),
            artifacts: Vec::new(),
            runtime_secs: 0.0,
        }
    }

    pub fn verdict_p(&mut self, test: &str, statistic: f64, p: f64, threshold: f64, note: String) {
        self.verdicts.push(Verdict {
            test: test.to_string(),
            statistic,
            p,
            pass: p > threshold,
            note,
        });
    }

    pub fn verdict_sigma(&mut self, test: &str, statistic: f64, sigmas: f64, note: String) {
        self.verdicts.push(Verdict {
            test: test.to_string(),
            statistic,
            p: sigmas,
            pass: sigmas < 3.0,
            note,
        });
    }

    pub fn verdict_bool(&mut self, test: &str, statistic: f64, pass: bool, note: String) {
        self.verdicts.push(Verdict {
            test: test.to_string(),
            statistic,
            p: f64::NAN,
            pass,
            note,
        });
    }

    pub fn estimate(&mut self, name: &str, est: localsets::harness::Estimate<f64>) {
        self.estimates.push(EstimateRecord {
            name: name.to_string(),
            mean: est.mean,
            stderr: est.stderr,
            n: est.n,
        });
    }
}
