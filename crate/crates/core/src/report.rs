//! Residual-based validation reports shared by all validators.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

/// Where the largest residual of a check was found.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Worst {
    /// Non-finite residuals serialize as `null`.
    pub residual: f64,
    pub chart: String,
    pub point: Vec<f64>,
    pub at: String,
}

/// One residual observation at a sample point; `residual` is `+inf` when
/// the quantities could not be evaluated there.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub residual: f64,
    pub chart: String,
    pub point: Vec<f64>,
    pub at: String,
    pub error: Option<String>,
}

impl Observation {
    pub fn new(residual: f64, chart: &str, point: &[f64], at: impl Into<String>) -> Self {
        Self {
            residual,
            chart: chart.to_string(),
            point: point.to_vec(),
            at: at.into(),
            error: None,
        }
    }

    pub fn failed(error: impl fmt::Display, chart: &str, point: &[f64], at: impl Into<String>) -> Self {
        Self {
            residual: f64::INFINITY,
            chart: chart.to_string(),
            point: point.to_vec(),
            at: at.into(),
            error: Some(error.to_string()),
        }
    }

    fn key(&self) -> f64 {
        if self.residual.is_nan() {
            f64::INFINITY
        } else {
            self.residual
        }
    }
}

/// Order-independent maximum: ties keep the earliest observation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tracker {
    pub worst: Option<Observation>,
    pub samples: usize,
    pub first_error: Option<String>,
}

impl Tracker {
    pub fn observe(&mut self, obs: Observation) {
        self.samples += 1;
        if self.first_error.is_none() {
            if let Some(e) = &obs.error {
                self.first_error = Some(format!("{} at {:?}: {e}", obs.at, obs.point));
            }
        }
        let replace = match &self.worst {
            None => true,
            Some(w) => obs.key() > w.key(),
        };
        if replace {
            self.worst = Some(obs);
        }
    }

    pub fn extend(&mut self, obs: impl IntoIterator<Item = Observation>) {
        for o in obs {
            self.observe(o);
        }
    }

    /// Evaluate `f` on every item in parallel and fold in input order.
    pub fn collect_par<T: Sync>(items: &[T], f: impl Fn(&T) -> Observation + Sync + Send) -> Self {
        let obs: Vec<Observation> = items.par_iter().map(f).collect();
        let mut t = Self::default();
        t.extend(obs);
        t
    }

    pub fn merge(&mut self, other: Tracker) {
        let samples = self.samples + other.samples;
        if self.first_error.is_none() {
            self.first_error = other.first_error;
        }
        if let Some(o) = other.worst {
            let replace = match &self.worst {
                None => true,
                Some(w) => o.key() > w.key(),
            };
            if replace {
                self.worst = Some(o);
            }
        }
        self.samples = samples;
    }

    pub fn residual(&self) -> f64 {
        self.worst.as_ref().map_or(0.0, |w| w.residual)
    }

    pub fn into_check(self, name: impl Into<String>, tolerance: f64) -> Check {
        let residual = self.residual();
        let status = if self.samples == 0 {
            Status::Skip
        } else if residual <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        Check {
            name: name.into(),
            status,
            residual: Some(residual),
            tolerance: Some(tolerance),
            samples: self.samples,
            worst: self.worst.map(|w| Worst {
                residual: w.residual,
                chart: w.chart,
                point: w.point,
                at: w.at,
            }),
            detail: self.first_error,
            value: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst: Option<Worst>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<serde_json::Value>,
}

impl Check {
    pub fn pass(name: impl Into<String>) -> Self {
        Self::with_status(name, Status::Pass)
    }

    pub fn fail(name: impl Into<String>, detail: impl Into<String>) -> Self {
        let mut c = Self::with_status(name, Status::Fail);
        c.detail = Some(detail.into());
        c
    }

    pub fn skip(name: impl Into<String>, detail: impl Into<String>) -> Self {
        let mut c = Self::with_status(name, Status::Skip);
        c.detail = Some(detail.into());
        c
    }

    fn with_status(name: impl Into<String>, status: Status) -> Self {
        Self {
            name: name.into(),
            status,
            residual: None,
            tolerance: None,
            samples: 0,
            worst: None,
            detail: None,
            value: None,
        }
    }

    pub fn with_value(mut self, value: serde_json::Value) -> Self {
        self.value = Some(value);
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
    }

    pub fn status(&self) -> Status {
        if self.checks.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else {
            Status::Pass
        }
    }

    pub fn passed(&self) -> bool {
        self.status() == Status::Pass
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Largest residual among checks whose name starts with `prefix`.
    pub fn max_residual(&self, prefix: &str) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .filter_map(|c| c.residual)
            .fold(0.0, |a, r| if r.is_nan() { f64::INFINITY } else { a.max(r) })
    }
}

/// Pass thresholds for the residual checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Tolerances {
    pub cocycle: f64,
    pub membership: f64,
    pub section: f64,
    pub gauge: f64,
    pub connection: f64,
    pub curvature: f64,
    pub structure: f64,
    pub field_strength: f64,
    pub bianchi: f64,
    pub torsion: f64,
    pub covariant: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cocycle: 1e-10,
            membership: 1e-9,
            section: 1e-9,
            gauge: 1e-9,
            connection: 1e-8,
            curvature: 1e-8,
            structure: 1e-10,
            field_strength: 1e-10,
            bianchi: 1e-8,
            torsion: 1e-9,
            covariant: 1e-8,
        }
    }
}

impl Tolerances {
    /// The same threshold for every check.
    pub fn uniform(t: f64) -> Self {
        Self {
            cocycle: t,
            membership: t,
            section: t,
            gauge: t,
            connection: t,
            curvature: t,
            structure: t,
            field_strength: t,
            bianchi: t,
            torsion: t,
            covariant: t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_keep_first_and_nan_counts_as_worst() {
        let mut t = Tracker::default();
        t.observe(Observation::new(1.0, "a", &[0.0], "first"));
        t.observe(Observation::new(1.0, "a", &[1.0], "second"));
        assert_eq!(t.worst.as_ref().unwrap().at, "first");
        t.observe(Observation::new(f64::NAN, "a", &[2.0], "nan"));
        let c = t.into_check("x", 10.0);
        assert_eq!(c.status, Status::Fail);
    }

    #[test]
    fn parallel_collection_is_ordered() {
        let items: Vec<usize> = (0..1000).collect();
        let t = Tracker::collect_par(&items, |&i| {
            Observation::new((i % 7) as f64, "c", &[i as f64], i.to_string())
        });
        assert_eq!(t.worst.unwrap().at, "6");
        assert_eq!(t.samples, 1000);
    }

    #[test]
    fn empty_tracker_skips() {
        assert_eq!(Tracker::default().into_check("e", 1.0).status, Status::Skip);
    }
}
