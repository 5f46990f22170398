//! Check records, coverage counters and the JSON report.

use std::collections::BTreeMap;

use actionlab::SpectralConvention;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// Pass iff `computed ≤ bound`.
    Upper,
    /// Pass iff `computed ≥ bound`.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub name: String,
    pub anchor: String,
    /// Acceptance criterion this record belongs to, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<u8>,
    pub computed: f64,
    pub bound: f64,
    pub kind: BoundKind,
    /// `bound − computed` for upper bounds, `computed − bound` for lower.
    pub margin: f64,
    pub pass: bool,
    pub details: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Record {
    pub fn upper(name: impl Into<String>, anchor: &str, computed: f64, bound: f64) -> Self {
        Self::new(name.into(), anchor, computed, bound, BoundKind::Upper)
    }

    pub fn lower(name: impl Into<String>, anchor: &str, computed: f64, bound: f64) -> Self {
        Self::new(name.into(), anchor, computed, bound, BoundKind::Lower)
    }

    /// A boolean property: computed 1 if it holds, bound 1.
    pub fn holds(name: impl Into<String>, anchor: &str, ok: bool) -> Self {
        Self::lower(name, anchor, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    /// A check that could not be evaluated.
    pub fn failed(name: impl Into<String>, anchor: &str, error: impl ToString) -> Self {
        let mut r = Self::new(name.into(), anchor, f64::NAN, 0.0, BoundKind::Upper);
        r.error = Some(error.to_string());
        r
    }

    fn new(name: String, anchor: &str, computed: f64, bound: f64, kind: BoundKind) -> Self {
        let margin = match kind {
            BoundKind::Upper => bound - computed,
            BoundKind::Lower => computed - bound,
        };
        Self {
            name,
            anchor: anchor.to_string(),
            criterion: None,
            computed,
            bound,
            kind,
            margin,
            pass: margin >= 0.0,
            details: BTreeMap::new(),
            error: None,
        }
    }

    pub fn criterion(mut self, c: u8) -> Self {
        self.criterion = Some(c);
        self
    }

    pub fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }
}

/// A sweep curve for external plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Curve {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Records, coverage counts and curves accumulated by a run.
#[derive(Debug, Default)]
pub struct Recorder {
    pub records: Vec<Record>,
    pub coverage: BTreeMap<String, usize>,
    pub curves: BTreeMap<String, Curve>,
}

impl Recorder {
    pub fn hit(&mut self, op: &str) {
        *self.coverage.entry(op.to_string()).or_default() += 1;
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn curve(&mut self, name: &str, curve: Curve) {
        self.curves.insert(name.to_string(), curve);
    }

    pub fn extend(&mut self, other: Recorder) {
        self.records.extend(other.records);
        for (k, v) in other.coverage {
            *self.coverage.entry(k).or_default() += v;
        }
        self.curves.extend(other.curves);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub d: usize,
    #[serde(rename = "N")]
    pub cutoff: usize,
    #[serde(rename = "M_t")]
    pub m_t: usize,
    #[serde(rename = "M_theta")]
    pub m_theta: usize,
    pub eps_list: Vec<f64>,
    pub seed: u64,
    pub model: actionlab::HamiltonianModel,
    pub sobolev_constant: f64,
    pub ball_radius: f64,
    /// `sup |K(x)|/|x|` factor constant, absent when `H` is not flat near 0.
    pub k_constant: Option<f64>,
    pub splitting_c_imag: f64,
    pub splitting_lipschitz: f64,
    pub platform: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub suite: String,
    pub convention: SpectralConvention,
    pub environment: Environment,
    pub passed: bool,
    pub failures: usize,
    pub records: Vec<Record>,
    pub coverage: BTreeMap<String, usize>,
    pub curves: BTreeMap<String, Curve>,
}

impl Report {
    pub fn assemble(suite: &str, environment: Environment, recorder: Recorder) -> Self {
        let mut records = recorder.records;
        records.sort_by(|a, b| a.name.cmp(&b.name));
        let failures = records.iter().filter(|r| !r.pass).count();
        Self {
            suite: suite.to_string(),
            convention: SpectralConvention::default(),
            environment,
            passed: failures == 0,
            failures,
            records,
            coverage: recorder.coverage,
            curves: recorder.curves,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn failing(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.pass)
    }

    /// Records tagged with the given acceptance criterion.
    pub fn criterion(&self, c: u8) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.criterion == Some(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_follow_kind() {
        let r = Record::upper("a", "", 1.0, 3.0);
        assert_eq!((r.margin, r.pass), (2.0, true));
        let r = Record::lower("b", "", 1.0, 3.0);
        assert_eq!((r.margin, r.pass), (-2.0, false));
    }

    #[test]
    fn nan_never_passes() {
        assert!(!Record::upper("a", "", f64::NAN, 1.0).pass);
        assert!(!Record::failed("b", "", "boom").pass);
    }
}
