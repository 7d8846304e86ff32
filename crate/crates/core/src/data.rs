//! Observational samples `{(A_i, X_i, Y_i)}` and their CSV representation.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Continuous,
    Binary,
}

impl std::str::FromStr for OutcomeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" => Ok(OutcomeKind::Continuous),
            "binary" => Ok(OutcomeKind::Binary),
            other => Err(Error::Config(format!("unknown outcome kind `{other}`"))),
        }
    }
}

/// Unvalidated columns of a sample. Converting into a [`Dataset`] runs
/// [`validate`] and fails if any violation is found.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub treatment: Vec<f64>,
    pub outcome: Vec<f64>,
    pub outcome_kind: OutcomeKind,
    pub covariate_names: Vec<String>,
    /// One vector per covariate (column-wise).
    pub covariates: Vec<Vec<f64>>,
    pub provided_ps: Option<Vec<f64>>,
    pub unit_ids: Option<Vec<String>>,
}

/// A single invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TooFewRows {
        rows: usize,
    },
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    ColumnNameCount {
        names: usize,
        columns: usize,
    },
    EmptyColumnName {
        index: usize,
    },
    DuplicateColumnName {
        column: String,
    },
    NoTreatedUnits,
    NoControlUnits,
    NonFinite {
        row: usize,
        column: String,
    },
    TreatmentNotBinary {
        row: usize,
        value: f64,
    },
    OutcomeNotBinary {
        row: usize,
        value: f64,
    },
    PsOutOfRange {
        row: usize,
        value: f64,
    },
}

impl Violation {
    pub fn row(&self) -> Option<usize> {
        match self {
            Violation::NonFinite { row, .. }
            | Violation::TreatmentNotBinary { row, .. }
            | Violation::OutcomeNotBinary { row, .. }
            | Violation::PsOutOfRange { row, .. } => Some(*row),
            _ => None,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewRows { rows } => write!(f, "at least 2 rows required, found {rows}"),
            Violation::LengthMismatch {
                column,
                expected,
                found,
            } => {
                write!(f, "column `{column}` has {found} rows, expected {expected}")
            }
            Violation::ColumnNameCount { names, columns } => {
                write!(f, "{names} covariate names for {columns} covariate columns")
            }
            Violation::EmptyColumnName { index } => {
                write!(f, "covariate {index} has an empty name")
            }
            Violation::DuplicateColumnName { column } => {
                write!(f, "duplicate covariate name `{column}`")
            }
            Violation::NoTreatedUnits => write!(f, "no treated units"),
            Violation::NoControlUnits => write!(f, "no control units"),
            Violation::NonFinite { row, column } => {
                write!(f, "row {row}: non-finite value in column `{column}`")
            }
            Violation::TreatmentNotBinary { row, value } => {
                write!(f, "row {row}: treatment not in {{0,1}} (found {value})")
            }
            Violation::OutcomeNotBinary { row, value } => {
                write!(
                    f,
                    "row {row}: binary outcome not in {{0,1}} (found {value})"
                )
            }
            Violation::PsOutOfRange { row, value } => {
                write!(
                    f,
                    "row {row}: provided PS must be in open interval (0,1) (found {value})"
                )
            }
        }
    }
}

/// Every violation found in a [`RawDataset`]; empty when the data are valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    /// True if any violation message contains `needle`.
    pub fn mentions(&self, needle: &str) -> bool {
        self.violations
            .iter()
            .any(|v| v.to_string().contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let messages: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&messages.join("; "))
    }
}

/// Checks every dataset invariant and reports all violations with row indices
/// (0-based, header excluded).
pub fn validate(raw: &RawDataset) -> ValidationReport {
    let mut out = Vec::new();
    let n = raw.treatment.len();
    if n < 2 {
        out.push(Violation::TooFewRows { rows: n });
    }

    let mut check_len = |column: &str, len: usize| {
        if len != n {
            out.push(Violation::LengthMismatch {
                column: column.to_string(),
                expected: n,
                found: len,
            });
            false
        } else {
            true
        }
    };
    let outcome_ok = check_len("outcome", raw.outcome.len());
    let mut covariate_ok = vec![false; raw.covariates.len()];
    for (j, col) in raw.covariates.iter().enumerate() {
        let name = raw
            .covariate_names
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("#{j}"));
        covariate_ok[j] = check_len(&name, col.len());
    }
    let ps_ok = raw.provided_ps.as_ref().map(|ps| check_len("ps", ps.len()));
    if let Some(ids) = &raw.unit_ids {
        check_len("id", ids.len());
    }

    if raw.covariate_names.len() != raw.covariates.len() {
        out.push(Violation::ColumnNameCount {
            names: raw.covariate_names.len(),
            columns: raw.covariates.len(),
        });
    }
    let mut seen = HashSet::new();
    for (j, name) in raw.covariate_names.iter().enumerate() {
        if name.trim().is_empty() {
            out.push(Violation::EmptyColumnName { index: j });
        } else if !seen.insert(name.as_str()) {
            out.push(Violation::DuplicateColumnName {
                column: name.clone(),
            });
        }
    }

    let (mut any_treated, mut any_control) = (false, false);
    for (i, &a) in raw.treatment.iter().enumerate() {
        if !a.is_finite() {
            out.push(Violation::NonFinite {
                row: i,
                column: "treatment".into(),
            });
        } else if a == 1.0 {
            any_treated = true;
        } else if a == 0.0 {
            any_control = true;
        } else {
            out.push(Violation::TreatmentNotBinary { row: i, value: a });
        }
    }
    if n > 0 && !any_treated {
        out.push(Violation::NoTreatedUnits);
    }
    if n > 0 && !any_control {
        out.push(Violation::NoControlUnits);
    }

    if outcome_ok {
        for (i, &y) in raw.outcome.iter().enumerate() {
            if !y.is_finite() {
                out.push(Violation::NonFinite {
                    row: i,
                    column: "outcome".into(),
                });
            } else if raw.outcome_kind == OutcomeKind::Binary && y != 0.0 && y != 1.0 {
                out.push(Violation::OutcomeNotBinary { row: i, value: y });
            }
        }
    }

    for (j, col) in raw.covariates.iter().enumerate() {
        if !covariate_ok[j] {
            continue;
        }
        let name = raw
            .covariate_names
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("#{j}"));
        for (i, x) in col.iter().enumerate() {
            if !x.is_finite() {
                out.push(Violation::NonFinite {
                    row: i,
                    column: name.clone(),
                });
            }
        }
    }

    if let (Some(ps), Some(true)) = (&raw.provided_ps, ps_ok) {
        for (i, &e) in ps.iter().enumerate() {
            if !e.is_finite() {
                out.push(Violation::NonFinite {
                    row: i,
                    column: "ps".into(),
                });
            } else if e <= 0.0 || e >= 1.0 {
                out.push(Violation::PsOutOfRange { row: i, value: e });
            }
        }
    }

    ValidationReport { violations: out }
}

/// A validated observational sample. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    treatment: Vec<bool>,
    outcome: Vec<f64>,
    outcome_kind: OutcomeKind,
    covariate_names: Vec<String>,
    covariates: Vec<Vec<f64>>,
    provided_ps: Option<Vec<f64>>,
    unit_ids: Option<Vec<String>>,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = Error;

    fn try_from(raw: RawDataset) -> Result<Self> {
        let report = validate(&raw);
        if !report.is_empty() {
            return Err(Error::InvalidData(report));
        }
        Ok(Dataset {
            treatment: raw.treatment.iter().map(|&a| a == 1.0).collect(),
            outcome: raw.outcome,
            outcome_kind: raw.outcome_kind,
            covariate_names: raw.covariate_names,
            covariates: raw.covariates,
            provided_ps: raw.provided_ps,
            unit_ids: raw.unit_ids,
        })
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.treatment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treatment.is_empty()
    }

    /// Number of covariates `p`.
    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    pub fn treatment(&self) -> &[bool] {
        &self.treatment
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn outcome_kind(&self) -> OutcomeKind {
        self.outcome_kind
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariates(&self) -> &[Vec<f64>] {
        &self.covariates
    }

    pub fn covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariate_names
            .iter()
            .position(|n| n == name)
            .map(|j| self.covariates[j].as_slice())
    }

    pub fn provided_ps(&self) -> Option<&[f64]> {
        self.provided_ps.as_deref()
    }

    pub fn unit_ids(&self) -> Option<&[String]> {
        self.unit_ids.as_deref()
    }

    pub fn n_treated(&self) -> usize {
        self.treatment.iter().filter(|&&a| a).count()
    }

    pub fn n_control(&self) -> usize {
        self.len() - self.n_treated()
    }

    pub fn into_raw(self) -> RawDataset {
        RawDataset {
            treatment: self
                .treatment
                .iter()
                .map(|&a| if a { 1.0 } else { 0.0 })
                .collect(),
            outcome: self.outcome,
            outcome_kind: self.outcome_kind,
            covariate_names: self.covariate_names,
            covariates: self.covariates,
            provided_ps: self.provided_ps,
            unit_ids: self.unit_ids,
        }
    }

    /// Always empty: construction enforces every invariant.
    pub fn validate(&self) -> ValidationReport {
        validate(&self.clone().into_raw())
    }

    /// Rows `indices` (with repetition) as a new dataset, e.g. a bootstrap
    /// resample. Fails if the selection loses an arm.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Dataset> {
        let pick = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let raw = RawDataset {
            treatment: indices
                .iter()
                .map(|&i| if self.treatment[i] { 1.0 } else { 0.0 })
                .collect(),
            outcome: pick(&self.outcome),
            outcome_kind: self.outcome_kind,
            covariate_names: self.covariate_names.clone(),
            covariates: self.covariates.iter().map(|c| pick(c)).collect(),
            provided_ps: self.provided_ps.as_deref().map(pick),
            unit_ids: self
                .unit_ids
                .as_ref()
                .map(|ids| indices.iter().map(|&i| ids[i].clone()).collect()),
        };
        Dataset::try_from(raw)
    }

    /// Keeps only the named covariates, in the given order.
    pub fn with_covariates(&self, names: &[&str]) -> Result<Dataset> {
        let mut covariates = Vec::with_capacity(names.len());
        for name in names {
            let col = self
                .covariate(name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
            covariates.push(col.to_vec());
        }
        Ok(Dataset {
            covariate_names: names.iter().map(|s| s.to_string()).collect(),
            covariates,
            ..self.clone()
        })
    }

    /// Writes the dataset as CSV using the column names of `mapping`.
    /// Values are written in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, writer: W, mapping: &ColumnMapping) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = Vec::new();
        if let Some(id) = &mapping.id {
            header.push(id);
        }
        header.push(&mapping.treatment);
        header.push(&mapping.outcome);
        header.extend(self.covariate_names.iter().map(String::as_str));
        if let Some(ps) = &mapping.ps {
            header.push(ps);
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut record: Vec<String> = Vec::with_capacity(header.len());
            if mapping.id.is_some() {
                let id = self
                    .unit_ids
                    .as_ref()
                    .map_or_else(|| i.to_string(), |ids| ids[i].clone());
                record.push(id);
            }
            record.push(if self.treatment[i] {
                "1".into()
            } else {
                "0".into()
            });
            record.push(self.outcome[i].to_string());
            record.extend(self.covariates.iter().map(|c| c[i].to_string()));
            if mapping.ps.is_some() {
                let ps = self
                    .provided_ps
                    .as_ref()
                    .ok_or_else(|| Error::MissingColumn("ps".into()))?;
                record.push(ps[i].to_string());
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which CSV columns hold the treatment, outcome, covariates and optional PS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub treatment: String,
    pub outcome: String,
    pub covariates: Vec<String>,
    #[serde(default)]
    pub ps: Option<String>,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default = "default_outcome_kind")]
    pub outcome_kind: OutcomeKind,
}

fn default_outcome_kind() -> OutcomeKind {
    OutcomeKind::Continuous
}

impl ColumnMapping {
    pub fn new(treatment: &str, outcome: &str, covariates: &[&str]) -> Self {
        ColumnMapping {
            treatment: treatment.into(),
            outcome: outcome.into(),
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            ps: None,
            id: None,
            outcome_kind: OutcomeKind::Continuous,
        }
    }

    pub fn with_ps(mut self, column: &str) -> Self {
        self.ps = Some(column.into());
        self
    }

    pub fn binary(mut self) -> Self {
        self.outcome_kind = OutcomeKind::Binary;
        self
    }
}

pub fn load_csv<P: AsRef<Path>>(path: P, mapping: &ColumnMapping) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, mapping)
}

/// Parses comma-separated data with a header row. Covariates keep the order
/// given in `mapping`.
pub fn read_csv<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let a_idx = index_of(&mapping.treatment)?;
    let y_idx = index_of(&mapping.outcome)?;
    let x_idx: Vec<usize> = mapping
        .covariates
        .iter()
        .map(|c| index_of(c))
        .collect::<Result<_>>()?;
    let ps_idx = mapping.ps.as_deref().map(index_of).transpose()?;
    let id_idx = mapping.id.as_deref().map(index_of).transpose()?;

    let mut raw = RawDataset {
        treatment: Vec::new(),
        outcome: Vec::new(),
        outcome_kind: mapping.outcome_kind,
        covariate_names: mapping.covariates.clone(),
        covariates: vec![Vec::new(); x_idx.len()],
        provided_ps: ps_idx.map(|_| Vec::new()),
        unit_ids: id_idx.map(|_| Vec::new()),
    };

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |idx: usize, column: &str| -> Result<f64> {
            let text = record.get(idx).unwrap_or("");
            if text.is_empty() || text.eq_ignore_ascii_case("na") {
                return Err(Error::MissingValue {
                    row,
                    column: column.to_string(),
                });
            }
            text.parse::<f64>().map_err(|_| Error::NonNumeric {
                row,
                column: column.to_string(),
                value: text.to_string(),
            })
        };
        raw.treatment.push(cell(a_idx, &mapping.treatment)?);
        raw.outcome.push(cell(y_idx, &mapping.outcome)?);
        for (j, &idx) in x_idx.iter().enumerate() {
            raw.covariates[j].push(cell(idx, &mapping.covariates[j])?);
        }
        if let (Some(idx), Some(ps)) = (ps_idx, raw.provided_ps.as_mut()) {
            ps.push(cell(idx, mapping.ps.as_deref().unwrap_or("ps"))?);
        }
        if let (Some(idx), Some(ids)) = (id_idx, raw.unit_ids.as_mut()) {
            ids.push(record.get(idx).unwrap_or("").to_string());
        }
    }

    Dataset::try_from(raw)
}
