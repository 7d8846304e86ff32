//! Propensity-score weighting for causal effect estimation under limited overlap.
//!
//! The crate covers the full pipeline:
//!
//! - [`data`]: validated observational samples `(A, X, Y)` loaded from CSV;
//! - [`psmodel`]: logistic propensity scores fitted by IRLS, or user-supplied scores;
//! - [`tilting`]: tilting functions for the WATE, WATT and WATC estimand classes
//!   and the per-unit weights they induce;
//! - [`estimators`]: normalized weighted estimators for continuous outcomes and
//!   risk difference / risk ratio / odds ratio for binary outcomes;
//! - [`inference`]: nonparametric bootstrap standard errors and confidence intervals;
//! - [`diagnostics`]: effective sample size, absolute standardized mean differences
//!   and propensity-score overlap summaries;
//! - [`simulation`]: a Monte Carlo harness with a known data-generating process and
//!   super-population truths;
//! - [`cli`]: the `analyze`, `simulate` and `diagnose` commands behind the `psweight` binary.
//!
//! ```
//! use psweight::prelude::*;
//!
//! # fn main() -> psweight::Result<()> {
//! let raw = RawDataset {
//!     treatment: vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
//!     outcome: vec![3.0, 1.0, 4.0, 1.5, 2.5, 0.5],
//!     outcome_kind: OutcomeKind::Continuous,
//!     covariate_names: vec![],
//!     covariates: vec![],
//!     provided_ps: Some(vec![0.6, 0.4, 0.7, 0.3, 0.5, 0.5]),
//!     unit_ids: None,
//! };
//! let data = Dataset::try_from(raw)?;
//! let ps = resolve_ps(&data, None, &FitOptions::default())?;
//! let spec = EstimandSpec::difference(WeightScheme::new(EstimandClass::Wate, Scheme::Overlap)?);
//! let ato = estimate_point(&data, &ps.values, &spec)?;
//! assert!(ato.estimate > 0.0);
//! # Ok(())
//! # }
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod diagnostics;
mod error;
pub mod estimators;
pub mod inference;
pub mod psmodel;
pub mod simulation;
pub mod stats;
pub mod tilting;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::data::{load_csv, ColumnMapping, Dataset, OutcomeKind, RawDataset};
    pub use crate::diagnostics::{asmd, balance_report, ess, overlap_summary};
    pub use crate::estimators::{estimate_all, estimate_point, EstimandSpec, Measure, PointResult};
    pub use crate::inference::{bootstrap, BootstrapConfig, CiMethod, EffectEstimate, PsMode};
    pub use crate::psmodel::{fit_logistic, resolve_ps, FitOptions, PsFit, PsSource};
    pub use crate::simulation::{compute_truth, run_monte_carlo, DgpConfig, MonteCarloConfig};
    pub use crate::tilting::{unit_weights, EstimandClass, Scheme, WeightScheme};
    pub use crate::{Error, Result};
}
