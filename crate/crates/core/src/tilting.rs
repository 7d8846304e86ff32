//! Tilting functions and the unit weights they induce.
//!
//! A tilting function reweights the population to define a target estimand.
//! WATE tiltings `h(e)` act on the whole sample; WATT and WATC tiltings
//! `g(e)` act only on the control or treated arm respectively, leaving the
//! other arm unweighted.
//!
//! Tilting values are never normalized: every estimator downstream is a ratio
//! of weighted sums, so constant factors cancel.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::stats::normal_cdf;
use crate::{Error, Result};

/// Smooth-trimming bandwidth used when none is given.
pub const DEFAULT_SMOOTH_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimandClass {
    Wate,
    Watt,
    Watc,
}

impl EstimandClass {
    pub const ALL: [EstimandClass; 3] = [
        EstimandClass::Wate,
        EstimandClass::Watt,
        EstimandClass::Watc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimandClass::Wate => "wate",
            EstimandClass::Watt => "watt",
            EstimandClass::Watc => "watc",
        }
    }
}

impl fmt::Display for EstimandClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimandClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wate" => Ok(EstimandClass::Wate),
            "watt" => Ok(EstimandClass::Watt),
            "watc" => Ok(EstimandClass::Watc),
            other => Err(Error::InvalidScheme(format!(
                "unknown estimand class `{other}`"
            ))),
        }
    }
}

/// Tilting family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    /// `h ≡ 1` (ATE), or `g ≡ 1` (ATT / ATC).
    Ipw,
    /// `h = e`, WATE only.
    IpwTreated,
    /// `h = 1 - e`, WATE only.
    IpwControls,
    Trim {
        alpha: f64,
    },
    SmoothTrim {
        alpha: f64,
        epsilon: f64,
    },
    Trunc {
        alpha: f64,
    },
    Matching,
    /// `min{1, K·min(e, 1-e)}`, WATE only.
    Trapezoidal {
        k: f64,
    },
    Overlap,
    Entropy,
    Beta {
        nu1: f64,
        nu2: f64,
    },
}

impl Scheme {
    pub fn beta(nu: f64) -> Scheme {
        Scheme::Beta { nu1: nu, nu2: nu }
    }

    fn token(&self) -> &'static str {
        match self {
            Scheme::Ipw => "ipw",
            Scheme::IpwTreated => "treated",
            Scheme::IpwControls => "controls",
            Scheme::Trim { .. } => "trim",
            Scheme::SmoothTrim { .. } => "smoothtrim",
            Scheme::Trunc { .. } => "trunc",
            Scheme::Matching => "mw",
            Scheme::Trapezoidal { .. } => "tw",
            Scheme::Overlap => "ow",
            Scheme::Entropy => "ew",
            Scheme::Beta { .. } => "bw",
        }
    }
}

/// Serializes as `token[:param[:param]]`, e.g. `ow`, `trim:0.05`,
/// `smoothtrim:0.05:0.01`, `bw:2:4`.
impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())?;
        match *self {
            Scheme::Trim { alpha } | Scheme::Trunc { alpha } => write!(f, ":{alpha}"),
            Scheme::SmoothTrim { alpha, epsilon } => write!(f, ":{alpha}:{epsilon}"),
            Scheme::Trapezoidal { k } => write!(f, ":{k}"),
            Scheme::Beta { nu1, nu2 } if nu1 == nu2 => write!(f, ":{nu1}"),
            Scheme::Beta { nu1, nu2 } => write!(f, ":{nu1}:{nu2}"),
            _ => Ok(()),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let token = parts.next().unwrap_or("").to_ascii_lowercase();
        let params: Vec<f64> = parts
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidScheme(format!("bad parameter `{p}` in `{s}`")))
            })
            .collect::<Result<_>>()?;
        let arity = |n: std::ops::RangeInclusive<usize>| -> Result<()> {
            if n.contains(&params.len()) {
                Ok(())
            } else {
                Err(Error::InvalidScheme(format!(
                    "`{token}` takes {}..={} parameters, got {} in `{s}`",
                    n.start(),
                    n.end(),
                    params.len()
                )))
            }
        };
        let scheme = match token.as_str() {
            "ipw" => {
                arity(0..=0)?;
                Scheme::Ipw
            }
            "treated" => {
                arity(0..=0)?;
                Scheme::IpwTreated
            }
            "controls" => {
                arity(0..=0)?;
                Scheme::IpwControls
            }
            "mw" => {
                arity(0..=0)?;
                Scheme::Matching
            }
            "ow" => {
                arity(0..=0)?;
                Scheme::Overlap
            }
            "ew" => {
                arity(0..=0)?;
                Scheme::Entropy
            }
            "trim" => {
                arity(1..=1)?;
                Scheme::Trim { alpha: params[0] }
            }
            "trunc" => {
                arity(1..=1)?;
                Scheme::Trunc { alpha: params[0] }
            }
            "smoothtrim" => {
                arity(1..=2)?;
                Scheme::SmoothTrim {
                    alpha: params[0],
                    epsilon: params.get(1).copied().unwrap_or(DEFAULT_SMOOTH_EPSILON),
                }
            }
            "tw" => {
                arity(1..=1)?;
                Scheme::Trapezoidal { k: params[0] }
            }
            "bw" => {
                arity(1..=2)?;
                Scheme::Beta {
                    nu1: params[0],
                    nu2: params.get(1).copied().unwrap_or(params[0]),
                }
            }
            other => return Err(Error::InvalidScheme(format!("unknown scheme `{other}`"))),
        };
        Ok(scheme)
    }
}

/// An estimand class paired with a validated tilting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightScheme {
    class: EstimandClass,
    scheme: Scheme,
}

impl WeightScheme {
    pub fn new(class: EstimandClass, scheme: Scheme) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidScheme(msg));
        let alpha_ok = |alpha: f64| alpha > 0.0 && alpha < 0.5;
        match scheme {
            Scheme::IpwTreated | Scheme::IpwControls if class != EstimandClass::Wate => {
                return bad(format!(
                    "`{scheme}` is only defined for the WATE class; use `ipw` within {class}"
                ));
            }
            Scheme::Trapezoidal { .. } if class != EstimandClass::Wate => {
                return bad(format!(
                    "`tw` is only defined for the WATE class, not {class}"
                ));
            }
            Scheme::Trim { alpha } | Scheme::Trunc { alpha } if !alpha_ok(alpha) => {
                return bad(format!("alpha must lie in (0, 0.5), got {alpha}"));
            }
            Scheme::SmoothTrim { alpha, epsilon } => {
                if !alpha_ok(alpha) {
                    return bad(format!("alpha must lie in (0, 0.5), got {alpha}"));
                }
                if !(epsilon > 0.0 && epsilon.is_finite()) {
                    return bad(format!("epsilon must be positive, got {epsilon}"));
                }
            }
            Scheme::Trapezoidal { k } if !(k > 1.0 && k.is_finite()) => {
                return bad(format!("K must exceed 1, got {k}"));
            }
            Scheme::Beta { nu1, nu2 }
                if !(nu1 >= 2.0 && nu2 >= 2.0 && nu1.is_finite() && nu2.is_finite()) =>
            {
                return bad(format!(
                    "beta weights need nu1, nu2 >= 2, got ({nu1}, {nu2})"
                ));
            }
            _ => {}
        }
        Ok(WeightScheme { class, scheme })
    }

    /// Parses `token[:params]` for the given class.
    pub fn parse(class: EstimandClass, token: &str) -> Result<Self> {
        WeightScheme::new(class, token.parse()?)
    }

    pub fn class(&self) -> EstimandClass {
        self.class
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Tilting value `h(e)` (WATE) or `g(e)` (WATT / WATC).
    pub fn tilt(&self, e: f64) -> Result<f64> {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::PsOutOfRange(e));
        }
        Ok(match self.class {
            EstimandClass::Wate => wate_tilt(&self.scheme, e),
            EstimandClass::Watt => watt_tilt(&self.scheme, e),
            EstimandClass::Watc => watc_tilt(&self.scheme, e),
        })
    }

    /// Weight of a single unit with score `e` in arm `treated`.
    pub fn unit_weight(&self, e: f64, treated: bool) -> Result<f64> {
        let t = self.tilt(e)?;
        Ok(match (self.class, treated) {
            (EstimandClass::Wate, true) => t / e,
            (EstimandClass::Wate, false) => t / (1.0 - e),
            (EstimandClass::Watt, true) => 1.0,
            (EstimandClass::Watt, false) => t * e / (1.0 - e),
            (EstimandClass::Watc, true) => t * (1.0 - e) / e,
            (EstimandClass::Watc, false) => 1.0,
        })
    }

    /// Row label used in result tables: `overall`, `treated`, `control`,
    /// `overlap`, `matching`, `entropy`, `beta (v=2)`, `trimming (alpha=0.05)`, ...
    pub fn label(&self) -> String {
        match self.scheme {
            Scheme::Ipw => "overall".into(),
            Scheme::IpwTreated => "treated".into(),
            Scheme::IpwControls => "control".into(),
            Scheme::Overlap => "overlap".into(),
            Scheme::Matching => "matching".into(),
            Scheme::Entropy => "entropy".into(),
            Scheme::Beta { nu1, nu2 } if nu1 == nu2 => format!("beta (v={nu1})"),
            Scheme::Beta { nu1, nu2 } => format!("beta (v1={nu1}, v2={nu2})"),
            Scheme::Trim { alpha } => format!("trimming (alpha={alpha})"),
            Scheme::Trunc { alpha } => format!("truncation (alpha={alpha})"),
            Scheme::SmoothTrim { alpha, epsilon } => {
                format!("smooth trimming (alpha={alpha}, eps={epsilon})")
            }
            Scheme::Trapezoidal { k } => format!("trapezoidal (K={k})"),
        }
    }

    /// Conventional estimand name, e.g. `ATO`, `OWATT`, `ATC trimming`.
    pub fn estimand_name(&self) -> String {
        let (base, suffix) = match self.class {
            EstimandClass::Wate => ("ATE", ""),
            EstimandClass::Watt => ("ATT", "WATT"),
            EstimandClass::Watc => ("ATC", "WATC"),
        };
        match (self.class, self.scheme) {
            (EstimandClass::Wate, Scheme::Ipw) => "ATE".into(),
            (_, Scheme::IpwTreated) => "ATT".into(),
            (_, Scheme::IpwControls) => "ATC".into(),
            (EstimandClass::Wate, Scheme::Overlap) => "ATO".into(),
            (EstimandClass::Wate, Scheme::Matching) => "ATM".into(),
            (EstimandClass::Wate, Scheme::Entropy) => "ATEN".into(),
            (EstimandClass::Wate, Scheme::Beta { .. }) => "ATB".into(),
            (EstimandClass::Wate, Scheme::Trapezoidal { .. }) => "ATTZ".into(),
            (_, Scheme::Ipw) => base.into(),
            (_, Scheme::Overlap) => format!("O{suffix}"),
            (_, Scheme::Matching) => format!("M{suffix}"),
            (_, Scheme::Entropy) => format!("E{suffix}"),
            (_, Scheme::Beta { .. }) => format!("B{suffix}"),
            (_, Scheme::Trim { .. }) => format!("{base} trimming"),
            (_, Scheme::SmoothTrim { .. }) => format!("{base} smooth trimming"),
            (_, Scheme::Trunc { .. }) => format!("{base} truncation"),
            (_, Scheme::Trapezoidal { .. }) => unreachable!("rejected at construction"),
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.class, self.scheme)
    }
}

/// Parses `class:token[:params]`, e.g. `wate:ow` or `watt:trim:0.1`.
impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (class, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidScheme(format!("expected `class:scheme`, got `{s}`")))?;
        WeightScheme::parse(class.parse()?, rest)
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// `e^(ν₁-1) (1-e)^(ν₂-1)` for arbitrary exponents (no `ν ≥ 2` check).
pub fn beta_tilt(e: f64, nu1: f64, nu2: f64) -> f64 {
    e.powf(nu1 - 1.0) * (1.0 - e).powf(nu2 - 1.0)
}

pub fn overlap_tilt(e: f64) -> f64 {
    e * (1.0 - e)
}

pub fn matching_tilt(e: f64) -> f64 {
    e.min(1.0 - e)
}

pub fn entropy_tilt(e: f64) -> f64 {
    -e * (e / (1.0 - e)).ln() - (1.0 - e).ln()
}

/// Shared by all three classes.
fn equipoise_tilt(scheme: &Scheme, e: f64) -> Option<f64> {
    match *scheme {
        Scheme::Matching => Some(matching_tilt(e)),
        Scheme::Overlap => Some(overlap_tilt(e)),
        Scheme::Entropy => Some(entropy_tilt(e)),
        Scheme::Beta { nu1, nu2 } => Some(beta_tilt(e, nu1, nu2)),
        _ => None,
    }
}

fn wate_tilt(scheme: &Scheme, e: f64) -> f64 {
    if let Some(v) = equipoise_tilt(scheme, e) {
        return v;
    }
    match *scheme {
        Scheme::Ipw => 1.0,
        Scheme::IpwTreated => e,
        Scheme::IpwControls => 1.0 - e,
        Scheme::Trim { alpha } => indicator(alpha < e && e < 1.0 - alpha),
        Scheme::SmoothTrim { alpha, epsilon } => {
            normal_cdf(e - alpha, epsilon) * normal_cdf(1.0 - alpha - e, epsilon)
        }
        Scheme::Trunc { alpha } => {
            if e <= alpha {
                e / alpha
            } else if e >= 1.0 - alpha {
                (1.0 - e) / (1.0 - alpha)
            } else {
                1.0
            }
        }
        Scheme::Trapezoidal { k } => (k * e.min(1.0 - e)).min(1.0),
        _ => unreachable!("equipoise schemes handled above"),
    }
}

fn watt_tilt(scheme: &Scheme, e: f64) -> f64 {
    if let Some(v) = equipoise_tilt(scheme, e) {
        return v;
    }
    match *scheme {
        Scheme::Ipw => 1.0,
        Scheme::Trim { alpha } => indicator(e < 1.0 - alpha),
        Scheme::SmoothTrim { alpha, epsilon } => normal_cdf(1.0 - alpha - e, epsilon),
        Scheme::Trunc { alpha } => {
            if e < 1.0 - alpha {
                1.0
            } else {
                (1.0 - e) * alpha / ((1.0 - alpha) * e)
            }
        }
        _ => unreachable!("rejected at construction"),
    }
}

fn watc_tilt(scheme: &Scheme, e: f64) -> f64 {
    if let Some(v) = equipoise_tilt(scheme, e) {
        return v;
    }
    match *scheme {
        Scheme::Ipw => 1.0,
        Scheme::Trim { alpha } => indicator(e > alpha),
        Scheme::SmoothTrim { alpha, epsilon } => normal_cdf(e - alpha, epsilon),
        Scheme::Trunc { alpha } => {
            if e > alpha {
                1.0
            } else {
                e * (1.0 - alpha) / (alpha * (1.0 - e))
            }
        }
        _ => unreachable!("rejected at construction"),
    }
}

/// `h(e)` for a WATE scheme.
pub fn h_wate(s: &WeightScheme, e: f64) -> Result<f64> {
    expect_class(s, EstimandClass::Wate)?;
    s.tilt(e)
}

/// `g(e)` for a WATT scheme.
pub fn g_watt(s: &WeightScheme, e: f64) -> Result<f64> {
    expect_class(s, EstimandClass::Watt)?;
    s.tilt(e)
}

/// `g(e)` for a WATC scheme.
pub fn g_watc(s: &WeightScheme, e: f64) -> Result<f64> {
    expect_class(s, EstimandClass::Watc)?;
    s.tilt(e)
}

fn expect_class(s: &WeightScheme, class: EstimandClass) -> Result<()> {
    if s.class() == class {
        Ok(())
    } else {
        Err(Error::InvalidScheme(format!(
            "expected a {class} scheme, got {}",
            s.class()
        )))
    }
}

/// Per-unit weights:
///
/// | class | treated         | control          |
/// |-------|-----------------|------------------|
/// | WATE  | `h/e`           | `h/(1-e)`        |
/// | WATT  | `1`             | `g·e/(1-e)`      |
/// | WATC  | `g·(1-e)/e`     | `1`              |
pub fn unit_weights(s: &WeightScheme, ps: &[f64], treated: &[bool]) -> Result<Vec<f64>> {
    if ps.len() != treated.len() {
        return Err(Error::LengthMismatch {
            expected: treated.len(),
            found: ps.len(),
        });
    }
    ps.iter()
        .zip(treated)
        .map(|(&e, &a)| s.unit_weight(e, a))
        .collect()
}
