//! Analytic accuracy models.
//!
//! The EMH-A model maps equivalent man-hours invested in one execution of a
//! staff procedure to the accuracy of that execution:
//!
//! ```text
//! accuracy(h) = clamp((h - offset) / s_standard, 0, 1) ^ alpha
//! ```
//!
//! The SNA model maps the number of training samples of a dish type to the
//! recognition accuracy of the CV model, a sigmoid bounded above by `U`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power-law accuracy model for one staff procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmhaParams {
    /// EMH hours per execution needed to reach full accuracy (above the offset).
    pub s_standard: f64,
    /// Shape exponent in `[0, 1]`.
    pub alpha: f64,
    /// Fixed EMH hours per execution spent before accuracy starts to grow.
    #[serde(default)]
    pub offset: f64,
}

impl EmhaParams {
    pub const fn new(s_standard: f64, alpha: f64) -> Self {
        Self {
            s_standard,
            alpha,
            offset: 0.0,
        }
    }

    pub const fn with_offset(s_standard: f64, alpha: f64, offset: f64) -> Self {
        Self {
            s_standard,
            alpha,
            offset,
        }
    }

    pub const fn inputting() -> Self {
        Self::new(1.7e-1, 0.6)
    }

    pub const fn setting() -> Self {
        Self::new(6.7e-2, 0.4)
    }

    pub const fn labeling() -> Self {
        Self::new(1.39e-3, 0.1)
    }

    /// Correction at checkout. The fixed price fix is carried as the offset.
    pub const fn correction() -> Self {
        Self::with_offset(1.1e-2, 0.15, 1.1e-3)
    }

    /// EMH per execution at which accuracy reaches one.
    pub fn full_cost(&self) -> f64 {
        self.offset + self.s_standard
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_standard > 0.0 && self.s_standard.is_finite()) {
            return Err(Error::config("s_standard", "s_standard > 0", self.s_standard));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", "alpha in [0, 1]", self.alpha));
        }
        if !(self.offset >= 0.0 && self.offset.is_finite()) {
            return Err(Error::config("offset", "offset >= 0", self.offset));
        }
        Ok(())
    }
}

/// Which closed form of the sigmoid learning curve to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnaVariant {
    /// `U * sigmoid(beta * n)`; equals `U / 2` with no samples.
    Literal,
    /// `U * (2 * sigmoid(beta * n) - 1)`; equals zero with no samples.
    #[default]
    ZeroAnchored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnaParams {
    pub upper_bound_u: f64,
    pub beta: f64,
    pub variant: SnaVariant,
}

impl SnaParams {
    pub fn new(upper_bound_u: f64, beta: f64) -> Self {
        Self {
            upper_bound_u,
            beta,
            variant: SnaVariant::ZeroAnchored,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.upper_bound_u > 0.0 && self.upper_bound_u <= 1.0) {
            return Err(Error::config(
                "upper_bound_u",
                "upper_bound_u in (0, 1]",
                self.upper_bound_u,
            ));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("beta", "beta > 0", self.beta));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcedureKind {
    Inputting,
    Setting,
    Labeling,
    Correction,
    Sampling,
}

impl ProcedureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProcedureKind::Inputting => "inputting",
            ProcedureKind::Setting => "setting",
            ProcedureKind::Labeling => "labeling",
            ProcedureKind::Correction => "correction",
            ProcedureKind::Sampling => "sampling",
        }
    }
}

impl std::fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a procedure is costed: either through an EMH-A curve or, for CV
/// sampling, a fixed EMH per sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcedureCost {
    Curve(EmhaParams),
    PerSample(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcedureSpec {
    pub kind: ProcedureKind,
    pub cost: ProcedureCost,
}

impl ProcedureSpec {
    pub fn curve(kind: ProcedureKind, params: EmhaParams) -> Self {
        Self {
            kind,
            cost: ProcedureCost::Curve(params),
        }
    }

    pub fn params(&self) -> Option<&EmhaParams> {
        match &self.cost {
            ProcedureCost::Curve(p) => Some(p),
            ProcedureCost::PerSample(_) => None,
        }
    }
}

/// Accuracy of one execution given `h` EMH hours.
pub fn emh_accuracy(params: &EmhaParams, h: f64) -> Result<f64> {
    params.validate()?;
    if h.is_nan() || h < 0.0 {
        return Err(Error::Domain(format!("EMH must be >= 0, got {h}")));
    }
    Ok(emh_accuracy_unchecked(params, h))
}

pub(crate) fn emh_accuracy_unchecked(params: &EmhaParams, h: f64) -> f64 {
    if h <= params.offset {
        return 0.0;
    }
    if h >= params.full_cost() {
        return 1.0;
    }
    let ratio = (h - params.offset) / params.s_standard;
    ratio.powf(params.alpha)
}

/// EMH per execution needed to reach accuracy `a`; the inverse of [`emh_accuracy`].
pub fn emh_for_accuracy(params: &EmhaParams, a: f64) -> Result<f64> {
    params.validate()?;
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Domain(format!("accuracy must be in [0, 1], got {a}")));
    }
    if a == 0.0 {
        return Ok(params.offset);
    }
    if a == 1.0 {
        return Ok(params.full_cost());
    }
    if params.alpha == 0.0 {
        return Err(Error::Domain(
            "alpha = 0 has no inverse for accuracy strictly between 0 and 1".into(),
        ));
    }
    Ok(params.offset + params.s_standard * a.powf(1.0 / params.alpha))
}

/// Recognition accuracy of a dish type with `n_samples` training samples.
pub fn sna_accuracy(params: &SnaParams, n_samples: f64) -> Result<f64> {
    params.validate()?;
    if n_samples.is_nan() || n_samples < 0.0 {
        return Err(Error::Domain(format!(
            "sample count must be >= 0, got {n_samples}"
        )));
    }
    Ok(sna_accuracy_unchecked(params, n_samples))
}

pub(crate) fn sna_accuracy_unchecked(params: &SnaParams, n_samples: f64) -> f64 {
    let x = params.beta * n_samples;
    match params.variant {
        SnaVariant::Literal => params.upper_bound_u / (1.0 + (-x).exp()),
        // 2 * sigmoid(x) - 1 == tanh(x / 2), which keeps precision near zero
        SnaVariant::ZeroAnchored => params.upper_bound_u * (0.5 * x).tanh(),
    }
}

/// Accuracy of procedures executed in series: data is correct only when every
/// procedure succeeded, failures independent.
pub fn compose_serial(procedure_accuracies: &[f64]) -> Result<f64> {
    for &a in procedure_accuracies {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Domain(format!("accuracy must be in [0, 1], got {a}")));
        }
    }
    Ok(procedure_accuracies.iter().product())
}
