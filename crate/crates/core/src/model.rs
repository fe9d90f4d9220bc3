//! Model-wide parameters shared by both systems.

use crate::accuracy::{EmhaParams, SnaParams, SnaVariant};
use crate::cost::PriceCatalog;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub inputting: EmhaParams,
    pub setting: EmhaParams,
    pub labeling: EmhaParams,
    pub correction: EmhaParams,
    /// Shape exponent of the manual-recording baseline; its standard EMH is
    /// the profile's `manual_record_emh`.
    pub manual_alpha: f64,
    pub sna_upper_bound: f64,
    pub sna_variant: SnaVariant,
    /// Fixed learning coefficient; `None` calibrates against `sp_target`.
    pub beta: Option<f64>,
    /// Stable-period accuracy the learning coefficient is calibrated to.
    pub sp_target: f64,
    /// Chance that a served dish yields a usable checkout photo.
    pub p_auto: f64,
    /// Meals simulated when estimating stable-period behaviour.
    pub sim_meals: usize,
    pub rp_window: usize,
    pub rp_threshold: f64,
    /// Marginal-cost multiple that marks the correction knee.
    pub knee_multiple: f64,
    pub catalog: PriceCatalog,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            inputting: EmhaParams::inputting(),
            setting: EmhaParams::setting(),
            labeling: EmhaParams::labeling(),
            correction: EmhaParams::correction(),
            manual_alpha: 0.15,
            sna_upper_bound: 0.85,
            sna_variant: SnaVariant::ZeroAnchored,
            beta: None,
            sp_target: 0.84,
            p_auto: 0.1,
            sim_meals: 400,
            rp_window: 3,
            rp_threshold: 1e-5,
            knee_multiple: 3.0,
            catalog: PriceCatalog::default(),
        }
    }
}

impl ModelParams {
    pub fn sna(&self, beta: f64) -> SnaParams {
        SnaParams {
            upper_bound_u: self.sna_upper_bound,
            beta,
            variant: self.sna_variant,
        }
    }

    pub fn manual(&self, manual_record_emh: f64) -> EmhaParams {
        EmhaParams::new(manual_record_emh, self.manual_alpha)
    }

    pub fn validate(&self) -> Result<()> {
        self.inputting.validate()?;
        self.setting.validate()?;
        self.labeling.validate()?;
        self.correction.validate()?;
        if !(0.0..=1.0).contains(&self.manual_alpha) {
            return Err(Error::config("manual_alpha", "alpha in [0, 1]", self.manual_alpha));
        }
        if !(self.sna_upper_bound > 0.0 && self.sna_upper_bound <= 1.0) {
            return Err(Error::config(
                "upper_bound_u",
                "upper_bound_u in (0, 1]",
                self.sna_upper_bound,
            ));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::config("beta", "beta > 0", b));
            }
        }
        if !(self.sp_target > 0.0 && self.sp_target < self.sna_upper_bound) {
            return Err(Error::config(
                "sp_target",
                "0 < sp_target < upper_bound_u",
                self.sp_target,
            ));
        }
        if !(0.0..=1.0).contains(&self.p_auto) {
            return Err(Error::config("p_auto", "p_auto in [0, 1]", self.p_auto));
        }
        if self.sim_meals < self.rp_window + 1 {
            return Err(Error::config("sim_meals", "sim_meals > rp_window", self.sim_meals));
        }
        if self.rp_window < 1 {
            return Err(Error::config("rp_window", "rp_window >= 1", self.rp_window));
        }
        if !(self.knee_multiple > 1.0) {
            return Err(Error::config("knee_multiple", "knee_multiple > 1", self.knee_multiple));
        }
        Ok(())
    }
}
