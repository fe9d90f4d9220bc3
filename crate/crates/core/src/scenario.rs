//! Scenario files: TOML with three optional sections.
//!
//! ```toml
//! [canteen]            # any CanteenProfile field
//! t_types = 50
//! customers = 900
//!
//! [model]
//! sna_upper_bound = 0.9
//! beta = 0.12          # omit to calibrate against sp_target
//! catalog = "prices.csv"
//! [model.labeling]     # inputting, setting, labeling, correction
//! alpha = 0.12
//! [model.prices]       # per-item unit price overrides
//! rfid-plate = 4.0
//!
//! [study]              # defaults for CLI flags
//! target = 0.95
//! ```
//!
//! Unknown keys are rejected. Missing keys take the baseline defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::accuracy::{EmhaParams, SnaVariant};
use crate::cost::{CanteenProfile, CatalogEntry, PriceCatalog};
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub canteen: CanteenProfile,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub study: StudyConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcedureOverride {
    pub s_standard: Option<f64>,
    pub alpha: Option<f64>,
    pub offset: Option<f64>,
}

impl ProcedureOverride {
    fn apply(&self, mut p: EmhaParams) -> EmhaParams {
        if let Some(v) = self.s_standard {
            p.s_standard = v;
        }
        if let Some(v) = self.alpha {
            p.alpha = v;
        }
        if let Some(v) = self.offset {
            p.offset = v;
        }
        p
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub inputting: Option<ProcedureOverride>,
    pub setting: Option<ProcedureOverride>,
    pub labeling: Option<ProcedureOverride>,
    pub correction: Option<ProcedureOverride>,
    pub manual_alpha: Option<f64>,
    pub sna_upper_bound: Option<f64>,
    pub sna_variant: Option<SnaVariant>,
    pub beta: Option<f64>,
    pub sp_target: Option<f64>,
    pub p_auto: Option<f64>,
    pub sim_meals: Option<usize>,
    pub rp_window: Option<usize>,
    pub rp_threshold: Option<f64>,
    pub knee_multiple: Option<f64>,
    /// Price catalog CSV, relative to the scenario file.
    pub catalog: Option<PathBuf>,
    #[serde(default)]
    pub prices: BTreeMap<String, f64>,
}

/// Defaults for command arguments; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub target: Option<f64>,
    pub grid_start: Option<f64>,
    pub grid_end: Option<f64>,
    pub grid_step: Option<f64>,
    pub grid_points: Option<usize>,
    pub policy: Option<String>,
    pub max_improvement: Option<f64>,
    pub meals: Option<usize>,
    pub seed: Option<u64>,
    pub sp_accuracy: Option<f64>,
    pub parameter: Option<String>,
    pub values: Option<Vec<f64>>,
    pub systems: Option<Vec<String>>,
    pub targets: Option<Vec<f64>>,
    pub deviations: Option<Vec<f64>>,
    pub capacities: Option<Vec<u32>>,
}

/// A validated scenario with every default applied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    pub profile: CanteenProfile,
    pub model: ModelParams,
    pub study: StudyConfig,
}

impl ModelConfig {
    /// Resolve against the defaults. `base_dir` anchors a relative catalog
    /// path; without a catalog path the environment override applies.
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<ModelParams> {
        let mut m = ModelParams::default();
        let apply = |o: &Option<ProcedureOverride>, p: EmhaParams| o.map_or(p, |o| o.apply(p));
        m.inputting = apply(&self.inputting, m.inputting);
        m.setting = apply(&self.setting, m.setting);
        m.labeling = apply(&self.labeling, m.labeling);
        m.correction = apply(&self.correction, m.correction);
        m.manual_alpha = self.manual_alpha.unwrap_or(m.manual_alpha);
        m.sna_upper_bound = self.sna_upper_bound.unwrap_or(m.sna_upper_bound);
        m.sna_variant = self.sna_variant.unwrap_or(m.sna_variant);
        m.beta = self.beta.or(m.beta);
        m.sp_target = self.sp_target.unwrap_or(m.sp_target);
        m.p_auto = self.p_auto.unwrap_or(m.p_auto);
        m.sim_meals = self.sim_meals.unwrap_or(m.sim_meals);
        m.rp_window = self.rp_window.unwrap_or(m.rp_window);
        m.rp_threshold = self.rp_threshold.unwrap_or(m.rp_threshold);
        m.knee_multiple = self.knee_multiple.unwrap_or(m.knee_multiple);
        m.catalog = match &self.catalog {
            Some(p) => {
                let path = match base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.clone(),
                };
                PriceCatalog::from_path(&path)?
            }
            None => PriceCatalog::from_env()?,
        };
        for (label, price) in &self.prices {
            if !(*price >= 0.0 && price.is_finite()) {
                return Err(Error::config(
                    &format!("prices.{label}"),
                    "unit_price >= 0",
                    price,
                ));
            }
            m.catalog.override_price(label, *price)?;
        }
        m.validate()?;
        Ok(m)
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

/// Parse and validate scenario text.
pub fn parse_scenario(text: &str, source_name: &str, base_dir: Option<&Path>) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    file.canteen.validate()?;
    let model = file.model.resolve(base_dir)?;
    Ok(Scenario {
        profile: file.canteen,
        model,
        study: file.study,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string(), path.parent())
}

#[derive(Serialize)]
struct EffectiveModel<'a> {
    inputting: EmhaParams,
    setting: EmhaParams,
    labeling: EmhaParams,
    correction: EmhaParams,
    manual_alpha: f64,
    sna_upper_bound: f64,
    sna_variant: SnaVariant,
    beta: Option<f64>,
    sp_target: f64,
    p_auto: f64,
    sim_meals: usize,
    rp_window: usize,
    rp_threshold: f64,
    knee_multiple: f64,
    catalog: &'a [CatalogEntry],
}

#[derive(Serialize)]
struct Effective<'a> {
    canteen: &'a CanteenProfile,
    model: EffectiveModel<'a>,
    study: &'a StudyConfig,
}

/// The fully resolved configuration as TOML, for provenance and run ids.
pub fn effective_config(scenario: &Scenario) -> String {
    let m = &scenario.model;
    let echo = Effective {
        canteen: &scenario.profile,
        model: EffectiveModel {
            inputting: m.inputting,
            setting: m.setting,
            labeling: m.labeling,
            correction: m.correction,
            manual_alpha: m.manual_alpha,
            sna_upper_bound: m.sna_upper_bound,
            sna_variant: m.sna_variant,
            beta: m.beta,
            sp_target: m.sp_target,
            p_auto: m.p_auto,
            sim_meals: m.sim_meals,
            rp_window: m.rp_window,
            rp_threshold: m.rp_threshold,
            knee_multiple: m.knee_multiple,
            catalog: &m.catalog.entries,
        },
        study: &scenario.study,
    };
    toml::to_string(&echo).expect("effective configuration serializes")
}
