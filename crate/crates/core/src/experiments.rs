//! Studies built on the two system models: feature sweeps, marginal slopes,
//! typical canteens, system comparison, sensitivity, correction balancing and
//! menu standardization.

use rayon::prelude::*;
use serde::Serialize;

use crate::accuracy::{emh_for_accuracy, EmhaParams, ProcedureKind};
use crate::cost::{CanteenProfile, CostBreakdown, System};
use crate::cv::{calibrate_beta, cv_meal_cost_from, steady_state};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rfid::{rfid_meal_cost, CorrectionPolicy};

/// Improvement cap used by the RFID side of system comparisons.
pub const DEFAULT_MAX_IMPROVEMENT: f64 = 0.2;

/// Customer capacities of the correction-balance study.
pub const DEFAULT_CAPACITIES: [u32; 6] = [190, 300, 450, 550, 600, 700];

/// Learning coefficient of the recognition model. Fixed in the model, or
/// calibrated once on the baseline canteen features and then held constant
/// across every profile a study touches.
pub fn reference_beta(model: &ModelParams) -> Result<f64> {
    match model.beta {
        Some(b) => Ok(b),
        None => calibrate_beta(&CanteenProfile::baseline(), model, model.sp_target).map(|c| c.beta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    T,
    N,
    F,
    R,
    SOf(ProcedureKind),
    AlphaOf(ProcedureKind),
    Beta,
}

impl SweepParam {
    pub fn label(&self) -> String {
        match self {
            SweepParam::T => "T".into(),
            SweepParam::N => "N".into(),
            SweepParam::F => "F".into(),
            SweepParam::R => "R".into(),
            SweepParam::SOf(k) => format!("S_{k}"),
            SweepParam::AlphaOf(k) => format!("alpha_{k}"),
            SweepParam::Beta => "beta".into(),
        }
    }

    pub fn default_scale(&self) -> SweepScale {
        match self {
            SweepParam::F => SweepScale::Log,
            _ => SweepScale::Linear,
        }
    }

    /// Clone the profile and model with this parameter set to `value`.
    pub fn apply(
        &self,
        value: f64,
        profile: &CanteenProfile,
        model: &ModelParams,
        beta: f64,
    ) -> Result<(CanteenProfile, ModelParams, f64)> {
        let mut p = profile.clone();
        let mut m = model.clone();
        let mut b = beta;
        let whole = |name: &str| -> Result<u32> {
            if value >= 0.0 && value.fract() == 0.0 && value <= f64::from(u32::MAX) {
                Ok(value as u32)
            } else {
                Err(Error::config(name, &format!("{name} is a whole number"), value))
            }
        };
        match self {
            SweepParam::T => p.t_types = whole("t_types")?,
            SweepParam::N => p.n_per_type = whole("n_per_type")?,
            SweepParam::F => p.f_new = value,
            SweepParam::R => p.r_rotation = value,
            SweepParam::SOf(ProcedureKind::Sampling) => p.sample_emh = value,
            SweepParam::SOf(k) => curve_mut(&mut m, *k).s_standard = value,
            SweepParam::AlphaOf(ProcedureKind::Sampling) => {
                return Err(Error::Usage("sampling has no alpha".into()))
            }
            SweepParam::AlphaOf(k) => curve_mut(&mut m, *k).alpha = value,
            SweepParam::Beta => b = value,
        }
        p.validate()?;
        m.validate()?;
        Ok((p, m, b))
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = |k: &str| -> Result<ProcedureKind> {
            match k {
                "inputting" => Ok(ProcedureKind::Inputting),
                "setting" => Ok(ProcedureKind::Setting),
                "labeling" => Ok(ProcedureKind::Labeling),
                "correction" => Ok(ProcedureKind::Correction),
                "sampling" => Ok(ProcedureKind::Sampling),
                other => Err(Error::Usage(format!("unknown procedure `{other}`"))),
            }
        };
        match s {
            "T" | "t" => Ok(SweepParam::T),
            "N" | "n" => Ok(SweepParam::N),
            "F" | "f" => Ok(SweepParam::F),
            "R" | "r" => Ok(SweepParam::R),
            "beta" => Ok(SweepParam::Beta),
            _ => {
                if let Some(k) = s.strip_prefix("S_").or_else(|| s.strip_prefix("s_")) {
                    Ok(SweepParam::SOf(kind(k)?))
                } else if let Some(k) = s.strip_prefix("alpha_") {
                    Ok(SweepParam::AlphaOf(kind(k)?))
                } else {
                    Err(Error::Usage(format!(
                        "unknown sweep parameter `{s}` (expected T, N, F, R, S_<procedure>, alpha_<procedure> or beta)"
                    )))
                }
            }
        }
    }
}

fn curve_mut(model: &mut ModelParams, kind: ProcedureKind) -> &mut EmhaParams {
    match kind {
        ProcedureKind::Inputting => &mut model.inputting,
        ProcedureKind::Setting => &mut model.setting,
        ProcedureKind::Labeling => &mut model.labeling,
        ProcedureKind::Correction | ProcedureKind::Sampling => &mut model.correction,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepScale {
    Linear,
    Log,
}

impl SweepScale {
    /// `count` values from `start` to `end` inclusive.
    pub fn values(&self, start: f64, end: f64, count: usize) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(Error::Usage("sweep needs at least one value".into()));
        }
        if count == 1 {
            return Ok(vec![start]);
        }
        let last = (count - 1) as f64;
        match self {
            SweepScale::Linear => Ok((0..count)
                .map(|k| start + (end - start) * k as f64 / last)
                .collect()),
            SweepScale::Log => {
                if !(start > 0.0 && end > 0.0) {
                    return Err(Error::Usage("log-scale sweep needs positive bounds".into()));
                }
                let (a, b) = (start.ln(), end.ln());
                Ok((0..count)
                    .map(|k| (a + (b - a) * k as f64 / last).exp())
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    pub systems: Vec<System>,
    /// RFID targets; CV rows are always evaluated in the stable period.
    pub accuracy_targets: Vec<f64>,
    pub scale: SweepScale,
}

impl SweepSpec {
    pub fn new(parameter: SweepParam, values: Vec<f64>) -> Self {
        Self {
            parameter,
            values,
            systems: vec![System::Rfid, System::Cv],
            accuracy_targets: vec![1.0],
            scale: parameter.default_scale(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SweepTarget {
    Accuracy(f64),
    StablePeriod,
}

impl std::fmt::Display for SweepTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepTarget::Accuracy(a) => write!(f, "{a}"),
            SweepTarget::StablePeriod => f.write_str("sp"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub system: System,
    pub target: SweepTarget,
    pub sorc_emh: f64,
    pub accuracy: f64,
    pub breakdown: CostBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub parameter: SweepParam,
    pub beta: f64,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_HEADER: [&str; 8] = [
    "parameter",
    "value",
    "system",
    "target",
    "sorc_emh",
    "accuracy",
    "nsorc_currency",
    "total_currency",
];

/// Evaluate every (value, system, target) cell with all else held at `base`.
/// Rows are ordered by value, then system, then target.
pub fn sweep(spec: &SweepSpec, base: &CanteenProfile, model: &ModelParams) -> Result<SweepTable> {
    if spec.values.is_empty() {
        return Err(Error::Usage("sweep needs at least one value".into()));
    }
    if spec.systems.is_empty() {
        return Err(Error::Usage("sweep needs at least one system".into()));
    }
    let mut values = spec.values.clone();
    values.sort_by(f64::total_cmp);
    let mut systems = spec.systems.clone();
    systems.sort();
    systems.dedup();
    let mut targets = spec.accuracy_targets.clone();
    targets.sort_by(f64::total_cmp);
    if systems.contains(&System::Rfid) && targets.is_empty() {
        return Err(Error::Usage("RFID sweep needs at least one accuracy target".into()));
    }
    let beta = if systems.contains(&System::Cv) {
        reference_beta(model)?
    } else {
        model.beta.unwrap_or(f64::NAN)
    };

    let cells: Vec<Vec<SweepRow>> = values
        .par_iter()
        .map(|&value| -> Result<Vec<SweepRow>> {
            let (profile, m, b) = spec.parameter.apply(value, base, model, beta)?;
            let mut rows = Vec::new();
            for system in &systems {
                match system {
                    System::Rfid => {
                        for &t in &targets {
                            let c = rfid_meal_cost(&profile, &m, t, CorrectionPolicy::BillingOnly)?;
                            rows.push(SweepRow {
                                value,
                                system: System::Rfid,
                                target: SweepTarget::Accuracy(t),
                                sorc_emh: c.breakdown.sorc_emh(),
                                accuracy: t,
                                breakdown: c.breakdown,
                            });
                        }
                    }
                    System::Cv => {
                        let steady = steady_state(&profile, &m, b)?;
                        let c = cv_meal_cost_from(&profile, &m, 0.0, steady)?;
                        rows.push(SweepRow {
                            value,
                            system: System::Cv,
                            target: SweepTarget::StablePeriod,
                            sorc_emh: c.breakdown.sorc_emh(),
                            accuracy: c.achieved_accuracy,
                            breakdown: c.breakdown,
                        });
                    }
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable {
        parameter: spec.parameter,
        beta,
        rows: cells.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalSlope {
    pub system: System,
    pub target: SweepTarget,
    pub points: usize,
    /// Least-squares EMH slope; `None` when the parameter never varies.
    pub cost_slope: Option<f64>,
    /// Least-squares accuracy slope; `None` when the parameter never varies.
    pub accuracy_slope: Option<f64>,
}

pub const MARGINAL_HEADER: [&str; 5] = ["system", "target", "points", "cost_slope", "accuracy_slope"];

/// Least-squares slope of `y` on `x`; `None` for a constant `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// One slope per (system, target) group, in first-appearance order.
pub fn marginal_fit(table: &SweepTable) -> Result<Vec<MarginalSlope>> {
    let mut groups: Vec<(System, SweepTarget, Vec<&SweepRow>)> = Vec::new();
    for row in &table.rows {
        match groups
            .iter_mut()
            .find(|(s, t, _)| *s == row.system && *t == row.target)
        {
            Some(g) => g.2.push(row),
            None => groups.push((row.system, row.target, vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|(system, target, rows)| {
            if rows.len() < 2 {
                return Err(Error::Usage(format!(
                    "marginal fit needs at least two rows for {system} at {target}"
                )));
            }
            let x: Vec<f64> = rows.iter().map(|r| r.value).collect();
            let cost: Vec<f64> = rows.iter().map(|r| r.sorc_emh).collect();
            let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
            Ok(MarginalSlope {
                system,
                target,
                points: rows.len(),
                cost_slope: ls_slope(&x, &cost),
                accuracy_slope: ls_slope(&x, &acc),
            })
        })
        .collect()
}

/// Four canteen archetypes: small/large scale crossed with stable/changing menus.
pub fn typical_canteens() -> [CanteenProfile; 4] {
    let make = |name: &str, t: u32, f: f64, r: f64, customers: u32| CanteenProfile {
        name: name.into(),
        t_types: t,
        n_per_type: 70,
        f_new: f,
        r_rotation: r,
        customers,
        ..CanteenProfile::baseline()
    };
    [
        make("type-i", 20, 0.3, 6.0, 450),
        make("type-ii", 20, 3.0, 12.0, 450),
        make("type-iii", 50, 0.75, 15.0, 1200),
        make("type-iv", 50, 7.5, 30.0, 1200),
    ]
}

/// Per-meal EMH of recording every transaction by hand at `target` accuracy.
pub fn manual_meal_emh(profile: &CanteenProfile, model: &ModelParams, target: f64) -> Result<f64> {
    let params = model.manual(profile.manual_record_emh);
    params.validate()?;
    Ok(f64::from(profile.customers) * emh_for_accuracy(&params, target)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub target: f64,
    pub rfid_total: f64,
    pub cv_total: f64,
    pub manual_total: f64,
    pub cheaper: System,
    /// `1 - cheaper / manual`.
    pub saving: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareTable {
    pub profile: String,
    pub beta: f64,
    pub rows: Vec<CompareRow>,
    /// Targets at which the cheaper system differs from the previous grid point.
    pub crossovers: Vec<f64>,
    /// More than one crossover on `[0.6, 1.0]`.
    pub multiple_crossovers: bool,
}

impl CompareTable {
    /// First grid target from which RFID stays cheaper to the end of the grid.
    pub fn rfid_cheaper_from(&self) -> Option<f64> {
        let last_cv = self.rows.iter().rposition(|r| r.cheaper == System::Cv);
        match last_cv {
            None => self.rows.first().map(|r| r.target),
            Some(i) => self.rows.get(i + 1).map(|r| r.target),
        }
    }
}

pub const COMPARE_HEADER: [&str; 6] = [
    "target_accuracy",
    "rfid_total",
    "cv_total",
    "manual_total",
    "cheaper",
    "saving",
];

/// Per-meal currency totals of both systems and manual recording.
pub fn compare_systems(
    profile: &CanteenProfile,
    model: &ModelParams,
    grid: &[f64],
) -> Result<CompareTable> {
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Usage("comparison grid must lie in [0, 1]".into()));
    }
    let beta = reference_beta(model)?;
    let steady = steady_state(profile, model, beta)?;
    let policy = CorrectionPolicy::BalancedCorrection {
        max_improvement: DEFAULT_MAX_IMPROVEMENT,
    };
    let rows = grid
        .par_iter()
        .map(|&t| -> Result<CompareRow> {
            let rfid = rfid_meal_cost(profile, model, t, policy)?.breakdown.total_currency();
            let cv = cv_meal_cost_from(profile, model, t, steady.clone())?
                .breakdown
                .total_currency();
            let manual = manual_meal_emh(profile, model, t)? * profile.wage;
            let (cheaper, best) = if rfid < cv {
                (System::Rfid, rfid)
            } else {
                (System::Cv, cv)
            };
            let saving = if manual > 0.0 { 1.0 - best / manual } else { f64::NEG_INFINITY };
            Ok(CompareRow {
                target: t,
                rfid_total: rfid,
                cv_total: cv,
                manual_total: manual,
                cheaper,
                saving,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let crossovers: Vec<f64> = rows
        .windows(2)
        .filter(|w| w[0].cheaper != w[1].cheaper)
        .map(|w| w[1].target)
        .collect();
    let multiple_crossovers = crossovers.iter().filter(|&&t| t >= 0.6).count() > 1;
    Ok(CompareTable {
        profile: profile.name.clone(),
        beta,
        rows,
        crossovers,
        multiple_crossovers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandardizationRow {
    pub system: System,
    pub accuracy_base: f64,
    pub accuracy_standardized: f64,
    pub sorc_emh_base: f64,
    pub sorc_emh_standardized: f64,
    pub total_base: f64,
    pub total_standardized: f64,
    pub sorc_saving: f64,
    pub total_saving: f64,
}

pub const STANDARDIZATION_HEADER: [&str; 9] = [
    "system",
    "accuracy_base",
    "accuracy_standardized",
    "sorc_emh_base",
    "sorc_emh_standardized",
    "total_base",
    "total_standardized",
    "sorc_saving",
    "total_saving",
];

/// Savings from a fixed menu (no new or rotated types). RFID is compared at
/// full accuracy, CV at each menu's stable-period accuracy.
pub fn standardization_study(
    base: &CanteenProfile,
    model: &ModelParams,
) -> Result<Vec<StandardizationRow>> {
    let fixed = CanteenProfile {
        f_new: 0.0,
        r_rotation: 0.0,
        ..base.clone()
    };
    let rfid = |p: &CanteenProfile| rfid_meal_cost(p, model, 1.0, CorrectionPolicy::BillingOnly);
    let (rb, rs) = (rfid(base)?, rfid(&fixed)?);
    let beta = reference_beta(model)?;
    let cv = |p: &CanteenProfile| {
        steady_state(p, model, beta).and_then(|s| cv_meal_cost_from(p, model, 0.0, s))
    };
    let (cb, cs) = (cv(base)?, cv(&fixed)?);
    let row = |system, ab: f64, as_: f64, b: &CostBreakdown, s: &CostBreakdown| {
        StandardizationRow {
            system,
            accuracy_base: ab,
            accuracy_standardized: as_,
            sorc_emh_base: b.sorc_emh(),
            sorc_emh_standardized: s.sorc_emh(),
            total_base: b.total_currency(),
            total_standardized: s.total_currency(),
            sorc_saving: saving(s.sorc_emh(), b.sorc_emh()),
            total_saving: saving(s.total_currency(), b.total_currency()),
        }
    };
    Ok(vec![
        row(System::Rfid, 1.0, 1.0, &rb.breakdown, &rs.breakdown),
        row(
            System::Cv,
            cb.achieved_accuracy,
            cs.achieved_accuracy,
            &cb.breakdown,
            &cs.breakdown,
        ),
    ])
}

fn saving(new: f64, old: f64) -> f64 {
    if old == 0.0 {
        0.0
    } else {
        1.0 - new / old
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SensitivityParam {
    SLabel,
    AlphaLabel,
    Beta,
}

impl std::str::FromStr for SensitivityParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S_label" | "s_label" | "s-label" => Ok(SensitivityParam::SLabel),
            "alpha_label" | "alpha-label" => Ok(SensitivityParam::AlphaLabel),
            "beta" => Ok(SensitivityParam::Beta),
            other => Err(Error::Usage(format!(
                "unknown sensitivity parameter `{other}` (expected S_label, alpha_label or beta)"
            ))),
        }
    }
}

impl SensitivityParam {
    pub fn label(&self) -> &'static str {
        match self {
            SensitivityParam::SLabel => "S_label",
            SensitivityParam::AlphaLabel => "alpha_label",
            SensitivityParam::Beta => "beta",
        }
    }
}

/// Response to one parameter deviation. For labeling parameters the costs
/// are RFID staff EMH at full accuracy (`high`) and at 0.8 (`low`); for beta
/// both are CV stable-period staff EMH.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub deviation: f64,
    pub value: f64,
    pub sorc_high: f64,
    pub sorc_low: f64,
    pub sorc_change_high: f64,
    pub sorc_change_low: f64,
    pub total_change_high: f64,
    pub sp_accuracy: Option<f64>,
    pub sp_accuracy_change: Option<f64>,
}

pub const SENSITIVITY_HEADER: [&str; 9] = [
    "deviation",
    "value",
    "sorc_high",
    "sorc_low",
    "sorc_change_high",
    "sorc_change_low",
    "total_change_high",
    "sp_accuracy",
    "sp_accuracy_change",
];

pub const SENSITIVITY_HIGH: f64 = 1.0;
pub const SENSITIVITY_LOW: f64 = 0.8;

pub fn sensitivity_study(
    param: SensitivityParam,
    deviations: &[f64],
    base: &CanteenProfile,
    model: &ModelParams,
) -> Result<Vec<SensitivityRow>> {
    if let Some(d) = deviations.iter().find(|&&d| !(d > -1.0)) {
        return Err(Error::config("deviation", "deviation > -1", d));
    }
    match param {
        SensitivityParam::SLabel | SensitivityParam::AlphaLabel => {
            let eval = |m: &ModelParams| -> Result<(f64, f64, f64)> {
                let hi = rfid_meal_cost(base, m, SENSITIVITY_HIGH, CorrectionPolicy::BillingOnly)?;
                let lo = rfid_meal_cost(base, m, SENSITIVITY_LOW, CorrectionPolicy::BillingOnly)?;
                Ok((
                    hi.breakdown.sorc_emh(),
                    lo.breakdown.sorc_emh(),
                    hi.breakdown.total_currency(),
                ))
            };
            let reference = eval(model)?;
            deviations
                .par_iter()
                .map(|&d| {
                    let mut m = model.clone();
                    let value = match param {
                        SensitivityParam::SLabel => {
                            m.labeling.s_standard *= 1.0 + d;
                            m.labeling.s_standard
                        }
                        _ => {
                            m.labeling.alpha *= 1.0 + d;
                            m.labeling.alpha
                        }
                    };
                    m.validate()?;
                    let (hi, lo, total) = eval(&m)?;
                    Ok(SensitivityRow {
                        deviation: d,
                        value,
                        sorc_high: hi,
                        sorc_low: lo,
                        sorc_change_high: hi / reference.0 - 1.0,
                        sorc_change_low: lo / reference.1 - 1.0,
                        total_change_high: total / reference.2 - 1.0,
                        sp_accuracy: None,
                        sp_accuracy_change: None,
                    })
                })
                .collect()
        }
        SensitivityParam::Beta => {
            let beta = reference_beta(model)?;
            let eval = |b: f64| -> Result<(f64, f64, f64)> {
                let steady = steady_state(base, model, b)?;
                let c = cv_meal_cost_from(base, model, 0.0, steady)?;
                Ok((
                    c.breakdown.sorc_emh(),
                    c.breakdown.total_currency(),
                    c.achieved_accuracy,
                ))
            };
            let reference = eval(beta)?;
            deviations
                .par_iter()
                .map(|&d| {
                    let value = beta * (1.0 + d);
                    let (sorc, total, acc) = eval(value)?;
                    Ok(SensitivityRow {
                        deviation: d,
                        value,
                        sorc_high: sorc,
                        sorc_low: sorc,
                        sorc_change_high: sorc / reference.0 - 1.0,
                        sorc_change_low: sorc / reference.0 - 1.0,
                        total_change_high: total / reference.1 - 1.0,
                        sp_accuracy: Some(acc),
                        sp_accuracy_change: Some(acc - reference.2),
                    })
                })
                .collect()
        }
    }
}

/// Marginal EMH per unit of accuracy gained by data correction at checkout,
/// after improving `delta` above `a_base`.
pub fn correction_marginal_cost(
    a_base: f64,
    delta: f64,
    dishes_per_meal: f64,
    corr: &EmhaParams,
) -> f64 {
    let errors = 1.0 - a_base;
    if errors <= 0.0 {
        return f64::INFINITY;
    }
    let rho = (delta / errors).clamp(0.0, 1.0);
    if corr.alpha == 0.0 {
        return if rho > 0.0 { 0.0 } else { f64::INFINITY };
    }
    // d/d(delta) of errors * D * S * rho^(1/alpha)
    dishes_per_meal * corr.s_standard / corr.alpha * rho.powf(1.0 / corr.alpha - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionBalanceRow {
    pub capacity: u32,
    pub dishes_per_meal: f64,
    pub sp_accuracy: f64,
    /// Marginal EMH per unit accuracy that marks the knee.
    pub threshold: f64,
    /// Accuracy improvement at the knee; the full gap when no knee exists.
    pub limit: f64,
    pub knee_found: bool,
}

pub const CORRECTION_BALANCE_HEADER: [&str; 6] = [
    "capacity",
    "dishes_per_meal",
    "sp_accuracy",
    "threshold",
    "limit",
    "knee_found",
];

/// Efficient improvement limit of CV data correction per canteen capacity.
///
/// Dishes per meal scale with the capacity relative to `base`. The knee is
/// the improvement at which the marginal correction cost first exceeds
/// `knee_multiple` times the base canteen's billing marginal cost (the cost
/// per unit accuracy of fixing prices only), a fixed reference shared by all
/// capacities. The stable-period accuracy of `base` is used throughout.
pub fn correction_balance_study(
    capacities: &[u32],
    base: &CanteenProfile,
    model: &ModelParams,
) -> Result<Vec<CorrectionBalanceRow>> {
    if capacities.is_empty() {
        return Err(Error::Usage("correction balance needs at least one capacity".into()));
    }
    if base.customers == 0 {
        return Err(Error::config("customers", "customers >= 1", 0));
    }
    if !(model.knee_multiple > 0.0) {
        return Err(Error::config("knee_multiple", "knee_multiple > 0", model.knee_multiple));
    }
    let beta = reference_beta(model)?;
    let sp = steady_state(base, model, beta)?.sp_mean_accuracy;
    let corr = &model.correction;
    let reference_marginal = base.dishes_per_meal() * corr.offset;
    let threshold = model.knee_multiple * reference_marginal;
    let gap = 1.0 - sp;
    let mut rows = Vec::with_capacity(capacities.len());
    for &capacity in capacities {
        let dishes = base.dishes_per_meal() * f64::from(capacity) / f64::from(base.customers);
        let marginal = |d: f64| correction_marginal_cost(sp, d, dishes, corr);
        let (limit, knee_found) = if marginal(gap) < threshold {
            (gap, false)
        } else {
            let (mut lo, mut hi) = (0.0, gap);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if marginal(mid) >= threshold {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-14 {
                    break;
                }
            }
            (hi, true)
        };
        rows.push(CorrectionBalanceRow {
            capacity,
            dishes_per_meal: dishes,
            sp_accuracy: sp,
            threshold,
            limit,
            knee_found,
        });
    }
    Ok(rows)
}
