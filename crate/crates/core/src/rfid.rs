//! RFID staff-cost planning.
//!
//! An RFID record is correct only when inputting, setting and labeling all
//! succeeded, so the system accuracy is the product of the procedure
//! accuracies. For a target accuracy the cheapest split of effort is found in
//! log-accuracy space, where each procedure's per-meal cost
//! `n * (offset + S * exp(g / alpha))` is convex in `g = ln(a)` and the
//! constraint `sum(g) = ln(target)` is linear. Stationarity equalizes
//! `n * S * exp(g / alpha) / alpha` over procedures that are not pinned at
//! full accuracy (water-filling with caps at `g = 0`).

use serde::Serialize;

use crate::accuracy::{EmhaParams, ProcedureKind};
use crate::cost::{
    checkout_correction, nsorc_per_meal, CanteenProfile, CostBreakdown, CostItem, System,
};
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationTerm {
    pub kind: ProcedureKind,
    pub params: EmhaParams,
    /// Executions per meal; fractional values are expectations.
    pub executions: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    pub procedures: Vec<AllocationTerm>,
    pub target_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationResult {
    pub kinds: Vec<ProcedureKind>,
    /// EMH per single execution.
    pub per_procedure_h: Vec<f64>,
    pub per_procedure_accuracy: Vec<f64>,
    /// EMH per meal for each procedure (`executions * h`).
    pub per_procedure_total: Vec<f64>,
    pub total_emh: f64,
    pub achieved_accuracy: f64,
}

impl AllocationResult {
    pub fn total_for(&self, kind: ProcedureKind) -> f64 {
        self.kinds
            .iter()
            .position(|k| *k == kind)
            .map_or(0.0, |i| self.per_procedure_total[i])
    }

    pub fn accuracy_for(&self, kind: ProcedureKind) -> Option<f64> {
        self.kinds
            .iter()
            .position(|k| *k == kind)
            .map(|i| self.per_procedure_accuracy[i])
    }
}

impl AllocationProblem {
    /// Inputting for new types, setting for new plus rotated types, and a
    /// label read/write for every dish.
    pub fn for_canteen(profile: &CanteenProfile, model: &ModelParams, target: f64) -> Self {
        let f = profile.f_new;
        Self {
            procedures: vec![
                AllocationTerm {
                    kind: ProcedureKind::Inputting,
                    params: model.inputting,
                    executions: f,
                },
                AllocationTerm {
                    kind: ProcedureKind::Setting,
                    params: model.setting,
                    executions: f + profile.r_rotation,
                },
                AllocationTerm {
                    kind: ProcedureKind::Labeling,
                    params: model.labeling,
                    executions: profile.dishes_per_meal(),
                },
            ],
            target_accuracy: target,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.procedures.is_empty() {
            return Err(Error::Usage("allocation needs at least one procedure".into()));
        }
        let t = self.target_accuracy;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Infeasible(format!(
                "target accuracy {t} outside [0, 1]"
            )));
        }
        for (i, term) in self.procedures.iter().enumerate() {
            term.params.validate()?;
            if !(term.executions >= 0.0 && term.executions.is_finite()) {
                return Err(Error::config(
                    &format!("executions of {}", term.kind),
                    "executions >= 0",
                    term.executions,
                ));
            }
            if self.procedures[..i].iter().any(|p| p.kind == term.kind) {
                return Err(Error::Usage(format!(
                    "procedure {} listed more than once",
                    term.kind
                )));
            }
        }
        Ok(())
    }
}

/// Minimum per-meal EMH split reaching `problem.target_accuracy`.
pub fn optimal_allocation(problem: &AllocationProblem) -> Result<AllocationResult> {
    problem.validate()?;
    let terms = &problem.procedures;
    let target = problem.target_accuracy;

    if target == 0.0 {
        let n = terms.len();
        return Ok(AllocationResult {
            kinds: terms.iter().map(|t| t.kind).collect(),
            per_procedure_h: vec![0.0; n],
            per_procedure_accuracy: vec![0.0; n],
            per_procedure_total: vec![0.0; n],
            total_emh: 0.0,
            achieved_accuracy: 0.0,
        });
    }

    // log-accuracy per procedure; 0 means pinned at full accuracy
    let mut g = vec![0.0_f64; terms.len()];
    let ln_target = target.ln();
    if target < 1.0 {
        if let Some(t) = terms
            .iter()
            .find(|t| t.executions > 0.0 && t.params.alpha == 0.0)
        {
            return Err(Error::Infeasible(format!(
                "procedure {} has alpha = 0: its cost has no minimizer below full accuracy",
                t.kind
            )));
        }
        // Procedures nobody executes are free at full accuracy.
        let mut active: Vec<usize> = (0..terms.len())
            .filter(|&i| terms[i].executions > 0.0)
            .collect();
        if active.is_empty() {
            return Err(Error::Infeasible(
                "no executed procedure can absorb an accuracy loss".into(),
            ));
        }
        loop {
            // sum_i alpha_i * (ln(lambda) + ln(alpha_i / (n_i S_i))) = ln(target)
            let alpha_sum: f64 = active.iter().map(|&i| terms[i].params.alpha).sum();
            let offset_sum: f64 = active
                .iter()
                .map(|&i| terms[i].params.alpha * stationarity_shift(&terms[i]))
                .sum();
            let ln_lambda = (ln_target - offset_sum) / alpha_sum;
            let mut capped = Vec::new();
            for &i in &active {
                let gi = terms[i].params.alpha * (ln_lambda + stationarity_shift(&terms[i]));
                if gi >= 0.0 {
                    capped.push(i);
                    g[i] = 0.0;
                } else {
                    g[i] = gi;
                }
            }
            if capped.is_empty() {
                break;
            }
            active.retain(|i| !capped.contains(i));
            if active.is_empty() {
                return Err(Error::Infeasible(format!(
                    "cannot spread accuracy loss for target {target}"
                )));
            }
        }
    }

    let mut per_h = Vec::with_capacity(terms.len());
    let mut per_a = Vec::with_capacity(terms.len());
    let mut per_total = Vec::with_capacity(terms.len());
    for (term, &gi) in terms.iter().zip(&g) {
        let p = &term.params;
        let (h, a) = if gi >= 0.0 {
            (p.full_cost(), 1.0)
        } else {
            (p.offset + p.s_standard * (gi / p.alpha).exp(), gi.exp())
        };
        per_h.push(h);
        per_a.push(a);
        per_total.push(term.executions * h);
    }
    let total_emh = per_total.iter().sum();
    let achieved_accuracy = per_a.iter().product();
    Ok(AllocationResult {
        kinds: terms.iter().map(|t| t.kind).collect(),
        per_procedure_h: per_h,
        per_procedure_accuracy: per_a,
        per_procedure_total: per_total,
        total_emh,
        achieved_accuracy,
    })
}

fn stationarity_shift(term: &AllocationTerm) -> f64 {
    (term.params.alpha / (term.executions * term.params.s_standard)).ln()
}

/// `n * S * a^(1/alpha) / alpha`: the marginal per-meal cost of one unit of
/// log-accuracy. Equal across procedures that are not pinned at the optimum.
pub fn marginal_log_cost(term: &AllocationTerm, accuracy: f64) -> f64 {
    let p = &term.params;
    term.executions * p.s_standard * accuracy.powf(1.0 / p.alpha) / p.alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourPoint {
    pub a_setting: f64,
    pub a_labeling: f64,
    pub h_setting_total: f64,
    pub h_labeling_total: f64,
    pub h_sum: f64,
}

pub const CONTOUR_HEADER: [&str; 5] = [
    "a_setting",
    "a_labeling",
    "h_setting_total",
    "h_labeling_total",
    "h_sum",
];

/// Iso-accuracy curve in (total setting EMH, total labeling EMH) space for a
/// canteen without new dishes.
pub fn accuracy_contour(
    target: f64,
    grid_points: usize,
    profile: &CanteenProfile,
    model: &ModelParams,
) -> Result<Vec<ContourPoint>> {
    if profile.f_new != 0.0 {
        return Err(Error::Usage(format!(
            "accuracy contour requires f_new = 0, got {}",
            profile.f_new
        )));
    }
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::Domain(format!(
            "contour target must be in (0, 1], got {target}"
        )));
    }
    let n_set = profile.r_rotation;
    let n_label = profile.dishes_per_meal();
    let point = |a_set: f64| -> Result<ContourPoint> {
        let a_label = (target / a_set).min(1.0);
        let h_set = n_set * crate::accuracy::emh_for_accuracy(&model.setting, a_set)?;
        let h_label = n_label * crate::accuracy::emh_for_accuracy(&model.labeling, a_label)?;
        Ok(ContourPoint {
            a_setting: a_set,
            a_labeling: a_label,
            h_setting_total: h_set,
            h_labeling_total: h_label,
            h_sum: h_set + h_label,
        })
    };
    if target == 1.0 {
        return Ok(vec![point(1.0)?]);
    }
    if grid_points < 2 {
        return Err(Error::Usage("contour needs at least two grid points".into()));
    }
    let last = (grid_points - 1) as f64;
    (0..grid_points)
        .map(|k| {
            let a_set = if k + 1 == grid_points {
                1.0
            } else {
                target + (1.0 - target) * k as f64 / last
            };
            point(a_set)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CorrectionPolicy {
    /// Only the mandatory price fix at checkout.
    BillingOnly,
    /// Optionally reach the target by correcting up to `max_improvement`
    /// of accuracy at checkout.
    BalancedCorrection { max_improvement: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RfidMealCost {
    pub target: f64,
    /// Accuracy delivered by the staff procedures before checkout correction.
    pub pre_correction_accuracy: f64,
    pub allocation: AllocationResult,
    pub breakdown: CostBreakdown,
}

impl RfidMealCost {
    pub fn correction_emh(&self) -> f64 {
        self.breakdown.item_emh(BILLING_ITEM) + self.breakdown.item_emh(DATA_ITEM)
    }
}

pub const BILLING_ITEM: &str = "billing-correction";
pub const DATA_ITEM: &str = "data-correction";

fn rfid_sorc(
    profile: &CanteenProfile,
    model: &ModelParams,
    pre: f64,
    target: f64,
) -> Result<(AllocationResult, f64, f64)> {
    let allocation = optimal_allocation(&AllocationProblem::for_canteen(profile, model, pre))?;
    let corr = checkout_correction(pre, target, profile.dishes_per_meal(), &model.correction)?;
    Ok((allocation, corr.billing, corr.data))
}

/// Per-meal RFID cost at `target` accuracy.
pub fn rfid_meal_cost(
    profile: &CanteenProfile,
    model: &ModelParams,
    target: f64,
    policy: CorrectionPolicy,
) -> Result<RfidMealCost> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Infeasible(format!(
            "target accuracy {target} outside [0, 1]"
        )));
    }
    let pre = match policy {
        CorrectionPolicy::BillingOnly => target,
        CorrectionPolicy::BalancedCorrection { max_improvement } => {
            if !(max_improvement >= 0.0) {
                return Err(Error::config(
                    "max_improvement",
                    "max_improvement >= 0",
                    max_improvement,
                ));
            }
            let lo = (target - max_improvement).max(0.0);
            let cost = |a0: f64| -> Result<f64> {
                let (alloc, billing, data) = rfid_sorc(profile, model, a0, target)?;
                Ok(alloc.total_emh + billing + data)
            };
            let inner = golden_section_min(lo, target, 1e-4, &cost)?;
            // fall back to an endpoint whenever it is at least as cheap
            let mut best = (cost(target)?, target);
            for a0 in [inner, lo] {
                let c = cost(a0)?;
                if c < best.0 {
                    best = (c, a0);
                }
            }
            best.1
        }
    };
    let (allocation, billing, data) = rfid_sorc(profile, model, pre, target)?;
    let mut breakdown = CostBreakdown::default();
    for kind in [
        ProcedureKind::Inputting,
        ProcedureKind::Setting,
        ProcedureKind::Labeling,
    ] {
        breakdown.push(CostItem::staff(
            kind.as_str(),
            allocation.total_for(kind),
            profile.wage,
        ));
    }
    breakdown.push(CostItem::staff(BILLING_ITEM, billing, profile.wage));
    breakdown.push(CostItem::staff(DATA_ITEM, data, profile.wage));
    breakdown.extend(nsorc_per_meal(profile, System::Rfid, &model.catalog)?);
    Ok(RfidMealCost {
        target,
        pre_correction_accuracy: pre,
        allocation,
        breakdown,
    })
}

/// Minimizer of a unimodal function on `[lo, hi]` to within `tol`.
pub(crate) fn golden_section_min(
    lo: f64,
    hi: f64,
    tol: f64,
    f: &dyn Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

pub const CURVE_HEADER: [&str; 6] = [
    "target_accuracy",
    "emh_inputting",
    "emh_setting",
    "emh_labeling",
    "emh_correction",
    "emh_total",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub target_accuracy: f64,
    pub emh_inputting: f64,
    pub emh_setting: f64,
    pub emh_labeling: f64,
    pub emh_correction: f64,
    pub emh_total: f64,
}

impl From<&RfidMealCost> for CurveRow {
    fn from(c: &RfidMealCost) -> Self {
        let b = &c.breakdown;
        Self {
            target_accuracy: c.target,
            emh_inputting: b.item_emh(ProcedureKind::Inputting.as_str()),
            emh_setting: b.item_emh(ProcedureKind::Setting.as_str()),
            emh_labeling: b.item_emh(ProcedureKind::Labeling.as_str()),
            emh_correction: c.correction_emh(),
            emh_total: b.sorc_emh(),
        }
    }
}

/// One RFID meal cost per grid point, in grid order.
pub fn cost_accuracy_curve(
    profile: &CanteenProfile,
    model: &ModelParams,
    accuracy_grid: &[f64],
    policy: CorrectionPolicy,
) -> Result<Vec<RfidMealCost>> {
    accuracy_grid
        .iter()
        .map(|&t| rfid_meal_cost(profile, model, t, policy))
        .collect()
}

/// Evenly spaced accuracy grid `start, start + step, ..., end` (inclusive).
pub fn accuracy_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step).round() as usize;
    (0..=n)
        .map(|k| {
            // round to 12 decimals so 0.1-steps print as 0.3, not 0.30000000000000004
            let v = start + step * k as f64;
            (v * 1e12).round() / 1e12
        })
        .collect()
}
