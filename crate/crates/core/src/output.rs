//! CSV emission. Floats are written in shortest round-trip form, so a
//! deterministic computation always yields the same bytes.

use crate::cost::CostBreakdown;
use crate::cv::{MealRecord, TRAJECTORY_HEADER};
use crate::error::{Error, Result};
use crate::experiments::{
    CompareTable, CorrectionBalanceRow, MarginalSlope, SensitivityRow, StandardizationRow,
    SweepTable, COMPARE_HEADER, CORRECTION_BALANCE_HEADER, MARGINAL_HEADER, SENSITIVITY_HEADER,
    STANDARDIZATION_HEADER, SWEEP_HEADER,
};
use crate::rfid::{ContourPoint, CurveRow, RfidMealCost, CONTOUR_HEADER, CURVE_HEADER};

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Four significant digits for human-facing summaries.
pub fn human(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let digits = 3 - v.abs().log10().floor() as i32;
    if digits > 0 {
        format!("{:.*}", digits as usize, v)
    } else {
        format!("{:.0}", v)
    }
}

pub fn to_csv<I>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn trajectory_csv(trajectory: &[MealRecord]) -> Result<String> {
    to_csv(
        &TRAJECTORY_HEADER,
        trajectory.iter().map(|r| {
            vec![
                r.meal_index.to_string(),
                fmt_f64(r.accuracy),
                fmt_f64(r.sampling_emh),
                fmt_f64(r.billing_emh),
                fmt_f64(r.total_emh),
                r.new_types.to_string(),
                r.rotated_types.to_string(),
            ]
        }),
    )
}

pub fn curve_csv(curve: &[RfidMealCost]) -> Result<String> {
    to_csv(
        &CURVE_HEADER,
        curve.iter().map(|c| {
            let r = CurveRow::from(c);
            vec![
                fmt_f64(r.target_accuracy),
                fmt_f64(r.emh_inputting),
                fmt_f64(r.emh_setting),
                fmt_f64(r.emh_labeling),
                fmt_f64(r.emh_correction),
                fmt_f64(r.emh_total),
            ]
        }),
    )
}

pub fn contour_csv(points: &[ContourPoint]) -> Result<String> {
    to_csv(
        &CONTOUR_HEADER,
        points.iter().map(|p| {
            vec![
                fmt_f64(p.a_setting),
                fmt_f64(p.a_labeling),
                fmt_f64(p.h_setting_total),
                fmt_f64(p.h_labeling_total),
                fmt_f64(p.h_sum),
            ]
        }),
    )
}

pub fn breakdown_csv(breakdown: &CostBreakdown) -> Result<String> {
    to_csv(
        &["label", "group", "emh", "currency"],
        breakdown.items.iter().map(|i| {
            vec![
                i.label.clone(),
                match i.group {
                    crate::cost::CostGroup::Sorc => "SORC".into(),
                    crate::cost::CostGroup::Nsorc => "NSORC".into(),
                },
                fmt_f64(i.emh),
                fmt_f64(i.currency),
            ]
        }),
    )
}

pub fn sweep_csv(table: &SweepTable) -> Result<String> {
    let label = table.parameter.label();
    to_csv(
        &SWEEP_HEADER,
        table.rows.iter().map(|r| {
            vec![
                label.clone(),
                fmt_f64(r.value),
                r.system.to_string(),
                r.target.to_string(),
                fmt_f64(r.sorc_emh),
                fmt_f64(r.accuracy),
                fmt_f64(r.breakdown.nsorc_currency()),
                fmt_f64(r.breakdown.total_currency()),
            ]
        }),
    )
}

pub fn marginal_csv(slopes: &[MarginalSlope]) -> Result<String> {
    to_csv(
        &MARGINAL_HEADER,
        slopes.iter().map(|s| {
            vec![
                s.system.to_string(),
                s.target.to_string(),
                s.points.to_string(),
                fmt_opt(s.cost_slope),
                fmt_opt(s.accuracy_slope),
            ]
        }),
    )
}

pub fn compare_csv(table: &CompareTable) -> Result<String> {
    to_csv(
        &COMPARE_HEADER,
        table.rows.iter().map(|r| {
            vec![
                fmt_f64(r.target),
                fmt_f64(r.rfid_total),
                fmt_f64(r.cv_total),
                fmt_f64(r.manual_total),
                r.cheaper.to_string(),
                fmt_f64(r.saving),
            ]
        }),
    )
}

pub fn standardization_csv(rows: &[StandardizationRow]) -> Result<String> {
    to_csv(
        &STANDARDIZATION_HEADER,
        rows.iter().map(|r| {
            vec![
                r.system.to_string(),
                fmt_f64(r.accuracy_base),
                fmt_f64(r.accuracy_standardized),
                fmt_f64(r.sorc_emh_base),
                fmt_f64(r.sorc_emh_standardized),
                fmt_f64(r.total_base),
                fmt_f64(r.total_standardized),
                fmt_f64(r.sorc_saving),
                fmt_f64(r.total_saving),
            ]
        }),
    )
}

pub fn sensitivity_csv(rows: &[SensitivityRow]) -> Result<String> {
    to_csv(
        &SENSITIVITY_HEADER,
        rows.iter().map(|r| {
            vec![
                fmt_f64(r.deviation),
                fmt_f64(r.value),
                fmt_f64(r.sorc_high),
                fmt_f64(r.sorc_low),
                fmt_f64(r.sorc_change_high),
                fmt_f64(r.sorc_change_low),
                fmt_f64(r.total_change_high),
                fmt_opt(r.sp_accuracy),
                fmt_opt(r.sp_accuracy_change),
            ]
        }),
    )
}

pub fn correction_balance_csv(rows: &[CorrectionBalanceRow]) -> Result<String> {
    to_csv(
        &CORRECTION_BALANCE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.capacity.to_string(),
                fmt_f64(r.dishes_per_meal),
                fmt_f64(r.sp_accuracy),
                fmt_f64(r.threshold),
                fmt_f64(r.limit),
                r.knee_found.to_string(),
            ]
        }),
    )
}
