//! Per-meal cost assembly: staff-operation-related cost (SORC, in EMH and
//! currency) and non-staff-operation-related cost (NSORC, equipment and
//! consumables priced per meal).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::accuracy::{emh_for_accuracy, EmhaParams};
use crate::error::{Error, Result};

/// Environment variable naming an alternative price catalog file.
pub const PRICE_CATALOG_ENV: &str = "SGC_PRICE_CATALOG";

const DEFAULT_CATALOG: &str = include_str!("../data/price_catalog.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Rfid,
    Cv,
}

impl System {
    pub fn as_str(&self) -> &'static str {
        match self {
            System::Rfid => "rfid",
            System::Cv => "cv",
        }
    }
}

impl std::fmt::Display for System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rfid" => Ok(System::Rfid),
            "cv" => Ok(System::Cv),
            other => Err(Error::Usage(format!("unknown system `{other}` (expected rfid or cv)"))),
        }
    }
}

/// Canteen features plus the economic constants that turn EMH into money.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CanteenProfile {
    pub name: String,
    /// Dish types served per meal (T).
    pub t_types: u32,
    /// Dishes prepared per type (N).
    pub n_per_type: u32,
    /// New dish types introduced per meal (F).
    pub f_new: f64,
    /// Known dish types rotated onto the menu per meal (R).
    pub r_rotation: f64,
    /// Checkout transactions per meal.
    pub customers: u32,
    /// Currency per EMH hour.
    pub wage: f64,
    /// Customers one checkout lane serves per meal.
    pub checkout_velocity: f64,
    /// Price of one RFID plate; `None` uses the catalog's plate-loss row.
    pub plate_price: Option<f64>,
    /// Fraction of plates lost per plate-use.
    pub plate_loss_rate: f64,
    /// Manual samples taken when a new dish type is introduced to a CV system.
    pub samples_per_new_type: u32,
    /// EMH hours per manual CV sample.
    pub sample_emh: f64,
    /// EMH hours to record one transaction by hand at full accuracy.
    pub manual_record_emh: f64,
    pub currency: String,
}

impl Default for CanteenProfile {
    fn default() -> Self {
        Self::baseline()
    }
}

impl CanteenProfile {
    /// The reference canteen: T=20, N=70, F=0.3, R=6, 450 customers.
    pub fn baseline() -> Self {
        Self {
            name: "baseline".into(),
            t_types: 20,
            n_per_type: 70,
            f_new: 0.3,
            r_rotation: 6.0,
            customers: 450,
            wage: 24.0,
            checkout_velocity: 300.0,
            plate_price: None,
            plate_loss_rate: 1e-4,
            samples_per_new_type: 5,
            sample_emh: 0.33,
            manual_record_emh: 0.07,
            currency: "RMB".into(),
        }
    }

    /// Baseline scaled up to 50 dish types and 900 customers.
    pub fn enlarged() -> Self {
        Self {
            name: "enlarged".into(),
            t_types: 50,
            customers: 900,
            ..Self::baseline()
        }
    }

    /// Every dish served is one data record.
    pub fn dishes_per_meal(&self) -> f64 {
        f64::from(self.t_types) * f64::from(self.n_per_type)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_types < 1 {
            return Err(Error::config("t_types", "t_types >= 1", self.t_types));
        }
        if self.n_per_type < 1 {
            return Err(Error::config("n_per_type", "n_per_type >= 1", self.n_per_type));
        }
        if !(self.f_new >= 0.0 && self.f_new <= f64::from(self.t_types)) {
            return Err(Error::config("f_new", "0 <= f_new <= t_types", self.f_new));
        }
        if !(self.r_rotation >= 0.0 && self.r_rotation <= f64::from(self.t_types)) {
            return Err(Error::config(
                "r_rotation",
                "0 <= r_rotation <= t_types",
                self.r_rotation,
            ));
        }
        if self.customers < 1 {
            return Err(Error::config("customers", "customers >= 1", self.customers));
        }
        positive("wage", self.wage)?;
        positive("checkout_velocity", self.checkout_velocity)?;
        if let Some(p) = self.plate_price {
            non_negative("plate_price", p)?;
        }
        if !(0.0..=1.0).contains(&self.plate_loss_rate) {
            return Err(Error::config(
                "plate_loss_rate",
                "plate_loss_rate in [0, 1]",
                self.plate_loss_rate,
            ));
        }
        non_negative("sample_emh", self.sample_emh)?;
        positive("manual_record_emh", self.manual_record_emh)?;
        Ok(())
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, &format!("{field} > 0"), v))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, &format!("{field} >= 0"), v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountRule {
    /// One unit per dish type on the menu.
    PerT,
    /// One unit per checkout lane.
    PerM,
    #[serde(rename = "fixed-1")]
    Fixed1,
    /// `T * N * plate_loss_rate` plates lost per meal.
    PlateLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub label: String,
    pub system: System,
    /// Currency per unit per meal, five-year straight-line amortization included.
    pub unit_price: f64,
    pub count_rule: CountRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceCatalog {
    pub entries: Vec<CatalogEntry>,
}

impl Default for PriceCatalog {
    fn default() -> Self {
        Self::parse(DEFAULT_CATALOG, "built-in catalog").expect("built-in catalog is valid")
    }
}

impl PriceCatalog {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for row in reader.deserialize::<CatalogEntry>() {
            let entry = row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::Parse {
                    source_name: source_name.to_string(),
                    line,
                    column: 0,
                    message: e.to_string(),
                }
            })?;
            if !(entry.unit_price >= 0.0 && entry.unit_price.is_finite()) {
                return Err(Error::config(
                    &format!("unit_price of {}", entry.label),
                    "unit_price >= 0",
                    entry.unit_price,
                ));
            }
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Catalog from `$SGC_PRICE_CATALOG` if set, else the built-in table.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(PRICE_CATALOG_ENV) {
            Some(p) if !p.is_empty() => Self::from_path(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    /// Replace the unit price of every row with this label (either system).
    pub fn override_price(&mut self, label: &str, unit_price: f64) -> Result<()> {
        let mut hit = false;
        for e in self.entries.iter_mut().filter(|e| e.label == label) {
            e.unit_price = unit_price;
            hit = true;
        }
        if hit {
            Ok(())
        } else {
            Err(Error::Usage(format!("price override for unknown catalog item `{label}`")))
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(e)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostGroup {
    #[serde(rename = "SORC")]
    Sorc,
    #[serde(rename = "NSORC")]
    Nsorc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostItem {
    pub label: String,
    pub group: CostGroup,
    /// EMH hours; zero for equipment items.
    pub emh: f64,
    pub currency: f64,
}

impl CostItem {
    pub fn staff(label: impl Into<String>, emh: f64, wage: f64) -> Self {
        Self {
            label: label.into(),
            group: CostGroup::Sorc,
            emh,
            currency: emh_to_currency(emh, wage),
        }
    }

    pub fn equipment(label: impl Into<String>, currency: f64) -> Self {
        Self {
            label: label.into(),
            group: CostGroup::Nsorc,
            emh: 0.0,
            currency,
        }
    }
}

/// Itemized per-meal cost. Totals are always recomputed from the items.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CostBreakdown {
    pub items: Vec<CostItem>,
}

impl CostBreakdown {
    pub fn push(&mut self, item: CostItem) {
        self.items.push(item);
    }

    pub fn extend(&mut self, other: CostBreakdown) {
        self.items.extend(other.items);
    }

    pub fn item(&self, label: &str) -> Option<&CostItem> {
        self.items.iter().find(|i| i.label == label)
    }

    pub fn item_emh(&self, label: &str) -> f64 {
        self.item(label).map_or(0.0, |i| i.emh)
    }

    pub fn item_currency(&self, label: &str) -> f64 {
        self.item(label).map_or(0.0, |i| i.currency)
    }

    fn group_iter(&self, group: CostGroup) -> impl Iterator<Item = &CostItem> {
        self.items.iter().filter(move |i| i.group == group)
    }

    pub fn sorc_emh(&self) -> f64 {
        self.group_iter(CostGroup::Sorc).map(|i| i.emh).sum()
    }

    pub fn sorc_currency(&self) -> f64 {
        self.group_iter(CostGroup::Sorc).map(|i| i.currency).sum()
    }

    pub fn nsorc_currency(&self) -> f64 {
        self.group_iter(CostGroup::Nsorc).map(|i| i.currency).sum()
    }

    pub fn total_currency(&self) -> f64 {
        self.items.iter().map(|i| i.currency).sum()
    }

    pub fn nsorc_share(&self) -> f64 {
        let total = self.total_currency();
        if total > 0.0 {
            self.nsorc_currency() / total
        } else {
            0.0
        }
    }
}

/// Number of checkout lanes: `ceil(customers / checkout_velocity)`, at least one.
pub fn device_count(profile: &CanteenProfile) -> Result<u32> {
    positive("checkout_velocity", profile.checkout_velocity)?;
    let lanes = (f64::from(profile.customers) / profile.checkout_velocity).ceil();
    Ok((lanes as u32).max(1))
}

/// Equipment, software and consumable cost per meal for one system.
pub fn nsorc_per_meal(
    profile: &CanteenProfile,
    system: System,
    catalog: &PriceCatalog,
) -> Result<CostBreakdown> {
    let m = f64::from(device_count(profile)?);
    let t = f64::from(profile.t_types);
    let mut out = CostBreakdown::default();
    for entry in catalog.entries.iter().filter(|e| e.system == system) {
        let currency = match entry.count_rule {
            CountRule::PerT => t * entry.unit_price,
            CountRule::PerM => m * entry.unit_price,
            CountRule::Fixed1 => entry.unit_price,
            CountRule::PlateLoss => {
                let price = profile.plate_price.unwrap_or(entry.unit_price);
                profile.dishes_per_meal() * profile.plate_loss_rate * price
            }
        };
        out.push(CostItem::equipment(entry.label.clone(), currency));
    }
    Ok(out)
}

pub fn emh_to_currency(h: f64, wage: f64) -> f64 {
    h * wage
}

/// Fixed price fix every erroneous record needs so the bill is right.
pub fn billing_correction_cost(system_accuracy: f64, dishes_per_meal: f64, corr: &EmhaParams) -> f64 {
    (1.0 - system_accuracy) * dishes_per_meal * corr.offset
}

/// EMH to raise record accuracy from `a_base` to `a_target` by correcting at
/// checkout. Each of the `(1 - a_base) * dishes` erroneous records is handled
/// with the effort that makes a correction succeed with probability
/// `rho = (a_target - a_base) / (1 - a_base)`, which includes the fixed price
/// fix carried as the correction offset.
pub fn data_correction(
    a_base: f64,
    a_target: f64,
    dishes_per_meal: f64,
    corr: &EmhaParams,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&a_base) || !(0.0..=1.0).contains(&a_target) {
        return Err(Error::Domain(format!(
            "accuracies must be in [0, 1], got {a_base} -> {a_target}"
        )));
    }
    if a_target < a_base {
        return Err(Error::Usage(format!(
            "target accuracy {a_target} is below base accuracy {a_base}"
        )));
    }
    if a_target == a_base {
        return Ok(0.0);
    }
    let errors = 1.0 - a_base;
    let rho = ((a_target - a_base) / errors).min(1.0);
    let per_error = emh_for_accuracy(corr, rho)?;
    Ok(errors * dishes_per_meal * per_error)
}

/// Checkout correction effort split into the mandatory billing part and the
/// optional data-quality part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionEffort {
    pub billing: f64,
    pub data: f64,
}

impl CorrectionEffort {
    pub fn total(&self) -> f64 {
        self.billing + self.data
    }
}

/// Total checkout correction when records arrive at `a_base` and leave at
/// `a_target`. Without improvement only the billing fix is paid; with
/// improvement the data correction already contains the billing fix for every
/// erroneous record, so it is not charged twice.
pub fn checkout_correction(
    a_base: f64,
    a_target: f64,
    dishes_per_meal: f64,
    corr: &EmhaParams,
) -> Result<CorrectionEffort> {
    let billing = billing_correction_cost(a_base, dishes_per_meal, corr);
    if a_target <= a_base {
        return Ok(CorrectionEffort { billing, data: 0.0 });
    }
    let total = data_correction(a_base, a_target, dishes_per_meal, corr)?;
    Ok(CorrectionEffort {
        billing,
        data: (total - billing).max(0.0),
    })
}
